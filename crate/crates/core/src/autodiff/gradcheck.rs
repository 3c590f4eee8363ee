use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Compares analytic gradients of `loss` against central finite differences
/// for every element of `params`, returning the maximum relative error
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`.
pub fn grad_check<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    epsilon: f64,
    loss: F,
) -> Result<f64>
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Config(format!(
            "grad_check epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let grads = {
        let mut tape = Tape::new(store);
        let l = loss(&mut tape)?;
        tape.backward(l)?
    };

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new(store);
        let l = loss(&mut tape)?;
        let v = tape.value(l).item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { op: "grad_check" })
        }
    };

    let mut worst: f64 = 0.0;
    for &id in params {
        let analytic = grads.get_or_zeros(id, store);
        for k in 0..analytic.len() {
            let orig = store.get(id).data()[k];
            store.get_mut(id).data_mut()[k] = orig + epsilon;
            let plus = eval(store);
            store.get_mut(id).data_mut()[k] = orig - epsilon;
            let minus = eval(store);
            store.get_mut(id).data_mut()[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * epsilon);
            let a = analytic.data()[k];
            let denom = a.abs().max(numeric.abs()).max(1e-12);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
