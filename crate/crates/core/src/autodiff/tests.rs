use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::tensor::NDArray;

fn row(v: &[f64]) -> NDArray {
    NDArray::row(v)
}

#[test]
fn sum_of_squares() {
    let mut tape = Tape::detached();
    let x = tape.constant(row(&[1.0, 2.0, 3.0])).unwrap();
    let sq = tape.mul(x, x).unwrap();
    let s = tape.sum(sq).unwrap();
    assert_eq!(tape.value(s).item(), 14.0);
}

#[test]
fn softmax_of_zeros() {
    let mut tape = Tape::detached();
    let x = tape.constant(row(&[0.0, 0.0, 0.0])).unwrap();
    let s = tape.softmax_rows(x).unwrap();
    for &v in tape.value(s).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn layer_norm_standardizes() {
    let mut tape = Tape::detached();
    let x = tape.constant(row(&[3.0, -1.0, 4.0, 1.5, 9.0])).unwrap();
    let y = tape.layer_norm(x, 1e-12).unwrap();
    let v = tape.value(y).data();
    let mean = v.iter().sum::<f64>() / 5.0;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 5.0;
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-10);
}

#[test]
fn gradient_of_sum_of_squares() {
    let mut store = ParamStore::new();
    let x = store.add("x", row(&[1.0, 2.0]));
    let mut tape = Tape::new(&store);
    let xv = tape.param(x);
    let sq = tape.mul(xv, xv).unwrap();
    let l = tape.sum(sq).unwrap();
    let g = tape.backward(l).unwrap();
    assert_eq!(g.get(x).unwrap().data(), &[2.0, 4.0]);
}

#[test]
fn product_rule() {
    let mut store = ParamStore::new();
    let a = store.add("a", NDArray::scalar(3.0));
    let b = store.add("b", NDArray::scalar(5.0));
    let mut tape = Tape::new(&store);
    let (av, bv) = (tape.param(a), tape.param(b));
    let l = tape.mul(av, bv).unwrap();
    let g = tape.backward(l).unwrap();
    assert_eq!(g.get(a).unwrap().item(), 5.0);
    assert_eq!(g.get(b).unwrap().item(), 3.0);
}

#[test]
fn softmax_cross_entropy_matches_finite_differences() {
    let mut store = ParamStore::new();
    let logits = store.add("logits", row(&[0.3, -1.2, 2.0, 0.7]));
    let err = grad_check(&mut store, &[logits], 1e-5, |t| {
        let l = t.param(logits);
        t.cross_entropy(l, &[2])
    })
    .unwrap();
    assert!(err <= 1e-6, "rel err {err}");
}

#[test]
fn quadratic_grad_check_is_tight() {
    let mut store = ParamStore::new();
    let x = store.add("x", row(&[0.5, -1.5, 2.5]));
    let err = grad_check(&mut store, &[x], 1e-5, |t| {
        let v = t.param(x);
        let sq = t.mul(v, v)?;
        t.sum(sq)
    })
    .unwrap();
    assert!(err <= 1e-8, "rel err {err}");
}

#[test]
fn grad_check_rejects_bad_epsilon() {
    let mut store = ParamStore::new();
    let x = store.add("x", NDArray::scalar(1.0));
    let r = grad_check(&mut store, &[x], 0.1, |t| Ok(t.param(x)));
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn unreached_parameters_get_zero() {
    let mut store = ParamStore::new();
    let used = store.add("used", NDArray::scalar(2.0));
    let unused = store.add("unused", row(&[1.0, 1.0]));
    let mut tape = Tape::new(&store);
    let u = tape.param(used);
    let _ = tape.param(unused);
    let l = tape.scale(u, 3.0).unwrap();
    let g = tape.backward(l).unwrap();
    assert_eq!(g.get(unused).unwrap().data(), &[0.0, 0.0]);
    assert_eq!(g.get_or_zeros(unused, &store).data(), &[0.0, 0.0]);
}

#[test]
fn backward_errors() {
    let mut store = ParamStore::new();
    let x = store.add("x", row(&[1.0, 2.0]));
    let mut tape = Tape::new(&store);
    let v = tape.param(x);
    assert!(matches!(tape.backward(v), Err(Error::NonScalarLoss(_))));
    let s = tape.sum(v).unwrap();
    tape.backward(s).unwrap();
    assert!(matches!(tape.backward(s), Err(Error::TapeConsumed)));
}

#[test]
fn non_finite_is_an_error() {
    let mut tape = Tape::detached();
    let x = tape.constant(row(&[1e300])).unwrap();
    let r = tape.mul(x, x);
    assert!(matches!(r, Err(Error::NonFinite { op: "mul" })));
    assert!(tape.constant(row(&[f64::NAN])).is_err());
}

#[test]
fn shape_mismatch_is_an_error() {
    let mut tape = Tape::detached();
    let a = tape.constant(NDArray::zeros(&[2, 3])).unwrap();
    let b = tape.constant(NDArray::zeros(&[2, 2])).unwrap();
    assert!(matches!(tape.add(a, b), Err(Error::Shape { .. })));
    assert!(matches!(tape.matmul(a, a), Err(Error::Shape { .. })));
}

#[test]
fn masked_softmax_zeroes_disallowed_entries() {
    let mut tape = Tape::detached();
    let x = tape
        .constant(NDArray::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.5, 0.1, 9.0]]).unwrap())
        .unwrap();
    let p = tape.softmax_rows_masked(x, |r, c| c <= r).unwrap();
    let v = tape.value(p);
    assert_eq!(v.get(0, 0), 1.0);
    assert_eq!(v.get(0, 1), 0.0);
    assert_eq!(v.get(0, 2), 0.0);
    assert_eq!(v.get(1, 2), 0.0);
    assert!((v.get(1, 0) + v.get(1, 1) - 1.0).abs() < 1e-15);
}

#[test]
fn windows_pad_left_for_causal_convolution() {
    let mut tape = Tape::detached();
    let x = tape
        .constant(NDArray::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap())
        .unwrap();
    let w = tape.windows(x, 2, 1, 0).unwrap();
    assert_eq!(tape.value(w).shape(), &[3, 2]);
    assert_eq!(tape.value(w).data(), &[0.0, 1.0, 1.0, 2.0, 2.0, 3.0]);
}

/// Builds a loss that touches one op of the inventory, given parameters
/// `a: [3, 4]`, `b: [4, 3]`, `r: [1, 4]`.
fn op_loss(op: usize, t: &mut Tape, a: ParamId, b: ParamId, r: ParamId) -> crate::Result<Var> {
    let (a, b, r) = (t.param(a), t.param(b), t.param(r));
    let out = match op {
        0 => t.matmul(a, b)?,
        1 => {
            let x = t.add(a, r)?;
            t.tanh(x)?
        }
        2 => {
            let x = t.mul(a, r)?;
            t.sigmoid(x)?
        }
        3 => {
            let x = t.sub(a, r)?;
            let y = t.relu(x)?;
            t.mul(y, y)?
        }
        4 => {
            let s = t.softmax_rows(a)?;
            t.mul(s, a)?
        }
        5 => {
            let s = t.softmax_rows_masked(a, |i, j| j <= i)?;
            t.mul(s, a)?
        }
        6 => {
            let n = t.layer_norm(a, 1e-5)?;
            t.mul(n, a)?
        }
        7 => {
            let g = t.gather(b, &[0, 2, 2, 3])?;
            let tr = t.transpose(a)?;
            let x = t.mul(g, tr)?;
            t.mul(x, x)?
        }
        8 => {
            let x = t.concat_rows(&[a, r])?;
            let y = t.concat_cols(&[x, x])?;
            let z = t.slice_cols(y, 1, 6)?;
            let z = t.slice_rows(z, 1, 4)?;
            t.mul(z, z)?
        }
        9 => {
            let w = t.windows(a, 3, 2, 1)?;
            let k = t.concat_rows(&[b, b, b])?;
            let c = t.matmul(w, k)?;
            let m = t.max_rows(c)?;
            t.mul(m, m)?
        }
        10 => {
            let rev = t.reverse_rows(a)?;
            let x = t.mul(rev, a)?;
            t.scale(x, 0.7)?
        }
        11 => {
            let logits = t.matmul(a, b)?;
            return t.cross_entropy(logits, &[2, 0, 1]);
        }
        12 => {
            let s = t.slice_cols(r, 0, 1)?;
            let x = t.mul(a, s)?;
            t.add(x, s)?
        }
        _ => unreachable!(),
    };
    let m = t.mean(out)?;
    let sq = t.mul(m, m)?;
    t.add(sq, m)
}

const OP_COUNT: usize = 13;

fn random_store(seed: u64) -> (ParamStore, ParamId, ParamId, ParamId) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let a = store.add("a", NDArray::uniform(&[3, 4], 1.0, &mut rng));
    let b = store.add("b", NDArray::uniform(&[4, 3], 1.0, &mut rng));
    let r = store.add("r", NDArray::uniform(&[1, 4], 1.0, &mut rng));
    (store, a, b, r)
}

#[test]
fn every_op_matches_finite_differences() {
    for seed in 0..5 {
        for op in 0..OP_COUNT {
            let (mut store, a, b, r) = random_store(seed);
            let err = grad_check(&mut store, &[a, b, r], 1e-6, |t| op_loss(op, t, a, b, r)).unwrap();
            assert!(err <= 1e-4, "op {op} seed {seed}: rel err {err}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradients_are_linear(seed in 0u64..1000, f in 0..OP_COUNT, g in 0..OP_COUNT) {
        let (store, a, b, r) = random_store(seed);
        let grad_of = |ops: &[usize]| {
            let mut t = Tape::new(&store);
            let mut total = None;
            for &op in ops {
                let l = op_loss(op, &mut t, a, b, r).unwrap();
                total = Some(match total {
                    None => l,
                    Some(acc) => t.add(acc, l).unwrap(),
                });
            }
            t.backward(total.unwrap()).unwrap()
        };
        let both = grad_of(&[f, g]);
        let gf = grad_of(&[f]);
        let gg = grad_of(&[g]);
        for id in [a, b, r] {
            let mut sum = gf.get_or_zeros(id, &store);
            sum.add_assign(&gg.get_or_zeros(id, &store));
            let diff = both.get_or_zeros(id, &store).max_abs_diff(&sum);
            prop_assert!(diff <= 1e-10, "diff {}", diff);
        }
    }

    #[test]
    fn forward_is_deterministic(seed in 0u64..1000, op in 0..OP_COUNT) {
        let (store, a, b, r) = random_store(seed);
        let run = || {
            let mut t = Tape::new(&store);
            let l = op_loss(op, &mut t, a, b, r).unwrap();
            t.value(l).item().to_bits()
        };
        prop_assert_eq!(run(), run());
    }
}
