use crate::bilm::ContextVectors;
use crate::error::Result;
use crate::tensor::{self, NDArray};

/// Cosine similarity between every pair of positions in one layer,
/// `[N, N]`. Pairs involving a zero vector score 0.
pub fn similarity_matrix(cv: &ContextVectors, layer: usize) -> Result<NDArray> {
    let h = cv.layer(layer)?;
    let n = h.rows();
    let norms: Vec<f64> = (0..n).map(|k| tensor::norm(h.row_slice(k))).collect();
    let zero = norms.iter().filter(|&&v| v == 0.0).count();
    if zero > 0 {
        log::warn!("similarity_matrix: {zero} zero-norm rows in layer {layer}");
    }
    let mut out = NDArray::zeros(&[n, n]);
    for i in 0..n {
        if norms[i] == 0.0 {
            continue;
        }
        out.set(i, i, 1.0);
        for j in i + 1..n {
            if norms[j] == 0.0 {
                continue;
            }
            let c = tensor::dot(h.row_slice(i), h.row_slice(j)) / (norms[i] * norms[j]);
            out.set(i, j, c);
            out.set(j, i, c);
        }
    }
    Ok(out)
}
