use crate::linalg::DenseMatrix;

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy between targets in `[0, 1]` and `sigmoid(logits)`,
/// summed over columns and averaged over rows.
///
/// Evaluated as `max(l, 0) - l x + log(1 + e^-|l|)`, which stays finite for
/// any finite logit.
pub fn bce_with_logits(targets: &DenseMatrix, logits: &DenseMatrix) -> f64 {
    assert_eq!(targets.shape(), logits.shape(), "bce: shape mismatch");
    let total: f64 = targets
        .as_slice()
        .iter()
        .zip(logits.as_slice())
        .map(|(&x, &l)| l.max(0.0) - l * x + (-l.abs()).exp().ln_1p())
        .sum();
    total / targets.rows() as f64
}

/// Gradient of [`bce_with_logits`] with respect to the logits.
pub fn bce_with_logits_grad(targets: &DenseMatrix, logits: &DenseMatrix) -> DenseMatrix {
    assert_eq!(targets.shape(), logits.shape(), "bce: shape mismatch");
    let inv_b = 1.0 / targets.rows() as f64;
    let data = targets
        .as_slice()
        .iter()
        .zip(logits.as_slice())
        .map(|(&x, &l)| (sigmoid(l) - x) * inv_b)
        .collect();
    DenseMatrix::from_vec(targets.rows(), targets.cols(), data)
}
