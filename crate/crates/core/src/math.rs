//! Small numeric helpers shared across the crate.

/// Numerically stable `log(sum(exp(x)))`. Returns negative infinity for an
/// empty iterator.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = values.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // Empty, all -inf, or a +inf term: the max is the answer in each case.
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Logistic function, stable on both tails.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Decodes a bit mask into a sign vector: bit i set means entry i is +1,
/// otherwise -1.
pub fn sign_config(mask: usize, k: usize) -> Vec<i8> {
    (0..k)
        .map(|i| if mask >> i & 1 == 1 { 1 } else { -1 })
        .collect()
}

/// Plain dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
