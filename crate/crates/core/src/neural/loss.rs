/// Mean pinball loss over the output components.
///
/// Each component costs `alpha * (actual - predicted)` when
/// `predicted <= actual` and `(1 - alpha) * (predicted - actual)` otherwise.
pub fn pinball_loss(predicted: &[f64], actual: &[f64], alpha: f64) -> f64 {
    debug_assert_eq!(predicted.len(), actual.len());
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(&p, &a)| if p <= a { alpha * (a - p) } else { (1.0 - alpha) * (p - a) })
        .sum();
    total / predicted.len() as f64
}

/// Gradient of [`pinball_loss`] with respect to `predicted`, written into `out`.
///
/// At a zero residual the `predicted <= actual` branch applies, giving `-alpha / n`.
pub fn pinball_grad(predicted: &[f64], actual: &[f64], alpha: f64, out: &mut [f64]) {
    let n = predicted.len() as f64;
    for ((g, &p), &a) in out.iter_mut().zip(predicted).zip(actual) {
        *g = if p <= a { -alpha / n } else { (1.0 - alpha) / n };
    }
}
