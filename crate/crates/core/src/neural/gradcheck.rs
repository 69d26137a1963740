use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{pinball_grad, LstmWeights, ModelConfig};

/// How targets are drawn at each checked point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// Uniform in [-1, 1].
    Random,
    /// Equal to the prediction, so every residual sits on the pinball kink.
    AtPrediction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub targets: TargetMode,
    /// Points with any residual smaller than this are skipped.
    pub kink_margin: f64,
    /// Doubles the analytic gradient at this parameter index before comparing.
    /// Used to confirm the checker catches a broken backward pass.
    pub corrupt: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { targets: TargetMode::Random, kink_margin: 1e-3, corrupt: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub points_tested: usize,
    pub points_skipped: usize,
    /// Parameter entries, over all tested points, whose error exceeded the tolerance.
    pub failures: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compares backpropagated gradients against central finite differences at
/// `n_points` random weight/input/target draws seeded by `config.seed`.
pub fn grad_check(config: &ModelConfig, n_points: usize, tolerance: f64) -> GradCheckReport {
    grad_check_with(config, n_points, tolerance, GradCheckOptions::default())
}

pub fn grad_check_with(
    config: &ModelConfig,
    n_points: usize,
    tolerance: f64,
    options: GradCheckOptions,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let alpha = config.quantile;
    let mut report = GradCheckReport { max_rel_error: 0.0, points_tested: 0, points_skipped: 0, failures: 0 };

    for _ in 0..n_points {
        let point_config = ModelConfig { seed: rng.gen(), ..*config };
        let mut weights = LstmWeights::init(&point_config);
        // Non-trivial biases so every gate path carries gradient.
        for p in weights.params_mut().iter_mut() {
            *p += rng.gen_range(-0.1..0.1);
        }
        let seq: Vec<f64> = (0..config.sequence_length * config.input_size).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let predicted = weights.forward(&seq).expect("finite inputs").output().to_vec();
        let target: Vec<f64> = match options.targets {
            TargetMode::Random => (0..config.output_size).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            TargetMode::AtPrediction => predicted.clone(),
        };
        if predicted.iter().zip(&target).any(|(p, t)| (p - t).abs() < options.kink_margin) {
            report.points_skipped += 1;
            continue;
        }

        let mut analytic = LstmWeights::zeros(weights.layout());
        let cache = weights.forward(&seq).expect("finite inputs");
        let mut d_out = vec![0.0; config.output_size];
        pinball_grad(cache.output(), &target, alpha, &mut d_out);
        weights.backward_into(&cache, &d_out, 1.0, &mut analytic);
        if let Some(k) = options.corrupt {
            analytic.params_mut()[k] *= 2.0;
        }

        // Away from the kink the pinball loss is linear in each output, so the
        // loss difference is a slope-weighted sum of output differences. The
        // head term `W_y h` and the bias are differenced separately; this keeps
        // the target and shared bias out of the subtraction, which would
        // otherwise add round-off comparable to the smallest gradients.
        let slopes: Vec<f64> = predicted
            .iter()
            .zip(&target)
            .map(|(p, t)| if p <= t { -alpha } else { 1.0 - alpha } / config.output_size as f64)
            .collect();
        let steps = config.sequence_length;
        let head_terms = |w: &LstmWeights| -> Vec<f64> {
            let cache = w.forward(&seq).expect("finite inputs");
            let h = cache.hidden_state(steps);
            w.head_w().chunks(h.len()).map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum()).collect()
        };
        for k in 0..weights.params().len() {
            let theta = weights.params()[k];
            let h = 1e-5 * theta.abs().max(1.0);
            weights.params_mut()[k] = theta + h;
            let (up, bias_up) = (head_terms(&weights), weights.head_b().to_vec());
            weights.params_mut()[k] = theta - h;
            let (down, bias_down) = (head_terms(&weights), weights.head_b().to_vec());
            weights.params_mut()[k] = theta;
            let delta: f64 =
                (0..config.output_size).map(|o| slopes[o] * ((up[o] - down[o]) + (bias_up[o] - bias_down[o]))).sum();
            let numeric = delta / (2.0 * h);
            let a = analytic.params()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > tolerance {
                report.failures += 1;
            }
            report.max_rel_error = report.max_rel_error.max(rel);
        }
        report.points_tested += 1;
    }
    report
}
