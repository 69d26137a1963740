use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, NeuralError};

/// LSTM gates, in parameter storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Cell, Gate::Output];
}

/// Shape of the parameter vector.
///
/// Storage order: `W_i, W_f, W_g, W_o` (hidden x input), `U_i, U_f, U_g, U_o`
/// (hidden x hidden), `b_i, b_f, b_g, b_o` (hidden), head `W_y`
/// (output x hidden), head bias `b_y` (output). Matrices are row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Layout {
    pub fn of(config: &ModelConfig) -> Self {
        Self { input: config.input_size, hidden: config.hidden_size, output: config.output_size }
    }

    fn w_offset(&self, gate: Gate) -> usize {
        gate as usize * self.hidden * self.input
    }

    fn u_offset(&self, gate: Gate) -> usize {
        4 * self.hidden * self.input + gate as usize * self.hidden * self.hidden
    }

    fn b_offset(&self, gate: Gate) -> usize {
        4 * self.hidden * (self.input + self.hidden) + gate as usize * self.hidden
    }

    fn head_w_offset(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden + 1)
    }

    fn head_b_offset(&self) -> usize {
        self.head_w_offset() + self.output * self.hidden
    }

    pub fn len(&self) -> usize {
        self.head_b_offset() + self.output
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// All trainable parameters of the LSTM layer and its linear head, stored
/// contiguously so optimizers and checkers can treat them as one vector.
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    layout: Layout,
    params: Vec<f64>,
}

impl LstmWeights {
    pub fn zeros(layout: Layout) -> Self {
        Self { layout, params: vec![0.0; layout.len()] }
    }

    pub fn from_params(layout: Layout, params: Vec<f64>) -> Result<Self, NeuralError> {
        if params.len() != layout.len() {
            return Err(NeuralError::Shape(format!("expected {} parameters, got {}", layout.len(), params.len())));
        }
        Ok(Self { layout, params })
    }

    /// Uniform in `±1/sqrt(fan_in)` for each matrix, zero biases except the
    /// forget gate bias, which starts at 1.
    pub fn init(config: &ModelConfig) -> Self {
        let layout = Layout::of(config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut w = Self::zeros(layout);
        let mut fill = |slice: &mut [f64], fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            slice.iter_mut().for_each(|x| *x = rng.gen_range(-a..a));
        };
        for gate in Gate::ALL {
            fill(w.w_mut(gate), layout.input);
        }
        for gate in Gate::ALL {
            fill(w.u_mut(gate), layout.hidden);
        }
        fill(w.head_w_mut(), layout.hidden);
        w.b_mut(Gate::Forget).fill(1.0);
        w
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    pub fn w(&self, gate: Gate) -> &[f64] {
        let o = self.layout.w_offset(gate);
        &self.params[o..o + self.layout.hidden * self.layout.input]
    }

    pub fn w_mut(&mut self, gate: Gate) -> &mut [f64] {
        let o = self.layout.w_offset(gate);
        let n = self.layout.hidden * self.layout.input;
        &mut self.params[o..o + n]
    }

    pub fn u(&self, gate: Gate) -> &[f64] {
        let o = self.layout.u_offset(gate);
        &self.params[o..o + self.layout.hidden * self.layout.hidden]
    }

    pub fn u_mut(&mut self, gate: Gate) -> &mut [f64] {
        let o = self.layout.u_offset(gate);
        let n = self.layout.hidden * self.layout.hidden;
        &mut self.params[o..o + n]
    }

    pub fn b(&self, gate: Gate) -> &[f64] {
        let o = self.layout.b_offset(gate);
        &self.params[o..o + self.layout.hidden]
    }

    pub fn b_mut(&mut self, gate: Gate) -> &mut [f64] {
        let o = self.layout.b_offset(gate);
        let n = self.layout.hidden;
        &mut self.params[o..o + n]
    }

    pub fn head_w(&self) -> &[f64] {
        let o = self.layout.head_w_offset();
        &self.params[o..o + self.layout.output * self.layout.hidden]
    }

    pub fn head_w_mut(&mut self) -> &mut [f64] {
        let o = self.layout.head_w_offset();
        let n = self.layout.output * self.layout.hidden;
        &mut self.params[o..o + n]
    }

    pub fn head_b(&self) -> &[f64] {
        &self.params[self.layout.head_b_offset()..]
    }

    pub fn head_b_mut(&mut self) -> &mut [f64] {
        let o = self.layout.head_b_offset();
        &mut self.params[o..]
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.params.iter().map(|p| p * p).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.params.iter_mut().for_each(|p| *p *= factor);
    }

    pub fn fill_zero(&mut self) {
        self.params.fill(0.0);
    }

    /// Runs the recurrence over a row-major `steps x input` sequence, starting
    /// from zero hidden and cell state.
    pub fn forward(&self, sequence: &[f64]) -> Result<ForwardCache, NeuralError> {
        let mut cache = ForwardCache::new(self.layout, sequence.len() / self.layout.input.max(1));
        self.forward_into(sequence, &mut cache)?;
        Ok(cache)
    }

    /// [`forward`](Self::forward) into a reusable cache.
    pub fn forward_into(&self, sequence: &[f64], cache: &mut ForwardCache) -> Result<(), NeuralError> {
        let Layout { input: ni, hidden: nh, output: no } = self.layout;
        if ni == 0 || !sequence.len().is_multiple_of(ni) || sequence.is_empty() {
            return Err(NeuralError::Shape(format!(
                "sequence of {} values is not a whole number of {ni}-feature steps",
                sequence.len()
            )));
        }
        if sequence.iter().any(|x| !x.is_finite()) {
            return Err(NeuralError::NonFiniteFeature);
        }
        let steps = sequence.len() / ni;
        cache.reset(self.layout, steps);
        cache.x.copy_from_slice(sequence);

        for t in 0..steps {
            let x = &sequence[t * ni..(t + 1) * ni];
            let base = t * 4 * nh;
            {
                let h_prev = &cache.h[t * nh..(t + 1) * nh];
                let gates = &mut cache.gates[base..base + 4 * nh];
                for gate in Gate::ALL {
                    let w = self.w(gate);
                    let u = self.u(gate);
                    let b = self.b(gate);
                    let act = &mut gates[gate as usize * nh..(gate as usize + 1) * nh];
                    for j in 0..nh {
                        let z = b[j] + dot(&w[j * ni..(j + 1) * ni], x) + dot(&u[j * nh..(j + 1) * nh], h_prev);
                        act[j] = if gate == Gate::Cell { z.tanh() } else { sigmoid(z) };
                    }
                }
            }
            let (c_done, c_rest) = cache.c.split_at_mut((t + 1) * nh);
            let c_prev = &c_done[t * nh..];
            let c_next = &mut c_rest[..nh];
            let h_next = &mut cache.h[(t + 1) * nh..(t + 2) * nh];
            let tanh_c = &mut cache.tanh_c[t * nh..(t + 1) * nh];
            for j in 0..nh {
                let i = cache.gates[base + j];
                let f = cache.gates[base + nh + j];
                let g = cache.gates[base + 2 * nh + j];
                let o = cache.gates[base + 3 * nh + j];
                let c = f * c_prev[j] + i * g;
                c_next[j] = c;
                tanh_c[j] = c.tanh();
                h_next[j] = o * tanh_c[j];
            }
        }

        let h_last = &cache.h[steps * nh..];
        let wy = self.head_w();
        let by = self.head_b();
        for k in 0..no {
            cache.output[k] = by[k] + dot(&wy[k * nh..(k + 1) * nh], h_last);
        }
        Ok(())
    }

    /// Backpropagates an output gradient through a cached forward pass and
    /// adds `scale * dL/dθ` into `grads`.
    pub fn backward_into(&self, cache: &ForwardCache, d_output: &[f64], scale: f64, grads: &mut LstmWeights) {
        let Layout { input: ni, hidden: nh, output: no } = self.layout;
        let steps = cache.steps;
        let h_last = &cache.h[steps * nh..];

        let dy: Vec<f64> = d_output.iter().map(|d| d * scale).collect();
        {
            let gw = grads.head_w_mut();
            for k in 0..no {
                axpy(dy[k], h_last, &mut gw[k * nh..(k + 1) * nh]);
            }
        }
        grads.head_b_mut().iter_mut().zip(&dy).for_each(|(g, d)| *g += d);

        let mut dh = vec![0.0; nh];
        let wy = self.head_w();
        for k in 0..no {
            axpy(dy[k], &wy[k * nh..(k + 1) * nh], &mut dh);
        }
        let mut dc = vec![0.0; nh];
        let mut dz = [vec![0.0; nh], vec![0.0; nh], vec![0.0; nh], vec![0.0; nh]];
        let mut dh_prev = vec![0.0; nh];

        for t in (0..steps).rev() {
            let base = t * 4 * nh;
            let c_prev = &cache.c[t * nh..(t + 1) * nh];
            let tanh_c = &cache.tanh_c[t * nh..(t + 1) * nh];
            for j in 0..nh {
                let i = cache.gates[base + j];
                let f = cache.gates[base + nh + j];
                let g = cache.gates[base + 2 * nh + j];
                let o = cache.gates[base + 3 * nh + j];
                let tc = tanh_c[j];
                let d_o = dh[j] * tc;
                let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
                dz[0][j] = dcj * g * i * (1.0 - i);
                dz[1][j] = dcj * c_prev[j] * f * (1.0 - f);
                dz[2][j] = dcj * i * (1.0 - g * g);
                dz[3][j] = d_o * o * (1.0 - o);
                dc[j] = dcj * f;
            }

            let x = &cache.x[t * ni..(t + 1) * ni];
            let h_prev = &cache.h[t * nh..(t + 1) * nh];
            dh_prev.fill(0.0);
            for gate in Gate::ALL {
                let d = &dz[gate as usize];
                let gw = grads.w_mut(gate);
                for j in 0..nh {
                    axpy(d[j], x, &mut gw[j * ni..(j + 1) * ni]);
                }
                let gu = grads.u_mut(gate);
                for j in 0..nh {
                    axpy(d[j], h_prev, &mut gu[j * nh..(j + 1) * nh]);
                }
                grads.b_mut(gate).iter_mut().zip(d).for_each(|(g, v)| *g += v);
                let u = self.u(gate);
                for j in 0..nh {
                    axpy(d[j], &u[j * nh..(j + 1) * nh], &mut dh_prev);
                }
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
    }
}

/// Activations of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    steps: usize,
    hidden: usize,
    x: Vec<f64>,
    /// `steps x [i, f, g, o] x hidden`
    gates: Vec<f64>,
    /// `(steps + 1) x hidden`, row 0 is the zero initial state.
    c: Vec<f64>,
    h: Vec<f64>,
    tanh_c: Vec<f64>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn new(layout: Layout, steps: usize) -> Self {
        let mut cache = Self {
            steps: 0,
            hidden: 0,
            x: Vec::new(),
            gates: Vec::new(),
            c: Vec::new(),
            h: Vec::new(),
            tanh_c: Vec::new(),
            output: Vec::new(),
        };
        cache.reset(layout, steps);
        cache
    }

    fn reset(&mut self, layout: Layout, steps: usize) {
        let nh = layout.hidden;
        self.steps = steps;
        self.hidden = nh;
        self.x.resize(steps * layout.input, 0.0);
        self.gates.resize(steps * 4 * nh, 0.0);
        self.c.clear();
        self.c.resize((steps + 1) * nh, 0.0);
        self.h.clear();
        self.h.resize((steps + 1) * nh, 0.0);
        self.tanh_c.resize(steps * nh, 0.0);
        self.output.resize(layout.output, 0.0);
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Hidden state after step `t` (1-based; 0 is the initial state).
    pub fn hidden_state(&self, t: usize) -> &[f64] {
        &self.h[t * self.hidden..(t + 1) * self.hidden]
    }

    /// Cell state after step `t` (1-based; 0 is the initial state).
    pub fn cell_state(&self, t: usize) -> &[f64] {
        &self.c[t * self.hidden..(t + 1) * self.hidden]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(hidden: usize) -> ModelConfig {
        ModelConfig { hidden_size: hidden, ..ModelConfig::default() }
    }

    #[test]
    fn layout_sections_tile_the_vector() {
        let l = Layout { input: 8, hidden: 3, output: 3 };
        assert_eq!(l.len(), 4 * 3 * 8 + 4 * 9 + 4 * 3 + 9 + 3);
        let mut w = LstmWeights::zeros(l);
        w.head_b_mut().copy_from_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(&w.params()[l.len() - 3..], &[1.0, 2.0, 3.0]);
        w.b_mut(Gate::Forget).fill(7.0);
        let o = 4 * 3 * 8 + 4 * 9 + 3;
        assert_eq!(&w.params()[o..o + 3], &[7.0; 3]);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let w = LstmWeights::zeros(Layout::of(&config(5)));
        let seq: Vec<f64> = (0..32).map(|i| i as f64 * 0.37 - 3.0).collect();
        assert_eq!(w.forward(&seq).unwrap().output(), &[0.0; 3]);
    }

    #[test]
    fn head_bias_passthrough() {
        let mut w = LstmWeights::zeros(Layout::of(&config(5)));
        w.head_b_mut().copy_from_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(w.forward(&[0.0; 32]).unwrap().output(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn init_sets_forget_bias_and_bounds() {
        let cfg = config(16);
        let w = LstmWeights::init(&cfg);
        assert!(w.b(Gate::Forget).iter().all(|&b| b == 1.0));
        assert!(w.b(Gate::Input).iter().all(|&b| b == 0.0));
        let a = 1.0 / (8f64).sqrt();
        assert!(w.w(Gate::Cell).iter().all(|x| x.abs() < a));
        let a = 1.0 / (16f64).sqrt();
        assert!(w.u(Gate::Output).iter().all(|x| x.abs() < a));
        assert_eq!(w, LstmWeights::init(&cfg));
    }

    #[test]
    fn non_finite_input_rejected() {
        let w = LstmWeights::init(&config(4));
        let mut seq = vec![0.5; 32];
        seq[9] = f64::NAN;
        assert!(matches!(w.forward(&seq), Err(NeuralError::NonFiniteFeature)));
        assert!(matches!(w.forward(&seq[..31]), Err(NeuralError::Shape(_))));
    }

    #[test]
    fn large_unnormalized_inputs_stay_finite() {
        let w = LstmWeights::init(&config(32));
        let seq: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { 1e4 } else { -1e4 }).collect();
        assert!(w.forward(&seq).unwrap().output().iter().all(|y| y.is_finite()));
    }
}
