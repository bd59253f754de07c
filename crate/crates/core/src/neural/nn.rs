//! Dense layers, small MLPs, and the Adam optimizer, all f64 and
//! deterministic. Backward passes are exact reverse-mode gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fully connected layer; weights row-major `w[out * in_dim + in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    /// Xavier-uniform init with the tanh gain 5/3: bound
    /// `g * sqrt(6 / (fan_in + fan_out))`. Plain 1/sqrt(fan_in) leaves a
    /// 5-layer tanh stack with so little input sensitivity that the L1
    /// objective cannot escape the constant-output equilibrium.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (5.0 / 3.0) * (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let b = (0..out_dim).map(|_| rng.random_range(-bound..bound)).collect();
        Self {
            in_dim,
            out_dim,
            w,
            b,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(y.len(), self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            y[o] = acc;
        }
    }

    /// Accumulates `gw`, `gb` and writes `dx` (overwritten, not accumulated).
    pub fn backward(&self, x: &[f64], dy: &[f64], dx: &mut [f64], gw: &mut [f64], gb: &mut [f64]) {
        dx.fill(0.0);
        for o in 0..self.out_dim {
            let g = dy[o];
            gb[o] += g;
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut gw[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
    }
}

/// Stack of [`Linear`] layers with tanh activations; the final activation is
/// skipped when `linear_output` is set (unbounded regression head).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub linear_output: bool,
}

/// Per-layer post-activation outputs of one forward pass (input first).
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds the input at least")
    }
}

impl Mlp {
    pub fn init(dims: &[usize], linear_output: bool, rng: &mut ChaCha8Rng) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| Linear::init(w[0], w[1], rng))
            .collect();
        Self {
            layers,
            linear_output,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn forward(&self, x: &[f64]) -> MlpTrace {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let mut y = vec![0.0; layer.out_dim];
            layer.forward(activations.last().unwrap(), &mut y);
            let last = li + 1 == self.layers.len();
            if !(last && self.linear_output) {
                for v in &mut y {
                    *v = v.tanh();
                }
            }
            activations.push(y);
        }
        MlpTrace { activations }
    }

    /// Backward through the trace; returns the gradient w.r.t. the input and
    /// accumulates parameter gradients into `grads` (same layout as layers).
    pub fn backward(&self, trace: &MlpTrace, dy: &[f64], grads: &mut [LinearGrad]) -> Vec<f64> {
        debug_assert_eq!(grads.len(), self.layers.len());
        let mut delta = dy.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let last = li + 1 == self.layers.len();
            let y = &trace.activations[li + 1];
            if !(last && self.linear_output) {
                for (d, &yv) in delta.iter_mut().zip(y) {
                    *d *= 1.0 - yv * yv;
                }
            }
            let x = &trace.activations[li];
            let mut dx = vec![0.0; layer.in_dim];
            layer.backward(x, &delta, &mut dx, &mut grads[li].w, &mut grads[li].b);
            delta = dx;
        }
        delta
    }

    pub fn zero_grads(&self) -> Vec<LinearGrad> {
        self.layers
            .iter()
            .map(|l| LinearGrad {
                w: vec![0.0; l.w.len()],
                b: vec![0.0; l.b.len()],
            })
            .collect()
    }
}

/// Gradient buffers matching one [`Linear`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Adam with bias correction; one state vector pair per parameter block.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, block_sizes: &[usize]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Applies one update; `params[k]` and `grads[k]` must match block `k`.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for k in 0..params.len() {
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            let p = &mut *params[k];
            let g = grads[k];
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn linear_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::init(&[4, 6, 3], true, &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Scalar objective: sum of outputs.
        let trace = mlp.forward(&x);
        let mut grads = mlp.zero_grads();
        let dy = vec![1.0; 3];
        let dx = mlp.backward(&trace, &dy, &mut grads);

        let f = |mlp: &Mlp, x: &[f64]| -> f64 { mlp.forward(x).output().iter().sum() };
        let h = 1e-6;
        // Input gradient.
        for i in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&mlp, &xp) - f(&mlp, &xm)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-7, "dx[{i}]: fd {fd} an {}", dx[i]);
        }
        // A few weight gradients.
        for (li, idx) in [(0usize, 3usize), (0, 10), (1, 5)] {
            let mut mp = mlp.clone();
            mp.layers[li].w[idx] += h;
            let mut mm = mlp.clone();
            mm.layers[li].w[idx] -= h;
            let fd = (f(&mp, &x) - f(&mm, &x)) / (2.0 * h);
            let an = grads[li].w[idx];
            assert!((fd - an).abs() < 1e-7, "layer {li} w[{idx}]: fd {fd} an {an}");
        }
    }

    #[test]
    fn adam_zero_lr_keeps_params() {
        let mut adam = Adam::new(0.0, &[3]);
        let mut p = vec![1.0, -2.0, 3.0];
        let g = vec![0.5, 0.5, 0.5];
        adam.update(&mut [&mut p], &[&g]);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut adam = Adam::new(0.05, &[1]);
        let mut p = vec![3.0];
        for _ in 0..500 {
            let g = vec![2.0 * p[0]];
            adam.update(&mut [&mut p], &[&g]);
        }
        assert!(p[0].abs() < 1e-2, "p = {}", p[0]);
    }
}
