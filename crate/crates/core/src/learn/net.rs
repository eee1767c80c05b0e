//! The edge potential network and its optimizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LearnError;

/// Hidden layer widths.
pub const HIDDEN: [usize; 2] = [300, 128];

/// Three-layer perceptron `D -> h1 -> h2 -> 1` with rectifier activations.
/// Parameters live in one flat vector:
/// `[W1 (h1 x D), b1, W2 (h2 x h1), b2, w3 (h2), b3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialNet {
    dims: [usize; 3],
    params: Vec<f64>,
}

/// Activations kept from a forward pass for back-propagation.
pub struct Trace {
    input: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
}

fn param_count(dims: [usize; 3]) -> usize {
    let [d, h1, h2] = dims;
    h1 * d + h1 + h2 * h1 + h2 + h2 + 1
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl PotentialNet {
    /// Fresh net with every parameter uniform in `+-1/sqrt(fan_in)`.
    pub fn new(input_dim: usize, seed: u64) -> Self {
        Self::with_hidden(input_dim, HIDDEN, seed)
    }

    pub fn with_hidden(input_dim: usize, hidden: [usize; 2], seed: u64) -> Self {
        let dims = [input_dim, hidden[0], hidden[1]];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(dims));
        for (fan_in, fan_out) in [(dims[0], dims[1]), (dims[1], dims[2]), (dims[2], 1)] {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_out * (fan_in + 1) {
                params.push(rng.gen_range(-bound..=bound));
            }
        }
        // Each layer's weights are followed by its biases, matching the
        // flat layout.
        PotentialNet { dims, params }
    }

    /// Rebuilds a net from a shape and a flat parameter vector.
    pub fn from_parts(dims: [usize; 3], params: Vec<f64>) -> Result<Self, LearnError> {
        if params.len() != param_count(dims) {
            return Err(LearnError::Checkpoint(format!(
                "shape {dims:?} needs {} parameters, found {}",
                param_count(dims),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(LearnError::Checkpoint("non-finite parameter".into()));
        }
        Ok(PotentialNet { dims, params })
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// (weights, bias) index ranges of the three layers.
    fn layer_ranges(&self) -> [(std::ops::Range<usize>, std::ops::Range<usize>); 3] {
        let [d, h1, h2] = self.dims;
        let w1 = 0..h1 * d;
        let b1 = w1.end..w1.end + h1;
        let w2 = b1.end..b1.end + h2 * h1;
        let b2 = w2.end..w2.end + h2;
        let w3 = b2.end..b2.end + h2;
        let b3 = w3.end..w3.end + 1;
        [(w1, b1), (w2, b2), (w3, b3)]
    }

    fn dense(&self, layer: usize, x: &[f64], n_out: usize, relu: bool) -> Vec<f64> {
        let (w, b) = self.layer_ranges()[layer].clone();
        let (w, b) = (&self.params[w], &self.params[b]);
        let n_in = x.len();
        (0..n_out)
            .map(|o| {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                if relu {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect()
    }

    fn check_dim(&self, f: &[f64]) -> Result<(), LearnError> {
        if f.len() != self.dims[0] {
            return Err(LearnError::DimensionMismatch {
                expected: self.dims[0],
                found: f.len(),
            });
        }
        Ok(())
    }

    /// The potential `F(f)`.
    pub fn potential(&self, f: &[f64]) -> Result<f64, LearnError> {
        Ok(self.forward(f)?.0)
    }

    pub fn forward(&self, f: &[f64]) -> Result<(f64, Trace), LearnError> {
        self.check_dim(f)?;
        let [_, h1n, h2n] = self.dims;
        let h1 = self.dense(0, f, h1n, true);
        let h2 = self.dense(1, &h1, h2n, true);
        let out = self.dense(2, &h2, 1, false)[0];
        Ok((
            out,
            Trace {
                input: f.to_vec(),
                h1,
                h2,
            },
        ))
    }

    /// Adds `scale * dF/dtheta` at the traced input to `grad`.
    pub fn accumulate_gradient(&self, trace: &Trace, scale: f64, grad: &mut [f64]) {
        let [d, h1n, h2n] = self.dims;
        let [(w1, b1), (w2, b2), (w3, b3)] = self.layer_ranges();
        grad[b3.start] += scale;
        let mut d2 = vec![0.0; h2n];
        for j in 0..h2n {
            grad[w3.start + j] += scale * trace.h2[j];
            if trace.h2[j] > 0.0 {
                d2[j] = scale * self.params[w3.start + j];
            }
        }
        let mut d1 = vec![0.0; h1n];
        for j in 0..h2n {
            if d2[j] == 0.0 {
                continue;
            }
            grad[b2.start + j] += d2[j];
            let row = w2.start + j * h1n;
            for k in 0..h1n {
                grad[row + k] += d2[j] * trace.h1[k];
                d1[k] += d2[j] * self.params[row + k];
            }
        }
        for k in 0..h1n {
            if trace.h1[k] <= 0.0 || d1[k] == 0.0 {
                continue;
            }
            grad[b1.start + k] += d1[k];
            let row = w1.start + k * d;
            for (g, x) in grad[row..row + d].iter_mut().zip(&trace.input) {
                *g += d1[k] * x;
            }
        }
    }
}

/// `phi = sigmoid(-F(f))`, the probability of selecting an edge.
pub fn edge_probability(net: &PotentialNet, f: &[f64]) -> Result<f64, LearnError> {
    Ok(sigmoid(-net.potential(f)?))
}

/// Adam moments for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One ascent step along `grad`.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] += self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    shape: [usize; 4],
    params: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "grammol-potential";

impl PotentialNet {
    pub fn to_checkpoint(&self) -> String {
        let [d, h1, h2] = self.dims;
        serde_json::to_string(&CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: 1,
            shape: [d, h1, h2, 1],
            params: self.params.clone(),
        })
        .expect("checkpoint serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, LearnError> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| LearnError::Checkpoint(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT || file.version != 1 || file.shape[3] != 1 {
            return Err(LearnError::Checkpoint("unsupported checkpoint header".into()));
        }
        PotentialNet::from_parts([file.shape[0], file.shape[1], file.shape[2]], file.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(-(3f64.ln())) - 0.25).abs() < 1e-15);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        let mut net = PotentialNet::with_hidden(4, [3, 2], 1);
        let f = [0.3, -1.0, 2.0, 0.5];
        // Shift the output bias and watch phi fall.
        let before = edge_probability(&net, &f).unwrap();
        let b3 = net.param_count() - 1;
        net.params_mut()[b3] += 0.5;
        assert!(edge_probability(&net, &f).unwrap() < before);
        assert!(matches!(
            edge_probability(&net, &[1.0]),
            Err(LearnError::DimensionMismatch { expected: 4, found: 1 })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = PotentialNet::with_hidden(5, [7, 4], 3);
        let f = [0.2, -0.4, 1.1, 0.0, 2.0];
        let (_, trace) = net.forward(&f).unwrap();
        let mut grad = vec![0.0; net.param_count()];
        net.accumulate_gradient(&trace, 1.0, &mut grad);
        for i in 0..net.param_count() {
            let h = 1e-6;
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let up = p.potential(&f).unwrap();
            p.params_mut()[i] -= 2.0 * h;
            let down = p.potential(&f).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn init_bounds_and_determinism() {
        let a = PotentialNet::new(64, 9);
        assert_eq!(a, PotentialNet::new(64, 9));
        assert_ne!(a, PotentialNet::new(64, 10));
        assert_eq!(a.param_count(), 64 * 300 + 300 + 300 * 128 + 128 + 128 + 1);
        let bound = 1.0 / 8.0;
        assert!(a.params()[..64 * 300].iter().all(|p| p.abs() <= bound));
    }

    #[test]
    fn checkpoint_round_trip() {
        let a = PotentialNet::with_hidden(6, [5, 3], 2);
        let b = PotentialNet::from_checkpoint(&a.to_checkpoint()).unwrap();
        assert_eq!(a, b);
        assert!(PotentialNet::from_checkpoint("{}").is_err());
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![1.0, 1.0];
        let mut opt = Adam::new(2, 0.01);
        opt.ascend(&mut p, &[2.0, -0.5]);
        assert!((p[0] - 1.01).abs() < 1e-9);
        assert!((p[1] - 0.99).abs() < 1e-9);
    }
}
