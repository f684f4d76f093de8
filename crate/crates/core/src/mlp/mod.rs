//! Bias-free ReLU multilayer perceptron with momentum SGD and per-layer
//! spectral normalization.
//!
//! Without bias terms the network is a pure composition of linear maps and
//! ReLUs, so `∏ σ(Wˡ)` is a Lipschitz bound for the whole map and the
//! network is positively homogeneous: `f(c·x) = c·f(x)` for `c > 0`.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm2, power_estimate, spectral_norm_from, LinalgError, Matrix};

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("a network needs at least an input and an output layer, got {0} sizes")]
    TooFewLayers(usize),
    #[error("layer sizes must be positive")]
    ZeroLayerSize,
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("gradient/weight shape mismatch at layer {layer}")]
    ShapeMismatch { layer: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch inputs and targets differ in length ({inputs} vs {targets})")]
    BatchLength { inputs: usize, targets: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// How `normalize_lipschitz` treats layers already inside the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnMode {
    /// Rescale only layers with `σ(W) > ζ^{1/L}`.
    #[default]
    ScaleDown,
    /// Rescale every layer to exactly `σ(W) = ζ^{1/L}`.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingHyper {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
}

impl Default for TrainingHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 32,
        }
    }
}

impl TrainingHyper {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        if self.batch_size == 0 {
            return Err("batch_size must be >= 1".into());
        }
        Ok(())
    }
}

/// Relative tolerance (on `σ²`) for the per-layer power iteration.
pub const SN_TOL: f64 = 1e-13;
pub const SN_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,
    momentum_buffers: Vec<Matrix>,
    zeta: f64,
    sn_mode: SnMode,
    /// Right singular vector estimates from the last normalization, used to
    /// warm-start the next power iteration.
    sn_vectors: Vec<Vec<f64>>,
}

impl MlpNetwork {
    /// Uniform He-style initialization in `±sqrt(6 / fan_in)` from a seeded
    /// ChaCha stream; momentum buffers start at zero.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self, MlpError> {
        if layer_sizes.len() < 2 {
            return Err(MlpError::TooFewLayers(layer_sizes.len()));
        }
        if layer_sizes.contains(&0) {
            return Err(MlpError::ZeroLayerSize);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Matrix::new(fan_out, fan_in, data)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_weights(weights, 1.0)
    }

    /// Builds a network from explicit weight matrices (`Wˡ` is
    /// `out × in`).
    pub fn from_weights(weights: Vec<Matrix>, zeta: f64) -> Result<Self, MlpError> {
        if weights.is_empty() {
            return Err(MlpError::TooFewLayers(0));
        }
        let mut layer_sizes = vec![weights[0].cols()];
        for (l, w) in weights.iter().enumerate() {
            if w.cols() != *layer_sizes.last().unwrap() {
                return Err(MlpError::ShapeMismatch { layer: l });
            }
            if w.rows() == 0 || w.cols() == 0 {
                return Err(MlpError::ZeroLayerSize);
            }
            layer_sizes.push(w.rows());
        }
        let momentum_buffers = weights
            .iter()
            .map(|w| Matrix::zeros(w.rows(), w.cols()))
            .collect();
        let sn_vectors = weights.iter().map(|w| vec![1.0; w.cols()]).collect();
        Ok(Self {
            layer_sizes,
            weights,
            momentum_buffers,
            zeta,
            sn_mode: SnMode::default(),
            sn_vectors,
        })
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }

    pub fn with_sn_mode(mut self, mode: SnMode) -> Self {
        self.sn_mode = mode;
        self
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn momentum_buffers(&self) -> &[Matrix] {
        &self.momentum_buffers
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn sn_mode(&self) -> SnMode {
        self.sn_mode
    }

    /// Number of weight matrices `L`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
    }

    /// `W^L a(W^{L−1} a(… a(W¹x)))`; no activation on the output layer.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.check_input(input)?;
        let mut act = input.to_vec();
        let mut next = Vec::new();
        let last = self.depth() - 1;
        for (l, w) in self.weights.iter().enumerate() {
            next.resize(w.rows(), 0.0);
            w.matvec_into(&act, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut act, &mut next);
        }
        Ok(act)
    }

    /// Forward pass over a row-major batch (`batch × input_dim`), returning
    /// a row-major `batch × output_dim` buffer.
    pub fn forward_batch(&self, inputs: &[f64]) -> Result<Vec<f64>, MlpError> {
        let d = self.input_dim();
        if !inputs.len().is_multiple_of(d) {
            return Err(MlpError::DimensionMismatch {
                expected: d,
                got: inputs.len() % d,
            });
        }
        let batch = inputs.len() / d;
        let mut act = inputs.to_vec();
        let last = self.depth() - 1;
        for (l, w) in self.weights.iter().enumerate() {
            let (out, inp) = w.shape();
            let mut next = vec![0.0; batch * out];
            for b in 0..batch {
                let a = &act[b * inp..(b + 1) * inp];
                let dst = &mut next[b * out..(b + 1) * out];
                for (o, slot) in dst.iter_mut().enumerate() {
                    let z = dot(w.row_slice(o), a);
                    *slot = if l < last { z.max(0.0) } else { z };
                }
            }
            act = next;
        }
        Ok(act)
    }

    fn check_input(&self, input: &[f64]) -> Result<(), MlpError> {
        if input.len() != self.input_dim() {
            return Err(MlpError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Mean over the batch of `‖y − f(x)‖²` and its exact gradient with
    /// respect to every weight matrix. The ReLU derivative at 0 is 0.
    pub fn loss_and_gradients(
        &self,
        batch_inputs: &[Vec<f64>],
        batch_targets: &[Vec<f64>],
    ) -> Result<(f64, Vec<Matrix>), MlpError> {
        if batch_inputs.is_empty() {
            return Err(MlpError::EmptyBatch);
        }
        if batch_inputs.len() != batch_targets.len() {
            return Err(MlpError::BatchLength {
                inputs: batch_inputs.len(),
                targets: batch_targets.len(),
            });
        }
        for x in batch_inputs {
            self.check_input(x)?;
        }
        for y in batch_targets {
            if y.len() != self.output_dim() {
                return Err(MlpError::DimensionMismatch {
                    expected: self.output_dim(),
                    got: y.len(),
                });
            }
        }

        let n = batch_inputs.len();
        let depth = self.depth();
        // acts[l] holds the batch input of layer l (row-major batch × width)
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
        acts.push(batch_inputs.iter().flatten().copied().collect());
        for (l, w) in self.weights.iter().enumerate() {
            let (out, inp) = w.shape();
            let prev = &acts[l];
            let mut next = vec![0.0; n * out];
            for b in 0..n {
                let a = &prev[b * inp..(b + 1) * inp];
                for o in 0..out {
                    let z = dot(w.row_slice(o), a);
                    next[b * out + o] = if l + 1 < depth { z.max(0.0) } else { z };
                }
            }
            acts.push(next);
        }

        let out_dim = self.output_dim();
        let scale = 2.0 / n as f64;
        let mut loss = 0.0;
        let mut delta = vec![0.0; n * out_dim];
        for (b, y) in batch_targets.iter().enumerate() {
            for o in 0..out_dim {
                let r = acts[depth][b * out_dim + o] - y[o];
                loss += r * r;
                delta[b * out_dim + o] = scale * r;
            }
        }
        loss /= n as f64;

        let mut grads: Vec<Matrix> = self
            .weights
            .iter()
            .map(|w| Matrix::zeros(w.rows(), w.cols()))
            .collect();
        for l in (0..depth).rev() {
            let w = &self.weights[l];
            let (out, inp) = w.shape();
            let a_prev = &acts[l];
            let g = grads[l].as_mut_slice();
            for b in 0..n {
                let a = &a_prev[b * inp..(b + 1) * inp];
                for o in 0..out {
                    let d = delta[b * out + o];
                    if d == 0.0 {
                        continue;
                    }
                    for (gi, &ai) in g[o * inp..(o + 1) * inp].iter_mut().zip(a) {
                        *gi += d * ai;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let mut prev_delta = vec![0.0; n * inp];
            for b in 0..n {
                let pd = &mut prev_delta[b * inp..(b + 1) * inp];
                for o in 0..out {
                    let d = delta[b * out + o];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, &wi) in pd.iter_mut().zip(w.row_slice(o)) {
                        *p += d * wi;
                    }
                }
                // acts[l] is the post-ReLU output of layer l-1: zero where
                // the pre-activation was <= 0
                for (p, &a) in pd.iter_mut().zip(&a_prev[b * inp..(b + 1) * inp]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev_delta;
        }
        Ok((loss, grads))
    }

    /// `buffer ← momentum·buffer + grad; weight ← weight − lr·buffer`.
    pub fn sgd_momentum_step(
        &mut self,
        grads: &[Matrix],
        hyper: &TrainingHyper,
    ) -> Result<(), MlpError> {
        if grads.len() != self.depth() {
            return Err(MlpError::ShapeMismatch {
                layer: grads.len().min(self.depth()),
            });
        }
        for (l, g) in grads.iter().enumerate() {
            if g.shape() != self.weights[l].shape() {
                return Err(MlpError::ShapeMismatch { layer: l });
            }
        }
        for ((w, buf), g) in self
            .weights
            .iter_mut()
            .zip(self.momentum_buffers.iter_mut())
            .zip(grads)
        {
            for ((wi, bi), &gi) in w
                .as_mut_slice()
                .iter_mut()
                .zip(buf.as_mut_slice())
                .zip(g.as_slice())
            {
                *bi = hyper.momentum * *bi + gi;
                *wi -= hyper.learning_rate * *bi;
            }
        }
        Ok(())
    }

    /// Per-layer spectral norms.
    pub fn layer_spectral_norms(&self) -> Result<Vec<f64>, MlpError> {
        self.weights
            .iter()
            .map(|w| {
                let start = vec![1.0; w.cols()];
                Ok(spectral_norm_from(w, &start, SN_TOL, SN_MAX_ITER)?.sigma)
            })
            .collect()
    }

    /// `∏ₗ σ(Wˡ)`, an upper bound on the Lipschitz constant.
    pub fn lipschitz_upper_bound(&self) -> Result<f64, MlpError> {
        Ok(self.layer_spectral_norms()?.iter().product())
    }

    /// Spectral normalization toward the budget `ζ`: each layer with
    /// `σ(Wˡ) > ζ^{1/L}` becomes `Wˡ·ζ^{1/L}/σ(Wˡ)` (every nonzero layer in
    /// [`SnMode::Strict`]). Zero layers are left alone. The power iteration
    /// is warm-started from the previous call's singular vectors. Returns the
    /// per-layer spectral norms measured before rescaling.
    pub fn normalize_lipschitz(&mut self) -> Result<Vec<f64>, MlpError> {
        let target = self.zeta.powf(1.0 / self.depth() as f64);
        let mut sigmas = Vec::with_capacity(self.depth());
        for (w, v) in self.weights.iter_mut().zip(&mut self.sn_vectors) {
            // a small all-ones component keeps the start from being
            // orthogonal to a newly dominant direction
            let scale = 1e-6 / (v.len() as f64).sqrt();
            let start: Vec<f64> = v.iter().map(|x| x + scale).collect();
            let it = spectral_norm_from(w, &start, SN_TOL, SN_MAX_ITER)?;
            let sigma = it.sigma;
            *v = it.vector;
            sigmas.push(sigma);
            if sigma == 0.0 {
                continue;
            }
            let rescale = match self.sn_mode {
                SnMode::ScaleDown => sigma > target,
                SnMode::Strict => true,
            };
            if rescale {
                w.scale_in_place(target / sigma);
            }
        }
        Ok(sigmas)
    }

    /// Training-time variant of [`Self::normalize_lipschitz`]: each layer's
    /// `σ` comes from `power_steps` warm-started power steps instead of a
    /// converged iteration, so the budget holds only approximately until
    /// the next exact normalization.
    pub fn normalize_lipschitz_estimated(
        &mut self,
        power_steps: usize,
    ) -> Result<Vec<f64>, MlpError> {
        let target = self.zeta.powf(1.0 / self.depth() as f64);
        let mut sigmas = Vec::with_capacity(self.depth());
        for (w, v) in self.weights.iter_mut().zip(&mut self.sn_vectors) {
            let it = power_estimate(w, v, power_steps)?;
            *v = it.vector;
            sigmas.push(it.sigma);
            let rescale = it.sigma > 0.0
                && match self.sn_mode {
                    SnMode::ScaleDown => it.sigma > target,
                    SnMode::Strict => true,
                };
            if rescale {
                w.scale_in_place(target / it.sigma);
            }
        }
        Ok(sigmas)
    }

    /// Largest observed `‖f(x)−f(x′)‖/‖x−x′‖` over sampled pairs in the box
    /// `[lo, hi]`: a lower bound on the Lipschitz constant. Even pairs are
    /// independent uniform draws; odd pairs are local perturbations of size
    /// `1e-3` of the box diagonal, which probe the local Jacobian.
    pub fn empirical_lipschitz(
        &self,
        domain_lo: &[f64],
        domain_hi: &[f64],
        n_pairs: usize,
        seed: u64,
    ) -> Result<f64, MlpError> {
        self.check_input(domain_lo)?;
        self.check_input(domain_hi)?;
        let d = self.input_dim();
        let span: Vec<f64> = domain_lo
            .iter()
            .zip(domain_hi)
            .map(|(l, h)| h - l)
            .collect();
        let local_radius = 1e-3 * norm2(&span).max(1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        const CHUNK: usize = 512;
        let mut best: f64 = 0.0;
        let mut done = 0;
        while done < n_pairs {
            let m = CHUNK.min(n_pairs - done);
            let mut xs = Vec::with_capacity(m * d);
            let mut ys = Vec::with_capacity(m * d);
            for k in 0..m {
                let x: Vec<f64> = (0..d)
                    .map(|i| domain_lo[i] + span[i] * rng.random::<f64>())
                    .collect();
                let y: Vec<f64> = if (done + k) % 2 == 0 {
                    (0..d)
                        .map(|i| domain_lo[i] + span[i] * rng.random::<f64>())
                        .collect()
                } else {
                    x.iter()
                        .map(|&xi| xi + local_radius * (2.0 * rng.random::<f64>() - 1.0))
                        .collect()
                };
                xs.extend_from_slice(&x);
                ys.extend_from_slice(&y);
            }
            let fx = self.forward_batch(&xs)?;
            let fy = self.forward_batch(&ys)?;
            let o = self.output_dim();
            for k in 0..m {
                let dx: f64 = (0..d)
                    .map(|i| (xs[k * d + i] - ys[k * d + i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if dx == 0.0 {
                    continue;
                }
                let df: f64 = (0..o)
                    .map(|i| (fx[k * o + i] - fy[k * o + i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                best = best.max(df / dx);
            }
            done += m;
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_net(ws: &[f64]) -> MlpNetwork {
        let weights = ws.iter().map(|&w| Matrix::from_rows(&[&[w]])).collect();
        MlpNetwork::from_weights(weights, 1.0).unwrap()
    }

    #[test]
    fn init_shapes_and_determinism() {
        let net = MlpNetwork::init(&[3, 50, 50, 50, 50, 1], 0).unwrap();
        let shapes: Vec<_> = net.weights().iter().map(Matrix::shape).collect();
        assert_eq!(shapes, vec![(50, 3), (50, 50), (50, 50), (50, 50), (1, 50)]);
        assert_eq!(net.depth(), 5);
        assert!(net.momentum_buffers().iter().all(|b| b.max_abs() == 0.0));
        let again = MlpNetwork::init(&[3, 50, 50, 50, 50, 1], 0).unwrap();
        assert_eq!(net.weights(), again.weights());
        let other = MlpNetwork::init(&[3, 50, 50, 50, 50, 1], 1).unwrap();
        assert_ne!(net.weights(), other.weights());
        let limit = (6.0f64 / 3.0).sqrt();
        assert!(net.weights()[0].max_abs() <= limit);
    }

    #[test]
    fn init_minimal_and_errors() {
        let net = MlpNetwork::init(&[1, 1], 42).unwrap();
        assert_eq!(net.weights().len(), 1);
        assert_eq!(net.weights()[0].shape(), (1, 1));
        assert!(matches!(
            MlpNetwork::init(&[], 0),
            Err(MlpError::TooFewLayers(0))
        ));
        assert!(matches!(
            MlpNetwork::init(&[3], 0),
            Err(MlpError::TooFewLayers(1))
        ));
        assert!(matches!(
            MlpNetwork::init(&[3, 0, 1], 0),
            Err(MlpError::ZeroLayerSize)
        ));
    }

    #[test]
    fn forward_small_cases() {
        assert_eq!(scalar_net(&[2.0]).forward(&[3.0]).unwrap(), vec![6.0]);
        assert_eq!(scalar_net(&[-1.0, 5.0]).forward(&[2.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            scalar_net(&[1.0]).forward(&[1.0, 2.0]),
            Err(MlpError::DimensionMismatch {
                expected: 1,
                got: 2
            })
        ));
    }

    #[test]
    fn forward_batch_matches_forward() {
        let net = MlpNetwork::init(&[3, 8, 8, 2], 7).unwrap();
        let xs = [0.3, -1.0, 2.0, 1.5, 0.2, -0.7];
        let batch = net.forward_batch(&xs).unwrap();
        for b in 0..2 {
            let single = net.forward(&xs[b * 3..(b + 1) * 3]).unwrap();
            assert_eq!(&batch[b * 2..(b + 1) * 2], single.as_slice());
        }
    }

    #[test]
    fn loss_and_gradient_scalar_cases() {
        let (loss, g) = scalar_net(&[1.0])
            .loss_and_gradients(&[vec![1.0]], &[vec![1.0]])
            .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g[0].as_slice(), &[0.0]);
        let (loss, g) = scalar_net(&[2.0])
            .loss_and_gradients(&[vec![1.0]], &[vec![0.0]])
            .unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(g[0].as_slice(), &[4.0]);
    }

    #[test]
    fn loss_rejects_bad_batches() {
        let net = scalar_net(&[1.0]);
        assert!(matches!(
            net.loss_and_gradients(&[], &[]),
            Err(MlpError::EmptyBatch)
        ));
        assert!(matches!(
            net.loss_and_gradients(&[vec![1.0]], &[vec![1.0], vec![2.0]]),
            Err(MlpError::BatchLength { .. })
        ));
        assert!(matches!(
            net.loss_and_gradients(&[vec![1.0]], &[vec![1.0, 2.0]]),
            Err(MlpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sgd_plain_and_momentum() {
        let hyper = TrainingHyper {
            learning_rate: 0.1,
            momentum: 0.0,
            batch_size: 1,
        };
        let mut net = scalar_net(&[1.0]);
        net.sgd_momentum_step(&[Matrix::from_rows(&[&[1.0]])], &hyper)
            .unwrap();
        assert!((net.weights()[0][(0, 0)] - 0.9).abs() < 1e-15);

        let hyper = TrainingHyper {
            momentum: 0.9,
            ..hyper
        };
        let mut net = scalar_net(&[0.0]);
        let g = [Matrix::from_rows(&[&[1.0]])];
        net.sgd_momentum_step(&g, &hyper).unwrap();
        net.sgd_momentum_step(&g, &hyper).unwrap();
        assert!((net.weights()[0][(0, 0)] + 0.29).abs() < 1e-15);

        let mut net = scalar_net(&[0.5]);
        net.sgd_momentum_step(&[Matrix::zeros(1, 1)], &hyper)
            .unwrap();
        assert_eq!(net.weights()[0][(0, 0)], 0.5);

        assert!(matches!(
            net.sgd_momentum_step(&[Matrix::zeros(2, 1)], &hyper),
            Err(MlpError::ShapeMismatch { layer: 0 })
        ));
    }

    #[test]
    fn normalization_scales_down_only() {
        // ζ = 1, L = 4: one layer at σ = 3, one at σ = 0.5
        let mut net = scalar_net(&[3.0, 0.5, 1.0, -2.0]).with_zeta(1.0);
        let before = net.normalize_lipschitz().unwrap();
        assert_eq!(before, vec![3.0, 0.5, 1.0, 2.0]);
        let w: Vec<f64> = net.weights().iter().map(|w| w[(0, 0)]).collect();
        assert!((w[0] - 1.0).abs() < 1e-15);
        assert_eq!(w[1], 0.5);
        assert_eq!(w[2], 1.0);
        assert!((w[3] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn strict_mode_inflates_small_layers() {
        let mut net = scalar_net(&[0.5, 4.0])
            .with_zeta(4.0)
            .with_sn_mode(SnMode::Strict);
        net.normalize_lipschitz().unwrap();
        assert!((net.weights()[0][(0, 0)] - 2.0).abs() < 1e-15);
        assert!((net.weights()[1][(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn normalization_idempotent_at_boundary() {
        let mut net = MlpNetwork::init(&[3, 20, 20, 1], 3).unwrap();
        net.normalize_lipschitz().unwrap();
        let once = net.weights().to_vec();
        net.normalize_lipschitz().unwrap();
        for (a, b) in once.iter().zip(net.weights()) {
            assert!(a.sub(b).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn zero_layer_left_unchanged() {
        let mut net = scalar_net(&[0.0, 3.0]);
        net.normalize_lipschitz().unwrap();
        assert_eq!(net.weights()[0][(0, 0)], 0.0);
        assert!((net.weights()[1][(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_lipschitz_linear_and_homogeneous() {
        let l = scalar_net(&[2.0])
            .empirical_lipschitz(&[-1.0], &[1.0], 100, 0)
            .unwrap();
        assert!((l - 2.0).abs() < 1e-9);

        let net = MlpNetwork::init(&[3, 16, 16, 1], 5).unwrap();
        let base = net
            .empirical_lipschitz(&[-1.0; 3], &[1.0; 3], 500, 9)
            .unwrap();
        let mut scaled = net.clone();
        scaled.weights_mut()[0].scale_in_place(10.0);
        let s = scaled
            .empirical_lipschitz(&[-1.0; 3], &[1.0; 3], 500, 9)
            .unwrap();
        assert!((s / base - 10.0).abs() < 1e-9);
    }
}
