use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{lqr_step, ControlError};
use crate::dataset::ReplayDataset;
use crate::experiment::StepFlags;
use crate::linalg::Matrix;
use crate::mlp::{MlpNetwork, TrainingHyper};
use crate::plant::Reference;

/// Instrumentation points inside one [`FridayController::step`].
#[derive(Debug)]
pub enum StepEvent<'a> {
    /// Spectral normalization ran; `sigmas` are the norms measured before
    /// rescaling.
    Normalized {
        net: &'a MlpNetwork,
        sigmas: &'a [f64],
    },
    /// The estimate about to be used for control was produced by `net`.
    Predicted {
        net: &'a MlpNetwork,
        /// Raw state `x_k`.
        x: &'a [f64],
        /// Network input (after optional scaling).
        input: &'a [f64],
        r_hat: f64,
    },
    Appended {
        dataset_len: usize,
    },
    /// One SGD update; `applied` is false when the gradients were
    /// non-finite and the update was skipped.
    Trained {
        net: &'a MlpNetwork,
        loss: f64,
        applied: bool,
    },
}

pub trait StepObserver {
    fn on_event(&mut self, event: &StepEvent<'_>);
}

impl<F: FnMut(&StepEvent<'_>)> StepObserver for F {
    fn on_event(&mut self, event: &StepEvent<'_>) {
        self(event)
    }
}

pub(crate) struct Silent;

impl StepObserver for Silent {
    fn on_event(&mut self, _: &StepEvent<'_>) {}
}

#[derive(Debug, Clone, PartialEq)]
pub struct FridayStep {
    pub u: f64,
    pub r_hat: f64,
    /// Mini-batch loss of this step's update, if one ran.
    pub loss: Option<f64>,
    pub flags: StepFlags,
}

/// Running per-feature scale `1/std` (no centering, so `f(0) = 0` is kept).
#[derive(Debug, Clone)]
struct InputScaler {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl InputScaler {
    fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn update(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.count;
            *s += d * (v - *m);
        }
    }

    fn apply(&self, x: &mut [f64]) {
        if self.count < 2.0 {
            return;
        }
        for (v, s) in x.iter_mut().zip(&self.m2) {
            let std = (s / (self.count - 1.0)).sqrt().max(1e-6);
            *v /= std;
        }
    }
}

/// Online-learning cancellation controller.
///
/// Each step: normalize the network (if enabled), predict `R̂(x_k, u_{k−1})`,
/// apply `u_k = −K(x_k − x_r) + u_r − R̂`, store the previous step's
/// observed pair, then take exactly one momentum-SGD step.
///
/// The residual of `(x_k, u_k)` can only be observed after `u_k` has acted
/// on the plant, so the pair `([x_k, u_k], R̃_k)` enters the dataset at step
/// `k+1` through `r_obs_prev`.
#[derive(Debug, Clone)]
pub struct FridayController {
    gain_k: Matrix,
    net: MlpNetwork,
    dataset: ReplayDataset,
    hyper: TrainingHyper,
    last_u: f64,
    last_rhat: f64,
    sn_enabled: bool,
    rng: ChaCha8Rng,
    pending: Option<Vec<f64>>,
    scaler: Option<InputScaler>,
}

impl FridayController {
    /// `seed` drives mini-batch sampling; the network carries its own
    /// initialization.
    pub fn new(
        gain_k: Matrix,
        net: MlpNetwork,
        hyper: TrainingHyper,
        sn_enabled: bool,
        seed: u64,
    ) -> Result<Self, ControlError> {
        if gain_k.rows() != 1 || gain_k.cols() + 1 != net.input_dim() {
            return Err(ControlError::DimensionMismatch {
                expected: net.input_dim(),
                got: gain_k.cols() + 1,
            });
        }
        if net.output_dim() != 1 {
            return Err(ControlError::DimensionMismatch {
                expected: 1,
                got: net.output_dim(),
            });
        }
        hyper.validate().map_err(ControlError::InvalidArgument)?;
        Ok(Self {
            gain_k,
            net,
            dataset: ReplayDataset::new(),
            hyper,
            last_u: 0.0,
            last_rhat: 0.0,
            sn_enabled,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: None,
            scaler: None,
        })
    }

    pub fn with_dataset_capacity(mut self, capacity: Option<usize>) -> Self {
        self.dataset = match capacity {
            Some(c) => ReplayDataset::with_capacity(c),
            None => ReplayDataset::new(),
        };
        self
    }

    /// Divide network inputs by running standard deviations of the stored
    /// inputs.
    pub fn with_input_scaling(mut self, enabled: bool) -> Self {
        self.scaler = enabled.then(|| InputScaler::new(self.net.input_dim()));
        self
    }

    pub fn gain(&self) -> &Matrix {
        &self.gain_k
    }

    pub fn net(&self) -> &MlpNetwork {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut MlpNetwork {
        &mut self.net
    }

    pub fn dataset(&self) -> &ReplayDataset {
        &self.dataset
    }

    pub fn hyper(&self) -> &TrainingHyper {
        &self.hyper
    }

    pub fn last_u(&self) -> f64 {
        self.last_u
    }

    pub fn last_rhat(&self) -> f64 {
        self.last_rhat
    }

    pub fn sn_enabled(&self) -> bool {
        self.sn_enabled
    }

    /// The network input the controller would feed for `(x, u)`, after
    /// optional scaling.
    pub fn network_input(&self, x: &[f64], u: f64) -> Vec<f64> {
        let mut input = Vec::with_capacity(x.len() + 1);
        input.extend_from_slice(x);
        input.push(u);
        if let Some(s) = &self.scaler {
            s.apply(&mut input);
        }
        input
    }

    /// `R̂(x, u)` from the current network, without side effects.
    pub fn predict(&self, x: &[f64], u: f64) -> Result<f64, ControlError> {
        Ok(self.net.forward(&self.network_input(x, u))?[0])
    }

    pub fn step(
        &mut self,
        x: &[f64],
        reference: &Reference,
        r_obs_prev: Option<f64>,
    ) -> Result<FridayStep, ControlError> {
        self.step_observed(x, reference, r_obs_prev, &mut Silent)
    }

    pub fn step_observed(
        &mut self,
        x: &[f64],
        reference: &Reference,
        r_obs_prev: Option<f64>,
        observer: &mut dyn StepObserver,
    ) -> Result<FridayStep, ControlError> {
        if x.len() != self.gain_k.cols() {
            return Err(ControlError::DimensionMismatch {
                expected: self.gain_k.cols(),
                got: x.len(),
            });
        }
        let mut flags = StepFlags::default();

        if self.sn_enabled {
            let sigmas = self.net.normalize_lipschitz()?;
            observer.on_event(&StepEvent::Normalized {
                net: &self.net,
                sigmas: &sigmas,
            });
        }

        let input = self.network_input(x, self.last_u);
        let r_hat = self.net.forward(&input)?[0];
        observer.on_event(&StepEvent::Predicted {
            net: &self.net,
            x,
            input: &input,
            r_hat,
        });

        let base = lqr_step(&self.gain_k, x, reference);
        let u = if r_hat.is_finite() {
            base - r_hat
        } else {
            flags.fallback = true;
            base
        };

        if let (Some(r_obs), Some(prev)) = (r_obs_prev, self.pending.take()) {
            let (px, pu) = prev.split_at(prev.len() - 1);
            match self.dataset.append(px, pu, &[r_obs]) {
                Ok(()) => {
                    if let Some(s) = &mut self.scaler {
                        s.update(&prev);
                    }
                    observer.on_event(&StepEvent::Appended {
                        dataset_len: self.dataset.len(),
                    });
                }
                Err(_) => flags.obs_rejected = true,
            }
        }

        let mut loss = None;
        if !self.dataset.is_empty() {
            let (mut xs, ys) = self
                .dataset
                .sample_minibatch(self.hyper.batch_size, &mut self.rng)
                .expect("dataset is nonempty");
            if let Some(s) = &self.scaler {
                xs.iter_mut().for_each(|v| s.apply(v));
            }
            let (l, grads) = self.net.loss_and_gradients(&xs, &ys)?;
            let applied = grads.iter().all(Matrix::is_finite);
            if applied {
                self.net.sgd_momentum_step(&grads, &self.hyper)?;
            } else {
                flags.train_skipped = true;
            }
            observer.on_event(&StepEvent::Trained {
                net: &self.net,
                loss: l,
                applied,
            });
            loss = Some(l);
        }

        let mut pending = x.to_vec();
        pending.push(u);
        self.pending = Some(pending);
        self.last_u = u;
        self.last_rhat = r_hat;
        Ok(FridayStep {
            u,
            r_hat,
            loss,
            flags,
        })
    }
}
