//! TOML experiment configuration. Every field has a stable key; omitted
//! keys take the defaults below.

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::control::AdaptiveBasis;
use crate::gp::GpHyper;
use crate::mlp::{SnMode, TrainingHyper};
use crate::plant::{EnviroParams, TruthKind, TruthModel, DEFAULT_MASS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Friday,
    FridayNoSn,
    Lqr,
    Adaptive,
    FridayPretrainedGp,
    FridayPretrainedDnn,
    FridayPretrainedSnDnn,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Friday => "friday",
            Self::FridayNoSn => "friday_no_sn",
            Self::Lqr => "lqr",
            Self::Adaptive => "adaptive",
            Self::FridayPretrainedGp => "friday_pretrained_gp",
            Self::FridayPretrainedDnn => "friday_pretrained_dnn",
            Self::FridayPretrainedSnDnn => "friday_pretrained_sn_dnn",
        }
    }

    pub const ALL: [ControllerKind; 7] = [
        Self::Friday,
        Self::FridayNoSn,
        Self::Lqr,
        Self::Adaptive,
        Self::FridayPretrainedGp,
        Self::FridayPretrainedDnn,
        Self::FridayPretrainedSnDnn,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn has_estimator(self) -> bool {
        !matches!(self, Self::Lqr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthConfig {
    Nominal,
    /// `period` defaults to the experiment duration.
    Param {
        #[serde(default = "default_a_load")]
        a_load: f64,
        #[serde(default)]
        period: Option<f64>,
    },
    Multi,
    Enviro(EnviroParams),
}

fn default_a_load() -> f64 {
    9.0
}

impl TruthConfig {
    pub fn build(&self, mass: f64, duration: f64) -> Result<TruthModel, ExperimentError> {
        let kind = match *self {
            Self::Nominal => TruthKind::NominalOnly,
            Self::Param { a_load, period } => TruthKind::ParamTruth {
                a_load,
                period: period.unwrap_or(duration),
            },
            Self::Multi => TruthKind::MultiTruth,
            Self::Enviro(p) => TruthKind::EnviroTruth(p),
        };
        Ok(TruthModel::new(mass, kind)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceConfig {
    Setpoint { target: f64 },
    Sine { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Acceleration of the true dynamics at the sample instant.
    #[default]
    Oracle,
    /// Backward difference of consecutive velocity samples, plus optional
    /// Gaussian noise.
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqrConfig {
    /// Diagonal of `Q`.
    pub q: Vec<f64>,
    pub r: f64,
}

impl Default for LqrConfig {
    fn default() -> Self {
        Self {
            q: vec![20.0, 5.0],
            r: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub zeta: f64,
    pub sn_mode: SnMode,
    pub input_scaling: bool,
    /// Ring-buffer capacity of the online dataset; unbounded when absent.
    pub dataset_capacity: Option<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            layer_sizes: vec![3, 50, 50, 50, 50, 1],
            zeta: 1.0,
            sn_mode: SnMode::ScaleDown,
            input_scaling: false,
            dataset_capacity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub gamma: f64,
    pub basis: AdaptiveBasis,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            gamma: 0.03,
            basis: AdaptiveBasis::Standard,
        }
    }
}

/// Offline data collection and training for the pre-trained estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineConfig {
    /// LQR run length used to collect training data, seconds.
    pub collect_duration: f64,
    /// A new uniform setpoint in `[-setpoint_range, setpoint_range]` is drawn
    /// every `setpoint_interval` seconds.
    pub setpoint_interval: f64,
    pub setpoint_range: f64,
    pub data_seed: u64,
    /// Number of SGD steps for the offline networks.
    pub dnn_steps: usize,
    pub gp_lengthscale: f64,
    pub gp_signal_var: f64,
    pub gp_noise_var: f64,
    /// Select lengthscale and signal variance by marginal likelihood over a
    /// small grid.
    pub gp_grid_search: bool,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        let gp = GpHyper::default();
        Self {
            collect_duration: 200.0,
            setpoint_interval: 5.0,
            setpoint_range: 1.0,
            data_seed: 1000,
            dnn_steps: 2000,
            gp_lengthscale: gp.lengthscale,
            gp_signal_var: gp.signal_var,
            gp_noise_var: gp.noise_var,
            gp_grid_search: false,
        }
    }
}

impl OfflineConfig {
    pub fn gp_hyper(&self) -> GpHyper {
        GpHyper {
            lengthscale: self.gp_lengthscale,
            signal_var: self.gp_signal_var,
            noise_var: self.gp_noise_var,
        }
    }
}

/// Settings of the diagnostic suite (`check`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Radius of the admissible state ball.
    pub r_x: f64,
    /// Radius of the admissible input ball.
    pub r_u: f64,
    /// Sampled pairs per empirical Lipschitz audit.
    pub audit_pairs: usize,
    /// Run the audit and the contraction probes every this many steps.
    pub audit_every: usize,
    /// Sampled `(u₁, u₂)` pairs per contraction probe.
    pub contraction_pairs: usize,
    /// Fraction of the run (from the end) treated as steady state.
    pub steady_fraction: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            r_x: 100.0,
            r_u: 1000.0,
            audit_pairs: 10_000,
            audit_every: 50,
            contraction_pairs: 10_000,
            steady_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub controller: ControllerKind,
    pub truth: TruthConfig,
    pub reference: ReferenceConfig,
    /// Seconds.
    pub duration: f64,
    /// Hz.
    pub control_rate: f64,
    /// Integrator step, seconds. Must divide the control period.
    pub sim_substep: f64,
    pub mass: f64,
    pub initial_p: f64,
    pub initial_pdot: f64,
    pub seeds: Vec<u64>,
    pub observation: ObservationMode,
    /// Standard deviation of additive acceleration noise in measured mode,
    /// m/s².
    pub accel_noise_std: f64,
    /// Metrics ignore steps with `t < warmup`.
    pub warmup: f64,
    pub output_dir: String,
    pub lqr: LqrConfig,
    pub network: NetworkConfig,
    pub training: TrainingHyper,
    pub adaptive: AdaptiveConfig,
    pub offline: OfflineConfig,
    pub check: CheckConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            controller: ControllerKind::Friday,
            truth: TruthConfig::Multi,
            reference: ReferenceConfig::Sine {
                omega: 2.0 * std::f64::consts::PI / 50.0,
            },
            duration: 50.0,
            control_rate: 20.0,
            sim_substep: 1e-3,
            mass: DEFAULT_MASS,
            initial_p: 0.0,
            initial_pdot: 0.0,
            seeds: (0..10).collect(),
            observation: ObservationMode::Oracle,
            accel_noise_std: 0.0,
            warmup: 0.0,
            output_dir: "out".into(),
            lqr: LqrConfig::default(),
            network: NetworkConfig::default(),
            training: TrainingHyper::default(),
            adaptive: AdaptiveConfig::default(),
            offline: OfflineConfig::default(),
            check: CheckConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn control_period(&self) -> f64 {
        1.0 / self.control_rate
    }

    /// Integrator substeps per control period.
    pub fn substeps(&self) -> usize {
        (self.control_period() / self.sim_substep).round() as usize
    }

    /// Control steps in a run; a trailing partial period is dropped.
    pub fn steps(&self) -> usize {
        (self.duration * self.control_rate + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be >= 0, got {}", self.duration));
        }
        if !pos(self.control_rate) || !pos(self.sim_substep) || !pos(self.mass) {
            return bad("control_rate, sim_substep and mass must be > 0".into());
        }
        let ratio = self.control_period() / self.sim_substep;
        if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return bad(format!(
                "control period {} is not an integer multiple of sim_substep {}",
                self.control_period(),
                self.sim_substep
            ));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if !(self.accel_noise_std >= 0.0) || !(self.warmup >= 0.0) {
            return bad("accel_noise_std and warmup must be >= 0".into());
        }
        if self.lqr.q.len() != 2 || self.lqr.q.iter().any(|&q| !(q >= 0.0)) || !pos(self.lqr.r) {
            return bad("lqr.q needs two entries >= 0 and lqr.r must be > 0".into());
        }
        let sizes = &self.network.layer_sizes;
        if sizes.len() < 2 || sizes[0] != 3 || sizes[sizes.len() - 1] != 1 || sizes.contains(&0) {
            return bad(
                "network.layer_sizes must start with 3, end with 1, and be positive".into(),
            );
        }
        if !pos(self.network.zeta) {
            return bad("network.zeta must be > 0".into());
        }
        self.training.validate().map_err(ExperimentError::Config)?;
        if !pos(self.adaptive.gamma) {
            return bad("adaptive.gamma must be > 0".into());
        }
        match self.reference {
            ReferenceConfig::Sine { omega } if !omega.is_finite() => {
                return bad("reference.omega must be finite".into())
            }
            ReferenceConfig::Setpoint { target } if !target.is_finite() => {
                return bad("reference.target must be finite".into())
            }
            _ => {}
        }
        let o = &self.offline;
        if !pos(o.collect_duration) || !pos(o.setpoint_interval) || o.dnn_steps == 0 {
            return bad(
                "offline.collect_duration, setpoint_interval, dnn_steps must be > 0".into(),
            );
        }
        let c = &self.check;
        if !pos(c.r_x)
            || !pos(c.r_u)
            || c.audit_every == 0
            || !(c.steady_fraction > 0.0 && c.steady_fraction <= 1.0)
        {
            return bad(
                "check.r_x, r_u, audit_every must be > 0 and steady_fraction in (0, 1]".into(),
            );
        }
        self.truth.build(self.mass, self.duration.max(1e-9))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.substeps(), 50);
        assert_eq!(cfg.steps(), 1000);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            controller = "adaptive"
            duration = 20.0
            [truth]
            kind = "enviro"
            r1 = 0.4
            [reference]
            kind = "setpoint"
            target = 1.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.controller, ControllerKind::Adaptive);
        match cfg.truth {
            TruthConfig::Enviro(p) => {
                assert_eq!(p.r1, 0.4);
                assert_eq!(p.a_roll, 0.4);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.steps(), 400);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "sim_substep = 0.003",
            "duration = -1.0",
            "seeds = []",
            "unknown_key = 1",
            "[network]\nlayer_sizes = [2, 5, 1]",
            "[truth]\nkind = \"param\"\na_load = -1.0",
        ] {
            assert!(
                matches!(
                    ExperimentConfig::from_toml(text),
                    Err(ExperimentError::Config(_)) | Err(ExperimentError::Plant(_))
                ),
                "{text}"
            );
        }
    }
}
