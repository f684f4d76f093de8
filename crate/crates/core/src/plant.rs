//! Longitudinal car plants: the nominal double integrator the controllers
//! are designed against, and the nonlinear truth models they are tested on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("simulation diverged at t = {t} (state p = {p}, pdot = {pdot})")]
    Diverged { t: f64, p: f64, pdot: f64 },
    #[error("invalid plant parameter: {0}")]
    InvalidParameter(String),
}

pub const DEFAULT_MASS: f64 = 1.5;
pub const GRAVITY: f64 = 9.81;

/// Nominal LTI model `ẋ = Ax + Bu` with `x = [p, ṗ]`.
#[derive(Debug, Clone)]
pub struct LtiModel {
    pub a: Matrix,
    pub b: Matrix,
    pub mass: f64,
}

impl LtiModel {
    /// `m·p̈ = u` as `A = [[0,1],[0,0]]`, `B = [[0],[1/m]]`.
    pub fn car(mass: f64) -> Result<Self, PlantError> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(PlantError::InvalidParameter(format!(
                "mass must be > 0, got {mass}"
            )));
        }
        Ok(Self {
            a: Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]),
            b: Matrix::column(&[0.0, 1.0 / mass]),
            mass,
        })
    }
}

/// Icy-road environment forces: air drag, rolling resistance and a Duffing
/// spring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnviroParams {
    pub mu_icy: f64,
    pub c_air: f64,
    pub r1: f64,
    pub r2: f64,
    pub a_roll: f64,
    pub k1: f64,
    pub k2: f64,
    pub g: f64,
}

impl Default for EnviroParams {
    fn default() -> Self {
        Self {
            mu_icy: 0.6,
            c_air: 0.6,
            r1: 0.2,
            r2: 0.1,
            a_roll: 0.4,
            k1: 0.5,
            k2: 0.3,
            g: GRAVITY,
        }
    }
}

impl EnviroParams {
    /// Stronger rolling resistance used for the no-normalization divergence
    /// experiment.
    pub fn harsh() -> Self {
        Self {
            r1: 0.4,
            a_roll: 0.8,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), PlantError> {
        let all = [
            self.mu_icy,
            self.c_air,
            self.r1,
            self.r2,
            self.a_roll,
            self.k1,
            self.k2,
            self.g,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::InvalidParameter(
                "non-finite enviro parameter".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthKind {
    /// `m·p̈ = u`.
    NominalOnly,
    /// `m(t)·p̈ = λ(t)·u` with `m(t) = m + a_load·m·(1 − e^{−t/T})` and
    /// `λ(t) = e^{−t/T}`.
    ParamTruth { a_load: f64, period: f64 },
    /// `m·p̈ = (1 + ṗ²)·u + p² + ṗ·|u|`.
    MultiTruth,
    /// `m·p̈ = μ·u − f_air − f_roll − f_duff`.
    EnviroTruth(EnviroParams),
}

/// The "real" plant hidden from the controllers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthModel {
    pub mass: f64,
    pub kind: TruthKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimState {
    pub p: f64,
    pub pdot: f64,
    pub t: f64,
}

impl SimState {
    pub fn x(&self) -> [f64; 2] {
        [self.p, self.pdot]
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.pdot.is_finite() && self.t.is_finite()
    }
}

/// Sign with `sign(0) = 0`.
fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

struct EnviroForces {
    air: f64,
    roll: f64,
    duff: f64,
}

fn enviro_forces(e: &EnviroParams, mass: f64, p: f64, pdot: f64) -> EnviroForces {
    let speed = pdot.abs();
    EnviroForces {
        air: e.c_air * pdot * pdot * pdot.sin(),
        roll: -sign0(pdot) * mass * e.g * (e.r1 * (1.0 - (-e.a_roll * speed).exp()) + e.r2 * speed),
        duff: e.k1 * p + e.k2 * p * p * p,
    }
}

impl TruthModel {
    pub fn new(mass: f64, kind: TruthKind) -> Result<Self, PlantError> {
        let m = Self { mass, kind };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(PlantError::InvalidParameter(format!(
                "mass must be > 0, got {}",
                self.mass
            )));
        }
        match self.kind {
            TruthKind::ParamTruth { a_load, period } => {
                if !(period > 0.0 && period.is_finite()) {
                    return Err(PlantError::InvalidParameter(format!(
                        "period must be > 0, got {period}"
                    )));
                }
                // m(t) ≥ m·min(1, 1 + a_load) must stay away from zero
                if !(a_load.is_finite() && a_load > -1.0) {
                    return Err(PlantError::InvalidParameter(format!(
                        "a_load must be > -1, got {a_load}"
                    )));
                }
            }
            TruthKind::EnviroTruth(e) => e.validate()?,
            TruthKind::NominalOnly | TruthKind::MultiTruth => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            TruthKind::NominalOnly => "nominal",
            TruthKind::ParamTruth { .. } => "param",
            TruthKind::MultiTruth => "multi",
            TruthKind::EnviroTruth(_) => "enviro",
        }
    }

    /// True acceleration `p̈` at state `s` under input `u`.
    pub fn accel(&self, s: &SimState, u: f64) -> f64 {
        let m = self.mass;
        match self.kind {
            TruthKind::NominalOnly => u / m,
            TruthKind::ParamTruth { a_load, period } => {
                let decay = (-s.t / period).exp();
                let mass_t = m + a_load * m * (1.0 - decay);
                decay * u / mass_t
            }
            TruthKind::MultiTruth => {
                ((1.0 + s.pdot * s.pdot) * u + s.p * s.p + s.pdot * u.abs()) / m
            }
            TruthKind::EnviroTruth(e) => {
                let f = enviro_forces(&e, m, s.p, s.pdot);
                (e.mu_icy * u - f.air - f.roll - f.duff) / m
            }
        }
    }

    /// Closed-form residual force `R` with `m·p̈ = u + R`, written
    /// independently of [`TruthModel::accel`].
    pub fn residual(&self, s: &SimState, u: f64) -> f64 {
        match self.kind {
            TruthKind::NominalOnly => 0.0,
            TruthKind::ParamTruth { a_load, period } => {
                let decay = (-s.t / period).exp();
                u * (decay / (1.0 + a_load * (1.0 - decay)) - 1.0)
            }
            TruthKind::MultiTruth => s.pdot * s.pdot * u + s.p * s.p + s.pdot * u.abs(),
            TruthKind::EnviroTruth(e) => {
                let f = enviro_forces(&e, self.mass, s.p, s.pdot);
                (e.mu_icy - 1.0) * u - f.air - f.roll - f.duff
            }
        }
    }
}

pub fn truth_accel(model: &TruthModel, s: &SimState, u: f64) -> f64 {
    model.accel(s, u)
}

/// Classical RK4 step of `(ṗ, p̈)` with `u` held over the step.
pub fn rk4_step(model: &TruthModel, s: &SimState, u: f64, dt: f64) -> Result<SimState, PlantError> {
    let f =
        |t: f64, p: f64, v: f64| -> (f64, f64) { (v, model.accel(&SimState { p, pdot: v, t }, u)) };
    let h = dt;
    let (k1p, k1v) = f(s.t, s.p, s.pdot);
    let (k2p, k2v) = f(s.t + 0.5 * h, s.p + 0.5 * h * k1p, s.pdot + 0.5 * h * k1v);
    let (k3p, k3v) = f(s.t + 0.5 * h, s.p + 0.5 * h * k2p, s.pdot + 0.5 * h * k2v);
    let (k4p, k4v) = f(s.t + h, s.p + h * k3p, s.pdot + h * k3v);
    let next = SimState {
        p: s.p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
        pdot: s.pdot + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        t: s.t + h,
    };
    if !next.is_finite() {
        return Err(PlantError::Diverged {
            t: next.t,
            p: next.p,
            pdot: next.pdot,
        });
    }
    Ok(next)
}

/// Integrates one control period of length `substeps·dt` under a
/// zero-order hold on `u`.
pub fn simulate_hold(
    model: &TruthModel,
    s: &SimState,
    u: f64,
    dt: f64,
    substeps: usize,
) -> Result<SimState, PlantError> {
    let t0 = s.t;
    let mut cur = *s;
    for i in 0..substeps {
        cur = rk4_step(model, &cur, u, dt)?;
        // recompute t from the start to avoid drift from repeated addition
        cur.t = t0 + (i + 1) as f64 * dt;
    }
    Ok(cur)
}

/// Residual force explaining an observed acceleration under the nominal
/// model: `m·p̈ − u`.
pub fn observe_residual(p_ddot_obs: f64, u: f64, mass: f64) -> f64 {
    mass * p_ddot_obs - u
}

/// Backward difference `(ṗ_now − ṗ_prev)/dt`.
pub fn acceleration_estimate(pdot_now: f64, pdot_prev: f64, dt: f64) -> f64 {
    (pdot_now - pdot_prev) / dt
}

/// Reference state and feed-forward input satisfying `ẋ_r = Ax_r + Bu_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x_r: Vec<f64>,
    pub u_r: f64,
}

pub fn reference_setpoint(target_p: f64) -> Reference {
    Reference {
        x_r: vec![target_p, 0.0],
        u_r: 0.0,
    }
}

/// `x_r = [sin ωt, ω cos ωt]`, `u_r = −mω² sin ωt`.
pub fn reference_sine(t: f64, omega: f64, mass: f64) -> Reference {
    let (s, c) = (omega * t).sin_cos();
    Reference {
        x_r: vec![s, omega * c],
        u_r: -mass * omega * omega * s,
    }
}
