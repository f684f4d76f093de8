use super::{ExperimentError, TrajectoryLog};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Mean `|p − p_r|`, m.
    pub mean_tracking_error: f64,
    /// Mean `|R − R̂|`, N; absent for controllers without an estimator.
    pub mean_estimation_error: Option<f64>,
    /// `|p − p_r|` at the last logged step, m.
    pub final_offset: f64,
    pub train_wall_time: f64,
    pub diverged: bool,
}

fn nonempty(log: &TrajectoryLog) -> Result<(), ExperimentError> {
    if log.is_empty() {
        return Err(ExperimentError::Metrics("empty trajectory log".into()));
    }
    Ok(())
}

/// Mean position error over steps with `t ≥ warmup`.
pub fn mean_tracking_error(log: &TrajectoryLog, warmup: f64) -> Result<f64, ExperimentError> {
    nonempty(log)?;
    let errs: Vec<f64> = log
        .rows
        .iter()
        .filter(|r| r.t >= warmup)
        .map(|r| (r.p - r.pr).abs())
        .collect();
    if errs.is_empty() {
        return Err(ExperimentError::Metrics(format!(
            "no steps after warmup {warmup} s"
        )));
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Mean `|r_true − r_hat|` over steps that carry an estimate.
pub fn mean_estimation_error(log: &TrajectoryLog) -> Result<f64, ExperimentError> {
    nonempty(log)?;
    let errs: Vec<f64> = log
        .rows
        .iter()
        .filter_map(|r| r.r_hat.map(|h| (r.r_true - h).abs()))
        .collect();
    if errs.is_empty() {
        return Err(ExperimentError::Metrics(
            "log has no residual estimates".into(),
        ));
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

pub fn final_offset(log: &TrajectoryLog) -> Result<f64, ExperimentError> {
    nonempty(log)?;
    let last = log.rows.last().expect("nonempty");
    Ok((last.p - last.pr).abs())
}

pub fn metrics(log: &TrajectoryLog, warmup: f64) -> Result<MetricsReport, ExperimentError> {
    Ok(MetricsReport {
        mean_tracking_error: mean_tracking_error(log, warmup)?,
        mean_estimation_error: if log.has_estimator() {
            Some(mean_estimation_error(log)?)
        } else {
            None
        },
        final_offset: final_offset(log)?,
        train_wall_time: log.train_wall_time,
        diverged: log.diverged,
    })
}
