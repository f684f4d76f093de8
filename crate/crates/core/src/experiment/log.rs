//! Per-control-step trajectory records and their CSV form.
//!
//! Values are quantized to 12 significant digits when recorded, which is
//! exactly the precision written to CSV, so metrics computed from a file
//! read back from disk equal the in-memory metrics bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: bad column layout {found:?}")]
    Columns { path: String, found: Vec<String> },
    #[error("{path}: bad value {value:?} in column {column}")]
    Value {
        path: String,
        column: &'static str,
        value: String,
    },
}

pub const LOG_COLUMNS: [&str; 10] = [
    "t", "p", "pdot", "pr", "prdot", "u", "r_true", "r_hat", "loss", "flags",
];

/// Rounds to 12 significant decimal digits (the CSV precision).
pub fn quantize(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    /// Network output was non-finite; the step used plain LQR.
    pub fallback: bool,
    /// The plant integration blew up during this control period.
    pub diverged: bool,
    /// Gradients were non-finite and the SGD update was skipped.
    pub train_skipped: bool,
    /// The residual observation was non-finite and not stored.
    pub obs_rejected: bool,
}

impl StepFlags {
    const NAMES: [&'static str; 4] = ["fallback", "diverged", "train_skipped", "obs_rejected"];

    fn bits(&self) -> [bool; 4] {
        [
            self.fallback,
            self.diverged,
            self.train_skipped,
            self.obs_rejected,
        ]
    }

    pub fn any(&self) -> bool {
        self.bits().iter().any(|&b| b)
    }

    pub fn encode(&self) -> String {
        let tokens: Vec<&str> = Self::NAMES
            .iter()
            .zip(self.bits())
            .filter(|(_, b)| *b)
            .map(|(n, _)| *n)
            .collect();
        if tokens.is_empty() {
            "-".into()
        } else {
            tokens.join("|")
        }
    }

    pub fn decode(s: &str) -> Option<Self> {
        let mut f = Self::default();
        if s == "-" {
            return Some(f);
        }
        for tok in s.split('|') {
            match tok {
                "fallback" => f.fallback = true,
                "diverged" => f.diverged = true,
                "train_skipped" => f.train_skipped = true,
                "obs_rejected" => f.obs_rejected = true,
                _ => return None,
            }
        }
        Some(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub p: f64,
    pub pdot: f64,
    pub pr: f64,
    pub prdot: f64,
    pub u: f64,
    /// True residual force at `(x_k, u_k)`.
    pub r_true: f64,
    /// Residual estimate used in the control law, if the controller has one.
    pub r_hat: Option<f64>,
    /// Mini-batch training loss of this step, if training happened.
    pub loss: Option<f64>,
    pub flags: StepFlags,
}

impl LogRow {
    fn quantized(self) -> Self {
        Self {
            t: quantize(self.t),
            p: quantize(self.p),
            pdot: quantize(self.pdot),
            pr: quantize(self.pr),
            prdot: quantize(self.prdot),
            u: quantize(self.u),
            r_true: quantize(self.r_true),
            r_hat: self.r_hat.map(quantize),
            loss: self.loss.map(quantize),
            flags: self.flags,
        }
    }

    /// Tracking error `z = x − x_r`.
    pub fn z(&self) -> [f64; 2] {
        [self.p - self.pr, self.pdot - self.prdot]
    }

    pub fn z_norm(&self) -> f64 {
        let [a, b] = self.z();
        (a * a + b * b).sqrt()
    }
}

/// Time-indexed record of one trial. Rows are strictly increasing in `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    /// Free-form header lines (effective configuration echo).
    pub header: Vec<String>,
    pub rows: Vec<LogRow>,
    pub diverged: bool,
    /// Wall time spent in estimator training, seconds. Not part of the
    /// deterministic content.
    pub train_wall_time: f64,
}

impl TrajectoryLog {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: LogRow) {
        if row.flags.diverged {
            self.diverged = true;
        }
        self.rows.push(row.quantized());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_estimator(&self) -> bool {
        self.rows.iter().any(|r| r.r_hat.is_some())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for line in &self.header {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "# diverged = {}", self.diverged);
        let _ = writeln!(out, "# wall_time_s = {}", self.train_wall_time);
        out.push_str(&LOG_COLUMNS.join(","));
        out.push('\n');
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(fmt_value).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_value(r.t),
                fmt_value(r.p),
                fmt_value(r.pdot),
                fmt_value(r.pr),
                fmt_value(r.prdot),
                fmt_value(r.u),
                fmt_value(r.r_true),
                opt(r.r_hat),
                opt(r.loss),
                r.flags.encode()
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), LogError> {
        fs::write(path, self.to_csv_string()).map_err(|source| LogError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self, LogError> {
        let p = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| LogError::Io {
            path: p.clone(),
            source,
        })?;
        let mut log = TrajectoryLog::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim_start();
            if let Some(v) = body.strip_prefix("diverged = ") {
                log.diverged = v.trim() == "true";
            } else if let Some(v) = body.strip_prefix("wall_time_s = ") {
                log.train_wall_time = v.trim().parse().unwrap_or(0.0);
            } else {
                log.header.push(body.to_string());
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let csv_err = |source| LogError::Csv {
            path: p.clone(),
            source,
        };
        let cols: Vec<String> = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(String::from)
            .collect();
        if cols != LOG_COLUMNS {
            return Err(LogError::Columns {
                path: p,
                found: cols,
            });
        }
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64, LogError> {
                rec[i].parse().map_err(|_| LogError::Value {
                    path: p.clone(),
                    column: LOG_COLUMNS[i],
                    value: rec[i].to_string(),
                })
            };
            let opt = |i: usize| -> Result<Option<f64>, LogError> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            let flags = StepFlags::decode(&rec[9]).ok_or_else(|| LogError::Value {
                path: p.clone(),
                column: "flags",
                value: rec[9].to_string(),
            })?;
            log.rows.push(LogRow {
                t: num(0)?,
                p: num(1)?,
                pdot: num(2)?,
                pr: num(3)?,
                prdot: num(4)?,
                u: num(5)?,
                r_true: num(6)?,
                r_hat: opt(7)?,
                loss: opt(8)?,
                flags,
            });
        }
        Ok(log)
    }
}
