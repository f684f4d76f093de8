use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use friday_core::experiment::check::{run_checks, CheckItem};
use friday_core::experiment::{
    compare_estimators, emit_logs, metrics, run_experiment, ControllerKind, ExperimentConfig,
    ExperimentError, TruthConfig,
};
use friday_core::plant::EnviroParams;

#[derive(Parser)]
#[command(
    name = "friday",
    version,
    about = "LQR + online residual-learning tracking experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seeds 0..n instead of the configured seed list.
    #[arg(long)]
    seeds: Option<u64>,
    /// Worker threads for independent trials.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config, one trial per seed.
    Run(Common),
    /// Run every truth model × controller combination.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated truth models: nominal, param, multi, enviro, enviro_harsh.
        #[arg(long, default_value = "param,multi,enviro")]
        truths: String,
        /// Comma-separated controllers.
        #[arg(long, default_value = "friday,adaptive,lqr")]
        controllers: String,
    },
    /// Offline SN-DNN / DNN / GP comparison on the configured scenario.
    CompareEstimators(Common),
    /// Contraction, Lipschitz and error-ball diagnostics on a FRIDAY run.
    Check(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                path: path.display().to_string(),
                source,
            })?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(n) = common.seeds {
        cfg.seeds = (0..n).collect();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_truth(name: &str) -> Result<TruthConfig, ExperimentError> {
    Ok(match name {
        "nominal" => TruthConfig::Nominal,
        "param" => TruthConfig::Param {
            a_load: 9.0,
            period: None,
        },
        "multi" => TruthConfig::Multi,
        "enviro" => TruthConfig::Enviro(EnviroParams::default()),
        "enviro_harsh" => TruthConfig::Enviro(EnviroParams::harsh()),
        other => {
            return Err(ExperimentError::Config(format!(
                "unknown truth model {other:?}"
            )))
        }
    })
}

fn parse_controller(name: &str) -> Result<ControllerKind, ExperimentError> {
    ControllerKind::from_name(name)
        .ok_or_else(|| ExperimentError::Config(format!("unknown controller {name:?}")))
}

fn write_text(path: &Path, text: &str) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into())
}

/// Runs `cfg`, writes per-seed CSVs under `dir/name_seed<k>.csv`, prints and
/// returns summary lines `name,seed,tracking,estimation,final_offset,diverged`.
fn run_and_report(
    cfg: &ExperimentConfig,
    name: &str,
    dir: &Path,
    parallel: usize,
) -> Result<Vec<String>, ExperimentError> {
    let logs = run_experiment(cfg, parallel, None)?;
    emit_logs(dir, name, cfg, &logs)?;
    let mut lines = Vec::new();
    for (seed, log) in cfg.seeds.iter().zip(&logs) {
        let line = match metrics(log, cfg.warmup) {
            Ok(m) => format!(
                "{name},{seed},{:.6},{},{:.6},{}",
                m.mean_tracking_error,
                fmt_opt(m.mean_estimation_error),
                m.final_offset,
                m.diverged
            ),
            Err(_) => format!("{name},{seed},-,-,-,{}", log.diverged),
        };
        println!("{line}");
        lines.push(line);
    }
    Ok(lines)
}

const SUMMARY_HEADER: &str =
    "run,seed,mean_tracking_error,mean_estimation_error,final_offset,diverged";

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            let dir = PathBuf::from(&cfg.output_dir);
            println!("{SUMMARY_HEADER}");
            let lines = run_and_report(&cfg, &cfg.name, &dir, common.parallel)?;
            write_text(
                &dir.join(format!("{}_summary.csv", cfg.name)),
                &format!("{SUMMARY_HEADER}\n{}\n", lines.join("\n")),
            )
        }
        Command::Sweep {
            common,
            truths,
            controllers,
        } => {
            let base = load(&common)?;
            let dir = PathBuf::from(&base.output_dir);
            println!("{SUMMARY_HEADER}");
            let mut lines = Vec::new();
            for t in truths.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                for c in controllers
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                {
                    let cfg = ExperimentConfig {
                        truth: parse_truth(t)?,
                        controller: parse_controller(c)?,
                        ..base.clone()
                    };
                    let name = format!("{}_{t}_{c}", base.name);
                    lines.extend(run_and_report(&cfg, &name, &dir, common.parallel)?);
                }
            }
            write_text(
                &dir.join(format!("{}_sweep_summary.csv", base.name)),
                &format!("{SUMMARY_HEADER}\n{}\n", lines.join("\n")),
            )
        }
        Command::CompareEstimators(common) => {
            let cfg = load(&common)?;
            let rows = compare_estimators(&cfg, common.parallel)?;
            let mut text = String::from(
                "model,n_train,wall_time_s,mean_estimation_error,mean_tracking_error,diverged\n",
            );
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{:.4},{:.6},{:.6},{}\n",
                    r.model,
                    r.n_train,
                    r.wall_time,
                    r.mean_estimation_error,
                    r.mean_tracking_error,
                    r.diverged
                ));
            }
            print!("{text}");
            write_text(
                &PathBuf::from(&cfg.output_dir).join(format!("{}_estimators.csv", cfg.name)),
                &text,
            )
        }
        Command::Check(common) => {
            let cfg = load(&common)?;
            let items = run_checks(&cfg)?;
            let mut failed = Vec::new();
            for CheckItem {
                name,
                passed,
                detail,
            } in &items
            {
                println!(
                    "[{}] {name}: {detail}",
                    if *passed { "PASS" } else { "FAIL" }
                );
                if !passed {
                    failed.push(name.clone());
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(ExperimentError::CheckFailed(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
