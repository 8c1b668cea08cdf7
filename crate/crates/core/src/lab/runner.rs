use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::riccati::{flow, DriftVariant};

use super::config::ExperimentConfig;
use super::report::{CheckStatus, Stamp};
use super::suites::{verify_with, SuiteContext};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit code for an error: 2 for configuration and input problems, 3 for
/// numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::UnknownSuite(_)
        | Error::Io { .. }
        | Error::Json(_)
        | Error::DimensionMismatch(_)
        | Error::Asymmetric { .. }
        | Error::NotPsd { .. }
        | Error::NonFinite(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

#[derive(Serialize)]
struct RunStamp<'a> {
    #[serde(flatten)]
    stamp: Stamp,
    suites: &'a [String],
}

#[derive(Serialize)]
struct SummaryRow {
    suite: String,
    status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    match (out, cfg.output_dir.as_deref()) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) if Path::new(d).is_absolute() => PathBuf::from(d),
        (None, Some(d)) => cfg.base_dir.join(d),
        (None, None) => PathBuf::from("kbflow-out"),
    }
}

/// Execute the configured suites and write their artifacts.
///
/// Layout under the output directory: `stamp.json`, `summary.json`, and for
/// each suite `<suite>/report.json` plus its data files (or `<suite>/error.txt`
/// on a numerical error). With a `[model]` section the nominal flow from `P0`
/// goes to `trajectory.csv`, and with a `[regmap]` section the perturbed flow
/// to `trajectory_pi.csv`. Diagnostics go to stderr.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> i32 {
    match run_inner(cfg, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run_inner(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<i32> {
    cfg.run.validate()?;
    let model = cfg.build_model()?;
    let map = cfg.build_map()?;
    if let (Some(m), Some(p)) = (&model, &map) {
        p.check_dim(m.dim())?;
    }
    let dir = output_dir(cfg, out);
    fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let stamp = RunStamp {
        stamp: Stamp::new(cfg.run.seed),
        suites: &cfg.suites,
    };
    write(&dir.join("stamp.json"), &serde_json::to_string_pretty(&stamp)?)?;
    if cfg.suites.is_empty() {
        return Ok(EXIT_OK);
    }

    if let Some(m) = &model {
        let step = cfg.run.step.unwrap_or_else(|| m.default_step());
        let nominal = flow(m, &DriftVariant::Nominal, m.p0(), cfg.run.t_end, step, false)?;
        write(&dir.join("trajectory.csv"), &nominal.to_csv())?;
        if let Some(p) = &map {
            let pert = flow(m, &DriftVariant::Perturbed(p.clone()), m.p0(), cfg.run.t_end, step, false)?;
            write(&dir.join("trajectory_pi.csv"), &pert.to_csv())?;
        }
    }

    let ctx = SuiteContext {
        seed: cfg.run.seed,
        run: cfg.run.clone(),
        model,
        map,
    };
    let mut names = cfg.suites.clone();
    names.sort();
    names.dedup();
    let mut code = EXIT_OK;
    let mut summary = Vec::new();
    for name in &names {
        let sdir = dir.join(name);
        fs::create_dir_all(&sdir).map_err(|e| Error::io(format!("creating {}", sdir.display()), e))?;
        match verify_with(name, &ctx) {
            Ok(output) => {
                write(&sdir.join("report.json"), &output.report.to_json())?;
                for a in &output.artifacts {
                    write(&sdir.join(&a.name), &a.contents)?;
                }
                if !output.report.passed() {
                    code = code.max(EXIT_FAIL);
                    for c in output.report.failures() {
                        eprintln!("{name}: check {} failed ({}), measured {:?}", c.id, c.property, c.measured);
                    }
                }
                summary.push(SummaryRow {
                    suite: name.clone(),
                    status: output.report.status,
                    error: None,
                });
            }
            Err(e) => {
                let c = exit_code(&e);
                eprintln!("{name}: {e}");
                write(&sdir.join("error.txt"), &format!("{e}\n"))?;
                code = code.max(c);
                summary.push(SummaryRow {
                    suite: name.clone(),
                    status: CheckStatus::Fail,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    write(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(code)
}
