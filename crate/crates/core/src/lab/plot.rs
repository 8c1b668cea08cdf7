use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Deserialize)]
struct DecaySeries {
    series: String,
    t: Vec<f64>,
    gap: Vec<f64>,
}

#[derive(Deserialize)]
struct MeanFieldRow {
    series: String,
    n: usize,
    mean_err: f64,
    stderr: f64,
}

fn collect(dir: &Path, name: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, name, out)?;
        } else if p.file_name().is_some_and(|f| f == name) {
            out.push(p);
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

/// Convert run artifacts under `input` into long-format tables in `output`:
/// `decay.csv` (`series,t,log_gap`) and `mean_field.csv`
/// (`series,N,mean_err,stderr`). Tables without data keep their header.
/// Returns the written paths.
pub fn emit_plot_data(input: &Path, output: &Path) -> Result<Vec<PathBuf>> {
    if !input.is_dir() {
        return Err(Error::Config(format!(
            "artifact directory {} does not exist",
            input.display()
        )));
    }
    fs::create_dir_all(output).map_err(|e| Error::io(format!("creating {}", output.display()), e))?;

    let mut decay = String::from("series,t,log_gap\n");
    let mut files = Vec::new();
    collect(input, "decay.json", &mut files)?;
    for f in &files {
        let series: Vec<DecaySeries> = serde_json::from_str(&read(f)?)?;
        for s in series {
            for (t, g) in s.t.iter().zip(&s.gap) {
                if *g > 0.0 {
                    writeln!(decay, "{},{t},{}", s.series, g.ln()).expect("string write");
                }
            }
        }
    }

    let mut mean_field = String::from("series,N,mean_err,stderr\n");
    files.clear();
    collect(input, "mean_field.json", &mut files)?;
    for f in &files {
        let rows: Vec<MeanFieldRow> = serde_json::from_str(&read(f)?)?;
        for r in rows {
            writeln!(mean_field, "{},{},{},{}", r.series, r.n, r.mean_err, r.stderr).expect("string write");
        }
    }

    let mut written = Vec::new();
    for (name, body) in [("decay.csv", decay), ("mean_field.csv", mean_field)] {
        let p = output.join(name);
        fs::write(&p, body).map_err(|e| Error::io(format!("writing {}", p.display()), e))?;
        written.push(p);
    }
    Ok(written)
}
