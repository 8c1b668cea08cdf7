use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::gaussmetrics::{
    entropy_wasserstein_gap_report, kl_gaussian, kl_monte_carlo, logdet_bound_check, w2_gaussian,
    w2_sq_monte_carlo, GaussianLaw,
};
use crate::matlib::{norm2, norm_fro, Mat, SpdMatrix, Vector};
use crate::regmaps::{nystrom_bias as bias_formula, nystrom_monte_carlo, Partition, RegMap};
use crate::riccati::{fit_line, flow_to, DriftVariant, FilterModel};
use crate::rng;
use crate::sde::{enkf, simulate_replicate, EnkfOptions};

use super::super::models::{random_model, random_spd, suite_rng};
use super::super::report::{Check, SuiteReport};
use super::{suite_id, Artifact, SuiteContext, SuiteOutput};

pub(super) fn logdet(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "logdet";
    const PROP: &str = "|log det(I - A)| <= 3/2 sqrt(r) |A|_2 for |A|_2 < 1/(2 sqrt(r))";
    let id = suite_id(NAME);
    let per_dim = 1000;
    let mut checks = Vec::new();
    for r in 2..=8usize {
        let mut rng = suite_rng(ctx.seed, id, r as u64);
        let limit = 1.0 / (2.0 * (r as f64).sqrt());
        let mut violations = 0usize;
        let mut tightest = 0.0_f64;
        let mut trace_form = 0.0_f64;
        for k in 0..per_dim {
            let g = rng::normal_matrix(&mut rng, r, r);
            // cycle through general, symmetric, rank-one, PSD and scalar directions
            let dir = match k % 5 {
                0 => g,
                1 => (&g + g.transpose()) * 0.5,
                2 => {
                    let col = g.column(0).into_owned();
                    &col * col.transpose()
                }
                3 => &g * g.transpose(),
                _ => Mat::identity(r, r),
            };
            let u: f64 = rng.gen_range(0.0..0.999);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let a = &dir * (sign * u * limit / norm2(&dir));
            let c = logdet_bound_check(&a)?;
            if !c.ok {
                violations += 1;
            }
            if c.rhs > 0.0 {
                tightest = tightest.max(c.lhs / c.rhs);
                // rhs * sqrt(r) = 3/2 r |A|_2
                trace_form = trace_form.max(c.lhs / (c.rhs * (r as f64).sqrt()));
            }
        }
        checks.push(
            Check::at_most(format!("violations-r{r}"), PROP, violations as f64, 0.0)
                .with_note(format!(
                    "{per_dim} samples, max lhs/rhs = {tightest:.4}; c Id gives lhs ~ r c against rhs 3/2 sqrt(r) c"
                )),
        );
        checks.push(Check::at_most(
            format!("trace-form-r{r}"),
            "|log det(I - A)| <= 3/2 r |A|_2 on the same samples, reported as lhs / rhs",
            trace_form,
            1.0,
        ));
    }
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

pub(super) fn gaussian_laws(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "gaussian-laws";
    let id = suite_id(NAME);
    let mut rng = suite_rng(ctx.seed, id, 0);
    let mut w2_err = 0.0_f64;
    let mut kl_err = 0.0_f64;
    for _ in 0..200 {
        let (m1, m2) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (s1, s2): (f64, f64) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0));
        let g1 = GaussianLaw::new(Vector::from_element(1, m1), Mat::from_element(1, 1, s1))?;
        let g2 = GaussianLaw::new(Vector::from_element(1, m2), Mat::from_element(1, 1, s2))?;
        let w2 = ((m1 - m2).powi(2) + (s1.sqrt() - s2.sqrt()).powi(2)).sqrt();
        let kl = 0.5 * (s1 / s2 - 1.0 - (s1 / s2).ln() + (m1 - m2).powi(2) / s2);
        w2_err = w2_err.max((w2_gaussian(&g1, &g2)? - w2).abs() / (1.0 + w2));
        kl_err = kl_err.max((kl_gaussian(&g1, &g2)? - kl).abs() / (1.0 + kl));
    }

    let n = 2;
    let law = |rng: &mut rand_chacha::ChaCha8Rng| -> Result<GaussianLaw> {
        GaussianLaw::new(rng::normal_vector(rng, n), random_spd(rng, n, 0.3))
    };
    let g1 = law(&mut rng)?;
    let g2 = law(&mut rng)?;
    let samples = ctx.run.mc_samples;
    let kl = kl_gaussian(&g1, &g2)?;
    let kl_mc = kl_monte_carlo(&g1, &g2, samples, ctx.seed ^ 0x6b6c)?;
    let w2sq = w2_gaussian(&g1, &g2)?.powi(2);
    let w2_mc = w2_sq_monte_carlo(&g1, &g2, samples, ctx.seed ^ 0x7732)?;

    let checks = vec![
        Check::at_most(
            "w2-scalar",
            "W2 of scalar laws equals sqrt((m1 - m2)^2 + (sigma1 - sigma2)^2)",
            w2_err,
            1e-12,
        ),
        Check::at_most(
            "kl-scalar",
            "KL of scalar laws equals 1/2 (s1/s2 - 1 - log(s1/s2) + (m1 - m2)^2 / s2)",
            kl_err,
            1e-12,
        ),
        Check::at_most(
            "kl-monte-carlo",
            "closed-form KL within 3 standard errors of E log(g1/g2)(X)",
            (kl - kl_mc.value).abs() / kl_mc.stderr,
            3.0,
        )
        .with_note(format!("closed form {kl:.6}, estimate {:.6} +- {:.2e}", kl_mc.value, kl_mc.stderr)),
        Check::at_most(
            "w2-monte-carlo",
            "closed-form W2^2 within 3 standard errors of E|X - T(X)|^2 under the optimal map",
            (w2sq - w2_mc.value).abs() / w2_mc.stderr,
            3.0,
        )
        .with_note(format!("closed form {w2sq:.6}, estimate {:.6} +- {:.2e}", w2_mc.value, w2_mc.stderr)),
    ];
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

pub(super) fn entropy_wasserstein(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "entropy-wasserstein";
    let id = suite_id(NAME);
    let model = match &ctx.model {
        Some(m) if m.dim() == 2 => m.clone(),
        _ => random_model(&mut suite_rng(ctx.seed, id, 0), 2, -0.5)?,
    };
    let v = ctx.run.v;
    let t_end = ctx.run.t_end.max(2.0 * v);
    let step = ctx.run.step.unwrap_or(1e-3);
    let paths = simulate_replicate(&model, t_end, step, ctx.seed, 0)?;
    let map = RegMap::inflation(0.05, Mat::identity(2, 2))?;
    let grid: Vec<f64> = (0..)
        .map(|k| v + 0.25 * k as f64)
        .take_while(|t| *t <= t_end + 1e-12)
        .collect();
    let report = entropy_wasserstein_gap_report(&model, &map, &paths, model.x0_mean(), model.p0(), v, &grid)?;
    let ent = report.rows.iter().map(|r| r.ent_ratio).fold(f64::INFINITY, f64::min);
    let w2 = report.rows.iter().map(|r| r.w2_ratio).fold(f64::INFINITY, f64::min);
    let note = format!(
        "{} times in [{v}, {t_end}], c_o = {:.4}, c_c = {:.4}",
        report.rows.len(),
        report.inverse_flow_bound,
        report.flow_bound
    );
    let checks = vec![
        Check::at_least(
            "entropy-ratio",
            "Ent(eta^pi_t | eta_t) <= 1/2 c_o (|dm|^2 + 5/2 sqrt(r) |dQ|_2), reported as rhs / lhs",
            ent,
            1.0,
        )
        .with_note(note.clone()),
        Check::at_least(
            "wasserstein-ratio",
            "W2(eta^pi_t, eta_t)^2 <= |dm|^2 + tr(dQ) + 4 r c_c c_o |dQ|_2, reported as rhs / lhs",
            w2,
            1.0,
        )
        .with_note(note),
    ];
    Ok(SuiteOutput {
        report: SuiteReport::new(NAME, ctx.seed, checks),
        artifacts: vec![Artifact {
            name: "gap_report.json".into(),
            contents: serde_json::to_string_pretty(&report)?,
        }],
    })
}

#[derive(Debug, Clone, Serialize)]
struct MeanFieldRow {
    series: String,
    n: usize,
    mean_err: f64,
    stderr: f64,
}

/// Scalar model used by the mean-field experiment.
fn mean_field_model() -> Result<FilterModel> {
    let one = |x: f64| Mat::from_element(1, 1, x);
    FilterModel::new(one(-0.5), one(1.0), one(1.0), one(1.0), Vector::zeros(1), one(2.0))
}

pub(super) fn mean_field(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "mean-field";
    const PROP: &str = "log-log slope of E|p_T - phi^pi_T(Q0)|_F against N";
    let model = mean_field_model()?;
    let t = ctx.run.meanfield_t;
    let h = ctx.run.meanfield_step;
    let q0 = model.p0().clone();
    let x0 = model.x0_mean().clone();
    let series = [
        ("inflation-0.1", RegMap::inflation(0.1, Mat::identity(1, 1))?),
        ("identity", RegMap::Identity),
    ];
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (label, map) in &series {
        let variant = match map {
            RegMap::Identity => DriftVariant::Nominal,
            m => DriftVariant::Perturbed(m.clone()),
        };
        let limit = flow_to(&model, &variant, q0.as_mat(), t, h)?;
        let mut log_n = Vec::new();
        let mut log_err = Vec::new();
        for &n in &ctx.run.n_list {
            let errs: Vec<f64> = (0..ctx.run.replicates as u64)
                .into_par_iter()
                .map(|rep| -> Result<f64> {
                    let paths = simulate_replicate(&model, t, h, ctx.seed, rep)?;
                    let run = enkf(&model, map, n, &paths, &x0, &q0, ctx.seed, EnkfOptions::default())?;
                    Ok(norm_fro(&(run.final_cov() - &limit)))
                })
                .collect::<Result<_>>()?;
            let k = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / k;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
            rows.push(MeanFieldRow {
                series: label.to_string(),
                n,
                mean_err: mean,
                stderr: (var / k).sqrt(),
            });
            log_n.push((n as f64).ln());
            log_err.push(mean.ln());
        }
        if log_n.len() < 2 {
            checks.push(Check::skip(*label, PROP, "need at least two ensemble sizes"));
            continue;
        }
        let (slope, _, _) = fit_line(&log_n, &log_err);
        checks.push(
            Check::within(*label, PROP, slope, -0.7, -0.3)
                .with_note(format!("N = {:?}, {} replicates", ctx.run.n_list, ctx.run.replicates)),
        );
    }
    Ok(SuiteOutput {
        report: SuiteReport::new(NAME, ctx.seed, checks),
        artifacts: vec![Artifact {
            name: "mean_field.json".into(),
            contents: serde_json::to_string_pretty(&rows)?,
        }],
    })
}

pub(super) fn nystrom_bias(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "nystrom-bias";
    const PROP: &str = "E T(p0) = T(P0) + (s / N) Schur complement on the complement block";
    let id = suite_id(NAME);
    let n_samples = 16;
    let q = SpdMatrix::new(random_spd(&mut suite_rng(ctx.seed, id, 0), 4, 0.2))?;
    let p = Partition::new(vec![0, 1])?;
    let mc = nystrom_monte_carlo(&q, &p, n_samples, ctx.run.nystrom_replicates, ctx.seed)?;
    let formula = bias_formula(&q, &p, n_samples)?;
    let mean = mc.mean_mat();
    let se = mc.stderr_mat();
    let mut worst = 0.0_f64;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((mean[(i, j)] - formula[(i, j)]).abs() / se[(i, j)]);
        }
    }
    let checks = vec![Check::at_most("max-z-score", PROP, worst, 4.0).with_note(format!(
        "r = 4, s = 2, N = {n_samples}, {} replicates",
        ctx.run.nystrom_replicates
    ))];
    Ok(SuiteOutput {
        report: SuiteReport::new(NAME, ctx.seed, checks),
        artifacts: vec![Artifact {
            name: "nystrom_mc.json".into(),
            contents: serde_json::to_string_pretty(&mc)?,
        }],
    })
}
