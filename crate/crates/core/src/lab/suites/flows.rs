use rand::Rng;

use crate::error::Result;
use crate::matlib::{
    self, lambda_min, norm2, norm_fro, spectral_abscissa, symmetrize, Mat, SpdMatrix,
};
use crate::regmaps::RegMap;
use crate::riccati::{
    are_solve, flow, flow_to, frechet_flow, gramians, repulsion_factor, ricc, ricc_repulsion,
    ricc_repulsion_expanded, steady_bounds_from, DriftVariant, FilterModel, Triplet,
};

use super::super::models::{
    halves, random_model, random_spd, random_sym, scheme_projection, spd, suite_rng,
};
use super::super::report::{Check, SuiteReport};
use super::{step_for, suite_id, SuiteContext, SuiteOutput};

/// Models of a sweep: the configured model, or `count` seeded random ones
/// with dimensions cycling through `2..=6`.
fn sweep_models(ctx: &SuiteContext, suite: &str, count: usize, shift: f64) -> Result<Vec<FilterModel>> {
    if let Some(m) = &ctx.model {
        return Ok(vec![m.clone()]);
    }
    let id = suite_id(suite);
    (0..count)
        .map(|k| random_model(&mut suite_rng(ctx.seed, id, k as u64), 2 + k % 5, shift))
        .collect()
}

/// `n` evenly spaced indices of `times` in `(0, t_end]`.
fn sample_indices(times: &[f64], n: usize) -> Vec<usize> {
    let last = times.len() - 1;
    let mut idx: Vec<usize> = (1..=n).map(|j| (j * last).div_ceil(n)).collect();
    idx.dedup();
    idx
}

pub(super) fn domination(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "domination";
    const PROP: &str = "lambda_min(phi^pi_t(Q) - phi_t(Q)) >= -1e-8 (1 + |phi^pi_t(Q)|_2)";
    let models = sweep_models(ctx, NAME, ctx.run.models, -0.3)?;
    let id = suite_id(NAME);
    let labels = ["inflation-0.05", "inflation-0.2", "block-mask", "scheme-projection", "config-map"];
    // worst normalized margin per map label
    let mut worst = [f64::INFINITY; 5];
    let mut evaluated = [0usize; 5];
    for (k, model) in models.iter().enumerate() {
        let n = model.dim();
        let mut rng = suite_rng(ctx.seed, id, 1000 + k as u64);
        let q = spd(random_spd(&mut rng, n, 0.1));
        let t = random_spd(&mut rng, n, 0.1);
        let mut maps: Vec<(usize, RegMap)> = vec![
            (0, RegMap::inflation(0.05, t.clone())?),
            (1, RegMap::inflation(0.2, t)?),
            (2, RegMap::block_mask(&halves(n))),
            (3, scheme_projection(n)?),
        ];
        if let Some(m) = &ctx.map {
            if m.check_dim(n).is_ok() {
                maps.push((4, m.clone()));
            }
        }
        let step = step_for(ctx, model, 5e-3);
        let nominal = flow(model, &DriftVariant::Nominal, &q, ctx.run.t_end, step, false)?;
        let idx = sample_indices(&nominal.times, 50);
        for (slot, map) in maps {
            let pert = flow(model, &DriftVariant::Perturbed(map), &q, ctx.run.t_end, step, false)?;
            for &i in &idx {
                let p = &pert.states[i];
                let m = lambda_min(&symmetrize(&(p - &nominal.states[i]))) / (1.0 + norm2(p));
                worst[slot] = worst[slot].min(m);
            }
            evaluated[slot] += 1;
        }
    }
    let mut checks = Vec::new();
    for (slot, label) in labels.iter().enumerate() {
        if evaluated[slot] == 0 {
            if slot == 4 && ctx.map.is_some() {
                checks.push(Check::skip(*label, PROP, "configured map does not fit the model dimension"));
            }
            continue;
        }
        checks.push(
            Check::at_least(*label, PROP, worst[slot], -1e-8)
                .with_note(format!("{} models, 50 sampled times each", evaluated[slot])),
        );
    }
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

pub(super) fn are(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "are";
    let id = suite_id(NAME);
    let models: Vec<FilterModel> = match &ctx.model {
        Some(m) => vec![m.clone()],
        None => (0..ctx.run.models)
            .map(|k| {
                // the first model is forced unstable
                let shift = if k == 0 { 1.0 } else { -0.3 };
                random_model(&mut suite_rng(ctx.seed, id, k as u64), 2 + k % 5, shift)
            })
            .collect::<Result<_>>()?,
    };
    let mut worst_res = 0.0_f64;
    let mut worst_abscissa = f64::NEG_INFINITY;
    let mut unstable = 0usize;
    for model in &models {
        let p = are_solve(model, &DriftVariant::Nominal, 1e-12)?;
        let res = norm_fro(&ricc(&p, model)?) / norm_fro(model.r());
        worst_res = worst_res.max(res);
        let closed = model.a() - p.as_mat() * model.s().as_mat();
        worst_abscissa = worst_abscissa.max(spectral_abscissa(&closed));
        if spectral_abscissa(model.a()) > 0.0 {
            unstable += 1;
        }
    }
    let mut checks = vec![
        Check::at_most("residual", "|Ricc(P)|_F <= 1e-10 |R|_F", worst_res, 1e-10),
        Check::at_most(
            "stabilizing",
            "spectral abscissa of A - P S is negative",
            worst_abscissa,
            -1e-12,
        ),
    ];
    if ctx.model.is_none() {
        checks.push(
            Check::holds("unstable-drift", "sweep includes a model with unstable A", unstable > 0)
                .with_note(format!("{unstable} of {} models have unstable A", models.len())),
        );
    }
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

pub(super) fn frechet(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "frechet";
    const PROP: &str = "d phi_t(Q) . H = E_t(Q) H E_t(Q)' against central differences";
    let id = suite_id(NAME);
    let mut worst = 0.0_f64;
    let tuples = 10;
    for k in 0..tuples {
        let mut rng = suite_rng(ctx.seed, id, k);
        let model = match &ctx.model {
            Some(m) => m.clone(),
            None => random_model(&mut rng, 2 + (k as usize) % 4, -0.2)?,
        };
        let n = model.dim();
        let q = random_spd(&mut rng, n, 0.2);
        let h = random_sym(&mut rng, n);
        let t = rng.gen_range(0.5..3.0);
        let step = step_for(ctx, &model, 1e-3);
        let analytic = frechet_flow(&model, &spd(q.clone()), &h, t, step)?;
        let delta = 1e-4 * norm_fro(&q) / norm_fro(&h);
        let plus = flow_to(&model, &DriftVariant::Nominal, &(&q + &h * delta), t, step)?;
        let minus = flow_to(&model, &DriftVariant::Nominal, &(&q - &h * delta), t, step)?;
        let fd = (plus - minus) / (2.0 * delta);
        worst = worst.max(norm_fro(&(&fd - &analytic)) / norm_fro(&analytic));
    }
    let checks = vec![Check::at_most("relative-error", PROP, worst, 1e-5)
        .with_note(format!("{tuples} random (model, Q, H, t) tuples"))];
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

pub(super) fn inflation_bias(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "inflation-bias";
    const PROP: &str = "sup_t |phi^{pi_eps}_t(Q) - phi_t(Q)|_2 is quadratic in eps";
    let id = suite_id(NAME);
    let mut rng = suite_rng(ctx.seed, id, 0);
    let model = match &ctx.model {
        Some(m) => m.clone(),
        None => random_model(&mut rng, 3, -0.3)?,
    };
    let n = model.dim();
    let q = spd(random_spd(&mut rng, n, 0.1));
    let step = step_for(ctx, &model, 5e-3);
    let nominal = flow(&model, &DriftVariant::Nominal, &q, ctx.run.t_end, step, false)?;
    let gap = |eps: f64| -> Result<f64> {
        let map = RegMap::inflation(eps, Mat::identity(n, n))?;
        let pert = flow(&model, &DriftVariant::Perturbed(map), &q, ctx.run.t_end, step, false)?;
        Ok(pert
            .states
            .iter()
            .zip(&nominal.states)
            .map(|(a, b)| norm2(&(a - b)))
            .fold(0.0, f64::max))
    };
    let mut checks = Vec::new();
    for eps in [0.1, 0.05] {
        let ratio = gap(eps)? / gap(eps / 2.0)?;
        checks.push(Check::within(format!("ratio-eps-{eps}"), PROP, ratio, 3.5, 4.5));
    }
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

/// Plain RK4 for `dP = f(P)` on `times`, independent of the library
/// integrator.
fn rk4_closure(p0: &Mat, times: &[f64], f: impl Fn(&Mat) -> Result<Mat>) -> Result<Vec<Mat>> {
    let mut p = p0.clone();
    let mut out = vec![p.clone()];
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let k1 = f(&p)?;
        let k2 = f(&(&p + &k1 * (h / 2.0)))?;
        let k3 = f(&(&p + &k2 * (h / 2.0)))?;
        let k4 = f(&(&p + &k3 * h))?;
        p = symmetrize(&(&p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)));
        out.push(p.clone());
    }
    Ok(out)
}

pub(super) fn mean_repulsion(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "mean-repulsion";
    let id = suite_id(NAME);
    let mut rng = suite_rng(ctx.seed, id, 0);
    let model = match &ctx.model {
        Some(m) => m.clone(),
        None => random_model(&mut rng, 3, -0.3)?,
    };
    let n = model.dim();
    let pairs = [(0.1, 0.2), (0.3, -0.1), (-0.2, 0.1)];

    let mut drift_err = 0.0_f64;
    for _ in 0..20 {
        let q = random_spd(&mut rng, n, 0.1);
        for &(e1, e2) in &pairs {
            let closed = ricc_repulsion(&q, &model, e1, e2)?;
            let expanded = ricc_repulsion_expanded(&q, &model, e1, e2)?;
            drift_err = drift_err.max(norm_fro(&(&expanded - &closed)) / (1.0 + norm_fro(&closed)));
        }
    }

    let q0 = spd(random_spd(&mut rng, n, 0.1));
    let step = step_for(ctx, &model, 5e-3);
    let mut flow_err = 0.0_f64;
    let mut variant_err = 0.0_f64;
    for &(e1, e2) in &pairs {
        let s_eps = model.s().as_mat() * repulsion_factor(e1, e2);
        let triplet = Triplet::new(model.a().clone(), model.r().as_mat().clone(), s_eps)?;
        let reference = flow(&model, &DriftVariant::Triplet(triplet), &q0, ctx.run.t_end, step, false)?;
        let expanded = rk4_closure(q0.as_mat(), &reference.times, |p| {
            ricc_repulsion_expanded(p, &model, e1, e2)
        })?;
        let variant = flow(
            &model,
            &DriftVariant::MeanRepulsion { eps1: e1, eps2: e2 },
            &q0,
            ctx.run.t_end,
            step,
            false,
        )?;
        for (i, r) in reference.states.iter().enumerate() {
            let scale = 1.0 + norm_fro(r);
            flow_err = flow_err.max(norm_fro(&(&expanded[i] - r)) / scale);
            variant_err = variant_err.max(norm_fro(&(&variant.states[i] - r)) / scale);
        }
    }
    let checks = vec![
        Check::at_most(
            "drift-identity",
            "expanded repulsion drift equals Ricc with S scaled by 1 + 2(eps1 + eps2)",
            drift_err,
            1e-12,
        ),
        Check::at_most(
            "flow-identity",
            "integrated expanded drift matches the flow of the rescaled triplet",
            flow_err,
            1e-8,
        ),
        Check::at_most(
            "variant-flow",
            "mean-repulsion flow matches the flow of the rescaled triplet",
            variant_err,
            1e-8,
        ),
    ];
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

pub(super) fn sandwich(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "sandwich";
    let models = sweep_models(ctx, NAME, 10, -0.2)?;
    let id = suite_id(NAME);
    let v = ctx.run.v;
    let horizon = ctx.run.t_end.max(3.0 * v);
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    let mut samples = 0usize;
    for (k, model) in models.iter().enumerate() {
        let mut rng = suite_rng(ctx.seed, id, 500 + k as u64);
        let g = gramians(&model.triplet(), v, v / 2000.0)?;
        let (lower, upper) = steady_bounds_from(&g)?;
        let step = step_for(ctx, model, 5e-3).min(v / 20.0);
        for scale in [0.01, 1.0, 10.0] {
            let q0 = SpdMatrix::new(random_spd(&mut rng, model.dim(), 0.05) * scale)?;
            let traj = flow(model, &DriftVariant::Nominal, &q0, horizon, step, false)?;
            let stride = (traj.len() / 200).max(1);
            for (i, t) in traj.times.iter().enumerate().step_by(stride) {
                if *t < v - 1e-12 {
                    continue;
                }
                let p = &traj.states[i];
                let lo = matlib::loewner_margin(p, &lower, 0.0)? / (1.0 + norm2(p) + norm2(&lower));
                let hi = matlib::loewner_margin(&upper, p, 0.0)? / (1.0 + norm2(p) + norm2(&upper));
                lower_margin = lower_margin.min(lo);
                upper_margin = upper_margin.min(hi);
                samples += 1;
            }
        }
    }
    let note = format!("{} models x 3 initial states, {samples} sampled times with t >= v = {v}", models.len());
    let checks = vec![
        Check::at_least(
            "lower-bound",
            "phi_t(Q0) >= (O_v(C) + C_v^-1)^-1 for t >= v",
            lower_margin,
            -1e-8,
        )
        .with_note(note.clone()),
        Check::at_least(
            "upper-bound",
            "phi_t(Q0) <= O_v^-1 + C_v(O) for t >= v",
            upper_margin,
            -1e-8,
        )
        .with_note(note),
    ];
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}
