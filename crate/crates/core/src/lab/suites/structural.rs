use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::matlib::{norm2, norm_fro, symmetrize, Mat, SpdMatrix};
use crate::regmaps::{check_h3, RegMap};
use crate::riccati::{estimate_contraction_rate, fit_decay, flow, DriftVariant, FilterModel};
use crate::schemes::{
    recompose, scheme_riccati_closed_form, AssociationScheme, BlockRing, SchemeCoefficients,
};

use super::super::models::{block_model, random_spd, scheme_model, spd, suite_rng};
use super::super::report::{Check, SuiteReport};
use super::{step_for, suite_id, Artifact, SuiteContext, SuiteOutput};

/// A model whose `(A, R, S)` lie in the ring fixed by `map`.
struct RingSetup {
    label: &'static str,
    model: FilterModel,
    map: RegMap,
}

fn ring_setups(ctx: &SuiteContext, suite: &str, a_lo: f64, a_hi: f64) -> Result<Vec<RingSetup>> {
    let id = suite_id(suite);
    let scheme = AssociationScheme::two_triangles();
    let model = scheme_model(&mut suite_rng(ctx.seed, id, 0), &scheme, a_lo, a_hi)?;
    let ring = BlockRing::contiguous(&[2, 2])?;
    let block = block_model(&mut suite_rng(ctx.seed, id, 1), &ring, 0.5 * (a_lo + a_hi))?;
    Ok(vec![
        RingSetup {
            label: "six-point-scheme",
            model,
            map: RegMap::scheme(Arc::new(scheme)),
        },
        RingSetup {
            label: "two-block",
            model: block,
            map: RegMap::block_mask(&ring),
        },
    ])
}

pub(super) fn commutation(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "commutation";
    const PROP: &str = "phi^pi_t(pi(Q)) = phi_t(pi(Q)) for ring triplets";
    let id = suite_id(NAME);
    let mut checks = Vec::new();
    for (k, s) in ring_setups(ctx, NAME, -1.0, 0.5)?.into_iter().enumerate() {
        let n = s.model.dim();
        let q = random_spd(&mut suite_rng(ctx.seed, id, 10 + k as u64), n, 0.1);
        let pq = spd(s.map.apply(&q)?);
        let step = step_for(ctx, &s.model, 2e-3);
        let nominal = flow(&s.model, &DriftVariant::Nominal, &pq, ctx.run.t_end, step, false)?;
        let pert = flow(&s.model, &DriftVariant::Perturbed(s.map.clone()), &pq, ctx.run.t_end, step, false)?;
        let worst = nominal
            .states
            .iter()
            .zip(&pert.states)
            .map(|(a, b)| norm_fro(&(b - a)) / (1.0 + norm_fro(a)))
            .fold(0.0, f64::max);
        checks.push(Check::at_most(s.label, PROP, worst, 1e-6));
    }
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

pub(super) fn decomposition(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "decomposition";
    const PROP: &str =
        "phi^pi_t(Q) = phi_t(pi(Q)) + E_t(pi(Q)) (Q - pi(Q)) E_t(pi(Q))' for ring triplets";
    let id = suite_id(NAME);
    let mut checks = Vec::new();
    for (k, s) in ring_setups(ctx, NAME, -1.0, 0.5)?.into_iter().enumerate() {
        let n = s.model.dim();
        let q = random_spd(&mut suite_rng(ctx.seed, id, 10 + k as u64), n, 0.1);
        let pq = s.map.apply(&q)?;
        let d = &q - &pq;
        let step = step_for(ctx, &s.model, 2e-3);
        let projected = flow(&s.model, &DriftVariant::Nominal, &spd(pq), ctx.run.t_end, step, true)?;
        let pert = flow(&s.model, &DriftVariant::Perturbed(s.map.clone()), &spd(q), ctx.run.t_end, step, false)?;
        let transitions = projected.transitions.as_ref().expect("transitions requested");
        let mut worst = 0.0_f64;
        for i in 0..pert.len() {
            let e = &transitions[i];
            let rhs = &projected.states[i] + e * &d * e.transpose();
            let p = &pert.states[i];
            worst = worst.max(norm_fro(&(p - rhs)) / (1.0 + norm_fro(p)));
        }
        checks.push(Check::at_most(s.label, PROP, worst, 1e-6));
    }
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

pub(super) fn scheme_closed_form(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "scheme-closed-form";
    const PROP: &str = "idempotent-wise scalar Riccati solutions reproduce the matrix flow";
    let id = suite_id(NAME);
    let schemes = [
        ("trivial-4", AssociationScheme::trivial(4)?),
        ("six-point", AssociationScheme::two_triangles()),
        ("cycle-6", AssociationScheme::cycle(6)?),
    ];
    let t_end = 5.0;
    let mut checks = Vec::new();
    for (k, (label, scheme)) in schemes.iter().enumerate() {
        let mut rng = suite_rng(ctx.seed, id, k as u64);
        let m = scheme.idempotent_count();
        let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..m).map(|_| rng.gen_range(lo..hi)).collect() };
        let a = symmetrize(&recompose(scheme, &draw(-1.0, 1.0))?);
        let r = symmetrize(&recompose(scheme, &draw(0.5, 1.5))?);
        let s = symmetrize(&recompose(scheme, &draw(0.5, 1.5))?);
        let p0 = symmetrize(&recompose(scheme, &draw(0.2, 2.0))?);
        let model = FilterModel::from_triplet(a.clone(), r.clone(), s.clone())?;
        let coeffs = SchemeCoefficients::from_matrices(scheme, &a, &r, &s, &p0)?;
        let step = step_for(ctx, &model, 1e-3);
        let traj = flow(&model, &DriftVariant::Nominal, &spd(p0), t_end, step, false)?;
        let stride = (traj.len() / 200).max(1);
        let mut worst = 0.0_f64;
        for i in (0..traj.len()).step_by(stride).chain([traj.len() - 1]) {
            let closed = scheme_riccati_closed_form(scheme, &coeffs, traj.times[i])?;
            worst = worst.max(norm_fro(&(&traj.states[i] - closed.as_mat())) / norm_fro(closed.as_mat()));
        }
        checks.push(
            Check::at_most(*label, PROP, worst, 1e-6)
                .with_note(format!("{m} idempotents, t in [0, {t_end}]")),
        );
    }
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}

#[derive(Serialize)]
struct DecaySeries {
    series: String,
    t: Vec<f64>,
    gap: Vec<f64>,
}

pub(super) fn projected_decay(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "projected-decay";
    let id = suite_id(NAME);
    let t_end = 10.0;
    let window = (0.0, 6.0);
    let mut checks = Vec::new();
    let mut series = Vec::new();
    for (k, s) in ring_setups(ctx, NAME, -1.5, -1.0)?.into_iter().enumerate() {
        let n = s.model.dim();
        let mut rng = suite_rng(ctx.seed, id, 10 + k as u64);
        let q = random_spd(&mut rng, n, 0.1);
        let pq = s.map.apply(&q)?;
        let step = step_for(ctx, &s.model, 2e-3);
        let pert = flow(&s.model, &DriftVariant::Perturbed(s.map.clone()), &spd(q), t_end, step, false)?;
        let projected = flow(&s.model, &DriftVariant::Nominal, &spd(pq), t_end, step, false)?;
        let gaps: Vec<f64> = pert
            .states
            .iter()
            .zip(&projected.states)
            .map(|(a, b)| norm2(&(a - b)))
            .collect();
        let scales: Vec<f64> = pert.states.iter().map(norm2).collect();
        let fit = fit_decay(&pert.times, &gaps, &scales, window)?;

        let q1 = SpdMatrix::new(random_spd(&mut rng, n, 0.1))?;
        let q2 = SpdMatrix::new(random_spd(&mut rng, n, 0.1) * 3.0)?;
        let rate = estimate_contraction_rate(&s.model, &q1, &q2, t_end, step, window)?;

        checks.push(
            Check::at_least(
                format!("{}-rate", s.label),
                "empirical contraction rate of the nominal flow is positive",
                rate.nu_hat,
                f64::MIN_POSITIVE,
            )
            .with_note(format!("nu_hat = {:.4}", rate.nu_hat)),
        );
        checks.push(
            Check::at_most(
                format!("{}-slope", s.label),
                "fitted slope of log |phi^pi_t(Q) - phi_t(pi(Q))|_2 is at most -nu_hat",
                fit.slope + rate.nu_hat,
                0.0,
            )
            .with_note(format!("slope = {:.4}, nu_hat = {:.4}", fit.slope, rate.nu_hat)),
        );
        let terminal = gaps[gaps.len() - 1] / gaps[0];
        checks.push(Check::at_most(
            format!("{}-terminal", s.label),
            "gap at t = 10 is at most 1e-6 of the initial gap",
            terminal,
            1e-6,
        ));

        let stride = (pert.len() / 200).max(1);
        let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
        series.push(DecaySeries {
            series: s.label.to_string(),
            t: pick(&pert.times),
            gap: pick(&gaps),
        });
    }
    Ok(SuiteOutput {
        report: SuiteReport::new(NAME, ctx.seed, checks),
        artifacts: vec![Artifact {
            name: "decay.json".into(),
            contents: serde_json::to_string_pretty(&series)?,
        }],
    })
}

/// `max |B_i B_j - sum_q w^q_ij B_q|` in exact integer arithmetic.
fn structural_discrepancy(scheme: &AssociationScheme) -> i64 {
    let n = scheme.points();
    let k = scheme.class_count() + 1;
    let cm = scheme.class_matrix();
    let mut worst = 0i64;
    for q1 in 0..k {
        for q2 in 0..k {
            for x in 0..n {
                for y in 0..n {
                    let prod = (0..n)
                        .filter(|&z| cm[x][z] == q1 && cm[z][y] == q2)
                        .count() as i64;
                    let rhs = scheme.structural_constant(cm[x][y], q1, q2);
                    worst = worst.max((prod - rhs).abs());
                }
            }
        }
    }
    worst
}

fn idempotent_residuals(scheme: &AssociationScheme) -> (f64, f64, f64, f64) {
    let d = scheme.idempotent_basis();
    let n = scheme.points();
    let mut orth = 0.0_f64;
    let mut idem = 0.0_f64;
    let mut sum = Mat::zeros(n, n);
    for (i, di) in d.iter().enumerate() {
        idem = idem.max(norm_fro(&(di * di - di)));
        for dj in d.iter().skip(i + 1) {
            orth = orth.max(norm_fro(&(di * dj)));
        }
        sum += di;
    }
    let resolution = norm_fro(&(sum - Mat::identity(n, n)));
    let j = Mat::from_element(n, n, 1.0 / n as f64);
    let first = norm_fro(&(&d[0] - j));
    (orth, idem, resolution, first)
}

pub(super) fn scheme_axioms(ctx: &SuiteContext) -> Result<SuiteOutput> {
    const NAME: &str = "scheme-axioms";
    let six = AssociationScheme::two_triangles();
    let c6 = AssociationScheme::cycle(6)?;
    let mut checks = Vec::new();

    let w = |q: usize| six.structural_constant(q, 1, 1);
    checks.push(Check::holds(
        "six-point-b1-squared",
        "B1^2 = 2 B0 + B1 on the two-triangle scheme",
        (w(0), w(1), w(2)) == (2, 1, 0),
    ));
    let v = |q: usize| six.structural_constant(q, 1, 2);
    checks.push(
        Check::holds(
            "six-point-b1-b2",
            "B1 B2 = 2 B2 on the two-triangle scheme",
            (v(0), v(1), v(2)) == (0, 0, 2),
        )
        .with_note("direct count of common neighbours"),
    );
    checks.push(Check::holds(
        "cycle-6-classes",
        "C6 has distance classes 0..3",
        c6.class_count() == 3,
    ));

    for (label, scheme) in [("six-point", &six), ("cycle-6", &c6), ("trivial-5", &AssociationScheme::trivial(5)?)] {
        checks.push(Check::at_most(
            format!("{label}-structural-constants"),
            "B_i B_j = sum_q w^q_ij B_q in exact integer arithmetic",
            structural_discrepancy(scheme) as f64,
            0.0,
        ));
        let (orth, idem, resolution, first) = idempotent_residuals(scheme);
        let worst = orth.max(idem).max(resolution).max(first);
        checks.push(
            Check::at_most(
                format!("{label}-idempotents"),
                "D_i D_j = delta_ij D_i, sum D_i = Id, D_0 = J / r",
                worst,
                1e-10,
            )
            .with_note(format!("{} idempotents", scheme.idempotent_count())),
        );
        let map = RegMap::scheme(Arc::new(scheme.clone()));
        let h3 = check_h3(&map, scheme.points(), 100, ctx.seed)?;
        checks.push(Check::at_most(
            format!("{label}-ring-residual"),
            "pi(B (Q - pi Q) + (Q - pi Q) B) = 0 for ring members B",
            h3.max_residual,
            1e-10,
        ));
        checks.push(Check::at_most(
            format!("{label}-idempotence"),
            "pi(pi(Q)) = pi(Q)",
            h3.max_idempotence,
            1e-10,
        ));
        checks.push(Check::at_least(
            format!("{label}-schwarz"),
            "pi(G G') >= pi(G) pi(G)'",
            h3.min_schwarz_margin,
            -1e-10,
        ));
    }
    Ok(SuiteReport::new(NAME, ctx.seed, checks).into())
}
