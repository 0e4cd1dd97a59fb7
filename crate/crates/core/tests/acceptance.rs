//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! and exits with status 1 if any criterion fails.

use std::time::Instant;

use nalgebra::DVector;
use qbayes_core::closedform::{rld_bound, sld_bound};
use qbayes_core::conic::{
    self, holevo_lemma_sdp, holevo_lemma_value, BlockKind, ConicProgram, ConicStatus, LinearFunctional, SolveSummary,
    SolverOptions,
};
use qbayes_core::matcore::{c64, pauli, random, CMat, DensityMatrix, ExtendedOperator, Hermitian, RMat};
use qbayes_core::model::{
    build_extended_moments, build_moments, model_zoo, BayesMoments, ExtendedMoments, GridPoint, StatisticalModel,
    TensorTerm, WeightSpec,
};
use qbayes_core::sdpbounds::{appendix_f, holevo_type_bound_with, nagaoka_hayashi_bound_with, FKind, HolevoForm};
use qbayes_core::verify::{
    decision_risk, ordering_audit_with, personick_optimal_measurement, seesaw, AuditConfig, Povm,
};
use qbayes_core::Result;

/// Collects failure messages and solver diagnostics for one criterion.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn expect(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    fn close(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.expect((got - want).abs() <= tol, || {
            format!("{what}: {got:.10} vs {want:.10} (tol {tol:e})")
        });
    }

    fn ok<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.failures.push(format!("{what}: {e}"));
                None
            }
        }
    }
}

/// Every SDP summary seen by the suite, audited by criterion 10.
#[derive(Default)]
struct Ledger {
    summaries: Vec<(String, SolveSummary)>,
}

struct Bounds {
    nh: f64,
    holevo: f64,
    sld: f64,
    rld: f64,
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn nh(em: &ExtendedMoments, ledger: &mut Ledger, tag: &str) -> Result<f64> {
    let sol = nagaoka_hayashi_bound_with(em, &opts())?;
    ledger.summaries.push((format!("nh {tag}"), sol.diagnostics));
    Ok(sol.value)
}

fn holevo(em: &ExtendedMoments, form: HolevoForm, ledger: &mut Ledger, tag: &str) -> Result<f64> {
    let sol = holevo_type_bound_with(em, form, &opts())?;
    ledger
        .summaries
        .push((format!("holevo {form:?} {tag}"), sol.diagnostics));
    Ok(sol.value)
}

fn all_bounds(model: &StatisticalModel, ledger: &mut Ledger, tag: &str) -> Result<Bounds> {
    let w = model.constant_weight().expect("constant weight").clone();
    let m = build_moments(model)?;
    let em = build_extended_moments(model)?;
    Ok(Bounds {
        nh: nh(&em, ledger, tag)?,
        holevo: holevo(&em, HolevoForm::General, ledger, tag)?,
        sld: sld_bound(&m, &w)?.0,
        rld: rld_bound(&m, &w)?.0,
    })
}

fn weighted_random(n: usize, d: usize, seed: u64, points: usize) -> StatisticalModel {
    let base = model_zoo("random_model", &[n as f64, d as f64, seed as f64], points).unwrap();
    let mut rng = random::seeded(seed.wrapping_mul(0x9e37_79b9) ^ 0xacce);
    base.with_weight(WeightSpec::Constant(random::spd_real(&mut rng, n, 0.2)))
        .unwrap()
}

fn criterion_1(ledger: &mut Ledger) -> Check {
    let mut c = Check::default();
    let mut count = 0;
    for n in 1..=3usize {
        for d in 1..=4usize {
            for seed in 0..2u64 {
                let model = model_zoo("point_mass", &[n as f64, d as f64, (100 + seed) as f64], 0).unwrap();
                let tag = format!("point mass n={n} d={d} seed={seed}");
                if let Some(b) = c.ok(&tag, all_bounds(&model, ledger, &tag)) {
                    for (name, v) in [("sld", b.sld), ("rld", b.rld), ("holevo", b.holevo), ("nh", b.nh)] {
                        c.expect(v.abs() <= 1e-7, || format!("{tag}: {name} = {v:e}"));
                    }
                }
                if let Some(run) = c.ok(&tag, seesaw(&model, n + 2, 20, seed)) {
                    let risk = run.decision.risk;
                    c.expect(risk <= 1e-9, || format!("{tag}: seesaw risk {risk:e}"));
                }
                count += 1;
            }
        }
    }
    c.notes
        .push(format!("{count} point-mass models, d in 1..=4, n in 1..=3"));
    c
}

fn criterion_2(ledger: &mut Ledger) -> Check {
    let mut c = Check::default();
    let mut models = vec![(
        "classical_binary".to_string(),
        model_zoo("classical_binary", &[1.0, 0.6], 0).unwrap(),
    )];
    for seed in 0..20u64 {
        let d = 2 + seed as usize % 3;
        models.push((
            format!("random n=1 d={d} seed={seed}"),
            model_zoo("random_model", &[1.0, d as f64, seed as f64], 5).unwrap(),
        ));
    }
    for (tag, model) in &models {
        let Some(b) = c.ok(tag, all_bounds(model, ledger, tag)) else {
            continue;
        };
        c.close(&format!("{tag}: nh vs sld"), b.nh, b.sld, 1e-6);
        c.close(&format!("{tag}: holevo vs sld"), b.holevo, b.sld, 1e-6);
        let Some(m) = c.ok(tag, build_moments(model)) else {
            continue;
        };
        let k = sld_bound(&m, model.constant_weight().unwrap()).unwrap().1.k;
        let m_minus_k = (&m.m - &k)[(0, 0)];
        c.close(&format!("{tag}: sld vs m - K"), b.sld, m_minus_k, 1e-9);
        let risk = personick_optimal_measurement(&m)
            .and_then(|p| p.decision(model))
            .map(|d| d.risk);
        if let Some(risk) = c.ok(tag, risk) {
            c.close(&format!("{tag}: personick risk"), risk, b.sld, 1e-9);
        }
        if tag == "classical_binary" {
            c.close("classical_binary: shared value", b.nh, 0.64, 1e-6);
        }
    }
    c.notes.push(format!("{} models", models.len()));
    c
}

fn criterion_3(ledger: &mut Ledger) -> Check {
    let mut c = Check::default();
    let model = model_zoo("correlated_pair", &[1.0, 0.6], 0).unwrap();
    if let Some(b) = c.ok("correlated_pair", all_bounds(&model, ledger, "correlated_pair")) {
        c.close("sld", b.sld, 1.28, 1e-5);
        c.close("nh", b.nh, 1.28, 1e-5);
        c.notes.push(format!("sld {:.9}, nh {:.9}", b.sld, b.nh));
    }
    // σ_z measurement with estimates ±(0.6, 0.6)
    let up = Hermitian::new(CMat::from_diagonal(&DVector::from_vec(vec![
        c64(1.0, 0.0),
        c64(0.0, 0.0),
    ])))
    .unwrap();
    let down = Hermitian::new(CMat::identity(2, 2) - up.as_mat()).unwrap();
    let povm = Povm::new(vec![up, down]).unwrap();
    let est = [DVector::from_element(2, 0.6), DVector::from_element(2, -0.6)];
    if let Some(r) = c.ok("explicit decision", decision_risk(&model, &povm, &est)) {
        c.close("explicit decision risk", r, 1.28, 1e-12);
    }
    if let Some(run) = c.ok("seesaw", seesaw(&model, 2, 100, 0)) {
        let risk = run.decision.risk;
        c.expect(risk <= 1.28 + 1e-5, || format!("seesaw risk {risk}"));
        c.notes.push(format!("seesaw {risk:.9}"));
    }
    c
}

fn criterion_4(ledger: &mut Ledger) -> Check {
    let mut c = Check::default();
    let cfg = AuditConfig {
        iters: 60,
        seeds: vec![0, 1],
        ..AuditConfig::default()
    };
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for seed in 0..50u64 {
        let n = 2 + seed as usize % 2;
        let d = 2 + seed as usize / 2 % 2;
        let model = weighted_random(n, d, 4000 + seed, 4);
        let tag = format!("n={n} d={d} seed={seed}");
        let Some(audit) = c.ok(&tag, ordering_audit_with(&model, &cfg)) else {
            continue;
        };
        for (name, err) in &audit.errors {
            c.failures.push(format!("{tag}: {name}: {err}"));
        }
        c.expect(audit.links.len() == 4, || format!("{tag}: incomplete chain"));
        for link in &audit.links {
            worst = worst.min(link.margin);
            c.expect(link.margin >= -1e-6, || {
                format!("{tag}: {} - {} = {:e}", link.upper, link.lower, link.margin)
            });
        }
        // the audit's SDPs are re-solved here so criterion 10 sees them
        let em = build_extended_moments(&model).unwrap();
        let _ = c.ok(&tag, nh(&em, ledger, &tag));
        let _ = c.ok(&tag, holevo(&em, HolevoForm::General, ledger, &tag));
        count += 1;
    }
    c.notes.push(format!("{count} models, smallest margin {worst:.3e}"));
    c
}

fn tensor(rng: &mut random::SeededRng, d: usize, pi: f64) -> TensorTerm {
    TensorTerm {
        pi,
        w: random::spd_real(rng, 2, 0.2),
        s: random::density(rng, d, 0.2),
    }
}

fn criterion_5() -> Check {
    let mut c = Check::default();
    let mut rng = random::seeded(505);
    let mut worst_eq = 0.0f64;
    let mut worst_slack = f64::INFINITY;
    for trial in 0..100 {
        let d = 1 + trial % 4;
        let x = ExtendedOperator::from_matrix(2, d, random::hermitian(&mut rng, 2 * d).into_inner()).unwrap();
        let single = [tensor(&mut rng, d, 1.0)];
        let pi = random::uniform(&mut rng, 0.1, 0.9);
        let mixture = [tensor(&mut rng, d, pi), tensor(&mut rng, d, 1.0 - pi)];
        let tag = format!("trial {trial} d={d}");
        let f = |c: &mut Check, kind: FKind, terms: &[TensorTerm]| {
            c.ok(&format!("{tag} {kind:?}"), appendix_f(kind, terms, &x))
        };
        if let (Some(sdp), Some(f1)) = (f(&mut c, FKind::Sdp, &single), f(&mut c, FKind::F1, &single)) {
            let err = (sdp - f1).abs() / f1.abs().max(1.0);
            worst_eq = worst_eq.max(err);
            c.expect(err <= 1e-6, || format!("{tag}: f_sdp {sdp} vs f1 {f1}"));
        }
        for terms in [&single[..], &mixture[..]] {
            let vals: Vec<Option<f64>> = [FKind::Sdp, FKind::F3, FKind::F4, FKind::F5]
                .iter()
                .map(|&k| f(&mut c, k, terms))
                .collect();
            if let [Some(sdp), Some(f3), Some(f4), Some(f5)] = vals[..] {
                for (name, slack) in [("f_sdp - f3", sdp - f3), ("f3 - f4", f3 - f4), ("f_sdp - f5", sdp - f5)] {
                    worst_slack = worst_slack.min(slack);
                    c.expect(slack >= -1e-7, || {
                        format!("{tag} ({} terms): {name} = {slack:e}", terms.len())
                    });
                }
            }
        }
    }
    c.notes.push(format!(
        "worst relative |f_sdp - f1| {worst_eq:.3e}, smallest chain slack {worst_slack:.3e}"
    ));
    c
}

fn criterion_6(ledger: &mut Ledger) -> Check {
    let mut c = Check::default();
    let mut cases = vec![(
        "pinned".to_string(),
        RMat::identity(2, 2),
        RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
        RMat::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]),
    )];
    let mut rng = random::seeded(606);
    for k in 0..50 {
        let n = 2 + k % 3;
        let w = random::spd_real(&mut rng, n, 0.1);
        let g = RMat::from_fn(n, n, |_, _| random::uniform(&mut rng, -1.0, 1.0));
        let h = RMat::from_fn(n, n, |_, _| random::uniform(&mut rng, -1.0, 1.0));
        cases.push((
            format!("random {k} n={n}"),
            w,
            (&g + g.transpose()) * 0.5,
            (&h - h.transpose()) * 0.5,
        ));
    }
    let mut worst = 0.0f64;
    for (tag, w, a, b) in &cases {
        let (Some(value), Some(sol)) = (
            c.ok(tag, holevo_lemma_value(w, a, b)),
            c.ok(tag, holevo_lemma_sdp(w, a, b, &opts())),
        ) else {
            continue;
        };
        ledger.summaries.push((format!("holevo lemma {tag}"), sol.summary()));
        c.expect(sol.status == ConicStatus::Optimal, || {
            format!("{tag}: status {:?}", sol.status)
        });
        worst = worst.max((value - sol.primal_value).abs());
        c.close(tag, sol.primal_value, value, 1e-7);
        if tag == "pinned" {
            c.close("pinned closed form", value, 4.0, 1e-12);
        }
    }
    c.notes
        .push(format!("{} triples, worst difference {worst:.3e}", cases.len()));
    c
}

fn fixture_moments(kappa: f64) -> BayesMoments {
    BayesMoments {
        s_b: DensityMatrix::new(CMat::from_diagonal(&DVector::from_vec(vec![
            c64(0.75, 0.0),
            c64(0.25, 0.0),
        ])))
        .unwrap(),
        d_b: vec![
            Hermitian::new(pauli::x() * c64(0.1 * kappa, 0.0)).unwrap(),
            Hermitian::new(pauli::y() * c64(0.1 * kappa, 0.0)).unwrap(),
        ],
        m: RMat::identity(2, 2) * 0.1,
        theta_bar: DVector::zeros(2),
        w_bar: 0.2,
    }
}

/// Eight equally weighted points on the circle |θ|² = 0.2 with states
/// S_B + κ(θ₁σ_x + θ₂σ_y). Its moments are those of the fixture with the
/// first moments scaled by κ; positivity needs κ² ≤ 0.1875/0.2.
fn ring_model(kappa: f64) -> Result<StatisticalModel> {
    let r = 0.2f64.sqrt();
    let points = (0..8)
        .map(|k| {
            let (s, co) = (std::f64::consts::PI * k as f64 / 4.0).sin_cos();
            let theta = DVector::from_vec(vec![r * co, r * s]);
            let m = fixture_moments(1.0).s_b.as_mat()
                + pauli::x() * c64(kappa * theta[0], 0.0)
                + pauli::y() * c64(kappa * theta[1], 0.0);
            Ok(GridPoint::new(theta, 0.125, DensityMatrix::new(m)?))
        })
        .collect::<Result<Vec<_>>>()?;
    StatisticalModel::new(points, WeightSpec::Constant(RMat::identity(2, 2)))
}

fn criterion_7(ledger: &mut Ledger) -> Check {
    let mut c = Check::default();
    let m = fixture_moments(1.0);
    let w = RMat::identity(2, 2);
    let sld = c.ok("sld", sld_bound(&m, &w).map(|r| r.0));
    let rld = c.ok("rld", rld_bound(&m, &w).map(|r| r.0));
    if let (Some(sld), Some(rld)) = (sld, rld) {
        c.close("sld", sld, 0.12, 1e-6);
        c.close("rld", rld, 0.146667, 1e-6);
        c.expect(rld > sld, || "rld not strictly tighter".into());
        c.notes.push(format!("sld {sld:.9}, rld {rld:.9}"));
    }
    // A qubit model with these moments needs E|S₀₁|² ≥ 0.2 by Cauchy-Schwarz
    // on the off-diagonal entries, while positivity gives
    // E|S₀₁|² ≤ E[S₀₀(1 − S₀₀)] ≤ 0.75 − 0.75² = 0.1875.
    let need = 2.0 * 0.1f64.powi(2) / 0.1;
    let allow = 0.75 - 0.75f64.powi(2);
    c.notes.push(format!(
        "the holevo clause is vacuous: realizing the moments needs E|S01|^2 >= {need} but positivity allows at most {allow}"
    ));
    c.expect(ring_model(1.0).is_err(), || {
        "ring model at kappa = 1 unexpectedly valid".into()
    });
    // the realizable members of the family keep C_H above C_RLD
    for kappa in [0.5, 0.9, 0.96] {
        let tag = format!("ring kappa={kappa}");
        let Some(model) = c.ok(&tag, ring_model(kappa)) else {
            continue;
        };
        let Some(mm) = c.ok(&tag, build_moments(&model)) else {
            continue;
        };
        let want = fixture_moments(kappa);
        c.expect((&mm.m - &want.m).amax() < 1e-12, || {
            format!("{tag}: second moments differ")
        });
        let Some(rld) = c.ok(&tag, rld_bound(&mm, &w).map(|r| r.0)) else {
            continue;
        };
        let em = build_extended_moments(&model).unwrap();
        if let Some(h) = c.ok(&tag, holevo(&em, HolevoForm::General, ledger, &tag)) {
            c.expect(h >= rld - 1e-6, || format!("{tag}: holevo {h} < rld {rld}"));
            c.notes.push(format!("{tag}: holevo {h:.9} >= rld {rld:.9}"));
        }
    }
    c
}

fn criterion_8(ledger: &mut Ledger) -> Check {
    let mut c = Check::default();
    let mut worst = 0.0f64;
    let mut per_point_spread = 0.0f64;
    for seed in 0..20u64 {
        let n = 2 + seed as usize % 2;
        let d = 2 + seed as usize / 2 % 2;
        let model = weighted_random(n, d, 8000 + seed, 4);
        let tag = format!("n={n} d={d} seed={seed}");
        let em = build_extended_moments(&model).unwrap();
        let general = c.ok(&tag, holevo(&em, HolevoForm::General, ledger, &tag));
        let collapsed = c.ok(&tag, holevo(&em, HolevoForm::Collapsed, ledger, &tag));
        let per_point = c.ok(&tag, holevo(&em, HolevoForm::PerPoint, ledger, &tag));
        if let (Some(g), Some(col)) = (general, collapsed) {
            worst = worst.max((g - col).abs());
            c.close(&tag, g, col, 1e-7);
            if let Some(pp) = per_point {
                per_point_spread = per_point_spread.max(pp - col);
            }
        }
    }
    c.notes.push(format!("worst |general - collapsed| {worst:.3e}"));
    c.notes.push(format!(
        "info: one block per grid point exceeds the collapsed form by up to {per_point_spread:.3e}"
    ));
    c
}

fn criterion_9(ledger: &mut Ledger) -> Check {
    let mut c = Check::default();
    let mut worst = 0.0f64;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    for seed in 0..4u64 {
        let (n, d) = (2, 2 + seed as usize % 2);
        let model = weighted_random(n, d, 9000 + seed, 5);
        let tag = format!("seed={seed}");
        let Some(base) = c.ok(&tag, all_bounds(&model, ledger, &tag)) else {
            continue;
        };
        let scale = 0.5 + seed as f64;
        let w = model.constant_weight().unwrap() * scale;
        let mut rng = random::seeded(seed + 17);
        let u = random::unitary(&mut rng, d);
        let perm = [3, 0, 4, 1, 2];
        let variants: [(&str, Result<StatisticalModel>, f64); 3] = [
            ("scaling", model.with_weight(WeightSpec::Constant(w)), scale),
            ("conjugation", model.conjugated(&u), 1.0),
            ("permutation", model.permuted(&perm), 1.0),
        ];
        for (name, variant, factor) in variants {
            let vtag = format!("{tag} {name}");
            let Some(v) = c.ok(&vtag, variant) else { continue };
            let Some(b) = c.ok(&vtag, all_bounds(&v, ledger, &vtag)) else {
                continue;
            };
            for (bound, got, want) in [
                ("nh", b.nh, base.nh * factor),
                ("holevo", b.holevo, base.holevo * factor),
                ("sld", b.sld, base.sld * factor),
                ("rld", b.rld, base.rld * factor),
            ] {
                let e = rel(got, want);
                worst = worst.max(e);
                c.expect(e <= 1e-7, || format!("{vtag}: {bound} {got} vs {want}"));
            }
        }
    }
    c.notes.push(format!("worst relative change {worst:.3e}"));
    c
}

fn criterion_10(ledger: &Ledger) -> Check {
    let mut c = Check::default();
    for (tag, s) in &ledger.summaries {
        let scale = s.primal_value.abs().max(1.0);
        c.expect(s.status == ConicStatus::Optimal, || {
            format!("{tag}: status {:?}", s.status)
        });
        c.expect(s.gap <= 1e-8 * scale, || format!("{tag}: gap {:e}", s.gap));
        c.expect(s.primal_residual <= 1e-8, || {
            format!("{tag}: primal residual {:e}", s.primal_residual)
        });
    }
    // Z ⪰ 0 with Tr Z = −1
    for (mode, o) in [
        ("predictor-corrector", SolverOptions::default()),
        ("path-following", SolverOptions::path_following()),
    ] {
        for kind in [BlockKind::Real(3), BlockKind::Complex(2)] {
            let mut p = ConicProgram::new();
            let z = p.add_block(kind);
            let mut tr = LinearFunctional::default();
            tr.matrix(z, &CMat::identity(kind.dim(), kind.dim()));
            p.objective.matrix(z, &CMat::identity(kind.dim(), kind.dim()));
            p.add_constraint(tr, -1.0);
            if let Some(sol) = c.ok("probe", conic::solve(&p, &o)) {
                c.expect(sol.status == ConicStatus::Infeasible, || {
                    format!("probe {mode} {kind:?}: {:?}", sol.status)
                });
            }
        }
    }
    c.notes.push(format!(
        "{} SDP solves audited, infeasible probe in both solver modes",
        ledger.summaries.len()
    ));
    c
}

fn main() {
    let mut ledger = Ledger::default();
    let mut results: Vec<(usize, Check, f64)> = Vec::new();
    let mut timed = |k: usize, f: &mut dyn FnMut(&mut Ledger) -> Check, ledger: &mut Ledger| {
        let start = Instant::now();
        let check = f(ledger);
        results.push((k, check, start.elapsed().as_secs_f64()));
    };
    timed(1, &mut criterion_1, &mut ledger);
    timed(2, &mut criterion_2, &mut ledger);
    timed(3, &mut criterion_3, &mut ledger);
    timed(4, &mut criterion_4, &mut ledger);
    timed(5, &mut |_| criterion_5(), &mut ledger);
    timed(6, &mut criterion_6, &mut ledger);
    timed(7, &mut criterion_7, &mut ledger);
    timed(8, &mut criterion_8, &mut ledger);
    timed(9, &mut criterion_9, &mut ledger);
    timed(10, &mut |l: &mut Ledger| criterion_10(l), &mut ledger);

    let mut failed = 0;
    for (k, check, secs) in &results {
        let pass = check.failures.is_empty();
        failed += usize::from(!pass);
        println!("criterion {k}: {} ({secs:.1}s)", if pass { "PASS" } else { "FAIL" });
        for note in &check.notes {
            println!("    {note}");
        }
        for f in check.failures.iter().take(10) {
            println!("    failure: {f}");
        }
        if check.failures.len() > 10 {
            println!("    ... {} more failures", check.failures.len() - 10);
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
