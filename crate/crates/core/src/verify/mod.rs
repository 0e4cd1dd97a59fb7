//! Achievability harness. Every feasible decision `(Π, θ̂)` has a Bayes risk
//! that upper-bounds the optimum, so the decisions built here certify the
//! lower bounds from the other side.

use nalgebra::DVector;
use serde::Serialize;

use crate::closedform::{bayesian_sld, rld_bound, sld_bound};
use crate::conic::{solve, BlockKind, ConicProgram, LinearFunctional, SolverOptions};
use crate::error::{Error, Result};
use crate::matcore::{c64, hermitian_eig, hermitian_fn, max_abs, random, re_trace_prod, CMat, Hermitian};
use crate::model::{build_extended_moments, build_moments, BayesMoments, StatisticalModel};
use crate::sdpbounds::{holevo_type_bound_with, nagaoka_hayashi_bound_with, HolevoForm};

const POVM_PSD_TOL: f64 = 1e-10;
const POVM_SUM_TOL: f64 = 1e-9;
/// Outcomes with smaller probability get the prior mean as estimate.
const NULL_OUTCOME: f64 = 1e-15;
const SEESAW_MIN_IMPROVEMENT: f64 = 1e-10;
const AUDIT_SLACK: f64 = 1e-6;
const AUDIT_SEESAW_ITERS: usize = 200;
const AUDIT_SEEDS: [u64; 3] = [0, 1, 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<Hermitian>,
}

impl Povm {
    /// Checks `Π_x ⪰ −1e-10` and `Σ Π_x = I` within 1e-9.
    pub fn new(elements: Vec<Hermitian>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let d = first.dim();
        let mut sum = CMat::zeros(d, d);
        for (x, e) in elements.iter().enumerate() {
            if e.dim() != d {
                return Err(Error::Dimension(format!("POVM element {x} is not {d}x{d}")));
            }
            let min = e.min_eigenvalue()?;
            if min < -POVM_PSD_TOL {
                return Err(Error::InvalidPovm(format!("element {x} has eigenvalue {min:.3e}")));
            }
            sum += e.as_mat();
        }
        let dev = max_abs(&(sum - CMat::identity(d, d)));
        if dev > POVM_SUM_TOL {
            return Err(Error::InvalidPovm(format!("elements sum to I only within {dev:.3e}")));
        }
        Ok(Self { elements })
    }

    /// The trivial one-outcome measurement.
    pub fn identity(d: usize) -> Self {
        Self {
            elements: vec![Hermitian::identity(d)],
        }
    }

    /// Clamps negative eigenvalues and renormalizes with `G^{-1/2}`, where
    /// `G = Σ Π_x`, so the result is an exact resolution of the identity.
    pub fn repaired(elements: &[Hermitian]) -> Result<Self> {
        let d = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?
            .dim();
        let clamped = elements
            .iter()
            .map(|e| hermitian_fn(e, |v| v.max(0.0)))
            .collect::<Result<Vec<_>>>()?;
        let mut g = CMat::zeros(d, d);
        for e in &clamped {
            g += e.as_mat();
        }
        let g = Hermitian::hermitian_part(&g);
        if g.min_eigenvalue()? <= 0.0 {
            return Err(Error::InvalidPovm("elements do not span the space".into()));
        }
        let gi = hermitian_fn(&g, |v| 1.0 / v.sqrt())?;
        let elements = clamped.iter().map(|e| e.conjugate_by(gi.as_mat())).collect();
        Self::new(elements)
    }

    pub fn elements(&self) -> &[Hermitian] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }
}

/// A quantum decision and its exact grid risk.
#[derive(Debug, Clone)]
pub struct DecisionRisk {
    pub povm: Povm,
    pub estimates: Vec<DVector<f64>>,
    pub risk: f64,
}

fn check_povm(model: &StatisticalModel, povm: &Povm) -> Result<()> {
    if povm.dim() != model.d() {
        return Err(Error::Dimension(format!(
            "POVM acts on dimension {}, model on {}",
            povm.dim(),
            model.d()
        )));
    }
    Ok(())
}

/// `p(x|m) = Tr(S_m Π_x)`, indexed `[m][x]`.
fn likelihoods(model: &StatisticalModel, povm: &Povm) -> Vec<Vec<f64>> {
    model
        .points()
        .iter()
        .map(|pt| {
            povm.elements()
                .iter()
                .map(|e| re_trace_prod(pt.state.as_mat(), e.as_mat()))
                .collect()
        })
        .collect()
}

/// `Σ_m π_m Σ_x Tr(S_m Π_x) (θ̂_x − θ_m)ᵀ W(θ_m) (θ̂_x − θ_m)`.
pub fn decision_risk(model: &StatisticalModel, povm: &Povm, estimates: &[DVector<f64>]) -> Result<f64> {
    check_povm(model, povm)?;
    if estimates.len() != povm.len() || estimates.iter().any(|e| e.len() != model.n()) {
        return Err(Error::Dimension(format!(
            "need {} estimates of length {}",
            povm.len(),
            model.n()
        )));
    }
    let lik = likelihoods(model, povm);
    let mut risk = 0.0;
    for (m, pt) in model.points().iter().enumerate() {
        let w = model.weight_at(m);
        for (x, est) in estimates.iter().enumerate() {
            let e = est - &pt.theta;
            risk += pt.weight * lik[m][x] * (e.transpose() * w * &e)[(0, 0)];
        }
    }
    Ok(risk)
}

fn prior_mean(model: &StatisticalModel) -> DVector<f64> {
    model
        .points()
        .iter()
        .fold(DVector::zeros(model.n()), |acc, pt| acc + &pt.theta * pt.weight)
}

/// Posterior-mean estimates for a fixed measurement; optimal at fixed `Π`
/// when `W` is constant.
pub fn posterior_mean_estimator(model: &StatisticalModel, povm: &Povm) -> Result<DecisionRisk> {
    if model.constant_weight().is_none() {
        return Err(Error::Unsupported(
            "the posterior mean is only optimal for a parameter-independent weight".into(),
        ));
    }
    check_povm(model, povm)?;
    let lik = likelihoods(model, povm);
    let mean = prior_mean(model);
    let estimates: Vec<DVector<f64>> = (0..povm.len())
        .map(|x| {
            let mut num = DVector::zeros(model.n());
            let mut px = 0.0;
            for (m, pt) in model.points().iter().enumerate() {
                let joint = pt.weight * lik[m][x];
                num += &pt.theta * joint;
                px += joint;
            }
            if px > NULL_OUTCOME {
                num / px
            } else {
                mean.clone()
            }
        })
        .collect();
    let risk = decision_risk(model, povm, &estimates)?;
    Ok(DecisionRisk {
        povm: povm.clone(),
        estimates,
        risk,
    })
}

/// Minimizes the grid risk over POVMs with `estimates.len()` outcomes at
/// fixed estimates. The risk is linear in `Π`, so this is the SDP
/// `min Σ_x Tr(Q_x Π_x)` subject to `Σ_x Π_x = I`, `Π_x ⪰ 0`, with
/// `Q_x = Σ_m π_m (θ̂_x − θ_m)ᵀ W(θ_m) (θ̂_x − θ_m) S_m`.
pub fn optimal_povm_step(model: &StatisticalModel, estimates: &[DVector<f64>]) -> Result<Povm> {
    optimal_povm_step_with(model, estimates, &SolverOptions::default())
}

pub fn optimal_povm_step_with(
    model: &StatisticalModel,
    estimates: &[DVector<f64>],
    opts: &SolverOptions,
) -> Result<Povm> {
    let d = model.d();
    if estimates.is_empty() || estimates.iter().any(|e| e.len() != model.n()) {
        return Err(Error::Dimension(format!(
            "need at least one estimate of length {}",
            model.n()
        )));
    }
    let mut p = ConicProgram::new();
    for est in estimates {
        let mut q = CMat::zeros(d, d);
        for (m, pt) in model.points().iter().enumerate() {
            let e = est - &pt.theta;
            let c = pt.weight * (e.transpose() * model.weight_at(m) * &e)[(0, 0)];
            q += pt.state.as_mat() * c64(c, 0.0);
        }
        let blk = p.add_block(BlockKind::Complex(d));
        p.objective.matrix(blk, &q);
    }
    let blocks = estimates.len();
    let mut pin = |r: usize, c: usize, coef, rhs| {
        let mut f = LinearFunctional::default();
        for blk in 0..blocks {
            f.entry(blk, r, c, coef);
        }
        p.add_constraint(f, rhs);
    };
    for c in 0..d {
        pin(c, c, c64(1.0, 0.0), 1.0);
        for r in 0..c {
            pin(r, c, c64(0.5, 0.0), 0.0);
            pin(r, c, c64(0.0, 0.5), 0.0);
        }
    }
    let sol = solve(&p, opts)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("POVM step: {:?}", sol.summary())));
    }
    let elements: Vec<Hermitian> = sol.variable_values.iter().map(Hermitian::hermitian_part).collect();
    Povm::repaired(&elements)
}

/// Seeded random POVM: `K ≥ d` Haar-random pure states renormalized by
/// `G^{-1/2}`, or for `K < d` the columns of a Haar unitary dealt into `K`
/// projectors.
pub fn random_povm(d: usize, outcomes: usize, seed: u64) -> Result<Povm> {
    if outcomes == 0 {
        return Err(Error::InvalidPovm("outcome count must be positive".into()));
    }
    let mut rng = random::seeded(seed);
    let mut raw = vec![CMat::zeros(d, d); outcomes];
    if outcomes >= d {
        for e in raw.iter_mut() {
            let v = random::ginibre(&mut rng, d, 1);
            *e = &v * v.adjoint() * c64(1.0 / v.norm_squared(), 0.0);
        }
    } else {
        let u = random::unitary(&mut rng, d);
        for k in 0..d {
            let col = u.column(k);
            raw[k % outcomes] += col * col.adjoint();
        }
    }
    let elements: Vec<Hermitian> = raw.iter().map(Hermitian::hermitian_part).collect();
    Povm::repaired(&elements)
}

/// Result of an alternating minimization.
#[derive(Debug, Clone)]
pub struct SeesawRun {
    pub decision: DecisionRisk,
    /// Accepted risks, starting with the random initialization.
    pub history: Vec<f64>,
    pub seed: u64,
}

/// Alternates [`posterior_mean_estimator`] and [`optimal_povm_step`] from a
/// seeded random POVM. Only improving decisions are accepted, so the
/// recorded risk never increases; iteration stops after `iters` steps or
/// when the improvement drops below 1e-10.
pub fn seesaw(model: &StatisticalModel, outcome_count: usize, iters: usize, seed: u64) -> Result<SeesawRun> {
    seesaw_with(model, outcome_count, iters, seed, &SolverOptions::default())
}

pub fn seesaw_with(
    model: &StatisticalModel,
    outcome_count: usize,
    iters: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<SeesawRun> {
    let start = random_povm(model.d(), outcome_count, seed)?;
    let mut best = posterior_mean_estimator(model, &start)?;
    let mut history = vec![best.risk];
    for _ in 0..iters {
        let povm = optimal_povm_step_with(model, &best.estimates, opts)?;
        let next = posterior_mean_estimator(model, &povm)?;
        let improvement = best.risk - next.risk;
        if improvement <= 0.0 {
            break;
        }
        best = next;
        history.push(best.risk);
        if improvement < SEESAW_MIN_IMPROVEMENT {
            break;
        }
    }
    Ok(SeesawRun {
        decision: best,
        history,
        seed,
    })
}

/// Independent seesaw runs, one thread per seed; returns every run in
/// seed order.
pub fn seesaw_runs(
    model: &StatisticalModel,
    outcome_count: usize,
    iters: usize,
    seeds: &[u64],
    opts: &SolverOptions,
) -> Result<Vec<SeesawRun>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| scope.spawn(move || seesaw_with(model, outcome_count, iters, seed, opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Solver("seesaw worker panicked".into())))
            })
            .collect()
    })
}

/// The lowest-risk run over the given seeds; ties go to the earlier seed.
pub fn seesaw_restarts(
    model: &StatisticalModel,
    outcome_count: usize,
    iters: usize,
    seeds: &[u64],
) -> Result<SeesawRun> {
    best_run(seesaw_runs(
        model,
        outcome_count,
        iters,
        seeds,
        &SolverOptions::default(),
    )?)
}

fn best_run(runs: Vec<SeesawRun>) -> Result<SeesawRun> {
    runs.into_iter()
        .reduce(|best, run| {
            if run.decision.risk < best.decision.risk {
                run
            } else {
                best
            }
        })
        .ok_or_else(|| Error::InvalidModel("no seeds given".into()))
}

/// Spectral projectors of the one-parameter Bayesian SLD and its
/// eigenvalues as estimates; this decision attains the SLD bound.
#[derive(Debug, Clone)]
pub struct PersonickMeasurement {
    pub projectors: Vec<Hermitian>,
    pub estimates: Vec<f64>,
}

impl PersonickMeasurement {
    pub fn decision(&self, model: &StatisticalModel) -> Result<DecisionRisk> {
        let povm = Povm::new(self.projectors.clone())?;
        let estimates: Vec<DVector<f64>> = self.estimates.iter().map(|&e| DVector::from_element(1, e)).collect();
        let risk = decision_risk(model, &povm, &estimates)?;
        Ok(DecisionRisk { povm, estimates, risk })
    }
}

pub fn personick_optimal_measurement(moments: &BayesMoments) -> Result<PersonickMeasurement> {
    if moments.n() != 1 {
        return Err(Error::Unsupported(format!(
            "the Personick measurement needs one parameter, got {}",
            moments.n()
        )));
    }
    let sld = bayesian_sld(moments)?;
    let eig = hermitian_eig(&sld.l[0])?;
    let scale = eig.values.amax().max(1.0);
    let d = eig.values.len();
    let mut projectors = Vec::new();
    let mut estimates = Vec::new();
    let mut k = 0;
    while k < d {
        let mut end = k + 1;
        while end < d && eig.values[end] - eig.values[k] <= 1e-9 * scale {
            end += 1;
        }
        let cols = eig.vectors.columns(k, end - k);
        projectors.push(Hermitian::hermitian_part(&(cols * cols.adjoint())));
        estimates.push(eig.values.rows(k, end - k).mean());
        k = end;
    }
    Ok(PersonickMeasurement { projectors, estimates })
}

/// One link `upper ≥ lower` of the ordering chain.
#[derive(Debug, Clone, Serialize)]
pub struct AuditLink {
    pub upper: String,
    pub lower: String,
    pub margin: f64,
    pub holds: bool,
}

/// Seesaw settings and solver options for [`ordering_audit_with`].
#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub iters: usize,
    pub seeds: Vec<u64>,
    /// Defaults to `n + 2`.
    pub outcomes: Option<usize>,
    pub solver: SolverOptions,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            iters: AUDIT_SEESAW_ITERS,
            seeds: AUDIT_SEEDS.to_vec(),
            outcomes: None,
            solver: SolverOptions::default(),
        }
    }
}

/// Values of the bound chain `seesaw ≥ C_NH ≥ C_H ≥ max(C_SLD, C_RLD)`.
/// Components that fail leave their value empty and record the error.
#[derive(Debug, Clone, Default, Serialize)]
pub struct OrderingAudit {
    pub sld: Option<f64>,
    pub rld: Option<f64>,
    pub holevo: Option<f64>,
    pub nagaoka_hayashi: Option<f64>,
    pub seesaw: Option<f64>,
    /// `(seed, risk)` of every seesaw run.
    pub seesaw_runs: Vec<(u64, f64)>,
    pub links: Vec<AuditLink>,
    pub errors: Vec<(String, String)>,
}

impl OrderingAudit {
    /// Every computed link holds and no component failed.
    pub fn holds(&self) -> bool {
        self.errors.is_empty() && self.links.iter().all(|l| l.holds)
    }

    /// Some computed link is violated beyond the slack.
    pub fn violated(&self) -> bool {
        self.links.iter().any(|l| !l.holds)
    }
}

/// Margins between `upper` and `lower` values; each must be ≥ −1e-6.
pub fn audit_links(pairs: &[(&str, Option<f64>, &str, Option<f64>)]) -> Vec<AuditLink> {
    pairs
        .iter()
        .filter_map(|&(upper, u, lower, l)| {
            let margin = u? - l?;
            Some(AuditLink {
                upper: upper.into(),
                lower: lower.into(),
                margin,
                holds: margin >= -AUDIT_SLACK,
            })
        })
        .collect()
}

pub fn ordering_audit(model: &StatisticalModel) -> Result<OrderingAudit> {
    ordering_audit_with(model, &AuditConfig::default())
}

pub fn ordering_audit_with(model: &StatisticalModel, cfg: &AuditConfig) -> Result<OrderingAudit> {
    let w = model
        .constant_weight()
        .ok_or_else(|| Error::Unsupported("the ordering audit needs a constant weight".into()))?
        .clone();
    if hermitian_eig(&Hermitian::from_real(&w)?)?.min() <= 0.0 {
        return Err(Error::InvalidModel(
            "the ordering audit needs a positive definite weight".into(),
        ));
    }
    let moments = build_moments(model)?;
    let em = build_extended_moments(model)?;
    let mut audit = OrderingAudit::default();
    let mut errors = Vec::new();
    let mut record = |name: &str, r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push((name.to_string(), e.to_string()));
            None
        }
    };
    let opts = &cfg.solver;
    audit.sld = record("sld", sld_bound(&moments, &w).map(|r| r.0));
    audit.rld = record("rld", rld_bound(&moments, &w).map(|r| r.0));
    audit.holevo = record(
        "holevo",
        holevo_type_bound_with(&em, HolevoForm::General, opts).map(|s| s.value),
    );
    audit.nagaoka_hayashi = record(
        "nagaoka_hayashi",
        nagaoka_hayashi_bound_with(&em, opts).map(|s| s.value),
    );
    let outcomes = cfg.outcomes.unwrap_or(model.n() + 2);
    let runs = seesaw_runs(model, outcomes, cfg.iters, &cfg.seeds, opts);
    if let Ok(runs) = &runs {
        audit.seesaw_runs = runs.iter().map(|r| (r.seed, r.decision.risk)).collect();
    }
    audit.seesaw = record("seesaw", runs.and_then(best_run).map(|r| r.decision.risk));
    audit.errors = errors;
    audit.links = audit_links(&[
        ("seesaw", audit.seesaw, "nagaoka_hayashi", audit.nagaoka_hayashi),
        ("nagaoka_hayashi", audit.nagaoka_hayashi, "holevo", audit.holevo),
        ("holevo", audit.holevo, "sld", audit.sld),
        ("holevo", audit.holevo, "rld", audit.rld),
    ]);
    Ok(audit)
}

#[cfg(test)]
mod tests;
