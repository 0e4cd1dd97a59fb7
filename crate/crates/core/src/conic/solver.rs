//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling.
//!
//! Internal standard form after realification:
//!
//! ```text
//! (P) min ⟨C, X⟩ + c_fᵀ z   s.t. A(X) + F z = b,  X ⪰ 0
//! (D) max bᵀ y              s.t. Aᵀy + S = C,  Fᵀ y = c_f,  S ⪰ 0
//! ```

use nalgebra::{Cholesky, DVector, SymmetricEigen};

use super::{
    complexify, BlockKind, ConicProgram, ConicSolution, ConicStatus, LinearFunctional, LmiRecord, SolverMode,
    SolverOptions,
};
use crate::error::Result;
use crate::matcore::{c64, to_complex, CMat, RMat};

const DUALITY_SLACK: f64 = 1e-9;
const POLISH_STEPS: usize = 5;
const REFINE_ROUNDS: usize = 12;

/// Upper-triangle entry of a symmetric coefficient matrix. `scaled` carries
/// the factor 2 for off-diagonal positions so `⟨A, X⟩ = Σ scaled·X_pq`.
#[derive(Debug, Clone, Copy)]
struct Entry {
    block: usize,
    p: usize,
    q: usize,
    raw: f64,
    scaled: f64,
}

struct Compiled {
    kinds: Vec<BlockKind>,
    dims: Vec<usize>,
    c: Vec<RMat>,
    rows: Vec<Vec<Entry>>,
    /// per block: (row index, range into `rows[row]`)
    by_block: Vec<Vec<(usize, usize, usize)>>,
    b: DVector<f64>,
    f: RMat,
    cf: DVector<f64>,
}

fn realified(kinds: &[BlockKind], f: &LinearFunctional) -> Vec<RMat> {
    let mut acc: Vec<Option<CMat>> = vec![None; kinds.len()];
    for e in &f.entries {
        let k = kinds[e.block].dim();
        let a = acc[e.block].get_or_insert_with(|| CMat::zeros(k, k));
        a[(e.row, e.col)] += e.value;
        if e.row != e.col {
            a[(e.col, e.row)] += e.value.conj();
        }
    }
    acc.into_iter()
        .zip(kinds)
        .map(|(a, kind)| match (a, kind) {
            (None, _) => RMat::zeros(0, 0),
            (Some(a), BlockKind::Real(_)) => {
                let re = a.map(|z| z.re);
                (&re + re.transpose()) * 0.5
            }
            (Some(a), BlockKind::Complex(_)) => {
                let h = (&a + a.adjoint()) * c64(0.5, 0.0);
                super::realify_mat(&h) * 0.5
            }
        })
        .collect()
}

fn compile(p: &ConicProgram) -> Compiled {
    let kinds = p.blocks.clone();
    let dims: Vec<usize> = kinds.iter().map(|k| k.real_dim()).collect();
    let c = realified(&kinds, &p.objective)
        .into_iter()
        .zip(&dims)
        .map(|(m, &d)| if m.nrows() == 0 { RMat::zeros(d, d) } else { m })
        .collect();
    let m = p.constraints.len();
    let nf = p.free_vars;
    let mut rows = Vec::with_capacity(m);
    let mut by_block = vec![Vec::new(); kinds.len()];
    let mut f = RMat::zeros(m, nf);
    let mut b = DVector::zeros(m);
    for (i, con) in p.constraints.iter().enumerate() {
        b[i] = con.rhs;
        for &(v, coef) in &con.functional.free {
            f[(i, v)] += coef;
        }
        let mut row = Vec::new();
        for (blk, a) in realified(&kinds, &con.functional).into_iter().enumerate() {
            if a.nrows() == 0 {
                continue;
            }
            let start = row.len();
            for q in 0..a.ncols() {
                for pp in 0..=q {
                    let v = a[(pp, q)];
                    if v != 0.0 {
                        let scaled = if pp == q { v } else { 2.0 * v };
                        row.push(Entry {
                            block: blk,
                            p: pp,
                            q,
                            raw: v,
                            scaled,
                        });
                    }
                }
            }
            if row.len() > start {
                by_block[blk].push((i, start, row.len()));
            }
        }
        rows.push(row);
    }
    let mut cf = DVector::zeros(nf);
    for &(v, coef) in &p.objective.free {
        cf[v] += coef;
    }
    Compiled {
        kinds,
        dims,
        c,
        rows,
        by_block,
        b,
        f,
        cf,
    }
}

impl Compiled {
    fn apply(&self, x: &[RMat]) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows
                .iter()
                .map(|row| row.iter().map(|e| e.scaled * x[e.block][(e.p, e.q)]).sum::<f64>()),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<RMat> {
        let mut out: Vec<RMat> = self.dims.iter().map(|&d| RMat::zeros(d, d)).collect();
        for (row, &yi) in self.rows.iter().zip(y.iter()) {
            for e in row {
                out[e.block][(e.p, e.q)] += yi * e.raw;
                if e.p != e.q {
                    out[e.block][(e.q, e.p)] += yi * e.raw;
                }
            }
        }
        out
    }

    /// Schur complement `M_ij = ⟨A_i, W A_j W⟩`.
    fn schur(&self, w: &[RMat]) -> RMat {
        let m = self.rows.len();
        let mut out = RMat::zeros(m, m);
        for (blk, list) in self.by_block.iter().enumerate() {
            let wb = &w[blk];
            for (jj, &(j, js, je)) in list.iter().enumerate() {
                let aj = &self.rows[j][js..je];
                for &(i, is, ie) in &list[..=jj] {
                    let ai = &self.rows[i][is..ie];
                    let mut acc = 0.0;
                    for ea in ai {
                        for eb in aj {
                            acc += ea.scaled
                                * eb.scaled
                                * (wb[(ea.p, eb.p)] * wb[(ea.q, eb.q)] + wb[(ea.p, eb.q)] * wb[(ea.q, eb.p)]);
                        }
                    }
                    out[(i, j)] += 0.5 * acc;
                }
            }
        }
        for j in 0..m {
            for i in 0..j {
                out[(j, i)] = out[(i, j)];
            }
        }
        out
    }
}

fn inner(a: &[RMat], b: &[RMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn sym(a: RMat) -> RMat {
    (&a + a.transpose()) * 0.5
}

struct Scaling {
    g: RMat,
    ginv: RMat,
    w: RMat,
    d: DVector<f64>,
}

fn nt_scaling(x: &RMat, s: &RMat) -> Option<Scaling> {
    let k = x.nrows();
    if k == 0 {
        return Some(Scaling {
            g: x.clone(),
            ginv: x.clone(),
            w: x.clone(),
            d: DVector::zeros(0),
        });
    }
    let lx = Cholesky::new(x.clone())?.l();
    let ls = Cholesky::new(s.clone())?.l();
    let svd = (ls.transpose() * &lx).svd(false, true);
    let v = svd.v_t?.transpose();
    let d = svd.singular_values;
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let mut g = &lx * &v;
    for (j, &dj) in d.iter().enumerate() {
        g.column_mut(j).scale_mut(1.0 / dj.sqrt());
    }
    let lx_inv = lx.solve_lower_triangular(&RMat::identity(k, k))?;
    let mut ginv = v.transpose() * lx_inv;
    for (i, &di) in d.iter().enumerate() {
        ginv.row_mut(i).scale_mut(di.sqrt());
    }
    let w = sym(&g * g.transpose());
    Some(Scaling { g, ginv, w, d })
}

/// Largest step keeping `λ + α Δ` PSD in the scaled frame, where `λ = diag(d)`.
fn max_step(d: &DVector<f64>, delta: &RMat) -> f64 {
    if d.is_empty() {
        return f64::INFINITY;
    }
    let k = d.len();
    let t = RMat::from_fn(k, k, |i, j| delta[(i, j)] / (d[i] * d[j]).sqrt());
    let min = SymmetricEigen::new(sym(t)).eigenvalues.min();
    if min < 0.0 {
        -1.0 / min
    } else {
        f64::INFINITY
    }
}

#[derive(Clone)]
struct State {
    x: Vec<RMat>,
    s: Vec<RMat>,
    y: DVector<f64>,
    z: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Vec<RMat>,
    ds: Vec<RMat>,
    dy: DVector<f64>,
    dz: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Factorization of the saddle system `[[M, F], [Fᵀ, 0]]`.
struct Kkt {
    m_chol: Cholesky<f64, nalgebra::Dyn>,
    minv_f: RMat,
    sf_chol: Option<Cholesky<f64, nalgebra::Dyn>>,
    m: RMat,
    f: RMat,
}

fn robust_cholesky(a: RMat) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let n = a.nrows();
    if let Some(c) = Cholesky::new(a.clone()) {
        return Some(c);
    }
    let scale = (0..n)
        .map(|i| a[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut delta = 1e-14 * scale;
    for _ in 0..8 {
        let mut r = a.clone();
        for i in 0..n {
            r[(i, i)] += delta;
        }
        if let Some(c) = Cholesky::new(r) {
            return Some(c);
        }
        delta *= 100.0;
    }
    None
}

impl Kkt {
    fn new(m: RMat, f: &RMat) -> Option<Self> {
        let m_chol = robust_cholesky(m.clone())?;
        let minv_f = m_chol.solve(f);
        let sf_chol = if f.ncols() > 0 {
            Some(robust_cholesky(sym(f.transpose() * &minv_f))?)
        } else {
            None
        };
        Some(Self {
            m_chol,
            minv_f,
            sf_chol,
            m,
            f: f.clone(),
        })
    }

    /// Solve with a few rounds of iterative refinement against the
    /// unfactored system.
    fn solve(&self, ra: &DVector<f64>, rb: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut y, mut z) = self.solve_once(ra, rb);
        let err = |y: &DVector<f64>, z: &DVector<f64>| (ra - &self.m * y - &self.f * z, rb - self.f.transpose() * y);
        let (mut ea, mut eb) = err(&y, &z);
        let mut last = norm_inf(&ea).max(norm_inf(&eb));
        for _ in 0..REFINE_ROUNDS {
            if last == 0.0 {
                break;
            }
            let (cy, cz) = self.solve_once(&ea, &eb);
            let (ny, nz) = (&y + cy, &z + cz);
            let (na, nb) = err(&ny, &nz);
            let now = norm_inf(&na).max(norm_inf(&nb));
            if !(now < last) {
                break;
            }
            (y, z, ea, eb) = (ny, nz, na, nb);
            if now > 0.5 * last {
                break;
            }
            last = now;
        }
        (y, z)
    }

    fn solve_once(&self, ra: &DVector<f64>, rb: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let minv_ra = self.m_chol.solve(ra);
        match &self.sf_chol {
            None => (minv_ra, DVector::zeros(0)),
            Some(sf) => {
                let dz = sf.solve(&(self.f.transpose() * &minv_ra - rb));
                let dy = minv_ra - &self.minv_f * &dz;
                (dy, dz)
            }
        }
    }
}

struct Residuals {
    r1: DVector<f64>,
    r2: Vec<RMat>,
    r4: DVector<f64>,
    r3: f64,
}

struct Measures {
    pobj: f64,
    dobj: f64,
    pres: f64,
    dres: f64,
}

fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn mats_inf(v: &[RMat]) -> f64 {
    v.iter().map(|m| m.amax()).fold(0.0, f64::max)
}

struct Finished {
    solution: ConicSolution,
    /// dual slack, scaled like the reported primal
    s: Vec<RMat>,
}

struct Solver<'a> {
    prob: &'a Compiled,
    opts: &'a SolverOptions,
    nu: f64,
    bnorm: f64,
    cnorm: f64,
    cfnorm: f64,
}

impl Solver<'_> {
    fn residuals(&self, st: &State) -> Residuals {
        let p = self.prob;
        let r1 = p.apply(&st.x) + &p.f * &st.z - &p.b * st.tau;
        let aty = p.adjoint(&st.y);
        let r2 =
            p.c.iter()
                .zip(&aty)
                .zip(&st.s)
                .map(|((c, a), s)| c * st.tau - a - s)
                .collect();
        let r4 = &p.cf * st.tau - p.f.transpose() * &st.y;
        let r3 = p.b.dot(&st.y) - inner(&p.c, &st.x) - p.cf.dot(&st.z) - st.kappa;
        Residuals { r1, r2, r4, r3 }
    }

    fn measures(&self, st: &State, r: &Residuals) -> Measures {
        let p = self.prob;
        let pobj = (inner(&p.c, &st.x) + p.cf.dot(&st.z)) / st.tau;
        let dobj = p.b.dot(&st.y) / st.tau;
        let pres = norm_inf(&r.r1) / st.tau / self.bnorm.max(1.0);
        let dres = (mats_inf(&r.r2) / self.cnorm.max(1.0)).max(norm_inf(&r.r4) / self.cfnorm.max(1.0)) / st.tau;
        Measures { pobj, dobj, pres, dres }
    }

    fn mu(&self, st: &State) -> f64 {
        (inner(&st.x, &st.s) + st.tau * st.kappa) / (self.nu + 1.0)
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        st: &State,
        res: &Residuals,
        sc: &[Scaling],
        kkt: &Kkt,
        q: &(DVector<f64>, DVector<f64>),
        v: &DVector<f64>,
        den: f64,
        rhs_scaled: &[RMat],
        eta: f64,
        rtk: f64,
    ) -> Direction {
        let p = self.prob;
        // Rc = G Z Gᵀ with Z_ij = 2 R_ij / (d_i + d_j)
        let rc: Vec<RMat> = sc
            .iter()
            .zip(rhs_scaled)
            .map(|(s, r)| {
                let k = s.d.len();
                let z = RMat::from_fn(k, k, |i, j| 2.0 * r[(i, j)] / (s.d[i] + s.d[j]));
                sym(&s.g * z * s.g.transpose())
            })
            .collect();
        let t: Vec<RMat> = rc
            .iter()
            .zip(&res.r2)
            .zip(sc)
            .map(|((rc, r2), s)| rc - (&s.w * r2 * &s.w) * eta)
            .collect();
        let rhs1 = -(&res.r1 * eta) - p.apply(&t);
        let rhs_f = &res.r4 * eta;
        let rhs3 = -eta * res.r3 + inner(&p.c, &t) + rtk / st.tau;
        let (py, pz) = kkt.solve(&rhs1, &rhs_f);
        let num = rhs3 - v.dot(&py) + p.cf.dot(&pz);
        let dtau = num / den;
        let dy = py + &q.0 * dtau;
        let dz = pz + &q.1 * dtau;
        let aty = p.adjoint(&dy);
        let ds: Vec<RMat> =
            p.c.iter()
                .zip(&aty)
                .zip(&res.r2)
                .map(|((c, a), r2)| sym(c * dtau - a + r2 * eta))
                .collect();
        let dx: Vec<RMat> = rc
            .iter()
            .zip(&ds)
            .zip(sc)
            .map(|((rc, ds), s)| sym(rc - &s.w * ds * &s.w))
            .collect();
        let dkappa = (rtk - st.kappa * dtau) / st.tau;
        Direction {
            dx,
            ds,
            dy,
            dz,
            dtau,
            dkappa,
        }
    }

    fn step_length(&self, st: &State, sc: &[Scaling], dir: &Direction) -> (f64, Vec<RMat>, Vec<RMat>) {
        let mut alpha = f64::INFINITY;
        let mut dxs = Vec::with_capacity(sc.len());
        let mut dss = Vec::with_capacity(sc.len());
        for ((s, dx), ds) in sc.iter().zip(&dir.dx).zip(&dir.ds) {
            let dxt = sym(&s.ginv * dx * s.ginv.transpose());
            let dst = sym(s.g.transpose() * ds * &s.g);
            alpha = alpha.min(max_step(&s.d, &dxt)).min(max_step(&s.d, &dst));
            dxs.push(dxt);
            dss.push(dst);
        }
        if dir.dtau < 0.0 {
            alpha = alpha.min(-st.tau / dir.dtau);
        }
        if dir.dkappa < 0.0 {
            alpha = alpha.min(-st.kappa / dir.dkappa);
        }
        (alpha, dxs, dss)
    }

    fn finish(&self, st: &State, status: ConicStatus, iterations: usize) -> Finished {
        let p = self.prob;
        // certificates are reported unnormalized
        let scale_out = match status {
            ConicStatus::Infeasible | ConicStatus::Unbounded => 1.0,
            _ => 1.0 / st.tau,
        };
        let x: Vec<RMat> = st.x.iter().map(|x| x * scale_out).collect();
        let z = &st.z * scale_out;
        let y = &st.y * scale_out;
        let primal_value = inner(&p.c, &x) + p.cf.dot(&z);
        let dual_value = p.b.dot(&y);
        let pres = norm_inf(&(p.apply(&x) + &p.f * &z - &p.b)) / self.bnorm.max(1.0);
        let aty = p.adjoint(&y);
        let s: Vec<RMat> = st.s.iter().map(|s| s * scale_out).collect();
        let r2: Vec<RMat> = p.c.iter().zip(&aty).zip(&s).map(|((c, a), s)| c - a - s).collect();
        let dres =
            (mats_inf(&r2) / self.cnorm.max(1.0)).max(norm_inf(&(&p.cf - p.f.transpose() * &y)) / self.cfnorm.max(1.0));
        let variable_values = x
            .iter()
            .zip(&p.kinds)
            .map(|(xb, kind)| match kind {
                BlockKind::Real(_) => to_complex(xb),
                BlockKind::Complex(_) => {
                    let h = complexify(xb);
                    (&h + h.adjoint()) * c64(0.5, 0.0)
                }
            })
            .collect();
        let solution = ConicSolution {
            status,
            primal_value,
            dual_value,
            gap: (primal_value - dual_value).abs(),
            primal_residual: pres,
            dual_residual: dres,
            variable_values,
            free_values: z.iter().copied().collect(),
            multipliers: y.iter().copied().collect(),
            iterations,
        };
        Finished { solution, s }
    }

    fn run(&self) -> Finished {
        let p = self.prob;
        let mut st = State {
            x: p.dims.iter().map(|&d| RMat::identity(d, d)).collect(),
            s: p.dims.iter().map(|&d| RMat::identity(d, d)).collect(),
            y: DVector::zeros(p.rows.len()),
            z: DVector::zeros(p.cf.len()),
            tau: 1.0,
            kappa: 1.0,
        };
        let mut stalls = 0;
        // iterate meeting the tolerances with the smallest dual excess; a few
        // extra steps are taken to push the dual value under the primal one
        let mut converged: Option<(State, usize)> = None;
        let mut excess = f64::INFINITY;
        let mut deadline = usize::MAX;
        let fail = |st: &State, iter: usize, conv: &Option<(State, usize)>| match conv {
            Some((c, it)) => self.finish(c, ConicStatus::Optimal, *it),
            None => self.finish(st, ConicStatus::NumericalFailure, iter),
        };
        for iter in 0..self.opts.max_iter {
            let res = self.residuals(&st);
            let meas = self.measures(&st, &res);
            let gap = (meas.pobj - meas.dobj).abs();
            if meas.pres <= self.opts.feas_tol
                && meas.dres <= self.opts.feas_tol
                && gap <= self.opts.gap_tol * meas.pobj.abs().max(1.0)
            {
                if meas.dobj <= meas.pobj + DUALITY_SLACK {
                    return self.finish(&st, ConicStatus::Optimal, iter);
                }
                deadline = deadline.min(iter + POLISH_STEPS);
                if meas.dobj - meas.pobj < excess {
                    excess = meas.dobj - meas.pobj;
                    converged = Some((st.clone(), iter));
                }
            }
            if iter >= deadline {
                return fail(&st, iter, &converged);
            }
            if let Some(status) = self.certificate(&st) {
                return self.finish(&st, status, iter);
            }
            let mu = self.mu(&st);
            let Some(sc) =
                st.x.iter()
                    .zip(&st.s)
                    .map(|(x, s)| nt_scaling(x, s))
                    .collect::<Option<Vec<_>>>()
            else {
                return fail(&st, iter, &converged);
            };
            let w: Vec<RMat> = sc.iter().map(|s| s.w.clone()).collect();
            let Some(kkt) = Kkt::new(p.schur(&w), &p.f) else {
                return fail(&st, iter, &converged);
            };
            let wcw: Vec<RMat> = w.iter().zip(&p.c).map(|(w, c)| w * c * w).collect();
            let a_wcw = p.apply(&wcw);
            let v = &p.b - &a_wcw;
            // the τ-equation pivot written as a sum of nonnegative terms,
            // which avoids cancellation near optimality
            let qa = kkt.solve(&a_wcw, &p.cf);
            let qb = kkt.solve(&p.b, &DVector::zeros(p.cf.len()));
            let aty = p.adjoint(&qa.0);
            let proj: f64 = sc
                .iter()
                .zip(p.c.iter().zip(&aty))
                .map(|(s, (c, a))| (s.g.transpose() * (c - a) * &s.g).norm_squared())
                .sum();
            let den = p.b.dot(&qb.0).max(0.0) + proj + st.kappa / st.tau;
            let q = (&qa.0 + &qb.0, &qa.1 + &qb.1);
            let lam2: Vec<RMat> = sc.iter().map(|s| RMat::from_diagonal(&s.d.map(|x| x * x))).collect();
            let ident = |s: &Scaling| RMat::identity(s.d.len(), s.d.len());

            let (dir, alpha) = match self.opts.mode {
                SolverMode::PathFollowing { sigma } => {
                    let r: Vec<RMat> = sc
                        .iter()
                        .zip(&lam2)
                        .map(|(s, l2)| ident(s) * (sigma * mu) - l2)
                        .collect();
                    let rtk = sigma * mu - st.tau * st.kappa;
                    let dir = self.direction(&st, &res, &sc, &kkt, &q, &v, den, &r, 1.0 - sigma, rtk);
                    let (amax, _, _) = self.step_length(&st, &sc, &dir);
                    (dir, amax)
                }
                SolverMode::PredictorCorrector => {
                    let r: Vec<RMat> = lam2.iter().map(|l2| -l2).collect();
                    let rtk = -st.tau * st.kappa;
                    let aff = self.direction(&st, &res, &sc, &kkt, &q, &v, den, &r, 1.0, rtk);
                    let (amax, dxa, dsa) = self.step_length(&st, &sc, &aff);
                    let alpha_a = amax.min(1.0);
                    let sigma = (1.0 - alpha_a).powi(3).clamp(0.0, 1.0);
                    let r: Vec<RMat> = sc
                        .iter()
                        .zip(&lam2)
                        .zip(dxa.iter().zip(&dsa))
                        .map(|((s, l2), (dx, ds))| {
                            let prod = dx * ds;
                            ident(s) * (sigma * mu) - l2 - (&prod + prod.transpose()) * 0.5
                        })
                        .collect();
                    let rtk = sigma * mu - st.tau * st.kappa - aff.dtau * aff.dkappa;
                    let dir = self.direction(&st, &res, &sc, &kkt, &q, &v, den, &r, 1.0 - sigma, rtk);
                    let (amax, _, _) = self.step_length(&st, &sc, &dir);
                    (dir, amax)
                }
            };
            let alpha = (self.opts.step_fraction * alpha).min(1.0);
            if !(alpha.is_finite() && alpha > 0.0) {
                return fail(&st, iter, &converged);
            }
            stalls = if alpha < 1e-10 { stalls + 1 } else { 0 };
            if stalls >= 3 {
                return fail(&st, iter, &converged);
            }
            for (x, dx) in st.x.iter_mut().zip(&dir.dx) {
                *x = sym(&*x + dx * alpha);
            }
            for (s, ds) in st.s.iter_mut().zip(&dir.ds) {
                *s = sym(&*s + ds * alpha);
            }
            st.y += &dir.dy * alpha;
            st.z += &dir.dz * alpha;
            st.tau += alpha * dir.dtau;
            st.kappa += alpha * dir.dkappa;
            let norm = st.tau + st.kappa;
            if !(norm.is_finite() && norm > 0.0) {
                return fail(&st, iter + 1, &converged);
            }
        }
        fail(&st, self.opts.max_iter, &converged)
    }

    /// Farkas-type rays: `y` with `Aᵀy ⪯ 0, Fᵀy = 0, bᵀy > 0` proves the
    /// primal infeasible; `(X, z)` with `A(X) + Fz = 0, ⟨C,X⟩ + c_fᵀz < 0`
    /// proves it unbounded.
    fn certificate(&self, st: &State) -> Option<ConicStatus> {
        let p = self.prob;
        let tol = self.opts.feas_tol;
        let by = p.b.dot(&st.y);
        if by > 0.0 {
            let aty = p.adjoint(&st.y);
            let r: Vec<RMat> = aty.iter().zip(&st.s).map(|(a, s)| a + s).collect();
            let res = mats_inf(&r).max(norm_inf(&(p.f.transpose() * &st.y)));
            if res <= tol * by && st.tau < st.kappa {
                return Some(ConicStatus::Infeasible);
            }
        }
        let cx = inner(&p.c, &st.x) + p.cf.dot(&st.z);
        if cx < 0.0 {
            let res = norm_inf(&(p.apply(&st.x) + &p.f * &st.z));
            if res <= tol * (-cx) && st.tau < st.kappa {
                return Some(ConicStatus::Unbounded);
            }
        }
        None
    }
}

fn run_compiled(prob: &Compiled, opts: &SolverOptions) -> Finished {
    let solver = Solver {
        nu: prob.dims.iter().sum::<usize>() as f64,
        bnorm: norm_inf(&prob.b),
        cnorm: mats_inf(&prob.c),
        cfnorm: norm_inf(&prob.cf),
        prob,
        opts,
    };
    solver.run()
}

/// Solves the program. Errors only for malformed input; solver outcomes are
/// reported through [`ConicSolution::status`].
///
/// Programs built purely from [`ConicProgram::add_lmi`] are solved through
/// their dual, whose Schur complement is indexed by the free variables. The
/// entrywise formulation would otherwise need the inverse of `W ⊗ W`, which
/// loses all accuracy as the scaling degenerates near optimality.
pub fn solve(program: &ConicProgram, opts: &SolverOptions) -> Result<ConicSolution> {
    program.validate()?;
    let prob = compile(program);
    if let Some(lmis) = program.pure_lmis() {
        return Ok(solve_lmi_dual(program, lmis, &prob, opts));
    }
    Ok(run_compiled(&prob, opts).solution)
}

fn hermitian_from_upper(m: &CMat) -> CMat {
    let k = m.nrows();
    CMat::from_fn(k, k, |r, c| match r.cmp(&c) {
        std::cmp::Ordering::Less => m[(r, c)],
        std::cmp::Ordering::Equal => c64(m[(r, r)].re, 0.0),
        std::cmp::Ordering::Greater => m[(c, r)].conj(),
    })
}

/// With slacks `Z_k = C_k + Σ z_i T_ik`, the dual program is
/// `min Σ Re Tr(C_k Y_k)` subject to `Σ_k Re Tr(T_ik Y_k) = c_i`, `Y ⪰ 0`,
/// and its multipliers are `−z`.
fn solve_lmi_dual(program: &ConicProgram, lmis: &[LmiRecord], orig: &Compiled, opts: &SolverOptions) -> ConicSolution {
    let nf = program.free_vars;
    let cf = &orig.cf;
    let mut dual = ConicProgram::new();
    let mut per_var: Vec<LinearFunctional> = vec![LinearFunctional::default(); nf];
    for lmi in lmis {
        let kind = program.blocks[lmi.block];
        let blk = dual.add_block(kind);
        dual.objective.matrix(blk, &hermitian_from_upper(&lmi.constant));
        for (var, t) in &lmi.terms {
            per_var[*var].matrix(blk, &hermitian_from_upper(t));
        }
    }
    // variables absent from every LMI are fixed at zero, or make the
    // program unbounded when they carry cost
    let mut active = Vec::new();
    for (var, f) in per_var.into_iter().enumerate() {
        if !f.entries.is_empty() {
            dual.add_constraint(f, cf[var]);
            active.push(var);
        } else if cf[var] != 0.0 {
            let mut z = vec![0.0; nf];
            z[var] = -cf[var].signum();
            return ConicSolution {
                status: ConicStatus::Unbounded,
                primal_value: -cf[var].abs(),
                dual_value: 0.0,
                gap: cf[var].abs(),
                primal_residual: 0.0,
                dual_residual: 0.0,
                variable_values: program.blocks.iter().map(|b| CMat::zeros(b.dim(), b.dim())).collect(),
                free_values: z,
                multipliers: vec![0.0; program.constraints.len()],
                iterations: 0,
            };
        }
    }
    let dprob = compile(&dual);
    // the realified dual residual understates the entrywise one by up to a
    // factor 2 on complex blocks
    let dual_opts = SolverOptions {
        feas_tol: opts.feas_tol / 2.0,
        ..*opts
    };
    let Finished { solution: ds, s } = run_compiled(&dprob, &dual_opts);
    // realified dual slacks carry the ½ of the complex inner product
    let s: Vec<RMat> = s
        .into_iter()
        .zip(&orig.kinds)
        .map(|(sb, kind)| match kind {
            BlockKind::Real(_) => sb,
            BlockKind::Complex(_) => sb * 2.0,
        })
        .collect();
    let mut z = DVector::zeros(nf);
    for (row, &var) in active.iter().enumerate() {
        z[var] = -ds.multipliers[row];
    }
    // recover the entrywise multipliers from Y = −Σ y_r E_r
    let mut y = vec![0.0; program.constraints.len()];
    for (lmi, yk) in lmis.iter().zip(&ds.variable_values) {
        let complex = matches!(program.blocks[lmi.block], BlockKind::Complex(_));
        let mut row = lmi.constraints.start;
        for c in 0..yk.ncols() {
            y[row] = -yk[(c, c)].re;
            row += 1;
            for r in 0..c {
                y[row] = -2.0 * yk[(r, c)].re;
                row += 1;
                if complex {
                    y[row] = -2.0 * yk[(r, c)].im;
                    row += 1;
                }
            }
        }
    }
    let status = match ds.status {
        ConicStatus::Infeasible => ConicStatus::Unbounded,
        ConicStatus::Unbounded => ConicStatus::Infeasible,
        other => other,
    };
    let primal_value = cf.dot(&z);
    let dual_value = orig.b.dot(&DVector::from_column_slice(&y));
    let pres = norm_inf(&(orig.apply(&s) + &orig.f * &z - &orig.b)) / norm_inf(&orig.b).max(1.0);
    let variable_values = s
        .iter()
        .zip(&orig.kinds)
        .map(|(sb, kind)| match kind {
            BlockKind::Real(_) => to_complex(sb),
            BlockKind::Complex(_) => {
                let h = complexify(sb);
                (&h + h.adjoint()) * c64(0.5, 0.0)
            }
        })
        .collect();
    ConicSolution {
        status,
        primal_value,
        dual_value,
        gap: (primal_value - dual_value).abs(),
        primal_residual: pres,
        dual_residual: ds.primal_residual,
        variable_values,
        free_values: z.iter().copied().collect(),
        multipliers: y,
        iterations: ds.iterations,
    }
}
