//! Bayesian Nagaoka–Hayashi and Holevo-type bounds as semidefinite programs,
//! the two-parameter Nagaoka objective, and the family of relaxations
//! `f_sdp ≥ f3 ≥ f4`, `f_sdp ≥ f5` used to cross-check them.

mod appendix;
mod nagaoka;

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::conic::{self, BlockKind, ConicProgram, ConicSolution, SolveSummary, SolverOptions};
use crate::error::{Error, Result};
use crate::matcore::{
    c64, hermitian_eig, psd_sqrt, re_trace_prod, CMat, ExtendedOperator, Hermitian, RMat, STRICT_POSITIVE_TOL,
};
use crate::model::{ExtendedMoments, TensorTerm};

pub use appendix::{appendix_f, appendix_f_with, FKind};
pub use nagaoka::{nagaoka_bound_search, nagaoka_objective, NagaokaSearch};

/// Orthonormal basis of `d×d` Hermitian matrices under `Re Tr(AB)`:
/// diagonal units, then `(E_ab + E_ba)/√2` and `i(E_ba − E_ab)/√2` for `a < b`.
pub fn hermitian_basis(d: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        let mut e = CMat::zeros(d, d);
        e[(a, a)] = c64(1.0, 0.0);
        out.push(e);
    }
    for b in 0..d {
        for a in 0..b {
            let mut e = CMat::zeros(d, d);
            e[(a, b)] = c64(FRAC_1_SQRT_2, 0.0);
            e[(b, a)] = c64(FRAC_1_SQRT_2, 0.0);
            out.push(e);
            let mut e = CMat::zeros(d, d);
            e[(a, b)] = c64(0.0, -FRAC_1_SQRT_2);
            e[(b, a)] = c64(0.0, FRAC_1_SQRT_2);
            out.push(e);
        }
    }
    out
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_coords(h: &CMat, basis: &[CMat]) -> Vec<f64> {
    basis.iter().map(|e| re_trace_prod(e, h)).collect()
}

pub fn hermitian_from_coords(z: &[f64], basis: &[CMat]) -> Hermitian {
    let d = basis[0].nrows();
    let mut h = CMat::zeros(d, d);
    for (zi, e) in z.iter().zip(basis) {
        h += e * c64(*zi, 0.0);
    }
    Hermitian::hermitian_part(&h)
}

/// Free-variable layout of a block-symmetric operator `𝕃` with Hermitian
/// `d×d` blocks: one basis expansion per unordered pair `j ≤ k`.
#[derive(Debug, Clone)]
pub(crate) struct BlockSymVars {
    n: usize,
    d: usize,
    start: usize,
    basis: Vec<CMat>,
}

impl BlockSymVars {
    pub(crate) fn declare(p: &mut ConicProgram, n: usize, d: usize) -> Self {
        let basis = hermitian_basis(d);
        let start = p.add_free(n * (n + 1) / 2 * d * d).start;
        Self { n, d, start, basis }
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |k| (0..=k).map(move |j| (j, k)))
    }

    /// `(variable, coefficient matrix)` embedded into a `size×size` LMI.
    pub(crate) fn terms(&self, size: usize) -> Vec<(usize, CMat)> {
        let d = self.d;
        let mut out = Vec::new();
        let mut var = self.start;
        for (j, k) in self.pairs() {
            for e in &self.basis {
                let mut f = CMat::zeros(size, size);
                f.view_mut((j * d, k * d), (d, d)).copy_from(e);
                f.view_mut((k * d, j * d), (d, d)).copy_from(e);
                out.push((var, f));
                var += 1;
            }
        }
        out
    }

    /// Objective coefficients of `Re Tr(A 𝕃)`.
    pub(crate) fn objective(&self, p: &mut ConicProgram, a: &CMat) {
        let d = self.d;
        let mut var = self.start;
        for (j, k) in self.pairs() {
            for e in &self.basis {
                let akj = a.view((k * d, j * d), (d, d)).clone_owned();
                let mut c = re_trace_prod(&akj, e);
                if j != k {
                    let ajk = a.view((j * d, k * d), (d, d)).clone_owned();
                    c += re_trace_prod(&ajk, e);
                }
                if c != 0.0 {
                    p.objective.free_coef(var, c);
                }
                var += 1;
            }
        }
    }

    pub(crate) fn assemble(&self, z: &[f64]) -> ExtendedOperator {
        let d = self.d;
        let mut l = ExtendedOperator::zeros(self.n, d);
        let mut var = self.start;
        let m = self.basis.len();
        for (j, k) in self.pairs() {
            let h = hermitian_from_coords(&z[var..var + m], &self.basis);
            l.set_block(j, k, h.as_mat());
            if j != k {
                l.set_block(k, j, h.as_mat());
            }
            var += m;
        }
        l
    }
}

/// Free variables for `n` Hermitian `d×d` matrices `X_j`.
#[derive(Debug, Clone)]
pub(crate) struct HermitianVars {
    n: usize,
    start: usize,
    basis: Vec<CMat>,
}

impl HermitianVars {
    pub(crate) fn declare(p: &mut ConicProgram, n: usize, d: usize) -> Self {
        let basis = hermitian_basis(d);
        let start = p.add_free(n * d * d).start;
        Self { n, start, basis }
    }

    pub(crate) fn var(&self, j: usize, b: usize) -> usize {
        self.start + j * self.basis.len() + b
    }

    /// Adds `−2 Σ_j Re Tr(D̄_j X_j)` to the objective.
    pub(crate) fn linear_objective(&self, p: &mut ConicProgram, d_bar: &[Hermitian]) {
        for (j, dj) in d_bar.iter().enumerate() {
            for (b, e) in self.basis.iter().enumerate() {
                let c = -2.0 * re_trace_prod(dj.as_mat(), e);
                if c != 0.0 {
                    p.objective.free_coef(self.var(j, b), c);
                }
            }
        }
    }

    pub(crate) fn assemble(&self, z: &[f64]) -> Vec<Hermitian> {
        let m = self.basis.len();
        (0..self.n)
            .map(|j| hermitian_from_coords(&z[self.var(j, 0)..self.var(j, 0) + m], &self.basis))
            .collect()
    }
}

pub(crate) fn require_optimal(sol: &ConicSolution, what: &str) -> Result<()> {
    if sol.is_optimal() {
        Ok(())
    } else {
        let s = sol.summary();
        Err(Error::Solver(format!(
            "{what}: status {:?} after {} iterations (gap {:.3e}, primal residual {:.3e})",
            s.status, s.iterations, s.gap, s.primal_residual
        )))
    }
}

#[derive(Debug, Clone)]
pub struct NhSolution {
    pub value: f64,
    pub l_opt: ExtendedOperator,
    pub x_opt: Vec<Hermitian>,
    pub diagnostics: SolveSummary,
}

pub fn nagaoka_hayashi_bound(em: &ExtendedMoments) -> Result<NhSolution> {
    nagaoka_hayashi_bound_with(em, &SolverOptions::default())
}

/// Minimizes `Tr(S̄𝕃) − 2 Σ_j Tr(D̄_j X_j) + w̄` over block-symmetric `𝕃`
/// and Hermitian `X_j` subject to `[[𝕃, X], [X†, I]] ⪰ 0`.
pub fn nagaoka_hayashi_bound_with(em: &ExtendedMoments, opts: &SolverOptions) -> Result<NhSolution> {
    let (n, d) = (em.n, em.d);
    let size = (n + 1) * d;
    let mut p = ConicProgram::new();
    let lv = BlockSymVars::declare(&mut p, n, d);
    let xv = HermitianVars::declare(&mut p, n, d);
    lv.objective(&mut p, em.s_bar.as_mat());
    xv.linear_objective(&mut p, &em.d_bar);

    let mut terms = lv.terms(size);
    for j in 0..n {
        for (b, e) in xv.basis.iter().enumerate() {
            let mut f = CMat::zeros(size, size);
            f.view_mut((j * d, n * d), (d, d)).copy_from(e);
            f.view_mut((n * d, j * d), (d, d)).copy_from(e);
            terms.push((xv.var(j, b), f));
        }
    }
    let mut constant = CMat::zeros(size, size);
    for i in 0..d {
        constant[(n * d + i, n * d + i)] = c64(1.0, 0.0);
    }
    p.add_lmi(BlockKind::Complex(size), &constant, &terms)?;
    let sol = conic::solve(&p, opts)?;
    require_optimal(&sol, "Nagaoka-Hayashi program")?;
    Ok(NhSolution {
        value: sol.primal_value + em.w_bar,
        l_opt: lv.assemble(&sol.free_values),
        x_opt: xv.assemble(&sol.free_values),
        diagnostics: sol.summary(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolevoForm {
    /// One `V` block per distinct weight matrix, with grid points sharing
    /// that weight merged into a single tensor term.
    General,
    /// One `V` block per grid point. Never below `General`.
    PerPoint,
    /// Single `V ⪰ Z_B[X]` with objective `Tr(W V)`; constant weight only.
    Collapsed,
}

#[derive(Debug, Clone)]
pub struct HolevoSolution {
    pub value: f64,
    pub form: HolevoForm,
    pub x_opt: Vec<Hermitian>,
    pub v_blocks: Vec<RMat>,
    /// The tensor terms the `V` blocks refer to (for the collapsed form a
    /// single unit-weight term carrying `S_B` and `W`).
    pub terms: Vec<TensorTerm>,
    pub diagnostics: SolveSummary,
}

pub fn holevo_type_bound(em: &ExtendedMoments) -> Result<HolevoSolution> {
    holevo_type_bound_with(em, HolevoForm::General, &SolverOptions::default())
}

/// `Z[W⊗S, X]_jk = Tr_H(√𝕊 XX† √𝕊)_jk`.
pub fn z_matrix(w: &RMat, s: &CMat, xs: &[Hermitian]) -> Result<CMat> {
    let d = s.nrows();
    let sq = psd_sqrt(&Hermitian::new(ExtendedOperator::kron(w, s).into_mat())?)?;
    let cols: Vec<CMat> = xs.iter().map(|x| x.as_mat().clone()).collect();
    let outer = ExtendedOperator::outer(&cols);
    let inner = ExtendedOperator::from_matrix(xs.len(), d, sq.as_mat() * outer.as_mat() * sq.as_mat())?;
    Ok(inner.partial_trace_h())
}

fn real_sqrt_strict(w: &RMat) -> Result<RMat> {
    let h = Hermitian::from_real(w)?;
    let min = hermitian_eig(&h)?.min();
    if min <= STRICT_POSITIVE_TOL * w.amax().max(1.0) {
        return Err(Error::InvalidModel(format!(
            "general Holevo form needs a strictly positive weight (min eigenvalue {min:.3e})"
        )));
    }
    Ok(psd_sqrt(&h)?.as_mat().map(|z| z.re))
}

pub fn holevo_type_bound_with(em: &ExtendedMoments, form: HolevoForm, opts: &SolverOptions) -> Result<HolevoSolution> {
    let (n, d) = (em.n, em.d);
    let terms: Vec<TensorTerm> = match form {
        HolevoForm::General => em.grouped_terms()?,
        HolevoForm::PerPoint => em.terms.clone(),
        HolevoForm::Collapsed => {
            let w = em
                .constant_w
                .clone()
                .ok_or_else(|| Error::Capability("collapsed Holevo form requires a constant weight".into()))?;
            vec![TensorTerm {
                pi: 1.0,
                w,
                s: em.s_b.clone(),
            }]
        }
    };
    let collapsed = form == HolevoForm::Collapsed;

    let mut p = ConicProgram::new();
    let xv = HermitianVars::declare(&mut p, n, d);
    xv.linear_objective(&mut p, &em.d_bar);
    let size = n + d * d;
    let mut v_starts = Vec::with_capacity(terms.len());
    for t in &terms {
        let sqrt_w = if collapsed {
            RMat::identity(n, n)
        } else {
            real_sqrt_strict(&t.w)?
        };
        let sqrt_s = psd_sqrt(t.s.as_hermitian())?;
        let vstart = p.add_free(n * (n + 1) / 2).start;
        v_starts.push(vstart);
        let mut lmi_terms = Vec::new();
        let mut var = vstart;
        for k in 0..n {
            for j in 0..=k {
                let mut f = CMat::zeros(size, size);
                f[(j, k)] = c64(1.0, 0.0);
                f[(k, j)] = c64(1.0, 0.0);
                let coef = if collapsed {
                    if j == k {
                        t.w[(j, j)]
                    } else {
                        t.w[(j, k)] + t.w[(k, j)]
                    }
                } else if j == k {
                    t.pi
                } else {
                    0.0
                };
                if coef != 0.0 {
                    p.objective.free_coef(var, coef);
                }
                lmi_terms.push((var, f));
                var += 1;
            }
        }
        // row j of M is vec(Σ_l (√W)_jl √S X_l), column-major
        for l in 0..n {
            for (b, e) in xv.basis.iter().enumerate() {
                let y = sqrt_s.as_mat() * e;
                let mut f = CMat::zeros(size, size);
                for j in 0..n {
                    let wjl = sqrt_w[(j, l)];
                    if wjl == 0.0 {
                        continue;
                    }
                    for (col, v) in y.iter().enumerate() {
                        let v = v * c64(wjl, 0.0);
                        f[(j, n + col)] = v;
                        f[(n + col, j)] = v.conj();
                    }
                }
                lmi_terms.push((xv.var(l, b), f));
            }
        }
        let mut constant = CMat::zeros(size, size);
        for i in n..size {
            constant[(i, i)] = c64(1.0, 0.0);
        }
        p.add_lmi(BlockKind::Complex(size), &constant, &lmi_terms)?;
    }
    let sol = conic::solve(&p, opts)?;
    require_optimal(&sol, "Holevo-type program")?;
    let z = &sol.free_values;
    let v_blocks = v_starts
        .iter()
        .map(|&start| {
            let mut v = RMat::zeros(n, n);
            let mut var = start;
            for k in 0..n {
                for j in 0..=k {
                    v[(j, k)] = z[var];
                    v[(k, j)] = z[var];
                    var += 1;
                }
            }
            v
        })
        .collect();
    Ok(HolevoSolution {
        value: sol.primal_value + em.w_bar,
        form,
        x_opt: xv.assemble(z),
        v_blocks,
        terms,
        diagnostics: sol.summary(),
    })
}
