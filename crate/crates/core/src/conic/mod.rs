//! Small dense semidefinite programming.
//!
//! A [`ConicProgram`] minimizes a real linear functional over a product of
//! PSD blocks (real symmetric or complex Hermitian) and free real scalars,
//! subject to affine equalities. Complex blocks are realified internally and
//! reported back as Hermitian matrices. [`solve`] runs a primal-dual
//! interior-point method on the homogeneous self-dual embedding, so
//! infeasible and unbounded programs terminate with a certificate status.

mod solver;

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    c64, hermitian_eig, max_abs, trace_abs_weighted, CMat, Hermitian, RMat, C64, STRICT_POSITIVE_TOL,
};

pub use solver::solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Real(usize),
    Complex(usize),
}

impl BlockKind {
    pub fn dim(&self) -> usize {
        match *self {
            BlockKind::Real(k) | BlockKind::Complex(k) => k,
        }
    }

    /// Side length of the real symmetric block the solver works with.
    pub fn real_dim(&self) -> usize {
        match *self {
            BlockKind::Real(k) => k,
            BlockKind::Complex(k) => 2 * k,
        }
    }
}

/// One coefficient-matrix entry. The matrix `A` of a block receives `value`
/// at `(row, col)` and its conjugate at `(col, row)`; the functional
/// contributes `Re Tr(A X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coef {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: C64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearFunctional {
    pub entries: Vec<Coef>,
    /// `(free variable index, coefficient)`
    pub free: Vec<(usize, f64)>,
}

impl LinearFunctional {
    pub fn entry(&mut self, block: usize, row: usize, col: usize, value: C64) -> &mut Self {
        self.entries.push(Coef { block, row, col, value });
        self
    }

    pub fn free_coef(&mut self, var: usize, value: f64) -> &mut Self {
        self.free.push((var, value));
        self
    }

    /// Adds `Re Tr(A X_block)` for a full Hermitian (or real symmetric) `A`.
    pub fn matrix(&mut self, block: usize, a: &CMat) -> &mut Self {
        for c in 0..a.ncols() {
            for r in 0..=c {
                let v = if r == c { a[(r, r)] } else { a[(r, c)] };
                if v != C64::new(0.0, 0.0) {
                    self.entries.push(Coef {
                        block,
                        row: r,
                        col: c,
                        value: v,
                    });
                }
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub functional: LinearFunctional,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    pub blocks: Vec<BlockKind>,
    pub free_vars: usize,
    pub objective: LinearFunctional,
    pub constraints: Vec<Constraint>,
    /// Structure recorded by [`ConicProgram::add_lmi`]; lets the solver
    /// work on the dual when the program is a pure LMI problem.
    lmis: Vec<LmiRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LmiRecord {
    pub block: usize,
    pub constant: CMat,
    pub terms: Vec<(usize, CMat)>,
    pub constraints: Range<usize>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, kind: BlockKind) -> usize {
        self.blocks.push(kind);
        self.blocks.len() - 1
    }

    pub fn add_free(&mut self, count: usize) -> Range<usize> {
        let start = self.free_vars;
        self.free_vars += count;
        start..self.free_vars
    }

    pub fn add_constraint(&mut self, functional: LinearFunctional, rhs: f64) {
        self.constraints.push(Constraint { functional, rhs });
    }

    /// Adds a slack block `Z` of the given kind and pins it entrywise to
    /// `constant + Σ z_i F_i`, so that `Z ⪰ 0` encodes the LMI.
    pub fn add_lmi(&mut self, kind: BlockKind, constant: &CMat, terms: &[(usize, CMat)]) -> Result<usize> {
        let k = kind.dim();
        if constant.shape() != (k, k) || terms.iter().any(|(_, f)| f.shape() != (k, k)) {
            return Err(Error::Dimension(format!("LMI terms must be {k}x{k}")));
        }
        let complex = matches!(kind, BlockKind::Complex(_));
        let block = self.add_block(kind);
        let first = self.constraints.len();
        let mut pin = |coef: C64, part: fn(C64) -> f64, r: usize, c: usize| {
            let mut f = LinearFunctional::default();
            f.entry(block, r, c, coef);
            for (var, fi) in terms {
                let v = part(fi[(r, c)]);
                if v != 0.0 {
                    f.free_coef(*var, -v);
                }
            }
            self.add_constraint(f, part(constant[(r, c)]));
        };
        for c in 0..k {
            pin(c64(1.0, 0.0), |z| z.re, c, c);
            for r in 0..c {
                pin(c64(0.5, 0.0), |z| z.re, r, c);
                if complex {
                    pin(c64(0.0, 0.5), |z| z.im, r, c);
                }
            }
        }
        self.lmis.push(LmiRecord {
            block,
            constant: constant.clone(),
            terms: terms.to_vec(),
            constraints: first..self.constraints.len(),
        });
        Ok(block)
    }

    /// The recorded LMIs, when they make up the whole program: every block
    /// is an LMI slack, every constraint pins one, and the objective only
    /// involves free variables.
    pub(crate) fn pure_lmis(&self) -> Option<&[LmiRecord]> {
        let pinned: usize = self.lmis.iter().map(|l| l.constraints.len()).sum();
        (self.objective.entries.is_empty()
            && self.lmis.len() == self.blocks.len()
            && pinned == self.constraints.len()
            && self.lmis.iter().all(|l| l.constraints.end <= self.constraints.len()))
        .then_some(self.lmis.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |f: &LinearFunctional, what: &str| -> Result<()> {
            for e in &f.entries {
                let k = self
                    .blocks
                    .get(e.block)
                    .ok_or_else(|| Error::Dimension(format!("{what}: block {} undeclared", e.block)))?
                    .dim();
                if e.row >= k || e.col >= k {
                    return Err(Error::Dimension(format!(
                        "{what}: entry ({}, {}) outside block {} of size {k}",
                        e.row, e.col, e.block
                    )));
                }
                if !e.value.re.is_finite() || !e.value.im.is_finite() {
                    return Err(Error::NonFinite);
                }
            }
            for &(v, c) in &f.free {
                if v >= self.free_vars {
                    return Err(Error::Dimension(format!("{what}: free variable {v} undeclared")));
                }
                if !c.is_finite() {
                    return Err(Error::NonFinite);
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            check(&c.functional, &format!("constraint {i}"))?;
            if !c.rhs.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(())
    }

    /// Plain-text listing for cross-checking against external solvers.
    ///
    /// ```text
    /// blocks <count>
    /// block <index> real|complex <size>
    /// free <count>
    /// objective <entries> <free terms>
    /// e <block> <row> <col> <re> <im>
    /// f <var> <coef>
    /// constraint <index> <entries> <free terms> rhs <value>
    /// ...
    /// ```
    ///
    /// Each `e` line adds `value` at `(row, col)` and its conjugate at
    /// `(col, row)`; functionals are `Re Tr(A X)` plus free terms.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "blocks {}", self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            let (tag, k) = match *b {
                BlockKind::Real(k) => ("real", k),
                BlockKind::Complex(k) => ("complex", k),
            };
            let _ = writeln!(out, "block {i} {tag} {k}");
        }
        let _ = writeln!(out, "free {}", self.free_vars);
        let body = |out: &mut String, f: &LinearFunctional| {
            for e in &f.entries {
                let _ = writeln!(
                    out,
                    "e {} {} {} {:e} {:e}",
                    e.block, e.row, e.col, e.value.re, e.value.im
                );
            }
            for (v, c) in &f.free {
                let _ = writeln!(out, "f {v} {c:e}");
            }
        };
        let _ = writeln!(
            out,
            "objective {} {}",
            self.objective.entries.len(),
            self.objective.free.len()
        );
        body(&mut out, &self.objective);
        for (i, c) in self.constraints.iter().enumerate() {
            let f = &c.functional;
            let _ = writeln!(
                out,
                "constraint {i} {} {} rhs {:e}",
                f.entries.len(),
                f.free.len(),
                c.rhs
            );
            body(&mut out, f);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolverMode {
    /// Mehrotra predictor-corrector.
    PredictorCorrector,
    /// Fixed centering parameter.
    PathFollowing { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
    pub mode: SolverMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            step_fraction: 0.98,
            mode: SolverMode::PredictorCorrector,
        }
    }
}

impl SolverOptions {
    pub fn path_following() -> Self {
        Self {
            mode: SolverMode::PathFollowing { sigma: 0.1 },
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    /// `‖A(X) + F z − b‖∞ / max(1, ‖b‖∞)`
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// One matrix per block; real blocks have zero imaginary part.
    pub variable_values: Vec<CMat>,
    pub free_values: Vec<f64>,
    /// Equality multipliers.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == ConicStatus::Optimal
    }

    /// Summary without the variable payload.
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            status: self.status,
            primal_value: self.primal_value,
            dual_value: self.dual_value,
            gap: self.gap,
            primal_residual: self.primal_residual,
            iterations: self.iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: ConicStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub iterations: usize,
}

/// `T(H) = [[Re H, −Im H], [Im H, Re H]]`.
pub fn realify(h: &Hermitian) -> RMat {
    realify_mat(h.as_mat())
}

pub(crate) fn realify_mat(h: &CMat) -> RMat {
    let k = h.nrows();
    let mut t = RMat::zeros(2 * k, 2 * k);
    for j in 0..k {
        for i in 0..k {
            let z = h[(i, j)];
            t[(i, j)] = z.re;
            t[(i + k, j + k)] = z.re;
            t[(i, j + k)] = -z.im;
            t[(i + k, j)] = z.im;
        }
    }
    t
}

/// Adjoint of `½ T`: `H(Y) = (Y11 + Y22)/2 + i (Y21 − Y12)/2`.
pub(crate) fn complexify(y: &RMat) -> CMat {
    let k = y.nrows() / 2;
    CMat::from_fn(k, k, |i, j| {
        c64(
            0.5 * (y[(i, j)] + y[(i + k, j + k)]),
            0.5 * (y[(i + k, j)] - y[(i, j + k)]),
        )
    })
}

/// Closed form of `min { Tr(W V) : V real symmetric, V ⪰ A + iB }`, which is
/// `Tr(W A) + TrAbs(W B)`.
pub fn holevo_lemma_value(w: &RMat, a: &RMat, b: &RMat) -> Result<f64> {
    let n = w.nrows();
    if w.shape() != (n, n) || a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::Dimension(
            "holevo lemma operands must be square and equal".into(),
        ));
    }
    let scale = w.amax().max(1.0);
    let min = hermitian_eig(&Hermitian::from_real(w)?)?.min();
    if min <= STRICT_POSITIVE_TOL * scale {
        return Err(Error::NotPsd(min));
    }
    let (abs, _) = trace_abs_weighted(w, b)?;
    Ok((w * a).trace() + abs)
}

/// The same quantity computed as a semidefinite program.
pub fn holevo_lemma_sdp(w: &RMat, a: &RMat, b: &RMat, opts: &SolverOptions) -> Result<ConicSolution> {
    let n = w.nrows();
    let mut p = ConicProgram::new();
    let mut terms = Vec::new();
    for c in 0..n {
        for r in 0..=c {
            let var = p.add_free(1).start;
            let mut f = CMat::zeros(n, n);
            f[(r, c)] = c64(1.0, 0.0);
            f[(c, r)] = c64(1.0, 0.0);
            // Tr(W V) picks up W_rc twice off the diagonal
            let coef = if r == c { w[(r, r)] } else { w[(r, c)] + w[(c, r)] };
            p.objective.free_coef(var, coef);
            terms.push((var, f));
        }
    }
    let constant = CMat::from_fn(n, n, |i, j| c64(-a[(i, j)], -b[(i, j)]));
    if max_abs(&(&constant - constant.adjoint())) > 1e-12 {
        return Err(Error::NotHermitian(max_abs(&(&constant - constant.adjoint()))));
    }
    p.add_lmi(BlockKind::Complex(n), &constant, &terms)?;
    solve(&p, opts)
}
