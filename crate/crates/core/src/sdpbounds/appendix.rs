//! The relaxation family around `f(𝕊, 𝕏) = min { Tr(𝕊𝕃) : 𝕃 block-symmetric, 𝕃 ⪰ 𝕏 }`
//! for `𝕊 = Σ_j π_j W_j ⊗ S_j`.

use serde::{Deserialize, Serialize};

use super::{require_optimal, BlockSymVars};
use crate::conic::{self, BlockKind, ConicProgram, SolverOptions};
use crate::error::{Error, Result};
use crate::matcore::{
    hermitian_eig, max_abs, nuclear_norm, psd_sqrt, re_trace_prod, trace_abs_weighted, CMat, ExtendedOperator,
    Hermitian, RMat, STRICT_POSITIVE_TOL,
};
use crate::model::TensorTerm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FKind {
    /// The program itself.
    Sdp,
    /// Two-parameter closed form for a single tensor term.
    F1,
    /// `Tr Re Z + TrAbs Im Z` for a single tensor term.
    F2,
    /// Per-term inner programs over `sym₋(𝕏)`.
    F3,
    /// Per-term two-parameter closed forms.
    F4,
    /// Per-term `TrAbs Im Z`.
    F5,
}

/// `min { Re Tr(A 𝕃) : 𝕃 block-symmetric Hermitian, 𝕃 ⪰ lower }`.
fn block_sym_min(a: &CMat, lower: &CMat, n: usize, d: usize, opts: &SolverOptions) -> Result<f64> {
    let mut p = ConicProgram::new();
    let lv = BlockSymVars::declare(&mut p, n, d);
    lv.objective(&mut p, a);
    p.add_lmi(BlockKind::Complex(n * d), &(-lower), &lv.terms(n * d))?;
    let sol = conic::solve(&p, opts)?;
    require_optimal(&sol, "block-symmetric relaxation")?;
    Ok(sol.primal_value)
}

fn sqrt_det(w: &RMat) -> f64 {
    (w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)]).max(0.0).sqrt()
}

/// `√det W · TrAbs(S (𝕏₁₂ − 𝕏₂₁))`.
fn commutator_term(t: &TensorTerm, x: &ExtendedOperator) -> Result<f64> {
    let k = x.block(0, 1) - x.block(1, 0);
    let sq = psd_sqrt(t.s.as_hermitian())?;
    Ok(sqrt_det(&t.w) * nuclear_norm(&(sq.as_mat() * k * sq.as_mat())))
}

/// `Z(𝕊, 𝕏) = Tr_H(√𝕊 𝕏 √𝕊)`.
fn z_of(s: &CMat, x: &ExtendedOperator) -> Result<CMat> {
    let sq = psd_sqrt(&Hermitian::new(s.clone())?)?;
    Ok(
        ExtendedOperator::from_matrix(x.nblocks(), x.blockdim(), sq.as_mat() * x.as_mat() * sq.as_mat())?
            .partial_trace_h(),
    )
}

fn trace_abs_im(z: &CMat) -> Result<f64> {
    let n = z.nrows();
    let im = z.map(|c| c.im);
    Ok(trace_abs_weighted(&RMat::identity(n, n), &((&im - im.transpose()) * 0.5))?.0)
}

pub fn appendix_f(kind: FKind, terms: &[TensorTerm], x: &ExtendedOperator) -> Result<f64> {
    appendix_f_with(kind, terms, x, &SolverOptions::default())
}

pub fn appendix_f_with(kind: FKind, terms: &[TensorTerm], x: &ExtendedOperator, opts: &SolverOptions) -> Result<f64> {
    let first = terms
        .first()
        .ok_or_else(|| Error::Dimension("no tensor terms".into()))?;
    let (n, d) = (first.w.nrows(), first.s.dim());
    if x.nblocks() != n || x.blockdim() != d || terms.iter().any(|t| t.w.nrows() != n || t.s.dim() != d) {
        return Err(Error::Dimension("tensor terms and 𝕏 disagree in shape".into()));
    }
    if !x.is_hermitian(1e-9) {
        return Err(Error::NotHermitian(0.0));
    }
    let s_bar = terms.iter().fold(CMat::zeros(n * d, n * d), |acc, t| {
        acc + t.extended().into_mat() * crate::matcore::c64(t.pi, 0.0)
    });
    let min = hermitian_eig(&Hermitian::new(s_bar.clone())?)?.min();
    if min <= STRICT_POSITIVE_TOL * max_abs(&s_bar).max(1.0) {
        return Err(Error::NotPsd(min));
    }
    let single = || -> Result<&TensorTerm> {
        if terms.len() == 1 {
            Ok(first)
        } else {
            Err(Error::Capability(format!("{kind:?} needs a single tensor term")))
        }
    };
    let two = || -> Result<()> {
        if n == 2 {
            Ok(())
        } else {
            Err(Error::Capability(format!("{kind:?} needs n=2")))
        }
    };
    let sym_term = || re_trace_prod(&s_bar, x.sym_plus().as_mat());
    match kind {
        FKind::Sdp => block_sym_min(&s_bar, x.as_mat(), n, d, opts),
        FKind::F1 => {
            two()?;
            let t = single()?;
            let scaled = TensorTerm {
                pi: 1.0,
                w: &t.w * t.pi,
                s: t.s.clone(),
            };
            Ok(sym_term() + commutator_term(&scaled, x)?)
        }
        FKind::F2 => {
            single()?;
            let z = z_of(&s_bar, x)?;
            Ok(z.trace().re + trace_abs_im(&z)?)
        }
        FKind::F3 => {
            let mut total = sym_term();
            let ident = CMat::identity(n * d, n * d);
            let minus = x.sym_minus();
            for t in terms {
                let sq = psd_sqrt(&Hermitian::new(t.extended().into_mat())?)?;
                let lower = sq.as_mat() * minus.as_mat() * sq.as_mat();
                let lower = (&lower + lower.adjoint()) * crate::matcore::c64(0.5, 0.0);
                total += t.pi * block_sym_min(&ident, &lower, n, d, opts)?;
            }
            Ok(total)
        }
        FKind::F4 => {
            two()?;
            let mut total = sym_term();
            for t in terms {
                total += t.pi * commutator_term(t, x)?;
            }
            Ok(total)
        }
        FKind::F5 => {
            let mut total = sym_term();
            for t in terms {
                total += t.pi * trace_abs_im(&z_of(t.extended().as_mat(), x)?)?;
            }
            Ok(total)
        }
    }
}
