//! Bayesian Cramér–Rao-type bounds that need only eigendecompositions:
//! the SLD bound `Tr W(M − K)`, the RLD bound
//! `Tr W(M − Re K̃) + TrAbs W Im K̃`, and the quantum van Trees bound
//! `Tr W (J(π) + Σ π J^Q)^{-1}`.

use crate::error::{Error, Result};
use crate::matcore::{
    hermitian_eig, lyapunov_solve, max_abs_real, psd_inv, re_trace_prod, trace, trace_abs_weighted, trace_prod, CMat,
    DensityMatrix, Hermitian, RMat, PSD_TOL,
};
use crate::model::{BayesMoments, StatisticalModel};

const TRACELESS_TOL: f64 = 1e-9;

/// Bayesian symmetric logarithmic derivatives and their Gram matrix.
#[derive(Debug, Clone)]
pub struct SldPackage {
    pub l: Vec<Hermitian>,
    pub k: RMat,
    pub regularized: bool,
}

/// Bayesian right logarithmic derivatives `L̃_j = S_B⁻¹ D_B,j` and
/// `K̃_jk = Tr(S_B L̃_k L̃_j†)`.
#[derive(Debug, Clone)]
pub struct RldPackage {
    pub ltilde: Vec<CMat>,
    pub ktilde: CMat,
    pub regularized: bool,
    /// The weight matrix was singular; the trace-norm term is still exact
    /// but callers should surface a conditioning warning.
    pub singular_weight: bool,
}

pub(crate) fn check_weight(w: &RMat, n: usize) -> Result<()> {
    if w.shape() != (n, n) {
        return Err(Error::Dimension(format!("weight must be {n}x{n}")));
    }
    if max_abs_real(&(w - w.transpose())) > 1e-12 {
        return Err(Error::InvalidModel("weight matrix is not symmetric".into()));
    }
    let min = hermitian_eig(&Hermitian::from_real(w)?)?.min();
    if min < -PSD_TOL {
        return Err(Error::NotPsd(min));
    }
    Ok(())
}

/// Gram matrix `½ Tr(S(L_j L_k + L_k L_j))` of Hermitian operators.
pub fn symmetric_gram(s: &Hermitian, ls: &[Hermitian]) -> RMat {
    let n = ls.len();
    let mut k = RMat::zeros(n, n);
    for j in 0..n {
        let sl = s.as_mat() * ls[j].as_mat();
        for i in j..n {
            let v = re_trace_prod(&sl, ls[i].as_mat());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Bayesian SLDs solving `½(S_B L_j + L_j S_B) = D_B,j`.
pub fn bayesian_sld(moments: &BayesMoments) -> Result<SldPackage> {
    let mut regularized = false;
    let l = moments
        .d_b
        .iter()
        .map(|dj| {
            let r = lyapunov_solve(moments.s_b.as_hermitian(), dj)?;
            regularized |= r.regularized;
            Ok(r.value)
        })
        .collect::<Result<Vec<_>>>()?;
    let k = symmetric_gram(moments.s_b.as_hermitian(), &l);
    Ok(SldPackage { l, k, regularized })
}

pub fn sld_bound(moments: &BayesMoments, w: &RMat) -> Result<(f64, SldPackage)> {
    check_weight(w, moments.n())?;
    let pkg = bayesian_sld(moments)?;
    let value = (w * (&moments.m - &pkg.k)).trace();
    Ok((value, pkg))
}

pub fn bayesian_rld(moments: &BayesMoments) -> Result<RldPackage> {
    let inv = psd_inv(moments.s_b.as_hermitian())?;
    let ltilde: Vec<CMat> = moments.d_b.iter().map(|dj| inv.value.as_mat() * dj.as_mat()).collect();
    let n = ltilde.len();
    let s = moments.s_b.as_mat();
    let mut ktilde = CMat::zeros(n, n);
    for j in 0..n {
        let ljd = ltilde[j].adjoint();
        for k in 0..n {
            ktilde[(j, k)] = trace_prod(&(s * &ltilde[k]), &ljd);
        }
    }
    // K̃ is Hermitian by construction; remove rounding asymmetry
    let ktilde = Hermitian::hermitian_part(&ktilde).into_inner();
    Ok(RldPackage {
        ltilde,
        ktilde,
        regularized: inv.regularized,
        singular_weight: false,
    })
}

pub fn rld_bound(moments: &BayesMoments, w: &RMat) -> Result<(f64, RldPackage)> {
    check_weight(w, moments.n())?;
    let mut pkg = bayesian_rld(moments)?;
    let re = pkg.ktilde.map(|z| z.re);
    let im = pkg.ktilde.map(|z| z.im);
    let (abs_term, singular) = trace_abs_weighted(w, &im)?;
    pkg.singular_weight = singular;
    let value = (w * (&moments.m - re)).trace() + abs_term;
    Ok((value, pkg))
}

/// SLD quantum Fisher information of a single state with respect to the
/// given derivatives `∂_j S`.
pub fn sld_fisher_point(state: &DensityMatrix, derivatives: &[Hermitian]) -> Result<RMat> {
    for (j, ds) in derivatives.iter().enumerate() {
        if ds.dim() != state.dim() {
            return Err(Error::Dimension(format!("derivative {j} has wrong dimension")));
        }
        let tr = trace(ds.as_mat()).norm();
        if tr > TRACELESS_TOL {
            return Err(Error::InvalidModel(format!(
                "derivative {j} has trace {tr:.3e}, expected 0"
            )));
        }
    }
    let ls = derivatives
        .iter()
        .map(|ds| Ok(lyapunov_solve(state.as_hermitian(), ds)?.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(symmetric_gram(state.as_hermitian(), &ls))
}

/// Prior-averaged quantum information `J(π) + Σ_m π_m J^Q(θ_m)`.
pub fn bayesian_information(model: &StatisticalModel) -> Result<RMat> {
    if !model.has_derivatives() {
        return Err(Error::Capability("missing derivatives".into()));
    }
    if !model.has_score() {
        return Err(Error::Capability("missing prior score".into()));
    }
    let n = model.n();
    let mut info = RMat::zeros(n, n);
    for p in model.points() {
        let derivs = p.derivatives.as_ref().expect("checked above");
        let score = p.score.as_ref().expect("checked above");
        info += (sld_fisher_point(&p.state, derivs)? + score * score.transpose()) * p.weight;
    }
    Ok((&info + info.transpose()) * 0.5)
}

/// Quantum van Trees bound `Tr(W (J^Q_B)^{-1})` for a constant weight.
pub fn van_tree_bound(model: &StatisticalModel, w: &RMat) -> Result<f64> {
    check_weight(w, model.n())?;
    let info = bayesian_information(model)?;
    let e = hermitian_eig(&Hermitian::from_real(&info)?)?;
    let scale = max_abs_real(&info).max(f64::MIN_POSITIVE);
    if e.min() <= 1e-12 * scale {
        return Err(Error::SingularInformation);
    }
    let inv = e.map(|x| 1.0 / x).as_mat().map(|z| z.re);
    Ok((w * inv).trace())
}
