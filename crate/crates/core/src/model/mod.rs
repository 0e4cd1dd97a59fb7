//! The discretized Bayesian estimation problem and its prior-averaged
//! moments.

mod io;
mod zoo;

pub use io::{ModelFile, PointFile, WeightFile};
pub use zoo::model_zoo;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matcore::{
    c64, hermitian_eig, max_abs_real, CMat, DensityMatrix, ExtendedOperator, Hermitian, RMat, PSD_TOL,
};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const WEIGHT_SYM_TOL: f64 = 1e-12;

/// One grid point of the prior: parameter value, prior mass and state.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub theta: DVector<f64>,
    pub weight: f64,
    pub state: DensityMatrix,
    /// ∂S/∂θ_j, one per parameter.
    pub derivatives: Option<Vec<Hermitian>>,
    /// ∂ log π/∂θ_j at this point.
    pub score: Option<DVector<f64>>,
}

impl GridPoint {
    pub fn new(theta: DVector<f64>, weight: f64, state: DensityMatrix) -> Self {
        Self {
            theta,
            weight,
            state,
            derivatives: None,
            score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Constant(RMat),
    PerPoint(Vec<RMat>),
}

impl WeightSpec {
    pub fn constant(&self) -> Option<&RMat> {
        match self {
            WeightSpec::Constant(w) => Some(w),
            WeightSpec::PerPoint(_) => None,
        }
    }
}

fn validate_weight(w: &RMat, n: usize) -> Result<()> {
    if w.shape() != (n, n) {
        return Err(Error::InvalidModel(format!(
            "weight matrix must be {n}x{n}, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if max_abs_real(&(w - w.transpose())) > WEIGHT_SYM_TOL {
        return Err(Error::InvalidModel("weight matrix is not symmetric".into()));
    }
    let min = hermitian_eig(&Hermitian::from_real(w)?)?.min();
    if min < -PSD_TOL {
        return Err(Error::InvalidModel(format!(
            "weight matrix is not PSD (min eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

/// A finite grid prior over parameter values with the associated states and
/// weight (cost) matrices. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalModel {
    n: usize,
    d: usize,
    points: Vec<GridPoint>,
    weight: WeightSpec,
}

impl StatisticalModel {
    pub fn new(points: Vec<GridPoint>, weight: WeightSpec) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyModel)?;
        let n = first.theta.len();
        let d = first.state.dim();
        if n == 0 {
            return Err(Error::InvalidModel("parameter vector is empty".into()));
        }
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            if p.theta.len() != n {
                return Err(Error::InvalidModel(format!("point {i}: theta has wrong length")));
            }
            if p.state.dim() != d {
                return Err(Error::InvalidModel(format!("point {i}: state has wrong dimension")));
            }
            if !(p.weight >= 0.0) || !p.weight.is_finite() {
                return Err(Error::InvalidModel(format!("point {i}: negative prior weight")));
            }
            if p.theta.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            if let Some(ds) = &p.derivatives {
                if ds.len() != n || ds.iter().any(|h| h.dim() != d) {
                    return Err(Error::InvalidModel(format!("point {i}: malformed derivatives")));
                }
            }
            if let Some(s) = &p.score {
                if s.len() != n {
                    return Err(Error::InvalidModel(format!("point {i}: malformed score")));
                }
            }
            total += p.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidModel(format!("prior weights sum to {total}, expected 1")));
        }
        let has_score = points.iter().filter(|p| p.score.is_some()).count();
        if has_score != 0 && has_score != points.len() {
            return Err(Error::InvalidModel("score given for only some points".into()));
        }
        match &weight {
            WeightSpec::Constant(w) => validate_weight(w, n)?,
            WeightSpec::PerPoint(ws) => {
                if ws.len() != points.len() {
                    return Err(Error::InvalidModel(
                        "per-point weight count differs from point count".into(),
                    ));
                }
                for w in ws {
                    validate_weight(w, n)?;
                }
            }
        }
        Ok(Self { n, d, points, weight })
    }

    /// Prior concentrated on a single parameter value.
    pub fn point_mass(theta: DVector<f64>, state: DensityMatrix, w: RMat) -> Result<Self> {
        Self::new(vec![GridPoint::new(theta, 1.0, state)], WeightSpec::Constant(w))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn weight_spec(&self) -> &WeightSpec {
        &self.weight
    }

    pub fn constant_weight(&self) -> Option<&RMat> {
        self.weight.constant()
    }

    /// Weight matrix at grid point `m`.
    pub fn weight_at(&self, m: usize) -> &RMat {
        match &self.weight {
            WeightSpec::Constant(w) => w,
            WeightSpec::PerPoint(ws) => &ws[m],
        }
    }

    pub fn has_derivatives(&self) -> bool {
        self.points.iter().all(|p| p.derivatives.is_some())
    }

    pub fn has_score(&self) -> bool {
        self.points.iter().all(|p| p.score.is_some())
    }

    /// Same grid with a different weight specification.
    pub fn with_weight(&self, weight: WeightSpec) -> Result<Self> {
        Self::new(self.points.clone(), weight)
    }

    /// Every state (and derivative) conjugated by `u`.
    pub fn conjugated(&self, u: &CMat) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| {
                Ok(GridPoint {
                    theta: p.theta.clone(),
                    weight: p.weight,
                    state: p.state.conjugate_by(u)?,
                    derivatives: p
                        .derivatives
                        .as_ref()
                        .map(|ds| ds.iter().map(|h| h.conjugate_by(u)).collect()),
                    score: p.score.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, self.weight.clone())
    }

    /// Grid points reordered so that new point `i` is old point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.points.len() {
            return Err(Error::Dimension("permutation length".into()));
        }
        let points = perm.iter().map(|&i| self.points[i].clone()).collect();
        let weight = match &self.weight {
            WeightSpec::Constant(w) => WeightSpec::Constant(w.clone()),
            WeightSpec::PerPoint(ws) => WeightSpec::PerPoint(perm.iter().map(|&i| ws[i].clone()).collect()),
        };
        Self::new(points, weight)
    }
}

/// Prior-averaged quantities used by the closed-form bounds.
#[derive(Debug, Clone)]
pub struct BayesMoments {
    /// Σ π_m S_m.
    pub s_b: DensityMatrix,
    /// Σ π_m θ_{m,j} S_m.
    pub d_b: Vec<Hermitian>,
    /// Σ π_m θ_m θ_mᵀ.
    pub m: RMat,
    pub theta_bar: DVector<f64>,
    /// Σ π_m θ_mᵀ W(θ_m) θ_m.
    pub w_bar: f64,
}

impl BayesMoments {
    pub fn n(&self) -> usize {
        self.d_b.len()
    }

    pub fn d(&self) -> usize {
        self.s_b.dim()
    }

    /// Prior covariance `M − θ̄θ̄ᵀ`.
    pub fn covariance(&self) -> RMat {
        &self.m - &self.theta_bar * self.theta_bar.transpose()
    }

    /// Moments with every operator conjugated by `u`.
    pub fn conjugated(&self, u: &CMat) -> Result<Self> {
        Ok(Self {
            s_b: self.s_b.conjugate_by(u)?,
            d_b: self.d_b.iter().map(|h| h.conjugate_by(u)).collect(),
            m: self.m.clone(),
            theta_bar: self.theta_bar.clone(),
            w_bar: self.w_bar,
        })
    }
}

pub fn build_moments(model: &StatisticalModel) -> Result<BayesMoments> {
    let (n, d) = (model.n(), model.d());
    let mut s_b = CMat::zeros(d, d);
    let mut d_b = vec![CMat::zeros(d, d); n];
    let mut m = RMat::zeros(n, n);
    let mut theta_bar = DVector::zeros(n);
    let mut w_bar = 0.0;
    for (idx, p) in model.points().iter().enumerate() {
        let pi = p.weight;
        let s = p.state.as_mat();
        s_b += s * c64(pi, 0.0);
        for j in 0..n {
            d_b[j] += s * c64(pi * p.theta[j], 0.0);
        }
        m += &p.theta * p.theta.transpose() * pi;
        theta_bar += &p.theta * pi;
        w_bar += pi * (p.theta.transpose() * model.weight_at(idx) * &p.theta)[(0, 0)];
    }
    Ok(BayesMoments {
        s_b: DensityMatrix::normalized(s_b)?,
        d_b: d_b.into_iter().map(|x| Hermitian::hermitian_part(&x)).collect(),
        m: (&m + m.transpose()) * 0.5,
        theta_bar,
        w_bar,
    })
}

/// One term `π · W ⊗ S` of the decomposition of the averaged extended state.
#[derive(Debug, Clone)]
pub struct TensorTerm {
    pub pi: f64,
    pub w: RMat,
    pub s: DensityMatrix,
}

impl TensorTerm {
    pub fn extended(&self) -> ExtendedOperator {
        ExtendedOperator::kron(&self.w, self.s.as_mat())
    }
}

/// Extended-space quantities entering the Bayes risk in its operator form.
#[derive(Debug, Clone)]
pub struct ExtendedMoments {
    pub n: usize,
    pub d: usize,
    /// Σ π_m W(θ_m) ⊗ S_m.
    pub s_bar: ExtendedOperator,
    /// D̄_j = Σ π_m Σ_k W_jk(θ_m) θ_{m,k} S_m.
    pub d_bar: Vec<Hermitian>,
    pub w_bar: f64,
    /// One term per grid point, in grid order.
    pub terms: Vec<TensorTerm>,
    /// Set when the model's weight matrix is parameter independent.
    pub constant_w: Option<RMat>,
    /// Averaged state S_B.
    pub s_b: DensityMatrix,
    /// First moments D_B,j.
    pub d_b: Vec<Hermitian>,
}

impl ExtendedMoments {
    /// 𝕊(θ_m) = W(θ_m) ⊗ S_m.
    pub fn per_point_s(&self) -> Vec<ExtendedOperator> {
        self.terms.iter().map(TensorTerm::extended).collect()
    }

    /// Terms sharing a bit-identical weight matrix merged into one
    /// `π W ⊗ S` term (in order of first appearance).
    pub fn grouped_terms(&self) -> Result<Vec<TensorTerm>> {
        let mut groups: Vec<(RMat, f64, CMat)> = Vec::new();
        for t in &self.terms {
            match groups.iter_mut().find(|(w, _, _)| *w == t.w) {
                Some((_, pi, s)) => {
                    *pi += t.pi;
                    *s += t.s.as_mat() * c64(t.pi, 0.0);
                }
                None => groups.push((t.w.clone(), t.pi, t.s.as_mat() * c64(t.pi, 0.0))),
            }
        }
        groups
            .into_iter()
            .filter(|(_, pi, _)| *pi > 0.0)
            .map(|(w, pi, s)| {
                Ok(TensorTerm {
                    pi,
                    w,
                    s: DensityMatrix::normalized(s)?,
                })
            })
            .collect()
    }
}

pub fn build_extended_moments(model: &StatisticalModel) -> Result<ExtendedMoments> {
    let (n, d) = (model.n(), model.d());
    let moments = build_moments(model)?;
    let mut s_bar = ExtendedOperator::zeros(n, d);
    let mut d_bar = vec![CMat::zeros(d, d); n];
    let mut terms = Vec::with_capacity(model.points().len());
    for (idx, p) in model.points().iter().enumerate() {
        let w = model.weight_at(idx);
        let term = TensorTerm {
            pi: p.weight,
            w: w.clone(),
            s: p.state.clone(),
        };
        s_bar = s_bar.add(&term.extended().scale(p.weight));
        let wtheta = w * &p.theta;
        for j in 0..n {
            d_bar[j] += p.state.as_mat() * c64(p.weight * wtheta[j], 0.0);
        }
        terms.push(term);
    }
    Ok(ExtendedMoments {
        n,
        d,
        s_bar,
        d_bar: d_bar.into_iter().map(|x| Hermitian::hermitian_part(&x)).collect(),
        w_bar: moments.w_bar,
        terms,
        constant_w: model.constant_weight().cloned(),
        s_b: moments.s_b,
        d_b: moments.d_b,
    })
}
