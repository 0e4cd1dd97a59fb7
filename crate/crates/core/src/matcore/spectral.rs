use nalgebra::{DVector, Schur, SymmetricEigen};

use super::{
    c64, max_abs, max_abs_real, to_complex, CMat, Hermitian, RMat, C64, PSD_TOL, REGULARIZATION_EPS,
    STRICT_POSITIVE_TOL,
};
use crate::error::{Error, Result};

const EIG_MAX_ITER: usize = 10_000;
/// Eigenvector condition number above which a matrix is treated as defective.
const DEFECTIVE_COND: f64 = 1e8;

/// Spectral decomposition `A = U diag(values) U†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: CMat,
}

impl Eigen {
    /// U diag(f(λ)) U†.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Hermitian {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..d {
            let s = f(self.values[k]);
            for i in 0..d {
                scaled[(i, k)] *= s;
            }
        }
        Hermitian::hermitian_part(&(scaled * self.vectors.adjoint()))
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }
}

/// A value together with a flag telling whether REG-style regularization of
/// a nearly singular state was needed to produce it.
#[derive(Debug, Clone)]
pub struct Regularized<T> {
    pub value: T,
    pub regularized: bool,
}

pub fn hermitian_eig(a: &Hermitian) -> Result<Eigen> {
    let m = a.as_mat();
    let d = m.nrows();
    if d == 0 {
        return Ok(Eigen {
            values: DVector::zeros(0),
            vectors: CMat::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIG_MAX_ITER).ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Eigen { values, vectors })
}

/// f(A) for Hermitian A.
pub fn hermitian_fn(a: &Hermitian, f: impl Fn(f64) -> f64) -> Result<Hermitian> {
    Ok(hermitian_eig(a)?.map(f))
}

fn psd_floor(a: &Hermitian) -> f64 {
    -PSD_TOL * max_abs(a.as_mat()).max(1.0)
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues in
/// `[-1e-10, 0)` are clamped to zero.
pub fn psd_sqrt(a: &Hermitian) -> Result<Hermitian> {
    let e = hermitian_eig(a)?;
    if !e.values.is_empty() && e.min() < psd_floor(a) {
        return Err(Error::NotPsd(e.min()));
    }
    Ok(e.map(|x| x.max(0.0).sqrt()))
}

/// Eigendecomposition of a state-like positive matrix, regularized as
/// `(1-ε)S + ε I/d` when its minimum eigenvalue is below the strict
/// positivity threshold.
pub fn regularize_state(s: &Hermitian) -> Result<Regularized<Eigen>> {
    let mut e = hermitian_eig(s)?;
    let d = e.values.len();
    if d == 0 {
        return Err(Error::Dimension("empty state".into()));
    }
    let min = e.min();
    if min < psd_floor(s) {
        return Err(Error::SingularState(min));
    }
    if min >= STRICT_POSITIVE_TOL {
        return Ok(Regularized {
            value: e,
            regularized: false,
        });
    }
    // The trace is preserved for unit-trace states; for general positive
    // matrices the same affine map is applied to the spectrum.
    let tr: f64 = e.values.iter().sum();
    let shift = REGULARIZATION_EPS * tr.max(1.0) / d as f64;
    for v in e.values.iter_mut() {
        *v = (1.0 - REGULARIZATION_EPS) * v.max(0.0) + shift;
    }
    if e.min() <= 0.0 {
        return Err(Error::SingularState(min));
    }
    Ok(Regularized {
        value: e,
        regularized: true,
    })
}

pub fn psd_inv(s: &Hermitian) -> Result<Regularized<Hermitian>> {
    let r = regularize_state(s)?;
    Ok(Regularized {
        value: r.value.map(|x| 1.0 / x),
        regularized: r.regularized,
    })
}

pub fn psd_inv_sqrt(s: &Hermitian) -> Result<Regularized<Hermitian>> {
    let r = regularize_state(s)?;
    Ok(Regularized {
        value: r.value.map(|x| 1.0 / x.sqrt()),
        regularized: r.regularized,
    })
}

/// Solves `½(S L + L S) = D` for Hermitian `L` in the eigenbasis of `S`:
/// `L̃_ab = 2 D̃_ab / (λ_a + λ_b)`.
pub fn lyapunov_solve(s: &Hermitian, dmat: &Hermitian) -> Result<Regularized<Hermitian>> {
    if s.dim() != dmat.dim() {
        return Err(Error::Dimension(format!(
            "state is {}x{}, right-hand side {}x{}",
            s.dim(),
            s.dim(),
            dmat.dim(),
            dmat.dim()
        )));
    }
    let r = regularize_state(s)?;
    let e = &r.value;
    let u = &e.vectors;
    let mut lt = u.adjoint() * dmat.as_mat() * u;
    let d = s.dim();
    for a in 0..d {
        for b in 0..d {
            lt[(a, b)] *= 2.0 / (e.values[a] + e.values[b]);
        }
    }
    Ok(Regularized {
        value: Hermitian::hermitian_part(&(u * lt * u.adjoint())),
        regularized: r.regularized,
    })
}

/// Sum of singular values.
pub fn nuclear_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().sum()
}

fn is_normal(a: &CMat) -> bool {
    let comm = a * a.adjoint() - a.adjoint() * a;
    let scale = max_abs(a).max(1e-300);
    max_abs(&comm) <= 1e-12 * scale * scale.max(1.0)
}

/// Σ|λ_i(A)| over the eigenvalues of a square complex matrix.
///
/// Normal matrices (which covers Hermitian and anti-Hermitian inputs) use
/// singular values. Other matrices go through a complex Schur form and are
/// rejected when their eigenvector basis is too ill-conditioned to trust the
/// computed spectrum.
pub fn trace_abs(a: &CMat) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension("trace_abs needs a square matrix".into()));
    }
    let d = a.nrows();
    if d == 0 {
        return Ok(0.0);
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    if is_normal(a) {
        return Ok(nuclear_norm(a));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, EIG_MAX_ITER).ok_or(Error::NoConvergence)?;
    let (q, t) = schur.unpack();
    let cond = eigenvector_condition(&q, &t);
    if cond > DEFECTIVE_COND {
        return Err(Error::IllConditioned(cond));
    }
    Ok((0..d).map(|i| t[(i, i)].norm()).sum())
}

/// Condition number of the eigenvector matrix recovered from a complex
/// Schur factorization `A = Q T Q†`.
fn eigenvector_condition(q: &CMat, t: &CMat) -> f64 {
    let d = t.nrows();
    let tnorm = max_abs(t).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let mut vt = CMat::zeros(d, d);
    for k in 0..d {
        vt[(k, k)] = c64(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * vt[(j, k)];
            }
            let mut den = t[(i, i)] - t[(k, k)];
            if den.norm() < small {
                den = c64(small, 0.0);
            }
            vt[(i, k)] = -acc / den;
        }
    }
    let mut v = q * vt;
    for k in 0..d {
        let n = v.column(k).norm();
        if n > 0.0 && n.is_finite() {
            v.column_mut(k).unscale_mut(n);
        } else {
            return f64::INFINITY;
        }
    }
    let sv = v.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// TrAbs(W B) for a real symmetric PSD weight `W` and real `B`, computed by
/// congruence as the nuclear norm of `√W B √W`. This is exact for any PSD
/// `W` because `W B` and `√W B √W` share their nonzero spectrum and the
/// latter is normal whenever `B` is symmetric or antisymmetric.
///
/// The flag is set when `W` is singular (the value is still computed by the
/// congruence route but callers should surface a conditioning warning).
pub fn trace_abs_weighted(w: &RMat, b: &RMat) -> Result<(f64, bool)> {
    if w.nrows() != w.ncols() || b.shape() != w.shape() {
        return Err(Error::Dimension("weight and matrix shapes differ".into()));
    }
    let wh = Hermitian::from_real(w)?;
    let e = hermitian_eig(&wh)?;
    let scale = max_abs_real(w).max(1.0);
    if !e.values.is_empty() && e.min() < -PSD_TOL * scale {
        return Err(Error::NotPsd(e.min()));
    }
    let singular = !e.values.is_empty() && e.min() < STRICT_POSITIVE_TOL * scale;
    let root = e.map(|x| x.max(0.0).sqrt());
    let bc = to_complex(b);
    let congruent = root.as_mat() * bc * root.as_mat();
    if is_normal(&congruent) {
        Ok((nuclear_norm(&congruent), singular))
    } else {
        Ok((trace_abs(&congruent)?, singular))
    }
}
