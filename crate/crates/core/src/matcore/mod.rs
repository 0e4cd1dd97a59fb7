//! Dense complex linear algebra used throughout the crate.
//!
//! Every function of a Hermitian matrix (square roots, inverses, the
//! Lyapunov solve) routes through [`hermitian_eig`], so all of them share the
//! same spectral conventions and tolerances.

mod extended;
pub mod random;
mod spectral;

pub use extended::{kron_real, ExtendedOperator};
pub use spectral::{
    hermitian_eig, hermitian_fn, lyapunov_solve, nuclear_norm, psd_inv, psd_inv_sqrt, psd_sqrt, regularize_state,
    trace_abs, trace_abs_weighted, Eigen, Regularized,
};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

/// Residual tolerated on the Hermitian part after symmetrization.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Asymmetry accepted (relative to the entry scale) before symmetrizing.
pub const HERMITIAN_ACCEPT: f64 = 1e-9;
/// Eigenvalues above `-PSD_TOL` are treated as zero.
pub const PSD_TOL: f64 = 1e-10;
/// Density matrices: eigenvalues may dip this far below zero.
pub const STATE_EIG_TOL: f64 = 1e-12;
/// Density matrices: |Tr ρ - 1| bound.
pub const STATE_TRACE_TOL: f64 = 1e-12;
/// States with smaller minimum eigenvalue are regularized before inversion.
pub const STRICT_POSITIVE_TOL: f64 = 1e-10;
/// Mixing weight of the maximally mixed state used by regularization.
pub const REGULARIZATION_EPS: f64 = 1e-10;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest absolute entry.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_real(a: &RMat) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| c64(x, 0.0))
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().copied().sum()
}

/// Re Tr(A B) without forming the product.
pub fn re_trace_prod(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let x = a[(i, k)] * b[(k, i)];
            acc += x.re;
        }
    }
    acc
}

/// Tr(A B) for complex A, B.
pub fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Pauli matrices and identity, handy in fixtures.
pub mod pauli {
    use super::{c64, CMat};

    pub fn identity(d: usize) -> CMat {
        CMat::identity(d, d)
    }
    pub fn x() -> CMat {
        CMat::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
    }
    pub fn y() -> CMat {
        CMat::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
    }
    pub fn z() -> CMat {
        CMat::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
    }
}

fn check_finite(a: &CMat) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// A Hermitian matrix. Construction symmetrizes the input, so the stored
/// matrix satisfies `A == A†` to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMat);

impl Hermitian {
    /// Accepts `a` if it is Hermitian up to a small relative asymmetry, then
    /// symmetrizes it.
    pub fn new(a: CMat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "expected square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        check_finite(&a)?;
        let asym = max_abs(&(&a - a.adjoint()));
        let scale = max_abs(&a).max(1.0);
        if asym > HERMITIAN_ACCEPT * scale {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::hermitian_part(&a))
    }

    /// ½(A + A†) for any square matrix.
    pub fn hermitian_part(a: &CMat) -> Self {
        let mut h = (a + a.adjoint()) * c64(0.5, 0.0);
        for i in 0..h.nrows() {
            h[(i, i)].im = 0.0;
        }
        Hermitian(h)
    }

    pub fn from_real(a: &RMat) -> Result<Self> {
        Self::new(to_complex(a))
    }

    pub fn zeros(d: usize) -> Self {
        Hermitian(CMat::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Hermitian(CMat::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        trace(&self.0).re
    }

    pub fn scale(&self, c: f64) -> Self {
        Hermitian(&self.0 * c64(c, 0.0))
    }

    /// U A U† for a unitary (or any) U.
    pub fn conjugate_by(&self, u: &CMat) -> Self {
        Self::hermitian_part(&(u * &self.0 * u.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eig(self)?.values[0])
    }
}

impl std::ops::Add for &Hermitian {
    type Output = Hermitian;
    fn add(self, rhs: &Hermitian) -> Hermitian {
        Hermitian(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &Hermitian {
    type Output = Hermitian;
    fn sub(self, rhs: &Hermitian) -> Hermitian {
        Hermitian(&self.0 - &rhs.0)
    }
}

/// A positive semidefinite, unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Hermitian);

impl DensityMatrix {
    pub fn new(a: CMat) -> Result<Self> {
        Self::from_hermitian(Hermitian::new(a)?)
    }

    pub fn from_hermitian(h: Hermitian) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr:.15} differs from 1")));
        }
        let min = h.min_eigenvalue()?;
        if min < -STATE_EIG_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(DensityMatrix(h))
    }

    /// Divides by the trace before validating.
    pub fn normalized(a: CMat) -> Result<Self> {
        let h = Hermitian::new(a)?;
        let tr = h.trace();
        if tr <= 0.0 {
            return Err(Error::InvalidState("non-positive trace".into()));
        }
        Self::from_hermitian(h.scale(1.0 / tr))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(Hermitian::identity(d).scale(1.0 / d as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_hermitian(&self) -> &Hermitian {
        &self.0
    }

    pub fn as_mat(&self) -> &CMat {
        self.0.as_mat()
    }

    pub fn conjugate_by(&self, u: &CMat) -> Result<Self> {
        DensityMatrix::normalized(self.0.conjugate_by(u).into_inner())
    }
}
