use super::{c64, max_abs, trace, CMat, Hermitian, RMat, C64};
use crate::error::{Error, Result};

/// An operator on `C^n ⊗ H` stored as an `n × n` grid of `d × d` blocks.
/// Block `(j, k)` occupies rows `j*d..(j+1)*d` and columns `k*d..(k+1)*d`,
/// matching the Kronecker layout of `W ⊗ S`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedOperator {
    n: usize,
    d: usize,
    mat: CMat,
}

/// `W ⊗ S` for a real `n × n` matrix `W` and complex `d × d` matrix `S`.
pub fn kron_real(w: &RMat, s: &CMat) -> CMat {
    let (n, d) = (w.nrows(), s.nrows());
    let mut out = CMat::zeros(n * d, n * d);
    for j in 0..n {
        for k in 0..n {
            let wjk = w[(j, k)];
            if wjk == 0.0 {
                continue;
            }
            out.view_mut((j * d, k * d), (d, d)).copy_from(&(s * c64(wjk, 0.0)));
        }
    }
    out
}

impl ExtendedOperator {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            mat: CMat::zeros(n * d, n * d),
        }
    }

    pub fn from_matrix(n: usize, d: usize, mat: CMat) -> Result<Self> {
        if mat.nrows() != n * d || mat.ncols() != n * d {
            return Err(Error::Dimension(format!(
                "expected {}x{} operator for n={n}, d={d}",
                n * d,
                n * d
            )));
        }
        Ok(Self { n, d, mat })
    }

    /// Builds the operator from an `n × n` grid of blocks.
    pub fn from_blocks(blocks: &[Vec<CMat>]) -> Result<Self> {
        let n = blocks.len();
        if n == 0 || blocks.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("block grid must be square".into()));
        }
        let d = blocks[0][0].nrows();
        let mut op = Self::zeros(n, d);
        for (j, row) in blocks.iter().enumerate() {
            for (k, b) in row.iter().enumerate() {
                if b.shape() != (d, d) {
                    return Err(Error::Dimension("blocks must all be d x d".into()));
                }
                op.set_block(j, k, b);
            }
        }
        Ok(op)
    }

    /// `W ⊗ S`.
    pub fn kron(w: &RMat, s: &CMat) -> Self {
        Self {
            n: w.nrows(),
            d: s.nrows(),
            mat: kron_real(w, s),
        }
    }

    pub fn nblocks(&self) -> usize {
        self.n
    }

    pub fn blockdim(&self) -> usize {
        self.d
    }

    pub fn as_mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn block(&self, j: usize, k: usize) -> CMat {
        let d = self.d;
        self.mat.view((j * d, k * d), (d, d)).into_owned()
    }

    pub fn set_block(&mut self, j: usize, k: usize, b: &CMat) {
        let d = self.d;
        self.mat.view_mut((j * d, k * d), (d, d)).copy_from(b);
    }

    pub fn trace(&self) -> C64 {
        trace(&self.mat)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs(&(&self.mat - self.mat.adjoint())) <= tol
    }

    pub fn is_block_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|j| (j + 1..self.n).all(|k| max_abs(&(self.block(j, k) - self.block(k, j))) <= tol))
    }

    pub fn to_hermitian(&self) -> Result<Hermitian> {
        Hermitian::new(self.mat.clone())
    }

    /// `n × n` matrix of block traces (partial trace over `H`).
    pub fn partial_trace_h(&self) -> CMat {
        let d = self.d;
        CMat::from_fn(self.n, self.n, |j, k| {
            (0..d).map(|a| self.mat[(j * d + a, k * d + a)]).sum()
        })
    }

    /// Block transposition over the parameter index: block `(j,k)` becomes
    /// block `(k,j)`. Entries are moved, never recomputed.
    pub fn partial_transpose_1(&self) -> Self {
        let mut out = Self::zeros(self.n, self.d);
        for j in 0..self.n {
            for k in 0..self.n {
                out.set_block(k, j, &self.block(j, k));
            }
        }
        out
    }

    /// `(½(A + A^{T₁}), ½(A − A^{T₁}))`. Diagonal blocks go entirely to the
    /// symmetric part.
    pub fn sym_split(&self) -> (Self, Self) {
        let mut plus = self.clone();
        let mut minus = Self::zeros(self.n, self.d);
        for j in 0..self.n {
            for k in (j + 1)..self.n {
                let a = self.block(j, k);
                let b = self.block(k, j);
                let s = (&a + &b) * c64(0.5, 0.0);
                plus.set_block(j, k, &s);
                plus.set_block(k, j, &s);
                minus.set_block(j, k, &(&a - &s));
                minus.set_block(k, j, &(&b - &s));
            }
        }
        (plus, minus)
    }

    pub fn sym_plus(&self) -> Self {
        self.sym_split().0
    }

    pub fn sym_minus(&self) -> Self {
        self.sym_split().1
    }

    /// `U A U†` for `U` acting on the full extended space.
    pub fn conjugate(&self, u: &CMat) -> Self {
        Self {
            n: self.n,
            d: self.d,
            mat: u * &self.mat * u.adjoint(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            d: self.d,
            mat: &self.mat + &other.mat,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            d: self.d,
            mat: &self.mat * c64(c, 0.0),
        }
    }

    /// Block outer product `X X†` of a block column `(X_1, …, X_n)`.
    pub fn outer(xs: &[CMat]) -> Self {
        let n = xs.len();
        let d = xs[0].nrows();
        let mut out = Self::zeros(n, d);
        for j in 0..n {
            for k in 0..n {
                out.set_block(j, k, &(&xs[j] * xs[k].adjoint()));
            }
        }
        out
    }
}
