//! Seeded random matrices for model generators and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{c64, CMat, DensityMatrix, Hermitian, RMat};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
pub fn unitary<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let qr = ginibre(rng, d, d).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 {
            rkk / rkk.norm()
        } else {
            c64(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, k)] *= phase;
        }
    }
    q
}

pub fn hermitian<R: Rng>(rng: &mut R, d: usize) -> Hermitian {
    Hermitian::hermitian_part(&ginibre(rng, d, d))
}

/// Full-rank random state: a Ginibre-Wishart state mixed with `mix · I/d`.
pub fn density<R: Rng>(rng: &mut R, d: usize, mix: f64) -> DensityMatrix {
    let g = ginibre(rng, d, d);
    let w = &g * g.adjoint();
    let tr: f64 = w.diagonal().iter().map(|z| z.re).sum();
    let mixed = w * c64((1.0 - mix) / tr, 0.0) + CMat::identity(d, d) * c64(mix / d as f64, 0.0);
    DensityMatrix::normalized(mixed).expect("Wishart mixture is a valid state")
}

/// Random real symmetric positive definite matrix with eigenvalues in
/// roughly `[floor, floor + O(1)]`.
pub fn spd_real<R: Rng>(rng: &mut R, n: usize, floor: f64) -> RMat {
    let a = RMat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut w = &a * a.transpose() / n as f64 + RMat::identity(n, n) * floor;
    w = (&w + w.transpose()) * 0.5;
    w
}

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
