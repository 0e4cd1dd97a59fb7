//! The two-parameter Nagaoka objective and a derivative-free search over it.

use rand_distr::{Distribution, StandardNormal};

use super::{hermitian_basis, hermitian_coords, hermitian_from_coords};
use crate::error::{Error, Result};
use crate::matcore::{
    lyapunov_solve, nuclear_norm, psd_sqrt, random, re_trace_prod, CMat, ExtendedOperator, Hermitian,
};
use crate::model::ExtendedMoments;

/// Best value found by [`nagaoka_bound_search`]. This is a heuristic upper
/// estimate of the minimum, not a certified bound.
#[derive(Debug, Clone)]
pub struct NagaokaSearch {
    pub value: f64,
    pub x: Vec<Hermitian>,
    pub evaluations: usize,
}

struct Evaluator<'a> {
    em: &'a ExtendedMoments,
    sqrt_s: Vec<CMat>,
    weights: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(em: &'a ExtendedMoments) -> Result<Self> {
        if em.n != 2 {
            return Err(Error::Capability(format!(
                "Nagaoka objective requires n=2, got n={}",
                em.n
            )));
        }
        let mut sqrt_s = Vec::with_capacity(em.terms.len());
        let mut weights = Vec::with_capacity(em.terms.len());
        for t in &em.terms {
            sqrt_s.push(psd_sqrt(t.s.as_hermitian())?.into_inner());
            // PSD determinant; a singular weight switches the term off
            let det = t.w[(0, 0)] * t.w[(1, 1)] - t.w[(0, 1)] * t.w[(1, 0)];
            weights.push(t.pi * det.max(0.0).sqrt());
        }
        Ok(Self { em, sqrt_s, weights })
    }

    fn eval(&self, xs: &[Hermitian]) -> Result<f64> {
        if xs.len() != 2 || xs.iter().any(|x| x.dim() != self.em.d) {
            return Err(Error::Dimension(format!(
                "expected two {}x{} Hermitian matrices",
                self.em.d, self.em.d
            )));
        }
        let cols: Vec<CMat> = xs.iter().map(|x| x.as_mat().clone()).collect();
        let sym = ExtendedOperator::outer(&cols).sym_plus();
        let mut value = re_trace_prod(self.em.s_bar.as_mat(), sym.as_mat());
        let (x1, x2) = (xs[0].as_mat(), xs[1].as_mat());
        let comm = x1 * x2 - x2 * x1;
        for (sq, &w) in self.sqrt_s.iter().zip(&self.weights) {
            if w > 0.0 {
                // TrAbs(S K) = ‖√S K √S‖₁ for anti-Hermitian K
                value += w * nuclear_norm(&(sq * &comm * sq));
            }
        }
        for (dj, xj) in self.em.d_bar.iter().zip(xs) {
            value -= 2.0 * re_trace_prod(dj.as_mat(), xj.as_mat());
        }
        Ok(value + self.em.w_bar)
    }
}

/// `Tr(S̄ sym₊(XX†)) + Σ_m π_m √det W_m TrAbs(S_m [X₁, X₂]) − 2 Σ_j Tr(D̄_j X_j) + w̄`.
pub fn nagaoka_objective(em: &ExtendedMoments, xs: &[Hermitian]) -> Result<f64> {
    Evaluator::new(em)?.eval(xs)
}

fn descend(ev: &Evaluator, basis: &[CMat], mut z: Vec<f64>, evals: &mut usize) -> Result<(f64, Vec<f64>)> {
    let m = basis.len();
    let to_x = |z: &[f64]| {
        [
            hermitian_from_coords(&z[..m], basis),
            hermitian_from_coords(&z[m..], basis),
        ]
    };
    let mut best = ev.eval(&to_x(&z))?;
    *evals += 1;
    let mut h = 0.25 * z.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let mut sweeps = 0;
    while h > 1e-9 && sweeps < 5000 {
        sweeps += 1;
        let mut improved = false;
        for i in 0..z.len() {
            for step in [h, -h] {
                let old = z[i];
                z[i] = old + step;
                let v = ev.eval(&to_x(&z))?;
                *evals += 1;
                if v < best {
                    best = v;
                    improved = true;
                    break;
                }
                z[i] = old;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok((best, z))
}

/// Coordinatewise pattern search over `(X₁, X₂)` in the Hermitian basis,
/// started from the Bayesian SLDs and from `restarts` seeded perturbations
/// of them.
pub fn nagaoka_bound_search(em: &ExtendedMoments, restarts: usize, seed: u64) -> Result<NagaokaSearch> {
    let ev = Evaluator::new(em)?;
    let basis = hermitian_basis(em.d);
    let mut start = Vec::with_capacity(2 * basis.len());
    for dj in &em.d_b {
        let l = lyapunov_solve(em.s_b.as_hermitian(), dj)?.value;
        start.extend(hermitian_coords(l.as_mat(), &basis));
    }
    let mut evaluations = 0;
    let (mut best, mut best_z) = descend(&ev, &basis, start.clone(), &mut evaluations)?;
    let mut rng = random::seeded(seed);
    let scale = 0.3 * start.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    for _ in 0..restarts {
        let z: Vec<f64> = start
            .iter()
            .map(|s| {
                let g: f64 = StandardNormal.sample(&mut rng);
                s + scale * g
            })
            .collect();
        let (v, z) = descend(&ev, &basis, z, &mut evaluations)?;
        if v < best {
            best = v;
            best_z = z;
        }
    }
    let m = basis.len();
    Ok(NagaokaSearch {
        value: best,
        x: vec![
            hermitian_from_coords(&best_z[..m], &basis),
            hermitian_from_coords(&best_z[m..], &basis),
        ],
        evaluations,
    })
}
