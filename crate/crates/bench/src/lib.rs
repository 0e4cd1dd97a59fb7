//! Fixtures shared by the benchmarks.

use qbayes_core::matcore::random;
use qbayes_core::model::{build_extended_moments, model_zoo, ExtendedMoments, StatisticalModel, WeightSpec};

/// Random model with a random positive definite weight matrix.
pub fn weighted_model(n: usize, d: usize, points: usize, seed: u64) -> StatisticalModel {
    let base = model_zoo("random_model", &[n as f64, d as f64, seed as f64], points).expect("zoo model");
    let mut rng = random::seeded(seed);
    base.with_weight(WeightSpec::Constant(random::spd_real(&mut rng, n, 0.2)))
        .expect("weight")
}

pub fn extended(model: &StatisticalModel) -> ExtendedMoments {
    build_extended_moments(model).expect("moments")
}
