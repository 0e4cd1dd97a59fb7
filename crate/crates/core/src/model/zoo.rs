use nalgebra::DVector;

use super::{GridPoint, StatisticalModel, WeightSpec};
use crate::error::{Error, Result};
use crate::matcore::{c64, pauli, random, DensityMatrix, Hermitian, RMat};

/// ½(I + Σ_k r_k σ_k) for a Bloch vector `r` with `|r| ≤ 1`.
fn qubit_state(r: [f64; 3]) -> Result<DensityMatrix> {
    let norm2 = r.iter().map(|x| x * x).sum::<f64>();
    if norm2 > 1.0 + 1e-12 {
        return Err(Error::InvalidModel(format!(
            "Bloch vector of length {:.6} leaves the state space",
            norm2.sqrt()
        )));
    }
    let m =
        (pauli::identity(2) + pauli::x() * c64(r[0], 0.0) + pauli::y() * c64(r[1], 0.0) + pauli::z() * c64(r[2], 0.0))
            * c64(0.5, 0.0);
    DensityMatrix::new(m)
}

fn param(params: &[f64], i: usize, name: &str) -> Result<f64> {
    params
        .get(i)
        .copied()
        .ok_or_else(|| Error::InvalidModel(format!("missing parameter '{name}'")))
}

fn count_param(params: &[f64], i: usize, name: &str) -> Result<usize> {
    let x = param(params, i, name)?;
    if x < 0.0 || x.fract() != 0.0 {
        return Err(Error::InvalidModel(format!("parameter '{name}' must be a count")));
    }
    Ok(x as usize)
}

fn binary_points(a: f64, r: f64, n: usize) -> Result<Vec<GridPoint>> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidModel(format!("contrast r = {r} must lie in [0, 1]")));
    }
    [1.0, -1.0]
        .iter()
        .map(|&sign| {
            Ok(GridPoint::new(
                DVector::from_element(n, sign * a),
                0.5,
                qubit_state([0.0, 0.0, sign * r])?,
            ))
        })
        .collect()
}

/// Named model generators.
///
/// - `classical_binary [a, r]`: θ = ±a with prior ½ each, states
///   ½(I ± rσ_z), W = 1.
/// - `correlated_pair [a, r]`: the same two states carrying the perfectly
///   correlated parameter pair (θ, θ), W = I₂.
/// - `qubit_xy [b, rings?]`: states ½(I + θ₁σ_x + θ₂σ_y) on `grid_size`
///   equally spaced angles per ring; ring `k` of `rings` (default 1) has
///   radius `b·k/rings` and prior mass proportional to its radius. W = I₂.
/// - `qubit_z_line [h?]`: states ½(I + θσ_z) on `grid_size` equally spaced
///   points of `[-h, h]` (default h = 0.5), uniform prior, derivative σ_z/2
///   attached and a zero prior score (flat-prior proxy). W = 1.
/// - `random_model [n, d, seed]`: `grid_size` points (4 when zero) with
///   θ ∈ [-1, 1]ⁿ, random prior masses and random full-rank states. W = I.
/// - `point_mass [n, d, seed]`: a single random parameter and state. W = I.
pub fn model_zoo(name: &str, params: &[f64], grid_size: usize) -> Result<StatisticalModel> {
    match name {
        "classical_binary" => {
            let (a, r) = (param(params, 0, "a")?, param(params, 1, "r")?);
            StatisticalModel::new(binary_points(a, r, 1)?, WeightSpec::Constant(RMat::identity(1, 1)))
        }
        "correlated_pair" => {
            let (a, r) = (param(params, 0, "a")?, param(params, 1, "r")?);
            StatisticalModel::new(binary_points(a, r, 2)?, WeightSpec::Constant(RMat::identity(2, 2)))
        }
        "qubit_xy" => {
            let b = param(params, 0, "b")?;
            let rings = if params.len() > 1 {
                count_param(params, 1, "rings")?
            } else {
                1
            };
            if grid_size == 0 || rings == 0 {
                return Err(Error::InvalidModel("qubit_xy needs a positive grid".into()));
            }
            let norm: f64 = (1..=rings).map(|k| k as f64).sum::<f64>() * grid_size as f64;
            let mut points = Vec::new();
            for k in 1..=rings {
                let radius = b * k as f64 / rings as f64;
                for j in 0..grid_size {
                    let phi = 2.0 * std::f64::consts::PI * j as f64 / grid_size as f64;
                    let (s, c) = phi.sin_cos();
                    // exact zeros on the axes keep symmetric grids symmetric
                    let (x, y) = (snap(radius * c), snap(radius * s));
                    points.push(GridPoint::new(
                        DVector::from_vec(vec![x, y]),
                        k as f64 / norm,
                        qubit_state([x, y, 0.0])?,
                    ));
                }
            }
            StatisticalModel::new(points, WeightSpec::Constant(RMat::identity(2, 2)))
        }
        "qubit_z_line" => {
            let h = if params.is_empty() { 0.5 } else { param(params, 0, "h")? };
            if grid_size == 0 {
                return Err(Error::InvalidModel("qubit_z_line needs a positive grid".into()));
            }
            let dz = Hermitian::new(pauli::z() * c64(0.5, 0.0))?;
            let points = (0..grid_size)
                .map(|k| {
                    let theta = if grid_size == 1 {
                        0.0
                    } else {
                        -h + 2.0 * h * k as f64 / (grid_size - 1) as f64
                    };
                    let mut p = GridPoint::new(
                        DVector::from_element(1, theta),
                        1.0 / grid_size as f64,
                        qubit_state([0.0, 0.0, theta])?,
                    );
                    p.derivatives = Some(vec![dz.clone()]);
                    p.score = Some(DVector::zeros(1));
                    Ok(p)
                })
                .collect::<Result<Vec<_>>>()?;
            StatisticalModel::new(points, WeightSpec::Constant(RMat::identity(1, 1)))
        }
        "random_model" => {
            let n = count_param(params, 0, "n")?;
            let d = count_param(params, 1, "d")?;
            let seed = count_param(params, 2, "seed")? as u64;
            let size = if grid_size == 0 { 4 } else { grid_size };
            random_model(n, d, seed, size)
        }
        "point_mass" => {
            let n = count_param(params, 0, "n")?;
            let d = count_param(params, 1, "d")?;
            let seed = count_param(params, 2, "seed")? as u64;
            let mut rng = random::seeded(seed);
            let theta = DVector::from_fn(n, |_, _| random::uniform(&mut rng, -1.0, 1.0));
            let state = random::density(&mut rng, d, 0.2);
            StatisticalModel::point_mass(theta, state, RMat::identity(n, n))
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

fn snap(x: f64) -> f64 {
    if x.abs() < 1e-15 {
        0.0
    } else {
        x
    }
}

fn random_model(n: usize, d: usize, seed: u64, size: usize) -> Result<StatisticalModel> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidModel("random_model needs n, d >= 1".into()));
    }
    let mut rng = random::seeded(seed);
    let raw: Vec<f64> = (0..size).map(|_| random::uniform(&mut rng, 0.5, 1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // absorb the rounding of the normalization in the last mass
    let head: f64 = weights[..size - 1].iter().sum();
    weights[size - 1] = 1.0 - head;
    let points = weights
        .into_iter()
        .map(|w| {
            let theta = DVector::from_fn(n, |_, _| random::uniform(&mut rng, -1.0, 1.0));
            GridPoint::new(theta, w, random::density(&mut rng, d, 0.2))
        })
        .collect();
    StatisticalModel::new(points, WeightSpec::Constant(RMat::identity(n, n)))
}
