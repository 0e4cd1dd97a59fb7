//! JSON model files: row-major matrices with `[re, im]` complex entries.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{GridPoint, StatisticalModel, WeightSpec};
use crate::error::{Error, Result};
use crate::matcore::{c64, CMat, DensityMatrix, Hermitian, RMat};

type ComplexRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFile {
    Constant(Vec<Vec<f64>>),
    PerPoint(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointFile {
    pub theta: Vec<f64>,
    pub weight: f64,
    pub rho: ComplexRows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drho: Option<Vec<ComplexRows>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub d: usize,
    pub weight: WeightFile,
    pub points: Vec<PointFile>,
}

fn real_matrix(rows: &[Vec<f64>], n: usize) -> Result<RMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidModel(format!("weight matrix must be {n}x{n}")));
    }
    Ok(RMat::from_fn(n, n, |i, j| rows[i][j]))
}

fn complex_matrix(rows: &ComplexRows, d: usize, what: &str) -> Result<CMat> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidModel(format!("{what} must be {d}x{d}")));
    }
    Ok(CMat::from_fn(d, d, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

fn real_rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn complex_rows(m: &CMat) -> ComplexRows {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

impl ModelFile {
    pub fn from_model(model: &StatisticalModel) -> Self {
        let weight = match model.weight_spec() {
            WeightSpec::Constant(w) => WeightFile::Constant(real_rows(w)),
            WeightSpec::PerPoint(ws) => WeightFile::PerPoint(ws.iter().map(real_rows).collect()),
        };
        let points = model
            .points()
            .iter()
            .map(|p| PointFile {
                theta: p.theta.iter().copied().collect(),
                weight: p.weight,
                rho: complex_rows(p.state.as_mat()),
                drho: p
                    .derivatives
                    .as_ref()
                    .map(|ds| ds.iter().map(|h| complex_rows(h.as_mat())).collect()),
                score: p.score.as_ref().map(|s| s.iter().copied().collect()),
            })
            .collect();
        Self {
            n: model.n(),
            d: model.d(),
            weight,
            points,
        }
    }

    pub fn to_model(&self) -> Result<StatisticalModel> {
        let (n, d) = (self.n, self.d);
        let weight = match &self.weight {
            WeightFile::Constant(w) => WeightSpec::Constant(real_matrix(w, n)?),
            WeightFile::PerPoint(ws) => {
                WeightSpec::PerPoint(ws.iter().map(|w| real_matrix(w, n)).collect::<Result<_>>()?)
            }
        };
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.theta.len() != n {
                    return Err(Error::InvalidModel(format!("point {i}: theta must have {n} entries")));
                }
                let state = DensityMatrix::new(complex_matrix(&p.rho, d, "rho")?)
                    .map_err(|e| Error::InvalidModel(format!("point {i}: {e}")))?;
                let mut gp = GridPoint::new(DVector::from_vec(p.theta.clone()), p.weight, state);
                if let Some(ds) = &p.drho {
                    if ds.len() != n {
                        return Err(Error::InvalidModel(format!("point {i}: drho needs {n} matrices")));
                    }
                    gp.derivatives = Some(
                        ds.iter()
                            .map(|m| Hermitian::new(complex_matrix(m, d, "drho")?))
                            .collect::<Result<_>>()?,
                    );
                }
                gp.score = p.score.as_ref().map(|s| DVector::from_vec(s.clone()));
                Ok(gp)
            })
            .collect::<Result<Vec<_>>>()?;
        let model = StatisticalModel::new(points, weight)?;
        if model.d() != d {
            return Err(Error::InvalidModel("declared d differs from state dimension".into()));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files serialize")
    }

    /// Parses and validates a model. Syntax errors carry line and column.
    pub fn parse(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl StatisticalModel {
    pub fn to_json(&self) -> String {
        ModelFile::from_model(self).to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        ModelFile::parse(text)
            .map_err(|e| Error::InvalidModel(e.to_string()))?
            .to_model()
    }
}
