//! JSON documents for fitted models and ellipsoids.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::gam::{BinningSpec, GamModel, Support};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub feature_names: Vec<String>,
    pub bin_edges: Vec<Vec<f64>>,
    pub omega0: f64,
    /// One coefficient per bin, features concatenated.
    pub omega: Vec<f64>,
    pub lambda2: f64,
    pub lambda_s: f64,
    pub support_runs: Vec<Vec<(usize, usize)>>,
    /// Bin weights of the training data, for importance queries.
    #[serde(default)]
    pub pi: Vec<f64>,
    /// Path of the training data, for commands that need the loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

/// One constant piece of a shape function: value on `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    pub feature: String,
    pub steps: Vec<Step>,
}

impl ModelDoc {
    pub fn new(
        model: &GamModel,
        spec: &BinningSpec,
        feature_names: &[String],
        lambda2: f64,
        lambda_s: f64,
        pi: &[f64],
    ) -> Result<Self> {
        if spec.bins_per_feature() != model.support().bins_per_feature() || feature_names.len() != spec.n_features() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_features(),
                got: model.support().n_features(),
            });
        }
        Ok(Self {
            feature_names: feature_names.to_vec(),
            bin_edges: spec.edges().to_vec(),
            omega0: model.intercept(),
            omega: model.omega().to_vec(),
            lambda2,
            lambda_s,
            support_runs: model.support().runs().to_vec(),
            pi: pi.to_vec(),
            dataset: None,
        })
    }

    pub fn support(&self) -> Result<Support> {
        Support::new(self.support_runs.clone())
    }

    pub fn spec(&self) -> Result<BinningSpec> {
        BinningSpec::new(self.bin_edges.clone())
    }

    /// Validates the document and rebuilds the model.
    pub fn model(&self) -> Result<GamModel> {
        let spec = self.spec()?;
        let support = self.support()?;
        support.check_bins(&spec.bins_per_feature())?;
        if self.feature_names.len() != spec.n_features() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_features(),
                got: self.feature_names.len(),
            });
        }
        if !self.pi.is_empty() && self.pi.len() != self.omega.len() {
            return Err(Error::DimensionMismatch {
                expected: self.omega.len(),
                got: self.pi.len(),
            });
        }
        GamModel::new(self.omega0, self.omega.clone(), support)
    }

    /// Intercept followed by one coefficient per support run.
    pub fn reduced_params(&self) -> Result<Vec<f64>> {
        Ok(self.model()?.reduced_params())
    }

    /// Bin weights summed over each run, in ellipsoid coordinate order
    /// (intercept excluded).
    pub fn run_weights(&self) -> Result<Vec<f64>> {
        let support = self.support()?;
        if self.pi.len() != support.column_map().len() {
            return Err(Error::Config("model document carries no bin weights".into()));
        }
        let mut w = vec![0.0; support.size()];
        for (c, &r) in support.column_map().iter().enumerate() {
            w[r] += self.pi[c];
        }
        Ok(w)
    }

    /// Shape functions with adjacent equal bins merged, for plotting.
    pub fn shape_functions(&self) -> Result<Vec<ShapeFunction>> {
        self.model()?;
        Ok(self.steps_for(&self.omega))
    }

    /// Step lists of an arbitrary reduced parameter vector under this
    /// model's support and edges.
    pub fn shape_functions_of(&self, reduced: &[f64]) -> Result<Vec<ShapeFunction>> {
        let full = self.support()?.expand(reduced)?;
        Ok(self.steps_for(&full[1..]))
    }

    fn steps_for(&self, omega: &[f64]) -> Vec<ShapeFunction> {
        let mut offset = 0;
        self.support_runs
            .iter()
            .enumerate()
            .map(|(j, runs)| {
                let edges = &self.bin_edges[j];
                let steps = runs
                    .iter()
                    .map(|&(a, b)| Step {
                        lo: edges[a],
                        hi: edges[b + 1],
                        value: omega[offset + a],
                    })
                    .collect();
                offset += edges.len() - 1;
                ShapeFunction {
                    feature: self.feature_names[j].clone(),
                    steps,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidDoc {
    pub dim: usize,
    pub center: Vec<f64>,
    /// Row-major `dim x dim`.
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub theta: f64,
    pub lambda2: f64,
    pub lambda_s: f64,
    pub loss_at_center: f64,
}

impl EllipsoidDoc {
    pub fn new(e: &Ellipsoid, theta: f64, lambda2: f64, lambda_s: f64, loss_at_center: f64) -> Self {
        let d = e.dim();
        let q = e.q();
        Self {
            dim: d,
            center: e.center().as_slice().to_vec(),
            q: (0..d * d).map(|k| q[(k / d, k % d)]).collect(),
            theta,
            lambda2,
            lambda_s,
            loss_at_center,
        }
    }

    pub fn ellipsoid(&self) -> Result<Ellipsoid> {
        if self.center.len() != self.dim || self.q.len() != self.dim * self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: self.center.len(),
            });
        }
        Ellipsoid::new(
            DMatrix::from_row_slice(self.dim, self.dim, &self.q),
            DVector::from_column_slice(&self.center),
        )
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = to_json(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let s = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&s)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> ModelDoc {
        let spec = BinningSpec::new(vec![vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 5.0, 10.0]]).unwrap();
        let support = Support::new(vec![vec![(0, 1), (2, 2)], vec![(0, 0), (1, 1)]]).unwrap();
        let model = GamModel::new(0.5, vec![1.0, 1.0, -2.0, 0.3, 0.4], support).unwrap();
        ModelDoc::new(&model, &spec, &["a".into(), "b".into()], 0.001, 0.001, &[0.2, 0.3, 0.5, 0.6, 0.4]).unwrap()
    }

    #[test]
    fn model_round_trip() {
        let d = doc();
        let back: ModelDoc = serde_json::from_str(&to_json(&d).unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.model().unwrap(), d.model().unwrap());
        let v: serde_json::Value = serde_json::from_str(&to_json(&d).unwrap()).unwrap();
        for key in ["feature_names", "bin_edges", "omega0", "omega", "lambda2", "lambda_s", "support_runs"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn floats_survive_text() {
        // edges are compared with <= after reloading, so one ulp matters
        let mut d = doc();
        d.bin_edges[0] = vec![0.0026347789299661093, 0.5, 0.9, 0.9960956719568137];
        d.omega[0] = 0.1 + 0.2;
        let back: ModelDoc = serde_json::from_str(&to_json(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn steps_merge_runs() {
        let s = doc().shape_functions().unwrap();
        assert_eq!(s[0].steps.len(), 2);
        assert_eq!(s[0].steps[0], Step { lo: 0.0, hi: 2.0, value: 1.0 });
        assert_eq!(s[1].steps[1], Step { lo: 5.0, hi: 10.0, value: 0.4 });
        assert_eq!(doc().run_weights().unwrap(), vec![0.5, 0.5, 0.6, 0.4]);
    }

    #[test]
    fn inconsistent_model_rejected() {
        let mut d = doc();
        d.omega[1] = 7.0;
        assert!(d.model().is_err());
        let mut d = doc();
        d.bin_edges[0].pop();
        assert!(d.model().is_err());
    }

    #[test]
    fn ellipsoid_round_trip() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let e = Ellipsoid::new(q, DVector::from_column_slice(&[1.0, -1.0])).unwrap();
        let d = EllipsoidDoc::new(&e, 0.6, 0.001, 0.001, 0.59);
        let s = to_json(&d).unwrap();
        assert!(s.contains("\"Q\""));
        let back: EllipsoidDoc = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.ellipsoid().unwrap().q(), e.q());
        let mut bad = d.clone();
        bad.q.pop();
        assert!(bad.ellipsoid().is_err());
    }
}
