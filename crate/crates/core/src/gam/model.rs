use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::binning::BinnedDataset;
use super::loss;
use super::support::Support;
use crate::error::{Error, Result};

/// A binned GAM: intercept plus one coefficient per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct GamModel {
    intercept: f64,
    omega: Vec<f64>,
    support: Support,
}

impl GamModel {
    pub fn new(intercept: f64, omega: Vec<f64>, support: Support) -> Result<Self> {
        let m: usize = support.bins_per_feature().iter().sum();
        if omega.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: omega.len(),
            });
        }
        let map = support.column_map();
        for k in 1..m {
            if map[k] == map[k - 1] && omega[k] != omega[k - 1] {
                return Err(Error::Support(format!(
                    "bins {} and {k} share a run but have different coefficients",
                    k - 1
                )));
            }
        }
        Ok(Self {
            intercept,
            omega,
            support,
        })
    }

    /// Model with every bin in its own run.
    pub fn with_full_support(intercept: f64, omega: Vec<f64>, bins_per_feature: &[usize]) -> Result<Self> {
        Self::new(intercept, omega, Support::full(bins_per_feature))
    }

    /// Builds a model from a reduced parameter vector (intercept, one value
    /// per run).
    pub fn from_reduced(reduced: &[f64], support: Support) -> Result<Self> {
        let full = support.expand(reduced)?;
        Self::new(full[0], full[1..].to_vec(), support)
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    /// Intercept followed by the bin coefficients.
    pub fn params(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.omega.len() + 1);
        w.push(self.intercept);
        w.extend_from_slice(&self.omega);
        w
    }

    /// Intercept followed by one coefficient per support run.
    pub fn reduced_params(&self) -> Vec<f64> {
        self.support
            .restrict(&self.params())
            .expect("support matches omega by construction")
    }

    fn check(&self, data: &BinnedDataset) -> Result<()> {
        if data.bins_per_feature() != self.support.bins_per_feature() {
            return Err(Error::DimensionMismatch {
                expected: data.m(),
                got: self.omega.len(),
            });
        }
        Ok(())
    }

    pub fn predict_proba(&self, data: &BinnedDataset) -> Result<Vec<f64>> {
        self.check(data)?;
        let w = self.params();
        Ok((0..data.n())
            .map(|i| crate::numeric::sigmoid(data.margin(&w, i)))
            .collect())
    }
}

/// Components of the penalized objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub classification: f64,
    pub l2: f64,
    pub steps: usize,
    pub total: f64,
}

/// Mean logistic loss.
pub fn classification_loss(model: &GamModel, data: &BinnedDataset) -> Result<f64> {
    model.check(data)?;
    Ok(loss::classification_loss_at(data, &model.params()))
}

/// `sum_j sum_k pi_jk * w_jk^2`; the intercept is not penalized.
pub fn penalty_l2(model: &GamModel, data: &BinnedDataset) -> Result<f64> {
    model.check(data)?;
    Ok(loss::l2_penalty_at(data, &model.params()))
}

/// Number of adjacent within-feature bin pairs with different coefficients.
pub fn penalty_steps(model: &GamModel) -> usize {
    let mut offset = 0;
    let mut steps = 0;
    for b in model.support.bins_per_feature() {
        let w = &model.omega[offset..offset + b];
        steps += w.windows(2).filter(|p| p[0] != p[1]).count();
        offset += b;
    }
    steps
}

pub fn total_loss(
    model: &GamModel,
    data: &BinnedDataset,
    lambda2: f64,
    lambda_s: f64,
) -> Result<LossBreakdown> {
    if lambda2 < 0.0 || lambda_s < 0.0 {
        return Err(Error::Config("penalty weights must be non-negative".into()));
    }
    let classification = classification_loss(model, data)?;
    let l2 = penalty_l2(model, data)?;
    let steps = penalty_steps(model);
    Ok(LossBreakdown {
        classification,
        l2,
        steps,
        total: classification + lambda2 * l2 + lambda_s * steps as f64,
    })
}

/// Gradient of `L_c + lambda2 * L_2` with respect to (intercept, omega).
pub fn gradient(model: &GamModel, data: &BinnedDataset, lambda2: f64) -> Result<Vec<f64>> {
    model.check(data)?;
    let mut g = vec![0.0; data.dim()];
    loss::value_and_gradient_at(data, &model.params(), lambda2, &mut g);
    Ok(g)
}

pub fn hessian(model: &GamModel, data: &BinnedDataset, lambda2: f64) -> Result<DMatrix<f64>> {
    model.check(data)?;
    Ok(loss::hessian_at(data, &model.params(), lambda2))
}
