//! Logistic loss, weighted ridge penalty and their exact derivatives on a
//! binned design. Parameter vectors are `[intercept, w_col0, w_col1, ...]`.

use nalgebra::{DMatrix, DVector};

use super::binning::BinnedDataset;
use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, sigmoid, softplus};

#[inline]
fn sample_loss(z: f64, y: u8) -> f64 {
    if y == 1 {
        softplus(-z)
    } else {
        softplus(z)
    }
}

pub fn classification_loss_at(data: &BinnedDataset, w: &[f64]) -> f64 {
    let labels = data.labels();
    pairwise_sum(data.n(), &|i| sample_loss(data.margin(w, i), labels[i])) / data.n() as f64
}

pub fn l2_penalty_at(data: &BinnedDataset, w: &[f64]) -> f64 {
    data.pi()
        .iter()
        .zip(&w[1..])
        .map(|(pi, v)| pi * v * v)
        .sum()
}

/// Value of `L_c + lambda2 * L_2`; the gradient is written into `grad`.
pub fn value_and_gradient_at(data: &BinnedDataset, w: &[f64], lambda2: f64, grad: &mut [f64]) -> f64 {
    grad.fill(0.0);
    let labels = data.labels();
    let inv_n = 1.0 / data.n() as f64;
    for i in 0..data.n() {
        let z = data.margin(w, i);
        let r = (sigmoid(z) - f64::from(labels[i])) * inv_n;
        grad[0] += r;
        for &c in data.row(i) {
            grad[c as usize + 1] += r;
        }
    }
    for (c, pi) in data.pi().iter().enumerate() {
        grad[c + 1] += 2.0 * lambda2 * pi * w[c + 1];
    }
    classification_loss_at(data, w) + lambda2 * l2_penalty_at(data, w)
}

/// `(1/n) X^T S X + 2 lambda2 diag(0, pi)` with `S = diag(p_i (1 - p_i))`.
pub fn hessian_at(data: &BinnedDataset, w: &[f64], lambda2: f64) -> DMatrix<f64> {
    let d = data.dim();
    let mut h = DMatrix::<f64>::zeros(d, d);
    let inv_n = 1.0 / data.n() as f64;
    let mut idx = Vec::with_capacity(data.p() + 1);
    for i in 0..data.n() {
        let p = sigmoid(data.margin(w, i));
        let s = p * (1.0 - p) * inv_n;
        idx.clear();
        idx.push(0usize);
        idx.extend(data.row(i).iter().map(|&c| c as usize + 1));
        for (a, &ia) in idx.iter().enumerate() {
            for &ib in &idx[a..] {
                h[(ia.min(ib), ia.max(ib))] += s;
            }
        }
    }
    for (c, pi) in data.pi().iter().enumerate() {
        h[(c + 1, c + 1)] += 2.0 * lambda2 * pi;
    }
    h.fill_lower_triangle_with_upper_triangle();
    h
}

/// A twice-differentiable loss over parameter vectors of fixed length.
pub trait SmoothLoss: Sync {
    fn dim(&self) -> usize;

    fn value(&self, w: &[f64]) -> f64;

    /// Returns the value and writes the gradient into `grad`.
    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64;

    fn hessian(&self, w: &[f64]) -> DMatrix<f64>;
}

/// The total GAM loss for a fixed support, evaluated on a design whose
/// columns are the support runs. The step count is constant under a fixed
/// support, so `lambda_s * L_s` enters as an offset.
#[derive(Debug, Clone)]
pub struct GamObjective {
    data: BinnedDataset,
    lambda2: f64,
    steps_penalty: f64,
}

impl GamObjective {
    pub fn new(data: BinnedDataset, lambda2: f64, lambda_s: f64, steps: usize) -> Result<Self> {
        if lambda2 < 0.0 || lambda_s < 0.0 {
            return Err(Error::Config("penalty weights must be non-negative".into()));
        }
        Ok(Self {
            data,
            lambda2,
            steps_penalty: lambda_s * steps as f64,
        })
    }

    /// Objective for `support` over the full-bin design `data`.
    pub fn for_support(
        data: &BinnedDataset,
        support: &super::Support,
        lambda2: f64,
        lambda_s: f64,
    ) -> Result<Self> {
        Self::new(data.merge(support)?, lambda2, lambda_s, support.steps())
    }

    pub fn data(&self) -> &BinnedDataset {
        &self.data
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// The constant `lambda_s * L_s` offset.
    pub fn steps_penalty(&self) -> f64 {
        self.steps_penalty
    }
}

impl SmoothLoss for GamObjective {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, w: &[f64]) -> f64 {
        classification_loss_at(&self.data, w) + self.lambda2 * l2_penalty_at(&self.data, w) + self.steps_penalty
    }

    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        value_and_gradient_at(&self.data, w, self.lambda2, grad) + self.steps_penalty
    }

    fn hessian(&self, w: &[f64]) -> DMatrix<f64> {
        hessian_at(&self.data, w, self.lambda2)
    }
}

/// `minimum + (w - center)^T M (w - center)`; its sublevel sets are exact
/// ellipsoids, which makes it the reference instance for the set fitters.
#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    minimum: f64,
    center: DVector<f64>,
    m: DMatrix<f64>,
}

impl QuadraticLoss {
    pub fn new(minimum: f64, center: DVector<f64>, m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != center.len() || m.ncols() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                got: m.nrows(),
            });
        }
        Ok(Self { minimum, center, m })
    }

    pub fn minimum(&self) -> f64 {
        self.minimum
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

impl SmoothLoss for QuadraticLoss {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let r = DVector::from_column_slice(w) - &self.center;
        self.minimum + r.dot(&(&self.m * &r))
    }

    fn value_and_gradient(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let r = DVector::from_column_slice(w) - &self.center;
        let mr = &self.m * &r;
        for (g, v) in grad.iter_mut().zip(mr.iter()) {
            *g = 2.0 * v;
        }
        self.minimum + r.dot(&mr)
    }

    fn hessian(&self, _w: &[f64]) -> DMatrix<f64> {
        &self.m * 2.0
    }
}
