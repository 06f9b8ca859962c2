use nalgebra::{DMatrix, DVector};

use super::binning::BinnedDataset;
use super::loss::{value_and_gradient_at, GamObjective, SmoothLoss};
use super::model::GamModel;
use super::support::Support;
use crate::error::{Error, Result};
use crate::numeric::inf_norm;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 100;

/// Solves `H x = g`, adding a growing ridge when `H` is not numerically
/// positive definite (e.g. the intercept aliasing a feature block at
/// `lambda2 = 0`).
pub(crate) fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = h.clone().cholesky() {
        return ch.solve(g);
    }
    let scale = h.diagonal().amax().max(1e-300);
    let mut ridge = 1e-12 * scale;
    loop {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += ridge;
        }
        if let Some(ch) = hr.cholesky() {
            return ch.solve(g);
        }
        ridge *= 10.0;
    }
}

/// Damped Newton on any smooth convex loss, starting from `w0`.
pub fn minimize_newton(loss: &dyn SmoothLoss, w0: Vec<f64>, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let d = loss.dim();
    let mut w = w0;
    let mut g = vec![0.0; d];
    let mut f = loss.value_and_gradient(&w, &mut g);
    for _ in 0..max_iters {
        if inf_norm(&g) <= tol {
            return Ok(w);
        }
        let h = loss.hessian(&w);
        let step = newton_direction(&h, &DVector::from_column_slice(&g));
        let slope = -step.dot(&DVector::from_column_slice(&g));
        let mut t = 1.0;
        let mut trial = vec![0.0; d];
        let mut g_trial = vec![0.0; d];
        loop {
            for k in 0..d {
                trial[k] = w[k] - t * step[k];
            }
            let f_trial = loss.value_and_gradient(&trial, &mut g_trial);
            // Armijo with a tiny constant; near the optimum the decrease can
            // drown in rounding, so also accept any gradient improvement.
            if f_trial <= f + 1e-4 * t * slope || (f_trial <= f + 1e-14 * f.abs() && inf_norm(&g_trial) < inf_norm(&g)) {
                f = f_trial;
                std::mem::swap(&mut w, &mut trial);
                std::mem::swap(&mut g, &mut g_trial);
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                return Err(Error::NonConvergence {
                    iterations: max_iters,
                    grad_norm: inf_norm(&g),
                    last: w,
                });
            }
        }
    }
    if inf_norm(&g) <= tol {
        return Ok(w);
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        grad_norm: inf_norm(&g),
        last: w,
    })
}

/// ERM in merged coordinates: returns the reduced parameter vector
/// (intercept first, one entry per support run).
pub fn fit_reduced(data: &BinnedDataset, support: &Support, lambda2: f64, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let obj = GamObjective::for_support(data, support, lambda2, 0.0)?;
    let mut w0 = vec![0.0; obj.dim()];
    let pos = data.labels().iter().filter(|&&y| y == 1).count() as f64;
    let rate = (pos / data.n() as f64).clamp(1e-6, 1.0 - 1e-6);
    w0[0] = (rate / (1.0 - rate)).ln();
    minimize_newton(&obj, w0, tol, max_iters)
}

pub fn fit_erm(data: &BinnedDataset, support: &Support, lambda2: f64, tol: f64, max_iters: usize) -> Result<GamModel> {
    if lambda2 < 0.0 {
        return Err(Error::Config("lambda2 must be non-negative".into()));
    }
    let reduced = fit_reduced(data, support, lambda2, tol, max_iters)?;
    GamModel::from_reduced(&reduced, support.clone())
}

/// Gradient inf-norm of `L_c + lambda2 L_2` at a reduced parameter vector.
pub fn reduced_grad_norm(data: &BinnedDataset, support: &Support, lambda2: f64, reduced: &[f64]) -> Result<f64> {
    let merged = data.merge(support)?;
    let mut g = vec![0.0; merged.dim()];
    value_and_gradient_at(&merged, reduced, lambda2, &mut g);
    Ok(inf_norm(&g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gam::binning::{bin, BinningSpec};
    use crate::gam::dataset::RawDataset;
    use crate::gam::model;

    #[test]
    fn separable_data_has_finite_ridge_optimum() {
        let raw = RawDataset::new(
            vec!["x".into()],
            vec![vec![0.5], vec![0.5], vec![1.5], vec![1.5]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let data = bin(&raw, &BinningSpec::new(vec![vec![0.0, 1.0, 2.0]]).unwrap()).unwrap();
        let support = Support::full(&[2]);
        let m = fit_erm(&data, &support, 0.01, 1e-8, 100).unwrap();
        let g = model::gradient(&m, &data, 0.01).unwrap();
        assert!(inf_norm(&g) <= 1e-8);
        assert!(m.omega()[1] > m.omega()[0]);
        assert!(m.omega().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn balanced_data_without_ridge_gives_zero() {
        let raw = RawDataset::new(
            vec!["x".into()],
            vec![vec![0.5], vec![0.5], vec![1.5], vec![1.5]],
            vec![0, 1, 0, 1],
        )
        .unwrap();
        let data = bin(&raw, &BinningSpec::new(vec![vec![0.0, 1.0, 2.0]]).unwrap()).unwrap();
        let m = fit_erm(&data, &Support::full(&[2]), 0.0, 1e-8, 100).unwrap();
        assert!(m.intercept().abs() < 1e-10);
        assert!(m.omega().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn merged_fit_respects_support() {
        let raw = RawDataset::new(
            vec!["x".into()],
            (0..40).map(|i| vec![(i % 4) as f64 + 0.5]).collect(),
            (0..40).map(|i| u8::from(i % 3 == 0)).collect(),
        )
        .unwrap();
        let data = bin(&raw, &BinningSpec::new(vec![vec![0.0, 1.0, 2.0, 3.0, 4.0]]).unwrap()).unwrap();
        let support = Support::new(vec![vec![(0, 1), (2, 3)]]).unwrap();
        let m = fit_erm(&data, &support, 0.001, 1e-8, 100).unwrap();
        assert_eq!(m.omega()[0], m.omega()[1]);
        assert_eq!(m.omega()[2], m.omega()[3]);
        assert!(reduced_grad_norm(&data, &support, 0.001, &m.reduced_params()).unwrap() <= 1e-8);
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let raw = RawDataset::new(
            vec!["x".into()],
            vec![vec![0.5], vec![1.5], vec![1.5]],
            vec![0, 1, 1],
        )
        .unwrap();
        let data = bin(&raw, &BinningSpec::new(vec![vec![0.0, 1.0, 2.0]]).unwrap()).unwrap();
        match fit_erm(&data, &Support::full(&[2]), 0.001, 1e-8, 1) {
            Err(Error::NonConvergence { last, .. }) => assert_eq!(last.len(), 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
