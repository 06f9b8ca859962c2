//! Ellipsoids `{w : (w - c)^T Q (w - c) <= 1}` and the geometry the rest of
//! the crate builds on.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numeric::log_unit_ball_volume;

/// Relative eigenvalue floor below which a matrix is rejected as singular.
pub const EIGEN_FLOOR: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// (columns of `vectors`).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFactors {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenFactors {
    /// Symmetric eigendecomposition, sorted descending. `q` must already be
    /// symmetric.
    pub fn of(q: &DMatrix<f64>) -> Self {
        let eig = q.clone().symmetric_eigen();
        let d = q.nrows();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(d, d);
        for (k, &i) in order.iter().enumerate() {
            vectors.set_column(k, &eig.eigenvectors.column(i));
        }
        Self { values, vectors }
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }
}

#[derive(Debug, Clone)]
pub struct Ellipsoid {
    q: DMatrix<f64>,
    center: DVector<f64>,
    eig: EigenFactors,
    /// `V diag(lambda)^{-1/2}`: maps the unit ball onto the centered ellipsoid.
    map: DMatrix<f64>,
    q_inv: DMatrix<f64>,
}

impl PartialEq for Ellipsoid {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.center == other.center
    }
}

impl Ellipsoid {
    pub fn new(q: DMatrix<f64>, center: DVector<f64>) -> Result<Self> {
        let d = center.len();
        if d == 0 {
            return Err(Error::Config("ellipsoid must have dimension >= 1".into()));
        }
        if q.nrows() != d || q.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: q.nrows(),
            });
        }
        if q.iter().chain(center.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let scale = q.amax().max(1.0);
        for i in 0..d {
            for j in i + 1..d {
                if (q[(i, j)] - q[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotSpd(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        let q = (&q + q.transpose()) * 0.5;
        let eig = EigenFactors::of(&q);
        let max = eig.values[0];
        let min = eig.values[d - 1];
        if !(max > 0.0) || min <= EIGEN_FLOOR * max {
            return Err(Error::NotSpd(format!(
                "eigenvalues span [{min:.3e}, {max:.3e}]"
            )));
        }
        let inv_sqrt = eig.values.map(|l| 1.0 / l.sqrt());
        let map = &eig.vectors * DMatrix::from_diagonal(&inv_sqrt);
        let q_inv = &map * map.transpose();
        Ok(Self {
            q,
            center,
            eig,
            map,
            q_inv,
        })
    }

    /// The unit ball in `d` dimensions centered at `center`.
    pub fn ball(center: DVector<f64>) -> Self {
        let d = center.len();
        Self::new(DMatrix::identity(d, d), center).expect("identity is SPD")
    }

    /// `{c + L y : |y| <= 1}` for an invertible factor `L`, i.e.
    /// `Q = (L L^T)^{-1}`.
    pub fn from_factor(l: &DMatrix<f64>, center: DVector<f64>) -> Result<Self> {
        let llt = l * l.transpose();
        let inv = llt
            .cholesky()
            .ok_or_else(|| Error::NotSpd("factor is singular".into()))?
            .inverse();
        Self::new((&inv + inv.transpose()) * 0.5, center)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn eigen(&self) -> &EigenFactors {
        &self.eig
    }

    pub fn q_inv(&self) -> &DMatrix<f64> {
        &self.q_inv
    }

    /// `V diag(lambda)^{-1/2}`.
    pub fn sampling_map(&self) -> &DMatrix<f64> {
        &self.map
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: n,
            });
        }
        Ok(())
    }

    /// `(w - c)^T Q (w - c)` without a dimension check.
    pub fn quad_form(&self, w: &[f64]) -> f64 {
        let r = DVector::from_iterator(self.dim(), w.iter().zip(self.center.iter()).map(|(a, b)| a - b));
        r.dot(&(&self.q * &r))
    }

    /// Quadratic-form value and whether it is at most 1.
    pub fn contains(&self, w: &[f64]) -> Result<(f64, bool)> {
        self.check_dim(w.len())?;
        let q = self.quad_form(w);
        Ok((q, q <= 1.0))
    }

    /// A point drawn uniformly from the unit ball.
    pub fn sample_unit_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
        let mut y = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = y.norm();
        let u: f64 = rng.random();
        y *= u.powf(1.0 / d as f64) / norm;
        y
    }

    /// A uniform draw: Gaussian direction, radius `U^{1/d}`, then
    /// `c + V diag(lambda)^{-1/2} y`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let y = Self::sample_unit_ball(self.dim(), rng);
        &self.center + &self.map * y
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<DVector<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    pub fn log_volume(&self) -> f64 {
        log_unit_ball_volume(self.dim()) - 0.5 * self.eig.values.iter().map(|l| l.ln()).sum::<f64>()
    }

    /// Minimizer and minimum of `g^T w` over the ellipsoid.
    pub fn minimize_linear(&self, g: &[f64]) -> Result<(DVector<f64>, f64)> {
        self.check_dim(g.len())?;
        if g.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroObjective);
        }
        let g = DVector::from_column_slice(g);
        let qg = &self.q_inv * &g;
        let reach = g.dot(&qg).sqrt();
        let w = &self.center - qg / reach;
        let value = g.dot(&self.center) - reach;
        Ok((w, value))
    }

    /// Radii scaled by `rho`: `Q / rho^2`, same center.
    pub fn rescale(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Config(format!("scale factor must be positive, got {rho}")));
        }
        let s = 1.0 / (rho * rho);
        Ok(Self {
            q: &self.q * s,
            center: self.center.clone(),
            eig: EigenFactors {
                values: &self.eig.values * s,
                vectors: self.eig.vectors.clone(),
            },
            map: &self.map * rho,
            q_inv: &self.q_inv * (rho * rho),
        })
    }

    /// Linear factor that takes this ellipsoid's log-volume to `target`.
    pub fn match_volume_factor(&self, target_log_volume: f64) -> f64 {
        ((target_log_volume - self.log_volume()) / self.dim() as f64).exp()
    }

    pub fn with_center(&self, center: DVector<f64>) -> Result<Self> {
        self.check_dim(center.len())?;
        let mut e = self.clone();
        e.center = center;
        Ok(e)
    }

    /// Restriction to the affine subspace where the listed coordinates take
    /// the given values.
    pub fn slice_fix_coords(&self, fixed: &[(usize, f64)]) -> Result<Slice> {
        let d = self.dim();
        let mut is_fixed = vec![None; d];
        for &(i, v) in fixed {
            if i >= d {
                return Err(Error::DimensionMismatch { expected: d, got: i + 1 });
            }
            if is_fixed[i].is_some() {
                return Err(Error::Config(format!("coordinate {i} fixed twice")));
            }
            is_fixed[i] = Some(v);
        }
        let free: Vec<usize> = (0..d).filter(|&i| is_fixed[i].is_none()).collect();
        if fixed.is_empty() {
            return Ok(Slice {
                free,
                level: 1.0,
                point: self.center.clone(),
                ellipsoid: Some(self.clone()),
            });
        }
        let fixed_idx: Vec<usize> = (0..d).filter(|&i| is_fixed[i].is_some()).collect();
        let delta = DVector::from_iterator(
            fixed_idx.len(),
            fixed_idx.iter().map(|&i| is_fixed[i].unwrap() - self.center[i]),
        );
        if free.is_empty() {
            let point = DVector::from_iterator(d, (0..d).map(|i| is_fixed[i].unwrap()));
            let level = 1.0 - self.quad_form(point.as_slice());
            return Ok(Slice {
                free,
                level,
                point,
                ellipsoid: None,
            });
        }
        let q_uu = self.q.select_rows(&free).select_columns(&free);
        let q_uf = self.q.select_rows(&free).select_columns(&fixed_idx);
        let chol = q_uu
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotSpd("free block is not positive definite".into()))?;
        let shift = -chol.solve(&(&q_uf * &delta));
        // level = 1 - q(point), evaluated at the slice minimizer directly
        let mut point = vec![0.0; d];
        for (k, &i) in free.iter().enumerate() {
            point[i] = self.center[i] + shift[k];
        }
        for &i in &fixed_idx {
            point[i] = is_fixed[i].unwrap();
        }
        let level = 1.0 - self.quad_form(&point);
        let point = DVector::from_vec(point);
        if level <= 0.0 {
            return Ok(Slice {
                free,
                level,
                point,
                ellipsoid: None,
            });
        }
        let center = DVector::from_iterator(free.len(), free.iter().map(|&i| point[i]));
        let ellipsoid = Ellipsoid::new(q_uu / level, center)?;
        Ok(Slice {
            free,
            level,
            point,
            ellipsoid: Some(ellipsoid),
        })
    }
}

/// Result of fixing coordinates: the ellipsoid on the remaining (`free`)
/// coordinates, or `None` when the slice is empty (`level <= 0`) or no
/// coordinate is left free.
#[derive(Debug, Clone)]
pub struct Slice {
    pub free: Vec<usize>,
    pub level: f64,
    /// Full-dimensional point of the affine subspace with the smallest
    /// quadratic-form value (the slice center when nonempty).
    pub point: DVector<f64>,
    pub ellipsoid: Option<Ellipsoid>,
}

impl Slice {
    pub fn is_empty(&self) -> bool {
        self.level <= 0.0
    }

    /// Lifts a vector over the free coordinates to full dimension.
    pub fn lift(&self, free_values: &[f64]) -> DVector<f64> {
        let mut p = self.point.clone();
        for (k, &i) in self.free.iter().enumerate() {
            p[i] = free_values[k];
        }
        p
    }
}
