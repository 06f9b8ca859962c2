//! Euclidean projection of a requested coefficient vector onto an ellipsoid.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub omega: Vec<f64>,
    pub distance: f64,
    pub inside_already: bool,
    /// Multiplier of the membership constraint (0 when already inside).
    pub mu: f64,
}

/// The point of the ellipsoid closest to `request`.
///
/// Outside points land on the boundary at `w(mu) = (I + mu Q)^{-1}
/// (request + mu Q c)`; in the eigenbasis `q(mu) = sum_i lambda_i r_i^2 /
/// (1 + mu lambda_i)^2` and `mu` solves `1 / sqrt(q(mu)) = 1`.
pub fn project_edit(e: &Ellipsoid, request: &[f64]) -> Result<Projection> {
    let (q0, inside) = e.contains(request)?;
    if inside {
        return Ok(Projection {
            omega: request.to_vec(),
            distance: 0.0,
            inside_already: true,
            mu: 0.0,
        });
    }
    let eig = e.eigen();
    let lam = &eig.values;
    let r = eig.vectors.tr_mul(&(DVector::from_column_slice(request) - e.center()));
    let q_of = |mu: f64| -> (f64, f64) {
        let mut q = 0.0;
        let mut dq = 0.0;
        for i in 0..lam.len() {
            let den = 1.0 + mu * lam[i];
            q += lam[i] * r[i] * r[i] / (den * den);
            dq -= 2.0 * lam[i] * lam[i] * r[i] * r[i] / (den * den * den);
        }
        (q, dq)
    };
    let phi = |mu: f64| {
        let (q, dq) = q_of(mu);
        (1.0 / q.sqrt() - 1.0, -0.5 * dq / (q * q.sqrt()))
    };
    let mut lo = 0.0;
    let mut hi = 1.0 / lam[0];
    let mut grow = 0;
    while q_of(hi).0 > 1.0 {
        lo = hi;
        hi *= 4.0;
        grow += 1;
        if grow > 2000 {
            return Err(Error::Search("could not bracket the projection multiplier".into()));
        }
    }
    // phi is increasing; safeguarded Newton inside [lo, hi]
    let mut mu = if q0.is_finite() { 0.5 * (lo + hi) } else { hi };
    for _ in 0..200 {
        let (f, df) = phi(mu);
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = mu;
        } else {
            lo = mu;
        }
        let newton = mu - f / df;
        mu = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-15 * hi || f.abs() < 1e-15 {
            break;
        }
    }
    let z = DVector::from_iterator(lam.len(), (0..lam.len()).map(|i| r[i] / (1.0 + mu * lam[i])));
    let omega = e.center() + &eig.vectors * z;
    let distance = (DVector::from_column_slice(request) - &omega).norm();
    Ok(Projection {
        omega: omega.as_slice().to_vec(),
        distance,
        inside_already: false,
        mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::tests::random_spd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn center_is_fixed_point() {
        let e = Ellipsoid::ball(DVector::from_column_slice(&[0.3, -0.2]));
        let p = project_edit(&e, &[0.3, -0.2]).unwrap();
        assert!(p.inside_already && p.distance == 0.0);
    }

    #[test]
    fn radial_projection() {
        let e = Ellipsoid::ball(DVector::zeros(2));
        let p = project_edit(&e, &[2.0, 0.0]).unwrap();
        assert!((p.omega[0] - 1.0).abs() < 1e-12 && p.omega[1].abs() < 1e-15);
        assert!((p.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_and_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let q = random_spd(&mut rng, 5);
            let c = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
            let e = Ellipsoid::new(q.clone(), c.clone()).unwrap();
            let req: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
            let p = project_edit(&e, &req).unwrap();
            if p.inside_already {
                continue;
            }
            let w = DVector::from_column_slice(&p.omega);
            let res = (&w - DVector::from_column_slice(&req)) + &q * (&w - &c) * p.mu;
            assert!(res.amax() <= 1e-8, "{}", res.amax());
            assert!((e.quad_form(&p.omega) - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn distance_grows_along_rays() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = Ellipsoid::new(random_spd(&mut rng, 3), DVector::zeros(3)).unwrap();
        let dir = [0.3, -0.8, 0.5];
        let mut last = -1.0;
        for k in 1..40 {
            let t = k as f64 * 0.25;
            let req: Vec<f64> = dir.iter().map(|v| v * t).collect();
            let d = project_edit(&e, &req).unwrap().distance;
            assert!(d >= last);
            last = d;
        }
    }
}
