use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};

/// How often sampled models step down, up or stay flat between two
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub feature: usize,
    pub boundary: usize,
    pub n_samples: usize,
    pub tau: f64,
    pub fraction_down: f64,
    pub fraction_up: f64,
    pub fraction_flat: f64,
}

/// Classifies `w[right] - w[left]` over `n_samples` draws: down if below
/// `-tau`, up if above `tau`, flat otherwise. `left == right` (both bins in
/// one run) is always flat.
#[allow(clippy::too_many_arguments)]
pub fn jump_analysis<R: Rng + ?Sized>(
    e: &Ellipsoid,
    feature: usize,
    boundary: usize,
    left: usize,
    right: usize,
    n_samples: usize,
    tau: f64,
    rng: &mut R,
) -> Result<JumpReport> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    if left >= e.dim() || right >= e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: left.max(right) + 1,
        });
    }
    if !(tau >= 0.0) {
        return Err(Error::Config("tau must be non-negative".into()));
    }
    let (mut down, mut up) = (0usize, 0usize);
    for _ in 0..n_samples {
        let w = e.sample(rng);
        let diff = w[right] - w[left];
        if diff < -tau {
            down += 1;
        } else if diff > tau {
            up += 1;
        }
    }
    let n = n_samples as f64;
    Ok(JumpReport {
        feature,
        boundary,
        n_samples,
        tau,
        fraction_down: down as f64 / n,
        fraction_up: up as f64 / n,
        fraction_flat: (n_samples - down - up) as f64 / n,
    })
}
