//! Coordinate-wise Rashomon intervals by bracketing and bisection, and the
//! axis-aligned box volume built from them. Independent of the ellipsoid
//! machinery, so it serves as a cross-check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gam::SmoothLoss;
use crate::par::map_indexed;

pub const DEFAULT_DELTA: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordInterval {
    pub j: usize,
    pub left: f64,
    pub right: f64,
    pub delta: f64,
}

impl CoordInterval {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }
}

fn loss_at(loss: &dyn SmoothLoss, w: &[f64], j: usize, x: f64) -> f64 {
    let mut p = w.to_vec();
    p[j] = x;
    loss.value(&p)
}

fn check_inside(loss: &dyn SmoothLoss, w: &[f64], theta: f64) -> Result<()> {
    if w.len() != loss.dim() {
        return Err(Error::DimensionMismatch {
            expected: loss.dim(),
            got: w.len(),
        });
    }
    let l = loss.value(w);
    if l > theta {
        return Err(Error::OutsideSet { loss: l, theta });
    }
    Ok(())
}

/// Doubles the step from `w_j` until the loss exceeds `theta`. Returns the
/// last in-set abscissa and the first exceeding one.
fn bracket(loss: &dyn SmoothLoss, w: &[f64], j: usize, theta: f64, delta: f64, side: Side) -> Result<(f64, f64)> {
    let mut inside = w[j];
    let mut step = delta;
    for _ in 0..MAX_DOUBLINGS {
        let x = w[j] + side.sign() * step;
        if loss_at(loss, w, j, x) > theta {
            return Ok((inside, x));
        }
        inside = x;
        step *= 2.0;
    }
    Err(Error::Search(format!(
        "coordinate {j} stays inside after {MAX_DOUBLINGS} doublings"
    )))
}

/// First abscissa along coordinate `j` (stepping from `w`) at which the
/// loss exceeds `theta`.
pub fn get_bounds(loss: &dyn SmoothLoss, w: &[f64], j: usize, theta: f64, delta: f64, side: Side) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Config("delta must be positive".into()));
    }
    bracket(loss, w, j, theta, delta, side).map(|(_, out)| out)
}

fn boundary(loss: &dyn SmoothLoss, w: &[f64], j: usize, theta: f64, delta: f64, side: Side) -> Result<f64> {
    let (mut inside, mut outside) = bracket(loss, w, j, theta, delta, side)?;
    while (outside - inside).abs() >= delta {
        let mid = 0.5 * (inside + outside);
        if loss_at(loss, w, j, mid) > theta {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    Ok(inside)
}

/// In-set interval of coordinate `j` with the others held at `w`. Both
/// endpoints are in the set and lie within `delta` of the true boundary.
pub fn segment_ends(loss: &dyn SmoothLoss, w: &[f64], j: usize, theta: f64, delta: f64) -> Result<CoordInterval> {
    check_inside(loss, w, theta)?;
    if !(delta > 0.0) {
        return Err(Error::Config("delta must be positive".into()));
    }
    Ok(CoordInterval {
        j,
        left: boundary(loss, w, j, theta, delta, Side::Left)?,
        right: boundary(loss, w, j, theta, delta, Side::Right)?,
        delta,
    })
}

pub fn all_segments(loss: &dyn SmoothLoss, w: &[f64], theta: f64, delta: f64) -> Result<Vec<CoordInterval>> {
    check_inside(loss, w, theta)?;
    map_indexed(w.len(), |j| segment_ends(loss, w, j, theta, delta)).into_iter().collect()
}

/// Product of the coordinate interval widths at `w`.
pub fn box_volume(loss: &dyn SmoothLoss, w: &[f64], theta: f64, delta: f64) -> Result<f64> {
    Ok(all_segments(loss, w, theta, delta)?.iter().map(CoordInterval::width).product())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSearch {
    pub center: Vec<f64>,
    pub volume: f64,
    /// Box volume after each outer sweep (first entry: the start).
    pub history: Vec<f64>,
}

/// Cyclic coordinate ternary search for the point with the largest box
/// volume. Each coordinate moves only when the move improves the volume.
pub fn bracketing_center_search(
    loss: &dyn SmoothLoss,
    w0: &[f64],
    theta: f64,
    delta: f64,
    max_iter: usize,
) -> Result<CenterSearch> {
    let mut w = w0.to_vec();
    let mut best = box_volume(loss, &w, theta, delta)?;
    let mut history = vec![best];
    let vol_at = |w: &[f64], j: usize, x: f64| -> Result<f64> {
        let mut p = w.to_vec();
        p[j] = x;
        box_volume(loss, &p, theta, delta)
    };
    for _ in 0..max_iter {
        let before = best;
        for j in 0..w.len() {
            let seg = segment_ends(loss, &w, j, theta, delta)?;
            let (mut lo, mut hi) = (seg.left, seg.right);
            let tol = (1e-3 * seg.width()).max(delta);
            while hi - lo > tol {
                let a = lo + (hi - lo) / 3.0;
                let b = lo + 2.0 * (hi - lo) / 3.0;
                if vol_at(&w, j, a)? < vol_at(&w, j, b)? {
                    lo = a;
                } else {
                    hi = b;
                }
            }
            let mut cand = (vol_at(&w, j, lo)?, lo);
            let v_hi = vol_at(&w, j, hi)?;
            if v_hi > cand.0 {
                cand = (v_hi, hi);
            }
            if cand.0 > best {
                best = cand.0;
                w[j] = cand.1;
            }
        }
        history.push(best);
        if best <= before * (1.0 + 1e-9) {
            break;
        }
    }
    Ok(CenterSearch {
        center: w,
        volume: best,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gam::QuadraticLoss;
    use nalgebra::{DMatrix, DVector};

    fn quad1() -> QuadraticLoss {
        QuadraticLoss::new(0.0, DVector::from_column_slice(&[1.0]), DMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn bounds_cross_threshold() {
        let l = quad1();
        let x = get_bounds(&l, &[1.0], 0, 0.25, 0.1, Side::Right).unwrap();
        assert!(x > 1.5 && l.value(&[x]) > 0.25);
        let y = get_bounds(&l, &[1.0], 0, 0.25, 0.1, Side::Left).unwrap();
        assert!((y - 1.0 + (x - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn analytic_interval() {
        let s = segment_ends(&quad1(), &[1.0], 0, 0.25, 1e-6).unwrap();
        assert!((s.left - 0.5).abs() < 1e-6 && (s.right - 1.5).abs() < 1e-6);
        assert!(quad1().value(&[s.left]) <= 0.25 && quad1().value(&[s.right]) <= 0.25);
        assert!(quad1().value(&[s.left - 2e-6]) > 0.25 && quad1().value(&[s.right + 2e-6]) > 0.25);
    }

    #[test]
    fn degenerate_interval_at_threshold() {
        let l = quad1();
        let s = segment_ends(&l, &[1.0], 0, 0.0, 1e-6).unwrap();
        assert!(s.width() <= 2e-6 && s.left <= 1.0 && s.right >= 1.0);
        assert!(matches!(segment_ends(&l, &[2.0], 0, 0.25, 1e-6), Err(Error::OutsideSet { .. })));
    }

    #[test]
    fn larger_threshold_gives_superset() {
        let l = quad1();
        let a = segment_ends(&l, &[1.2], 0, 0.25, 1e-6).unwrap();
        let b = segment_ends(&l, &[1.2], 0, 0.3, 1e-6).unwrap();
        assert!(b.left <= a.left && b.right >= a.right);
    }

    #[test]
    fn separable_box_volume_and_center() {
        let d = 3;
        let l = QuadraticLoss::new(0.2, DVector::from_column_slice(&[0.5, -1.0, 2.0]), DMatrix::identity(d, d)).unwrap();
        let v = box_volume(&l, &[0.5, -1.0, 2.0], 1.2, 1e-7).unwrap();
        assert!((v - 8.0).abs() < 1e-5);
        let s = bracketing_center_search(&l, &[0.9, -0.8, 2.3], 1.2, 1e-7, 20).unwrap();
        assert!(s.history.windows(2).all(|w| w[1] >= w[0]));
        for (c, a) in s.center.iter().zip([0.5, -1.0, 2.0]) {
            assert!((c - a).abs() < 1e-2, "{c} vs {a}");
        }
        assert!((s.volume - 8.0).abs() < 1e-3);
    }

    #[test]
    fn correlated_center_matches_grid() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.8, 0.8, 1.0]);
        let l = QuadraticLoss::new(0.0, DVector::zeros(2), m).unwrap();
        let theta = 1.0;
        let s = bracketing_center_search(&l, &[0.3, 0.2], theta, 1e-7, 50).unwrap();
        let mut best = 0.0f64;
        let n = 120;
        for a in 0..=n {
            for b in 0..=n {
                let w = [-0.75 + 1.5 * a as f64 / n as f64, -1.1 + 2.2 * b as f64 / n as f64];
                if l.value(&w) <= theta {
                    best = best.max(box_volume(&l, &w, theta, 1e-7).unwrap());
                }
            }
        }
        assert!(s.volume >= 0.95 * best, "{} vs grid {best}", s.volume);
    }
}
