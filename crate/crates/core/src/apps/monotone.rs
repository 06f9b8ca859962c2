//! Closest model (in the ellipsoid's metric) whose shape functions are
//! monotone on chosen features.
//!
//! Primal active-set over the chain constraints. An active constraint ties
//! two adjacent coordinates, so each working set is a merge plan and its
//! equality-constrained minimum comes from the block-merge algebra.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::rset_block::{coordinate_map, merge_linear, merge_quadratic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    /// Constraint `sigma (w_k - w_{k+1}) <= 0`.
    fn sigma(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }
}

/// Order constraints on consecutive coordinates `block` (ellipsoid
/// coordinates).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConstraint {
    pub block: Range<usize>,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneResult {
    pub omega: Vec<f64>,
    /// `(w - c)^T Q (w - c)` at the optimum.
    pub q: f64,
    pub feasible: bool,
    /// Largest violation among stationarity, primal feasibility, dual
    /// feasibility and complementarity.
    pub kkt_residual: f64,
    pub iterations: usize,
}

struct Cons {
    /// First coordinate (in free numbering) of the adjacent pair.
    a: usize,
    sigma: f64,
}

fn groups_of(active: &[bool], cons: &[Cons]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (k, c) in cons.iter().enumerate() {
        if !active[k] {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.1 == c.a => last.1 = c.a + 1,
            _ => out.push((c.a, c.a + 1)),
        }
    }
    out
}

fn solve_eqp(q: &DMatrix<f64>, l: &DVector<f64>, groups: &[(usize, usize)]) -> Result<DVector<f64>> {
    let qt = merge_quadratic(q, groups)?;
    let lt = merge_linear(l, groups)?;
    let v = qt
        .cholesky()
        .ok_or_else(|| Error::NotSpd("merged quadratic form".into()))?
        .solve(&lt);
    let map = coordinate_map(q.nrows(), groups)?;
    Ok(DVector::from_iterator(map.len(), map.iter().map(|&m| v[m])))
}

fn g_of(x: &DVector<f64>, c: &Cons) -> f64 {
    c.sigma * (x[c.a] - x[c.a + 1])
}

/// Multipliers of the active constraints: within a tied run starting at
/// `s`, `lambda_i = -sigma * sum_{t=s..=i} grad_t`.
fn multipliers(grad: &DVector<f64>, active: &[bool], cons: &[Cons]) -> Vec<f64> {
    let mut lambda = vec![0.0; cons.len()];
    let mut acc = 0.0;
    for (k, c) in cons.iter().enumerate() {
        if !active[k] {
            acc = 0.0;
            continue;
        }
        let run_start = k == 0 || !active[k - 1] || cons[k - 1].a + 1 != c.a;
        if run_start {
            acc = 0.0;
        }
        acc += grad[c.a];
        lambda[k] = -c.sigma * acc;
    }
    lambda
}

/// Minimizes `(w - c)^T Q (w - c)` subject to the chain constraints, with
/// the coordinates in `fixed` pinned to the given values.
pub fn monotone_fit(e: &Ellipsoid, chains: &[ChainConstraint], fixed: &[(usize, f64)]) -> Result<MonotoneResult> {
    let d = e.dim();
    let mut pinned = vec![None; d];
    for &(i, v) in fixed {
        if i >= d {
            return Err(Error::DimensionMismatch { expected: d, got: i + 1 });
        }
        pinned[i] = Some(v);
    }
    let mut in_chain = vec![false; d];
    for ch in chains {
        if ch.block.end > d || ch.block.is_empty() {
            return Err(Error::Config(format!("chain {:?} is invalid for dimension {d}", ch.block)));
        }
        for i in ch.block.clone() {
            if in_chain[i] {
                return Err(Error::Config("chain constraints overlap".into()));
            }
            if pinned[i].is_some() {
                return Err(Error::Config(format!("coordinate {i} is both fixed and constrained")));
            }
            in_chain[i] = true;
        }
    }
    let free: Vec<usize> = (0..d).filter(|&i| pinned[i].is_none()).collect();
    if free.is_empty() {
        let w: Vec<f64> = pinned.iter().map(|v| v.unwrap()).collect();
        let q = e.quad_form(&w);
        return Ok(MonotoneResult {
            omega: w,
            q,
            feasible: q <= 1.0,
            kkt_residual: 0.0,
            iterations: 0,
        });
    }
    let mut pos = vec![usize::MAX; d];
    for (k, &i) in free.iter().enumerate() {
        pos[i] = k;
    }
    // the quadratic over free coordinates, centered at the subspace minimizer
    let slice = e.slice_fix_coords(fixed)?;
    let qf = e.q().select_rows(&free).select_columns(&free);
    let cf = DVector::from_iterator(free.len(), free.iter().map(|&i| slice.point[i]));
    let lf = &qf * &cf;

    let mut cons = Vec::new();
    for ch in chains {
        for i in ch.block.start..ch.block.end - 1 {
            cons.push(Cons {
                a: pos[i],
                sigma: ch.direction.sigma(),
            });
        }
    }
    cons.sort_by_key(|c| c.a);

    let scale = qf.amax().max(1.0) * (1.0 + cf.amax());
    let tol = 1e-13 * scale;
    let mut active = vec![true; cons.len()];
    let mut x = solve_eqp(&qf, &lf, &groups_of(&active, &cons))?;
    let mut iterations = 0;
    let max_iter = 50 * (cons.len() + 1);
    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::Search(format!("active set did not settle in {max_iter} iterations")));
        }
        let target = solve_eqp(&qf, &lf, &groups_of(&active, &cons))?;
        let mut alpha = 1.0;
        let mut blocking = None;
        for (k, c) in cons.iter().enumerate() {
            if active[k] {
                continue;
            }
            let gt = g_of(&target, c);
            if gt > 0.0 {
                let gx = g_of(&x, c).min(0.0);
                let a = -gx / (gt - gx);
                if a < alpha {
                    alpha = a;
                    blocking = Some(k);
                }
            }
        }
        x = &x + (&target - &x) * alpha;
        if let Some(k) = blocking {
            active[k] = true;
            // land exactly on the new equality
            let c = &cons[k];
            let m = 0.5 * (x[c.a] + x[c.a + 1]);
            x[c.a] = m;
            x[c.a + 1] = m;
            continue;
        }
        let grad = (&qf * (&x - &cf)) * 2.0;
        let lambda = multipliers(&grad, &active, &cons);
        let worst = (0..cons.len())
            .filter(|&k| active[k])
            .min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
        match worst {
            Some(k) if lambda[k] < -tol => active[k] = false,
            _ => {
                let mut omega = vec![0.0; d];
                for i in 0..d {
                    omega[i] = pinned[i].unwrap_or_else(|| x[pos[i]]);
                }
                let q = e.quad_form(&omega);
                let kkt_residual = kkt(&grad, &x, &lambda, &active, &cons);
                return Ok(MonotoneResult {
                    omega,
                    q,
                    feasible: q <= 1.0,
                    kkt_residual,
                    iterations,
                });
            }
        }
    }
}

fn kkt(grad: &DVector<f64>, x: &DVector<f64>, lambda: &[f64], active: &[bool], cons: &[Cons]) -> f64 {
    let mut r = grad.clone();
    let mut worst: f64 = 0.0;
    for (k, c) in cons.iter().enumerate() {
        let l = if active[k] { lambda[k] } else { 0.0 };
        r[c.a] += l * c.sigma;
        r[c.a + 1] -= l * c.sigma;
        let g = g_of(x, c);
        worst = worst.max(g.max(0.0)).max((-l).max(0.0)).max((l * g).abs());
    }
    worst.max(r.amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::tests::random_spd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inc(block: Range<usize>) -> ChainConstraint {
        ChainConstraint {
            block,
            direction: Direction::Increasing,
        }
    }

    #[test]
    fn monotone_center_is_kept() {
        let e = Ellipsoid::ball(DVector::from_column_slice(&[0.0, 0.1, 0.5, 0.7]));
        let r = monotone_fit(&e, &[inc(1..4)], &[]).unwrap();
        assert!(r.q < 1e-24 && r.feasible);
        assert_eq!(r.omega, vec![0.0, 0.1, 0.5, 0.7]);
    }

    #[test]
    fn half_space_projection() {
        let e = Ellipsoid::ball(DVector::from_column_slice(&[1.0, 0.0]));
        let r = monotone_fit(&e, &[inc(0..2)], &[]).unwrap();
        assert!((r.omega[0] - 0.5).abs() < 1e-15 && (r.omega[1] - 0.5).abs() < 1e-15);
        assert!((r.q - 0.5).abs() < 1e-15 && r.feasible);
        let r = monotone_fit(
            &e,
            &[ChainConstraint {
                block: 0..2,
                direction: Direction::Decreasing,
            }],
            &[],
        )
        .unwrap();
        assert_eq!(r.q, 0.0);
    }

    /// Euclidean projection onto non-decreasing sequences.
    fn pava(y: &[f64]) -> Vec<f64> {
        let mut blocks: Vec<(f64, usize)> = Vec::new();
        for &v in y {
            blocks.push((v, 1));
            while blocks.len() > 1 {
                let (b, nb) = blocks[blocks.len() - 1];
                let (a, na) = blocks[blocks.len() - 2];
                if a <= b {
                    break;
                }
                blocks.pop();
                *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
            }
        }
        blocks.iter().flat_map(|&(v, n)| std::iter::repeat_n(v, n)).collect()
    }

    #[test]
    fn matches_projected_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let q = random_spd(&mut rng, 4);
            let c = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let e = Ellipsoid::new(q.clone(), c.clone()).unwrap();
            let r = monotone_fit(&e, &[inc(0..4)], &[]).unwrap();
            assert!(r.kkt_residual <= 1e-8);
            let lmax = e.eigen().values[0];
            let mut x = pava(c.as_slice());
            for _ in 0..200_000 {
                let g = &q * (DVector::from_column_slice(&x) - &c) * 2.0;
                let y: Vec<f64> = x.iter().zip(g.iter()).map(|(a, b)| a - b / (2.0 * lmax)).collect();
                x = pava(&y);
            }
            let qpg = e.quad_form(&x);
            assert!((qpg - r.q).abs() <= 1e-6, "{qpg} vs {}", r.q);
        }
    }

    #[test]
    fn multiple_features_and_fixed_coords() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let q = random_spd(&mut rng, 8);
            let c = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
            let e = Ellipsoid::new(q, c.clone()).unwrap();
            let chains = [
                inc(1..4),
                ChainConstraint {
                    block: 4..7,
                    direction: Direction::Decreasing,
                },
            ];
            let r = monotone_fit(&e, &chains, &[(0, c[0]), (7, c[7] + 0.1)]).unwrap();
            assert!(r.kkt_residual <= 1e-8);
            assert_eq!(r.omega[0], c[0]);
            assert_eq!(r.omega[7], c[7] + 0.1);
            assert!(r.omega[1..4].windows(2).all(|w| w[0] <= w[1] + 1e-10));
            assert!(r.omega[4..7].windows(2).all(|w| w[0] >= w[1] - 1e-10));
        }
    }

    #[test]
    fn rejects_overlaps() {
        let e = Ellipsoid::ball(DVector::zeros(4));
        assert!(monotone_fit(&e, &[inc(0..3), inc(2..4)], &[]).is_err());
        assert!(monotone_fit(&e, &[inc(0..3)], &[(1, 0.0)]).is_err());
    }
}
