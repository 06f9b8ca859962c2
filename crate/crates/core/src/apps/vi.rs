//! Range of a feature's importance `sum_k pi_k |w_k|` over an ellipsoid.
//!
//! Both bounds only depend on the ellipsoid's projection onto the feature
//! block `J`, which is the ellipsoid with center `c_J` and inverse shape
//! `P = (Q^{-1})_JJ` (or the center slice when the other coordinates are
//! fixed).

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};

/// Sign enumeration covers `2^B` patterns; blocks larger than this are
/// rejected.
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViMode {
    /// All other coordinates (intercept included) held at the center.
    FixOthers,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableImportanceRange {
    pub feature: usize,
    pub mode: ViMode,
    pub vi_center: f64,
    pub vi_minus: f64,
    pub vi_plus: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
}

/// `sum_k pi_k |w_k|`.
pub fn vi_point(omega_block: &[f64], weights: &[f64]) -> f64 {
    omega_block.iter().zip(weights).map(|(w, p)| p * w.abs()).sum()
}

/// The problem restricted to one block: an ellipsoid over the working
/// coordinates, which of them form the block, and how to lift a working
/// point back to full coordinates.
struct Work {
    e: Ellipsoid,
    block: Vec<usize>,
    /// For the fixed mode, the full center to write block values into.
    embed_into: Option<(DVector<f64>, Range<usize>)>,
}

impl Work {
    fn new(e: &Ellipsoid, block: Range<usize>, mode: ViMode) -> Result<Self> {
        if block.is_empty() || block.end > e.dim() {
            return Err(Error::Config(format!("block {block:?} is invalid for dimension {}", e.dim())));
        }
        match mode {
            ViMode::Free => Ok(Self {
                e: e.clone(),
                block: block.collect(),
                embed_into: None,
            }),
            ViMode::FixOthers => {
                let fixed: Vec<(usize, f64)> = (0..e.dim())
                    .filter(|i| !block.contains(i))
                    .map(|i| (i, e.center()[i]))
                    .collect();
                let slice = e.slice_fix_coords(&fixed)?;
                let inner = slice.ellipsoid.ok_or(Error::InfeasibleSlice)?;
                Ok(Self {
                    block: (0..inner.dim()).collect(),
                    e: inner,
                    embed_into: Some((e.center().clone(), block)),
                })
            }
        }
    }

    fn lift(&self, w: &DVector<f64>) -> Vec<f64> {
        match &self.embed_into {
            None => w.as_slice().to_vec(),
            Some((center, block)) => {
                let mut full = center.clone();
                for (k, i) in block.clone().enumerate() {
                    full[i] = w[k];
                }
                full.as_slice().to_vec()
            }
        }
    }

    fn embed(&self, g_block: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.e.dim()];
        for (k, &i) in self.block.iter().enumerate() {
            g[i] = g_block[k];
        }
        g
    }

    fn block_values(&self, w: &DVector<f64>) -> Vec<f64> {
        self.block.iter().map(|&i| w[i]).collect()
    }

    fn projected(&self) -> (DVector<f64>, DMatrix<f64>) {
        let c = DVector::from_iterator(self.block.len(), self.block.iter().map(|&i| self.e.center()[i]));
        let p = self.e.q_inv().select_rows(&self.block).select_columns(&self.block);
        (c, p)
    }

    /// A point of the working ellipsoid whose block is zero, if any.
    fn zero_point(&self) -> Result<Option<DVector<f64>>> {
        let fixed: Vec<(usize, f64)> = self.block.iter().map(|&i| (i, 0.0)).collect();
        let s = self.e.slice_fix_coords(&fixed)?;
        Ok((s.level >= 0.0).then_some(s.point))
    }
}

fn check_weights(block: &Range<usize>, weights: &[f64]) -> Result<()> {
    if weights.len() != block.len() {
        return Err(Error::DimensionMismatch {
            expected: block.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Config("importance weights must be non-negative".into()));
    }
    Ok(())
}

/// Maximizes `g^T c - sqrt(g^T P g)` over the box `|g_k| <= pi_k` by
/// projected gradient ascent with Barzilai-Borwein steps.
fn solve_dual(c: &DVector<f64>, p: &DMatrix<f64>, pi: &[f64]) -> DVector<f64> {
    let b = c.len();
    let f = |g: &DVector<f64>| g.dot(c) - g.dot(&(p * g)).max(0.0).sqrt();
    let grad = |g: &DVector<f64>| {
        let pg = p * g;
        let n = g.dot(&pg).max(1e-300).sqrt();
        c - pg / n
    };
    let proj = |g: &DVector<f64>| DVector::from_iterator(b, (0..b).map(|k| g[k].clamp(-pi[k], pi[k])));
    let mut g = proj(&DVector::from_iterator(b, (0..b).map(|k| pi[k] * c[k].signum())));
    let mut fg = f(&g);
    let mut gr = grad(&g);
    let mut step = 1.0 / p.diagonal().amax().max(1e-12).sqrt();
    for _ in 0..20_000 {
        let mut t = step;
        let (next, f_next) = loop {
            let cand = proj(&(&g + &gr * t));
            let fc = f(&cand);
            if fc >= fg + 1e-4 * gr.dot(&(&cand - &g)) || t < 1e-16 {
                break (cand, fc);
            }
            t *= 0.5;
        };
        let gr_next = grad(&next);
        let s = &next - &g;
        let y = &gr - &gr_next;
        let moved = s.amax();
        g = next;
        gr = gr_next;
        let improved = f_next - fg;
        fg = f_next;
        if moved < 1e-15 || (improved.abs() < 1e-16 * fg.abs().max(1e-300) && moved < 1e-12) {
            break;
        }
        let sy = s.dot(&y);
        step = if sy > 0.0 { s.dot(&s) / sy } else { t * 2.0 };
        step = step.clamp(1e-12, 1e12);
    }
    g
}

/// Lower end of the importance range.
pub fn vi_lower(e: &Ellipsoid, block: Range<usize>, weights: &[f64], mode: ViMode) -> Result<(f64, Vec<f64>)> {
    check_weights(&block, weights)?;
    let work = Work::new(e, block, mode)?;
    if let Some(z) = work.zero_point()? {
        return Ok((0.0, work.lift(&z)));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Ok((0.0, work.lift(work.e.center())));
    }
    let (c, p) = work.projected();
    let g = solve_dual(&c, &p, weights);

    // unpolished primal: minimizer of g^T w over the ellipsoid
    let (w0, _) = work.e.minimize_linear(&work.embed(g.as_slice()))?;
    let mut best = (vi_point(&work.block_values(&w0), weights), w0);

    // polish: coordinates with an interior dual value are zero at the optimum
    let zero: Vec<usize> = (0..g.len()).filter(|&k| g[k].abs() < weights[k] * (1.0 - 1e-7)).collect();
    let fixed: Vec<(usize, f64)> = zero.iter().map(|&k| (work.block[k], 0.0)).collect();
    let slice = work.e.slice_fix_coords(&fixed)?;
    if let Some(inner) = &slice.ellipsoid {
        let mut lin = vec![0.0; inner.dim()];
        let mut any = false;
        for (k, &i) in work.block.iter().enumerate() {
            if zero.contains(&k) {
                continue;
            }
            let pos = slice.free.iter().position(|&f| f == i).expect("free coordinate");
            lin[pos] = weights[k] * g[k].signum();
            any |= lin[pos] != 0.0;
        }
        if any {
            let (wf, _) = inner.minimize_linear(&lin)?;
            let full = slice.lift(wf.as_slice());
            let v = vi_point(&work.block_values(&full), weights);
            if v < best.0 {
                best = (v, full);
            }
        }
    }
    Ok((best.0, work.lift(&best.1)))
}

/// Lower end by enumerating sign patterns and keeping sign-consistent
/// minimizers, after the zero-feasibility check. Misses optima with some
/// but not all block coordinates at zero; kept as a second route.
pub fn vi_lower_enumerate(e: &Ellipsoid, block: Range<usize>, weights: &[f64], mode: ViMode) -> Result<f64> {
    check_weights(&block, weights)?;
    let b = block.len();
    if b > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            feature: 0,
            bins: b,
            limit: ENUMERATION_LIMIT,
        });
    }
    let work = Work::new(e, block, mode)?;
    if work.zero_point()?.is_some() {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    for pattern in 0u32..(1u32 << b) {
        let s: Vec<f64> = (0..b).map(|k| if pattern >> k & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let lin: Vec<f64> = (0..b).map(|k| s[k] * weights[k]).collect();
        if lin.iter().all(|&v| v == 0.0) {
            continue;
        }
        let (w, v) = work.e.minimize_linear(&work.embed(&lin))?;
        let vals = work.block_values(&w);
        if vals.iter().zip(&s).all(|(x, sk)| x * sk >= -1e-12) && v < best {
            best = v;
        }
    }
    Ok(best)
}

/// Upper end: `max_s (pi . s)^T c_J + sqrt(s^T D P D s)` over all sign
/// patterns, visited in Gray-code order with O(B) updates per pattern.
pub fn vi_upper(
    e: &Ellipsoid,
    feature: usize,
    block: Range<usize>,
    weights: &[f64],
    mode: ViMode,
) -> Result<(f64, Vec<f64>)> {
    check_weights(&block, weights)?;
    let b = block.len();
    if b > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            feature,
            bins: b,
            limit: ENUMERATION_LIMIT,
        });
    }
    let work = Work::new(e, block, mode)?;
    let (c, p) = work.projected();
    let pi = weights;
    let mut s = vec![1.0f64; b];
    // pds = P D s
    let mut pds: Vec<f64> = (0..b).map(|i| (0..b).map(|k| p[(i, k)] * pi[k]).sum()).collect();
    let mut quad: f64 = (0..b).map(|k| pi[k] * pds[k]).sum();
    let mut lin: f64 = (0..b).map(|k| pi[k] * c[k]).sum();
    let mut best = (lin + quad.max(0.0).sqrt(), s.clone());
    for step in 1u64..(1u64 << b) {
        let k = step.trailing_zeros() as usize;
        let old = s[k];
        quad += -4.0 * old * pi[k] * pds[k] + 4.0 * pi[k] * pi[k] * p[(k, k)];
        for (i, v) in pds.iter_mut().enumerate() {
            *v -= 2.0 * old * pi[k] * p[(i, k)];
        }
        lin -= 2.0 * old * pi[k] * c[k];
        s[k] = -old;
        let value = lin + quad.max(0.0).sqrt();
        if value > best.0 || (value == best.0 && s < best.1) {
            best = (value, s.clone());
        }
    }
    let g: Vec<f64> = (0..b).map(|k| -best.1[k] * pi[k]).collect();
    if g.iter().all(|&v| v == 0.0) {
        return Ok((0.0, work.lift(work.e.center())));
    }
    let (w, _) = work.e.minimize_linear(&work.embed(&g))?;
    Ok((vi_point(&work.block_values(&w), weights), work.lift(&w)))
}

/// Both ends of the range for one feature block.
pub fn vi_range(
    e: &Ellipsoid,
    feature: usize,
    block: Range<usize>,
    weights: &[f64],
    mode: ViMode,
) -> Result<VariableImportanceRange> {
    let (vi_minus, argmin) = vi_lower(e, block.clone(), weights, mode)?;
    let (vi_plus, argmax) = vi_upper(e, feature, block.clone(), weights, mode)?;
    let center: Vec<f64> = block.clone().map(|i| e.center()[i]).collect();
    Ok(VariableImportanceRange {
        feature,
        mode,
        vi_center: vi_point(&center, weights),
        vi_minus,
        vi_plus,
        argmin,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::tests::random_spd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_examples() {
        assert_eq!(vi_point(&[1.0, -3.0], &[0.5, 0.5]), 2.0);
        assert_eq!(vi_point(&[0.0, 0.0], &[0.5, 0.5]), 0.0);
        assert_eq!(vi_point(&[2.0, -6.0], &[0.5, 0.5]), 4.0);
    }

    #[test]
    fn zero_block_feasible() {
        let e = Ellipsoid::ball(DVector::from_column_slice(&[0.3, 0.0]));
        let (v, w) = vi_lower(&e, 0..2, &[0.5, 0.5], ViMode::Free).unwrap();
        assert_eq!(v, 0.0);
        assert!(e.quad_form(&w) <= 1.0 + 1e-12);
    }

    #[test]
    fn far_block_lower_bound() {
        let e = Ellipsoid::ball(DVector::from_column_slice(&[5.0, 0.0]));
        let (v, w) = vi_lower(&e, 0..2, &[0.5, 0.5], ViMode::Free).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        assert!(e.quad_form(&w) <= 1.0 + 1e-8);
    }

    #[test]
    fn upper_closed_form() {
        let e = Ellipsoid::ball(DVector::from_column_slice(&[0.3, 0.0]));
        let (v, w) = vi_upper(&e, 0, 0..2, &[0.5, 0.5], ViMode::Free).unwrap();
        assert!((v - (0.15 + 0.5f64.sqrt())).abs() < 1e-12);
        assert!(e.quad_form(&w) <= 1.0 + 1e-8);
    }

    #[test]
    fn single_bin_feature() {
        let q = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let e = Ellipsoid::new(q, DVector::from_column_slice(&[1.0, 0.2])).unwrap();
        let (v, _) = vi_upper(&e, 0, 0..1, &[0.7], ViMode::Free).unwrap();
        assert!((v - 0.7 * (1.0 + 0.5)).abs() < 1e-12);
        let (v, _) = vi_lower(&e, 0..1, &[0.7], ViMode::Free).unwrap();
        assert!((v - 0.7 * 0.5).abs() < 1e-9);
    }

    #[test]
    fn routes_agree_and_modes_nest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let d = rng.random_range(3..7);
            let q = random_spd(&mut rng, d) * 4.0;
            let c = DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5));
            let e = Ellipsoid::new(q, c).unwrap();
            let block = 1..d.min(4);
            let w: Vec<f64> = block.clone().map(|_| rng.random_range(0.1..1.0)).collect();
            let (free_lo, a) = vi_lower(&e, block.clone(), &w, ViMode::Free).unwrap();
            let (fix_lo, _) = vi_lower(&e, block.clone(), &w, ViMode::FixOthers).unwrap();
            let (free_hi, b) = vi_upper(&e, 0, block.clone(), &w, ViMode::Free).unwrap();
            let (fix_hi, _) = vi_upper(&e, 0, block.clone(), &w, ViMode::FixOthers).unwrap();
            let enum_lo = vi_lower_enumerate(&e, block.clone(), &w, ViMode::Free).unwrap();
            let center: Vec<f64> = block.clone().map(|i| e.center()[i]).collect();
            let vc = vi_point(&center, &w);
            assert!(free_lo <= enum_lo + 1e-9);
            assert!(free_lo <= fix_lo + 1e-9 && fix_lo <= vc + 1e-9);
            assert!(fix_hi <= free_hi + 1e-9 && vc <= fix_hi + 1e-9);
            assert!(e.quad_form(&a) <= 1.0 + 1e-8 && e.quad_form(&b) <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn lower_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_spd(&mut rng, 3) * 3.0;
        let e = Ellipsoid::new(q, DVector::from_column_slice(&[0.9, -0.7, 0.4])).unwrap();
        let w = [0.3, 0.5, 0.2];
        let (lo, _) = vi_lower(&e, 0..3, &w, ViMode::Free).unwrap();
        let (hi, _) = vi_upper(&e, 0, 0..3, &w, ViMode::Free).unwrap();
        let mut smin = f64::INFINITY;
        let mut smax = 0.0f64;
        for _ in 0..1_000_000 {
            let x = e.sample(&mut rng);
            let v = vi_point(x.as_slice(), &w);
            smin = smin.min(v);
            smax = smax.max(v);
        }
        assert!(lo <= smin + 1e-12 && smin - lo < 1e-2, "{lo} vs {smin}");
        assert!(hi >= smax - 1e-12 && hi - smax < 1e-2, "{hi} vs {smax}");
    }

    #[test]
    fn rescaling_widens_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = Ellipsoid::new(random_spd(&mut rng, 4) * 5.0, DVector::from_column_slice(&[0.2, 1.0, -1.2, 0.4])).unwrap();
        let big = e.rescale(1.5).unwrap();
        let w = [0.4, 0.6];
        let a = vi_range(&e, 0, 1..3, &w, ViMode::Free).unwrap();
        let b = vi_range(&big, 0, 1..3, &w, ViMode::Free).unwrap();
        assert!(b.vi_plus >= a.vi_plus && b.vi_minus <= a.vi_minus);
    }

    #[test]
    fn enumeration_guard() {
        let e = Ellipsoid::ball(DVector::zeros(22));
        let w = vec![0.05; 21];
        assert!(matches!(
            vi_upper(&e, 3, 1..22, &w, ViMode::Free),
            Err(Error::EnumerationLimit { feature: 3, .. })
        ));
    }
}
