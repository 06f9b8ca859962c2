//! Method 2: Rashomon ellipsoids for coarser supports, obtained by slicing a
//! fitted ellipsoid with the hyperplanes that tie merged coefficients.
//!
//! Coordinates follow the ellipsoid: index 0 is the intercept and index
//! `r + 1` is support run `r`.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::gam::Support;
use crate::par::map_indexed;

/// Maps each original coordinate to its merged coordinate, given disjoint
/// inclusive ranges of coordinates to tie together.
pub fn coordinate_map(dim: usize, groups: &[(usize, usize)]) -> Result<Vec<usize>> {
    let mut owner = vec![usize::MAX; dim];
    for (g, &(a, b)) in groups.iter().enumerate() {
        if a > b || b >= dim {
            return Err(Error::Plan(format!("range [{a}, {b}] is invalid for dimension {dim}")));
        }
        for o in &mut owner[a..=b] {
            if *o != usize::MAX {
                return Err(Error::Plan(format!("range [{a}, {b}] overlaps another group")));
            }
            *o = g;
        }
    }
    let mut map = vec![0; dim];
    let mut next = 0;
    for i in 0..dim {
        let continues = i > 0 && owner[i] != usize::MAX && owner[i] == owner[i - 1];
        if !continues && i > 0 {
            next += 1;
        }
        map[i] = next;
    }
    Ok(map)
}

/// `A^T Q A` where `A` duplicates each merged coordinate into its group:
/// rows and columns of every group are summed.
pub fn merge_quadratic(q: &DMatrix<f64>, groups: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    let map = coordinate_map(q.nrows(), groups)?;
    let k = map.last().map_or(0, |&m| m + 1);
    let mut out = DMatrix::zeros(k, k);
    for j in 0..q.ncols() {
        for i in 0..q.nrows() {
            out[(map[i], map[j])] += q[(i, j)];
        }
    }
    Ok(out)
}

/// `A^T l`: entries of each group summed.
pub fn merge_linear(l: &DVector<f64>, groups: &[(usize, usize)]) -> Result<DVector<f64>> {
    let map = coordinate_map(l.len(), groups)?;
    let k = map.last().map_or(0, |&m| m + 1);
    let mut out = DVector::zeros(k);
    for (i, &m) in map.iter().enumerate() {
        out[m] += l[i];
    }
    Ok(out)
}

/// A parent ellipsoid restricted to a merge subspace.
#[derive(Debug, Clone)]
pub struct SlicedRashomon {
    /// `None` when the slice is empty (`u <= 0`).
    pub ellipsoid: Option<Ellipsoid>,
    pub u: f64,
    /// Upper bound on the total loss of members (parent threshold minus the
    /// step penalty saved by merging). `NaN` when no threshold was attached.
    pub loss_bound: f64,
    /// Original coordinate -> reduced coordinate.
    pub coord_map: Vec<usize>,
}

impl SlicedRashomon {
    pub fn is_empty(&self) -> bool {
        self.u <= 0.0
    }

    /// Lifts a reduced vector back to the parent's coordinates.
    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        self.coord_map.iter().map(|&m| v[m]).collect()
    }
}

/// Intersects `e` with the subspace where every group shares one value.
pub fn intersect(e: &Ellipsoid, groups: &[(usize, usize)]) -> Result<SlicedRashomon> {
    let coord_map = coordinate_map(e.dim(), groups)?;
    let q_t = merge_quadratic(e.q(), groups)?;
    let l_t = merge_linear(&(e.q() * e.center()), groups)?;
    let chol = q_t
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("merged quadratic form".into()))?;
    let c_t = chol.solve(&l_t);
    // 1 - c^T Q c + c~^T Q~ c~, evaluated as 1 - q(A c~) to avoid cancellation
    let lifted: Vec<f64> = coord_map.iter().map(|&m| c_t[m]).collect();
    let u = 1.0 - e.quad_form(&lifted);
    let ellipsoid = if u > 0.0 {
        Some(Ellipsoid::new(q_t / u, c_t)?)
    } else {
        None
    };
    Ok(SlicedRashomon {
        ellipsoid,
        u,
        loss_bound: f64::NAN,
        coord_map,
    })
}

/// `1 - c^T Q c + c~^T Q~ c~` as written, without the stabilized
/// evaluation. Kept as a reference.
pub fn level_direct(e: &Ellipsoid, groups: &[(usize, usize)]) -> Result<f64> {
    let q_t = merge_quadratic(e.q(), groups)?;
    let l_t = merge_linear(&(e.q() * e.center()), groups)?;
    let c_t = q_t
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("merged quadratic form".into()))?
        .solve(&l_t);
    Ok(1.0 - e.center().dot(&(e.q() * e.center())) + c_t.dot(&(&q_t * &c_t)))
}

/// A set of adjacent-run merges. `pairs` holds global pair indices: pair
/// `r` ties run `r` to run `r + 1` of the same feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MergePlan {
    pairs: Vec<usize>,
}

impl MergePlan {
    pub fn new(mut pairs: Vec<usize>, support: &Support) -> Result<Self> {
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Plan("duplicate merge pair".into()));
        }
        let blocks = support.blocks();
        for &r in &pairs {
            let j = blocks.partition_point(|b| b.end <= r);
            if j >= blocks.len() || r + 1 >= blocks[j].end {
                return Err(Error::Plan(format!("pair {r} crosses a feature boundary")));
            }
        }
        Ok(Self { pairs })
    }

    /// The plan that merges nothing.
    pub fn identity() -> Self {
        Self { pairs: Vec::new() }
    }

    pub fn pairs(&self) -> &[usize] {
        &self.pairs
    }

    pub fn n_merges(&self) -> usize {
        self.pairs.len()
    }

    /// Merged coordinate ranges in ellipsoid coordinates (intercept at 0).
    pub fn groups(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &r in &self.pairs {
            match out.last_mut() {
                Some(last) if last.1 == r + 1 => last.1 = r + 2,
                _ => out.push((r + 1, r + 2)),
            }
        }
        out
    }

    /// Same groups in run numbering (no intercept offset).
    pub fn run_groups(&self) -> Vec<(usize, usize)> {
        self.groups().into_iter().map(|(a, b)| (a - 1, b - 1)).collect()
    }

    /// Per feature, the local pair indices.
    pub fn encode(&self, support: &Support) -> Vec<Vec<usize>> {
        let blocks = support.blocks();
        let mut out = vec![Vec::new(); blocks.len()];
        for &r in &self.pairs {
            let j = blocks.partition_point(|b| b.end <= r);
            out[j].push(r - blocks[j].start);
        }
        out
    }

    pub fn decode(encoded: &[Vec<usize>], support: &Support) -> Result<Self> {
        let blocks = support.blocks();
        if encoded.len() != blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: blocks.len(),
                got: encoded.len(),
            });
        }
        let pairs = encoded
            .iter()
            .zip(&blocks)
            .flat_map(|(local, b)| local.iter().map(move |&k| b.start + k))
            .collect();
        Self::new(pairs, support)
    }

    pub fn reduced_support(&self, support: &Support) -> Result<Support> {
        support.merge_runs(&self.run_groups())
    }
}

/// `binom(K - p, K - K~)`.
pub fn count_subsets(k: usize, p: usize, k_tilde: usize) -> Result<u128> {
    if k_tilde < p {
        return Err(Error::Plan(format!(
            "target size {k_tilde} is below the feature count {p}; merges cannot cross features"
        )));
    }
    if k_tilde > k || p > k {
        return Err(Error::Plan(format!("target size {k_tilde} exceeds support size {k}")));
    }
    let n = (k - p) as u128;
    let r = ((k - k_tilde) as u128).min(n - (k - k_tilde) as u128);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc
            .checked_mul(n - i)
            .ok_or_else(|| Error::Overflow(format!("binom({n}, {r})")))?
            / (i + 1);
    }
    Ok(acc)
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let r = c.len();
    for i in (0..r).rev() {
        if c[i] < n - r + i {
            c[i] += 1;
            for j in i + 1..r {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All plans reaching size `k_tilde` if there are at most `limit`,
/// otherwise `limit` distinct plans drawn uniformly without replacement.
/// Output is in canonical order.
pub fn enumerate_plans<R: Rng + ?Sized>(
    support: &Support,
    k_tilde: usize,
    limit: usize,
    rng: &mut R,
) -> Result<Vec<MergePlan>> {
    let k = support.size();
    let p = support.n_features();
    let total = count_subsets(k, p, k_tilde).unwrap_or(u128::MAX);
    // mergeable pairs in global numbering
    let candidates: Vec<usize> = support
        .blocks()
        .iter()
        .flat_map(|b| b.start..b.end.saturating_sub(1))
        .collect();
    let r = k - k_tilde;
    let n = candidates.len();
    if total <= limit as u128 {
        let mut out = Vec::with_capacity(total as usize);
        let mut c: Vec<usize> = (0..r).collect();
        loop {
            out.push(MergePlan {
                pairs: c.iter().map(|&i| candidates[i]).collect(),
            });
            if !next_combination(&mut c, n) {
                break;
            }
        }
        return Ok(out);
    }
    let mut seen = HashSet::with_capacity(limit);
    let mut draws = 0usize;
    while seen.len() < limit {
        if draws >= 100 * limit {
            return Err(Error::Plan(format!(
                "collected {} distinct plans after {draws} draws",
                seen.len()
            )));
        }
        draws += 1;
        let mut idx = rand::seq::index::sample(rng, n, r).into_vec();
        idx.sort_unstable();
        seen.insert(MergePlan {
            pairs: idx.into_iter().map(|i| candidates[i]).collect(),
        });
    }
    let mut out: Vec<MergePlan> = seen.into_iter().collect();
    out.sort();
    Ok(out)
}

/// Slices `e` (fitted at threshold `theta` for `support`) along every
/// enumerated plan and keeps the nonempty ones, each tagged with
/// `theta - lambda_s (K - K~)`.
pub fn explore<R: Rng + ?Sized>(
    e: &Ellipsoid,
    support: &Support,
    k_tilde: usize,
    limit: usize,
    theta: f64,
    lambda_s: f64,
    rng: &mut R,
) -> Result<Vec<(MergePlan, SlicedRashomon)>> {
    if e.dim() != support.size() + 1 {
        return Err(Error::DimensionMismatch {
            expected: support.size() + 1,
            got: e.dim(),
        });
    }
    let plans = enumerate_plans(support, k_tilde, limit, rng)?;
    let bound = theta - lambda_s * (support.size() - k_tilde) as f64;
    let slices = map_indexed(plans.len(), |i| intersect(e, &plans[i].groups()));
    let mut out = Vec::new();
    for (plan, slice) in plans.into_iter().zip(slices) {
        let mut slice = slice?;
        if !slice.is_empty() {
            slice.loss_bound = bound;
            out.push((plan, slice));
        }
    }
    Ok(out)
}
