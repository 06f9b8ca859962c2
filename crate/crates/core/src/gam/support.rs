use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of each feature's bins into contiguous runs sharing one
/// coefficient. Runs are inclusive `(first_bin, last_bin)` pairs in the
/// feature's local bin numbering.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Support {
    runs: Vec<Vec<(usize, usize)>>,
}

impl Support {
    pub fn new(runs: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        for (j, feature_runs) in runs.iter().enumerate() {
            if feature_runs.is_empty() {
                return Err(Error::Support(format!("feature {j} has no runs")));
            }
            let mut next = 0;
            for &(a, b) in feature_runs {
                if a != next || b < a {
                    return Err(Error::Support(format!(
                        "runs of feature {j} must tile its bins contiguously from 0"
                    )));
                }
                next = b + 1;
            }
        }
        Ok(Self { runs })
    }

    /// Every bin is its own run.
    pub fn full(bins_per_feature: &[usize]) -> Self {
        Self {
            runs: bins_per_feature
                .iter()
                .map(|&b| (0..b).map(|k| (k, k)).collect())
                .collect(),
        }
    }

    /// Merges adjacent bins whose coefficients differ by at most `tol`
    /// (chained left to right).
    pub fn from_coefficients(omega: &[f64], bins_per_feature: &[usize], tol: f64) -> Result<Self> {
        let m: usize = bins_per_feature.iter().sum();
        if omega.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: omega.len(),
            });
        }
        let mut runs = Vec::with_capacity(bins_per_feature.len());
        let mut offset = 0;
        for &b in bins_per_feature {
            let w = &omega[offset..offset + b];
            let mut feature_runs = Vec::new();
            let mut start = 0;
            for k in 1..b {
                if (w[k] - w[k - 1]).abs() > tol {
                    feature_runs.push((start, k - 1));
                    start = k;
                }
            }
            feature_runs.push((start, b - 1));
            runs.push(feature_runs);
            offset += b;
        }
        Ok(Self { runs })
    }

    pub fn runs(&self) -> &[Vec<(usize, usize)>] {
        &self.runs
    }

    pub fn n_features(&self) -> usize {
        self.runs.len()
    }

    /// Support size K: the number of distinct coefficients (runs).
    pub fn size(&self) -> usize {
        self.runs.iter().map(Vec::len).sum()
    }

    /// Number of steps in the shape functions, `K - p`.
    pub fn steps(&self) -> usize {
        self.size() - self.n_features()
    }

    pub fn bins_per_feature(&self) -> Vec<usize> {
        self.runs
            .iter()
            .map(|r| r.last().map_or(0, |&(_, b)| b + 1))
            .collect()
    }

    pub fn check_bins(&self, bins_per_feature: &[usize]) -> Result<()> {
        if self.bins_per_feature() != bins_per_feature {
            return Err(Error::Support(format!(
                "support covers bins {:?}, dataset has {:?}",
                self.bins_per_feature(),
                bins_per_feature
            )));
        }
        Ok(())
    }

    /// Column ranges of the merged design, one block per feature.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut offset = 0;
        self.runs
            .iter()
            .map(|r| {
                let b = offset..offset + r.len();
                offset += r.len();
                b
            })
            .collect()
    }

    /// For each original bin column, the merged column it belongs to.
    pub fn column_map(&self) -> Vec<usize> {
        let mut map = Vec::new();
        let mut col = 0;
        for feature_runs in &self.runs {
            for &(a, b) in feature_runs {
                map.extend(std::iter::repeat_n(col, b - a + 1));
                col += 1;
            }
        }
        map
    }

    /// Expands a reduced parameter vector (intercept first, one entry per
    /// run) to one entry per bin.
    pub fn expand(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        if reduced.len() != self.size() + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.size() + 1,
                got: reduced.len(),
            });
        }
        let mut full = vec![reduced[0]];
        full.extend(self.column_map().into_iter().map(|c| reduced[c + 1]));
        Ok(full)
    }

    /// Collapses a full parameter vector onto the runs, averaging within each
    /// run.
    pub fn restrict(&self, full: &[f64]) -> Result<Vec<f64>> {
        let map = self.column_map();
        if full.len() != map.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: map.len() + 1,
                got: full.len(),
            });
        }
        let mut sums = vec![0.0; self.size()];
        let mut counts = vec![0usize; self.size()];
        for (c, &r) in map.iter().enumerate() {
            sums[r] += full[c + 1];
            counts[r] += 1;
        }
        let mut reduced = vec![full[0]];
        reduced.extend(sums.iter().zip(&counts).map(|(s, &n)| s / n as f64));
        Ok(reduced)
    }

    /// Coarsens this support by merging groups of its runs. `groups` holds
    /// inclusive ranges of run indices in the global run numbering (0-based,
    /// intercept excluded); each range must stay inside one feature.
    pub fn merge_runs(&self, groups: &[(usize, usize)]) -> Result<Self> {
        let blocks = self.blocks();
        let mut merge_into_prev = vec![false; self.size()];
        for &(a, b) in groups {
            let j = blocks.partition_point(|r| r.end <= a);
            if j >= blocks.len() || b >= blocks[j].end || b < a {
                return Err(Error::Plan(format!(
                    "run range [{a}, {b}] does not lie inside one feature"
                )));
            }
            for flag in &mut merge_into_prev[a + 1..=b] {
                *flag = true;
            }
        }
        let runs = self
            .runs
            .iter()
            .zip(&blocks)
            .map(|(feature_runs, block)| {
                let mut out: Vec<(usize, usize)> = Vec::new();
                for (r, &(a, b)) in feature_runs.iter().enumerate() {
                    if merge_into_prev[block.start + r] {
                        out.last_mut().unwrap().1 = b;
                    } else {
                        out.push((a, b));
                    }
                }
                out
            })
            .collect();
        Ok(Self { runs })
    }
}
