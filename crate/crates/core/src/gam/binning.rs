use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::dataset::RawDataset;
use super::support::Support;
use crate::error::{Error, Result};

/// Per-feature bin edges. Bin `k` of feature `j` is the half-open interval
/// `(edges[j][k], edges[j][k + 1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinningSpec {
    edges: Vec<Vec<f64>>,
}

impl BinningSpec {
    pub fn new(edges: Vec<Vec<f64>>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::BinningSpec("no features".into()));
        }
        for (j, e) in edges.iter().enumerate() {
            if e.len() < 2 {
                return Err(Error::BinningSpec(format!(
                    "feature {j} needs at least two edges, got {}",
                    e.len()
                )));
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(Error::BinningSpec(format!("feature {j} has a non-finite edge")));
            }
            if e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::BinningSpec(format!(
                    "edges of feature {j} are not strictly increasing"
                )));
            }
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    pub fn bins(&self, j: usize) -> usize {
        self.edges[j].len() - 1
    }

    pub fn bins_per_feature(&self) -> Vec<usize> {
        (0..self.n_features()).map(|j| self.bins(j)).collect()
    }

    /// Index of the bin holding `x`, or `None` when `x` is outside `(b_0, b_B]`.
    pub fn locate(&self, j: usize, x: f64) -> Option<usize> {
        let e = &self.edges[j];
        let idx = e.partition_point(|&b| b < x);
        (idx >= 1 && idx < e.len()).then(|| idx - 1)
    }

    /// Drops the inner edges that separate bins merged by `support`.
    pub fn coarsen(&self, support: &Support) -> Result<Self> {
        support.check_bins(&self.bins_per_feature())?;
        let edges = self
            .edges
            .iter()
            .zip(support.runs())
            .map(|(e, runs)| {
                let mut out = vec![e[0]];
                out.extend(runs.iter().map(|&(_, end)| e[end + 1]));
                out
            })
            .collect();
        Self::new(edges)
    }
}

/// Equal-frequency bin edges with duplicate quantiles collapsed.
pub fn make_quantile_spec(raw: &RawDataset, max_bins_per_feature: usize) -> Result<BinningSpec> {
    if max_bins_per_feature == 0 {
        return Err(Error::BinningSpec("max_bins_per_feature must be at least 1".into()));
    }
    let n = raw.n();
    let edges = (0..raw.p())
        .map(|j| {
            let mut v = raw.column(j);
            v.sort_by(f64::total_cmp);
            let (min, max) = (v[0], v[n - 1]);
            let pad = 1e-3 * (max - min).max(1.0);
            let mut e = vec![min - pad];
            for q in 1..max_bins_per_feature {
                let idx = (q * n).div_ceil(max_bins_per_feature).saturating_sub(1);
                let cut = v[idx];
                if cut > *e.last().unwrap() && cut < max {
                    e.push(cut);
                }
            }
            e.push(max);
            e
        })
        .collect();
    BinningSpec::new(edges)
}

/// One-hot binned design. Column indices run over all bins of all features;
/// the parameter vectors used elsewhere put the intercept at index 0 and
/// column `c` at index `c + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDataset {
    n: usize,
    p: usize,
    /// Row-major `n x p`: the active column of each feature block.
    active: Vec<u32>,
    counts: Vec<usize>,
    pi: Vec<f64>,
    labels: Vec<u8>,
    blocks: Vec<Range<usize>>,
    feature_names: Vec<String>,
}

pub fn bin(raw: &RawDataset, spec: &BinningSpec) -> Result<BinnedDataset> {
    if spec.n_features() != raw.p() {
        return Err(Error::DimensionMismatch {
            expected: raw.p(),
            got: spec.n_features(),
        });
    }
    let mut blocks = Vec::with_capacity(raw.p());
    let mut offset = 0;
    for j in 0..raw.p() {
        blocks.push(offset..offset + spec.bins(j));
        offset += spec.bins(j);
    }
    let mut active = Vec::with_capacity(raw.n() * raw.p());
    for (i, row) in raw.rows().iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            let k = spec.locate(j, x).ok_or_else(|| {
                let e = &spec.edges()[j];
                Error::OutOfRange {
                    feature: raw.feature_names()[j].clone(),
                    row: i,
                    value: x,
                    lo: e[0],
                    hi: e[e.len() - 1],
                }
            })?;
            active.push((blocks[j].start + k) as u32);
        }
    }
    Ok(BinnedDataset::from_parts(
        raw.n(),
        active,
        raw.labels().to_vec(),
        blocks,
        raw.feature_names().to_vec(),
    ))
}

impl BinnedDataset {
    fn from_parts(
        n: usize,
        active: Vec<u32>,
        labels: Vec<u8>,
        blocks: Vec<Range<usize>>,
        feature_names: Vec<String>,
    ) -> Self {
        let p = blocks.len();
        let m = blocks.last().map_or(0, |b| b.end);
        let mut counts = vec![0usize; m];
        for &c in &active {
            counts[c as usize] += 1;
        }
        let pi = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Self {
            n,
            p,
            active,
            counts,
            pi,
            labels,
            blocks,
            feature_names,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Total number of bins (columns), excluding the intercept.
    pub fn m(&self) -> usize {
        self.pi.len()
    }

    /// Length of a parameter vector: intercept plus one coefficient per column.
    pub fn dim(&self) -> usize {
        self.m() + 1
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn bins_per_feature(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    /// Active columns of row `i`, one per feature.
    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.active[i * self.p..(i + 1) * self.p]
    }

    /// The design obtained by merging the bins of every support run into one
    /// column.
    pub fn merge(&self, support: &Support) -> Result<BinnedDataset> {
        support.check_bins(&self.bins_per_feature())?;
        let map = support.column_map();
        let active = self.active.iter().map(|&c| map[c as usize] as u32).collect();
        Ok(Self::from_parts(
            self.n,
            active,
            self.labels.clone(),
            support.blocks(),
            self.feature_names.clone(),
        ))
    }

    /// Rows picked by index (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> BinnedDataset {
        let mut active = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            active.extend_from_slice(self.row(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::from_parts(
            indices.len(),
            active,
            labels,
            self.blocks.clone(),
            self.feature_names.clone(),
        )
    }

    /// Linear predictor `w0 + sum_j w[active_j + 1]` for row `i`.
    #[inline]
    pub fn margin(&self, w: &[f64], i: usize) -> f64 {
        self.row(i).iter().fold(w[0], |z, &c| z + w[c as usize + 1])
    }

    /// Which feature block holds column `c`.
    pub fn feature_of(&self, c: usize) -> usize {
        self.blocks.partition_point(|b| b.end <= c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw1(values: &[f64]) -> RawDataset {
        RawDataset::new(
            vec!["x".into()],
            values.iter().map(|&v| vec![v]).collect(),
            values.iter().map(|_| 0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn bins_are_closed_on_the_right() {
        let spec = BinningSpec::new(vec![vec![0.0, 1.0, 2.0]]).unwrap();
        let data = bin(&raw1(&[0.5, 1.5]), &spec).unwrap();
        assert_eq!(data.row(0), &[0]);
        assert_eq!(data.row(1), &[1]);
        assert_eq!(data.pi(), &[0.5, 0.5]);

        let data = bin(&raw1(&[1.0]), &spec).unwrap();
        assert_eq!(data.row(0), &[0]);
    }

    #[test]
    fn out_of_range_names_feature_and_row() {
        let spec = BinningSpec::new(vec![vec![0.0, 1.0, 2.0]]).unwrap();
        let err = bin(&raw1(&[0.5, 0.0]), &spec).unwrap_err();
        match err {
            Error::OutOfRange { feature, row, .. } => {
                assert_eq!(feature, "x");
                assert_eq!(row, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(bin(&raw1(&[2.5]), &spec).is_err());
    }

    #[test]
    fn non_monotone_edges_rejected() {
        assert!(matches!(
            BinningSpec::new(vec![vec![0.0, 2.0, 1.0]]),
            Err(Error::BinningSpec(_))
        ));
        assert!(BinningSpec::new(vec![vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn quantile_spec_equal_frequency() {
        let raw = raw1(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let spec = make_quantile_spec(&raw, 4).unwrap();
        assert_eq!(spec.bins(0), 4);
        let data = bin(&raw, &spec).unwrap();
        assert_eq!(data.pi(), &[0.25; 4]);
    }

    #[test]
    fn quantile_spec_collapses_duplicates() {
        let raw = raw1(&[1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 1.0]);
        assert_eq!(make_quantile_spec(&raw, 8).unwrap().bins(0), 2);

        let raw = raw1(&[3.0; 5]);
        let spec = make_quantile_spec(&raw, 8).unwrap();
        assert_eq!(spec.bins(0), 1);
        assert_eq!(bin(&raw, &spec).unwrap().pi(), &[1.0]);
    }

    #[test]
    fn quantile_spec_uniform_integers() {
        let values: Vec<f64> = (0..100).map(f64::from).collect();
        let raw = raw1(&values);
        let spec = make_quantile_spec(&raw, 4).unwrap();
        // sorted-order quantiles: the 25th, 50th and 75th values
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(&spec.edges()[0][1..4], &[sorted[24], sorted[49], sorted[74]]);
        let data = bin(&raw, &spec).unwrap();
        for &pi in data.pi() {
            assert!((pi - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn merge_sums_occupancy() {
        let spec = BinningSpec::new(vec![vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0]]).unwrap();
        let raw = RawDataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.5, 0.5], vec![1.5, 0.5], vec![2.5, 0.5], vec![2.5, 0.5]],
            vec![0, 1, 0, 1],
        )
        .unwrap();
        let data = bin(&raw, &spec).unwrap();
        let support = Support::new(vec![vec![(0, 1), (2, 2)], vec![(0, 0)]]).unwrap();
        let merged = data.merge(&support).unwrap();
        assert_eq!(merged.m(), 3);
        assert_eq!(merged.pi(), &[0.5, 0.5, 1.0]);
        assert_eq!(merged.row(1), &[0, 2]);
        let coarse = spec.coarsen(&support).unwrap();
        assert_eq!(coarse.edges()[0], vec![0.0, 2.0, 3.0]);
        assert_eq!(bin(&raw, &coarse).unwrap(), merged);
    }
}
