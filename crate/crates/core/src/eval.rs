//! Evaluation harness: sampled precision, baseline ellipsoids (sphere,
//! Taylor start, bootstrap + minimum-volume enclosing ellipsoid), the
//! size/precision tradeoff, and the direct-fit vs. sliced comparison.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::gam::fit::fit_reduced;
use crate::gam::{BinnedDataset, GamObjective, RawDataset, SmoothLoss, Support};
use crate::numeric::{log_unit_ball_volume, sigmoid};
use crate::par::map_indexed;
use crate::rset_block::{enumerate_plans, intersect, MergePlan};
use crate::rset_fit::{approximate, Adam, RashomonConfig, RashomonFit, Threshold};

pub const DEFAULT_PRECISION_SAMPLES: usize = 10_000;
pub const DEFAULT_BOOTSTRAP: usize = 2000;

/// Independent stream for one evaluation cell, so results do not depend on
/// the order cells run in.
pub fn fork_rng(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEstimate {
    pub n_samples: usize,
    pub n_inside: usize,
    pub precision: f64,
    /// Normal-approximation 95% binomial half-width.
    pub half_width: f64,
}

impl PrecisionEstimate {
    pub fn from_counts(n_inside: usize, n_samples: usize) -> Self {
        let p = n_inside as f64 / n_samples as f64;
        Self {
            n_samples,
            n_inside,
            precision: p,
            half_width: 1.96 * (p * (1.0 - p) / n_samples as f64).sqrt(),
        }
    }
}

/// Fraction of uniform draws from `e` whose loss is at most `theta`.
pub fn estimate_precision<R: Rng + ?Sized>(
    e: &Ellipsoid,
    loss: &dyn SmoothLoss,
    theta: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<PrecisionEstimate> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    if e.dim() != loss.dim() {
        return Err(Error::DimensionMismatch {
            expected: loss.dim(),
            got: e.dim(),
        });
    }
    let draws = e.sample_n(n_samples, rng);
    let inside = map_indexed(n_samples, |i| loss.value(draws[i].as_slice()) <= theta);
    Ok(PrecisionEstimate::from_counts(
        inside.iter().filter(|&&b| b).count(),
        n_samples,
    ))
}

/// `precision * Vol(e) / Vol(true)`. Values above 1 mean the volume
/// estimate of the true set is inconsistent.
pub fn recall_proxy(precision: f64, log_vol_e: f64, log_vol_true: f64) -> f64 {
    precision * (log_vol_e - log_vol_true).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    OptimizedEllipsoid,
    HessianInit,
    Sphere,
    BootstrapLogisticMvee,
}

impl BaselineKind {
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::OptimizedEllipsoid => "optimized",
            BaselineKind::HessianInit => "hessian",
            BaselineKind::Sphere => "sphere",
            BaselineKind::BootstrapLogisticMvee => "bootstrap_mvee",
        }
    }
}

/// `Q = cI` around `center` with `c` chosen to hit the target log-volume.
pub fn sphere_baseline(center: DVector<f64>, target_log_volume: f64) -> Result<Ellipsoid> {
    let d = center.len();
    let c = (2.0 * (log_unit_ball_volume(d) - target_log_volume) / d as f64).exp();
    Ellipsoid::new(DMatrix::identity(d, d) * c, center)
}

/// `e` rescaled about its center to the given log-volume.
pub fn match_volume(e: &Ellipsoid, target_log_volume: f64) -> Result<Ellipsoid> {
    e.rescale(e.match_volume_factor(target_log_volume))
}

/// ERMs (reduced coordinates) on `n_boot` resamples drawn with replacement.
/// Bins that a resample leaves empty get zero weight and keep their start
/// value; a resample whose fit fails is replaced by a fresh one.
pub fn bootstrap_models<R: Rng + ?Sized>(
    data: &BinnedDataset,
    support: &Support,
    n_boot: usize,
    lambda2: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let d = support.size() + 1;
    if n_boot < d + 1 {
        return Err(Error::Config(format!("need at least {} bootstrap fits, got {n_boot}", d + 1)));
    }
    let seed: u64 = rng.random();
    let n = data.n();
    let fits = map_indexed(n_boot, |b| {
        let mut r = fork_rng(seed, b as u64);
        for _ in 0..10 {
            let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            let sample = data.select(&idx);
            if let Ok(w) = fit_reduced(&sample, support, lambda2, 1e-8, 100) {
                if w.iter().all(|v| v.is_finite()) {
                    return Ok(w);
                }
            }
        }
        Err(Error::Search(format!("bootstrap replicate {b} failed to fit ten times")))
    });
    fits.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MveeConfig {
    pub c: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    /// Points outside by at most this much of `q` are pulled in by a final
    /// uniform rescale.
    pub snap_tol: f64,
}

impl Default for MveeConfig {
    fn default() -> Self {
        Self {
            c: 1000.0,
            learning_rate: 0.01,
            iterations: 1000,
            snap_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MveeFit {
    pub ellipsoid: Ellipsoid,
    /// Ridge added to a rank-deficient sample covariance (0 if none).
    pub ridge: f64,
    /// Fraction of the input points inside the returned ellipsoid.
    pub covered: f64,
    /// Factor by which `Q` was divided in the final snap (1 if none).
    pub snap: f64,
    pub objective: Vec<f64>,
}

/// Minimizes `-det(Q)^{1/(2d)} + C mean(max(q_i - 1, 0))` with Adam under
/// a cosine learning-rate decay. Works
/// in ZCA-whitened coordinates; the start is the whitening ellipsoid
/// scaled out to the farthest sample, centered at the sample mean.
pub fn mvee_fit(samples: &[Vec<f64>], cfg: &MveeConfig) -> Result<MveeFit> {
    let n = samples.len();
    let d = samples.first().map_or(0, Vec::len);
    if d == 0 || n < d + 1 {
        return Err(Error::Config(format!("need at least d + 1 = {} samples", d + 1)));
    }
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: samples.iter().map(Vec::len).find(|&l| l != d).unwrap_or(d),
        });
    }
    if !(cfg.c > 0.0) || !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("C and learning rate must be positive".into()));
    }

    let x: Vec<DVector<f64>> = samples.iter().map(|s| DVector::from_column_slice(s)).collect();
    let mean = x.iter().fold(DVector::zeros(d), |a, v| a + v) / n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for v in &x {
        let c = v - &mean;
        cov += &c * c.transpose();
    }
    cov /= n as f64;
    let mut ridge = 0.0;
    let eig_min = cov.clone().symmetric_eigenvalues().min();
    if eig_min <= 1e-12 * cov.diagonal().amax().max(0.0) || eig_min <= 0.0 {
        ridge = 1e-8;
        for i in 0..d {
            cov[(i, i)] += ridge;
        }
    }
    let eig = cov.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let log_det_w = -0.5 * eig.eigenvalues.iter().map(|l| l.ln()).sum::<f64>();
    let z: Vec<DVector<f64>> = x.iter().map(|v| &w * (v - &mean)).collect();
    let r_max = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let r0 = if r_max > 0.0 { r_max } else { 1.0 };

    // params: center c (d), then the lower triangle of L row by row with the
    // diagonal stored as its log
    let n_tri = d * (d + 1) / 2;
    let mut params = vec![0.0; d + n_tri];
    let diag_index = |i: usize| d + i * (i + 1) / 2 + i;
    for i in 0..d {
        params[diag_index(i)] = -r0.ln();
    }
    let unpack = |p: &[f64]| {
        let c = DVector::from_column_slice(&p[..d]);
        let mut l = DMatrix::zeros(d, d);
        let mut k = d;
        for i in 0..d {
            for j in 0..=i {
                l[(i, j)] = if i == j { p[k].exp() } else { p[k] };
                k += 1;
            }
        }
        (c, l)
    };
    let scale_w = (log_det_w / d as f64).exp();
    let objective = |p: &[f64], grad: Option<&mut [f64]>| -> f64 {
        let (c, l) = unpack(p);
        let log_diag: f64 = (0..d).map(|i| p[diag_index(i)]).sum();
        let vol = scale_w * (log_diag / d as f64).exp();
        let mut over = 0.0;
        let mut g_c = DVector::zeros(d);
        let mut g_l = DMatrix::zeros(d, d);
        for zi in &z {
            let v = zi - &c;
            let s = l.tr_mul(&v);
            let q = s.norm_squared();
            if q > 1.0 {
                over += q - 1.0;
                if grad.is_some() {
                    g_c -= 2.0 * (&l * &s);
                    g_l += 2.0 * &v * s.transpose();
                }
            }
        }
        let w_over = cfg.c / n as f64;
        if let Some(g) = grad {
            for i in 0..d {
                g[i] = w_over * g_c[i];
            }
            let mut k = d;
            for i in 0..d {
                for j in 0..=i {
                    g[k] = if i == j {
                        w_over * g_l[(i, i)] * l[(i, i)] - vol / d as f64
                    } else {
                        w_over * g_l[(i, j)]
                    };
                    k += 1;
                }
            }
        }
        -vol + w_over * over
    };

    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut grad = vec![0.0; params.len()];
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut best = (f64::INFINITY, params.clone());
    for it in 0..=cfg.iterations {
        // cosine decay from the configured rate; a constant rate keeps
        // bouncing across the hinge kinks
        let t = it as f64 / cfg.iterations.max(1) as f64;
        adam.set_learning_rate(cfg.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()));
        let f = objective(&params, Some(&mut grad));
        trace.push(f);
        if f < best.0 {
            best = (f, params.clone());
        }
        adam.update(&mut params, &grad);
    }

    let (c, l) = unpack(&best.1);
    let q_z = &l * l.transpose();
    let qs: Vec<f64> = z.iter().map(|zi| (zi - &c).dot(&(&q_z * (zi - &c)))).collect();
    let snap = qs
        .iter()
        .copied()
        .filter(|&q| q <= 1.0 + cfg.snap_tol)
        .fold(1.0, f64::max);
    let q = w.transpose() * (q_z / snap) * &w;
    let center = &mean + eig.eigenvectors.clone() * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose() * c;
    let covered = qs.iter().filter(|&&v| v / snap <= 1.0 + 1e-12).count() as f64 / n as f64;
    Ok(MveeFit {
        ellipsoid: Ellipsoid::new(q, center)?,
        ridge,
        covered,
        snap,
        objective: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub rho: f64,
    pub log_volume: f64,
    pub precision: f64,
    pub half_width: f64,
}

/// Precision of `e` rescaled by each factor in `ratios`. Each factor draws
/// from its own stream forked off `seed`.
pub fn tradeoff_curve(
    e: &Ellipsoid,
    loss: &dyn SmoothLoss,
    theta: f64,
    ratios: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<TradeoffRow>> {
    ratios
        .iter()
        .enumerate()
        .map(|(k, &rho)| {
            let scaled = e.rescale(rho)?;
            let p = estimate_precision(&scaled, loss, theta, n_samples, &mut fork_rng(seed, k as u64))?;
            Ok(TradeoffRow {
                rho,
                log_volume: scaled.log_volume(),
                precision: p.precision,
                half_width: p.half_width,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    /// Per-feature merge pairs.
    pub plan: Vec<Vec<usize>>,
    pub u: f64,
    pub precision_direct: f64,
    pub precision_sliced: f64,
    pub precision_ratio: f64,
    pub volume_ratio: f64,
    pub time_direct_s: f64,
    pub time_sliced_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub k_tilde: usize,
    pub rows: Vec<RatioRow>,
    /// Candidate plans drawn and how many of them sliced to an empty set.
    pub candidates: usize,
    pub skipped_empty: usize,
}

impl RatioReport {
    pub fn median_precision_ratio(&self) -> f64 {
        median(self.rows.iter().map(|r| r.precision_ratio).collect())
    }

    pub fn median_volume_ratio(&self) -> f64 {
        median(self.rows.iter().map(|r| r.volume_ratio).collect())
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Compares, per merge plan, the sliced parent (`parent`'s ellipsoid cut by
/// the plan) against a direct fit on the reduced support at the matching
/// threshold `theta - lambda_s (K - K~)`. Draws `n_candidates` plans,
/// shuffles the nonempty ones and evaluates up to `n_plans`. Plans run one
/// at a time so the wall times are not inflated by each other.
#[allow(clippy::too_many_arguments)]
pub fn method_ratio_report(
    data: &BinnedDataset,
    parent: &RashomonFit,
    k_tilde: usize,
    n_plans: usize,
    n_candidates: usize,
    direct: &RashomonConfig,
    n_precision: usize,
    seed: u64,
) -> Result<RatioReport> {
    let support = &parent.support;
    let mut rng = fork_rng(seed, 0);
    let plans = enumerate_plans(support, k_tilde, n_candidates, &mut rng)?;
    let candidates = plans.len();
    let mut nonempty: Vec<MergePlan> = Vec::new();
    for plan in plans {
        if !intersect(&parent.ellipsoid, &plan.groups())?.is_empty() {
            nonempty.push(plan);
        }
    }
    let skipped_empty = candidates - nonempty.len();
    nonempty.shuffle(&mut rng);
    nonempty.truncate(n_plans);

    let bound = parent.theta - parent.lambda_s * (support.size() - k_tilde) as f64;
    let mut rows = Vec::with_capacity(nonempty.len());
    for (k, plan) in nonempty.iter().enumerate() {
        let t = Instant::now();
        let sliced = intersect(&parent.ellipsoid, &plan.groups())?;
        let time_sliced_s = t.elapsed().as_secs_f64();
        let e2 = sliced.ellipsoid.expect("nonempty by selection");

        let reduced = plan.reduced_support(support)?;
        let cfg = RashomonConfig {
            theta: Threshold::Absolute(bound),
            lambda2: parent.lambda2,
            lambda_s: parent.lambda_s,
            ..*direct
        };
        let mut r = fork_rng(seed, 2 * k as u64 + 1);
        let t = Instant::now();
        let fit = approximate(data, &reduced, &cfg, &mut r)?;
        let time_direct_s = t.elapsed().as_secs_f64();

        let loss = GamObjective::for_support(data, &reduced, parent.lambda2, parent.lambda_s)?;
        let mut r = fork_rng(seed, 2 * k as u64 + 2);
        let p1 = estimate_precision(&fit.ellipsoid, &loss, bound, n_precision, &mut r)?;
        let p2 = estimate_precision(&e2, &loss, bound, n_precision, &mut r)?;
        rows.push(RatioRow {
            plan: plan.encode(support),
            u: sliced.u,
            precision_direct: p1.precision,
            precision_sliced: p2.precision,
            precision_ratio: p1.precision / p2.precision,
            volume_ratio: ((fit.ellipsoid.log_volume() - e2.log_volume()) / k_tilde as f64).exp(),
            time_direct_s,
            time_sliced_s,
        });
    }
    Ok(RatioReport {
        k_tilde,
        rows,
        candidates,
        skipped_empty,
    })
}

/// Fraction of rows where `p >= 0.5` matches the label.
pub fn accuracy(probs: &[f64], labels: &[u8]) -> f64 {
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= 0.5) == (y == 1))
        .count();
    hits as f64 / probs.len() as f64
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted as
/// one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    // average ranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            if labels[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPerformance {
    pub accuracy: f64,
    pub auc: f64,
}

/// Accuracy and AUC of reduced parameters on a dataset merged to `support`.
pub fn performance(merged: &BinnedDataset, reduced: &[f64]) -> Result<TestPerformance> {
    if reduced.len() != merged.dim() {
        return Err(Error::DimensionMismatch {
            expected: merged.dim(),
            got: reduced.len(),
        });
    }
    let probs: Vec<f64> = (0..merged.n()).map(|i| sigmoid(merged.margin(reduced, i))).collect();
    Ok(TestPerformance {
        accuracy: accuracy(&probs, merged.labels()),
        auc: auc(&probs, merged.labels()),
    })
}

/// Mean test accuracy and AUC over `n` models drawn from `e`.
pub fn sampled_performance<R: Rng + ?Sized>(
    e: &Ellipsoid,
    merged_test: &BinnedDataset,
    n: usize,
    rng: &mut R,
) -> Result<TestPerformance> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let draws = e.sample_n(n, rng);
    let perf = map_indexed(n, |i| performance(merged_test, draws[i].as_slice()));
    let mut sum = TestPerformance { accuracy: 0.0, auc: 0.0 };
    for p in perf {
        let p = p?;
        sum.accuracy += p.accuracy;
        sum.auc += p.auc;
    }
    Ok(TestPerformance {
        accuracy: sum.accuracy / n as f64,
        auc: sum.auc / n as f64,
    })
}

/// Deterministic `train_frac` / rest split of `0..n` after a seeded shuffle.
pub fn split_indices(n: usize, train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((n as f64) * train_frac).round() as usize;
    let test = idx.split_off(cut.min(n));
    (idx, test)
}

/// Synthetic binary data whose log-odds are step functions of uniform
/// features. Feature `j` steps through `levels` values evenly spaced in
/// `[-amp, amp]`, so quantile bins inside one level share a true
/// coefficient.
pub fn synthetic_steps<R: Rng + ?Sized>(n: usize, p: usize, levels: usize, amp: f64, rng: &mut R) -> Result<RawDataset> {
    if p == 0 || levels == 0 {
        return Err(Error::Config("need at least one feature and one level".into()));
    }
    let shape = |j: usize, x: f64| {
        let k = ((x * levels as f64) as usize).min(levels - 1);
        let t = if levels == 1 { 0.0 } else { k as f64 / (levels - 1) as f64 };
        let v = amp * (2.0 * t - 1.0);
        if j % 2 == 0 {
            v
        } else {
            -v
        }
    };
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let z: f64 = x.iter().enumerate().map(|(j, &v)| shape(j, v)).sum();
        labels.push(u8::from(rng.random::<f64>() < sigmoid(z)));
        rows.push(x);
    }
    RawDataset::new((0..p).map(|j| format!("x{j}")).collect(), rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::tests::random_spd;
    use crate::gam::QuadraticLoss;

    fn quad(d: usize, seed: u64) -> (QuadraticLoss, Ellipsoid) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_spd(&mut rng, d);
        let c = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let l = QuadraticLoss::new(0.0, c.clone(), m.clone()).unwrap();
        (l, Ellipsoid::new(m, c).unwrap())
    }

    #[test]
    fn exact_set_has_full_precision() {
        let (l, e) = quad(3, 1);
        let p = estimate_precision(&e.rescale(1.0 - 1e-9).unwrap(), &l, 1.0, 2000, &mut fork_rng(1, 0)).unwrap();
        assert_eq!(p.precision, 1.0);
        assert_eq!(p.half_width, 0.0);
    }

    #[test]
    fn scaled_precision_matches_volume_ratio() {
        let (l, e) = quad(2, 2);
        let p = estimate_precision(&e.rescale(10.0).unwrap(), &l, 1.0, 100_000, &mut fork_rng(2, 0)).unwrap();
        assert!((p.precision - 0.01).abs() <= 2.0 * p.half_width.max(1e-3), "{p:?}");
    }

    #[test]
    fn recall_proxy_matches_rejection() {
        let (l, e) = quad(3, 3);
        let big = e.rescale(1.2).unwrap();
        let p = estimate_precision(&big, &l, 1.0, 50_000, &mut fork_rng(3, 0)).unwrap();
        assert_eq!(recall_proxy(0.7, 1.0, 1.0), 0.7);
        // the true set sits inside `big`, so its recall is 1
        let r = recall_proxy(p.precision, big.log_volume(), e.log_volume());
        assert!((r - 1.0).abs() < 0.02, "{r}");
        // a shrunken ellipsoid is fully inside: recall = its volume share
        let small = e.rescale(0.8).unwrap();
        let ps = estimate_precision(&small, &l, 1.0, 5000, &mut fork_rng(3, 1)).unwrap();
        let direct = {
            let mut rng = fork_rng(3, 2);
            let n = 50_000;
            (0..n).filter(|_| small.contains(e.sample(&mut rng).as_slice()).unwrap().1).count() as f64 / n as f64
        };
        let rs = recall_proxy(ps.precision, small.log_volume(), e.log_volume());
        assert!((rs - direct).abs() / direct < 0.02, "{rs} vs {direct}");
    }

    #[test]
    fn sphere_volume() {
        let s = sphere_baseline(DVector::zeros(3), log_unit_ball_volume(3)).unwrap();
        assert!((s.q()[(0, 0)] - 1.0).abs() < 1e-12);
        let s2 = sphere_baseline(DVector::zeros(2), log_unit_ball_volume(2) + 2f64.ln()).unwrap();
        assert!((s2.q()[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((s2.log_volume() - log_unit_ball_volume(2) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sphere_loses_to_the_true_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&[25.0, 1.0, 0.04]));
        let l = QuadraticLoss::new(0.0, DVector::zeros(3), m.clone()).unwrap();
        let e = Ellipsoid::new(m, DVector::zeros(3)).unwrap();
        let s = sphere_baseline(DVector::zeros(3), e.log_volume()).unwrap();
        let pe = estimate_precision(&e, &l, 1.0, 5000, &mut rng).unwrap();
        let ps = estimate_precision(&s, &l, 1.0, 5000, &mut rng).unwrap();
        assert!(pe.precision > ps.precision + 0.2);
    }

    #[test]
    fn tradeoff_is_monotone() {
        let (l, e) = quad(3, 5);
        let rows = tradeoff_curve(&e, &l, 1.0, &[0.5, 0.9, 1.0, 1.1, 1.5, 3.0], 4000, 9).unwrap();
        assert_eq!(rows[0].precision, 1.0);
        for w in rows.windows(2) {
            assert!(w[1].precision <= w[0].precision + 2.0 * (w[0].half_width + w[1].half_width) + 1e-12);
        }
        // analytic containment ratio rho^{-d} beyond 1
        let r = rows.iter().find(|r| r.rho == 1.5).unwrap();
        assert!((r.precision - 1.5f64.powi(-3)).abs() < 2.0 * r.half_width + 0.005);
    }

    #[test]
    fn mvee_recovers_boundary_ellipsoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = random_spd(&mut rng, 3);
        let truth = Ellipsoid::new(q, DVector::from_column_slice(&[0.5, -1.0, 2.0])).unwrap();
        let pts: Vec<Vec<f64>> = (0..600)
            .map(|_| {
                let u = Ellipsoid::sample_unit_ball(3, &mut rng);
                let u = &u / u.norm();
                (truth.center() + truth.sampling_map() * u).as_slice().to_vec()
            })
            .collect();
        let fit = mvee_fit(&pts, &MveeConfig::default()).unwrap();
        let rel = (fit.ellipsoid.log_volume() - truth.log_volume()).exp();
        assert!((rel - 1.0).abs() < 0.05, "volume ratio {rel}");
        assert!(fit.covered >= 0.99, "{}", fit.covered);
        assert_eq!(fit.ridge, 0.0);
    }

    #[test]
    fn mvee_identical_points() {
        let pts = vec![vec![1.0, 2.0]; 5];
        let fit = mvee_fit(&pts, &MveeConfig::default()).unwrap();
        assert_eq!(fit.ridge, 1e-8);
        assert!(fit.ellipsoid.log_volume() < -20.0);
        assert_eq!(fit.covered, 1.0);
        assert!(mvee_fit(&pts[..2], &MveeConfig::default()).is_err());
    }

    #[test]
    fn auc_and_accuracy() {
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]), 0.75);
        assert_eq!(auc(&[0.5, 0.5], &[0, 1]), 0.5);
        assert_eq!(accuracy(&[0.1, 0.6, 0.5], &[0, 0, 1]), 2.0 / 3.0);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn split_is_a_partition() {
        let (a, b) = split_indices(10, 0.8, 1);
        assert_eq!(a.len(), 8);
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.8, 1), split_indices(10, 0.8, 1));
    }

    fn synthetic_binned(n: usize, seed: u64) -> BinnedDataset {
        let raw = synthetic_steps(n, 2, 3, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let spec = crate::gam::make_quantile_spec(&raw, 4).unwrap();
        crate::gam::bin(&raw, &spec).unwrap()
    }

    #[test]
    fn bootstrap_spread_shrinks_with_n() {
        let spread = |n: usize| {
            let data = synthetic_binned(n, 7);
            let support = Support::full(&data.bins_per_feature());
            let fits = bootstrap_models(&data, &support, 40, 0.001, &mut fork_rng(7, 0)).unwrap();
            assert!(fits.iter().flatten().all(|v| v.is_finite()));
            let d = fits[0].len();
            (0..d)
                .map(|k| {
                    let m = fits.iter().map(|f| f[k]).sum::<f64>() / fits.len() as f64;
                    fits.iter().map(|f| (f[k] - m).powi(2)).sum::<f64>() / fits.len() as f64
                })
                .sum::<f64>()
        };
        assert!(spread(4000) < 0.5 * spread(400));
    }

    #[test]
    fn bootstrap_needs_enough_replicates() {
        let data = synthetic_binned(200, 8);
        let support = Support::full(&data.bins_per_feature());
        assert!(bootstrap_models(&data, &support, 3, 0.001, &mut fork_rng(1, 0)).is_err());
    }
}
