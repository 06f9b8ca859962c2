//! Method 1: the inscribed-ellipsoid approximation of a fixed-support
//! Rashomon set. Start from the second-order Taylor ellipsoid at the ERM,
//! then trade volume against the sampled overflow `max(L - theta, 0)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{Ellipsoid, EIGEN_FLOOR};
use crate::error::{Error, Result};
use crate::gam::fit::{fit_reduced, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::gam::{BinnedDataset, GamObjective, SmoothLoss, Support};
use crate::par::map_indexed;

/// How the loss threshold is given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Absolute(f64),
    /// `theta = mult * L*`.
    Multiplier(f64),
}

impl Threshold {
    pub fn resolve(self, erm_loss: f64) -> f64 {
        match self {
            Threshold::Absolute(t) => t,
            Threshold::Multiplier(m) => m * erm_loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Weight of the overflow penalty.
    pub c: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub samples_per_iter: usize,
    /// Best-iterate checkpoints are taken every `eval_every` iterations on a
    /// fixed batch of `eval_samples` draws.
    pub eval_every: usize,
    pub eval_samples: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            c: 500.0,
            learning_rate: 1e-4,
            iterations: 1000,
            samples_per_iter: 32,
            eval_every: 50,
            eval_samples: 512,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("C and learning rate must be positive".into()));
        }
        if self.samples_per_iter == 0 || self.eval_samples == 0 || self.eval_every == 0 {
            return Err(Error::Config("sample counts and eval interval must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RashomonConfig {
    pub theta: Threshold,
    pub lambda2: f64,
    pub lambda_s: f64,
    pub optimizer: OptimizerConfig,
    pub erm_tol: f64,
    pub erm_max_iters: usize,
}

impl Default for RashomonConfig {
    fn default() -> Self {
        Self {
            theta: Threshold::Multiplier(1.01),
            lambda2: 0.001,
            lambda_s: 0.001,
            optimizer: OptimizerConfig::default(),
            erm_tol: DEFAULT_TOL,
            erm_max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub log_volume: f64,
    pub overflow_mean: f64,
    pub outside_frac: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub rows: Vec<TraceRow>,
    /// `(iteration, objective)` at each fixed-batch checkpoint.
    pub checkpoints: Vec<(usize, f64)>,
    pub best_iter: usize,
    /// Iterations at which the factor had to be repaired to stay SPD.
    pub spd_repairs: Vec<usize>,
}

impl FitTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,objective,log_volume,overflow_mean,outside_frac\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iter, r.objective, r.log_volume, r.overflow_mean, r.outside_frac
            ));
        }
        s
    }
}

/// `Q = H / (2 (theta - L*))` centered at the minimizer.
pub fn hessian_init(loss: &dyn SmoothLoss, w_star: &[f64], theta: f64) -> Result<Ellipsoid> {
    let l_star = loss.value(w_star);
    if !(theta > l_star) {
        return Err(Error::EmptyRashomonSet { theta, loss: l_star });
    }
    let h = loss.hessian(w_star);
    Ellipsoid::new(h / (2.0 * (theta - l_star)), DVector::from_column_slice(w_star))
}

/// The ellipsoid is `{c0 + A0 (t + B y) : |y| <= 1}` with `A0` the lower
/// Cholesky factor of the initial `Q^{-1}` and `B` lower triangular with a
/// log-parameterized diagonal. Optimizing relative to `A0` keeps every
/// coordinate on the same scale for Adam.
struct Factor {
    d: usize,
    c0: DVector<f64>,
    a0: DMatrix<f64>,
    log_det_a0: f64,
    t: DVector<f64>,
    b: DMatrix<f64>,
}

impl Factor {
    fn new(init: &Ellipsoid) -> Result<Self> {
        let d = init.dim();
        let a0 = init
            .q_inv()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotSpd("initial ellipsoid".into()))?
            .l();
        let log_det_a0 = (0..d).map(|i| a0[(i, i)].ln()).sum();
        Ok(Self {
            d,
            c0: init.center().clone(),
            a0,
            log_det_a0,
            t: DVector::zeros(d),
            b: DMatrix::identity(d, d),
        })
    }

    fn n_params(&self) -> usize {
        self.d + self.d * (self.d + 1) / 2
    }

    /// `det(Q)^{1/(2d)}`.
    fn volume_term(&self) -> f64 {
        let log_det_b: f64 = (0..self.d).map(|i| self.b[(i, i)].ln()).sum();
        (-(self.log_det_a0 + log_det_b) / self.d as f64).exp()
    }

    fn point(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.c0 + &self.a0 * (&self.t + &self.b * y)
    }

    fn ellipsoid(&self) -> Result<Ellipsoid> {
        Ellipsoid::from_factor(&(&self.a0 * &self.b), self.point(&DVector::zeros(self.d)))
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.t.as_slice().to_vec();
        for i in 0..self.d {
            for j in 0..i {
                p.push(self.b[(i, j)]);
            }
            p.push(self.b[(i, i)].ln());
        }
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let d = self.d;
        self.t.copy_from_slice(&p[..d]);
        let mut k = d;
        for i in 0..d {
            for j in 0..i {
                self.b[(i, j)] = p[k];
                k += 1;
            }
            self.b[(i, i)] = p[k].exp();
            k += 1;
        }
    }

    /// Accumulates the gradient of `v^T y`-style penalty terms: given
    /// `h = A0^T g` for one sample `y`, adds `dx/dparams^T g` to `out`.
    fn add_penalty_grad(&self, h: &DVector<f64>, y: &DVector<f64>, scale: f64, out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            out[i] += scale * h[i];
        }
        let mut k = d;
        for i in 0..d {
            for j in 0..i {
                out[k] += scale * h[i] * y[j];
                k += 1;
            }
            out[k] += scale * h[i] * y[i] * self.b[(i, i)];
            k += 1;
        }
    }

    /// Clamps the eigenvalues of `B B^T` from below and refactors.
    fn repair(&mut self) {
        let bbt = &self.b * self.b.transpose();
        let eig = bbt.symmetric_eigen();
        let max = eig.eigenvalues.max();
        let floor = 1e3 * EIGEN_FLOOR * max;
        let clamped = eig.eigenvalues.map(|l| l.max(floor));
        let fixed = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
        if let Some(ch) = ((&fixed + fixed.transpose()) * 0.5).cholesky() {
            self.b = ch.l();
        } else {
            self.b = DMatrix::identity(self.d, self.d) * max.sqrt();
        }
    }
}

pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    pub(crate) fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr,
        }
    }

    pub(crate) fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub(crate) fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.step += 1;
        let c1 = 1.0 - B1.powi(self.step);
        let c2 = 1.0 - B2.powi(self.step);
        for k in 0..params.len() {
            self.m[k] = B1 * self.m[k] + (1.0 - B1) * grad[k];
            self.v[k] = B2 * self.v[k] + (1.0 - B2) * grad[k] * grad[k];
            params[k] -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + 1e-8);
        }
    }
}

/// Objective pieces over a batch of unit-ball draws.
struct BatchEval {
    overflow_mean: f64,
    outside_frac: f64,
}

fn evaluate_batch(
    factor: &Factor,
    loss: &dyn SmoothLoss,
    theta: f64,
    ys: &[DVector<f64>],
    c: f64,
    grad: Option<&mut [f64]>,
) -> BatchEval {
    let d = factor.d;
    let want_grad = grad.is_some();
    let per_sample = map_indexed(ys.len(), |s| {
        let x = factor.point(&ys[s]);
        let v = loss.value(x.as_slice());
        if v > theta && want_grad {
            let mut g = vec![0.0; d];
            loss.value_and_gradient(x.as_slice(), &mut g);
            let h = factor.a0.tr_mul(&DVector::from_vec(g));
            (v, Some(h))
        } else {
            (v, None)
        }
    });
    let n = ys.len() as f64;
    let mut overflow = 0.0;
    let mut outside = 0usize;
    for (v, _) in &per_sample {
        if *v > theta {
            overflow += v - theta;
            outside += 1;
        }
    }
    if let Some(out) = grad {
        for (s, (_, h)) in per_sample.iter().enumerate() {
            if let Some(h) = h {
                factor.add_penalty_grad(h, &ys[s], c / n, out);
            }
        }
    }
    BatchEval {
        overflow_mean: overflow / n,
        outside_frac: outside as f64 / n,
    }
}

/// Stochastic minimization of `det(Q)^{1/(2d)} + C mean(max(L - theta, 0))`
/// with fresh samples each step. Returns the best checkpointed iterate.
pub fn optimize<R: Rng + ?Sized>(
    init: &Ellipsoid,
    loss: &dyn SmoothLoss,
    theta: f64,
    cfg: &OptimizerConfig,
    rng: &mut R,
) -> Result<(Ellipsoid, FitTrace)> {
    cfg.validate()?;
    if loss.dim() != init.dim() {
        return Err(Error::DimensionMismatch {
            expected: loss.dim(),
            got: init.dim(),
        });
    }
    let d = init.dim();
    let mut factor = Factor::new(init)?;
    let eval_batch: Vec<DVector<f64>> = (0..cfg.eval_samples)
        .map(|_| Ellipsoid::sample_unit_ball(d, rng))
        .collect();
    let checkpoint = |f: &Factor| {
        let e = evaluate_batch(f, loss, theta, &eval_batch, cfg.c, None);
        f.volume_term() + cfg.c * e.overflow_mean
    };

    let mut trace = FitTrace::default();
    let mut params = factor.params();
    let mut best = (checkpoint(&factor), params.clone(), 0usize);
    trace.checkpoints.push((0, best.0));
    let mut adam = Adam::new(factor.n_params(), cfg.learning_rate);
    let mut grad = vec![0.0; factor.n_params()];

    for it in 1..=cfg.iterations {
        let ys: Vec<DVector<f64>> = (0..cfg.samples_per_iter)
            .map(|_| Ellipsoid::sample_unit_ball(d, rng))
            .collect();
        grad.fill(0.0);
        let vol = factor.volume_term();
        // d/db_ii of exp(-(log det A0 + sum b_ii)/d)
        let mut k = d;
        for i in 0..d {
            k += i;
            grad[k] = -vol / d as f64;
            k += 1;
        }
        let batch = evaluate_batch(&factor, loss, theta, &ys, cfg.c, Some(&mut grad));
        trace.rows.push(TraceRow {
            iter: it - 1,
            objective: vol + cfg.c * batch.overflow_mean,
            log_volume: crate::numeric::log_unit_ball_volume(d) - d as f64 * vol.ln(),
            overflow_mean: batch.overflow_mean,
            outside_frac: batch.outside_frac,
        });

        adam.update(&mut params, &grad);
        factor.set_params(&params);
        if factor.ellipsoid().is_err() || params.iter().any(|p| !p.is_finite()) {
            factor.repair();
            params = factor.params();
            trace.spd_repairs.push(it);
        }

        if it % cfg.eval_every == 0 || it == cfg.iterations {
            let obj = checkpoint(&factor);
            trace.checkpoints.push((it, obj));
            if obj < best.0 {
                best = (obj, params.clone(), it);
            }
        }
    }
    factor.set_params(&best.1);
    trace.best_iter = best.2;
    Ok((factor.ellipsoid()?, trace))
}

/// Result of the full pipeline on a binned dataset.
#[derive(Debug, Clone)]
pub struct RashomonFit {
    pub support: Support,
    /// ERM in reduced coordinates (intercept, one entry per run).
    pub erm: Vec<f64>,
    /// Total loss at the ERM, step penalty included.
    pub erm_loss: f64,
    pub theta: f64,
    pub lambda2: f64,
    pub lambda_s: f64,
    pub init: Ellipsoid,
    pub ellipsoid: Ellipsoid,
    pub trace: FitTrace,
}

/// ERM, Taylor initialization and refinement for one support.
pub fn approximate<R: Rng + ?Sized>(
    data: &BinnedDataset,
    support: &Support,
    cfg: &RashomonConfig,
    rng: &mut R,
) -> Result<RashomonFit> {
    let objective = GamObjective::for_support(data, support, cfg.lambda2, cfg.lambda_s)?;
    let erm = fit_reduced(data, support, cfg.lambda2, cfg.erm_tol, cfg.erm_max_iters)?;
    let erm_loss = objective.value(&erm);
    let theta = cfg.theta.resolve(erm_loss);
    let init = hessian_init(&objective, &erm, theta)?;
    let (ellipsoid, trace) = optimize(&init, &objective, theta, &cfg.optimizer, rng)?;
    Ok(RashomonFit {
        support: support.clone(),
        erm,
        erm_loss,
        theta,
        lambda2: cfg.lambda2,
        lambda_s: cfg.lambda_s,
        init,
        ellipsoid,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipsoid::tests::random_spd;
    use crate::gam::QuadraticLoss;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad(d: usize, seed: u64) -> QuadraticLoss {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_spd(&mut rng, d);
        let a = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        QuadraticLoss::new(0.5, a, m).unwrap()
    }

    fn outside_frac(e: &Ellipsoid, loss: &dyn SmoothLoss, theta: f64, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).filter(|_| loss.value(e.sample(&mut rng).as_slice()) > theta).count() as f64 / n as f64
    }

    #[test]
    fn init_is_exact_for_quadratics() {
        let l = quad(3, 1);
        let theta = 1.5;
        let e = hessian_init(&l, l.center().as_slice(), theta).unwrap();
        assert!((e.q() - l.matrix() / (theta - 0.5)).amax() < 1e-12);
        assert_eq!(outside_frac(&e, &l, theta + 1e-12, 5000, 2), 0.0);
        let e2 = hessian_init(&l, l.center().as_slice(), 2.5).unwrap();
        assert!((e2.log_volume() - e.log_volume() - 1.5 * 2f64.ln()).abs() < 1e-10);
        assert!(matches!(
            hessian_init(&l, l.center().as_slice(), 0.5),
            Err(Error::EmptyRashomonSet { .. })
        ));
    }

    #[test]
    fn recovers_from_shrunken_start() {
        let l = quad(3, 3);
        let theta = 1.5;
        let truth = hessian_init(&l, l.center().as_slice(), theta).unwrap();
        let start = truth.rescale(0.5).unwrap();
        let cfg = OptimizerConfig {
            learning_rate: 0.001,
            iterations: 5000,
            ..Default::default()
        };
        let (e, trace) = optimize(&start, &l, theta, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let ratio = (e.log_volume() - truth.log_volume()).exp();
        assert!(ratio >= 0.95, "volume ratio {ratio}");
        assert!(outside_frac(&e, &l, theta, 10_000, 5) <= 0.01);
        assert_eq!(trace.rows.len(), 5000);
    }

    #[test]
    fn huge_penalty_keeps_samples_inside() {
        let l = quad(2, 6);
        let theta = 1.0;
        let init = hessian_init(&l, l.center().as_slice(), theta).unwrap();
        let cfg = OptimizerConfig {
            c: 1e6,
            learning_rate: 0.001,
            iterations: 300,
            ..Default::default()
        };
        let (e, _) = optimize(&init, &l, theta, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert!(outside_frac(&e, &l, theta, 10_000, 8) <= 0.001);
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        // fixed noise, 2-d quadratic, penalty term only
        let l = quad(2, 9);
        let theta = 0.6;
        let init = hessian_init(&l, l.center().as_slice(), theta).unwrap().rescale(1.6).unwrap();
        let mut factor = Factor::new(&init).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ys: Vec<DVector<f64>> = (0..64).map(|_| Ellipsoid::sample_unit_ball(2, &mut rng)).collect();
        let mut p0 = factor.params();
        p0[0] += 0.05;
        p0[3] += 0.1;
        p0[4] -= 0.07;
        factor.set_params(&p0);
        let mut g = vec![0.0; factor.n_params()];
        evaluate_batch(&factor, &l, theta, &ys, 1.0, Some(&mut g));
        let h = 1e-6;
        for k in 0..p0.len() {
            let mut f = |delta: f64| {
                let mut p = p0.clone();
                p[k] += delta;
                factor.set_params(&p);
                evaluate_batch(&factor, &l, theta, &ys, 1.0, None).overflow_mean
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-4 * g[k].abs().max(1e-3), "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn best_so_far_never_increases_and_is_deterministic() {
        let l = quad(3, 11);
        let init = hessian_init(&l, l.center().as_slice(), 1.0).unwrap();
        let cfg = OptimizerConfig {
            iterations: 200,
            learning_rate: 0.01,
            ..Default::default()
        };
        let (a, ta) = optimize(&init, &l, 1.0, &cfg, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        let (b, _) = optimize(&init, &l, 1.0, &cfg, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        assert_eq!(a.q(), b.q());
        assert_eq!(a.center(), b.center());
        let mut best = f64::INFINITY;
        let mut running = Vec::new();
        for &(_, o) in &ta.checkpoints {
            best = best.min(o);
            running.push(best);
        }
        assert!(running.windows(2).all(|w| w[1] <= w[0]));
        let chosen = ta.checkpoints.iter().find(|c| c.0 == ta.best_iter).unwrap().1;
        assert_eq!(chosen, best);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let l = quad(2, 13);
        let init = hessian_init(&l, l.center().as_slice(), 1.0).unwrap();
        let cfg = OptimizerConfig {
            iterations: 5,
            ..Default::default()
        };
        let (_, t) = optimize(&init, &l, 1.0, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("iter,objective,log_volume,overflow_mean,outside_frac\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
