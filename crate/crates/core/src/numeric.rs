//! Small numeric helpers shared across modules.

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pairwise summation of `f(0) + ... + f(n - 1)`. The split points depend
/// only on `n`, so the result is reproducible.
pub fn pairwise_sum(n: usize, f: &impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= 64 {
            (lo..hi).map(f).sum()
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, f) + go(mid, hi, f)
        }
    }
    go(0, n, f)
}

/// Natural log of the volume of the unit ball in `d` dimensions.
pub fn log_unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} * 2 pi / d
    let mut acc = if d % 2 == 0 { 0.0 } else { 2f64.ln() };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        acc += (2.0 * std::f64::consts::PI / k as f64).ln();
        k += 2;
    }
    acc
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(-800.0), 0.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn unit_ball_volumes() {
        use std::f64::consts::PI;
        assert!((log_unit_ball_volume(1) - 2f64.ln()).abs() < 1e-15);
        assert!((log_unit_ball_volume(2) - PI.ln()).abs() < 1e-15);
        assert!((log_unit_ball_volume(3) - (4.0 * PI / 3.0).ln()).abs() < 1e-14);
        assert!((log_unit_ball_volume(4) - (PI * PI / 2.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn pairwise_matches_naive() {
        let f = |i: usize| (i as f64).sin();
        let naive: f64 = (0..10_000).map(f).sum();
        assert!((pairwise_sum(10_000, &f) - naive).abs() < 1e-10);
    }
}
