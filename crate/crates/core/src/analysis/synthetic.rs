//! Synthetic return series used as positive and negative controls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit-variance Student-t with 3 degrees of freedom.
fn t3(rng: &mut ChaCha8Rng, dist: &StudentT<f64>) -> f64 {
    dist.sample(rng) / 3f64.sqrt()
}

pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

pub fn student_t3(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let d = StudentT::new(3.0).expect("valid dof");
    (0..n).map(|_| t3(&mut r, &d)).collect()
}

/// GARCH(1,1) with unit-variance t(3) innovations and unconditional variance 1.
pub fn garch_t3(n: usize, alpha: f64, beta: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let d = StudentT::new(3.0).expect("valid dof");
    let omega = 1.0 - alpha - beta;
    let mut var: f64 = 1.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = var.sqrt() * t3(&mut r, &d);
        out.push(x);
        var = omega + alpha * x * x + beta * var;
    }
    out
}

/// GJR-GARCH with Gaussian innovations: negative returns raise later
/// variance more than positive ones.
pub fn leverage_garch(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let (alpha, gamma, beta) = (0.02, 0.15, 0.88);
    let omega = 1.0 - alpha - gamma / 2.0 - beta;
    let mut var: f64 = 1.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = var.sqrt() * r.sample::<f64, _>(StandardNormal);
        out.push(x);
        let neg = if x < 0.0 { gamma } else { 0.0 };
        var = omega + (alpha + neg) * x * x + beta * var;
    }
    out
}

/// Mostly Gaussian with rare large negative jumps.
pub fn left_skewed(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let x: f64 = r.sample(StandardNormal);
            if r.random::<f64>() < 0.02 {
                x - 6.0
            } else {
                x
            }
        })
        .collect()
}

/// Long-memory stochastic volatility: log-volatility follows a truncated
/// fractionally integrated process with memory parameter `d`.
pub fn long_memory(n: usize, d: f64, seed: u64) -> Vec<f64> {
    const TERMS: usize = 2000;
    let mut r = rng(seed);
    let mut psi = Vec::with_capacity(TERMS);
    psi.push(1.0);
    for k in 1..TERMS {
        let prev: f64 = psi[k - 1];
        psi.push(prev * (k as f64 - 1.0 + d) / k as f64);
    }
    let shocks: Vec<f64> = (0..n + TERMS).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let scale = 0.5;
    (0..n)
        .map(|t| {
            let h: f64 = psi.iter().enumerate().map(|(k, p)| p * shocks[t + TERMS - k]).sum();
            (scale * h).exp() * r.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

/// Turns returns into a price path starting at `p0`.
pub fn prices_from_returns(returns: &[f64], p0: f64, scale: f64) -> Vec<f64> {
    let mut p = p0;
    let mut out = Vec::with_capacity(returns.len() + 1);
    out.push(p);
    for r in returns {
        p *= (scale * r).exp();
        out.push(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::stats::{mean, variance};

    #[test]
    fn seeded_and_scaled() {
        assert_eq!(garch_t3(100, 0.1, 0.85, 1), garch_t3(100, 0.1, 0.85, 1));
        assert_ne!(gaussian(10, 1), gaussian(10, 2));
        let g = gaussian(100_000, 1);
        assert!(mean(&g).abs() < 0.02 && (variance(&g) - 1.0).abs() < 0.02);
        let t = student_t3(200_000, 1);
        assert!((variance(&t) - 1.0).abs() < 0.2);
    }

    #[test]
    fn price_path() {
        let p = prices_from_returns(&[0.0, 2f64.ln()], 10.0, 1.0);
        assert_eq!(p.len(), 3);
        assert!((p[2] - 20.0).abs() < 1e-9);
    }
}
