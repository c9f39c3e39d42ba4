//! Analytic sample-count upper bounds used to seed the bisection search.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

fn check(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

fn ln_factorial(k: u32) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// `N^2 ((2/eps^2) log(2N^2/delta) + log(N^2/delta))`.
pub fn hoeffding_bound_wasserstein(n: usize, eps: f64, delta: f64) -> Result<f64> {
    check(eps, delta)?;
    let n2 = (n * n) as f64;
    Ok(n2 * ((2.0 / (eps * eps)) * (2.0 * n2 / delta).ln() + (n2 / delta).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MmdBranch {
    /// `N^2 >= (k!/eps^2) log(1/delta)`: collisions are plentiful.
    LargeEnsemble,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdBound {
    pub value: f64,
    pub branch: MmdBranch,
}

/// Whether `N^2 >= (k!/eps^2) log(1/delta)`, compared in log space.
pub fn large_ensemble_regime(n: usize, k: u32, eps: f64, delta: f64) -> bool {
    let lhs = 2.0 * (n as f64).ln();
    let rhs = ln_factorial(k) - 2.0 * eps.ln() + (1.0 / delta).ln().ln();
    lhs >= rhs
}

/// `c ((k!/eps^2) log(1/delta))^{1/k} N^{2-2/k}` in the large-ensemble regime,
/// otherwise `max{(k/eps^2) log(1/delta), N^2 (log(N^2/delta) + k)}`.
pub fn hoeffding_bound_mmd_k(n: usize, k: u32, eps: f64, delta: f64, multiplier: f64) -> Result<MmdBound> {
    check(eps, delta)?;
    if k == 0 || n == 0 {
        return Err(Error::InvalidParameter("N and k must be positive".into()));
    }
    let nf = n as f64;
    let log_inv_delta = (1.0 / delta).ln();
    if large_ensemble_regime(n, k, eps, delta) {
        let ln_inner = ln_factorial(k) - 2.0 * eps.ln() + log_inv_delta.ln();
        let kf = k as f64;
        let value = multiplier * (ln_inner / kf).exp() * nf.powf(2.0 - 2.0 / kf);
        return Ok(MmdBound { value, branch: MmdBranch::LargeEnsemble });
    }
    Ok(MmdBound { value: general_mmd_bound(n, k, eps, delta), branch: MmdBranch::General })
}

pub fn general_mmd_bound(n: usize, k: u32, eps: f64, delta: f64) -> f64 {
    let n2 = (n * n) as f64;
    let a = k as f64 / (eps * eps) * (1.0 / delta).ln();
    let b = n2 * ((n2 / delta).ln() + k as f64);
    a.max(b)
}

/// `8 eps^{-2} log(6/delta)` oracle draws per estimate in the classical limit.
pub fn classical_budget(eps: f64, delta: f64) -> Result<f64> {
    check(eps, delta)?;
    Ok(8.0 / (eps * eps) * (6.0 / delta).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::occupancy::min_samples_for_occupancy;

    #[test]
    fn wasserstein_bound_scaling() {
        let b = |n| hoeffding_bound_wasserstein(n, 0.1, 1.0 / 3.0).unwrap();
        assert!(b(100).is_finite() && b(100) > 0.0);
        // ratio / 4 - 1 ~ ln 4 / ln(2 N^2 / delta), shrinking with N
        let mut last = f64::INFINITY;
        for n in [100usize, 10_000, 1_000_000] {
            let excess = b(2 * n) / b(n) / 4.0 - 1.0;
            let predicted = 4f64.ln() / (6.0 * (n * n) as f64).ln();
            assert!(excess > 0.0 && excess <= 1.1 * predicted, "N={n}: {excess} vs {predicted}");
            assert!(excess < last);
            last = excess;
        }
        for n in [5, 50, 500] {
            let nn = n * n;
            let occ = min_samples_for_occupancy(1.0, nn as f64, 1.0 / 3.0, 1.0 / nn as f64).unwrap();
            assert!(b(n) >= occ);
        }
    }

    #[test]
    fn mmd_bound_shapes() {
        let k1: Vec<f64> = [20, 40, 80]
            .iter()
            .map(|&n| hoeffding_bound_mmd_k(n, 1, 0.1, 1.0 / 3.0, 4.0).unwrap().value)
            .collect();
        assert!(k1.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-9 * w[0]));
        let a = hoeffding_bound_mmd_k(200, 2, 0.1, 1.0 / 3.0, 4.0).unwrap();
        let b = hoeffding_bound_mmd_k(400, 2, 0.1, 1.0 / 3.0, 4.0).unwrap();
        assert_eq!(a.branch, MmdBranch::LargeEnsemble);
        assert!((b.value / a.value - 2.0).abs() < 0.02);
        let ratios: Vec<f64> = (20..=60)
            .step_by(10)
            .map(|n| {
                let r = hoeffding_bound_mmd_k(n, n as u32, 0.1, 1.0 / 3.0, 4.0).unwrap();
                assert_eq!(r.branch, MmdBranch::General);
                r.value / (n as f64).powi(3)
            })
            .collect();
        assert!(ratios.iter().all(|&r| (1.0..3.0).contains(&r)), "{ratios:?}");
    }

    #[test]
    fn large_factorials_stay_finite() {
        let r = hoeffding_bound_mmd_k(1000, 170, 0.1, 0.5, 4.0).unwrap();
        assert!(r.value.is_finite());
        assert!(hoeffding_bound_mmd_k(10, 2, 0.0, 0.5, 4.0).is_err());
        assert!(hoeffding_bound_mmd_k(10, 2, 0.1, 1.0, 4.0).is_err());
    }
}
