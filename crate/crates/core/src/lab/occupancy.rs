//! Balls-into-bins counts: how many labels are seen at least `k` times.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualifyingLabels {
    /// `n Pr[Bin(M, 1/n) >= k]`.
    pub exact: f64,
    /// `M^k e^{-M/n} / (k! n^{k-1})`, the sparse-regime approximation.
    pub asymptotic: f64,
}

/// `Pr[Bin(m, p) >= k]` through the regularized incomplete beta function.
pub fn binomial_upper_tail(m: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > m || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    beta_reg(k as f64, (m - k + 1) as f64, p)
}

pub fn expected_qualifying_labels(m: u64, n: u64, k: u32) -> Result<QualifyingLabels> {
    if n == 0 {
        return Err(Error::InvalidParameter("number of labels must be positive".into()));
    }
    let nf = n as f64;
    let exact = nf * binomial_upper_tail(m, 1.0 / nf, k as u64);
    let asymptotic = if m == 0 {
        0.0
    } else {
        let kf = k as f64;
        (kf * (m as f64).ln() - m as f64 / nf - ln_gamma(kf + 1.0) - (kf - 1.0) * nf.ln()).exp()
    };
    Ok(QualifyingLabels { exact, asymptotic })
}

/// Budget after which every one of `n` labels with probability at least
/// `p_min` has `t` or more samples with probability `1 - delta`:
/// `(t + L + sqrt(L^2 + 2 t L)) / p_min`, `L = log(n/delta)`.
pub fn min_samples_for_occupancy(t: f64, n: f64, delta: f64, p_min: f64) -> Result<f64> {
    if !(t >= 0.0 && n > 0.0 && p_min > 0.0 && p_min <= 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid occupancy parameters t={t}, n={n}, delta={delta}, p_min={p_min}"
        )));
    }
    let l = (n / delta).ln();
    Ok((t + l + (l * l + 2.0 * t * l).sqrt()) / p_min)
}
