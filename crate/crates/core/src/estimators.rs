//! Estimators of ensemble distances from SWAP-test tallies or oracle draws.
//!
//! MMD estimators combine per-kind overlap estimates as `F11 + F22 - 2 F12`.
//! An estimator that has no usable data returns an error rather than a value.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::sampler::{LabelTally, OracleDraw, PairKind, TallySet};
use crate::transport::solve_ot;

/// U-statistic kernel on a label with `plus` outcomes `+1` and `minus`
/// outcomes `-1`: the mean of all `k`-fold products of distinct outcomes,
/// `e_k(r) / C(T, k)`. Unbiased for `X^k`.
pub fn ustat_kernel(plus: u64, minus: u64, k: u32) -> Result<f64> {
    let t = plus + minus;
    let k64 = k as u64;
    if k == 0 || t < k64 {
        return Err(Error::InvalidParameter(format!(
            "kernel of order {k} needs at least {k} outcomes, got {t}"
        )));
    }
    if minus == 0 {
        return Ok(1.0);
    }
    if plus == 0 {
        return Ok(if k % 2 == 0 { 1.0 } else { -1.0 });
    }
    // sum_j (-1)^{k-j} C(k, j) a^(j) b^(k-j) / T^(k) with falling factorials,
    // each summand being a hypergeometric probability
    let (a, b, tf) = (plus as f64, minus as f64, t as f64);
    let j_lo = k64.saturating_sub(minus);
    let j_hi = k64.min(plus);
    let mut acc = 0.0;
    for j in j_lo..=j_hi {
        let mut h = binom_f64(k64, j);
        for s in 0..j {
            h *= (a - s as f64) / (tf - s as f64);
        }
        for s in 0..(k64 - j) {
            h *= (b - s as f64) / (tf - (j + s) as f64);
        }
        if (k64 - j) % 2 == 1 {
            acc -= h;
        } else {
            acc += h;
        }
    }
    Ok(acc.clamp(-1.0, 1.0))
}

fn binom_f64(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64)
}

/// What one pair kind contributed to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindDiagnostics {
    pub kind: PairKind,
    pub budget: u64,
    pub labels: usize,
    /// Labels observed at least `k` times (all observed labels for label-free estimators).
    pub qualifying: usize,
    pub min_count: u64,
    /// Labels that were observed but fell short of `k`.
    pub dropped: usize,
    pub f_hat: f64,
}

/// Estimated marginals used by the weighted transport estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEstimates {
    pub p_hat: Vec<f64>,
    pub q_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub metric: Metric,
    pub estimator: String,
    pub budget: u64,
    pub kinds: Vec<KindDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightEstimates>,
}

impl EstimateReport {
    pub fn kind(&self, kind: PairKind) -> Option<&KindDiagnostics> {
        self.kinds.iter().find(|d| d.kind == kind)
    }
}

fn diagnostics(tally: &LabelTally, k: u32, qualifying: usize, f_hat: f64) -> KindDiagnostics {
    let observed = tally.labels() - tally.unobserved().len();
    KindDiagnostics {
        kind: tally.kind,
        budget: tally.total(),
        labels: tally.labels(),
        qualifying,
        min_count: tally.min_count(),
        dropped: observed.saturating_sub(if k <= 1 { observed } else { qualifying }),
        f_hat,
    }
}

fn assemble(set: &TallySet, metric: Metric, name: &str, mut per_kind: impl FnMut(&LabelTally) -> Result<KindDiagnostics>) -> Result<EstimateReport> {
    let d11 = per_kind(&set.k11)?;
    let d12 = per_kind(&set.k12)?;
    let d22 = per_kind(&set.k22)?;
    Ok(EstimateReport {
        estimate: d11.f_hat + d22.f_hat - 2.0 * d12.f_hat,
        metric,
        estimator: name.into(),
        budget: set.total(),
        kinds: vec![d11, d12, d22],
        weights: None,
    })
}

/// Mean of the kernel over labels with `T >= k`.
pub fn collision_overlap(tally: &LabelTally, k: u32) -> Result<KindDiagnostics> {
    let mut sum = 0.0;
    let mut m = 0usize;
    for (_, _, a, b) in tally.iter() {
        if a + b >= k as u64 && a + b > 0 {
            sum += ustat_kernel(a, b, k)?;
            m += 1;
        }
    }
    if m == 0 {
        return Err(Error::InsufficientCollisions { kind: tally.kind, k });
    }
    Ok(diagnostics(tally, k, m, sum / m as f64))
}

/// U-statistic MMD-k estimator.
pub fn mmd_k_estimate(set: &TallySet, k: u32) -> Result<EstimateReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("MMD order k must be positive".into()));
    }
    assemble(set, Metric::MmdK(k), "ustat", |t| collision_overlap(t, k))
}

/// MMD-1 from the grand mean of outcomes per kind, ignoring labels.
pub fn mmd1_labelfree(set: &TallySet) -> Result<EstimateReport> {
    assemble(set, Metric::MmdK(1), "labelfree", |t| {
        let total = t.total();
        if total == 0 {
            return Err(Error::EmptyBatch(t.kind));
        }
        let observed = t.labels() - t.unobserved().len();
        Ok(diagnostics(t, 1, observed, t.sum_r() as f64 / total as f64))
    })
}

/// Importance-corrected collision estimator for nonuniform weights:
/// `C(M,k)^{-1} sum_{T >= k} C(T,k) Z / w^{k-1}` with `w = T/M`.
pub fn nonuniform_overlap(tally: &LabelTally, k: u32) -> Result<KindDiagnostics> {
    let m_total = tally.total();
    if k == 0 || m_total < k as u64 {
        return Err(Error::InsufficientCollisions { kind: tally.kind, k });
    }
    let mf = m_total as f64;
    let mut sum = 0.0;
    let mut m = 0usize;
    for (_, _, a, b) in tally.iter() {
        let t = a + b;
        if t < k as u64 || t == 0 {
            continue;
        }
        let tf = t as f64;
        let mut coef = 1.0;
        for s in 0..k {
            coef *= (tf - s as f64) / (mf - s as f64);
        }
        coef *= (mf / tf).powi(k as i32 - 1);
        sum += coef * ustat_kernel(a, b, k)?;
        m += 1;
    }
    if m == 0 {
        return Err(Error::InsufficientCollisions { kind: tally.kind, k });
    }
    Ok(diagnostics(tally, k, m, sum))
}

pub fn nonuniform_mmd_k_estimate(set: &TallySet, k: u32) -> Result<EstimateReport> {
    assemble(set, Metric::MmdK(k), "nonuniform-ustat", |t| nonuniform_overlap(t, k))
}

fn require_coverage(tally: &LabelTally) -> Result<()> {
    let missing = tally.unobserved();
    if !missing.is_empty() {
        return Err(Error::CoverageIncomplete {
            missing: missing.len(),
            labels: tally.labels(),
            first_missing: missing.into_iter().take(10).collect(),
        });
    }
    Ok(())
}

/// `C_hat = 1 - clamp(mean r, 0, 1)` per label; every label must be observed.
pub fn estimated_cost(tally: &LabelTally) -> Result<Array2<f64>> {
    require_coverage(tally)?;
    let mut cost = Array2::zeros((tally.rows, tally.cols));
    for (i, j, a, b) in tally.iter() {
        let x = (a as f64 - b as f64) / (a + b) as f64;
        cost[[i, j]] = 1.0 - x.clamp(0.0, 1.0);
    }
    Ok(cost)
}

fn transport_report(tally: &LabelTally, p: &[f64], q: &[f64], name: &str, weights: Option<WeightEstimates>) -> Result<EstimateReport> {
    let cost = estimated_cost(tally)?;
    let (plan, _) = solve_ot(&cost, p, q)?;
    Ok(EstimateReport {
        estimate: plan.objective,
        metric: Metric::Wasserstein,
        estimator: name.into(),
        budget: tally.total(),
        kinds: vec![diagnostics(tally, 1, tally.labels(), f64::NAN)],
        weights,
    })
}

/// Plug-in transport estimate with uniform marginals over the tally's grid.
pub fn wasserstein_estimate(tally: &LabelTally) -> Result<EstimateReport> {
    let p = vec![1.0 / tally.rows as f64; tally.rows];
    let q = vec![1.0 / tally.cols as f64; tally.cols];
    transport_report(tally, &p, &q, "plugin", None)
}

/// Plug-in transport estimate with known marginals.
pub fn wasserstein_estimate_weighted(tally: &LabelTally, p: &[f64], q: &[f64]) -> Result<EstimateReport> {
    transport_report(tally, p, q, "plugin-weighted", None)
}

/// Plug-in transport estimate with marginals estimated from index frequencies.
pub fn nonuniform_wasserstein_estimate(tally: &LabelTally) -> Result<EstimateReport> {
    require_coverage(tally)?;
    let total = tally.total() as f64;
    let (rows, cols) = tally.marginal_counts();
    let p_hat: Vec<f64> = rows.iter().map(|&c| c as f64 / total).collect();
    let q_hat: Vec<f64> = cols.iter().map(|&c| c as f64 / total).collect();
    let weights = WeightEstimates { p_hat: p_hat.clone(), q_hat: q_hat.clone() };
    transport_report(tally, &p_hat, &q_hat, "plugin-estimated-weights", Some(weights))
}

/// Classical-limit estimator: per-kind sample mean of `x^k`.
pub fn classical_mmd_k_estimate(draws: &[OracleDraw], k: u32) -> Result<EstimateReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("MMD order k must be positive".into()));
    }
    let mut kinds = Vec::with_capacity(3);
    for kind in [PairKind::K11, PairKind::K12, PairKind::K22] {
        let (mut sum, mut n) = (0.0, 0u64);
        for d in draws.iter().filter(|d| d.kind == kind) {
            sum += d.x.powi(k as i32);
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyBatch(kind));
        }
        kinds.push(KindDiagnostics {
            kind,
            budget: n,
            labels: 0,
            qualifying: 0,
            min_count: 0,
            dropped: 0,
            f_hat: sum / n as f64,
        });
    }
    Ok(EstimateReport {
        estimate: kinds[0].f_hat + kinds[2].f_hat - 2.0 * kinds[1].f_hat,
        metric: Metric::MmdK(k),
        estimator: "classical".into(),
        budget: draws.len() as u64,
        kinds,
        weights: None,
    })
}
