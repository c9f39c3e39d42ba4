//! Monte-Carlo search for the smallest budget that meets an accuracy target,
//! and sweeps of that budget over ensemble size.
//!
//! A budget `M` passes when at least a `1 - delta` fraction of `K` fresh
//! probes return a defined estimate within `eps` of the exact distance. The
//! search doubles an analytic starting point until it passes (at most `J_max`
//! times), then bisects down to granularity `max(100, floor(hi/50))`.
//! Every probe draws from its own stream, derived from the trial index, the
//! evaluation counter and the probe index, so results do not depend on
//! scheduling.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{circular_ensemble, cluster_ensemble, haar_ensemble, hard_pair, Ensemble};
use crate::error::{Error, Result};
use crate::estimators::{classical_mmd_k_estimate, mmd_k_estimate, wasserstein_estimate_weighted};
use crate::lab::bounds::{classical_budget, hoeffding_bound_mmd_k, hoeffding_bound_wasserstein};
use crate::lab::fit::{fit_loglog, LogLogFit};
use crate::metrics::{mmd_k_pairwise, wasserstein_exact};
use crate::sampler::{oracle_draws, split_budget, ChannelSet, OracleDraw};
use crate::seed::{stream, StreamRng};

/// Multiplier applied inside the MMD-k large-ensemble bound.
pub const MMD_BOUND_CONSTANT: f64 = 4.0;

/// Distance and estimator under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabMetric {
    /// U-statistic MMD-k from SWAP-test outcomes.
    Mmd(u32),
    /// Plug-in transport estimate from SWAP-test outcomes.
    Wasserstein,
    /// Classical-limit MMD-k from exact fidelity readings.
    Classical(u32),
}

impl fmt::Display for LabMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabMetric::Mmd(k) => write!(f, "mmd-{k}"),
            LabMetric::Wasserstein => f.write_str("wasserstein"),
            LabMetric::Classical(k) => write!(f, "classical-{k}"),
        }
    }
}

impl FromStr for LabMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if let Some(rest) = t.strip_prefix("classical") {
            let rest = rest.strip_prefix('-').unwrap_or(rest);
            return match rest.parse::<u32>() {
                Ok(k) if k > 0 => Ok(LabMetric::Classical(k)),
                _ => Err(Error::InvalidParameter(format!("unknown metric '{s}'"))),
            };
        }
        match t.parse::<crate::metrics::Metric>()? {
            crate::metrics::Metric::MmdK(k) => Ok(LabMetric::Mmd(k)),
            crate::metrics::Metric::Wasserstein => Ok(LabMetric::Wasserstein),
        }
    }
}

impl Serialize for LabMetric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabMetric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl LabMetric {
    pub fn order(&self) -> Option<u32> {
        match self {
            LabMetric::Mmd(k) | LabMetric::Classical(k) => Some(*k),
            LabMetric::Wasserstein => None,
        }
    }

    /// Exact distance between two ensembles.
    pub fn exact(&self, e1: &Ensemble, e2: &Ensemble) -> Result<f64> {
        match self {
            LabMetric::Mmd(k) | LabMetric::Classical(k) => Ok(mmd_k_pairwise(e1, e2, *k)?.raw_value),
            LabMetric::Wasserstein => Ok(wasserstein_exact(e1, e2)?.raw_value),
        }
    }

    /// Analytic starting budget for ensembles of size `n`, before the multiplier.
    pub fn analytic_bound(&self, n: usize, eps: f64, delta: f64) -> Result<f64> {
        match self {
            LabMetric::Mmd(k) => Ok(hoeffding_bound_mmd_k(n, *k, eps, delta, MMD_BOUND_CONSTANT)?.value),
            LabMetric::Wasserstein => hoeffding_bound_wasserstein(n, eps, delta),
            LabMetric::Classical(_) => Ok(3.0 * classical_budget(eps, delta)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplexityConfig {
    pub eps: f64,
    pub delta: f64,
    /// Probes per budget evaluation (`K`).
    pub reps: usize,
    /// Independent ensemble draws per ensemble size (`T`).
    pub trials: usize,
    pub j_max: u32,
    pub seed: u64,
    pub bound_multiplier: f64,
    /// Smallest bisection granularity.
    pub floor: u64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        ComplexityConfig {
            eps: 0.1,
            delta: 1.0 / 3.0,
            reps: 30,
            trials: 20,
            j_max: 8,
            seed: 0,
            bound_multiplier: 1.0,
            floor: 100,
        }
    }
}

impl ComplexityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !(self.delta > 0.0 && self.delta < 1.0) || self.reps == 0 || self.trials == 0 {
            return Err(Error::InvalidParameter(format!(
                "need eps > 0, delta in (0, 1), K >= 1, T >= 1; got eps={}, delta={}, K={}, T={}",
                self.eps, self.delta, self.reps, self.trials
            )));
        }
        if !(self.bound_multiplier > 0.0) {
            return Err(Error::InvalidParameter("bound multiplier must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one budget evaluation during a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub budget: u64,
    pub successes: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Final `hi`; `None` when bracketing never passed.
    pub m: Option<u64>,
    pub initial_hi: u64,
    pub bracket_hi: u64,
    pub evaluations: Vec<Evaluation>,
}

/// Runs the bracketing-then-bisection search with a caller-supplied probe.
///
/// `probe(m, rng)` returns one estimate from budget `m`; estimator errors
/// that mean "undefined" count as failures, other errors abort the search.
pub fn bisect_min_samples<F>(probe: F, truth: f64, initial_hi: u64, cfg: &ComplexityConfig, path: &[u64]) -> Result<SearchOutcome>
where
    F: Fn(u64, &mut StreamRng) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let mut evaluations = Vec::new();
    let mut evaluate = |budget: u64| -> Result<bool> {
        let level = evaluations.len() as u64;
        let results: Vec<Result<bool>> = (0..cfg.reps as u64)
            .into_par_iter()
            .map(|r| {
                let mut full = path.to_vec();
                full.extend([level, r]);
                let mut rng = stream(cfg.seed, &full);
                match probe(budget, &mut rng) {
                    Ok(d) => Ok((d - truth).abs() <= cfg.eps),
                    Err(e) if e.is_undefined_estimate() => Ok(false),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let mut successes = 0;
        for r in results {
            successes += r? as usize;
        }
        let passed = successes as f64 / cfg.reps as f64 >= 1.0 - cfg.delta;
        evaluations.push(Evaluation { budget, successes, passed });
        Ok(passed)
    };

    let initial_hi = initial_hi.max(1);
    let mut hi = initial_hi;
    let mut j = 0;
    let bracketed = loop {
        if evaluate(hi)? {
            break true;
        }
        hi = hi.saturating_mul(2);
        j += 1;
        if j >= cfg.j_max {
            break false;
        }
    };
    if !bracketed {
        return Ok(SearchOutcome { m: None, initial_hi, bracket_hi: hi, evaluations });
    }
    let bracket_hi = hi;
    let mut lo = 0u64;
    while hi - lo > cfg.floor.max(hi / 50) {
        let mid = lo + (hi - lo) / 2;
        if mid == 0 {
            lo = mid;
            continue;
        }
        if evaluate(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SearchOutcome { m: Some(hi), initial_hi, bracket_hi, evaluations })
}

/// Precomputed sampling state for the built-in estimators.
pub struct StandardProbe {
    metric: LabMetric,
    channels: ChannelSet,
}

impl StandardProbe {
    pub fn new(metric: LabMetric, e1: &Ensemble, e2: &Ensemble) -> Result<Self> {
        Ok(StandardProbe { metric, channels: ChannelSet::new(e1, e2)? })
    }

    pub fn estimate(&self, m: u64, rng: &mut StreamRng) -> Result<f64> {
        match self.metric {
            LabMetric::Mmd(k) => mmd_k_estimate(&self.channels.draw_tallies(m, rng), k).map(|r| r.estimate),
            LabMetric::Wasserstein => {
                let ch = &self.channels.k12;
                let tally = ch.tally(m, rng);
                wasserstein_estimate_weighted(&tally, ch.row_weights(), ch.col_weights()).map(|r| r.estimate)
            }
            LabMetric::Classical(k) => {
                let mut draws: Vec<OracleDraw> = Vec::with_capacity(m as usize);
                for (kind, mk) in split_budget(m) {
                    draws.extend(oracle_draws(self.channels.get(kind), mk, rng));
                }
                classical_mmd_k_estimate(&draws, k).map(|r| r.estimate)
            }
        }
    }
}

/// Search on a fixed ensemble pair with the built-in estimator for `metric`.
pub fn estimate_min_samples(
    metric: LabMetric,
    e1: &Ensemble,
    e2: &Ensemble,
    cfg: &ComplexityConfig,
    path: &[u64],
) -> Result<(f64, SearchOutcome)> {
    let truth = metric.exact(e1, e2)?;
    let n = e1.len().max(e2.len());
    let hi = (metric.analytic_bound(n, cfg.eps, cfg.delta)? * cfg.bound_multiplier).ceil() as u64;
    let probe = StandardProbe::new(metric, e1, e2)?;
    let outcome = bisect_min_samples(|m, rng| probe.estimate(m, rng), truth, hi, cfg, path)?;
    Ok((truth, outcome))
}

/// Random ensemble family used to draw `N`-state sample ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum EnsembleSpec {
    Cluster { s: f64 },
    Circular,
    Haar { d: usize },
    Hardpair { theta: f64 },
}

impl EnsembleSpec {
    pub fn generate(&self, n: usize, rng: &mut StreamRng) -> Result<Ensemble> {
        match self {
            EnsembleSpec::Cluster { s } => cluster_ensemble(n, *s, rng),
            EnsembleSpec::Circular => circular_ensemble(n, rng),
            EnsembleSpec::Haar { d } => haar_ensemble(n, *d, rng),
            EnsembleSpec::Hardpair { theta } => hard_pair(n, *theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub n: usize,
    pub trial: usize,
    pub d_true: f64,
    pub initial_hi: u64,
    pub m: Option<u64>,
    pub flagged: bool,
    pub evaluations: usize,
}

/// Stream path of ensemble draws for `(n, trial)`.
fn trial_path(n: usize, trial: usize) -> [u64; 2] {
    [n as u64, trial as u64]
}

/// One trial: fresh sample ensembles of size `n`, exact distance, search.
pub fn run_trial(
    metric: LabMetric,
    spec1: &EnsembleSpec,
    spec2: &EnsembleSpec,
    n: usize,
    trial: usize,
    cfg: &ComplexityConfig,
) -> Result<TrialOutcome> {
    let path = trial_path(n, trial);
    let mut rng = stream(cfg.seed ^ 0x656E_7365_6D62_6C65, &path);
    let e1 = spec1.generate(n, &mut rng)?;
    let e2 = spec2.generate(n, &mut rng)?;
    let (d_true, outcome) = estimate_min_samples(metric, &e1, &e2, cfg, &path)?;
    Ok(TrialOutcome {
        n,
        trial,
        d_true,
        initial_hi: outcome.initial_hi,
        m: outcome.m,
        flagged: outcome.m.is_none(),
        evaluations: outcome.evaluations.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub trials: Vec<TrialOutcome>,
    pub mean: f64,
    pub std: f64,
    pub flagged: usize,
}

impl CurvePoint {
    /// Aggregates trials in index order; flagged trials are excluded.
    pub fn from_trials(n: usize, mut trials: Vec<TrialOutcome>) -> Result<CurvePoint> {
        trials.sort_by_key(|t| t.trial);
        let ms: Vec<f64> = trials.iter().filter_map(|t| t.m).map(|m| m as f64).collect();
        if ms.is_empty() {
            return Err(Error::InvalidParameter(format!("every trial at N = {n} failed to bracket")));
        }
        let mean = ms.iter().sum::<f64>() / ms.len() as f64;
        let std = if ms.len() > 1 {
            (ms.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (ms.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let flagged = trials.len() - ms.len();
        Ok(CurvePoint { n, trials, mean, std, flagged })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityCurve {
    pub metric: LabMetric,
    pub points: Vec<CurvePoint>,
    pub fit: LogLogFit,
}

impl ComplexityCurve {
    pub fn from_points(metric: LabMetric, points: Vec<CurvePoint>) -> Result<Self> {
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.mean)).collect();
        let fit = fit_loglog(&xy)?;
        Ok(ComplexityCurve { metric, points, fit })
    }
}

/// Sweeps ensemble sizes; trials at each size run in parallel.
pub fn sweep(metric: LabMetric, spec1: &EnsembleSpec, spec2: &EnsembleSpec, ns: &[usize], cfg: &ComplexityConfig) -> Result<ComplexityCurve> {
    cfg.validate()?;
    if ns.len() < 3 {
        return Err(Error::InvalidParameter(format!("a sweep needs at least 3 ensemble sizes, got {}", ns.len())));
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let trials = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(metric, spec1, spec2, n, t, cfg))
            .collect::<Result<Vec<_>>>()?;
        points.push(CurvePoint::from_trials(n, trials)?);
    }
    ComplexityCurve::from_points(metric, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small_cfg() -> ComplexityConfig {
        ComplexityConfig { reps: 20, trials: 2, seed: 3, ..ComplexityConfig::default() }
    }

    #[test]
    fn metric_names() {
        for m in [LabMetric::Mmd(2), LabMetric::Wasserstein, LabMetric::Classical(3)] {
            assert_eq!(m.to_string().parse::<LabMetric>().unwrap(), m);
        }
        assert!("classical-0".parse::<LabMetric>().is_err());
    }

    #[test]
    fn synthetic_threshold_is_located() {
        // passes exactly when budget >= threshold
        let cfg = small_cfg();
        for threshold in [1u64, 150, 777, 5000, 123_456] {
            let probe = |m: u64, _: &mut StreamRng| Ok(if m >= threshold { 0.0 } else { 1.0 });
            let out = bisect_min_samples(probe, 0.0, 1000, &cfg, &[threshold]).unwrap();
            let m = out.m.unwrap();
            let granularity = cfg.floor.max(m / 50);
            assert!(m >= threshold && m - threshold <= granularity, "threshold {threshold} -> {m}");
            assert!(m <= out.bracket_hi);
        }
    }

    #[test]
    fn noisy_probe_threshold() {
        // success probability rises smoothly through 2/3 at budget 4000
        let cfg = ComplexityConfig { reps: 200, ..small_cfg() };
        let probe = |m: u64, rng: &mut StreamRng| {
            let p = 1.0 / (1.0 + (-(m as f64 - 4000.0) / 150.0).exp());
            let p = (p + 2.0 / 3.0 - 0.5).clamp(0.0, 1.0);
            Ok(if rng.random::<f64>() < p { 0.0 } else { 1.0 })
        };
        let m = bisect_min_samples(probe, 0.0, 2000, &cfg, &[0]).unwrap().m.unwrap();
        assert!((m as f64 - 4000.0).abs() < 600.0, "m = {m}");
    }

    #[test]
    fn bracketing_failure_is_flagged() {
        let cfg = ComplexityConfig { j_max: 3, ..small_cfg() };
        let out = bisect_min_samples(|_, _: &mut StreamRng| Ok(1.0), 0.0, 10, &cfg, &[]).unwrap();
        assert_eq!(out.m, None);
        assert_eq!(out.evaluations.len(), 3);
        let undefined = bisect_min_samples(
            |_, _: &mut StreamRng| Err(Error::InsufficientCollisions { kind: crate::PairKind::K12, k: 2 }),
            0.0,
            10,
            &cfg,
            &[],
        )
        .unwrap();
        assert_eq!(undefined.m, None);
        let fatal = bisect_min_samples(|_, _: &mut StreamRng| Err(Error::PivotLimit(1)), 0.0, 10, &cfg, &[]);
        assert!(fatal.is_err());
    }

    #[test]
    fn trials_are_order_independent() {
        let cfg = ComplexityConfig { reps: 5, trials: 3, ..small_cfg() };
        let (s1, s2) = (EnsembleSpec::Cluster { s: 0.08 }, EnsembleSpec::Circular);
        let forward: Vec<_> = (0..3).map(|t| run_trial(LabMetric::Mmd(1), &s1, &s2, 20, t, &cfg).unwrap()).collect();
        let backward: Vec<_> = (0..3).rev().map(|t| run_trial(LabMetric::Mmd(1), &s1, &s2, 20, t, &cfg).unwrap()).collect();
        let a = CurvePoint::from_trials(20, forward).unwrap();
        let b = CurvePoint::from_trials(20, backward).unwrap();
        assert_eq!(a, b);
    }
}
