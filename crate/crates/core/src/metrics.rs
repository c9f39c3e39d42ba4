//! Exact (population) distances between ensembles.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::moment::moment_operator;
use crate::state::fidelity_unchecked;
use crate::tolerance::DEFAULT as TOL;
use crate::transport::{solve_ot, Coupling};

/// Which distance is computed; `MmdK(k)` carries its order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    MmdK(u32),
    Wasserstein,
}

impl Metric {
    pub fn order(&self) -> Option<u32> {
        match self {
            Metric::MmdK(k) => Some(*k),
            Metric::Wasserstein => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::MmdK(k) => write!(f, "mmd-{k}"),
            Metric::Wasserstein => f.write_str("wasserstein"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Accepts `wasserstein`, `mmd-<k>`, `mmd<k>` and bare `mmd` (order 1).
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "wasserstein" || t == "w" {
            return Ok(Metric::Wasserstein);
        }
        let rest = t
            .strip_prefix("mmd")
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric '{s}'")))?;
        let rest = rest.strip_prefix('-').unwrap_or(rest);
        if rest.is_empty() {
            return Ok(Metric::MmdK(1));
        }
        match rest.parse::<u32>() {
            Ok(k) if k >= 1 => Ok(Metric::MmdK(k)),
            _ => Err(Error::InvalidParameter(format!("unknown metric '{s}'"))),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Pairwise,
    MomentOperator,
    Transport,
}

/// The three overlap terms of an MMD value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub f11: f64,
    pub f22: f64,
    pub f12: f64,
}

impl Components {
    pub fn combine(&self) -> f64 {
        self.f11 + self.f22 - 2.0 * self.f12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    /// Reported distance, with round-off negatives clamped to zero.
    pub value: f64,
    pub raw_value: f64,
    pub metric: Metric,
    pub route: Route,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Components>,
}

impl DistanceReport {
    fn new(raw: f64, metric: Metric, route: Route, components: Option<Components>) -> Self {
        DistanceReport {
            value: raw.max(0.0),
            raw_value: raw,
            metric,
            route,
            components,
        }
    }
}

fn check_dims(a: &Ensemble, b: &Ensemble) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

fn check_order(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("MMD order k must be positive".into()));
    }
    Ok(())
}

/// `X_ij = |<a_i|b_j>|^2`.
pub fn cross_fidelities(a: &Ensemble, b: &Ensemble) -> Result<Array2<f64>> {
    check_dims(a, b)?;
    Ok(Array2::from_shape_fn((a.len(), b.len()), |(i, j)| {
        fidelity_unchecked(a.state(i), b.state(j))
    }))
}

/// Weighted `k`-th power mean of a fidelity table.
pub fn f_bar_from_table(table: &Array2<f64>, p: &[f64], q: &[f64], k: u32) -> f64 {
    let k = k as i32;
    table
        .rows()
        .into_iter()
        .zip(p)
        .map(|(row, pi)| pi * row.iter().zip(q).map(|(x, qj)| qj * x.powi(k)).sum::<f64>())
        .sum()
}

pub(crate) fn f_bar_unchecked(a: &Ensemble, b: &Ensemble, k: u32) -> f64 {
    let k = k as i32;
    let mut acc = 0.0;
    for ea in a.entries() {
        let mut row = 0.0;
        for eb in b.entries() {
            row += eb.weight * fidelity_unchecked(&ea.amplitudes, &eb.amplitudes).powi(k);
        }
        acc += ea.weight * row;
    }
    acc
}

/// `E |<psi|phi>|^{2k}` with `psi ~ a`, `phi ~ b` independent.
pub fn f_bar(a: &Ensemble, b: &Ensemble, k: u32) -> Result<f64> {
    check_dims(a, b)?;
    check_order(k)?;
    Ok(f_bar_unchecked(a, b, k))
}

pub fn mmd_components(e1: &Ensemble, e2: &Ensemble, k: u32) -> Result<Components> {
    check_dims(e1, e2)?;
    check_order(k)?;
    Ok(Components {
        f11: f_bar_unchecked(e1, e1, k),
        f22: f_bar_unchecked(e2, e2, k),
        f12: f_bar_unchecked(e1, e2, k),
    })
}

pub fn mmd_k_pairwise(e1: &Ensemble, e2: &Ensemble, k: u32) -> Result<DistanceReport> {
    let c = mmd_components(e1, e2, k)?;
    Ok(DistanceReport::new(c.combine(), Metric::MmdK(k), Route::Pairwise, Some(c)))
}

/// Squared Hilbert-Schmidt distance of the dense moment operators.
pub fn mmd_k_moment(e1: &Ensemble, e2: &Ensemble, k: u32) -> Result<DistanceReport> {
    check_dims(e1, e2)?;
    let m1 = moment_operator(e1, k)?;
    let m2 = moment_operator(e2, k)?;
    let raw = m1.hs_distance_sq(&m2)?;
    Ok(DistanceReport::new(raw, Metric::MmdK(k), Route::MomentOperator, None))
}

/// Cost `C_ij = 1 - X_ij`.
pub fn cost_matrix(e1: &Ensemble, e2: &Ensemble) -> Result<Array2<f64>> {
    Ok(cross_fidelities(e1, e2)?.mapv(|x| 1.0 - x))
}

pub fn wasserstein_with_plan(e1: &Ensemble, e2: &Ensemble) -> Result<(DistanceReport, Coupling)> {
    let cost = cost_matrix(e1, e2)?;
    let (plan, _) = solve_ot(&cost, &e1.weights(), &e2.weights())?;
    let report = DistanceReport::new(plan.objective, Metric::Wasserstein, Route::Transport, None);
    Ok((report, plan))
}

pub fn wasserstein_exact(e1: &Ensemble, e2: &Ensemble) -> Result<DistanceReport> {
    wasserstein_with_plan(e1, e2).map(|(r, _)| r)
}

/// Dispatches on the metric using the production route.
pub fn distance(metric: Metric, e1: &Ensemble, e2: &Ensemble) -> Result<DistanceReport> {
    match metric {
        Metric::MmdK(k) => mmd_k_pairwise(e1, e2, k),
        Metric::Wasserstein => wasserstein_exact(e1, e2),
    }
}

/// True when a reported value is indistinguishable from zero.
pub fn is_negligible(value: f64) -> bool {
    value.abs() <= TOL.report_floor
}
