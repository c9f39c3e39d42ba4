//! Finite weighted ensembles of pure states and the generators used throughout.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{fidelity_unchecked, haar_state, PureState};
use crate::tolerance::DEFAULT as TOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub weight: f64,
    pub amplitudes: PureState,
}

/// Weighted list of pairwise-distinct pure states of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    entries: Vec<Entry>,
    kind: String,
}

#[derive(Serialize, Deserialize)]
struct EnsembleDoc {
    dim: usize,
    entries: Vec<Entry>,
    kind: String,
}

impl Serialize for Ensemble {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EnsembleDoc {
            dim: self.dim,
            entries: self.entries.clone(),
            kind: self.kind.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ensemble {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = EnsembleDoc::deserialize(d)?;
        let ens = Ensemble::new(doc.entries, doc.kind).map_err(serde::de::Error::custom)?;
        if ens.dim != doc.dim {
            return Err(serde::de::Error::custom(format!(
                "declared dim {} but states have dim {}",
                doc.dim, ens.dim
            )));
        }
        Ok(ens)
    }
}

impl Ensemble {
    /// Validates positivity and normalization of the weights and pairwise
    /// distinctness of the states.
    pub fn new(entries: Vec<Entry>, kind: impl Into<String>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::InvalidWeights("ensemble has no entries".into()));
        };
        let dim = first.amplitudes.dim();
        for e in &entries {
            if e.amplitudes.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: e.amplitudes.dim(),
                });
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidWeights(format!(
                    "weight {} is not strictly positive",
                    e.weight
                )));
            }
        }
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        if (total - 1.0).abs() > TOL.weight_sum {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        for i in 0..entries.len() {
            for j in (i + 1)..entries.len() {
                let f = fidelity_unchecked(&entries[i].amplitudes, &entries[j].amplitudes);
                if f >= 1.0 - TOL.distinct {
                    return Err(Error::DuplicateStates { i, j, fidelity: f });
                }
            }
        }
        Ok(Ensemble {
            dim,
            entries,
            kind: kind.into(),
        })
    }

    /// Equal weights `1/N`.
    pub fn uniform(states: Vec<PureState>, kind: impl Into<String>) -> Result<Self> {
        let w = 1.0 / states.len().max(1) as f64;
        Self::new(
            states
                .into_iter()
                .map(|s| Entry {
                    weight: w,
                    amplitudes: s,
                })
                .collect(),
            kind,
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    pub fn state(&self, i: usize) -> &PureState {
        &self.entries[i].amplitudes
    }

    pub fn states(&self) -> impl Iterator<Item = &PureState> {
        self.entries.iter().map(|e| &e.amplitudes)
    }

    /// True when all weights are equal.
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.entries
            .iter()
            .all(|e| (e.weight - w).abs() <= TOL.weight_sum)
    }

    /// Same ensemble with entries reordered by `perm` (entry `k` of the result
    /// is entry `perm[k]` of `self`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::InvalidParameter("permutation length mismatch".into()));
        }
        let entries = perm.iter().map(|&p| self.entries[p].clone()).collect();
        Self::new(entries, self.kind.clone())
    }

    /// Replaces every state by `f(state)`, keeping weights. Used to build
    /// noisy copies of an ensemble.
    pub fn map_states<F>(&self, mut f: F, kind: impl Into<String>) -> Result<Self>
    where
        F: FnMut(&PureState) -> Result<PureState>,
    {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                Ok(Entry {
                    weight: e.weight,
                    amplitudes: f(&e.amplitudes)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, kind)
    }
}

/// Cross-fidelity table between two ensembles, with row/column ensemble tags.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityTable {
    pub entries: Array2<f64>,
    pub row_id: String,
    pub col_id: String,
}

impl FidelityTable {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        Self::with_ids(entries, "rows", "cols")
    }

    pub fn with_ids(entries: Array2<f64>, row_id: impl Into<String>, col_id: impl Into<String>) -> Result<Self> {
        if let Some(((i, j), &v)) = entries
            .indexed_iter()
            .find(|(_, &v)| !(0.0..=1.0).contains(&v))
        {
            return Err(Error::InvalidParameter(format!(
                "fidelity table entry ({i}, {j}) = {v} outside [0, 1]"
            )));
        }
        Ok(FidelityTable {
            entries,
            row_id: row_id.into(),
            col_id: col_id.into(),
        })
    }

    /// Exact table `X_ij = |<a_i|b_j>|^2`.
    pub fn between(a: &Ensemble, b: &Ensemble) -> Result<Self> {
        Ok(FidelityTable {
            entries: crate::metrics::cross_fidelities(a, b)?,
            row_id: a.kind.clone(),
            col_id: b.kind.clone(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }
}

fn collect_distinct<R, F>(count: usize, rng: &mut R, mut draw: F) -> Result<Vec<PureState>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<PureState>,
{
    let mut out: Vec<PureState> = Vec::with_capacity(count);
    while out.len() < count {
        let mut attempts = 0;
        loop {
            let s = draw(rng)?;
            let collides = out
                .iter()
                .any(|o| fidelity_unchecked(o, &s) >= 1.0 - TOL.distinct);
            if !collides {
                out.push(s);
                break;
            }
            attempts += 1;
            if attempts >= TOL.max_redraws {
                return Err(Error::DistinctnessExhausted { attempts });
            }
        }
    }
    Ok(out)
}

fn require_count(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidParameter(format!(
            "ensemble size must be at least {min}, got {n}"
        )));
    }
    Ok(())
}

/// `N` qubit states proportional to `|0> + s c |1>` with `c` standard complex normal.
pub fn cluster_ensemble<R: Rng + ?Sized>(n: usize, s: f64, rng: &mut R) -> Result<Ensemble> {
    require_count(n, 1)?;
    if !s.is_finite() {
        return Err(Error::InvalidParameter(format!("cluster scale {s} is not finite")));
    }
    let states = collect_distinct(n, rng, |rng| {
        let c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        PureState::normalized(vec![Complex64::new(1.0, 0.0), c * s])
    })?;
    Ensemble::uniform(states, format!("cluster(s={s})"))
}

/// `e^{-i theta Y} |0> = cos(theta)|0> + sin(theta)|1>`.
pub fn circular_state(theta: f64) -> PureState {
    PureState::from_real(&[theta.cos(), theta.sin()]).expect("unit circle state")
}

/// `N` states on the X-Z great circle with angle uniform on `[0, 2 pi)`.
pub fn circular_ensemble<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Ensemble> {
    require_count(n, 1)?;
    let states = collect_distinct(n, rng, |rng| Ok(circular_state(rng.random_range(0.0..2.0 * PI))))?;
    Ensemble::uniform(states, "circular")
}

/// Phase state `(|0> + e^{i phi}|1>)/sqrt 2`.
pub fn phase_state(phi: f64) -> PureState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    PureState::new(vec![Complex64::new(r, 0.0), Complex64::from_polar(r, phi)])
        .expect("phase state is normalized")
}

/// Equal-weight ensemble of the `N` phase states with phases `theta + 2 pi l / N`.
///
/// `hard_pair(N, 0)` and `hard_pair(N, pi/N)` share every moment operator of
/// order below `N` and differ at order `N`.
pub fn hard_pair(n: usize, theta: f64) -> Result<Ensemble> {
    require_count(n, 2)?;
    let states = (0..n)
        .map(|l| phase_state(theta + 2.0 * PI * l as f64 / n as f64))
        .collect();
    Ensemble::uniform(states, format!("hardpair(N={n},theta={theta})"))
}

/// Computational-basis ensemble; zero weights are dropped.
pub fn basis_ensemble(weights: &[f64], d: usize) -> Result<Ensemble> {
    if weights.len() != d {
        return Err(Error::InvalidWeights(format!(
            "{} weights for dimension {d}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
    }
    let entries = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| {
            Ok(Entry {
                weight: w,
                amplitudes: PureState::basis(d, i)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(entries, "basis")
}

/// `N` independent Haar states in dimension `d`, uniform weights.
pub fn haar_ensemble<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Ensemble> {
    require_count(n, 1)?;
    let states = collect_distinct(n, rng, |rng| haar_state(d, rng))?;
    Ensemble::uniform(states, format!("haar(d={d})"))
}

/// Realizes a square table with entries below `1/N` as two uniform `N`-state
/// ensembles in dimension `2N`: `psi_i = e_i` and
/// `phi_j = sum_i sqrt(X_ij) e_i + sqrt(1 - sum_i X_ij) f_j`.
pub fn from_fidelity_table(table: &FidelityTable) -> Result<(Ensemble, Ensemble)> {
    let (rows, cols) = table.shape();
    if rows != cols || rows == 0 {
        return Err(Error::InvalidParameter(format!(
            "fidelity table must be square and nonempty, got {rows}x{cols}"
        )));
    }
    let n = rows;
    let bound = 1.0 / n as f64;
    if let Some(((i, j), &v)) = table.entries.indexed_iter().find(|(_, &v)| v >= bound) {
        return Err(Error::FidelityBound { i, j, value: v, bound });
    }
    let dim = 2 * n;
    let psis = (0..n)
        .map(|i| PureState::basis(dim, i))
        .collect::<Result<Vec<_>>>()?;
    let phis = (0..n)
        .map(|j| {
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            let column = table.entries.column(j);
            for (i, &x) in column.iter().enumerate() {
                amps[i] = Complex64::new(x.sqrt(), 0.0);
            }
            let slack = 1.0 - column.sum();
            amps[n + j] = Complex64::new(slack.sqrt(), 0.0);
            PureState::normalized(amps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        Ensemble::uniform(psis, format!("table-rows({})", table.row_id))?,
        Ensemble::uniform(phis, format!("table-cols({})", table.col_id))?,
    ))
}
