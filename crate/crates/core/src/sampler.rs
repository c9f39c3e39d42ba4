//! SWAP-test measurement channel.
//!
//! A shot draws a label `(i, j)` with probability `p_i q_j`, runs the SWAP
//! test on the two states and records `r = +1` with probability `(1 + X_ij)/2`.
//! Per-shot records ([`SampleBatch`]) are the persisted, replayable form;
//! [`LabelTally`] keeps only per-label outcome counts, which is all any
//! estimator consumes, and can be drawn in `O(labels)` time for large budgets.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::metrics::cross_fidelities;
use crate::state::{eps_ball_state, fidelity_unchecked};

pub const CSV_VERSION_LINE: &str = "# qmetric-lab v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairKind {
    K11,
    K12,
    K22,
}

impl PairKind {
    pub const ALL: [PairKind; 3] = [PairKind::K11, PairKind::K12, PairKind::K22];

    /// The (row, column) ensembles this kind compares.
    pub fn select<'a>(&self, e1: &'a Ensemble, e2: &'a Ensemble) -> (&'a Ensemble, &'a Ensemble) {
        match self {
            PairKind::K11 => (e1, e1),
            PairKind::K12 => (e1, e2),
            PairKind::K22 => (e2, e2),
        }
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairKind::K11 => "11",
            PairKind::K12 => "12",
            PairKind::K22 => "22",
        })
    }
}

impl FromStr for PairKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "11" => Ok(PairKind::K11),
            "12" => Ok(PairKind::K12),
            "22" => Ok(PairKind::K22),
            other => Err(Error::Format(format!("unknown pair kind '{other}'"))),
        }
    }
}

impl Serialize for PairKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PairKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Budget split: `floor(M/3)` each to kinds 11 and 22, the remainder to 12.
pub fn split_budget(m: u64) -> [(PairKind, u64); 3] {
    let third = m / 3;
    [
        (PairKind::K11, third),
        (PairKind::K12, m - 2 * third),
        (PairKind::K22, third),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub kind: PairKind,
    pub i: usize,
    pub j: usize,
    pub r: i8,
}

/// Per-shot records of one pair kind over a `rows x cols` label grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub kind: PairKind,
    pub rows: usize,
    pub cols: usize,
    pub records: Vec<SampleRecord>,
}

impl SampleBatch {
    pub fn empty(kind: PairKind, rows: usize, cols: usize) -> Self {
        SampleBatch { kind, rows, cols, records: Vec::new() }
    }

    pub fn budget(&self) -> u64 {
        self.records.len() as u64
    }

    /// `T_l` for every label.
    pub fn counts(&self) -> Array2<u64> {
        let mut t = Array2::zeros((self.rows, self.cols));
        for rec in &self.records {
            t[[rec.i, rec.j]] += 1;
        }
        t
    }

    pub fn to_tally(&self) -> LabelTally {
        let mut tally = LabelTally::empty(self.kind, self.rows, self.cols);
        for rec in &self.records {
            tally.push(rec.i, rec.j, rec.r);
        }
        tally
    }
}

/// Sufficient statistic of a batch: `+1` and `-1` counts per label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTally {
    pub kind: PairKind,
    pub rows: usize,
    pub cols: usize,
    plus: Vec<u64>,
    minus: Vec<u64>,
}

impl LabelTally {
    pub fn empty(kind: PairKind, rows: usize, cols: usize) -> Self {
        LabelTally {
            kind,
            rows,
            cols,
            plus: vec![0; rows * cols],
            minus: vec![0; rows * cols],
        }
    }

    pub fn push(&mut self, i: usize, j: usize, r: i8) {
        let idx = i * self.cols + j;
        if r > 0 {
            self.plus[idx] += 1;
        } else {
            self.minus[idx] += 1;
        }
    }

    pub fn add_counts(&mut self, i: usize, j: usize, plus: u64, minus: u64) {
        let idx = i * self.cols + j;
        self.plus[idx] += plus;
        self.minus[idx] += minus;
    }

    pub fn labels(&self) -> usize {
        self.rows * self.cols
    }

    /// `(i, j, plus, minus)` over all labels, row-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, u64, u64)> + '_ {
        (0..self.labels()).map(move |idx| (idx / self.cols, idx % self.cols, self.plus[idx], self.minus[idx]))
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        let idx = i * self.cols + j;
        self.plus[idx] + self.minus[idx]
    }

    pub fn total(&self) -> u64 {
        self.plus.iter().sum::<u64>() + self.minus.iter().sum::<u64>()
    }

    pub fn sum_r(&self) -> i64 {
        self.plus.iter().sum::<u64>() as i64 - self.minus.iter().sum::<u64>() as i64
    }

    /// Number of labels observed at least `k` times.
    pub fn qualifying(&self, k: u64) -> usize {
        self.plus.iter().zip(&self.minus).filter(|(a, b)| *a + *b >= k).count()
    }

    pub fn min_count(&self) -> u64 {
        self.plus.iter().zip(&self.minus).map(|(a, b)| a + b).min().unwrap_or(0)
    }

    pub fn unobserved(&self) -> Vec<(usize, usize)> {
        self.iter().filter(|&(_, _, a, b)| a + b == 0).map(|(i, j, _, _)| (i, j)).collect()
    }

    /// Row-index and column-index occurrence counts.
    pub fn marginal_counts(&self) -> (Vec<u64>, Vec<u64>) {
        let mut rows = vec![0; self.rows];
        let mut cols = vec![0; self.cols];
        for (i, j, a, b) in self.iter() {
            rows[i] += a + b;
            cols[j] += a + b;
        }
        (rows, cols)
    }

    /// Merges another tally over the same grid.
    pub fn merge(&mut self, other: &LabelTally) -> Result<()> {
        if (self.kind, self.rows, self.cols) != (other.kind, other.rows, other.cols) {
            return Err(Error::Format("cannot merge tallies over different label grids".into()));
        }
        for (a, b) in self.plus.iter_mut().zip(&other.plus) {
            *a += b;
        }
        for (a, b) in self.minus.iter_mut().zip(&other.minus) {
            *a += b;
        }
        Ok(())
    }
}

/// Optional per-shot state perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub eps_b: f64,
}

fn outcome<R: Rng + ?Sized>(x: f64, rng: &mut R) -> i8 {
    if rng.random::<f64>() < 0.5 * (1.0 + x) {
        1
    } else {
        -1
    }
}

fn label_sampler(weights: &[f64]) -> Result<Option<WeightedIndex<f64>>> {
    let uniform = weights.windows(2).all(|w| w[0] == w[1]);
    if uniform {
        return Ok(None);
    }
    WeightedIndex::new(weights)
        .map(Some)
        .map_err(|e| Error::InvalidWeights(e.to_string()))
}

fn draw_index<R: Rng + ?Sized>(n: usize, dist: &Option<WeightedIndex<f64>>, rng: &mut R) -> usize {
    match dist {
        Some(d) => d.sample(rng),
        None => rng.random_range(0..n),
    }
}

/// One SWAP-test shot between `ea` and `eb`.
pub fn draw_sample<R: Rng + ?Sized>(ea: &Ensemble, eb: &Ensemble, kind: PairKind, rng: &mut R) -> Result<SampleRecord> {
    if ea.dim() != eb.dim() {
        return Err(Error::DimensionMismatch { left: ea.dim(), right: eb.dim() });
    }
    let i = draw_index(ea.len(), &label_sampler(&ea.weights())?, rng);
    let j = draw_index(eb.len(), &label_sampler(&eb.weights())?, rng);
    let r = outcome(fidelity_unchecked(ea.state(i), eb.state(j)), rng);
    Ok(SampleRecord { kind, i, j, r })
}

/// Precomputed channel for repeated sampling of one pair kind.
#[derive(Debug, Clone)]
pub struct SwapChannel {
    pub kind: PairKind,
    fidelities: Array2<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    row_dist: Option<WeightedIndex<f64>>,
    col_dist: Option<WeightedIndex<f64>>,
}

impl SwapChannel {
    pub fn new(ea: &Ensemble, eb: &Ensemble, kind: PairKind) -> Result<Self> {
        let fidelities = cross_fidelities(ea, eb)?;
        Self::from_table(fidelities, ea.weights(), eb.weights(), kind)
    }

    pub fn for_kind(e1: &Ensemble, e2: &Ensemble, kind: PairKind) -> Result<Self> {
        let (a, b) = kind.select(e1, e2);
        Self::new(a, b, kind)
    }

    pub fn from_table(fidelities: Array2<f64>, p: Vec<f64>, q: Vec<f64>, kind: PairKind) -> Result<Self> {
        if fidelities.dim() != (p.len(), q.len()) {
            return Err(Error::DimensionMismatch { left: fidelities.nrows(), right: p.len() });
        }
        Ok(SwapChannel {
            kind,
            row_dist: label_sampler(&p)?,
            col_dist: label_sampler(&q)?,
            fidelities,
            p,
            q,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.fidelities.dim()
    }

    pub fn fidelities(&self) -> &Array2<f64> {
        &self.fidelities
    }

    pub fn row_weights(&self) -> &[f64] {
        &self.p
    }

    pub fn col_weights(&self) -> &[f64] {
        &self.q
    }

    pub fn draw_label<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let (rows, cols) = self.shape();
        (draw_index(rows, &self.row_dist, rng), draw_index(cols, &self.col_dist, rng))
    }

    pub fn shot<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleRecord {
        let (i, j) = self.draw_label(rng);
        SampleRecord { kind: self.kind, i, j, r: outcome(self.fidelities[[i, j]], rng) }
    }

    /// `m` per-shot records.
    pub fn batch<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> SampleBatch {
        let (rows, cols) = self.shape();
        let records = (0..m).map(|_| self.shot(rng)).collect();
        SampleBatch { kind: self.kind, rows, cols, records }
    }

    /// Tally of `m` shots. Uses per-shot sampling for small budgets and
    /// otherwise draws label counts from the multinomial through conditional
    /// binomials (rows by `p`, then columns by `q`) and `+1` counts from
    /// `Binomial(T, (1 + X)/2)`; both paths have the same distribution.
    pub fn tally<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> LabelTally {
        let (rows, cols) = self.shape();
        let mut tally = LabelTally::empty(self.kind, rows, cols);
        if (m as usize) < rows * cols {
            for _ in 0..m {
                let rec = self.shot(rng);
                tally.push(rec.i, rec.j, rec.r);
            }
            return tally;
        }
        let row_counts = multinomial(m, &self.p, rng);
        let mut col_counts = vec![0u64; cols];
        for (i, &ti) in row_counts.iter().enumerate() {
            if ti == 0 {
                continue;
            }
            multinomial_into(ti, &self.q, rng, &mut col_counts);
            for (j, &t) in col_counts.iter().enumerate() {
                if t == 0 {
                    continue;
                }
                let prob = (0.5 * (1.0 + self.fidelities[[i, j]])).clamp(0.0, 1.0);
                let plus = binomial(t, prob, rng);
                tally.add_counts(i, j, plus, t - plus);
            }
        }
        tally
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("probability in (0, 1)").sample(rng)
}

fn multinomial<R: Rng + ?Sized>(n: u64, weights: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0; weights.len()];
    multinomial_into(n, weights, rng, &mut out);
    out
}

fn multinomial_into<R: Rng + ?Sized>(n: u64, weights: &[f64], rng: &mut R, out: &mut [u64]) {
    out.iter_mut().for_each(|c| *c = 0);
    let mut remaining = n;
    let mut mass: f64 = weights.iter().sum();
    let last = weights.len() - 1;
    for (c, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if c == last {
            out[c] = remaining;
            break;
        }
        let x = binomial(remaining, if mass > 0.0 { w / mass } else { 1.0 }, rng);
        out[c] = x;
        remaining -= x;
        mass -= w;
    }
}

/// `m` shots between `ea` and `eb`. With noise, both states of each shot are
/// replaced by fresh members of their infidelity balls; labels still name the
/// centers.
pub fn draw_batch<R: Rng + ?Sized>(
    ea: &Ensemble,
    eb: &Ensemble,
    kind: PairKind,
    m: u64,
    rng: &mut R,
    noise: Option<NoiseConfig>,
) -> Result<SampleBatch> {
    let channel = SwapChannel::new(ea, eb, kind)?;
    let Some(noise) = noise.filter(|n| n.eps_b > 0.0) else {
        return Ok(channel.batch(m, rng));
    };
    let mut records = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let (i, j) = channel.draw_label(rng);
        let a = eps_ball_state(ea.state(i), noise.eps_b, rng)?;
        let b = eps_ball_state(eb.state(j), noise.eps_b, rng)?;
        records.push(SampleRecord { kind, i, j, r: outcome(fidelity_unchecked(&a, &b), rng) });
    }
    Ok(SampleBatch { kind, rows: ea.len(), cols: eb.len(), records })
}

/// One batch per kind, budgeted by [`split_budget`].
pub fn draw_split_batches<R: Rng + ?Sized>(
    e1: &Ensemble,
    e2: &Ensemble,
    m: u64,
    rng: &mut R,
    noise: Option<NoiseConfig>,
) -> Result<Vec<SampleBatch>> {
    split_budget(m)
        .iter()
        .map(|&(kind, mk)| {
            let (a, b) = kind.select(e1, e2);
            draw_batch(a, b, kind, mk, rng, noise)
        })
        .collect()
}

/// Tallies for the three kinds of an MMD experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallySet {
    pub k11: LabelTally,
    pub k12: LabelTally,
    pub k22: LabelTally,
}

impl TallySet {
    pub fn get(&self, kind: PairKind) -> &LabelTally {
        match kind {
            PairKind::K11 => &self.k11,
            PairKind::K12 => &self.k12,
            PairKind::K22 => &self.k22,
        }
    }

    pub fn from_batches(batches: &[SampleBatch]) -> Result<TallySet> {
        let find = |kind: PairKind| -> Result<LabelTally> {
            let mut found: Option<LabelTally> = None;
            for b in batches.iter().filter(|b| b.kind == kind) {
                match found.as_mut() {
                    Some(t) => t.merge(&b.to_tally())?,
                    None => found = Some(b.to_tally()),
                }
            }
            found.ok_or(Error::EmptyBatch(kind))
        };
        Ok(TallySet {
            k11: find(PairKind::K11)?,
            k12: find(PairKind::K12)?,
            k22: find(PairKind::K22)?,
        })
    }

    pub fn total(&self) -> u64 {
        self.k11.total() + self.k12.total() + self.k22.total()
    }
}

/// The three channels of an MMD experiment, precomputed once per ensemble pair.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub k11: SwapChannel,
    pub k12: SwapChannel,
    pub k22: SwapChannel,
}

impl ChannelSet {
    pub fn new(e1: &Ensemble, e2: &Ensemble) -> Result<Self> {
        Ok(ChannelSet {
            k11: SwapChannel::for_kind(e1, e2, PairKind::K11)?,
            k12: SwapChannel::for_kind(e1, e2, PairKind::K12)?,
            k22: SwapChannel::for_kind(e1, e2, PairKind::K22)?,
        })
    }

    pub fn get(&self, kind: PairKind) -> &SwapChannel {
        match kind {
            PairKind::K11 => &self.k11,
            PairKind::K12 => &self.k12,
            PairKind::K22 => &self.k22,
        }
    }

    /// Tallies with the budget split across kinds.
    pub fn draw_tallies<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> TallySet {
        let [(_, m11), (_, m12), (_, m22)] = split_budget(m);
        TallySet {
            k11: self.k11.tally(m11, rng),
            k12: self.k12.tally(m12, rng),
            k22: self.k22.tally(m22, rng),
        }
    }
}

/// An exact fidelity reading for a drawn label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleDraw {
    pub kind: PairKind,
    pub i: usize,
    pub j: usize,
    pub x: f64,
}

/// Fails unless every cross fidelity is 0 or 1 (within `1e-12`).
pub fn require_basis_pair(ea: &Ensemble, eb: &Ensemble) -> Result<()> {
    let table = cross_fidelities(ea, eb)?;
    if let Some(((i, j), &value)) = table
        .indexed_iter()
        .find(|(_, &x)| x.min(1.0 - x).abs() > 1e-12)
    {
        return Err(Error::NonBasisOracle { i, j, value });
    }
    Ok(())
}

/// Classical-limit shot: the label is drawn as usual and the fidelity is read
/// exactly. Requires basis-state ensembles unless `force` is set.
pub fn classical_oracle_draw<R: Rng + ?Sized>(
    ea: &Ensemble,
    eb: &Ensemble,
    kind: PairKind,
    rng: &mut R,
    force: bool,
) -> Result<OracleDraw> {
    if !force {
        require_basis_pair(ea, eb)?;
    } else if ea.dim() != eb.dim() {
        return Err(Error::DimensionMismatch { left: ea.dim(), right: eb.dim() });
    }
    let i = draw_index(ea.len(), &label_sampler(&ea.weights())?, rng);
    let j = draw_index(eb.len(), &label_sampler(&eb.weights())?, rng);
    Ok(OracleDraw { kind, i, j, x: fidelity_unchecked(ea.state(i), eb.state(j)) })
}

/// `m` oracle draws on a precomputed channel.
pub fn oracle_draws<R: Rng + ?Sized>(channel: &SwapChannel, m: u64, rng: &mut R) -> Vec<OracleDraw> {
    (0..m)
        .map(|_| {
            let (i, j) = channel.draw_label(rng);
            OracleDraw { kind: channel.kind, i, j, x: channel.fidelities[[i, j]] }
        })
        .collect()
}

/// Writes batches as `kind,i,j,r` rows after a version line and a grid line.
pub fn write_batches_csv<W: Write>(mut out: W, batches: &[SampleBatch]) -> Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    let grid: Vec<String> = batches
        .iter()
        .map(|b| format!("{}:{}x{}", b.kind, b.rows, b.cols))
        .collect();
    writeln!(out, "# grid {}", grid.join(" "))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "i", "j", "r"])?;
    for b in batches {
        for rec in &b.records {
            w.write_record([rec.kind.to_string(), rec.i.to_string(), rec.j.to_string(), rec.r.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_batches_csv<R: BufRead>(mut input: R) -> Result<Vec<SampleBatch>> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != CSV_VERSION_LINE {
        return Err(Error::Format(format!("expected '{CSV_VERSION_LINE}', found '{}'", line.trim_end())));
    }
    line.clear();
    input.read_line(&mut line)?;
    let grid = line
        .trim_end()
        .strip_prefix("# grid")
        .ok_or_else(|| Error::Format("missing '# grid' line".into()))?;
    let mut batches = Vec::new();
    for spec in grid.split_whitespace() {
        let (kind, dims) = spec
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("bad grid entry '{spec}'")))?;
        let (rows, cols) = dims
            .split_once('x')
            .ok_or_else(|| Error::Format(format!("bad grid entry '{spec}'")))?;
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad grid entry '{spec}'")));
        batches.push(SampleBatch::empty(kind.parse()?, parse(rows)?, parse(cols)?));
    }
    let mut reader = csv::Reader::from_reader(input);
    for row in reader.records() {
        let row = row?;
        if row.len() != 4 {
            return Err(Error::Format(format!("expected 4 columns, found {}", row.len())));
        }
        let kind: PairKind = row[0].parse()?;
        let num = |s: &str| s.trim().parse::<i64>().map_err(|_| Error::Format(format!("bad number '{s}'")));
        let (i, j, r) = (num(&row[1])?, num(&row[2])?, num(&row[3])?);
        if r != 1 && r != -1 {
            return Err(Error::Format(format!("outcome must be +1 or -1, found {r}")));
        }
        let batch = batches
            .iter_mut()
            .find(|b| b.kind == kind)
            .ok_or_else(|| Error::Format(format!("kind {kind} missing from grid line")))?;
        if i < 0 || j < 0 || i as usize >= batch.rows || j as usize >= batch.cols {
            return Err(Error::Format(format!("label ({i}, {j}) outside the {}x{} grid", batch.rows, batch.cols)));
        }
        batch.records.push(SampleRecord { kind, i: i as usize, j: j as usize, r: r as i8 });
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{circular_ensemble, cluster_ensemble, haar_ensemble};
    use crate::metrics::f_bar;
    use crate::state::PureState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(i: usize) -> Ensemble {
        Ensemble::uniform(vec![PureState::basis(2, i).unwrap()], "b").unwrap()
    }

    #[test]
    fn split_budget_assigns_remainder_to_cross_kind() {
        assert_eq!(split_budget(10), [(PairKind::K11, 3), (PairKind::K12, 4), (PairKind::K22, 3)]);
        assert_eq!(split_budget(0).iter().map(|x| x.1).sum::<u64>(), 0);
        for m in 0..50 {
            assert_eq!(split_budget(m).iter().map(|x| x.1).sum::<u64>(), m);
        }
    }

    #[test]
    fn extreme_fidelities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(draw_sample(&basis(0), &basis(0), PairKind::K12, &mut rng).unwrap().r, 1);
        }
        let b = draw_batch(&basis(0), &basis(1), PairKind::K12, 100_000, &mut rng, None).unwrap();
        let mean = b.records.iter().map(|r| r.r as f64).sum::<f64>() / 1e5;
        assert!(mean.abs() <= 0.01, "mean {mean}");
        assert!(draw_batch(&basis(0), &basis(1), PairKind::K12, 0, &mut rng, None).unwrap().records.is_empty());
    }

    #[test]
    fn cluster_vs_circular_mean_matches_f_bar() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e1 = cluster_ensemble(50, 0.08, &mut rng).unwrap();
        let e2 = circular_ensemble(50, &mut rng).unwrap();
        let b = draw_batch(&e1, &e2, PairKind::K12, 1_000_000, &mut rng, None).unwrap();
        let mean = b.records.iter().map(|r| r.r as f64).sum::<f64>() / 1e6;
        let truth = f_bar(&e1, &e2, 1).unwrap();
        let sigma = ((1.0 - truth * truth) / 1e6).sqrt();
        assert!((mean - truth).abs() <= 3.0 * sigma, "{mean} vs {truth}");
    }

    #[test]
    fn label_counts_are_multinomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = haar_ensemble(10, 2, &mut rng).unwrap();
        let sigma = (1e5f64 * 0.01 * 0.99).sqrt();
        let batch = draw_batch(&e, &e, PairKind::K11, 100_000, &mut rng, None).unwrap();
        let tally = SwapChannel::new(&e, &e, PairKind::K11).unwrap().tally(100_000, &mut rng);
        assert_eq!(tally.total(), 100_000);
        for t in [batch.counts().iter().copied().collect::<Vec<_>>(), (0..100).map(|l| tally.count(l / 10, l % 10)).collect()] {
            assert_eq!(t.iter().sum::<u64>(), 100_000);
            for c in t {
                assert!((c as f64 - 1000.0).abs() <= 5.0 * sigma, "count {c}");
            }
        }
    }

    #[test]
    fn determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e1 = haar_ensemble(5, 2, &mut rng).unwrap();
        let e2 = haar_ensemble(4, 2, &mut rng).unwrap();
        let a = draw_split_batches(&e1, &e2, 1000, &mut ChaCha8Rng::seed_from_u64(9), None).unwrap();
        let b = draw_split_batches(&e1, &e2, 1000, &mut ChaCha8Rng::seed_from_u64(9), None).unwrap();
        assert_eq!(a, b);
        let ch = ChannelSet::new(&e1, &e2).unwrap();
        assert_eq!(
            ch.draw_tallies(5000, &mut ChaCha8Rng::seed_from_u64(5)),
            ch.draw_tallies(5000, &mut ChaCha8Rng::seed_from_u64(5))
        );
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let e1 = haar_ensemble(3, 2, &mut rng).unwrap();
        let e2 = haar_ensemble(4, 2, &mut rng).unwrap();
        let batches = draw_split_batches(&e1, &e2, 300, &mut rng, Some(NoiseConfig { eps_b: 0.01 })).unwrap();
        let mut buf = Vec::new();
        write_batches_csv(&mut buf, &batches).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# qmetric-lab v1\n"));
        assert_eq!(read_batches_csv(&buf[..]).unwrap(), batches);
        assert!(read_batches_csv(&b"kind,i,j,r\n"[..]).is_err());
    }

    #[test]
    fn oracle_requires_basis_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(classical_oracle_draw(&basis(0), &basis(0), PairKind::K12, &mut rng, false).unwrap().x, 1.0);
        assert_eq!(classical_oracle_draw(&basis(0), &basis(1), PairKind::K12, &mut rng, false).unwrap().x, 0.0);
        let h = haar_ensemble(3, 2, &mut rng).unwrap();
        assert!(matches!(
            classical_oracle_draw(&h, &h, PairKind::K11, &mut rng, false),
            Err(Error::NonBasisOracle { .. })
        ));
        assert!(classical_oracle_draw(&h, &h, PairKind::K11, &mut rng, true).is_ok());
    }
}
