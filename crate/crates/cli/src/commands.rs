use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qmetric_core::ensemble::{
    basis_ensemble, circular_ensemble, cluster_ensemble, from_fidelity_table, haar_ensemble, hard_pair,
};
use qmetric_core::estimators::{
    mmd1_labelfree, mmd_k_estimate, nonuniform_mmd_k_estimate, nonuniform_wasserstein_estimate,
    wasserstein_estimate,
};
use qmetric_core::lab::bounds::{general_mmd_bound, hoeffding_bound_mmd_k, hoeffding_bound_wasserstein};
use qmetric_core::lab::occupancy::min_samples_for_occupancy;
use qmetric_core::metrics::{mmd_k_moment, mmd_k_pairwise, wasserstein_with_plan, cost_matrix};
use qmetric_core::sampler::{draw_batch, draw_split_batches, read_batches_csv, write_batches_csv, NoiseConfig, TallySet};
use qmetric_core::seed::stream;
use qmetric_core::transport::solve_ot;
use qmetric_core::{io, Ensemble, Error, FidelityTable, Metric, PairKind, Result};

use crate::args::{BoundsArgs, DistArgs, EstimateArgs, GenArgs};
use crate::sweep::SweepConfig;

/// Resolved configuration of a run, embedded in its JSON output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Echo {
    Gen(GenArgs),
    Dist(DistArgs),
    Estimate(EstimateArgs),
    Sweep(SweepConfig),
    Bounds(BoundsArgs),
}

impl Echo {
    pub fn run(&self) -> Result<()> {
        match self {
            Echo::Gen(a) => cmd_gen(a),
            Echo::Dist(a) => cmd_dist(a),
            Echo::Estimate(a) => cmd_estimate(a),
            Echo::Sweep(c) => crate::sweep::cmd_sweep(c),
            Echo::Bounds(a) => cmd_bounds(a),
        }
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    if let Some(path) = out {
        write_json(path, value)?;
    }
    Ok(())
}

/// Reads an ensemble file, either a bare ensemble or a `gen` output.
pub fn load_ensemble(path: &Path) -> Result<Ensemble> {
    let value: Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let inner = match value.get("ensemble") {
        Some(e) => e.clone(),
        None => value,
    };
    Ok(serde_json::from_value(inner)?)
}

fn parse_metric(s: &str) -> Result<Metric> {
    s.parse()
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let mut rng = stream(a.seed, &[]);
    let need_n = || a.n.ok_or_else(|| Error::InvalidParameter(format!("generator '{}' needs --n", a.generator)));
    let ensembles: Vec<Ensemble> = match a.generator.as_str() {
        "cluster" => vec![cluster_ensemble(need_n()?, a.s, &mut rng)?],
        "circular" => vec![circular_ensemble(need_n()?, &mut rng)?],
        "hardpair" => vec![hard_pair(need_n()?, a.theta)?],
        "haar" => vec![haar_ensemble(need_n()?, a.d, &mut rng)?],
        "basis" => {
            let weights = match (&a.weights, a.n) {
                (Some(w), _) => w.clone(),
                (None, Some(n)) => vec![1.0 / n as f64; n],
                (None, None) => return Err(Error::InvalidParameter("basis needs --weights or --n".into())),
            };
            vec![basis_ensemble(&weights, a.d.max(weights.len()))?]
        }
        "fidelity-table" => {
            let path = a
                .table
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("fidelity-table needs --table".into()))?;
            let table = FidelityTable::new(io::read_matrix_csv(BufReader::new(File::open(path)?))?)?;
            let (rows, cols) = from_fidelity_table(&table)?;
            vec![rows, cols]
        }
        other => return Err(Error::InvalidParameter(format!("unknown generator '{other}'"))),
    };
    let echo = serde_json::to_value(Echo::Gen(a.clone()))?;
    let targets: Vec<&Path> = match ensembles.len() {
        1 => vec![a.out.as_path()],
        _ => {
            let second = a
                .out2
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("fidelity-table writes two ensembles; pass --out2".into()))?;
            vec![a.out.as_path(), second]
        }
    };
    for (ens, path) in ensembles.iter().zip(targets) {
        write_json(path, &json!({ "config": echo, "ensemble": ens }))?;
        println!("wrote {}: N={} d={} kind={}", path.display(), ens.len(), ens.dim(), ens.kind());
    }
    Ok(())
}

fn cmd_dist(a: &DistArgs) -> Result<()> {
    let e1 = load_ensemble(&a.e1)?;
    let e2 = load_ensemble(&a.e2)?;
    let metric = parse_metric(&a.metric)?;
    let mut out = json!({ "config": Echo::Dist(a.clone()) });
    match metric {
        Metric::MmdK(k) => {
            let report = mmd_k_pairwise(&e1, &e2, k)?;
            if a.cross_check {
                let moment = mmd_k_moment(&e1, &e2, k)?;
                out["cross_check"] = json!({
                    "route": moment.route,
                    "value": moment.value,
                    "discrepancy": (moment.raw_value - report.raw_value).abs(),
                });
            }
            out["report"] = serde_json::to_value(&report)?;
        }
        Metric::Wasserstein => {
            let (report, plan) = wasserstein_with_plan(&e1, &e2)?;
            if a.cross_check {
                let cost = cost_matrix(&e1, &e2)?;
                let (_, duals) = solve_ot(&cost, &e1.weights(), &e2.weights())?;
                let dual = duals.objective(&e1.weights(), &e2.weights());
                out["cross_check"] = json!({
                    "route": "dual",
                    "value": dual,
                    "discrepancy": (dual - report.raw_value).abs(),
                    "max_dual_violation": duals.max_violation(&cost),
                });
            }
            if let Some(path) = &a.plan_out {
                io::write_plan_csv(BufWriter::new(File::create(path)?), &plan, 0.0)?;
            }
            out["report"] = serde_json::to_value(&report)?;
        }
    }
    emit(&out, a.out.as_deref())
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let metric = parse_metric(&a.metric)?;
    let noise = a.noise.map(|eps_b| NoiseConfig { eps_b });
    let batches = match &a.replay {
        Some(path) => read_batches_csv(BufReader::new(File::open(path)?))?,
        None => {
            let (p1, p2) = (a.e1.as_ref(), a.e2.as_ref());
            let (p1, p2) = p1.zip(p2).ok_or_else(|| Error::InvalidParameter("--e1 and --e2 are required".into()))?;
            let e1 = load_ensemble(p1)?;
            let e2 = load_ensemble(p2)?;
            let mut rng = stream(a.seed, &[]);
            let batches = match metric {
                Metric::MmdK(_) => draw_split_batches(&e1, &e2, a.budget, &mut rng, noise)?,
                Metric::Wasserstein => vec![draw_batch(&e1, &e2, PairKind::K12, a.budget, &mut rng, noise)?],
            };
            write_batches_csv(BufWriter::new(File::create(&a.batch_out)?), &batches)?;
            batches
        }
    };
    let report = match metric {
        Metric::MmdK(k) => {
            let set = TallySet::from_batches(&batches)?;
            match a.estimator.as_deref().unwrap_or("ustat") {
                "ustat" => mmd_k_estimate(&set, k)?,
                "labelfree" if k == 1 => mmd1_labelfree(&set)?,
                "nonuniform" => nonuniform_mmd_k_estimate(&set, k)?,
                other => return Err(Error::InvalidParameter(format!("estimator '{other}' does not apply to {metric}"))),
            }
        }
        Metric::Wasserstein => {
            let batch = batches
                .iter()
                .find(|b| b.kind == PairKind::K12)
                .ok_or(Error::EmptyBatch(PairKind::K12))?;
            let tally = batch.to_tally();
            match a.estimator.as_deref().unwrap_or("plugin") {
                "plugin" => wasserstein_estimate(&tally)?,
                "nonuniform" => nonuniform_wasserstein_estimate(&tally)?,
                other => return Err(Error::InvalidParameter(format!("estimator '{other}' does not apply to {metric}"))),
            }
        }
    };
    let out = json!({ "config": Echo::Estimate(a.clone()), "report": report });
    emit(&out, a.out.as_deref())
}

/// Resolves a `--k` entry, where `N` means the ensemble size.
fn resolve_k(entry: &str, n: usize) -> Result<u32> {
    if entry.eq_ignore_ascii_case("n") {
        return Ok(n as u32);
    }
    match entry.parse::<u32>() {
        Ok(k) if k > 0 => Ok(k),
        _ => Err(Error::InvalidParameter(format!("bad order '{entry}'"))),
    }
}

fn cmd_bounds(a: &BoundsArgs) -> Result<()> {
    let mut rows = Vec::new();
    println!(
        "{:>6} {:>6} {:>16} {:>16} {:>16} {:>16} {:>12}",
        "N", "k", "wasserstein", "mmd-k", "mmd-k general", "occupancy", "mmd branch"
    );
    for &n in &a.n {
        let w = hoeffding_bound_wasserstein(n, a.eps, a.delta)?;
        let n2 = (n * n) as f64;
        let occupancy = min_samples_for_occupancy(1.0, n2, a.delta, 1.0 / n2)?;
        for entry in &a.k {
            let k = resolve_k(entry, n)?;
            let mmd = hoeffding_bound_mmd_k(n, k, a.eps, a.delta, a.multiplier)?;
            let general = general_mmd_bound(n, k, a.eps, a.delta);
            let branch = serde_json::to_value(mmd.branch)?;
            println!(
                "{:>6} {:>6} {:>16.1} {:>16.1} {:>16.1} {:>16.1} {:>12}",
                n,
                k,
                w,
                mmd.value,
                general,
                occupancy,
                branch.as_str().unwrap_or_default()
            );
            rows.push(json!({
                "N": n,
                "k": k,
                "wasserstein": w,
                "mmd_k": mmd.value,
                "mmd_k_branch": mmd.branch,
                "mmd_k_general": general,
                "occupancy_min": occupancy,
            }));
        }
    }
    if let Some(path) = &a.out {
        write_json(path, &json!({ "config": Echo::Bounds(a.clone()), "rows": rows }))?;
    }
    Ok(())
}
