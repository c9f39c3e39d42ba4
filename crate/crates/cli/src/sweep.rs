//! `sweep`: a configuration file drives a sample-complexity sweep.
//!
//! Precedence: command-line flags, then the TOML file, then built-in defaults.
//! Each finished trial is stored under `<out_dir>/trials/`; a rerun with the
//! same resolved configuration reuses those files instead of recomputing.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use qmetric_core::io::write_curve_csv;
use qmetric_core::lab::search::{run_trial, ComplexityConfig, ComplexityCurve, CurvePoint, EnsembleSpec, LabMetric, TrialOutcome};
use qmetric_core::{Error, Result};

use crate::args::SweepArgs;
use crate::commands::{write_json, Echo};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepConfig {
    pub metric: LabMetric,
    pub ns: Vec<usize>,
    pub e1: EnsembleSpec,
    pub e2: EnsembleSpec,
    #[serde(flatten)]
    pub lab: ComplexityConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("sweep-out")
}

impl SweepConfig {
    pub fn resolve(args: &SweepArgs) -> Result<SweepConfig> {
        let text = fs::read_to_string(&args.config)?;
        let mut cfg: SweepConfig =
            toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", args.config.display())))?;
        if let Some(s) = args.seed {
            cfg.lab.seed = s;
        }
        if let Some(r) = args.reps {
            cfg.lab.reps = r;
        }
        if let Some(t) = args.trials {
            cfg.lab.trials = t;
        }
        if let Some(m) = &args.metric {
            cfg.metric = m.parse()?;
        }
        if let Some(ns) = &args.ns {
            cfg.ns = ns.clone();
        }
        if let Some(dir) = &args.out_dir {
            cfg.out_dir = dir.clone();
        }
        cfg.lab.validate()?;
        if cfg.ns.len() < 3 {
            return Err(Error::InvalidParameter(format!("a sweep needs at least 3 ensemble sizes, got {}", cfg.ns.len())));
        }
        Ok(cfg)
    }

    /// Identity of everything that influences a trial's result.
    fn fingerprint(&self) -> Result<String> {
        Ok(serde_json::to_string(&json!({
            "metric": self.metric,
            "e1": self.e1,
            "e2": self.e2,
            "lab": self.lab,
        }))?)
    }
}

#[derive(Serialize, Deserialize)]
struct StoredTrial {
    fingerprint: String,
    outcome: TrialOutcome,
}

fn trial_file(dir: &Path, metric: LabMetric, n: usize, trial: usize) -> PathBuf {
    dir.join("trials").join(format!("{metric}_N{n}_t{trial}.json"))
}

fn load_trial(path: &Path, fingerprint: &str) -> Option<TrialOutcome> {
    let file = File::open(path).ok()?;
    let stored: StoredTrial = serde_json::from_reader(BufReader::new(file)).ok()?;
    (stored.fingerprint == fingerprint).then_some(stored.outcome)
}

pub fn cmd_sweep(cfg: &SweepConfig) -> Result<()> {
    let fingerprint = cfg.fingerprint()?;
    fs::create_dir_all(cfg.out_dir.join("trials"))?;
    let mut points = Vec::with_capacity(cfg.ns.len());
    let mut failures = Vec::new();
    for &n in &cfg.ns {
        let results: Vec<(usize, Result<TrialOutcome>)> = (0..cfg.lab.trials)
            .into_par_iter()
            .map(|t| {
                let path = trial_file(&cfg.out_dir, cfg.metric, n, t);
                if let Some(done) = load_trial(&path, &fingerprint) {
                    eprintln!("[{}] N={n} trial={t} cached M={:?}", cfg.metric, done.m);
                    return (t, Ok(done));
                }
                let res = run_trial(cfg.metric, &cfg.e1, &cfg.e2, n, t, &cfg.lab).and_then(|outcome| {
                    let stored = StoredTrial { fingerprint: fingerprint.clone(), outcome };
                    write_json(&path, &serde_json::to_value(&stored)?)?;
                    Ok(stored.outcome)
                });
                match &res {
                    Ok(o) => eprintln!("[{}] N={n} trial={t} M={:?} flagged={}", cfg.metric, o.m, o.flagged),
                    Err(e) => eprintln!("[{}] N={n} trial={t} failed: {e}", cfg.metric),
                }
                (t, res)
            })
            .collect();
        let mut outcomes = Vec::new();
        for (t, r) in results {
            match r {
                Ok(o) => outcomes.push(o),
                Err(e) => failures.push(json!({ "N": n, "trial": t, "error": e.to_string() })),
            }
        }
        match CurvePoint::from_trials(n, outcomes) {
            Ok(p) => points.push(p),
            Err(e) => failures.push(json!({ "N": n, "error": e.to_string() })),
        }
    }

    let csv_path = cfg.out_dir.join("curve.csv");
    write_curve_csv(BufWriter::new(File::create(&csv_path)?), cfg.metric, &points)?;

    let summary_points: Vec<_> = points
        .iter()
        .map(|p| json!({ "N": p.n, "mean": p.mean, "std": p.std, "flagged": p.flagged }))
        .collect();
    let mut summary = json!({
        "config": Echo::Sweep(cfg.clone()),
        "seed": cfg.lab.seed,
        "metric": cfg.metric,
        "points": summary_points,
        "failures": failures,
    });
    let fit = if points.len() >= 3 {
        ComplexityCurve::from_points(cfg.metric, points).ok().map(|c| c.fit)
    } else {
        None
    };
    match fit {
        Some(f) => {
            summary["slope"] = json!(f.slope);
            summary["intercept"] = json!(f.intercept);
            summary["r_squared"] = json!(f.r_squared);
        }
        None => {
            summary["slope"] = serde_json::Value::Null;
        }
    }
    let summary_path = cfg.out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    if fit.is_none() {
        return Err(Error::InvalidParameter("fewer than 3 ensemble sizes produced a budget; no fit".into()));
    }
    Ok(())
}
