//! Fixtures shared by the criterion benchmarks.

use ndarray::Array2;
use qmetric_core::ensemble::{circular_ensemble, cluster_ensemble};
use qmetric_core::seed::stream;
use qmetric_core::Ensemble;
use rand::Rng;

/// Random cost matrix with entries in `[0, 1)` and random strictly positive marginals.
pub fn transport_instance(m: usize, n: usize, seed: u64) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = stream(seed, &[m as u64, n as u64]);
    let cost = Array2::from_shape_simple_fn((m, n), || rng.random::<f64>());
    let mut marginal = |len: usize| {
        let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let p = marginal(m);
    let q = marginal(n);
    (cost, p, q)
}

/// Cluster and circular ensembles of size `n`.
pub fn ensemble_pair(n: usize, seed: u64) -> (Ensemble, Ensemble) {
    let mut rng = stream(seed, &[n as u64]);
    let a = cluster_ensemble(n, 0.08, &mut rng).expect("cluster ensemble");
    let b = circular_ensemble(n, &mut rng).expect("circular ensemble");
    (a, b)
}
