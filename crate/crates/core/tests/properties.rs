//! Randomized invariants over states, metrics, transport, kernels and sampling.

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qmetric_core::ensemble::{haar_ensemble, Ensemble, Entry};
use qmetric_core::estimators::ustat_kernel;
use qmetric_core::metrics::{mmd_k_moment, mmd_k_pairwise, wasserstein_exact};
use qmetric_core::sampler::{read_batches_csv, split_budget, write_batches_csv, ChannelSet, SwapChannel};
use qmetric_core::state::{eps_ball_state, fidelity, haar_state, PureState};
use qmetric_core::transport::solve_ot;
use qmetric_core::PairKind;

fn weighted(base: &Ensemble, raw: &[f64]) -> Ensemble {
    let total: f64 = raw.iter().sum();
    let mut entries: Vec<Entry> = base
        .entries()
        .iter()
        .zip(raw)
        .map(|(e, w)| Entry { weight: w / total, amplitudes: e.amplitudes.clone() })
        .collect();
    let drift = 1.0 - entries.iter().map(|e| e.weight).sum::<f64>();
    entries[0].weight += drift;
    Ensemble::new(entries, base.kind()).unwrap()
}

fn ensemble_pair(seed: u64, d: usize, n1: usize, n2: usize) -> (Ensemble, Ensemble) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (haar_ensemble(n1, d, &mut rng).unwrap(), haar_ensemble(n2, d, &mut rng).unwrap())
}

fn normalized(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed in any::<u64>(), d in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = haar_state(d, &mut rng).unwrap();
        let b = haar_state(d, &mut rng).unwrap();
        let x = fidelity(&a, &b).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&x));
        prop_assert!((x - fidelity(&b, &a).unwrap()).abs() <= 1e-15);
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() <= 1e-12);
        prop_assert!((fidelity(&a.with_phase(1.234), &b).unwrap() - x).abs() <= 1e-12);
    }

    #[test]
    fn eps_ball_members_are_unit_and_close(seed in any::<u64>(), d in 2usize..6, eps in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = haar_state(d, &mut rng).unwrap();
        let s = eps_ball_state(&c, eps, &mut rng).unwrap();
        prop_assert!((s.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(fidelity(&c, &s).unwrap() >= 1.0 - eps - 1e-12);
    }

    #[test]
    fn metrics_are_label_invariant(seed in any::<u64>(), d in 2usize..4, n1 in 1usize..6, n2 in 1usize..6, k in 1u32..4) {
        let (e1, e2) = ensemble_pair(seed, d, n1, n2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let raw: Vec<f64> = (0..n1).map(|_| rand::Rng::random_range(&mut rng, 0.1..1.0)).collect();
        let e1 = weighted(&e1, &raw);
        let perm1: Vec<usize> = (0..n1).rev().collect();
        let mut perm2: Vec<usize> = (0..n2).collect();
        perm2.rotate_left(1 % n2.max(1));
        let (p1, p2) = (e1.permuted(&perm1).unwrap(), e2.permuted(&perm2).unwrap());
        let a = mmd_k_pairwise(&e1, &e2, k).unwrap().raw_value;
        let b = mmd_k_pairwise(&p1, &p2, k).unwrap().raw_value;
        prop_assert!((a - b).abs() <= 1e-12);
        let wa = wasserstein_exact(&e1, &e2).unwrap().raw_value;
        let wb = wasserstein_exact(&p1, &p2).unwrap().raw_value;
        prop_assert!((wa - wb).abs() <= 1e-12);
        prop_assert!(wa >= -1e-12);
    }

    #[test]
    fn moment_route_matches_pairwise(seed in any::<u64>(), d in 2usize..4, n1 in 1usize..5, n2 in 1usize..5, k in 1u32..3) {
        let (e1, e2) = ensemble_pair(seed, d, n1, n2);
        let a = mmd_k_pairwise(&e1, &e2, k).unwrap().raw_value;
        let b = mmd_k_moment(&e1, &e2, k).unwrap().raw_value;
        prop_assert!((a - b).abs() <= 1e-9);
        prop_assert!(a >= -1e-10);
    }

    #[test]
    fn transport_certificate(seed in any::<u64>(), m in 1usize..15, n in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Array2::from_shape_simple_fn((m, n), || rand::Rng::random::<f64>(&mut rng));
        let p = normalized(&(0..m).map(|_| rand::Rng::random_range(&mut rng, 0.01..1.0)).collect::<Vec<_>>());
        let q = normalized(&(0..n).map(|_| rand::Rng::random_range(&mut rng, 0.01..1.0)).collect::<Vec<_>>());
        let (plan, duals) = solve_ot(&c, &p, &q).unwrap();
        prop_assert!(plan.plan.iter().all(|&x| x >= -1e-12));
        for (a, b) in plan.row_sums().iter().zip(&p) { prop_assert!((a - b).abs() <= 1e-9); }
        for (a, b) in plan.col_sums().iter().zip(&q) { prop_assert!((a - b).abs() <= 1e-9); }
        prop_assert!(duals.max_violation(&c) <= 1e-9);
        prop_assert!((duals.objective(&p, &q) - plan.objective).abs() <= 1e-8);
        let alpha: f64 = rand::Rng::random_range(&mut rng, -5.0..5.0);
        prop_assert!((duals.shifted(alpha).objective(&p, &q) - duals.objective(&p, &q)).abs() <= 1e-9);
    }

    #[test]
    fn kernel_is_bounded(a in 0u64..60, b in 0u64..60, k in 1u32..8) {
        prop_assume!(a + b >= k as u64);
        let z = ustat_kernel(a, b, k).unwrap();
        prop_assert!(z.abs() <= 1.0);
        // Z is the mean of products over subsets; swapping signs flips odd orders
        let flipped = ustat_kernel(b, a, k).unwrap();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((flipped - sign * z).abs() <= 1e-12);
    }

    #[test]
    fn budgets_and_tallies_conserve_shots(seed in any::<u64>(), m in 0u64..5000) {
        prop_assert_eq!(split_budget(m).iter().map(|x| x.1).sum::<u64>(), m);
        let (e1, e2) = ensemble_pair(seed, 2, 4, 3);
        let set = ChannelSet::new(&e1, &e2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tallies = set.draw_tallies(m, &mut rng);
        prop_assert_eq!(tallies.total(), m);
        prop_assert!(tallies.k12.qualifying(1) <= 12);
    }

    #[test]
    fn batch_csv_round_trips(seed in any::<u64>(), m in 0u64..300) {
        let (e1, e2) = ensemble_pair(seed, 2, 3, 5);
        let ch = SwapChannel::new(&e1, &e2, PairKind::K12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batches = vec![ch.batch(m, &mut rng)];
        let mut buf = Vec::new();
        write_batches_csv(&mut buf, &batches).unwrap();
        prop_assert_eq!(read_batches_csv(&buf[..]).unwrap(), batches);
    }
}

#[test]
fn basis_states_are_orthonormal() {
    for d in 2..6 {
        for i in 0..d {
            for j in 0..d {
                let x = fidelity(&PureState::basis(d, i).unwrap(), &PureState::basis(d, j).unwrap()).unwrap();
                assert_eq!(x, if i == j { 1.0 } else { 0.0 });
            }
        }
    }
}
