//! Dense k-th moment operators `M_k(E) = sum_x p_x (|psi_x><psi_x|)^{(x) k}`.
//!
//! These are verification oracles for the pairwise formulas: memory grows as
//! `d^{2k}`, so construction is gated by [`Tolerances::moment_cap`](crate::Tolerances).

use ndarray::Array2;
use num_complex::Complex64;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::tolerance::DEFAULT as TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentOperator {
    pub matrix: Array2<Complex64>,
    pub order: u32,
    pub dim: usize,
}

fn side_len(dim: usize, k: u32, cap: usize) -> Result<usize> {
    let side = (dim as u128).checked_pow(k).unwrap_or(u128::MAX);
    if side > cap as u128 {
        return Err(Error::MomentCapExceeded {
            side: side.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    Ok(side as usize)
}

/// `psi^{(x) k}` as a flat vector, first factor most significant.
pub fn tensor_power(amps: &[Complex64], k: u32) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..k {
        out = out
            .iter()
            .flat_map(|a| amps.iter().map(move |b| a * b))
            .collect();
    }
    out
}

pub fn moment_operator(ens: &Ensemble, k: u32) -> Result<MomentOperator> {
    moment_operator_capped(ens, k, TOL.moment_cap)
}

pub fn moment_operator_capped(ens: &Ensemble, k: u32, cap: usize) -> Result<MomentOperator> {
    if k == 0 {
        return Err(Error::InvalidParameter("moment order must be positive".into()));
    }
    let side = side_len(ens.dim(), k, cap)?;
    let mut matrix = Array2::<Complex64>::zeros((side, side));
    for e in ens.entries() {
        let v = tensor_power(e.amplitudes.amplitudes(), k);
        for (r, vr) in v.iter().enumerate() {
            let scaled = vr * e.weight;
            for (c, vc) in v.iter().enumerate() {
                matrix[[r, c]] += scaled * vc.conj();
            }
        }
    }
    Ok(MomentOperator {
        matrix,
        order: k,
        dim: ens.dim(),
    })
}

impl MomentOperator {
    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diag().sum()
    }

    /// Largest `|M - M^dagger|` entry.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.side();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.matrix[[r, c]] - self.matrix[[c, r]].conj()).norm());
            }
        }
        worst
    }

    /// Traces out tensor factor `factor` (0-based), giving an order `k-1` operator.
    pub fn partial_trace(&self, factor: u32) -> Result<MomentOperator> {
        if self.order < 2 || factor >= self.order {
            return Err(Error::InvalidParameter(format!(
                "cannot trace factor {factor} of an order-{} operator",
                self.order
            )));
        }
        let d = self.dim;
        let inner = d.pow(self.order - 1 - factor);
        let outer = d.pow(factor);
        let side = outer * inner;
        let mut out = Array2::<Complex64>::zeros((side, side));
        for (ro, co) in (0..outer).flat_map(|a| (0..outer).map(move |b| (a, b))) {
            for (ri, ci) in (0..inner).flat_map(|a| (0..inner).map(move |b| (a, b))) {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..d {
                    let r = (ro * d + t) * inner + ri;
                    let c = (co * d + t) * inner + ci;
                    acc += self.matrix[[r, c]];
                }
                out[[ro * inner + ri, co * inner + ci]] = acc;
            }
        }
        Ok(MomentOperator {
            matrix: out,
            order: self.order - 1,
            dim: d,
        })
    }

    /// `Tr(A M)` for an operator of the same side.
    pub fn trace_with(&self, a: &Array2<Complex64>) -> Complex64 {
        let n = self.side();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..n {
            for c in 0..n {
                acc += a[[r, c]] * self.matrix[[c, r]];
            }
        }
        acc
    }

    /// Squared Hilbert-Schmidt norm of `self - other`.
    pub fn hs_distance_sq(&self, other: &MomentOperator) -> Result<f64> {
        if self.matrix.dim() != other.matrix.dim() {
            return Err(Error::DimensionMismatch {
                left: self.side(),
                right: other.side(),
            });
        }
        Ok(self
            .matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum())
    }

    /// `Tr(M^2)` for a Hermitian operator.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Frame potential `E_{psi, phi ~ E} |<psi|phi>|^{2k}`.
pub fn self_overlap(ens: &Ensemble, k: u32) -> f64 {
    crate::metrics::f_bar_unchecked(ens, ens, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{hard_pair, haar_ensemble, Entry};
    use crate::state::PureState;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ensemble(rng: &mut ChaCha8Rng) -> Ensemble {
        let d = rng.random_range(2..=4);
        let n = rng.random_range(1..=6);
        let base = haar_ensemble(n, d, rng).unwrap();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut entries: Vec<Entry> = base
            .entries()
            .iter()
            .zip(&raw)
            .map(|(e, w)| Entry { weight: w / total, amplitudes: e.amplitudes.clone() })
            .collect();
        let drift: f64 = 1.0 - entries.iter().map(|e| e.weight).sum::<f64>();
        entries[0].weight += drift;
        Ensemble::new(entries, "random").unwrap()
    }

    #[test]
    fn singleton_order_two() {
        let e = Ensemble::uniform(vec![PureState::basis(2, 0).unwrap()], "s").unwrap();
        let m = moment_operator(&e, 2).unwrap();
        for ((r, c), v) in m.matrix.indexed_iter() {
            let expect = if r == 0 && c == 0 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(v.re, expect, epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let e = hard_pair(2, 0.0).unwrap();
        assert!(matches!(moment_operator(&e, 13), Err(Error::MomentCapExceeded { cap: 4096, .. })));
        assert!(moment_operator(&e, 12).is_ok());
        assert!(moment_operator_capped(&e, 3, 4).is_err());
    }

    #[test]
    fn operator_invariants_and_partial_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let e = random_ensemble(&mut rng);
            let k = rng.random_range(1..=3);
            let m = moment_operator(&e, k).unwrap();
            assert_abs_diff_eq!(m.trace().re, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(m.trace().im, 0.0, epsilon = 1e-10);
            assert!(m.hermiticity_defect() <= 1e-10);
            assert_abs_diff_eq!(m.purity(), self_overlap(&e, k), epsilon = 1e-10);
            if k >= 2 {
                let lower = moment_operator(&e, k - 1).unwrap();
                for factor in 0..k {
                    let t = m.partial_trace(factor).unwrap();
                    for (a, b) in t.matrix.iter().zip(lower.matrix.iter()) {
                        assert!((a - b).norm() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let e = random_ensemble(&mut rng);
            let m = moment_operator(&e, 2).unwrap();
            let n = m.side();
            let mat = nalgebra::DMatrix::from_fn(n, n, |r, c| {
                let v = m.matrix[[r, c]];
                nalgebra::Complex::new(v.re, v.im)
            });
            let eig = nalgebra::SymmetricEigen::new(mat);
            assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
        }
    }

    #[test]
    fn hard_pair_order_two_is_theta_free() {
        let base = moment_operator(&hard_pair(3, 0.0).unwrap(), 2).unwrap();
        for theta in [std::f64::consts::PI / 7.0, 1.3] {
            let other = moment_operator(&hard_pair(3, theta).unwrap(), 2).unwrap();
            assert!(base.hs_distance_sq(&other).unwrap().sqrt() <= 1e-12);
        }
    }

    #[test]
    fn self_overlap_examples() {
        let single = Ensemble::uniform(vec![PureState::basis(3, 1).unwrap()], "s").unwrap();
        for k in 1..5 {
            assert_abs_diff_eq!(self_overlap(&single, k), 1.0, epsilon = 1e-15);
        }
        let ortho = Ensemble::uniform(
            vec![PureState::basis(2, 0).unwrap(), PureState::basis(2, 1).unwrap()],
            "o",
        )
        .unwrap();
        assert_abs_diff_eq!(self_overlap(&ortho, 1), 0.5, epsilon = 1e-15);
        // pair fidelities of {|+>, |->}: 1, 0, 0, 1
        assert_abs_diff_eq!(self_overlap(&hard_pair(2, 0.0).unwrap(), 2), 0.5, epsilon = 1e-15);
    }
}
