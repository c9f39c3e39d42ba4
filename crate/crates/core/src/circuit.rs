//! Gate-level statevector simulation of the SWAP test.
//!
//! Register layout: ancilla is the most significant qubit, followed by the
//! `n` qubits of the first state and the `n` qubits of the second.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::PureState;

struct Register {
    amps: Vec<Complex64>,
    qubits: usize,
}

impl Register {
    fn bit(&self, q: usize) -> usize {
        1 << (self.qubits - 1 - q)
    }

    fn hadamard(&mut self, q: usize) {
        let mask = self.bit(q);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for idx in 0..self.amps.len() {
            if idx & mask == 0 {
                let (a, b) = (self.amps[idx], self.amps[idx | mask]);
                self.amps[idx] = (a + b) * r;
                self.amps[idx | mask] = (a - b) * r;
            }
        }
    }

    /// Fredkin gate: swap qubits `a` and `b` when `control` is set.
    fn controlled_swap(&mut self, control: usize, a: usize, b: usize) {
        let (mc, ma, mb) = (self.bit(control), self.bit(a), self.bit(b));
        for idx in 0..self.amps.len() {
            if idx & mc != 0 && idx & ma != 0 && idx & mb == 0 {
                self.amps.swap(idx, (idx & !ma) | mb);
            }
        }
    }

    fn prob_zero(&self, q: usize) -> f64 {
        let mask = self.bit(q);
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

/// Probability that the ancilla reads `0` after `H`, controlled-SWAP, `H`.
pub fn swap_test_circuit_prob(a: &PureState, b: &PureState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let d = a.dim();
    if !d.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(d));
    }
    let n = d.trailing_zeros() as usize;
    let qubits = 1 + 2 * n;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits];
    for (i, ai) in a.amplitudes().iter().enumerate() {
        for (j, bj) in b.amplitudes().iter().enumerate() {
            amps[(i << n) | j] = ai * bj;
        }
    }
    let mut reg = Register { amps, qubits };
    reg.hadamard(0);
    for q in 0..n {
        reg.controlled_swap(0, 1 + q, 1 + n + q);
    }
    reg.hadamard(0);
    Ok(reg.prob_zero(0))
}
