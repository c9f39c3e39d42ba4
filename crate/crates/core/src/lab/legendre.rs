//! Fidelity distributions on `[0, a]` whose first `k - 1` moments agree and
//! whose `k`-th moments differ, and the ensemble pairs built from them.
//!
//! `mu0` is uniform on `[0, a]`; `mu1` has density `(1 + eta P_k(2x/a - 1)) / a`.
//! Orthogonality of `P_k` to lower-degree polynomials gives the matching.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{from_fidelity_table, Ensemble, FidelityTable};
use crate::error::{Error, Result};

/// `P_n(x)` by the three-term recurrence.
pub fn legendre_p(n: u32, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return p0;
    }
    for m in 1..n {
        let mf = m as f64;
        let p2 = ((2.0 * mf + 1.0) * x * p1 - mf * p0) / (mf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `(P_n(x), P_n'(x))`.
fn legendre_with_derivative(n: u32, x: f64) -> (f64, f64) {
    let p = legendre_p(n, x);
    let q = legendre_p(n - 1, x);
    let nf = n as f64;
    (p, nf * (x * p - q) / (x * x - 1.0))
}

/// Nodes and weights of `n`-point Gauss-Legendre quadrature on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nu = n as u32;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(nu, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(nu, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

pub const QUADRATURE_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatchedPair {
    pub k: u32,
    pub eta: f64,
    pub alpha: f64,
    pub n: usize,
    /// Support upper end `alpha / N`.
    pub a: f64,
}

pub fn moment_matched_pair(k: u32, eta: f64, alpha: f64, n: usize) -> Result<MomentMatchedPair> {
    if k == 0 {
        return Err(Error::InvalidParameter("matched order k must be positive".into()));
    }
    if !(eta.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!("|eta| must be at most 1, got {eta}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) || n == 0 {
        return Err(Error::InvalidParameter(format!("need alpha in (0, 1) and N >= 1, got alpha={alpha}, N={n}")));
    }
    Ok(MomentMatchedPair { k, eta, alpha, n, a: alpha / n as f64 })
}

impl MomentMatchedPair {
    pub fn density0(&self, x: f64) -> f64 {
        if (0.0..=self.a).contains(&x) {
            1.0 / self.a
        } else {
            0.0
        }
    }

    pub fn density1(&self, x: f64) -> f64 {
        if (0.0..=self.a).contains(&x) {
            (1.0 + self.eta * legendre_p(self.k, 2.0 * x / self.a - 1.0)) / self.a
        } else {
            0.0
        }
    }

    /// Distribution function of `mu1`.
    pub fn cdf1(&self, x: f64) -> f64 {
        let u = (x / self.a).clamp(0.0, 1.0);
        let y = 2.0 * u - 1.0;
        let k = self.k;
        let integral = (legendre_p(k + 1, y) - legendre_p(k - 1, y)) / (2.0 * (2 * k + 1) as f64);
        (u + self.eta * integral).clamp(0.0, 1.0)
    }

    /// `int_0^a g(x) f(x) dx` by Gauss-Legendre quadrature on the mapped interval.
    fn integrate(&self, g: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64) -> f64 {
        let (nodes, weights) = gauss_legendre(QUADRATURE_NODES);
        let half = 0.5 * self.a;
        nodes
            .iter()
            .zip(&weights)
            .map(|(&y, &w)| {
                let x = half * (y + 1.0);
                w * g(x) * f(x)
            })
            .sum::<f64>()
            * half
    }

    pub fn moment0(&self, j: u32) -> f64 {
        self.integrate(|x| x.powi(j as i32), |x| self.density0(x))
    }

    pub fn moment1(&self, j: u32) -> f64 {
        self.integrate(|x| x.powi(j as i32), |x| self.density1(x))
    }

    /// `k`-th moment gap by quadrature.
    pub fn delta_k(&self) -> f64 {
        self.moment1(self.k) - self.moment0(self.k)
    }

    /// Closed form of the gap: `eta a^k (k!)^2 / (2k+1)!`.
    pub fn delta_k_exact(&self) -> f64 {
        let mut ratio = 1.0;
        // (k!)^2 / (2k+1)! = prod_{i=1..k} i / (k+i) / (2k+1)
        for i in 1..=self.k {
            ratio *= i as f64 / (self.k + i) as f64;
        }
        ratio /= (2 * self.k + 1) as f64;
        self.eta * self.a.powi(self.k as i32) * ratio
    }

    /// The simplified gap `eta k! (alpha/(kN))^k` reported alongside the exact one.
    pub fn delta_k_simplified(&self) -> f64 {
        let fact: f64 = (1..=self.k).map(|i| i as f64).product();
        self.eta * fact * (self.alpha / (self.k as f64 * self.n as f64)).powi(self.k as i32)
    }

    pub fn sample0<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random::<f64>() * self.a
    }

    /// Inverse-CDF draw from `mu1` by bisection.
    pub fn sample1<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target: f64 = rng.random();
        let (mut lo, mut hi) = (0.0, self.a);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.cdf1(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Largest `|F_emp - F|` of draws from `mu1`.
    pub fn ks_statistic1(&self, draws: &mut [f64]) -> f64 {
        draws.sort_by(|a, b| a.total_cmp(b));
        let n = draws.len() as f64;
        draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = self.cdf1(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Two table-realized ensemble pairs, one per hypothesis.
#[derive(Debug, Clone)]
pub struct LowerBoundInstance {
    pub pair: MomentMatchedPair,
    pub table0: FidelityTable,
    pub table1: FidelityTable,
    pub h0: (Ensemble, Ensemble),
    pub h1: (Ensemble, Ensemble),
}

/// Draws `N x N` fidelity tables i.i.d. from `mu0` and `mu1` and realizes each.
pub fn lower_bound_instance<R: Rng + ?Sized>(k: u32, eta: f64, alpha: f64, n: usize, rng: &mut R) -> Result<LowerBoundInstance> {
    let pair = moment_matched_pair(k, eta, alpha, n)?;
    let t0 = Array2::from_shape_simple_fn((n, n), || pair.sample0(rng));
    let t1 = Array2::from_shape_simple_fn((n, n), || pair.sample1(rng));
    let table0 = FidelityTable::with_ids(t0, "mu0", "mu0")?;
    let table1 = FidelityTable::with_ids(t1, "mu1", "mu1")?;
    let h0 = from_fidelity_table(&table0)?;
    let h1 = from_fidelity_table(&table1)?;
    Ok(LowerBoundInstance { pair, table0, table1, h0, h1 })
}
