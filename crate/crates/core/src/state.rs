//! Pure states, fidelities and the random-state samplers built on them.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tolerance::DEFAULT as TOL;

/// Unit vector in `C^d`, `d >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Wraps amplitudes that are already unit-norm.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidDimension(amplitudes.len()));
        }
        let norm = norm(&amplitudes);
        if !norm.is_finite() || (norm - 1.0).abs() > TOL.norm {
            return Err(Error::NotNormalized(norm));
        }
        Ok(PureState { amplitudes })
    }

    /// Scales `amplitudes` to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidDimension(amplitudes.len()));
        }
        let n = norm(&amplitudes);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NotNormalized(n));
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(PureState { amplitudes })
    }

    /// Computational basis state `|index>` in dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(PureState { amplitudes })
    }

    /// Builds a real-amplitude state; handy for qubit examples.
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::normalized(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(inner_unchecked(&self.amplitudes, &other.amplitudes))
    }

    /// Same state with a global phase `e^{i phi}` applied.
    pub fn with_phase(&self, phi: f64) -> PureState {
        let w = Complex64::from_polar(1.0, phi);
        PureState {
            amplitudes: self.amplitudes.iter().map(|a| a * w).collect(),
        }
    }

    /// Interleaved `(re, im)` layout used by the JSON formats.
    pub fn to_interleaved(&self) -> Vec<f64> {
        self.amplitudes.iter().flat_map(|a| [a.re, a.im]).collect()
    }

    pub fn from_interleaved(values: &[f64]) -> Result<Self> {
        if values.len() % 2 != 0 {
            return Err(Error::Format(format!(
                "interleaved amplitude array has odd length {}",
                values.len()
            )));
        }
        let amps = values
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        Self::new(amps)
    }
}

impl Serialize for PureState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_interleaved().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(deserializer)?;
        PureState::from_interleaved(&values).map_err(serde::de::Error::custom)
    }
}

fn norm(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn inner_unchecked(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|<a|b>|^2`, clamped into `[0, 1]`.
pub fn fidelity(a: &PureState, b: &PureState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

pub(crate) fn fidelity_unchecked(a: &PureState, b: &PureState) -> f64 {
    inner_unchecked(&a.amplitudes, &b.amplitudes).norm_sqr().min(1.0)
}

fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex64> {
    (0..d)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Haar-random state: a normalized vector of i.i.d. standard complex Gaussians.
pub fn haar_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<PureState> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    loop {
        let v = gaussian_vector(d, rng);
        if norm(&v) > 1e-300 {
            return PureState::normalized(v);
        }
    }
}

/// Haar-random unit vector in the orthogonal complement of `center`.
fn haar_orthogonal<R: Rng + ?Sized>(center: &PureState, rng: &mut R) -> Vec<Complex64> {
    loop {
        let mut v = gaussian_vector(center.dim(), rng);
        let overlap = inner_unchecked(&center.amplitudes, &v);
        for (x, c) in v.iter_mut().zip(&center.amplitudes) {
            *x -= overlap * c;
        }
        // project twice; one pass leaves ~1e-16 residue along `center`
        let overlap = inner_unchecked(&center.amplitudes, &v);
        for (x, c) in v.iter_mut().zip(&center.amplitudes) {
            *x -= overlap * c;
        }
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

fn superpose(center: &[Complex64], other: &[Complex64], eps: f64) -> Vec<Complex64> {
    let (a, b) = ((1.0 - eps).sqrt(), eps.sqrt());
    center.iter().zip(other).map(|(c, o)| c * a + o * b).collect()
}

/// Random member of the infidelity ball of radius `eps_b` around `center`,
/// placed on the ball's boundary: `sqrt(1-eps_b) center + sqrt(eps_b) chi`
/// with `chi` Haar-random and orthogonal to `center`.
pub fn eps_ball_state<R: Rng + ?Sized>(
    center: &PureState,
    eps_b: f64,
    rng: &mut R,
) -> Result<PureState> {
    if !(0.0..1.0).contains(&eps_b) {
        return Err(Error::InvalidParameter(format!(
            "ball radius must lie in [0, 1), got {eps_b}"
        )));
    }
    if eps_b == 0.0 {
        return Ok(center.clone());
    }
    let chi = haar_orthogonal(center, rng);
    // orthogonal pieces: the norm is exactly one up to rounding
    PureState::normalized(superpose(&center.amplitudes, &chi, eps_b))
}

/// How [`depolarize_sample`] draws its perturbing direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepolarizeMode {
    /// Perturbation drawn Haar-random in the complement of the input. The
    /// superposition is unit-norm and its average outer product equals the
    /// depolarizing channel output exactly.
    #[default]
    Orthogonal,
    /// Perturbation drawn Haar-random on the full space, superposition
    /// renormalized afterwards.
    FullSpaceRenormalized,
}

/// One pure-state unravelling of the depolarizing channel with strength `lambda_b`.
///
/// The mixing weight is `eps_b = (1 - 1/d) lambda_b`.
pub fn depolarize_sample<R: Rng + ?Sized>(
    input: &PureState,
    lambda_b: f64,
    mode: DepolarizeMode,
    rng: &mut R,
) -> Result<PureState> {
    if !(0.0..1.0).contains(&lambda_b) {
        return Err(Error::InvalidParameter(format!(
            "depolarizing strength must lie in [0, 1), got {lambda_b}"
        )));
    }
    if lambda_b == 0.0 {
        return Ok(input.clone());
    }
    let d = input.dim() as f64;
    let eps = (1.0 - 1.0 / d) * lambda_b;
    match mode {
        DepolarizeMode::Orthogonal => {
            let chi = haar_orthogonal(input, rng);
            PureState::normalized(superpose(&input.amplitudes, &chi, eps))
        }
        DepolarizeMode::FullSpaceRenormalized => {
            let psi = haar_state(input.dim(), rng)?;
            PureState::normalized(superpose(&input.amplitudes, &psi.amplitudes, eps))
        }
    }
}

/// The unnormalized superposition `sqrt(1-eps_b) phi + sqrt(eps_b) psi` with
/// `psi` Haar on the full space. Its average outer product is
/// `(1 - eps_b) |phi><phi| + eps_b I/d`.
pub fn depolarize_raw<R: Rng + ?Sized>(
    input: &PureState,
    lambda_b: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(0.0..1.0).contains(&lambda_b) {
        return Err(Error::InvalidParameter(format!(
            "depolarizing strength must lie in [0, 1), got {lambda_b}"
        )));
    }
    let d = input.dim() as f64;
    let eps = (1.0 - 1.0 / d) * lambda_b;
    let psi = haar_state(input.dim(), rng)?;
    Ok(superpose(&input.amplitudes, &psi.amplitudes, eps))
}
