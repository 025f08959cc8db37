//! Superdense coding over noisy channels.
//!
//! One use of the protocol encodes a symbol pair (z, x) into a generalized
//! Bell state, passes the sender's qudit through a Kraus channel, and
//! measures in the Bell basis. Everything here is exact: the per-use
//! outcome distribution is computed from the channel's Kraus operators,
//! and Monte-Carlo sampling only enters when a distribution is realized
//! with a seeded stream.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use super::channel::Channel;
use super::linalg::{identity, kron, CMatrix, StateVector};
use crate::bits::BitString;
use crate::error::QuantumError;

/// The classical message carried by one protocol use: two symbols in
/// {0, …, d−1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymbolPair {
    pub z: usize,
    pub x: usize,
}

impl SymbolPair {
    pub fn new(z: usize, x: usize) -> Self {
        Self { z, x }
    }

    pub fn validate(&self, d: usize) -> Result<(), QuantumError> {
        if self.z >= d || self.x >= d {
            return Err(QuantumError::SymbolOutOfRange {
                z: self.z,
                x: self.x,
                d,
            });
        }
        Ok(())
    }

    /// All d² messages in row-major (z, x) order.
    pub fn all(d: usize) -> impl Iterator<Item = SymbolPair> {
        (0..d).flat_map(move |z| (0..d).map(move |x| SymbolPair::new(z, x)))
    }
}

/// e^{2πi·num/den}, exact at quarter turns so that the d ∈ {2, 4} phase
/// algebra introduces no rounding (measurement supports stay exact).
fn unit_phase(num: usize, den: usize) -> Complex64 {
    match (4 * num) % (4 * den) {
        0 => Complex64::new(1.0, 0.0),
        q if q == den => Complex64::new(0.0, 1.0),
        q if q == 2 * den => Complex64::new(-1.0, 0.0),
        q if q == 3 * den => Complex64::new(0.0, -1.0),
        _ => Complex64::from_polar(1.0, TAU * num as f64 / den as f64),
    }
}

/// Clock operator Z(z): diag(e^{2πi·k·z/d}).
pub fn clock_operator(d: usize, z: usize) -> CMatrix {
    let mut m = Array2::zeros((d, d));
    for k in 0..d {
        m[[k, k]] = unit_phase((k * z) % d, d);
    }
    m
}

/// Shift operator X(x): |(k+x) mod d⟩⟨k|.
pub fn shift_operator(d: usize, x: usize) -> CMatrix {
    let mut m = Array2::zeros((d, d));
    for k in 0..d {
        m[[(k + x) % d, k]] = Complex64::new(1.0, 0.0);
    }
    m
}

/// The Heisenberg-Weyl operator Z(z)·X(x). Unitary for all valid indices.
pub fn heisenberg_weyl(d: usize, z: usize, x: usize) -> Result<CMatrix, QuantumError> {
    SymbolPair::new(z, x).validate(d)?;
    Ok(clock_operator(d, z).dot(&shift_operator(d, x)))
}

/// The generalized Bell state (Z(z)X(x) ⊗ I) |Φ₀₀⟩ on the d²-dimensional
/// joint space, where |Φ₀₀⟩ = (1/√d) Σ |kk⟩.
pub fn bell_state(d: usize, z: usize, x: usize) -> Result<StateVector, QuantumError> {
    let w = heisenberg_weyl(d, z, x)?;
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut joint = Array1::zeros(d * d);
    // (W ⊗ I) Σ_k |kk⟩/√d has amplitude W[j, k]/√d on |jk⟩.
    for k in 0..d {
        for j in 0..d {
            joint[j * d + k] += w[[j, k]] * amp;
        }
    }
    StateVector::new(joint)
}

/// Probabilities over measurement outcomes (z′, x′) for one protocol use.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    d: usize,
    probs: Array2<f64>,
}

impl OutcomeDistribution {
    /// Tiny negative entries produced by projector arithmetic are clamped
    /// to zero; anything more negative is a real error.
    const CLAMP_TOL: f64 = 1e-12;
    const SUM_TOL: f64 = 1e-9;

    pub fn new(d: usize, mut probs: Array2<f64>) -> Result<Self, QuantumError> {
        if probs.dim() != (d, d) {
            return Err(QuantumError::DimensionMismatch {
                expected: d,
                got: probs.dim().0,
            });
        }
        for p in probs.iter_mut() {
            if !p.is_finite() {
                return Err(QuantumError::InvalidDistribution {
                    reason: "non-finite probability".into(),
                });
            }
            if *p < -Self::CLAMP_TOL {
                return Err(QuantumError::InvalidDistribution {
                    reason: format!("negative probability {p}"),
                });
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(QuantumError::InvalidDistribution {
                reason: format!("probabilities sum to {total}"),
            });
        }
        probs.mapv_inplace(|p| p / total);
        Ok(Self { d, probs })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn prob(&self, z: usize, x: usize) -> f64 {
        self.probs[[z, x]]
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    /// Outcomes with non-zero probability.
    pub fn support(&self) -> Vec<(SymbolPair, f64)> {
        let mut out = Vec::new();
        for z in 0..self.d {
            for x in 0..self.d {
                let p = self.probs[[z, x]];
                if p > 0.0 {
                    out.push((SymbolPair::new(z, x), p));
                }
            }
        }
        out
    }
}

/// Exact per-use outcome distribution: the Bell-basis measurement applied
/// to (E ⊗ I) of the encoded state, computed as
/// p(z′,x′) = Σᵢ |⟨Φ_{z′x′}| (Kᵢ ⊗ I) |Φ_{zx}⟩|².
pub fn sdc_outcome_distribution(
    ch: &Channel,
    msg: SymbolPair,
) -> Result<OutcomeDistribution, QuantumError> {
    let d = ch.dim();
    msg.validate(d)?;
    let encoded = bell_state(d, msg.z, msg.x)?;
    let eye = identity(d);

    // Bell basis, reused across Kraus terms.
    let basis: Vec<StateVector> = SymbolPair::all(d)
        .map(|p| bell_state(d, p.z, p.x).expect("indices in range"))
        .collect();

    let mut probs: Array2<f64> = Array2::zeros((d, d));
    for k in ch.kraus() {
        let lifted = kron(k, &eye);
        let evolved = encoded.apply(&lifted);
        for (idx, phi) in basis.iter().enumerate() {
            let amp: Complex64 = phi
                .amplitudes()
                .iter()
                .zip(evolved.iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            probs[[idx / d, idx % d]] += amp.norm_sqr();
        }
    }
    OutcomeDistribution::new(d, probs)
}

/// Draw one measurement outcome from a distribution.
pub fn sample_outcome<R: Rng>(dist: &OutcomeDistribution, rng: &mut R) -> SymbolPair {
    let draw: f64 = rng.random();
    let d = dist.dim();
    let mut acc = 0.0;
    for z in 0..d {
        for x in 0..d {
            acc += dist.prob(z, x);
            if draw < acc {
                return SymbolPair::new(z, x);
            }
        }
    }
    // Rounding pushed the cumulative sum just below 1: last outcome.
    SymbolPair::new(d - 1, d - 1)
}

/// Per-message outcome distributions for a channel, computed once.
///
/// Amplitude damping makes the distribution genuinely message dependent,
/// so each of the d² messages keeps its own table.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    d: usize,
    dists: Vec<OutcomeDistribution>,
}

impl OutcomeTable {
    pub fn new(ch: &Channel) -> Result<Self, QuantumError> {
        let d = ch.dim();
        let dists = SymbolPair::all(d)
            .map(|msg| sdc_outcome_distribution(ch, msg))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { d, dists })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn distribution(&self, msg: SymbolPair) -> &OutcomeDistribution {
        &self.dists[msg.z * self.d + msg.x]
    }

    /// Send a symbol sequence through the channel, sampling one outcome
    /// per use.
    pub fn transmit<R: Rng>(&self, msgs: &[SymbolPair], rng: &mut R) -> Vec<SymbolPair> {
        msgs.iter()
            .map(|&m| sample_outcome(self.distribution(m), rng))
            .collect()
    }
}

/// Classical baseline: flip each bit independently with `flip_prob`.
pub fn classical_transmit<R: Rng>(
    bits: &BitString,
    flip_prob: f64,
    rng: &mut R,
) -> Result<BitString, QuantumError> {
    if !(0.0..=1.0).contains(&flip_prob) {
        return Err(QuantumError::FlipProbOutOfRange { p: flip_prob });
    }
    Ok(bits
        .iter()
        .map(|b| {
            if rng.random::<f64>() < flip_prob {
                !b
            } else {
                b
            }
        })
        .collect())
}
