//! Kraus-operator noise channels.
//!
//! A channel is an ordered set of d×d Kraus operators satisfying the
//! completeness condition Σ Kᵢ†Kᵢ = I. Five built-in models are provided;
//! arbitrary custom Kraus sets are accepted if they pass the completeness
//! check at construction.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linalg::{all_finite, dagger, frobenius_norm, identity, CMatrix};
use super::sdc::shift_operator;
use crate::error::QuantumError;

/// Frobenius residual above which a custom Kraus set is rejected.
pub const CUSTOM_COMPLETENESS_TOL: f64 = 1e-8;

/// The supported noise models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    BitFlip,
    PhaseFlip,
    Depolarizing,
    AmplitudeDamping,
    QuditBitFlip,
    Custom,
}

impl ChannelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelKind::BitFlip => "bit_flip",
            ChannelKind::PhaseFlip => "phase_flip",
            ChannelKind::Depolarizing => "depolarizing",
            ChannelKind::AmplitudeDamping => "amplitude_damping",
            ChannelKind::QuditBitFlip => "qudit_bit_flip",
            ChannelKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<ChannelKind> {
        match s {
            "bit_flip" => Some(ChannelKind::BitFlip),
            "phase_flip" => Some(ChannelKind::PhaseFlip),
            "depolarizing" => Some(ChannelKind::Depolarizing),
            "amplitude_damping" => Some(ChannelKind::AmplitudeDamping),
            "qudit_bit_flip" => Some(ChannelKind::QuditBitFlip),
            "custom" => Some(ChannelKind::Custom),
            _ => None,
        }
    }

    /// The built-in kinds, in a fixed report order.
    pub fn builtin() -> [ChannelKind; 5] {
        [
            ChannelKind::BitFlip,
            ChannelKind::PhaseFlip,
            ChannelKind::Depolarizing,
            ChannelKind::AmplitudeDamping,
            ChannelKind::QuditBitFlip,
        ]
    }

    /// The local dimension this built-in kind is defined for.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            ChannelKind::QuditBitFlip => Some(4),
            ChannelKind::Custom => None,
            _ => Some(2),
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A noise channel over local dimension `d`, with strength `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    kind: ChannelKind,
    d: usize,
    lambda: f64,
    kraus: Vec<CMatrix>,
}

impl Channel {
    /// Build one of the five built-in channels. `qudit_bit_flip` requires
    /// d = 4; the other kinds require d = 2.
    pub fn builtin(kind: ChannelKind, lambda: f64, d: usize) -> Result<Self, QuantumError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(QuantumError::LambdaOutOfRange { lambda });
        }
        let expected = kind.dimension().ok_or(QuantumError::UnsupportedChannel {
            kind: kind.as_str().into(),
            d,
        })?;
        if d != expected {
            return Err(QuantumError::UnsupportedChannel {
                kind: kind.as_str().into(),
                d,
            });
        }
        let re = |x: f64| Complex64::new(x, 0.0);
        let kraus = match kind {
            ChannelKind::BitFlip => vec![
                identity(2).mapv(|z| z * re((1.0 - lambda).sqrt())),
                pauli_x().mapv(|z| z * re(lambda.sqrt())),
            ],
            ChannelKind::PhaseFlip => vec![
                identity(2).mapv(|z| z * re((1.0 - lambda).sqrt())),
                pauli_z().mapv(|z| z * re(lambda.sqrt())),
            ],
            ChannelKind::Depolarizing => vec![
                identity(2).mapv(|z| z * re((1.0 - 3.0 * lambda / 4.0).sqrt())),
                pauli_x().mapv(|z| z * re((lambda / 4.0).sqrt())),
                pauli_y().mapv(|z| z * re((lambda / 4.0).sqrt())),
                pauli_z().mapv(|z| z * re((lambda / 4.0).sqrt())),
            ],
            ChannelKind::AmplitudeDamping => {
                let mut k0 = Array2::zeros((2, 2));
                k0[[0, 0]] = re(1.0);
                k0[[1, 1]] = re((1.0 - lambda).sqrt());
                let mut k1 = Array2::zeros((2, 2));
                k1[[0, 1]] = re(lambda.sqrt());
                vec![k0, k1]
            }
            ChannelKind::QuditBitFlip => {
                let mut ops = vec![identity(4).mapv(|z| z * re((1.0 - lambda).sqrt()))];
                for shift in 1..4 {
                    ops.push(shift_operator(4, shift).mapv(|z| z * re((lambda / 3.0).sqrt())));
                }
                ops
            }
            ChannelKind::Custom => unreachable!("custom handled above"),
        };
        let ch = Self {
            kind,
            d,
            lambda,
            kraus,
        };
        debug_assert!(ch.completeness_residual() < 1e-10);
        Ok(ch)
    }

    /// Build a channel from an arbitrary Kraus set. Rejected unless every
    /// operator is d×d with finite entries and the set is trace preserving
    /// within `CUSTOM_COMPLETENESS_TOL`.
    pub fn custom(kraus: Vec<CMatrix>, d: usize) -> Result<Self, QuantumError> {
        if kraus.is_empty() {
            return Err(QuantumError::InvalidDistribution {
                reason: "empty Kraus set".into(),
            });
        }
        for k in &kraus {
            if k.dim() != (d, d) {
                return Err(QuantumError::DimensionMismatch {
                    expected: d,
                    got: k.dim().0,
                });
            }
            if !all_finite(k) {
                return Err(QuantumError::NonFiniteEntries);
            }
        }
        let ch = Self {
            kind: ChannelKind::Custom,
            d,
            lambda: f64::NAN,
            kraus,
        };
        let residual = ch.completeness_residual();
        if residual > CUSTOM_COMPLETENESS_TOL {
            return Err(QuantumError::NotTracePreserving { residual });
        }
        Ok(ch)
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Noise strength. NaN for custom channels, which have no single λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Frobenius norm of Σ Kᵢ†Kᵢ − I.
    pub fn completeness_residual(&self) -> f64 {
        kraus_completeness_residual(&self.kraus, self.d)
    }
}

/// Frobenius norm of Σ Kᵢ†Kᵢ − I for a raw operator set, usable on sets
/// that do not (yet) form a valid channel.
pub fn kraus_completeness_residual(kraus: &[CMatrix], d: usize) -> f64 {
    let mut sum: CMatrix = Array2::zeros((d, d));
    for k in kraus {
        sum = sum + dagger(k).dot(k);
    }
    frobenius_norm(&(sum - identity(d)))
}

pub(crate) fn pauli_x() -> CMatrix {
    let mut m = Array2::zeros((2, 2));
    m[[0, 1]] = Complex64::new(1.0, 0.0);
    m[[1, 0]] = Complex64::new(1.0, 0.0);
    m
}

pub(crate) fn pauli_y() -> CMatrix {
    let mut m = Array2::zeros((2, 2));
    m[[0, 1]] = Complex64::new(0.0, -1.0);
    m[[1, 0]] = Complex64::new(0.0, 1.0);
    m
}

pub(crate) fn pauli_z() -> CMatrix {
    let mut m = Array2::zeros((2, 2));
    m[[0, 0]] = Complex64::new(1.0, 0.0);
    m[[1, 1]] = Complex64::new(-1.0, 0.0);
    m
}

/// On-disk form of a channel: plain key-value document with the Kraus
/// matrices (custom channels only) given row-major as (re, im) pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub kind: String,
    pub lambda: f64,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<Vec<[f64; 2]>>>,
}

impl ChannelConfig {
    pub fn new(kind: ChannelKind, lambda: f64, d: usize) -> Self {
        Self {
            kind: kind.as_str().into(),
            lambda,
            d,
            kraus: None,
        }
    }

    pub fn build(&self) -> Result<Channel, QuantumError> {
        let kind = ChannelKind::parse(&self.kind).ok_or(QuantumError::UnsupportedChannel {
            kind: self.kind.clone(),
            d: self.d,
        })?;
        if kind == ChannelKind::Custom {
            let raw = self
                .kraus
                .as_ref()
                .ok_or_else(|| QuantumError::InvalidDistribution {
                    reason: "custom channel without kraus matrices".into(),
                })?;
            let mut ops = Vec::with_capacity(raw.len());
            for entries in raw {
                if entries.len() != self.d * self.d {
                    return Err(QuantumError::DimensionMismatch {
                        expected: self.d * self.d,
                        got: entries.len(),
                    });
                }
                let data: Vec<Complex64> = entries
                    .iter()
                    .map(|&[re, im]| Complex64::new(re, im))
                    .collect();
                let m = Array2::from_shape_vec((self.d, self.d), data).expect("length checked");
                ops.push(m);
            }
            Channel::custom(ops, self.d)
        } else {
            Channel::builtin(kind, self.lambda, self.d)
        }
    }

    pub fn from_channel(ch: &Channel) -> Self {
        let kraus = if ch.kind() == ChannelKind::Custom {
            Some(
                ch.kraus()
                    .iter()
                    .map(|k| k.iter().map(|z| [z.re, z.im]).collect())
                    .collect(),
            )
        } else {
            None
        };
        Self {
            kind: ch.kind().as_str().into(),
            lambda: ch.lambda(),
            d: ch.dim(),
            kraus,
        }
    }
}
