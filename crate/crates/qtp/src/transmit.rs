//! One sentence through the channel: encode, transmit, decode.

use rand::Rng;

use crate::bits::BitString;
use crate::codec::{ascii_decode, ascii_encode, pack_symbols, unpack_symbols, TransmitMode};
use crate::error::{ConfigError, QtpError};
use crate::quantum::{classical_transmit, Channel, ChannelConfig, ChannelKind, OutcomeTable};
use crate::text::{Stage, TextStage};

/// A resolved transport: either direct classical bits with a flip
/// probability, or superdense coding over a prepared outcome table.
#[derive(Debug, Clone)]
pub enum Link {
    Classical { flip_prob: f64 },
    Quantum { table: OutcomeTable },
}

impl Link {
    /// Resolve a (channel config, mode) pair into a transport.
    ///
    /// The classical baseline applies bit flips at the channel's noise
    /// strength. Qudit mode pairs with the d = 4 bit-flip analog: a
    /// `bit_flip` config is promoted to `qudit_bit_flip`, other kinds
    /// have no qudit form and are rejected.
    pub fn resolve(config: &ChannelConfig, mode: TransmitMode) -> Result<Link, QtpError> {
        match mode {
            TransmitMode::Classical => {
                if !(0.0..=1.0).contains(&config.lambda) {
                    return Err(ConfigError::InvalidField {
                        field: "channel.lambda".into(),
                        reason: format!("{} outside [0, 1]", config.lambda),
                    }
                    .into());
                }
                Ok(Link::Classical {
                    flip_prob: config.lambda,
                })
            }
            TransmitMode::Qubit => {
                let ch = build_for_dim(config, 2)?;
                Ok(Link::Quantum {
                    table: OutcomeTable::new(&ch).map_err(QtpError::from)?,
                })
            }
            TransmitMode::Qudit4 => {
                let ch = build_for_dim(config, 4)?;
                Ok(Link::Quantum {
                    table: OutcomeTable::new(&ch).map_err(QtpError::from)?,
                })
            }
        }
    }

    pub fn dimension(&self) -> Option<usize> {
        match self {
            Link::Classical { .. } => None,
            Link::Quantum { table } => Some(table.dim()),
        }
    }
}

fn build_for_dim(config: &ChannelConfig, d: usize) -> Result<Channel, QtpError> {
    let kind = ChannelKind::parse(&config.kind).ok_or_else(|| ConfigError::InvalidField {
        field: "channel.kind".into(),
        reason: format!("unknown kind {:?}", config.kind),
    })?;
    let mut effective = config.clone();
    if d == 4 {
        match kind {
            ChannelKind::BitFlip | ChannelKind::QuditBitFlip => {
                effective.kind = ChannelKind::QuditBitFlip.as_str().into();
                effective.d = 4;
            }
            ChannelKind::Custom => {
                if config.d != 4 {
                    return Err(ConfigError::InvalidField {
                        field: "channel.d".into(),
                        reason: format!("custom channel has d={}, qudit4 mode needs 4", config.d),
                    }
                    .into());
                }
            }
            other => {
                return Err(ConfigError::InvalidField {
                    field: "channel.kind".into(),
                    reason: format!("{other} has no d=4 form"),
                }
                .into());
            }
        }
    } else {
        match kind {
            ChannelKind::QuditBitFlip => {
                return Err(ConfigError::InvalidField {
                    field: "channel.kind".into(),
                    reason: "qudit_bit_flip requires qudit4 mode".into(),
                }
                .into());
            }
            ChannelKind::Custom => {
                if config.d != 2 {
                    return Err(ConfigError::InvalidField {
                        field: "channel.d".into(),
                        reason: format!("custom channel has d={}, qubit mode needs 2", config.d),
                    }
                    .into());
                }
            }
            _ => {
                effective.d = 2;
            }
        }
    }
    // a Kraus set that fails to build came from the run configuration
    effective.build().map_err(|e| {
        ConfigError::InvalidField {
            field: "channel".into(),
            reason: e.to_string(),
        }
        .into()
    })
}

/// The bit-level result of transmitting one text.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub sent_bits: BitString,
    pub received_bits: BitString,
    pub received: TextStage,
}

/// Send one text through the link and decode the received bits using the
/// sender's layout, so word boundaries survive corrupted separators.
pub fn transmit_text<R: Rng>(
    ideal: &TextStage,
    link: &Link,
    rng: &mut R,
) -> Result<Transmission, QtpError> {
    let surface = ideal.render();
    let sent_bits = ascii_encode(&surface).map_err(QtpError::from)?;
    let received_bits = match link {
        Link::Classical { flip_prob } => {
            classical_transmit(&sent_bits, *flip_prob, rng).map_err(QtpError::from)?
        }
        Link::Quantum { table } => {
            let msgs = pack_symbols(&sent_bits, table.dim()).map_err(QtpError::from)?;
            let outcomes = table.transmit(&msgs, rng);
            unpack_symbols(&outcomes, table.dim()).map_err(QtpError::from)?
        }
    };
    let decoded = ascii_decode(&received_bits).map_err(QtpError::from)?;
    let received = ideal
        .overlay(Stage::Received, &decoded)
        .expect("bit length is preserved by every link");
    Ok(Transmission {
        sent_bits,
        received_bits,
        received,
    })
}
