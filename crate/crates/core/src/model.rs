//! Delay arithmetic and the value types shared by every service.
//!
//! All delays are milliseconds. End-to-end delay is the network delay plus the
//! blocking (audio processing) delay of the sound card at each end; blocking
//! delay is the duration of one hardware frame plus a per-card constant.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Simulation timestamp in milliseconds of virtual time.
pub type TimeMs = u64;

/// Default Ensemble Performance Threshold.
pub const DEFAULT_EPT_MS: f64 = 25.0;

/// A sound-card configuration: sampling rate and frame size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AudioMode {
    pub sampling_rate_hz: u32,
    pub frame_size_samples: u32,
}

impl AudioMode {
    pub fn new(sampling_rate_hz: u32, frame_size_samples: u32) -> Result<Self> {
        let mode = Self {
            sampling_rate_hz,
            frame_size_samples,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sampling_rate_hz == 0 {
            return Err(Error::InvalidMode(format!(
                "{self}: sampling rate must be positive"
            )));
        }
        if self.frame_size_samples == 0 {
            return Err(Error::InvalidMode(format!("{self}: frame size must be positive")));
        }
        Ok(())
    }

    /// Duration of one frame in milliseconds.
    pub fn frame_duration_ms<S: Scalar>(&self) -> S {
        S::lit(1000.0) * S::from_count(u64::from(self.frame_size_samples))
            / S::from_count(u64::from(self.sampling_rate_hz))
    }
}

impl fmt::Display for AudioMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.sampling_rate_hz, self.frame_size_samples)
    }
}

/// Hardware constant `d0` of a sound card plus its mode ladder, ordered from
/// highest preference to lowest-latency fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundCardProfile<S> {
    pub d0_ms: S,
    pub supported_modes: Vec<AudioMode>,
}

impl<S: Scalar> SoundCardProfile<S> {
    pub fn new(d0_ms: S, supported_modes: Vec<AudioMode>) -> Result<Self> {
        let card = Self {
            d0_ms,
            supported_modes,
        };
        card.validate()?;
        Ok(card)
    }

    /// Structural checks: non-empty ladder, valid modes, no duplicates, `d0 >= 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.d0_ms >= S::zero()) {
            return Err(Error::Configuration(format!(
                "d0_ms must be non-negative, got {}",
                self.d0_ms
            )));
        }
        if self.supported_modes.is_empty() {
            return Err(Error::Configuration("mode ladder is empty".into()));
        }
        for (i, mode) in self.supported_modes.iter().enumerate() {
            mode.validate()?;
            if self.supported_modes[..i].contains(mode) {
                return Err(Error::Configuration(format!("duplicate mode {mode} in ladder")));
            }
        }
        Ok(())
    }

    /// Index of the first ladder step whose blocking delay does not strictly
    /// decrease relative to its predecessor, if any.
    pub fn ladder_ordering_violation(&self) -> Option<usize> {
        self.supported_modes
            .windows(2)
            .position(|w| w[1].frame_duration_ms::<S>() >= w[0].frame_duration_ms::<S>())
            .map(|i| i + 1)
    }

    pub fn mode_position(&self, mode: &AudioMode) -> Option<usize> {
        self.supported_modes.iter().position(|m| m == mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBudget<S> {
    pub ept_ms: S,
}

impl<S: Scalar> DelayBudget<S> {
    pub fn new(ept_ms: S) -> Result<Self> {
        if !(ept_ms > S::zero()) {
            return Err(Error::Configuration(format!(
                "ept_ms must be positive, got {ept_ms}"
            )));
        }
        Ok(Self { ept_ms })
    }
}

impl<S: Scalar> Default for DelayBudget<S> {
    fn default() -> Self {
        Self {
            ept_ms: S::lit(DEFAULT_EPT_MS),
        }
    }
}

/// One measured one-way network delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySample<S> {
    pub at_ms: TimeMs,
    pub one_way_delay_ms: S,
}

/// `1000 * frame / rate + d0`, in milliseconds.
pub fn blocking_delay<S: Scalar>(mode: &AudioMode, card: &SoundCardProfile<S>) -> Result<S> {
    mode.validate()?;
    if !(card.d0_ms >= S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "d0_ms must be non-negative, got {}",
            card.d0_ms
        )));
    }
    Ok(mode.frame_duration_ms::<S>() + card.d0_ms)
}

/// Symmetric-equipment end-to-end delay: `2 * sound_card + network`.
pub fn end_to_end_delay<S: Scalar>(sound_card_delay_ms: S, network_delay_ms: S) -> Result<S> {
    check_non_negative("sound_card_delay_ms", sound_card_delay_ms)?;
    check_non_negative("network_delay_ms", network_delay_ms)?;
    Ok(S::lit(2.0) * sound_card_delay_ms + network_delay_ms)
}

/// End-to-end delay when transmitter and receiver cards differ.
pub fn end_to_end_delay_asymmetric<S: Scalar>(
    tx_sound_card_delay_ms: S,
    rx_sound_card_delay_ms: S,
    network_delay_ms: S,
) -> Result<S> {
    check_non_negative("tx_sound_card_delay_ms", tx_sound_card_delay_ms)?;
    check_non_negative("rx_sound_card_delay_ms", rx_sound_card_delay_ms)?;
    check_non_negative("network_delay_ms", network_delay_ms)?;
    Ok(tx_sound_card_delay_ms + rx_sound_card_delay_ms + network_delay_ms)
}

/// Inclusive: a delay exactly at the threshold is acceptable.
pub fn meets_ept<S: Scalar>(e2e_ms: S, budget: &DelayBudget<S>) -> bool {
    e2e_ms <= budget.ept_ms
}

fn check_non_negative<S: Scalar>(name: &str, value: S) -> Result<()> {
    if value >= S::zero() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be non-negative, got {value}"
        )))
    }
}
