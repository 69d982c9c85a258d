use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Plain regression loss with random condition drop.
    Baseline,
    /// Conditional loss weighted by the stop-gradient IMBA distance, mixed
    /// with an unconditional loss.
    Imba,
    /// Baseline with a per-sample inverse-frequency weight.
    FreqWeighted,
}

/// How the per-element IMBA distance is reduced before weighting.
///
/// Distances are laid out `(batch, tokens, channels)`; a 2-D toy sample is
/// one token with two channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    PerElement,
    /// Mean over channels: one weight per token.
    ChannelMean,
    /// Mean over tokens and channels: one weight per sample.
    SampleScalar,
}

macro_rules! string_enum {
    ($ty:ty { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::config(format!(
                        concat!("unknown ", stringify!($ty), " '{}'"),
                        other
                    ))),
                }
            }
        }
    };
}

string_enum!(LossKind {
    "baseline" => LossKind::Baseline,
    "imba" => LossKind::Imba,
    "freq_weighted" => LossKind::FreqWeighted,
});

string_enum!(WeightMode {
    "per_element" => WeightMode::PerElement,
    "channel_mean" => WeightMode::ChannelMean,
    "sample_scalar" => WeightMode::SampleScalar,
});

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Exponent applied to the floored residual magnitude.
    pub gamma: f64,
    /// Weight of the conditional term in `lambda * L* + (1 - lambda) * L_u`.
    pub lambda: f64,
    /// Probability of replacing the condition with null (baseline and freq_weighted).
    pub cond_drop_prob: f64,
    pub weight_mode: WeightMode,
    /// Residual magnitudes are clamped to at least this before the power; 0 disables.
    pub residual_floor: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kind: LossKind::Imba,
            gamma: 0.8,
            lambda: 0.9,
            cond_drop_prob: 0.1,
            weight_mode: WeightMode::ChannelMean,
            residual_floor: 1e-8,
        }
    }
}

impl LossConfig {
    pub fn baseline() -> Self {
        Self {
            kind: LossKind::Baseline,
            ..Self::default()
        }
    }

    pub fn imba() -> Self {
        Self::default()
    }

    pub fn freq_weighted() -> Self {
        Self {
            kind: LossKind::FreqWeighted,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.cond_drop_prob) {
            return Err(Error::config(format!(
                "cond_drop_prob must lie in [0, 1], got {}",
                self.cond_drop_prob
            )));
        }
        if !(self.residual_floor >= 0.0 && self.residual_floor.is_finite()) {
            return Err(Error::config(format!(
                "residual_floor must be >= 0, got {}",
                self.residual_floor
            )));
        }
        Ok(())
    }
}
