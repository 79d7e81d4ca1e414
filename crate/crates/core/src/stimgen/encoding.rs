use serde::{Deserialize, Serialize};
use std::fmt;

use crate::geometry::N_LEVELS;

/// Visual channel that carries the third variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Size,
    Lightness,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Size, Channel::Lightness];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Size => "size",
            Channel::Lightness => "lightness",
        }
    }

    /// Value shared by every range class: 25px diameter or 60 L*.
    pub fn midpoint(self) -> f64 {
        match self {
            Channel::Size => 25.0,
            Channel::Lightness => 60.0,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "size" => Ok(Channel::Size),
            "lightness" => Ok(Channel::Lightness),
            other => Err(format!("unknown channel {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeClass {
    Narrow,
    Medium,
    Wide,
}

impl RangeClass {
    pub const ALL: [RangeClass; 3] = [RangeClass::Narrow, RangeClass::Medium, RangeClass::Wide];

    pub fn as_str(self) -> &'static str {
        match self {
            RangeClass::Narrow => "narrow",
            RangeClass::Medium => "medium",
            RangeClass::Wide => "wide",
        }
    }
}

impl fmt::Display for RangeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Seven evenly spaced encoding values, ascending (px diameter or L*).
///
/// Level index τ always runs from least to most salient: τ = 6 is the
/// largest mark for size and the darkest mark for lightness, so for the
/// lightness channel τ maps onto the ascending L* values in reverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodingRange {
    pub channel: Channel,
    pub range_class: RangeClass,
    pub levels: [f64; N_LEVELS],
}

impl EncodingRange {
    pub fn bounds(channel: Channel, range_class: RangeClass) -> (f64, f64) {
        match (channel, range_class) {
            (Channel::Lightness, RangeClass::Narrow) => (45.0, 75.0),
            (Channel::Lightness, RangeClass::Medium) => (37.5, 82.5),
            (Channel::Lightness, RangeClass::Wide) => (30.0, 90.0),
            (Channel::Size, RangeClass::Narrow) => (17.5, 32.5),
            (Channel::Size, RangeClass::Medium) => (13.75, 36.25),
            (Channel::Size, RangeClass::Wide) => (10.0, 40.0),
        }
    }

    /// Encoding value drawn for a mark of level `tau`.
    pub fn value_for_level(&self, tau: u8) -> f64 {
        let tau = (tau as usize).min(N_LEVELS - 1);
        match self.channel {
            Channel::Size => self.levels[tau],
            Channel::Lightness => self.levels[N_LEVELS - 1 - tau],
        }
    }

    pub fn midpoint(&self) -> f64 {
        self.levels[N_LEVELS / 2]
    }
}

pub fn encoding_levels(channel: Channel, range_class: RangeClass) -> EncodingRange {
    let (lo, hi) = EncodingRange::bounds(channel, range_class);
    let step = (hi - lo) / (N_LEVELS - 1) as f64;
    let mut levels = [0.0; N_LEVELS];
    for (i, v) in levels.iter_mut().enumerate() {
        *v = lo + step * i as f64;
    }
    EncodingRange {
        channel,
        range_class,
        levels,
    }
}
