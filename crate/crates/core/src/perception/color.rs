use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel gate for the red shuttle marker, OpenCV HSV ranges (h 0-179, s/v 0-255).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HsvThresholds {
    /// Hue must be below this ...
    pub hue_below: i32,
    /// ... or above this (red wraps around 0).
    pub hue_above: i32,
    pub saturation_above: i32,
    pub value_above: i32,
}

impl Default for HsvThresholds {
    fn default() -> Self {
        Self {
            hue_below: 5,
            hue_above: 176,
            saturation_above: 60,
            value_above: 160,
        }
    }
}

impl HsvThresholds {
    pub fn accepts(&self, h: i32, s: i32, v: i32) -> Result<bool> {
        if !(0..=179).contains(&h) || !(0..=255).contains(&s) || !(0..=255).contains(&v) {
            return Err(Error::domain(format!("hsv ({h}, {s}, {v}) out of range")));
        }
        Ok((h < self.hue_below || h > self.hue_above)
            && s > self.saturation_above
            && v > self.value_above)
    }
}

pub fn hsv_gate(h: i32, s: i32, v: i32) -> Result<bool> {
    HsvThresholds::default().accepts(h, s, v)
}
