//! Trace cleaning, stable-region windowing and feature/label standardisation.

mod lulu;
mod scaler;

pub use lulu::{lulu_lower, lulu_smooth, lulu_upper};
pub use scaler::{ScalerStats, STD_FLOOR};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simgen::{WaveformSample, CHANNELS};

/// Boot / stable / ring-down boundaries and the analysed window length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionSpec {
    pub boot_end: usize,
    pub stable_end: usize,
    /// Samples kept from the end of the stable region.
    pub window_len: usize,
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self {
            boot_end: 860,
            stable_end: 3260,
            window_len: 1000,
        }
    }
}

impl RegionSpec {
    pub fn validate(&self, trace_len: usize) -> Result<()> {
        if self.boot_end == 0 || self.boot_end >= self.stable_end {
            return Err(Error::InvalidParameter(alloc::format!(
                "region bounds boot_end={} stable_end={} out of order",
                self.boot_end,
                self.stable_end
            )));
        }
        if self.stable_end > trace_len {
            return Err(Error::TraceTooShort {
                len: trace_len,
                required: self.stable_end,
            });
        }
        if self.window_len == 0 || self.window_len > self.stable_end - self.boot_end {
            return Err(Error::InvalidParameter(alloc::format!(
                "window_len {} must lie in 1..={}",
                self.window_len,
                self.stable_end - self.boot_end
            )));
        }
        Ok(())
    }

    /// Half-open index range of the window within each channel.
    pub fn window(&self) -> core::ops::Range<usize> {
        self.stable_end - self.window_len..self.stable_end
    }

    pub fn feature_width(&self) -> usize {
        CHANNELS * self.window_len
    }
}

/// Smooths the six current channels with `U_n ∘ L_n`; channel 0 (the output
/// voltage) carries no excursion artifacts and is left untouched.
pub fn clean_sample(s: &WaveformSample, n: usize) -> Result<WaveformSample> {
    if s.channels.len() != CHANNELS {
        return Err(Error::ChannelCount {
            expected: CHANNELS,
            got: s.channels.len(),
        });
    }
    let mut out = s.clone();
    for ch in out.channels.iter_mut().skip(1) {
        *ch = lulu_smooth(ch, n)?;
    }
    Ok(out)
}

/// Concatenation of every channel's `[stable_end - window_len, stable_end)`.
pub fn extract_window(s: &WaveformSample, r: &RegionSpec) -> Result<Vec<f64>> {
    if s.channels.len() != CHANNELS {
        return Err(Error::ChannelCount {
            expected: CHANNELS,
            got: s.channels.len(),
        });
    }
    r.validate(s.trace_len())?;
    let range = r.window();
    let mut out = Vec::with_capacity(r.feature_width());
    for ch in &s.channels {
        out.extend_from_slice(&ch[range.clone()]);
    }
    Ok(out)
}
