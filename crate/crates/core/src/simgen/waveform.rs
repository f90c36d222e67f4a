use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::LABELS;

pub const CHANNELS: usize = 7;

/// Channel names in storage order.
pub const CHANNEL_NAMES: [&str; CHANNELS] = ["V_out", "IAPS", "IAP", "IBPS", "IBP", "ICPS", "ICP"];

/// One multi-channel trace and its capacitance labels (pF).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSample {
    /// `CHANNELS` traces of equal length; channel 0 is the output voltage.
    pub channels: Vec<Vec<f64>>,
    pub labels: [f64; LABELS],
}

impl WaveformSample {
    pub fn trace_len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

/// Parameters of the damped-resonance surrogate. Amplitudes are in
/// arbitrary units of order one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Resonant inductance, henries.
    pub inductance: f64,
    /// Seconds per timestep.
    pub sample_period: f64,
    /// Bridge switching frequency, hertz.
    pub switching_frequency: f64,
    /// Decay time constant of each phase's resonant pulse, seconds.
    pub phase_decay: [f64; LABELS],
    /// Decay time constant after switching stops, seconds.
    pub ring_down_decay: f64,
    /// Initial phase of each resonant pulse, radians.
    pub pulse_phase: f64,
    /// Share of a phase current seen by the idle channel of its pair.
    pub leakage: f64,
    /// Capacitance (pF) at which a phase current has unit amplitude.
    pub reference_capacitance: f64,
    /// Gaussian noise standard deviation as a fraction of channel RMS.
    pub noise_fraction: f64,
    /// Per-timestep probability of an excursion on a current channel.
    pub artifact_rate: f64,
    /// Excursion size as a multiple of the clean channel's max |value|.
    pub artifact_magnitude: [f64; 2],
    /// Zero-order-hold factor of the output stage.
    pub hold: usize,
    pub trace_len: usize,
    /// End of the boot ramp (timesteps).
    pub boot_end: usize,
    /// Timestep at which switching stops and ring-down begins.
    pub stable_end: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            inductance: 0.02,
            sample_period: 1e-6,
            switching_frequency: 1_000.0,
            phase_decay: [8.0e-4, 9.0e-4, 1.0e-3],
            ring_down_decay: 3.0e-4,
            pulse_phase: 0.3,
            leakage: 0.15,
            reference_capacitance: 3450.0,
            noise_fraction: 0.01,
            artifact_rate: 0.001,
            artifact_magnitude: [1.5, 4.0],
            hold: 2,
            trace_len: 5261,
            boot_end: 860,
            stable_end: 3260,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.inductance > 0.0) {
            return bad("inductance must be positive");
        }
        if !(self.sample_period > 0.0) || !(self.switching_frequency > 0.0) {
            return bad("sample_period and switching_frequency must be positive");
        }
        if self.phase_decay.iter().any(|t| !(*t > 0.0)) || !(self.ring_down_decay > 0.0) {
            return bad("decay constants must be positive");
        }
        if !(0.0..=1.0).contains(&self.artifact_rate) {
            return bad("artifact_rate must lie in [0, 1]");
        }
        if !(self.artifact_magnitude[0] > 1.0 && self.artifact_magnitude[1] >= self.artifact_magnitude[0]) {
            return bad("artifact_magnitude must satisfy 1 < lo <= hi");
        }
        if !(0.0..=0.5).contains(&self.leakage) || self.noise_fraction < 0.0 {
            return bad("leakage must lie in [0, 0.5] and noise_fraction be non-negative");
        }
        if self.hold == 0 || self.trace_len < 2 * self.hold {
            return bad("hold must be >= 1 and fit the trace twice");
        }
        if self.boot_end == 0 || self.boot_end >= self.stable_end || self.stable_end > self.trace_len {
            return bad("need 0 < boot_end < stable_end <= trace_len");
        }
        if !(self.reference_capacitance > 0.0) {
            return bad("reference_capacitance must be positive");
        }
        Ok(())
    }
}

/// Resonant frequency `1 / (2π sqrt(L C))` in hertz, `C` in pF.
pub fn resonant_frequency(inductance: f64, capacitance_pf: f64) -> f64 {
    1.0 / (2.0 * PI * libm::sqrt(inductance * capacitance_pf * 1e-12))
}

struct Phase {
    freq: f64,
    amp: f64,
    decay: f64,
    offset: f64,
}

/// Clean analog value of every channel at time index `t`.
fn analog(cfg: &SimConfig, phases: &[Phase; LABELS], t: usize, out: &mut [f64; CHANNELS]) {
    let dt = cfg.sample_period;
    let half = 0.5 / cfg.switching_frequency;
    let time = t as f64 * dt;
    let envelope = if t < cfg.boot_end {
        0.5 * (1.0 - libm::cos(PI * t as f64 / cfg.boot_end as f64))
    } else {
        1.0
    };
    let mut vout = 0.0;
    for (i, ph) in phases.iter().enumerate() {
        let (current, voltage) = if t < cfg.stable_end {
            let local = time + ph.offset;
            let k = libm::floor(local / half);
            let tp = local - k * half;
            let sign = if (k as i64) % 2 == 0 { 1.0 } else { -1.0 };
            let damp = ph.amp * libm::exp(-tp / ph.decay) * envelope;
            let arg = 2.0 * PI * ph.freq * tp + cfg.pulse_phase;
            (sign * damp * libm::sin(arg), damp * libm::cos(arg))
        } else {
            let tp = (t - cfg.stable_end) as f64 * dt;
            let damp = ph.amp * libm::exp(-tp / cfg.ring_down_decay);
            let arg = 2.0 * PI * ph.freq * tp + cfg.pulse_phase;
            (damp * libm::sin(arg), damp * libm::cos(arg))
        };
        // star / non-star pair: the same phase current, gated by half-cycle
        let active = if current >= 0.0 { 1.0 - cfg.leakage } else { cfg.leakage };
        let gate = if t < cfg.stable_end {
            let local = time + ph.offset;
            if (libm::floor(local / half) as i64) % 2 == 0 { 1.0 - cfg.leakage } else { cfg.leakage }
        } else {
            active
        };
        out[1 + 2 * i] = current * (1.0 - gate);
        out[2 + 2 * i] = current * gate;
        vout += libm::fabs(voltage);
    }
    out[0] = vout / LABELS as f64;
}

/// Simulates one sample. Deterministic in `(caps, cfg)`; `cfg.seed` keys
/// the noise stream.
pub fn simulate(caps: [f64; LABELS], cfg: &SimConfig) -> Result<WaveformSample> {
    cfg.validate()?;
    if caps.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "capacitances must be positive, got {caps:?}"
        )));
    }
    let period = 1.0 / cfg.switching_frequency;
    let phases: [Phase; LABELS] = core::array::from_fn(|i| Phase {
        freq: resonant_frequency(cfg.inductance, caps[i]),
        amp: libm::sqrt(caps[i] / cfg.reference_capacitance),
        decay: cfg.phase_decay[i],
        offset: period * i as f64 / 3.0,
    });

    let t_len = cfg.trace_len;
    let blocks = t_len / cfg.hold;
    let mut channels = vec![vec![0.0; t_len]; CHANNELS];
    let mut frame = [0.0; CHANNELS];
    // the output stage holds each value for `hold` steps; the last block
    // absorbs the remainder
    for b in 0..blocks {
        analog(cfg, &phases, b * cfg.hold, &mut frame);
        let end = if b + 1 == blocks { t_len } else { (b + 1) * cfg.hold };
        for (c, v) in frame.iter().enumerate() {
            channels[c][b * cfg.hold..end].fill(*v);
        }
    }

    if cfg.noise_fraction > 0.0 {
        let mut rng = rng_for(cfg.seed, stream::SIM_NOISE);
        for ch in channels.iter_mut() {
            let rms = libm::sqrt(ch.iter().map(|v| v * v).sum::<f64>() / t_len as f64);
            let sd = cfg.noise_fraction * rms;
            if sd == 0.0 {
                continue;
            }
            let normal = Normal::new(0.0, sd).map_err(|_| Error::NonFinite("noise scale"))?;
            for b in 0..blocks {
                let e = normal.sample(&mut rng);
                let end = if b + 1 == blocks { t_len } else { (b + 1) * cfg.hold };
                ch[b * cfg.hold..end].iter_mut().for_each(|v| *v += e);
            }
        }
    }
    Ok(WaveformSample { channels, labels: caps })
}

/// Adds isolated single-timestep excursions to the current channels.
/// No two excursions on a channel are adjacent. Keyed by `cfg.seed`.
pub fn inject_artifacts(s: &WaveformSample, cfg: &SimConfig) -> WaveformSample {
    let mut out = s.clone();
    if cfg.artifact_rate <= 0.0 {
        return out;
    }
    let mut rng = rng_for(cfg.seed, stream::SIM_ARTIFACTS);
    let [lo, hi] = cfg.artifact_magnitude;
    for ch in out.channels.iter_mut().skip(1) {
        let peak = ch.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
        let scale = if peak > 0.0 { peak } else { 1.0 };
        let mut last_hit: Option<usize> = None;
        for t in 0..ch.len() {
            let hit = rng.random::<f64>() < cfg.artifact_rate;
            let mag = rng.random_range(lo..=hi) * scale;
            let up = rng.random::<bool>();
            if hit && last_hit.is_none_or(|p| p + 1 < t) {
                ch[t] += if up { mag } else { -mag };
                last_hit = Some(t);
            }
        }
    }
    out
}
