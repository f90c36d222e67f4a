//! Surrogate resonant-converter waveforms and the capacitance-grid dataset.
//!
//! Each phase's current is a train of damped resonant pulses at
//! `1 / (2π sqrt(L C))`, restarted every switching half-cycle and split
//! between a star / non-star channel pair. A smooth ramp forms the boot
//! region and free exponential ringing follows once switching stops.

mod dataset;
mod waveform;

pub use dataset::{
    build_dataset, plan_samples, process_sample, Dataset, DatasetSpec, Partition, PlannedSample,
    Split,
};
pub use waveform::{
    inject_artifacts, resonant_frequency, simulate, SimConfig, WaveformSample, CHANNELS,
    CHANNEL_NAMES,
};
