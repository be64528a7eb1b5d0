//! Sliding-window decomposition of long records and pooling of the
//! per-window modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modal::{build_snapshots, hodmd, HodmdConfig, Mode};
use crate::signal::TimeSeries;

pub const DEFAULT_HOP: usize = 64;

fn default_hop() -> usize {
    DEFAULT_HOP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlideConfig {
    pub window_len: usize,
    #[serde(default = "default_hop")]
    pub hop: usize,
    pub hodmd: HodmdConfig,
}

impl GlideConfig {
    pub fn new(window_len: usize, hodmd: HodmdConfig) -> Self {
        Self { window_len, hop: DEFAULT_HOP, hodmd }
    }

    pub fn with_hop(mut self, hop: usize) -> Self {
        self.hop = hop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.hodmd.validate()?;
        if self.hop == 0 {
            return Err(Error::InvalidArgument("hop must be at least 1".into()));
        }
        if self.window_len <= 2 * self.hodmd.d {
            return Err(Error::Sizing { snapshots: self.window_len, delay: self.hodmd.d });
        }
        Ok(())
    }
}

/// Modes of one window, or the reason the window could not be decomposed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrack {
    pub window_start_index: usize,
    pub window_start_time: f64,
    pub modes: Vec<Mode>,
    /// `(relative_rms, relative_max)`; `None` for failed windows.
    pub errors: Option<(f64, f64)>,
    pub failure: Option<String>,
}

impl ModeTrack {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Decomposes `ts` as one window starting at `index` of the parent record.
pub fn decompose_window(ts: &TimeSeries, index: usize, cfg: &HodmdConfig) -> ModeTrack {
    let outcome = build_snapshots(ts).and_then(|x| hodmd(&x, cfg));
    match outcome {
        Ok(dec) => ModeTrack {
            window_start_index: index,
            window_start_time: ts.t0(),
            errors: Some((dec.relative_rms, dec.relative_max)),
            modes: dec.modes,
            failure: None,
        },
        Err(e) => ModeTrack {
            window_start_index: index,
            window_start_time: ts.t0(),
            modes: Vec::new(),
            errors: None,
            failure: Some(e.to_string()),
        },
    }
}

/// Window start indices `0, hop, 2·hop, …` that fit inside `len` samples.
pub fn window_starts(len: usize, cfg: &GlideConfig) -> Vec<usize> {
    if len < cfg.window_len {
        return Vec::new();
    }
    (0..=len - cfg.window_len).step_by(cfg.hop.max(1)).collect()
}

/// Decomposes every window independently. Windows run in parallel; the
/// result is ordered by start index and does not depend on scheduling.
pub fn gliding_hodmd(ts: &TimeSeries, cfg: &GlideConfig) -> Result<Vec<ModeTrack>> {
    cfg.validate()?;
    if ts.len() < cfg.window_len {
        return Err(Error::InvalidArgument(format!(
            "record of {} samples is shorter than the {}-sample window",
            ts.len(),
            cfg.window_len
        )));
    }
    let starts = window_starts(ts.len(), cfg);
    starts
        .par_iter()
        .map(|&s| Ok(decompose_window(&ts.slice(s, cfg.window_len)?, s, &cfg.hodmd)))
        .collect()
}

/// One independent decomposition per segment; failures are recorded in the
/// corresponding track. Tracks are indexed by segment position.
pub fn batch_hodmd(segments: &[TimeSeries], cfg: &HodmdConfig) -> Result<Vec<ModeTrack>> {
    if segments.is_empty() {
        return Err(Error::InvalidArgument("no segments given".into()));
    }
    cfg.validate()?;
    Ok(segments.par_iter().enumerate().map(|(i, s)| decompose_window(s, i, cfg)).collect())
}

/// All modes with `amplitude ≥ floor`, in window order then per-window order.
pub fn pool_modes(tracks: &[ModeTrack], amplitude_floor: f64) -> Vec<Mode> {
    tracks
        .iter()
        .flat_map(|t| t.modes.iter().filter(|m| m.amplitude >= amplitude_floor).cloned())
        .collect()
}
