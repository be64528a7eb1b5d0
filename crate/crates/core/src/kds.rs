//! Kernel density spectra: each extracted frequency is smeared by a kernel
//! so a sparse mode list becomes a continuous spectrum of tunable resolution.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modal::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Gaussian,
    Lorentz,
}

/// Per-mode weight of a Gaussian kernel term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Every mode counts once.
    #[default]
    Density,
    /// Weight `A²`.
    PowerAmplitude,
    /// Weight `τ = 1/|δ|`.
    TimeConstant,
}

macro_rules! names {
    ($ty:ty, $what:literal, $($variant:ident => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $name),+ })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok(Self::$variant),)+
                    other => Err(Error::InvalidArgument(format!(concat!("unknown ", $what, " '{}'"), other))),
                }
            }
        }
    };
}

names!(Kernel, "kernel", Gaussian => "gaussian", Lorentz => "lorentz");
names!(Weighting, "weighting", Density => "density", PowerAmplitude => "power_amplitude", TimeConstant => "time_constant");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub f_min: f64,
    pub f_max: f64,
    pub step: f64,
}

impl FrequencyGrid {
    pub fn new(f_min: f64, f_max: f64, step: f64) -> Result<Self> {
        let grid = Self { f_min, f_max, step };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_min.is_finite() && self.f_max.is_finite() && self.f_min < self.f_max) {
            return Err(Error::InvalidArgument(format!(
                "grid needs f_min < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidArgument(format!("grid step must be positive, got {}", self.step)));
        }
        Ok(())
    }

    /// Grid points `f_min + j·step` up to and including `f_max` (within
    /// rounding).
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.f_max - self.f_min) / self.step * (1.0 + 1e-12)).floor() as usize + 1;
        (0..count).map(|j| self.f_min + j as f64 * self.step).collect()
    }

    /// Step `h/5` over `[f_min, f_max]`.
    pub fn default_gaussian(f_min: f64, f_max: f64, h: f64) -> Result<Self> {
        Self::new(f_min, f_max, h / 5.0)
    }

    /// Step of half the narrowest Lorentz half-width among `modes`.
    pub fn default_lorentz(f_min: f64, f_max: f64, h: f64, modes: &[Mode], max_time_constant: f64) -> Result<Self> {
        let tau = modes
            .iter()
            .map(|m| time_constant(m, max_time_constant))
            .fold(0.0, f64::max);
        if tau <= 0.0 {
            return Err(Error::InvalidArgument("no modes to size the grid".into()));
        }
        Self::new(f_min, f_max, 0.5 * lorentz_half_width(h, tau))
    }
}

/// Distance from the centre at which a Lorentz term drops to half its peak.
pub fn lorentz_half_width(h: f64, tau: f64) -> f64 {
    3f64.sqrt() / (2.0 * PI * h.sqrt() * tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdsConfig {
    pub kernel: Kernel,
    pub h: f64,
    #[serde(default)]
    pub weighting: Weighting,
    pub grid: FrequencyGrid,
    /// Replace the `√h` numerator factor of the Lorentz kernel by 1.
    #[serde(default = "yes")]
    pub lorentz_unit_numerator: bool,
    /// Cap on `τ` in seconds, normally the analysed window length. Undamped
    /// modes would otherwise have infinite time constants.
    pub max_time_constant: f64,
}

fn yes() -> bool {
    true
}

impl KdsConfig {
    pub fn gaussian(h: f64, weighting: Weighting, grid: FrequencyGrid, max_time_constant: f64) -> Self {
        Self { kernel: Kernel::Gaussian, h, weighting, grid, lorentz_unit_numerator: true, max_time_constant }
    }

    pub fn lorentz(h: f64, grid: FrequencyGrid, max_time_constant: f64) -> Self {
        Self {
            kernel: Kernel::Lorentz,
            h,
            weighting: Weighting::Density,
            grid,
            lorentz_unit_numerator: true,
            max_time_constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidArgument(format!("h must be positive, got {}", self.h)));
        }
        self.grid.validate()?;
        if self.kernel == Kernel::Gaussian && self.grid.step >= self.h {
            return Err(Error::InvalidArgument(format!(
                "grid step {} must be smaller than h = {} for the Gaussian kernel",
                self.grid.step, self.h
            )));
        }
        if !(self.max_time_constant > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time-constant cap must be positive, got {}",
                self.max_time_constant
            )));
        }
        Ok(())
    }

    fn meta(&self, n_modes: usize) -> Vec<(String, String)> {
        let mut meta = vec![
            ("kernel".to_string(), self.kernel.to_string()),
            ("h".to_string(), self.h.to_string()),
        ];
        match self.kernel {
            Kernel::Gaussian => meta.push(("weighting".into(), self.weighting.to_string())),
            Kernel::Lorentz => meta.push(("unit_numerator".into(), self.lorentz_unit_numerator.to_string())),
        }
        meta.extend([
            ("f_min".to_string(), self.grid.f_min.to_string()),
            ("f_max".to_string(), self.grid.f_max.to_string()),
            ("step".to_string(), self.grid.step.to_string()),
            ("max_time_constant".to_string(), self.max_time_constant.to_string()),
            ("modes".to_string(), n_modes.to_string()),
        ]);
        meta
    }
}

/// Frequency grid with non-negative density values.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    /// Key/value echo of the settings that produced the spectrum.
    pub meta: Vec<(String, String)>,
}

impl Spectrum {
    pub fn new(frequencies: Vec<f64>, values: Vec<f64>, meta: Vec<(String, String)>) -> Result<Self> {
        if frequencies.len() != values.len() {
            return Err(Error::LengthMismatch { expected: frequencies.len(), actual: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Numerical(format!("spectrum value {v} is negative or not finite")));
        }
        Ok(Self { frequencies, values, meta })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn time_constant(mode: &Mode, cap: f64) -> f64 {
    mode.time_constant().min(cap)
}

fn evaluate(grid: &FrequencyGrid, term: impl Fn(f64) -> f64 + Sync) -> (Vec<f64>, Vec<f64>) {
    let freqs = grid.points();
    let values = freqs.par_iter().map(|&f| term(f)).collect();
    (freqs, values)
}

fn check(modes: &[Mode], cfg: &KdsConfig, kernel: Kernel) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::InvalidArgument("KDS needs at least one mode".into()));
    }
    if cfg.kernel != kernel {
        return Err(Error::InvalidArgument(format!("configuration is for the {} kernel", cfg.kernel)));
    }
    cfg.validate()
}

/// `(1/n) Σ w_k exp(−½((F − F_k)/h)²)`.
pub fn kds_gaussian(modes: &[Mode], cfg: &KdsConfig) -> Result<Spectrum> {
    check(modes, cfg, Kernel::Gaussian)?;
    let weights: Vec<f64> = modes
        .iter()
        .map(|m| match cfg.weighting {
            Weighting::Density => 1.0,
            Weighting::PowerAmplitude => m.amplitude * m.amplitude,
            Weighting::TimeConstant => time_constant(m, cfg.max_time_constant),
        })
        .collect();
    let n = modes.len() as f64;
    let h = cfg.h;
    let (freqs, values) = evaluate(&cfg.grid, |f| {
        modes
            .iter()
            .zip(&weights)
            .map(|(m, w)| {
                let z = (f - m.frequency_hz) / h;
                w * (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            / n
    });
    Spectrum::new(freqs, values, cfg.meta(modes.len()))
}

/// `(1/n) Σ (√h) A_k τ_k / √(1 + 4π² h τ_k² (F − F_k)²)`; `√h` becomes 1
/// with a unit numerator. The weighting setting does not apply.
pub fn kds_lorentz(modes: &[Mode], cfg: &KdsConfig) -> Result<Spectrum> {
    check(modes, cfg, Kernel::Lorentz)?;
    let taus: Vec<f64> = modes.iter().map(|m| time_constant(m, cfg.max_time_constant)).collect();
    let numerator = if cfg.lorentz_unit_numerator { 1.0 } else { cfg.h.sqrt() };
    let n = modes.len() as f64;
    let width = 4.0 * PI * PI * cfg.h;
    let (freqs, values) = evaluate(&cfg.grid, |f| {
        modes
            .iter()
            .zip(&taus)
            .map(|(m, &tau)| {
                let df = f - m.frequency_hz;
                numerator * m.amplitude * tau / (1.0 + width * tau * tau * df * df).sqrt()
            })
            .sum::<f64>()
            / n
    });
    Spectrum::new(freqs, values, cfg.meta(modes.len()))
}

/// Dispatches on `cfg.kernel`.
pub fn kds(modes: &[Mode], cfg: &KdsConfig) -> Result<Spectrum> {
    match cfg.kernel {
        Kernel::Gaussian => kds_gaussian(modes, cfg),
        Kernel::Lorentz => kds_lorentz(modes, cfg),
    }
}

/// A local maximum of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub frequency_hz: f64,
    pub value: f64,
    pub prominence: f64,
}

/// Strictly interior local maxima whose prominence is at least
/// `min_prominence`, sorted by frequency.
///
/// A flat top counts once, at its middle sample. Prominence is the height
/// above the higher of the two lowest points reached before meeting a
/// strictly higher sample (or the spectrum edge) on either side.
pub fn find_peaks(spec: &Spectrum, min_prominence: f64) -> Vec<Peak> {
    let v = &spec.values;
    let n = v.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if v[i] > v[i - 1] {
            let mut end = i;
            while end + 1 < n && v[end + 1] == v[i] {
                end += 1;
            }
            if end + 1 < n && v[end + 1] < v[i] {
                let mid = (i + end) / 2;
                let height = v[i];
                let left_min = v[..i].iter().rev().take_while(|&&x| x <= height).fold(height, |a, &x| a.min(x));
                let right_min = v[end + 1..].iter().take_while(|&&x| x <= height).fold(height, |a, &x| a.min(x));
                let prominence = height - left_min.max(right_min);
                if prominence >= min_prominence {
                    peaks.push(Peak { frequency_hz: spec.frequencies[mid], value: height, prominence });
                }
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    peaks
}
