//! Fourier baseline: DFT, periodogram and Welch power spectral densities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kds::Spectrum;
use crate::signal::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    /// Periodic Hann, the usual choice for spectral estimation.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos()).collect(),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        })
    }
}

impl FromStr for Window {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "boxcar" => Ok(Window::Rectangular),
            "hann" | "hanning" => Ok(Window::Hann),
            other => Err(Error::InvalidArgument(format!("unknown window '{other}'"))),
        }
    }
}

/// `X[j] = Σ x_k exp(−2πi jk/N)`, bin spacing `fs/N`.
pub fn dft(ts: &TimeSeries) -> Vec<Complex64> {
    let mut buffer = ts.to_complex();
    if !buffer.is_empty() {
        FftPlanner::new().plan_fft_forward(buffer.len()).process(&mut buffer);
    }
    buffer
}

/// One-sided PSD of a single windowed segment. Interior bins are doubled so
/// that integrating over `[0, fs/2]` recovers the mean power.
fn one_sided_psd(samples: &[Complex64], window: &[f64], fs: f64) -> Vec<f64> {
    let n = samples.len();
    let mut buffer: Vec<Complex64> = samples.iter().zip(window).map(|(x, w)| x * w).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let norm = fs * window.iter().map(|w| w * w).sum::<f64>();
    let bins = n / 2 + 1;
    (0..bins)
        .map(|j| {
            let p = buffer[j].norm_sqr() / norm;
            let edge = j == 0 || (n % 2 == 0 && j == n / 2);
            if edge { p } else { 2.0 * p }
        })
        .collect()
}

fn frequencies(n: usize, fs: f64) -> Vec<f64> {
    (0..n / 2 + 1).map(|j| j as f64 * fs / n as f64).collect()
}

/// One-sided power spectral density in units²/Hz.
pub fn periodogram(ts: &TimeSeries, window: Window) -> Result<Spectrum> {
    if ts.len() < 2 {
        return Err(Error::InvalidArgument(format!("periodogram needs at least 2 samples, got {}", ts.len())));
    }
    let n = ts.len();
    let values = one_sided_psd(&ts.to_complex(), &window.coefficients(n), ts.fs());
    let meta = vec![
        ("method".to_string(), "periodogram".to_string()),
        ("window".to_string(), window.to_string()),
        ("samples".to_string(), n.to_string()),
        ("fs".to_string(), ts.fs().to_string()),
    ];
    Spectrum::new(frequencies(n, ts.fs()), values, meta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_length: usize,
    pub overlap_fraction: f64,
    pub window: Window,
}

impl WelchConfig {
    /// Hann window, 50 % overlap, segments of `n/8` rounded down to a power
    /// of two (at least 8).
    pub fn for_length(n: usize) -> Self {
        let eighth = (n / 8).max(8);
        let segment_length = 1usize << (usize::BITS - 1 - eighth.leading_zeros());
        Self { segment_length, overlap_fraction: 0.5, window: Window::Hann }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_length < 8 || !self.segment_length.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "segment length must be a power of two >= 8, got {}",
                self.segment_length
            )));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::InvalidArgument(format!(
                "overlap must lie in [0, 1), got {}",
                self.overlap_fraction
            )));
        }
        Ok(())
    }

    fn hop(&self) -> usize {
        ((self.segment_length as f64 * (1.0 - self.overlap_fraction)).round() as usize).max(1)
    }
}

/// Mean of the windowed periodograms of overlapping segments. Trailing
/// samples that do not fill a whole segment are ignored.
pub fn welch(ts: &TimeSeries, cfg: &WelchConfig) -> Result<Spectrum> {
    cfg.validate()?;
    let seg = cfg.segment_length;
    if ts.len() < seg {
        return Err(Error::InvalidArgument(format!(
            "signal of {} samples is shorter than one segment of {seg}",
            ts.len()
        )));
    }
    let samples = ts.to_complex();
    let window = cfg.window.coefficients(seg);
    let hop = cfg.hop();
    let starts: Vec<usize> = (0..=ts.len() - seg).step_by(hop).collect();
    let mut acc = vec![0.0; seg / 2 + 1];
    for &s in &starts {
        for (a, p) in acc.iter_mut().zip(one_sided_psd(&samples[s..s + seg], &window, ts.fs())) {
            *a += p;
        }
    }
    let count = starts.len() as f64;
    acc.iter_mut().for_each(|a| *a /= count);
    let meta = vec![
        ("method".to_string(), "welch".to_string()),
        ("window".to_string(), cfg.window.to_string()),
        ("segment_length".to_string(), seg.to_string()),
        ("overlap".to_string(), cfg.overlap_fraction.to_string()),
        ("segments".to_string(), starts.len().to_string()),
        ("fs".to_string(), ts.fs().to_string()),
    ];
    Spectrum::new(frequencies(seg, ts.fs()), acc, meta)
}
