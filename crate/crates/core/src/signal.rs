//! Test signal synthesis, noise injection and reconstruction error metrics.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Sample storage of a [`TimeSeries`].
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Real(v) => v.len(),
            Samples::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, k: usize) -> Complex64 {
        match self {
            Samples::Real(v) => Complex64::new(v[k], 0.0),
            Samples::Complex(v) => v[k],
        }
    }

    fn slice(&self, start: usize, len: usize) -> Samples {
        match self {
            Samples::Real(v) => Samples::Real(v[start..start + len].to_vec()),
            Samples::Complex(v) => Samples::Complex(v[start..start + len].to_vec()),
        }
    }
}

/// A uniformly sampled, single-channel signal.
///
/// The sampling frequency is always derived from `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Samples,
    dt: f64,
    t0: f64,
}

impl TimeSeries {
    pub fn new(samples: Samples, dt: f64, t0: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sampling interval must be positive and finite, got {dt}"
            )));
        }
        ensure_finite(t0, "t0")?;
        if samples.is_empty() {
            return Err(Error::InvalidArgument("time series needs at least one sample".into()));
        }
        Ok(Self { samples, dt, t0 })
    }

    pub fn from_real(samples: Vec<f64>, dt: f64) -> Result<Self> {
        Self::new(Samples::Real(samples), dt, 0.0)
    }

    pub fn from_complex(samples: Vec<Complex64>, dt: f64) -> Result<Self> {
        Self::new(Samples::Complex(samples), dt, 0.0)
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_real(&self) -> bool {
        matches!(self.samples, Samples::Real(_))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn fs(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        match &self.samples {
            Samples::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Samples::Complex(v) => v.clone(),
        }
    }

    /// Real parts of the samples (the samples themselves for real series).
    pub fn real_parts(&self) -> Vec<f64> {
        match &self.samples {
            Samples::Real(v) => v.clone(),
            Samples::Complex(v) => v.iter().map(|z| z.re).collect(),
        }
    }

    /// Contiguous sub-window `[start, start + len)`, with `t0` shifted accordingly.
    pub fn slice(&self, start: usize, len: usize) -> Result<TimeSeries> {
        if len == 0 || start + len > self.len() {
            return Err(Error::InvalidArgument(format!(
                "window [{start}, {}) outside series of length {}",
                start + len,
                self.len()
            )));
        }
        Ok(TimeSeries {
            samples: self.samples.slice(start, len),
            dt: self.dt,
            t0: self.t0 + start as f64 * self.dt,
        })
    }

    fn norm2(&self) -> f64 {
        (0..self.len()).map(|k| self.samples.get(k).norm_sqr()).sum::<f64>().sqrt()
    }
}

/// One exponentially decaying oscillation:
/// `amplitude * exp(-damping * t) * sin(2π frequency_hz t + phase_rad)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedComponent {
    pub amplitude: f64,
    pub frequency_hz: f64,
    /// Decay rate in 1/s; positive values decay.
    pub damping: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl DampedComponent {
    pub fn new(amplitude: f64, frequency_hz: f64, damping: f64) -> Self {
        Self { amplitude, frequency_hz, damping, phase_rad: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        ensure_finite(self.amplitude, "amplitude")?;
        ensure_finite(self.frequency_hz, "frequency_hz")?;
        ensure_finite(self.damping, "damping")?;
        ensure_finite(self.phase_rad, "phase_rad")?;
        if self.amplitude < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.amplitude
            * (-t * self.damping).exp()
            * (2.0 * PI * self.frequency_hz * t + self.phase_rad).sin()
    }
}

/// Sum of damped sinusoids sampled at `fs` for `n` samples starting at t = 0.
pub fn synth_decaying_sum(components: &[DampedComponent], fs: f64, n: usize) -> Result<TimeSeries> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling frequency must be positive, got {fs}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    for c in components {
        c.validate()?;
    }
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / fs;
            components.iter().map(|c| c.value_at(t)).sum()
        })
        .collect();
    TimeSeries::from_real(samples, 1.0 / fs)
}

/// Adds white Gaussian noise with standard deviation `sigma`.
///
/// The generator is ChaCha8 seeded through `seed_from_u64(seed)`. Complex
/// series receive independent noise of deviation `sigma` on each part.
pub fn add_gaussian_noise(ts: &TimeSeries, sigma: f64, seed: u64) -> Result<TimeSeries> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(ts.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let samples = match &ts.samples {
        Samples::Real(v) => Samples::Real(v.iter().map(|x| x + normal.sample(&mut rng)).collect()),
        Samples::Complex(v) => Samples::Complex(
            v.iter()
                .map(|z| {
                    let re = normal.sample(&mut rng);
                    let im = normal.sample(&mut rng);
                    z + Complex64::new(re, im)
                })
                .collect(),
        ),
    };
    Ok(TimeSeries { samples, dt: ts.dt, t0: ts.t0 })
}

fn check_pair(reference: &TimeSeries, candidate: &TimeSeries) -> Result<()> {
    if reference.len() != candidate.len() {
        return Err(Error::LengthMismatch { expected: reference.len(), actual: candidate.len() });
    }
    Ok(())
}

/// `‖reference − candidate‖₂ / ‖reference‖₂`.
pub fn relative_rms_error(reference: &TimeSeries, candidate: &TimeSeries) -> Result<f64> {
    check_pair(reference, candidate)?;
    let denom = reference.norm2();
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let num = (0..reference.len())
        .map(|k| (reference.samples.get(k) - candidate.samples.get(k)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// `max_k |reference_k − candidate_k| / max_k |reference_k|`.
pub fn relative_max_error(reference: &TimeSeries, candidate: &TimeSeries) -> Result<f64> {
    check_pair(reference, candidate)?;
    let denom = (0..reference.len()).map(|k| reference.samples.get(k).norm()).fold(0.0, f64::max);
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let num = (0..reference.len())
        .map(|k| (reference.samples.get(k) - candidate.samples.get(k)).norm())
        .fold(0.0, f64::max);
    Ok(num / denom)
}

/// Named test signals: one, three and eight damped oscillations sampled at
/// 25 kHz for 2^16 samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Case1,
    Case2,
    Case3,
}

pub const PRESET_SAMPLE_RATE_HZ: f64 = 25_000.0;
pub const PRESET_SAMPLES: usize = 1 << 16;

#[derive(Deserialize)]
struct PresetFile {
    sample_rate_hz: f64,
    samples: usize,
    components: Vec<DampedComponent>,
}

const EIGHT_MODES: &str = include_str!("../presets/eight_modes.toml");

impl Preset {
    pub fn from_name(name: &str) -> Option<Preset> {
        match name {
            "paper-case-1" => Some(Preset::Case1),
            "paper-case-2" => Some(Preset::Case2),
            "paper-case-3" => Some(Preset::Case3),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Case1 => "paper-case-1",
            Preset::Case2 => "paper-case-2",
            Preset::Case3 => "paper-case-3",
        }
    }

    pub fn components(&self) -> Vec<DampedComponent> {
        match self {
            Preset::Case1 => vec![DampedComponent::new(1.0, 2000.0, 80.0)],
            Preset::Case2 => vec![
                DampedComponent::new(1.0, 2008.0, 50.0),
                DampedComponent::new(1.0, 1992.0, 80.0),
                DampedComponent::new(1.0, 1800.0, 100.0),
            ],
            Preset::Case3 => {
                let file: PresetFile =
                    toml::from_str(EIGHT_MODES).expect("bundled eight-mode preset is valid TOML");
                debug_assert_eq!(file.sample_rate_hz, PRESET_SAMPLE_RATE_HZ);
                debug_assert_eq!(file.samples, PRESET_SAMPLES);
                file.components
            }
        }
    }

    pub fn synthesize(&self) -> Result<TimeSeries> {
        synth_decaying_sum(&self.components(), PRESET_SAMPLE_RATE_HZ, PRESET_SAMPLES)
    }
}
