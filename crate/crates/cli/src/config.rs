//! TOML run configuration. Every field is optional; command-line flags take
//! precedence over the file, and built-in defaults fill the rest.
//!
//! ```toml
//! input = "signal.csv"
//! output = "modes.csv"
//! seed = 7
//!
//! [synth]
//! preset = "paper-case-2"
//! noise_sigma = 0.01
//!
//! [hodmd]
//! d = 100
//! temporal_policy = "oht"
//!
//! [kds]
//! kernel = "lorentz"
//! h = 1000.0
//! ```

use std::path::{Path, PathBuf};

use hodmd::signal::DampedComponent;
use serde::Deserialize;

use crate::error::{config_error, CliError};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub hodmd: HodmdSection,
    #[serde(default)]
    pub kds: KdsSection,
    #[serde(default)]
    pub fft: FftSection,
    #[serde(default)]
    pub glide: GlideSection,
    #[serde(default)]
    pub compare: CompareSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub preset: Option<String>,
    pub components: Option<Vec<DampedComponent>>,
    pub sample_rate_hz: Option<f64>,
    pub samples: Option<usize>,
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HodmdSection {
    pub d: Option<usize>,
    pub spatial_policy: Option<String>,
    pub temporal_policy: Option<String>,
    pub amplitude_policy: Option<String>,
    pub start: Option<usize>,
    pub length: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KdsSection {
    pub kernel: Option<String>,
    pub h: Option<f64>,
    pub weighting: Option<String>,
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
    pub step: Option<f64>,
    pub unit_numerator: Option<bool>,
    pub max_time_constant: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FftSection {
    pub method: Option<String>,
    pub window: Option<String>,
    pub segment_length: Option<usize>,
    pub overlap: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlideSection {
    pub window_len: Option<usize>,
    pub hop: Option<usize>,
    pub pool: Option<PathBuf>,
    pub floor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub truth: Option<Vec<f64>>,
    pub truth_preset: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }
}

/// Parses an optional textual setting, reporting failures as configuration
/// errors.
pub fn parse_setting<T>(value: Option<&str>, what: &str) -> Result<Option<T>, CliError>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    value
        .map(|v| v.parse::<T>().map_err(|e| config_error(format!("{what}: {e}"))))
        .transpose()
}

/// Rejects output paths that repeat each other or overwrite an input.
pub fn check_paths(inputs: &[&Path], outputs: &[&Path]) -> Result<(), CliError> {
    for (i, out) in outputs.iter().enumerate() {
        if outputs[..i].contains(out) {
            return Err(config_error(format!("output path {} is used twice", out.display())));
        }
        if inputs.contains(out) {
            return Err(config_error(format!("output path {} would overwrite an input", out.display())));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_sections() {
        let cfg: RunConfig = toml::from_str(
            r#"
            input = "a.csv"
            seed = 3
            [synth]
            components = [{ amplitude = 1.0, frequency_hz = 50.0, damping = 2.0 }]
            [hodmd]
            d = 12
            temporal_policy = "oht"
            [kds]
            kernel = "lorentz"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.synth.components.unwrap()[0].phase_rad, 0.0);
        assert_eq!(cfg.hodmd.d, Some(12));
        assert_eq!(cfg.kds.kernel.as_deref(), Some("lorentz"));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<RunConfig>("[hodmd]\ndelay = 3\n").is_err());
    }

    #[test]
    fn path_checks() {
        let (a, b) = (Path::new("a.csv"), Path::new("b.csv"));
        assert!(check_paths(&[a], &[b]).is_ok());
        assert!(check_paths(&[a], &[a]).is_err());
        assert!(check_paths(&[a], &[b, b]).is_err());
    }
}
