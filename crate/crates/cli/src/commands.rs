use std::path::{Path, PathBuf};
use std::time::Instant;

use hodmd::fourier::{periodogram, welch, WelchConfig, Window};
use hodmd::glide::{gliding_hodmd, pool_modes, GlideConfig};
use hodmd::io::{load_modes, load_time_series, save_modes, save_spectrum, save_time_series, save_tracks, ModesFile};
use hodmd::kds::{find_peaks, kds, lorentz_half_width, FrequencyGrid, KdsConfig, Kernel, Spectrum, Weighting};
use hodmd::modal::{build_snapshots, hodmd, Decomposition, HodmdConfig, Mode, Ranks};
use hodmd::numerics::TruncationPolicy;
use hodmd::signal::{add_gaussian_noise, synth_decaying_sum, Preset, TimeSeries, PRESET_SAMPLES, PRESET_SAMPLE_RATE_HZ};
use serde::Serialize;

use crate::config::{check_paths, parse_setting, RunConfig};
use crate::error::{config_error, CliError};
use crate::{CompareArgs, DecomposeArgs, FftArgs, GlideArgs, HodmdArgs, KdsArgs, PsdArgs, SpectrumArgs, SynthArgs};

const DEFAULT_DELAY: usize = 32;
const DEFAULT_H: f64 = 0.5;
const DEFAULT_WINDOW_LEN: usize = 1024;
const DEFAULT_MAX_TIME_CONSTANT: f64 = 1.0;
const MAX_GRID_POINTS: usize = 5_000_000;

fn default_policy() -> TruncationPolicy {
    TruncationPolicy::Tolerance(1e-10)
}

fn required(flag: Option<PathBuf>, file: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    flag.or_else(|| file.clone()).ok_or_else(|| config_error(format!("no {what} path given")))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn synth(args: &SynthArgs, cfg: &RunConfig, seed: u64) -> Result<(), CliError> {
    let output = required(args.output.clone(), &cfg.output, "output")?;
    let preset = args.preset.as_deref().or(cfg.synth.preset.as_deref());
    let (components, default_fs, default_n) = match preset {
        Some(name) => {
            let p = Preset::from_name(name).ok_or_else(|| config_error(format!("unknown preset '{name}'")))?;
            if cfg.synth.components.is_some() {
                return Err(config_error("give either a preset or a component list, not both"));
            }
            (p.components(), PRESET_SAMPLE_RATE_HZ, PRESET_SAMPLES)
        }
        None => (cfg.synth.components.clone().unwrap_or_default(), PRESET_SAMPLE_RATE_HZ, PRESET_SAMPLES),
    };
    let fs = args.sample_rate.or(cfg.synth.sample_rate_hz).unwrap_or(default_fs);
    let n = args.samples.or(cfg.synth.samples).unwrap_or(default_n);
    let sigma = args.noise_sigma.or(cfg.synth.noise_sigma).unwrap_or(0.0);
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(config_error(format!("noise sigma must be non-negative, got {sigma}")));
    }
    let clean = synth_decaying_sum(&components, fs, n).map_err(|e| config_error(e.to_string()))?;
    let ts = add_gaussian_noise(&clean, sigma, seed)?;
    save_time_series(&output, &ts)?;
    Ok(())
}

struct Analysis {
    cfg: HodmdConfig,
    start: usize,
}

fn window_of(ts: &TimeSeries, start: Option<usize>, length: Option<usize>) -> Result<(TimeSeries, usize), CliError> {
    let start = start.unwrap_or(0);
    if start >= ts.len() {
        return Err(config_error(format!("start {start} is beyond the {} input samples", ts.len())));
    }
    let length = length.unwrap_or(ts.len() - start);
    if length == 0 || start + length > ts.len() {
        return Err(config_error(format!(
            "window [{start}, {}) does not fit in {} samples",
            start + length,
            ts.len()
        )));
    }
    Ok((ts.slice(start, length)?, start))
}

/// Merges flags and file settings into a validated decomposition setup and
/// the analysed sub-window of `ts`.
fn resolve_hodmd(args: &HodmdArgs, cfg: &RunConfig, ts: &TimeSeries) -> Result<(Analysis, TimeSeries), CliError> {
    let section = &cfg.hodmd;
    let policy = |flag: &Option<String>, file: &Option<String>, what| {
        parse_setting::<TruncationPolicy>(flag.as_deref().or(file.as_deref()), what)
    };
    let hodmd_cfg = HodmdConfig::new(args.d.or(section.d).unwrap_or(DEFAULT_DELAY), ts.dt())
        .with_spatial_policy(policy(&args.spatial, &section.spatial_policy, "spatial policy")?.unwrap_or_else(default_policy))
        .with_temporal_policy(policy(&args.temporal, &section.temporal_policy, "temporal policy")?.unwrap_or_else(default_policy))
        .with_amplitude_policy(policy(&args.amplitude, &section.amplitude_policy, "amplitude policy")?);
    hodmd_cfg.validate().map_err(|e| config_error(e.to_string()))?;
    let (window, start) = window_of(ts, args.start.or(section.start), args.length.or(section.length))?;
    Ok((Analysis { cfg: hodmd_cfg, start }, window))
}

#[derive(Serialize)]
struct Summary {
    input: String,
    start: usize,
    samples: usize,
    d: usize,
    spatial_policy: String,
    temporal_policy: String,
    amplitude_policy: Option<String>,
    ranks: Ranks,
    relative_rms: f64,
    relative_max: f64,
    amplitude_condition: f64,
    wall_time_s: f64,
}

fn run_hodmd(window: &TimeSeries, cfg: &HodmdConfig) -> Result<(Decomposition, f64), CliError> {
    let x = build_snapshots(window)?;
    if x.snapshots() <= 2 * cfg.d {
        return Err(hodmd::Error::Sizing { snapshots: x.snapshots(), delay: cfg.d }.into());
    }
    let clock = Instant::now();
    let dec = hodmd(&x, cfg)?;
    Ok((dec, clock.elapsed().as_secs_f64()))
}

fn modes_file(dec: &Decomposition) -> ModesFile {
    ModesFile { dt: dec.config_echo.dt, d: dec.config_echo.d, ranks: dec.ranks, modes: dec.modes.clone() }
}

pub fn decompose(args: &DecomposeArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let input = required(args.input.clone(), &cfg.input, "input")?;
    let output = required(args.output.clone(), &cfg.output, "output")?;
    let summary = args.summary.clone().or_else(|| cfg.summary.clone());
    let outputs: Vec<&Path> = std::iter::once(output.as_path()).chain(summary.as_deref()).collect();
    check_paths(&[&input], &outputs)?;

    let ts = load_time_series(&input)?;
    let (analysis, window) = resolve_hodmd(&args.hodmd, cfg, &ts)?;
    let (dec, wall) = run_hodmd(&window, &analysis.cfg)?;

    save_modes(&output, &modes_file(&dec))?;
    if let Some(path) = summary {
        let c = &analysis.cfg;
        write_json(
            &path,
            &Summary {
                input: input.display().to_string(),
                start: analysis.start,
                samples: window.len(),
                d: c.d,
                spatial_policy: c.spatial_policy.to_string(),
                temporal_policy: c.temporal_policy.to_string(),
                amplitude_policy: c.amplitude_policy.map(|p| p.to_string()),
                ranks: dec.ranks,
                relative_rms: dec.relative_rms,
                relative_max: dec.relative_max,
                amplitude_condition: dec.amplitude_condition,
                wall_time_s: wall,
            },
        )?;
    }
    Ok(())
}

/// Builds the KDS configuration, choosing a grid around the modes when the
/// range or step is not given.
fn resolve_kds(args: &KdsArgs, cfg: &RunConfig, modes: &[Mode]) -> Result<KdsConfig, CliError> {
    let section = &cfg.kds;
    let kernel = parse_setting::<Kernel>(args.kernel.as_deref().or(section.kernel.as_deref()), "kernel")?
        .unwrap_or(Kernel::Gaussian);
    let weighting = parse_setting::<Weighting>(args.weighting.as_deref().or(section.weighting.as_deref()), "weighting")?
        .unwrap_or_default();
    let h = args.h.or(section.h).unwrap_or(DEFAULT_H);
    if !(h.is_finite() && h > 0.0) {
        return Err(config_error(format!("h must be positive, got {h}")));
    }
    let tau_cap = args.max_time_constant.or(section.max_time_constant).unwrap_or(DEFAULT_MAX_TIME_CONSTANT);
    if !(tau_cap > 0.0) {
        return Err(config_error(format!("max time constant must be positive, got {tau_cap}")));
    }
    if modes.is_empty() {
        return Err(config_error("modes file contains no modes"));
    }
    let lo = modes.iter().map(|m| m.frequency_hz).fold(f64::INFINITY, f64::min);
    let hi = modes.iter().map(|m| m.frequency_hz).fold(f64::NEG_INFINITY, f64::max);
    let (margin, default_step) = match kernel {
        Kernel::Gaussian => (5.0 * h, h / 5.0),
        Kernel::Lorentz => {
            let taus = modes.iter().map(|m| m.time_constant().min(tau_cap));
            let (shortest, longest) = taus.fold((f64::INFINITY, 0.0f64), |(a, b), t| (a.min(t), b.max(t)));
            (20.0 * lorentz_half_width(h, shortest), 0.5 * lorentz_half_width(h, longest))
        }
    };
    let f_min = args.f_min.or(section.f_min).unwrap_or(lo - margin);
    let f_max = args.f_max.or(section.f_max).unwrap_or(hi + margin);
    let step = args.step.or(section.step).unwrap_or(default_step);
    let grid = FrequencyGrid::new(f_min, f_max, step).map_err(|e| config_error(e.to_string()))?;
    if (f_max - f_min) / step > MAX_GRID_POINTS as f64 {
        return Err(config_error(format!(
            "grid [{f_min}, {f_max}] with step {step} exceeds {MAX_GRID_POINTS} points; narrow the range or raise the step"
        )));
    }
    let kds_cfg = KdsConfig {
        kernel,
        h,
        weighting,
        grid,
        lorentz_unit_numerator: !(args.sqrt_h_numerator || section.unit_numerator == Some(false)),
        max_time_constant: tau_cap,
    };
    kds_cfg.validate().map_err(|e| config_error(e.to_string()))?;
    Ok(kds_cfg)
}

pub fn spectrum(args: &SpectrumArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let input = required(args.input.clone(), &cfg.input, "input")?;
    let output = required(args.output.clone(), &cfg.output, "output")?;
    check_paths(&[&input], &[&output])?;
    let modes = load_modes(&input)?.modes;
    let kds_cfg = resolve_kds(&args.kds, cfg, &modes)?;
    save_spectrum(&output, &kds(&modes, &kds_cfg)?)?;
    Ok(())
}

enum Psd {
    Periodogram(Window),
    /// Segment length defaults to an eighth of the signal.
    Welch { segment_length: Option<usize>, overlap_fraction: f64, window: Window },
}

fn resolve_psd(args: &PsdArgs, cfg: &RunConfig) -> Result<Psd, CliError> {
    let section = &cfg.fft;
    let method = args.method.as_deref().or(section.method.as_deref()).unwrap_or("periodogram");
    let window = parse_setting::<Window>(args.window.as_deref().or(section.window.as_deref()), "window")?;
    let segment_length = args.segment_length.or(section.segment_length);
    let overlap = args.overlap.or(section.overlap);
    match method {
        "periodogram" => {
            if segment_length.is_some() || overlap.is_some() {
                return Err(config_error("segment length and overlap apply to the welch method only"));
            }
            Ok(Psd::Periodogram(window.unwrap_or_default()))
        }
        "welch" => {
            let defaults = WelchConfig::for_length(0);
            let psd = Psd::Welch {
                segment_length,
                overlap_fraction: overlap.unwrap_or(defaults.overlap_fraction),
                window: window.unwrap_or(defaults.window),
            };
            welch_config(&psd, segment_length.unwrap_or(defaults.segment_length))?;
            Ok(psd)
        }
        other => Err(config_error(format!("unknown PSD method '{other}'"))),
    }
}

fn welch_config(psd: &Psd, n: usize) -> Result<WelchConfig, CliError> {
    let Psd::Welch { segment_length, overlap_fraction, window } = psd else {
        unreachable!("periodogram has no segments")
    };
    let cfg = WelchConfig {
        segment_length: segment_length.unwrap_or(WelchConfig::for_length(n).segment_length),
        overlap_fraction: *overlap_fraction,
        window: *window,
    };
    cfg.validate().map_err(|e| config_error(e.to_string()))?;
    Ok(cfg)
}

fn run_psd(psd: &Psd, ts: &TimeSeries) -> Result<Spectrum, CliError> {
    match psd {
        Psd::Periodogram(w) => Ok(periodogram(ts, *w)?),
        Psd::Welch { .. } => {
            let cfg = welch_config(psd, ts.len())?;
            if ts.len() < cfg.segment_length {
                return Err(config_error(format!(
                    "signal of {} samples is shorter than one {}-sample segment",
                    ts.len(),
                    cfg.segment_length
                )));
            }
            Ok(welch(ts, &cfg)?)
        }
    }
}

pub fn fft(args: &FftArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let input = required(args.input.clone(), &cfg.input, "input")?;
    let output = required(args.output.clone(), &cfg.output, "output")?;
    check_paths(&[&input], &[&output])?;
    let psd = resolve_psd(&args.psd, cfg)?;
    let ts = load_time_series(&input)?;
    let (window, _) = window_of(&ts, args.start, args.length)?;
    save_spectrum(&output, &run_psd(&psd, &window)?)?;
    Ok(())
}

pub fn glide(args: &GlideArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let input = required(args.input.clone(), &cfg.input, "input")?;
    let output = required(args.output.clone(), &cfg.output, "output")?;
    let pool = args.pool.clone().or_else(|| cfg.glide.pool.clone());
    let outputs: Vec<&Path> = std::iter::once(output.as_path()).chain(pool.as_deref()).collect();
    check_paths(&[&input], &outputs)?;
    let floor = args.floor.or(cfg.glide.floor).unwrap_or(0.0);
    if !(floor >= 0.0) {
        return Err(config_error(format!("floor must be non-negative, got {floor}")));
    }

    let ts = load_time_series(&input)?;
    let (analysis, record) = resolve_hodmd(&args.hodmd, cfg, &ts)?;
    let glide_cfg = GlideConfig::new(args.window_len.or(cfg.glide.window_len).unwrap_or(DEFAULT_WINDOW_LEN), analysis.cfg)
        .with_hop(args.hop.or(cfg.glide.hop).unwrap_or(hodmd::glide::DEFAULT_HOP));
    glide_cfg.validate().map_err(|e| match e {
        hodmd::Error::Sizing { .. } => CliError::from(e),
        other => config_error(other.to_string()),
    })?;
    if record.len() < glide_cfg.window_len {
        return Err(config_error(format!(
            "record of {} samples is shorter than the {}-sample window",
            record.len(),
            glide_cfg.window_len
        )));
    }

    let mut tracks = gliding_hodmd(&record, &glide_cfg)?;
    for t in &mut tracks {
        t.window_start_index += analysis.start;
    }
    save_tracks(&output, &tracks)?;
    if let Some(path) = pool {
        let modes = pool_modes(&tracks, floor);
        let file = ModesFile {
            dt: ts.dt(),
            d: glide_cfg.hodmd.d,
            ranks: Ranks { spatial: 1, temporal: 0, modes: modes.len() },
            modes,
        };
        save_modes(&path, &file)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ModeError {
    truth_hz: f64,
    hodmd_hz: f64,
    hodmd_error_hz: f64,
    fft_hz: Option<f64>,
    fft_error_hz: Option<f64>,
}

#[derive(Serialize)]
struct CompareReport {
    input: String,
    modes: String,
    fft_spectrum: String,
    kds_spectrum: String,
    fft_bin_hz: f64,
    relative_rms: f64,
    ranks: Ranks,
    #[serde(skip_serializing_if = "Option::is_none")]
    errors: Option<Vec<ModeError>>,
}

fn nearest(values: impl Iterator<Item = f64>, target: f64) -> Option<f64> {
    values.min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
}

pub fn compare(args: &CompareArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let input = required(args.input.clone(), &cfg.input, "input")?;
    let out_dir = args.out_dir.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let paths = ["modes.csv", "fft.csv", "kds.csv", "report.json"].map(|f| out_dir.join(f));
    check_paths(&[&input], &paths.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;

    let truth_preset = args.truth_preset.as_deref().or(cfg.compare.truth_preset.as_deref());
    let truth = match (args.truth.clone().or_else(|| cfg.compare.truth.clone()), truth_preset) {
        (Some(_), Some(_)) => return Err(config_error("give either truth frequencies or a truth preset")),
        (Some(t), None) => Some(t),
        (None, Some(name)) => Some(
            Preset::from_name(name)
                .ok_or_else(|| config_error(format!("unknown preset '{name}'")))?
                .components()
                .iter()
                .map(|c| c.frequency_hz)
                .collect(),
        ),
        (None, None) => None,
    };
    let psd = resolve_psd(&args.psd, cfg)?;

    let ts = load_time_series(&input)?;
    let (analysis, window) = resolve_hodmd(&args.hodmd, cfg, &ts)?;
    let mut kds_args = args.kds.clone();
    if kds_args.max_time_constant.is_none() && cfg.kds.max_time_constant.is_none() {
        kds_args.max_time_constant = Some(window.len() as f64 * window.dt());
    }
    let (dec, _) = run_hodmd(&window, &analysis.cfg)?;
    let kds_cfg = resolve_kds(&kds_args, cfg, &dec.modes)?;
    let fft_spec = run_psd(&psd, &window)?;
    let kds_spec = kds(&dec.modes, &kds_cfg)?;

    let max = fft_spec.values.iter().fold(0.0f64, |a, &b| a.max(b));
    let fft_peaks: Vec<f64> = find_peaks(&fft_spec, 0.01 * max).iter().map(|p| p.frequency_hz).collect();
    let errors = truth.map(|truth| {
        truth
            .iter()
            .map(|&f| {
                let hodmd_hz = nearest(dec.modes.iter().map(|m| m.frequency_hz), f).expect("decomposition has modes");
                let fft_hz = nearest(fft_peaks.iter().copied(), f);
                ModeError {
                    truth_hz: f,
                    hodmd_hz,
                    hodmd_error_hz: (hodmd_hz - f).abs(),
                    fft_hz,
                    fft_error_hz: fft_hz.map(|p| (p - f).abs()),
                }
            })
            .collect()
    });

    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let [modes_path, fft_path, kds_path, report_path] = &paths;
    save_modes(modes_path, &modes_file(&dec))?;
    save_spectrum(fft_path, &fft_spec)?;
    save_spectrum(kds_path, &kds_spec)?;
    let bin = fft_spec.frequencies.get(1).copied().unwrap_or(0.0) - fft_spec.frequencies[0];
    write_json(
        report_path,
        &CompareReport {
            input: input.display().to_string(),
            modes: modes_path.display().to_string(),
            fft_spectrum: fft_path.display().to_string(),
            kds_spectrum: kds_path.display().to_string(),
            fft_bin_hz: bin,
            relative_rms: dec.relative_rms,
            ranks: dec.ranks,
            errors,
        },
    )?;
    Ok(())
}
