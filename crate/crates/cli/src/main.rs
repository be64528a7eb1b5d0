use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(author, version, about = "Modal decomposition and kernel density spectra of sampled signals")]
struct Cli {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for any random noise
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic sum of damped oscillations
    Synth(SynthArgs),
    /// Extract modes with higher order DMD
    Decompose(DecomposeArgs),
    /// Render a kernel density spectrum from a modes file
    Spectrum(SpectrumArgs),
    /// Periodogram or Welch PSD of a series
    Fft(FftArgs),
    /// Sliding-window decomposition of a long record
    Glide(GlideArgs),
    /// Compare decomposition and Fourier estimates of the same signal
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Named parameter set: paper-case-1, paper-case-2 or paper-case-3
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub sample_rate: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Standard deviation of additive white noise
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct HodmdArgs {
    /// Number of delayed copies in the enlarged snapshots
    #[arg(short = 'd', long = "delay")]
    pub d: Option<usize>,
    /// Spatial truncation: tol:<eps>, count:<n> or oht
    #[arg(long)]
    pub spatial: Option<String>,
    /// Temporal truncation: tol:<eps>, count:<n> or oht
    #[arg(long)]
    pub temporal: Option<String>,
    /// Keep modes by amplitude: tol:<eps>, count:<n> or oht
    #[arg(long)]
    pub amplitude: Option<String>,
    /// First sample of the analysed sub-window
    #[arg(long)]
    pub start: Option<usize>,
    /// Length of the analysed sub-window
    #[arg(long)]
    pub length: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub hodmd: HodmdArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// JSON summary with ranks, errors and wall time
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct KdsArgs {
    /// gaussian or lorentz
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub h: Option<f64>,
    /// density, power_amplitude or time_constant (Gaussian only)
    #[arg(long)]
    pub weighting: Option<String>,
    #[arg(long)]
    pub f_min: Option<f64>,
    #[arg(long)]
    pub f_max: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Keep the square-root-of-h numerator factor of the Lorentz kernel
    #[arg(long)]
    pub sqrt_h_numerator: bool,
    /// Upper bound on mode time constants, in seconds
    #[arg(long)]
    pub max_time_constant: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub kds: KdsArgs,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PsdArgs {
    /// periodogram or welch
    #[arg(long)]
    pub method: Option<String>,
    /// rectangular or hann
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub segment_length: Option<usize>,
    #[arg(long)]
    pub overlap: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FftArgs {
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub psd: PsdArgs,
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GlideArgs {
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub hodmd: HodmdArgs,
    #[arg(long)]
    pub window_len: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    /// Also write all window modes to this modes file
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Drop pooled modes below this amplitude
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub hodmd: HodmdArgs,
    #[command(flatten)]
    pub kds: KdsArgs,
    #[command(flatten)]
    pub psd: PsdArgs,
    /// True frequencies in Hz, comma separated
    #[arg(long, value_delimiter = ',')]
    pub truth: Option<Vec<f64>>,
    /// Take the true frequencies from a named preset
    #[arg(long)]
    pub truth_preset: Option<String>,
    /// Directory for the modes, spectra and report files
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::load(cli.config.as_deref()).and_then(|cfg| {
        let seed = cli.seed.or(cfg.seed).unwrap_or(0);
        match cli.command {
            Command::Synth(a) => commands::synth(&a, &cfg, seed),
            Command::Decompose(a) => commands::decompose(&a, &cfg),
            Command::Spectrum(a) => commands::spectrum(&a, &cfg),
            Command::Fft(a) => commands::fft(&a, &cfg),
            Command::Glide(a) => commands::glide(&a, &cfg),
            Command::Compare(a) => commands::compare(&a, &cfg),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
