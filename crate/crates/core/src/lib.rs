//! Modal decomposition of sampled vibration signals.
//!
//! The crate extracts damped oscillation modes from uniformly sampled
//! signals with classical and higher order dynamic mode decomposition
//! (DMD / HODMD), renders the resulting sparse mode lists as kernel density
//! spectra, and provides a Fourier baseline for comparison.
//!
//! ```no_run
//! use hodmd::modal::{build_snapshots, hodmd, HodmdConfig};
//! use hodmd::numerics::TruncationPolicy;
//! use hodmd::signal::Preset;
//!
//! let signal = Preset::Case2.synthesize().unwrap().slice(0, 4096).unwrap();
//! let cfg = HodmdConfig::new(32, signal.dt())
//!     .with_temporal_policy(TruncationPolicy::Tolerance(1e-10));
//! let dec = hodmd(&build_snapshots(&signal).unwrap(), &cfg).unwrap();
//! for mode in &dec.modes {
//!     println!("{:.4} Hz  {:.4} 1/s", mode.frequency_hz, -mode.growth_rate);
//! }
//! ```

pub mod error;
pub mod fourier;
pub mod glide;
pub mod io;
pub mod kds;
pub mod modal;
pub mod numerics;
pub mod signal;

pub use error::{Error, Result};
pub use num_complex::Complex64;
