//! Classical and higher order dynamic mode decomposition.
//!
//! Both decompositions fit a linear propagator to (reduced) snapshot data,
//! turn its eigenvalues into growth rates and frequencies, fit complex mode
//! amplitudes over every snapshot, and report reconstruction errors.
//!
//! Modes of real signals come in conjugate pairs. The reported list keeps
//! the member with positive frequency and doubles its amplitude, so a real
//! signal is reconstructed as `Re Σ shape · λᵏ · amplitude · e^{i phase}`.
//! Real eigenvalues (zero or Nyquist frequency) are reported once with their
//! own amplitude.

use std::f64::consts::PI;

use faer::{Mat, MatRef};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    apply_pseudo_inverse, eig, lstsq, normalize_phase, svd_econ, to_complex_mat, truncation_rank,
    Scalar, TruncationPolicy,
};
use crate::signal::{relative_max_error, relative_rms_error, Samples, TimeSeries};

/// Eigenvalues closer than this (relative) are merged into one mode.
pub const DUPLICATE_EIGENVALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
enum SnapshotData {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

/// M×K matrix of snapshots: one row per channel, one column per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: SnapshotData,
    dt: f64,
    t0: f64,
}

impl SnapshotMatrix {
    pub fn from_real(data: Mat<f64>, dt: f64) -> Result<Self> {
        Self::checked(SnapshotData::Real(data), dt)
    }

    pub fn from_complex(data: Mat<Complex64>, dt: f64) -> Result<Self> {
        Self::checked(SnapshotData::Complex(data), dt)
    }

    fn checked(data: SnapshotData, dt: f64) -> Result<Self> {
        let (m, k) = match &data {
            SnapshotData::Real(x) => (x.nrows(), x.ncols()),
            SnapshotData::Complex(x) => (x.nrows(), x.ncols()),
        };
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
        }
        if m == 0 {
            return Err(Error::InvalidArgument("snapshot matrix needs at least one channel".into()));
        }
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 snapshots, got {k}")));
        }
        Ok(Self { data, dt, t0: 0.0 })
    }

    /// Stacks equally long, equally sampled channels as rows.
    ///
    /// The matrix is real when every channel is real.
    pub fn from_channels(channels: &[TimeSeries]) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidArgument("no channels given".into()))?;
        let k = first.len();
        for ch in channels {
            if ch.len() != k {
                return Err(Error::LengthMismatch { expected: k, actual: ch.len() });
            }
            if (ch.dt() - first.dt()).abs() > 1e-12 * first.dt() {
                return Err(Error::InvalidArgument("channels have different sampling intervals".into()));
            }
        }
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 samples, got {k}")));
        }
        let data = if channels.iter().all(TimeSeries::is_real) {
            let rows: Vec<Vec<f64>> = channels.iter().map(TimeSeries::real_parts).collect();
            SnapshotData::Real(Mat::from_fn(channels.len(), k, |i, j| rows[i][j]))
        } else {
            let rows: Vec<Vec<Complex64>> = channels.iter().map(TimeSeries::to_complex).collect();
            SnapshotData::Complex(Mat::from_fn(channels.len(), k, |i, j| rows[i][j]))
        };
        let mut x = Self::checked(data, first.dt())?;
        x.t0 = first.t0();
        Ok(x)
    }

    pub fn channels(&self) -> usize {
        match &self.data {
            SnapshotData::Real(x) => x.nrows(),
            SnapshotData::Complex(x) => x.nrows(),
        }
    }

    pub fn snapshots(&self) -> usize {
        match &self.data {
            SnapshotData::Real(x) => x.ncols(),
            SnapshotData::Complex(x) => x.ncols(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn is_real(&self) -> bool {
        matches!(self.data, SnapshotData::Real(_))
    }

    pub fn get(&self, channel: usize, k: usize) -> Complex64 {
        match &self.data {
            SnapshotData::Real(x) => Complex64::new(x[(channel, k)], 0.0),
            SnapshotData::Complex(x) => x[(channel, k)],
        }
    }

    pub fn to_complex_matrix(&self) -> Mat<Complex64> {
        match &self.data {
            SnapshotData::Real(x) => to_complex_mat(x.as_ref()),
            SnapshotData::Complex(x) => x.clone(),
        }
    }

    /// Splits the matrix back into one series per channel.
    pub fn to_channels(&self) -> Vec<TimeSeries> {
        (0..self.channels())
            .map(|c| {
                let samples = match &self.data {
                    SnapshotData::Real(x) => Samples::Real((0..x.ncols()).map(|k| x[(c, k)]).collect()),
                    SnapshotData::Complex(x) => {
                        Samples::Complex((0..x.ncols()).map(|k| x[(c, k)]).collect())
                    }
                };
                TimeSeries::new(samples, self.dt, self.t0).expect("snapshot matrix is validated")
            })
            .collect()
    }

    /// Column range `[start, start + len)` as a new matrix.
    pub fn columns(&self, start: usize, len: usize) -> Result<SnapshotMatrix> {
        if start + len > self.snapshots() {
            return Err(Error::InvalidArgument("column range out of bounds".into()));
        }
        let data = match &self.data {
            SnapshotData::Real(x) => SnapshotData::Real(x.as_ref().get(.., start..start + len).to_owned()),
            SnapshotData::Complex(x) => {
                SnapshotData::Complex(x.as_ref().get(.., start..start + len).to_owned())
            }
        };
        let mut out = Self::checked(data, self.dt)?;
        out.t0 = self.t0 + start as f64 * self.dt;
        Ok(out)
    }
}

/// Single-channel snapshot matrix (1×K) from a series.
pub fn build_snapshots(ts: &TimeSeries) -> Result<SnapshotMatrix> {
    if ts.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {}", ts.len())));
    }
    SnapshotMatrix::from_channels(std::slice::from_ref(ts))
}

/// One extracted oscillation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub frequency_hz: f64,
    /// δ in 1/s; negative values decay. The damping factor is `-growth_rate`.
    pub growth_rate: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
    /// Unit-norm spatial shape, one entry per channel.
    pub shape: Vec<Complex64>,
    /// Discrete-time eigenvalue `exp((δ + iω)·dt)`.
    pub eigenvalue: Complex64,
}

impl Mode {
    /// Builds a mode from its continuous-time parameters.
    pub fn from_rates(
        frequency_hz: f64,
        growth_rate: f64,
        amplitude: f64,
        phase_rad: f64,
        shape: Vec<Complex64>,
        dt: f64,
    ) -> Mode {
        let eigenvalue = Complex64::new(growth_rate * dt, 2.0 * PI * frequency_hz * dt).exp();
        Mode { frequency_hz, growth_rate, amplitude, phase_rad, shape, eigenvalue }
    }

    pub fn damping(&self) -> f64 {
        -self.growth_rate
    }

    /// Complex amplitude `amplitude · e^{i phase}`.
    pub fn coefficient(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase_rad)
    }

    /// `1/|δ|`, or infinity for undamped modes.
    pub fn time_constant(&self) -> f64 {
        1.0 / self.growth_rate.abs()
    }
}

fn default_tolerance() -> TruncationPolicy {
    TruncationPolicy::Tolerance(1e-10)
}

/// Parameters of a higher order decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HodmdConfig {
    /// Number of delayed copies stacked in the enlarged snapshots.
    pub d: usize,
    #[serde(default = "default_tolerance")]
    pub spatial_policy: TruncationPolicy,
    #[serde(default = "default_tolerance")]
    pub temporal_policy: TruncationPolicy,
    #[serde(default)]
    pub amplitude_policy: Option<TruncationPolicy>,
    pub dt: f64,
}

impl HodmdConfig {
    /// Both SVD reductions default to a 1e-10 relative tolerance.
    pub fn new(d: usize, dt: f64) -> Self {
        Self {
            d,
            spatial_policy: default_tolerance(),
            temporal_policy: default_tolerance(),
            amplitude_policy: None,
            dt,
        }
    }

    pub fn with_spatial_policy(mut self, policy: TruncationPolicy) -> Self {
        self.spatial_policy = policy;
        self
    }

    pub fn with_temporal_policy(mut self, policy: TruncationPolicy) -> Self {
        self.temporal_policy = policy;
        self
    }

    pub fn with_amplitude_policy(mut self, policy: Option<TruncationPolicy>) -> Self {
        self.amplitude_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("delay index d must be at least 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        self.spatial_policy.validate()?;
        self.temporal_policy.validate()?;
        if let Some(p) = self.amplitude_policy {
            p.validate()?;
        }
        Ok(())
    }
}

/// Ranks chosen along the way: spatial reduction, temporal reduction and
/// the number of reported modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranks {
    pub spatial: usize,
    pub temporal: usize,
    pub modes: usize,
}

/// One term of the full complex expansion `x_k = Σ λᵏ c`, before conjugate
/// pairs are folded together.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerm {
    pub eigenvalue: Complex64,
    /// Shape times complex amplitude.
    pub coefficient: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Reported modes, sorted by decreasing amplitude.
    pub modes: Vec<Mode>,
    pub relative_rms: f64,
    pub relative_max: f64,
    pub config_echo: HodmdConfig,
    pub ranks: Ranks,
    /// Whether the input was real (reconstruction takes the real part).
    pub real_input: bool,
    pub channels: usize,
    pub t0: f64,
    /// Condition number of the amplitude least-squares system.
    pub amplitude_condition: f64,
    /// Every retained eigenvalue with its coefficient, conjugates included.
    pub terms: Vec<ExpansionTerm>,
}

impl Decomposition {
    /// Evaluates the full complex expansion (no real part taken).
    pub fn complex_reconstruction(&self, n_samples: usize) -> Vec<Vec<Complex64>> {
        (0..self.channels)
            .map(|c| {
                (0..n_samples)
                    .map(|k| {
                        self.terms
                            .iter()
                            .map(|t| power(t.eigenvalue, k) * t.coefficient[c])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

fn power(mu: Complex64, k: usize) -> Complex64 {
    if k == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        (mu.ln() * k as f64).exp()
    }
}

/// `(δ, ω)` with `δ + iω = ln(μ)/dt` and `arg μ ∈ (−π, π]`.
pub fn eigenvalue_to_rates(mu: Complex64, dt: f64) -> Result<(f64, f64)> {
    if mu.norm() == 0.0 || !(mu.re.is_finite() && mu.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("eigenvalue must be finite and non-zero, got {mu}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut arg = mu.im.atan2(mu.re);
    if arg <= -PI {
        arg = PI;
    }
    Ok((mu.norm().ln() / dt, arg / dt))
}

/// Stacks `d` time-shifted copies of the reduced snapshots.
///
/// Column `j` of the result holds snapshots `j, j+1, …, j+d−1` one block
/// below the other; the output is `(d·n) × (K−d+1)`.
pub fn build_delay_embedding<T: Scalar>(xhat: MatRef<'_, T>, d: usize) -> Result<Mat<T>> {
    let (n, k) = (xhat.nrows(), xhat.ncols());
    if d == 0 {
        return Err(Error::InvalidArgument("delay index d must be at least 1".into()));
    }
    if k <= d {
        return Err(Error::Sizing { snapshots: k, delay: d });
    }
    let cols = k - d + 1;
    Ok(Mat::from_fn(d * n, cols, |row, j| {
        let (block, i) = (row / n, row % n);
        xhat[(i, j + block)]
    }))
}

/// Result of [`fit_amplitudes`].
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeFit {
    pub amplitudes: Vec<Complex64>,
    pub condition: f64,
}

/// Least-squares amplitudes `b` minimizing `Σ_k ‖x_k − Σ_m φ_m λ_mᵏ b_m‖²`
/// over every snapshot of `x`, using each mode's shape and eigenvalue.
pub fn fit_amplitudes(modes: &[Mode], x: &SnapshotMatrix) -> Result<AmplitudeFit> {
    if modes.is_empty() {
        return Err(Error::InvalidArgument("no modes to fit".into()));
    }
    let m = x.channels();
    if let Some(bad) = modes.iter().find(|md| md.shape.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "mode shape has {} entries for {m} channels",
            bad.shape.len()
        )));
    }
    let shapes = Mat::from_fn(m, modes.len(), |i, j| modes[j].shape[i]);
    let eigenvalues: Vec<Complex64> = modes.iter().map(|md| md.eigenvalue).collect();
    let (amplitudes, condition) = fit_coefficients(shapes.as_ref(), &eigenvalues, x.to_complex_matrix().as_ref())?;
    Ok(AmplitudeFit { amplitudes, condition })
}

/// Solves the Vandermonde-structured amplitude problem.
///
/// Columns are rescaled so growing modes cannot overflow (`|λ|ᵏ` is divided
/// by `max(1,|λ|)^{K−1}`) and then equilibrated to unit norm.
fn fit_coefficients(
    shapes: MatRef<'_, Complex64>,
    eigenvalues: &[Complex64],
    data: MatRef<'_, Complex64>,
) -> Result<(Vec<Complex64>, f64)> {
    let (n, k) = (data.nrows(), data.ncols());
    let count = eigenvalues.len();
    let log_scale: Vec<f64> = eigenvalues
        .iter()
        .map(|mu| (k.saturating_sub(1)) as f64 * mu.norm().ln().max(0.0))
        .collect();
    let logs: Vec<Complex64> = eigenvalues.iter().map(|mu| mu.ln()).collect();
    let mut system = Mat::<Complex64>::zeros(n * k, count);
    for m in 0..count {
        for step in 0..k {
            let p = if step == 0 {
                Complex64::new((-log_scale[m]).exp(), 0.0)
            } else {
                (logs[m] * step as f64 - log_scale[m]).exp()
            };
            for c in 0..n {
                system[(step * n + c, m)] = shapes[(c, m)] * p;
            }
        }
    }
    let mut col_norm = vec![0.0; count];
    for (m, norm) in col_norm.iter_mut().enumerate() {
        *norm = (0..n * k).map(|r| system[(r, m)].norm_sqr()).sum::<f64>().sqrt();
        if *norm > 0.0 {
            for r in 0..n * k {
                system[(r, m)] /= *norm;
            }
        }
    }
    let rhs = Mat::from_fn(n * k, 1, |r, _| data[(r % n, r / n)]);
    let svd = svd_econ(system.as_ref())?;
    let smax = svd.singular_values[0];
    let smin = *svd.singular_values.last().expect("non-empty");
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let solution = apply_pseudo_inverse(&svd, rhs.as_ref(), n * k);
    let amplitudes = (0..count)
        .map(|m| {
            if col_norm[m] == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                solution[(m, 0)] / col_norm[m] * (-log_scale[m]).exp()
            }
        })
        .collect();
    Ok((amplitudes, condition))
}

/// Classical DMD: a POD-projected least-squares propagator `X′ ≈ A X`.
pub fn dmd(x: &SnapshotMatrix, policy: TruncationPolicy) -> Result<Decomposition> {
    policy.validate()?;
    if x.snapshots() < 3 {
        return Err(Error::InvalidArgument(format!("DMD needs at least 3 snapshots, got {}", x.snapshots())));
    }
    let cfg = HodmdConfig {
        d: 1,
        spatial_policy: policy,
        temporal_policy: policy,
        amplitude_policy: None,
        dt: x.dt(),
    };
    match &x.data {
        SnapshotData::Real(m) => dmd_impl(x, m.as_ref(), policy, cfg),
        SnapshotData::Complex(m) => dmd_impl(x, m.as_ref(), policy, cfg),
    }
}

fn dmd_impl<T: Scalar>(
    x: &SnapshotMatrix,
    data: MatRef<'_, T>,
    policy: TruncationPolicy,
    cfg: HodmdConfig,
) -> Result<Decomposition> {
    let k = data.ncols();
    let before = data.get(.., ..k - 1);
    let after = data.get(.., 1..);
    let svd = svd_econ(before)?;
    check_rank(&svd.singular_values)?;
    let r = truncation_rank(&svd.singular_values, policy, (before.nrows(), before.ncols()))?;
    let svd = svd.truncate(r);
    // Ã = Uᴴ X′ V S⁻¹
    let mut projected = svd.left_vectors.adjoint() * after * &svd.right_vectors;
    for j in 0..r {
        let inv = 1.0 / svd.singular_values[j];
        for i in 0..r {
            projected[(i, j)] = projected[(i, j)].scaled(inv);
        }
    }
    let (eigenvalues, w) = eig(projected.as_ref())?;
    let shapes = to_complex_mat(svd.left_vectors.as_ref()) * w;
    let fit_data = to_complex_mat(data);
    let ranks = (r, r);
    assemble(x, fit_data.as_ref(), None, eigenvalues, shapes, cfg, ranks)
}

fn check_rank(singular_values: &[f64]) -> Result<()> {
    match singular_values.first() {
        Some(&s) if s > 0.0 && s.is_finite() => Ok(()),
        _ => Err(Error::Degenerate("all singular values are zero".into())),
    }
}

/// Higher order DMD.
///
/// 1. spatial SVD reduction (skipped for one or two channels);
/// 2. delay embedding with `d` copies and a second SVD reduction;
/// 3. least-squares propagator on the reduced delay coordinates and its
///    eigendecomposition, shapes taken from the first block of the lifted
///    eigenvectors;
/// 4. amplitude fit over all snapshots, optional amplitude truncation;
/// 5. reconstruction errors.
pub fn hodmd(x: &SnapshotMatrix, cfg: &HodmdConfig) -> Result<Decomposition> {
    cfg.validate()?;
    if (x.dt() - cfg.dt).abs() > 1e-9 * cfg.dt {
        return Err(Error::InvalidArgument(format!(
            "snapshot dt {} differs from configured dt {}",
            x.dt(),
            cfg.dt
        )));
    }
    if x.snapshots() <= 2 * cfg.d {
        return Err(Error::Sizing { snapshots: x.snapshots(), delay: cfg.d });
    }
    match &x.data {
        SnapshotData::Real(m) => hodmd_impl(x, m.as_ref(), cfg),
        SnapshotData::Complex(m) => hodmd_impl(x, m.as_ref(), cfg),
    }
}

fn hodmd_impl<T: Scalar>(x: &SnapshotMatrix, data: MatRef<'_, T>, cfg: &HodmdConfig) -> Result<Decomposition> {
    let (m, k) = (data.nrows(), data.ncols());

    // Step 1: spatial reduction.
    let (reduced, basis) = if m <= 2 {
        if is_zero(data) {
            return Err(Error::Degenerate("input is identically zero".into()));
        }
        (data.to_owned(), None)
    } else {
        let svd = svd_econ(data)?;
        check_rank(&svd.singular_values)?;
        let r = truncation_rank(&svd.singular_values, cfg.spatial_policy, (m, k))?;
        let svd = svd.truncate(r);
        (svd.reduced_coordinates(), Some(to_complex_mat(svd.left_vectors.as_ref())))
    };
    let n = reduced.nrows();

    // Step 2: delay embedding and temporal reduction.
    let enlarged = build_delay_embedding(reduced.as_ref(), cfg.d)?;
    let svd = svd_econ(enlarged.as_ref())?;
    check_rank(&svd.singular_values)?;
    let r = truncation_rank(&svd.singular_values, cfg.temporal_policy, (enlarged.nrows(), enlarged.ncols()))?;
    let svd = svd.truncate(r);
    let coords = svd.reduced_coordinates();

    // Step 3: propagator R with coords[:, 1:] ≈ R coords[:, :-1].
    let cols = coords.ncols();
    let past = coords.as_ref().get(.., ..cols - 1).adjoint().to_owned();
    let future = coords.as_ref().get(.., 1..).adjoint().to_owned();
    let propagator = lstsq(past.as_ref(), future.as_ref())?.adjoint().to_owned();
    let (eigenvalues, w) = eig(propagator.as_ref())?;
    let lifted = to_complex_mat(svd.left_vectors.as_ref()) * w;
    let shapes = lifted.as_ref().get(..n, ..).to_owned();

    // Steps 4 and 5.
    let fit_data = to_complex_mat(reduced.as_ref());
    assemble(x, fit_data.as_ref(), basis, eigenvalues, shapes, *cfg, (n, r))
}

fn is_zero<T: Scalar>(data: MatRef<'_, T>) -> bool {
    (0..data.ncols()).all(|j| (0..data.nrows()).all(|i| data[(i, j)].to_c64().norm() == 0.0))
}

/// Amplitude fit, pair folding, merging, optional amplitude truncation and
/// error metrics. `shapes` live in the coordinates of `fit_data`; `basis`
/// maps them back to channel space when a spatial reduction was applied.
fn assemble(
    x: &SnapshotMatrix,
    fit_data: MatRef<'_, Complex64>,
    basis: Option<Mat<Complex64>>,
    mut eigenvalues: Vec<Complex64>,
    shapes: Mat<Complex64>,
    cfg: HodmdConfig,
    (spatial_rank, temporal_rank): (usize, usize),
) -> Result<Decomposition> {
    let real_input = x.is_real();
    if real_input {
        for mu in eigenvalues.iter_mut() {
            if mu.im.abs() <= DUPLICATE_EIGENVALUE_TOL * mu.norm() {
                mu.im = 0.0;
            }
        }
    }

    // Drop modes that cannot be expressed as rates or have no shape.
    let mut keep = Vec::new();
    for (j, mu) in eigenvalues.iter().enumerate() {
        let norm = (0..shapes.nrows()).map(|i| shapes[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if mu.norm() > 0.0 && mu.re.is_finite() && mu.im.is_finite() && norm > 0.0 {
            keep.push((j, norm));
        }
    }
    if keep.is_empty() {
        return Err(Error::Degenerate("no usable eigenvalues".into()));
    }
    let unit_shapes = Mat::from_fn(shapes.nrows(), keep.len(), |i, m| shapes[(i, keep[m].0)] / keep[m].1);
    let kept_eigs: Vec<Complex64> = keep.iter().map(|&(j, _)| eigenvalues[j]).collect();
    let (amplitudes, condition) = fit_coefficients(unit_shapes.as_ref(), &kept_eigs, fit_data)?;

    let full_shapes = match &basis {
        Some(u) => u * &unit_shapes,
        None => unit_shapes,
    };
    let raw: Vec<ExpansionTerm> = kept_eigs
        .iter()
        .enumerate()
        .map(|(m, &mu)| ExpansionTerm {
            eigenvalue: mu,
            coefficient: (0..full_shapes.nrows()).map(|i| full_shapes[(i, m)] * amplitudes[m]).collect(),
        })
        .collect();
    let mut terms = merge_duplicates(raw);

    let mut modes = Vec::new();
    for term in &terms {
        if real_input && term.eigenvalue.im < 0.0 {
            continue;
        }
        let doubled = real_input && term.eigenvalue.im > 0.0;
        if let Some(mode) = term_to_mode(term, cfg.dt, doubled)? {
            modes.push(mode);
        }
    }
    modes.sort_by(|a, b| {
        b.amplitude.total_cmp(&a.amplitude).then(a.frequency_hz.total_cmp(&b.frequency_hz))
    });

    if let Some(policy) = cfg.amplitude_policy {
        let amps: Vec<f64> = modes.iter().map(|m| m.amplitude).collect();
        if !amps.is_empty() {
            let r = truncation_rank(&amps, policy, (amps.len(), amps.len()))?;
            modes.truncate(r);
            terms.retain(|t| {
                modes.iter().any(|m| m.eigenvalue == t.eigenvalue || m.eigenvalue == t.eigenvalue.conj())
            });
        }
    }
    if modes.is_empty() {
        return Err(Error::Degenerate("every mode has zero amplitude".into()));
    }

    let mut dec = Decomposition {
        ranks: Ranks { spatial: spatial_rank, temporal: temporal_rank, modes: modes.len() },
        modes,
        relative_rms: f64::NAN,
        relative_max: f64::NAN,
        config_echo: cfg,
        real_input,
        channels: x.channels(),
        t0: x.t0(),
        amplitude_condition: condition,
        terms,
    };
    let recon = reconstruct(&dec, x.snapshots());
    let original = x.to_channels();
    let (rms, max) = stacked_errors(&original, &recon)?;
    dec.relative_rms = rms;
    dec.relative_max = max;
    Ok(dec)
}

fn merge_duplicates(terms: Vec<ExpansionTerm>) -> Vec<ExpansionTerm> {
    let mut merged: Vec<ExpansionTerm> = Vec::with_capacity(terms.len());
    for term in terms {
        let hit = merged.iter_mut().find(|t| {
            let scale = t.eigenvalue.norm().max(term.eigenvalue.norm());
            (t.eigenvalue - term.eigenvalue).norm() <= DUPLICATE_EIGENVALUE_TOL * scale
        });
        match hit {
            Some(t) => {
                for (a, b) in t.coefficient.iter_mut().zip(&term.coefficient) {
                    *a += b;
                }
            }
            None => merged.push(term),
        }
    }
    merged
}

fn term_to_mode(term: &ExpansionTerm, dt: f64, doubled: bool) -> Result<Option<Mode>> {
    let mut shape = term.coefficient.clone();
    let magnitude = shape.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if magnitude == 0.0 {
        return Ok(None);
    }
    let pivot = shape.iter().copied().fold(Complex64::new(0.0, 0.0), |p, z| if z.norm() > p.norm() { z } else { p });
    let phase = pivot.arg();
    normalize_phase(faer::ColMut::from_slice_mut(&mut shape));
    let (growth_rate, omega) = eigenvalue_to_rates(term.eigenvalue, dt)?;
    Ok(Some(Mode {
        frequency_hz: omega / (2.0 * PI),
        growth_rate,
        amplitude: if doubled { 2.0 * magnitude } else { magnitude },
        phase_rad: phase,
        shape,
        eigenvalue: term.eigenvalue,
    }))
}

fn stacked_errors(original: &[TimeSeries], recon: &[TimeSeries]) -> Result<(f64, f64)> {
    let stack = |series: &[TimeSeries]| -> Result<TimeSeries> {
        let dt = series[0].dt();
        if series.iter().all(TimeSeries::is_real) {
            TimeSeries::from_real(series.iter().flat_map(TimeSeries::real_parts).collect(), dt)
        } else {
            TimeSeries::from_complex(series.iter().flat_map(TimeSeries::to_complex).collect(), dt)
        }
    };
    let a = stack(original)?;
    let b = stack(recon)?;
    match (relative_rms_error(&a, &b), relative_max_error(&a, &b)) {
        (Ok(rms), Ok(max)) => Ok((rms, max)),
        (Err(Error::ZeroNormReference), _) | (_, Err(Error::ZeroNormReference)) => {
            Err(Error::Degenerate("input is identically zero".into()))
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// Evaluates the reported modes for `n_samples` steps, one series per channel.
///
/// Real decompositions yield `Re Σ shape · λᵏ · amplitude · e^{i phase}`;
/// complex ones the complex sum.
pub fn reconstruct(dec: &Decomposition, n_samples: usize) -> Vec<TimeSeries> {
    let dt = dec.config_echo.dt;
    let logs: Vec<Complex64> = dec.modes.iter().map(|m| m.eigenvalue.ln()).collect();
    (0..dec.channels)
        .map(|c| {
            let values: Vec<Complex64> = (0..n_samples)
                .map(|k| {
                    dec.modes
                        .iter()
                        .zip(&logs)
                        .map(|(m, l)| {
                            let growth = if k == 0 { Complex64::new(1.0, 0.0) } else { (l * k as f64).exp() };
                            m.shape[c] * growth * m.coefficient()
                        })
                        .sum()
                })
                .collect();
            let samples = if dec.real_input {
                Samples::Real(values.iter().map(|z| z.re).collect())
            } else {
                Samples::Complex(values)
            };
            TimeSeries::new(samples, dt, dec.t0).expect("decomposition dt is validated")
        })
        .collect()
}
