//! The "a measurement has occurred" projector and its time dependence.
//!
//! [`build_correlation_projector`] builds `M = Σ_i |φ_i⟩|O_i⟩⟨O_i|⟨φ_i|` from
//! basis-state pairs. The diagnostics in this module show why `P_M(t)` and
//! its time derivative cannot be read as a probability density in time:
//! `M(t)` fails to commute with itself at different times, `P_M` integrates
//! to a grid-dependent number, and `m(t)` goes negative.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{
    check_dim, expectation, heisenberg, propagator, DenseOperator, Flags, PiecewiseHamiltonian,
    StateVector, C64,
};

/// Relative tolerance for deciding that a time grid is uniform.
const UNIFORM_REL_TOL: f64 = 1e-9;

/// Tolerance on `P_M(t)` leaving `[0, 1]` before it is clamped.
const CLAMP_TOL: f64 = 1e-12;

/// System/detector basis-index pairs `(i, j)` naming the correlated states
/// `|i⟩ ⊗ |j⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationSpec {
    system_dim: usize,
    detector_dim: usize,
    pairs: Vec<(usize, usize)>,
}

impl CorrelationSpec {
    /// Distinct pairs must use distinct (hence orthogonal) detector states.
    pub fn new(system_dim: usize, detector_dim: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if system_dim == 0 || detector_dim == 0 {
            return Err(Error::InvalidSpec("dimensions must be positive".into()));
        }
        if pairs.is_empty() {
            return Err(Error::InvalidSpec("pair list is empty".into()));
        }
        let mut seen = HashSet::new();
        let mut detectors = HashSet::new();
        for &(s, d) in &pairs {
            if s >= system_dim || d >= detector_dim {
                return Err(Error::InvalidSpec(format!(
                    "pair ({s}, {d}) out of range for {system_dim}x{detector_dim}"
                )));
            }
            if !seen.insert((s, d)) {
                return Err(Error::InvalidSpec(format!("duplicate pair ({s}, {d})")));
            }
            if !detectors.insert(d) {
                return Err(Error::InvalidSpec(format!(
                    "detector state {d} is shared by two pairs"
                )));
            }
        }
        Ok(Self { system_dim, detector_dim, pairs })
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn detector_dim(&self) -> usize {
        self.detector_dim
    }

    /// Dimension of the joint system ⊗ detector space.
    pub fn dim(&self) -> usize {
        self.system_dim * self.detector_dim
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Samples of a real function on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        check_increasing(&times)?;
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Trapezoid-rule integral over the sampled range.
    pub fn trapezoid(&self) -> f64 {
        trapezoid(&self.times, &self.values)
    }
}

/// `M = Σ |s⟩⊗|d⟩⟨d|⊗⟨s|`, certified as a projector.
pub fn build_correlation_projector(spec: &CorrelationSpec) -> Result<DenseOperator> {
    let n = spec.dim();
    let mut matrix = DMatrix::<C64>::zeros(n, n);
    for &(s, d) in spec.pairs() {
        let idx = s * spec.detector_dim + d;
        matrix[(idx, idx)] = C64::new(1.0, 0.0);
    }
    DenseOperator::certified(matrix, Flags::PROJECTOR)
}

fn check_model(spec: &CorrelationSpec, h: &PiecewiseHamiltonian) -> Result<()> {
    check_dim(spec.dim(), h.dim())
}

/// Heisenberg-picture `M(t) = U†(0,t) M U(0,t)`.
pub fn evolved_projector(
    m: &DenseOperator,
    h: &PiecewiseHamiltonian,
    t: f64,
) -> Result<DenseOperator> {
    let u = propagator(h, 0.0, t)?;
    heisenberg(m, &u)
}

fn clamp_probability(p: f64) -> Result<f64> {
    if !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&p) {
        return Err(Error::Certification {
            what: "probability range",
            residual: if p < 0.0 { -p } else { p - 1.0 },
            tolerance: CLAMP_TOL,
        });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `P_M(t) = ⟨ψ0|M(t)|ψ0⟩` at each of `times` (which must be non-negative and
/// strictly increasing).
pub fn pm_of_t(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    psi0: &StateVector,
    times: &[f64],
) -> Result<TimeSeries> {
    check_model(spec, h)?;
    check_dim(spec.dim(), psi0.dim())?;
    let m = build_correlation_projector(spec)?;
    probability_series(&m, h, psi0, times)
}

fn probability_series(
    op: &DenseOperator,
    h: &PiecewiseHamiltonian,
    psi0: &StateVector,
    times: &[f64],
) -> Result<TimeSeries> {
    check_increasing(times)?;
    let values = times
        .iter()
        .map(|&t| {
            let op_t = evolved_projector(op, h, t)?;
            clamp_probability(expectation(&op_t, psi0)?)
        })
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new(times.to_vec(), values)
}

/// Finite-difference time density `m(t) = dP_M/dt`.
///
/// Second-order central differences in the interior and second-order
/// one-sided differences at the ends. Negative values are kept.
pub fn m_of_t(series: &TimeSeries) -> Result<TimeSeries> {
    let n = series.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {n}")));
    }
    let dt = uniform_spacing(series.times())?;
    let v = series.values();
    let mut d = Vec::with_capacity(n);
    d.push((-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt));
    for i in 1..n - 1 {
        d.push((v[i + 1] - v[i - 1]) / (2.0 * dt));
    }
    d.push((3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt));
    TimeSeries::new(series.times().to_vec(), d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutatorNorms {
    /// `‖[M(t1), M(t1)]‖`, identically zero.
    pub same_time_norm: f64,
    /// `‖[M(t1), M(t2)]‖`.
    pub two_time_norm: f64,
}

/// Spectral norms of the same-time and two-time commutators of `M(t)`.
pub fn commutator_diagnostics(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    t1: f64,
    t2: f64,
) -> Result<CommutatorNorms> {
    if t1 == t2 {
        return Err(Error::InvalidArgument("commutator times must differ".into()));
    }
    check_model(spec, h)?;
    let m = build_correlation_projector(spec)?;
    let m1 = evolved_projector(&m, h, t1)?;
    let m2 = evolved_projector(&m, h, t2)?;
    Ok(CommutatorNorms {
        same_time_norm: m1.commutator(&m1)?.spectral_norm(),
        two_time_norm: m1.commutator(&m2)?.spectral_norm(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationDiagnostics {
    /// `P_M(t) + P_{1-M}(t)` on the grid.
    pub fixed_time_sum: TimeSeries,
    /// Trapezoid integral of `P_M(t)` over the grid.
    pub time_integral: f64,
}

impl NormalizationDiagnostics {
    /// `max_t |P_M(t) + P_{1-M}(t) - 1|`.
    pub fn max_fixed_time_deviation(&self) -> f64 {
        self.fixed_time_sum.values().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Contrasts normalization at fixed time with the (absent) normalization over
/// time. `P_{1-M}` is evaluated independently from the evolved complement.
pub fn normalization_diagnostics(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    psi0: &StateVector,
    t_grid: &[f64],
) -> Result<NormalizationDiagnostics> {
    check_model(spec, h)?;
    check_dim(spec.dim(), psi0.dim())?;
    if t_grid.len() >= 2 {
        uniform_spacing(t_grid)?;
    }
    let m = build_correlation_projector(spec)?;
    let detected = probability_series(&m, h, psi0, t_grid)?;
    let missed = probability_series(&m.complement(), h, psi0, t_grid)?;
    let sums = detected.values().iter().zip(missed.values()).map(|(a, b)| a + b).collect();
    Ok(NormalizationDiagnostics {
        fixed_time_sum: TimeSeries::new(t_grid.to_vec(), sums)?,
        time_integral: detected.trapezoid(),
    })
}

/// Trapezoid rule over arbitrary (sorted) abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `n` equally spaced samples on `[t0, t1]` inclusive.
pub fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => {
            let dt = (t1 - t0) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { t1 } else { t0 + i as f64 * dt }).collect()
        }
    }
}

fn check_increasing(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("non-finite time".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    Ok(())
}

fn uniform_spacing(times: &[f64]) -> Result<f64> {
    check_increasing(times)?;
    let n = times.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > UNIFORM_REL_TOL * dt) {
        return Err(Error::NonUniformSpacing);
    }
    Ok(dt)
}
