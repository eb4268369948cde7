//! Free-particle arrival at the origin on a periodic 1-D grid.
//!
//! Units are ħ = m = 1. Evolution is exact in the discrete Fourier basis, so
//! the only numerical error comes from quadrature and finite differences in
//! time. The detector region `x > 0` uses a trapezoidal split: the grid point
//! at `x = 0` counts half toward `P_+` and half toward its complement.
//!
//! Sign convention: `J(0, t) = Im(ψ* ∂ψ/∂x)` at the origin, so that
//! `dP_+/dt = J(0, t)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlannerScalar};

use crate::detector::trapezoid;
use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Number of grid points at each edge checked for wrap-around.
pub const EDGE_POINTS: usize = 5;

/// Maximum probability allowed in the edge cells.
pub const EDGE_TOL: f64 = 1e-8;

const NORM_TOL: f64 = 1e-10;

/// Uniform periodic grid `x_j = x_min + j·dx`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    x_min: f64,
    dx: f64,
    origin: usize,
}

impl Grid {
    /// Grid covering `[x_min, x_max)` with `n` points. `n` must be a power of
    /// two and `x = 0` must be a grid point.
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("grid size {n} is not a power of two ≥ 4")));
        }
        if !(x_min < 0.0 && x_max > 0.0 && x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid [{x_min}, {x_max}) must straddle the origin"
            )));
        }
        let dx = (x_max - x_min) / n as f64;
        let steps = -x_min / dx;
        let origin = steps.round();
        if (steps - origin).abs() > 1e-9 {
            return Err(Error::InvalidArgument("origin does not fall on a grid point".into()));
        }
        Ok(Self { n, x_min, dx, origin: origin as usize })
    }

    /// `[-64, 64)` with 2048 points.
    pub fn standard() -> Self {
        Self::new(2048, -64.0, 64.0).expect("valid standard grid")
    }

    /// `[-256, 256)` with 16384 points: wide enough that the reference
    /// Gaussian stays clear of the boundary up to `t = 60`, and fine enough for
    /// the continuity check to hold at `1e-6`.
    pub fn wide() -> Self {
        Self::new(16384, -256.0, 256.0).expect("valid wide grid")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    /// Index of the grid point at `x = 0`.
    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    /// Momentum of FFT bin `k` (standard frequency ordering).
    pub fn momentum(&self, k: usize) -> f64 {
        let dp = 2.0 * PI / (self.n as f64 * self.dx);
        if k < self.n / 2 {
            k as f64 * dp
        } else {
            (k as f64 - self.n as f64) * dp
        }
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.momentum(k)).collect()
    }
}

/// Wavefunction sampled on a [`Grid`], normalized so that `Σ|ψ|²dx = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavepacket {
    grid: Grid,
    amplitudes: Vec<C64>,
}

impl GridWavepacket {
    pub fn new(grid: Grid, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: amplitudes.len() });
        }
        let packet = Self { grid, amplitudes };
        let norm = packet.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalizable(norm));
        }
        Ok(packet)
    }

    /// Rescales nonzero amplitudes so that `Σ|ψ|²dx = 1`.
    pub fn normalized(grid: Grid, mut amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: amplitudes.len() });
        }
        let norm = (amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Unnormalizable(norm));
        }
        amplitudes.iter_mut().for_each(|z| *z /= norm);
        Ok(Self { grid, amplitudes })
    }

    /// `ψ(x) ∝ exp(−(x−x0)²/(4σ²) + i p0 x)`; `σ` is the position standard
    /// deviation of `|ψ|²`.
    pub fn gaussian(grid: Grid, x0: f64, sigma: f64, p0: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        let amplitudes = (0..grid.len())
            .map(|j| {
                let x = grid.x(j);
                let envelope = (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp();
                C64::from_polar(envelope, p0 * x)
            })
            .collect();
        Self::normalized(grid, amplitudes)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// `Σ|ψ|²dx`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    /// `⟨x⟩`.
    pub fn centroid(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(j, z)| self.grid.x(j) * z.norm_sqr())
            .sum::<f64>()
            * self.grid.dx
    }

    /// Probability in the outermost [`EDGE_POINTS`] cells at each end.
    pub fn edge_mass(&self) -> f64 {
        let n = self.amplitudes.len();
        let edge = |range: std::ops::Range<usize>| -> f64 {
            self.amplitudes[range].iter().map(|z| z.norm_sqr()).sum()
        };
        (edge(0..EDGE_POINTS) + edge(n - EDGE_POINTS..n)) * self.grid.dx
    }

    /// Fails with [`Error::BoundaryLeak`] if the packet has reached the edges
    /// of the periodic box.
    pub fn check_boundary(&self, t: f64) -> Result<()> {
        let mass = self.edge_mass();
        if mass < EDGE_TOL {
            Ok(())
        } else {
            Err(Error::BoundaryLeak { mass, t })
        }
    }
}

/// Cached FFT plans and momenta for one grid.
#[derive(Clone)]
pub struct FreeSpace {
    grid: Grid,
    momenta: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FreeSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FreeSpace").field("grid", &self.grid).finish()
    }
}

impl FreeSpace {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlannerScalar::new();
        Self {
            grid,
            momenta: grid.momenta(),
            forward: planner.plan_fft_forward(grid.len()),
            inverse: planner.plan_fft_inverse(grid.len()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check(&self, w: &GridWavepacket) -> Result<()> {
        if w.grid == self.grid {
            Ok(())
        } else {
            Err(Error::InvalidArgument("wavepacket lives on a different grid".into()))
        }
    }

    /// Discrete Fourier coefficients `c_k = Σ_j ψ_j e^{−2πi jk/n}`.
    pub fn to_momentum(&self, w: &GridWavepacket) -> Vec<C64> {
        let mut buf = w.amplitudes.clone();
        self.forward.process(&mut buf);
        buf
    }

    fn synthesize(&self, mut coeffs: Vec<C64>) -> GridWavepacket {
        self.inverse.process(&mut coeffs);
        let scale = 1.0 / self.grid.len() as f64;
        coeffs.iter_mut().for_each(|z| *z *= scale);
        GridWavepacket { grid: self.grid, amplitudes: coeffs }
    }

    /// Exact free evolution by `t`.
    pub fn evolve(&self, w: &GridWavepacket, t: f64) -> Result<GridWavepacket> {
        self.check(w)?;
        if t == 0.0 {
            return Ok(w.clone());
        }
        let mut coeffs = self.to_momentum(w);
        free_phase(&mut coeffs, &self.momenta, t);
        Ok(self.synthesize(coeffs))
    }

    /// Probability current at the origin, with the spatial derivative taken
    /// spectrally.
    pub fn current_at_origin(&self, w: &GridWavepacket) -> Result<f64> {
        self.check(w)?;
        let coeffs = self.to_momentum(w);
        Ok(current_from_coefficients(&self.grid, &self.momenta, &coeffs, 0.0))
    }
}

fn free_phase(coeffs: &mut [C64], momenta: &[f64], t: f64) {
    for (c, &p) in coeffs.iter_mut().zip(momenta) {
        *c *= C64::from_polar(1.0, -0.5 * p * p * t);
    }
}

/// `J(0, t)` from the `t = 0` Fourier coefficients, in O(n) without an FFT.
///
/// `ψ(x_o) = (1/n) Σ_k c_k e^{2πi ok/n}` and `ψ'(x_o)` likewise with an extra
/// factor `i p_k`; the Nyquist bin is excluded from the derivative.
fn current_from_coefficients(grid: &Grid, momenta: &[f64], coeffs: &[C64], t: f64) -> f64 {
    let n = grid.len();
    let o = grid.origin();
    let mut psi = C64::new(0.0, 0.0);
    let mut dpsi = C64::new(0.0, 0.0);
    for (k, (&c, &p)) in coeffs.iter().zip(momenta).enumerate() {
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let angle = 2.0 * PI * ((o * k) % n) as f64 / n as f64 - 0.5 * p * p * t;
        let term = c * C64::from_polar(1.0, angle);
        psi += term;
        if k != n / 2 {
            dpsi += term * C64::new(0.0, p);
        }
    }
    let scale = 1.0 / n as f64;
    ((psi * scale).conj() * (dpsi * scale)).im
}

/// Free evolution of `w` by `t`.
pub fn evolve_free(w: &GridWavepacket, t: f64) -> Result<GridWavepacket> {
    FreeSpace::new(w.grid).evolve(w, t)
}

/// `P_+ = Σ_{x>0} |ψ|²dx` with the origin cell weighted ½.
pub fn p_plus(w: &GridWavepacket) -> f64 {
    let o = w.grid.origin();
    let right: f64 = w.amplitudes[o + 1..].iter().map(|z| z.norm_sqr()).sum();
    (0.5 * w.amplitudes[o].norm_sqr() + right) * w.grid.dx
}

/// `J(0) = Im(ψ* ∂ψ/∂x)` at the origin.
pub fn current_at_origin(w: &GridWavepacket) -> Result<f64> {
    FreeSpace::new(w.grid).current_at_origin(w)
}

/// Two positive-momentum Gaussians in momentum space, centered at `x = 0` at
/// `t = 0`: `√(1−w)·G(p; p1, s1) + √w·e^{iφ}·G(p; p2, s2)` with every
/// amplitude at `p ≤ 0` set to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackflowCandidate {
    pub p1: f64,
    pub p2: f64,
    pub s1: f64,
    pub s2: f64,
    pub w: f64,
    pub phi: f64,
}

impl BackflowCandidate {
    pub fn new(p1: f64, p2: f64, s1: f64, s2: f64, w: f64, phi: f64) -> Result<Self> {
        if !(p1 > 0.0 && p2 > 0.0) {
            return Err(Error::InvalidArgument(format!("momenta must be positive, got {p1}, {p2}")));
        }
        if !(s1 > 0.0 && s2 > 0.0) {
            return Err(Error::InvalidArgument(format!("widths must be positive, got {s1}, {s2}")));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!("weight {w} outside [0, 1]")));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::InvalidArgument(format!("phase {phi} outside [0, 2π)")));
        }
        Ok(Self { p1, p2, s1, s2, w, phi })
    }

    /// Same shape with every momentum scale multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.p1 * factor, self.p2 * factor, self.s1 * factor, self.s2 * factor, self.w, self.phi)
    }

    fn amplitude(&self, p: f64) -> C64 {
        if p <= 0.0 {
            return C64::new(0.0, 0.0);
        }
        let g = |p0: f64, s: f64| (2.0 * PI * s * s).powf(-0.25) * (-(p - p0).powi(2) / (4.0 * s * s)).exp();
        C64::new((1.0 - self.w).sqrt() * g(self.p1, self.s1), 0.0)
            + C64::from_polar(self.w.sqrt() * g(self.p2, self.s2), self.phi)
    }

    /// Unnormalized momentum amplitudes on the grid's FFT bins; exactly zero
    /// at every `p ≤ 0`.
    pub fn momentum_amplitudes(&self, grid: &Grid) -> Vec<C64> {
        (0..grid.len()).map(|k| self.amplitude(grid.momentum(k))).collect()
    }

    /// Fourier coefficients of the normalized packet. The `e^{i p x_min}`
    /// factor places the packet's center at `x = 0` rather than at the first
    /// grid point; it multiplies zeros by a phase, so `p ≤ 0` bins stay zero.
    pub fn coefficients(&self, grid: &Grid) -> Vec<C64> {
        let amps = self.momentum_amplitudes(grid);
        // Σ|ψ_j|²dx = (dx/n) Σ|c_k|²
        let norm = (amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx / grid.len() as f64).sqrt();
        amps.iter()
            .enumerate()
            .map(|(k, &a)| a / norm * C64::from_polar(1.0, grid.momentum(k) * grid.x_min))
            .collect()
    }

    pub fn wavepacket(&self, space: &FreeSpace) -> GridWavepacket {
        space.synthesize(self.coefficients(space.grid()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackflowResult {
    pub best: BackflowCandidate,
    pub t_star: f64,
    pub j_min: f64,
}

fn tie_key(r: &BackflowResult) -> (f64, f64, f64, f64) {
    (r.j_min, r.best.w, r.best.phi, r.t_star)
}

fn better(a: BackflowResult, b: BackflowResult) -> BackflowResult {
    let (ka, kb) = (tie_key(&a), tie_key(&b));
    let ord = ka
        .0
        .total_cmp(&kb.0)
        .then(ka.1.total_cmp(&kb.1))
        .then(ka.2.total_cmp(&kb.2))
        .then(ka.3.total_cmp(&kb.3));
    if ord.is_le() {
        a
    } else {
        b
    }
}

/// Exhaustive search for the most negative current at the origin over
/// candidates and times. Ties go to the smallest `w`, then `φ`, then `t`, so
/// the parallel reduction is order independent.
pub fn backflow_scan(
    space: &FreeSpace,
    candidates: &[BackflowCandidate],
    t_grid: &[f64],
) -> Result<BackflowResult> {
    if candidates.is_empty() || t_grid.is_empty() {
        return Err(Error::EmptyScan);
    }
    let grid = *space.grid();
    candidates
        .par_iter()
        .map(|cand| {
            let coeffs = cand.coefficients(&grid);
            t_grid
                .iter()
                .map(|&t| BackflowResult {
                    best: *cand,
                    t_star: t,
                    j_min: current_from_coefficients(&grid, &space.momenta, &coeffs, t),
                })
                .reduce(better)
                .expect("non-empty time grid")
        })
        .reduce_with(better)
        .ok_or(Error::EmptyScan)
}

/// `J(0, t)` of a candidate at each time in `t_grid`.
pub fn candidate_current(space: &FreeSpace, cand: &BackflowCandidate, t_grid: &[f64]) -> Vec<f64> {
    let coeffs = cand.coefficients(space.grid());
    t_grid
        .iter()
        .map(|&t| current_from_coefficients(space.grid(), &space.momenta, &coeffs, t))
        .collect()
}

/// The reference scan: `p1 = 1`, `p2 = 3`, `s1 = s2 = 0.5`,
/// `w ∈ {0.1, …, 0.9}`, `φ ∈ {0, π/8, …, 15π/8}`.
pub fn reference_candidates() -> Vec<BackflowCandidate> {
    let mut out = Vec::with_capacity(9 * 16);
    for i in 1..=9 {
        for j in 0..16 {
            let cand = BackflowCandidate::new(1.0, 3.0, 0.5, 0.5, i as f64 / 10.0, j as f64 * PI / 8.0)
                .expect("valid reference candidate");
            out.push(cand);
        }
    }
    out
}

/// Samples of `P_+(t)` and `J(0, t)` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalSample {
    pub t: f64,
    pub p_plus: f64,
    pub j_origin: f64,
}

/// Evaluates `P_+` and `J(0)` at each time, checking the boundary each time.
pub fn arrival_trajectory(space: &FreeSpace, w0: &GridWavepacket, times: &[f64]) -> Result<Vec<ArrivalSample>> {
    times
        .iter()
        .map(|&t| {
            let w = space.evolve(w0, t)?;
            w.check_boundary(t)?;
            Ok(ArrivalSample { t, p_plus: p_plus(&w), j_origin: space.current_at_origin(&w)? })
        })
        .collect()
}

/// `∫₀^{t_max} P_+(t) dt` by the trapezoid rule with step `dt` (the last
/// step is shortened to land on `t_max`).
pub fn time_integral_demo(space: &FreeSpace, w0: &GridWavepacket, t_max: f64, dt: f64) -> Result<f64> {
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_max must be non-negative, got {t_max}")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if t_max == 0.0 {
        return Ok(0.0);
    }
    let steps = (t_max / dt).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    if t_max - times[steps] > 1e-12 * t_max {
        times.push(t_max);
    } else {
        times[steps] = t_max;
    }
    let values = times
        .iter()
        .map(|&t| {
            let w = space.evolve(w0, t)?;
            w.check_boundary(t)?;
            Ok(p_plus(&w))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(&times, &values))
}
