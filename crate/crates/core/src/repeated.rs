//! Repeated projective measurement of the correlation projector.
//!
//! `M` is measured at `t_k = kΔ`. A null result projects the state with
//! `1 − M` and renormalizes it before the next interval of evolution. Because
//! every null outcome leaves the same state, the whole detection-time
//! distribution follows from one deterministic pass over the null branch.
//!
//! The same probabilities are also available from the explicit operator
//! chains `A_k` and `B_k` ([`operator_chain`]), which serve as an
//! independent cross-check of the recursion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::detector::{build_correlation_projector, CorrelationSpec};
use crate::error::{Error, Result};
use crate::hilbert::{
    check_dim, expectation, propagator, DenseOperator, Flags, PiecewiseHamiltonian, StateVector,
};

/// Default survival probability below which a run stops.
pub const DEFAULT_SURVIVAL_FLOOR: f64 = 1e-12;

/// Null-branch probability below which the branch counts as exhausted.
const EXHAUSTED: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSchedule {
    delta: f64,
    k_max: usize,
    survival_floor: f64,
}

impl DetectionSchedule {
    pub fn new(delta: f64, k_max: usize, survival_floor: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        if k_max == 0 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&survival_floor) {
            return Err(Error::InvalidArgument(format!(
                "survival_floor must lie in [0, 1), got {survival_floor}"
            )));
        }
        Ok(Self { delta, k_max, survival_floor })
    }

    /// Schedule with [`DEFAULT_SURVIVAL_FLOOR`].
    pub fn with_default_floor(delta: f64, k_max: usize) -> Result<Self> {
        Self::new(delta, k_max, DEFAULT_SURVIVAL_FLOOR)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn survival_floor(&self) -> f64 {
        self.survival_floor
    }

    /// `t_k = kΔ`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.delta
    }
}

/// Detection and survival probabilities at `t_1, t_2, …`.
///
/// Index `j` of each array holds step `k = j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionDistribution {
    pub times: Vec<f64>,
    pub p_detect: Vec<f64>,
    pub survival: Vec<f64>,
    /// The run stopped before `k_max` because survival fell below the floor.
    pub truncated: bool,
}

impl DetectionDistribution {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `P(↑, t_k)` for 1-based `k`, zero past the end of a truncated run.
    pub fn detect_at(&self, k: usize) -> f64 {
        k.checked_sub(1).and_then(|j| self.p_detect.get(j)).copied().unwrap_or(0.0)
    }

    /// `P(↓, t_k)` for 1-based `k`; `k = 0` gives 1.
    pub fn survival_at(&self, k: usize) -> f64 {
        match k {
            0 => 1.0,
            _ => self
                .survival
                .get(k - 1)
                .or(self.survival.last())
                .copied()
                .unwrap_or(1.0),
        }
    }

    /// Survival after the last recorded step.
    pub fn final_survival(&self) -> f64 {
        self.survival.last().copied().unwrap_or(1.0)
    }

    /// `max_k |Σ_{j≤k} P(↑,t_j) + P(↓,t_k) − 1|`.
    pub fn telescoping_residual(&self) -> f64 {
        let mut cumulative = 0.0;
        let mut worst: f64 = 0.0;
        for (p, s) in self.p_detect.iter().zip(&self.survival) {
            cumulative += p;
            worst = worst.max((cumulative + s - 1.0).abs());
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOutcome {
    pub p_detect: f64,
    /// Normalized post-measurement state on a null result; `None` when the
    /// null branch has (numerically) zero probability.
    pub null_state: Option<StateVector>,
}

/// One interval of evolution by `u` followed by a measurement of `m`.
pub fn collapse_step(
    psi: &StateVector,
    m: &DenseOperator,
    u: &DenseOperator,
) -> Result<CollapseOutcome> {
    if !m.is_projector() {
        return Err(Error::MissingFlag("projector"));
    }
    check_dim(m.dim(), psi.dim())?;
    let evolved = psi.evolve(u)?;
    let phi = evolved.amplitudes();
    let hit = m.apply(phi)?;
    let miss = phi - &hit;
    let p_hit = hit.norm_squared();
    let p_miss = miss.norm_squared();
    let total = p_hit + p_miss;
    let p_null = p_miss / total;
    let null_state = if p_null < EXHAUSTED {
        None
    } else {
        Some(StateVector::normalized(miss)?)
    };
    Ok(CollapseOutcome { p_detect: p_hit / total, null_state })
}

fn check_inputs(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    psi0: &StateVector,
) -> Result<()> {
    check_dim(spec.dim(), h.dim())?;
    check_dim(spec.dim(), psi0.dim())
}

/// Walks the null branch, yielding the conditional detection probability of
/// each step until the schedule ends or the branch dies.
fn null_branch(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    psi0: &StateVector,
    sched: &DetectionSchedule,
    mut visit: impl FnMut(usize, f64) -> bool,
) -> Result<()> {
    check_inputs(spec, h, psi0)?;
    let m = build_correlation_projector(spec)?;
    let mut state = psi0.clone();
    for k in 1..=sched.k_max() {
        let u = propagator(h, sched.time(k - 1), sched.time(k))?;
        let outcome = collapse_step(&state, &m, &u)?;
        let go_on = visit(k, outcome.p_detect);
        match outcome.null_state {
            Some(next) if go_on => state = next,
            _ => break,
        }
    }
    Ok(())
}

/// Full detection-time distribution of the repeated-measurement protocol.
pub fn detection_distribution(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    psi0: &StateVector,
    sched: &DetectionSchedule,
) -> Result<DetectionDistribution> {
    let mut dist = DetectionDistribution {
        times: Vec::with_capacity(sched.k_max()),
        p_detect: Vec::with_capacity(sched.k_max()),
        survival: Vec::with_capacity(sched.k_max()),
        truncated: false,
    };
    let mut survival = 1.0;
    null_branch(spec, h, psi0, sched, |k, p_cond| {
        dist.times.push(sched.time(k));
        dist.p_detect.push(survival * p_cond);
        survival *= 1.0 - p_cond;
        dist.survival.push(survival);
        let stop = survival < sched.survival_floor() || survival == 0.0;
        if stop && k < sched.k_max() {
            dist.truncated = true;
        }
        !stop
    })?;
    // an exhausted null branch also ends the run early
    if dist.len() < sched.k_max() {
        dist.truncated = true;
    }
    Ok(dist)
}

/// Explicit operators whose expectations in `ψ0` give `P(↑, t_k)` and
/// `P(↓, t_k)`.
///
/// Neither is a projector in general, and they are not unitarily related to
/// their `k = 0` counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorChain {
    pub a: DenseOperator,
    pub b: DenseOperator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainValues {
    pub a_k: f64,
    pub b_k: f64,
}

/// Builds `A_k = K† U_k† M U_k K` and `B_k = K† U_k† (1−M) U_k K` with
/// `K = (1−M) U_{k−1} ⋯ (1−M) U_1`.
pub fn chain_operators(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    sched: &DetectionSchedule,
    k: usize,
) -> Result<OperatorChain> {
    check_dim(spec.dim(), h.dim())?;
    if k == 0 || k > sched.k_max() {
        return Err(Error::InvalidArgument(format!(
            "chain index {k} outside 1..={}",
            sched.k_max()
        )));
    }
    let m = build_correlation_projector(spec)?;
    let miss = m.complement();
    let n = spec.dim();
    let mut kernel = nalgebra::DMatrix::identity(n, n);
    for j in 1..k {
        let u = propagator(h, sched.time(j - 1), sched.time(j))?;
        kernel = miss.matrix() * u.matrix() * kernel;
    }
    let u = propagator(h, sched.time(k - 1), sched.time(k))?;
    let outer = u.matrix() * &kernel;
    let a = outer.adjoint() * m.matrix() * &outer;
    let b = outer.adjoint() * miss.matrix() * &outer;
    Ok(OperatorChain {
        a: DenseOperator::certified(a, Flags::HERMITIAN)?,
        b: DenseOperator::certified(b, Flags::HERMITIAN)?,
    })
}

/// `⟨ψ0|A_k|ψ0⟩` and `⟨ψ0|B_k|ψ0⟩`.
pub fn operator_chain(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    psi0: &StateVector,
    sched: &DetectionSchedule,
    k: usize,
) -> Result<ChainValues> {
    check_inputs(spec, h, psi0)?;
    let chain = chain_operators(spec, h, sched, k)?;
    Ok(ChainValues {
        a_k: expectation(&chain.a, psi0)?,
        b_k: expectation(&chain.b, psi0)?,
    })
}

/// Energy spread `dE = sqrt(⟨H²⟩ − ⟨H⟩²)` of `psi` under the generator active
/// at `t` (zero where no segment is active).
pub fn energy_variance(h: &PiecewiseHamiltonian, psi: &StateVector, t: f64) -> Result<f64> {
    check_dim(h.dim(), psi.dim())?;
    let Some(g) = h.generator_at(t) else {
        return Ok(0.0);
    };
    let h_psi = g.apply(psi.amplitudes())?;
    let mean = expectation(g, psi)?;
    let mean_sq = h_psi.norm_squared();
    Ok((mean_sq - mean * mean).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoSweepRow {
    pub k: usize,
    pub delta: f64,
    /// Survival after the last measurement (at `τ` unless the run truncated).
    pub survival_at_tau: f64,
    pub delta_e: f64,
    /// `Δ · dE`.
    pub resolvability: f64,
}

/// Survival at a fixed horizon `τ` as the measurement count `k` (and hence
/// `Δ = τ/k`) varies. Rows are independent and evaluated in parallel; the
/// output order follows `k_values`.
pub fn zeno_sweep(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    psi0: &StateVector,
    tau: f64,
    k_values: &[usize],
) -> Result<Vec<ZenoSweepRow>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if k_values.contains(&0) {
        return Err(Error::InvalidArgument("k values must be at least 1".into()));
    }
    check_inputs(spec, h, psi0)?;
    let delta_e = energy_variance(h, psi0, 0.0)?;
    k_values
        .par_iter()
        .map(|&k| {
            let delta = tau / k as f64;
            let sched = DetectionSchedule::with_default_floor(delta, k)?;
            let dist = detection_distribution(spec, h, psi0, &sched)?;
            Ok(ZenoSweepRow {
                k,
                delta,
                survival_at_tau: dist.final_survival(),
                delta_e,
                resolvability: delta * delta_e,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `Δ · dE < 1`: measurements come too fast and freeze the detector.
    Frozen,
    Resolvable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvabilityReport {
    /// `1/dE`; infinite when `dE = 0`.
    pub delta_threshold: f64,
    pub regimes: Vec<Regime>,
}

/// Classifies sweep rows against the threshold `Δ > 1/dE`.
pub fn resolvability_report(rows: &[ZenoSweepRow]) -> Result<ResolvabilityReport> {
    let first = rows.first().ok_or(Error::EmptyScan)?;
    let de = first.delta_e;
    if rows.iter().any(|r| (r.delta_e - de).abs() > 1e-12 * de.abs().max(1.0)) {
        return Err(Error::InvalidArgument("rows do not share one energy spread".into()));
    }
    let delta_threshold = if de > 0.0 { 1.0 / de } else { f64::INFINITY };
    let regimes = rows
        .iter()
        .map(|r| if de > 0.0 && r.delta * de >= 1.0 { Regime::Resolvable } else { Regime::Frozen })
        .collect();
    Ok(ResolvabilityReport { delta_threshold, regimes })
}

/// Monte Carlo record of when the detector fired over many repetitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledDetections {
    /// `counts[j]` shots fired at step `k = j + 1`.
    pub counts: Vec<u64>,
    /// Shots that never fired within the schedule.
    pub undetected: u64,
    pub shots: u64,
}

impl SampledDetections {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.shots as f64).collect()
    }
}

/// Samples single runs of the protocol with a seeded generator. The
/// conditional detection probabilities come from the same null-branch walk
/// as [`detection_distribution`]; each shot then draws its outcomes step by
/// step.
pub fn sample_detections(
    spec: &CorrelationSpec,
    h: &PiecewiseHamiltonian,
    psi0: &StateVector,
    sched: &DetectionSchedule,
    shots: u64,
    seed: u64,
) -> Result<SampledDetections> {
    let mut conditional = Vec::with_capacity(sched.k_max());
    null_branch(spec, h, psi0, sched, |_, p| {
        conditional.push(p);
        true
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; conditional.len()];
    let mut undetected = 0;
    for _ in 0..shots {
        match conditional.iter().position(|&p| rng.random::<f64>() < p) {
            Some(j) => counts[j] += 1,
            None => undetected += 1,
        }
    }
    Ok(SampledDetections { counts, undetected, shots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Tensor;

    fn correlated_spec() -> CorrelationSpec {
        CorrelationSpec::new(2, 2, vec![(0, 0), (1, 1)]).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(DetectionSchedule::new(0.0, 3, 0.0).is_err());
        assert!(DetectionSchedule::new(-1.0, 3, 0.0).is_err());
        assert!(DetectionSchedule::new(0.1, 0, 0.0).is_err());
        assert!(DetectionSchedule::new(0.1, 3, 1.0).is_err());
        assert!(DetectionSchedule::new(0.1, 3, 0.0).is_ok());
    }

    #[test]
    fn state_inside_range_is_detected_at_once() {
        let m = build_correlation_projector(&correlated_spec()).unwrap();
        let psi = StateVector::basis(4, 3).unwrap();
        let out = collapse_step(&psi, &m, &DenseOperator::identity(4)).unwrap();
        assert_eq!(out.p_detect, 1.0);
        assert!(out.null_state.is_none());
    }

    #[test]
    fn orthogonal_state_is_never_detected() {
        let m = build_correlation_projector(&correlated_spec()).unwrap();
        let psi = StateVector::basis(4, 1).unwrap();
        let out = collapse_step(&psi, &m, &DenseOperator::identity(4)).unwrap();
        assert_eq!(out.p_detect, 0.0);
        assert_eq!(out.null_state.unwrap(), psi);
    }

    #[test]
    fn collapse_requires_projector() {
        let psi = StateVector::basis(2, 0).unwrap();
        let u = DenseOperator::identity(2);
        assert_eq!(
            collapse_step(&psi, &DenseOperator::sigma_x(), &u),
            Err(Error::MissingFlag("projector"))
        );
    }

    #[test]
    fn correlated_start_fires_first_then_truncates() {
        let spec = correlated_spec();
        let psi = StateVector::basis(4, 0).unwrap();
        let h = PiecewiseHamiltonian::zero(4);
        let sched = DetectionSchedule::with_default_floor(0.1, 5).unwrap();
        let dist = detection_distribution(&spec, &h, &psi, &sched).unwrap();
        assert_eq!(dist.p_detect, vec![1.0]);
        assert!(dist.truncated);
        assert_eq!(dist.detect_at(2), 0.0);
        assert_eq!(dist.survival_at(4), 0.0);
    }

    #[test]
    fn frozen_orthogonal_start_never_fires() {
        let spec = correlated_spec();
        let psi = StateVector::basis(2, 1).unwrap().tensor(&StateVector::basis(2, 0).unwrap());
        let h = PiecewiseHamiltonian::zero(4);
        let sched = DetectionSchedule::with_default_floor(0.1, 8).unwrap();
        let dist = detection_distribution(&spec, &h, &psi, &sched).unwrap();
        assert_eq!(dist.len(), 8);
        assert!(!dist.truncated);
        assert!(dist.p_detect.iter().all(|&p| p == 0.0));
        assert!(dist.survival.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn energy_spread_vanishes_without_dynamics() {
        let psi = StateVector::basis(4, 2).unwrap();
        assert_eq!(energy_variance(&PiecewiseHamiltonian::zero(4), &psi, 0.3).unwrap(), 0.0);
        let h = PiecewiseHamiltonian::constant(DenseOperator::sigma_z(), 0.0, 1.0).unwrap();
        let up = StateVector::basis(2, 0).unwrap();
        assert!(energy_variance(&h, &up, 0.5).unwrap() < 1e-15);
        // outside the segment H = 0
        let plus = StateVector::normalized(nalgebra::DVector::from_element(2, 1.0.into())).unwrap();
        assert!((energy_variance(&h, &plus, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(energy_variance(&h, &plus, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_spread_rows_are_all_frozen() {
        let rows: Vec<_> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&delta| ZenoSweepRow { k: 1, delta, survival_at_tau: 1.0, delta_e: 0.0, resolvability: 0.0 })
            .collect();
        let report = resolvability_report(&rows).unwrap();
        assert!(report.delta_threshold.is_infinite());
        assert!(report.regimes.iter().all(|r| *r == Regime::Frozen));
        assert_eq!(resolvability_report(&[]), Err(Error::EmptyScan));
    }

    #[test]
    fn chain_index_is_checked() {
        let sched = DetectionSchedule::with_default_floor(0.1, 3).unwrap();
        let h = PiecewiseHamiltonian::zero(4);
        assert!(chain_operators(&correlated_spec(), &h, &sched, 0).is_err());
        assert!(chain_operators(&correlated_spec(), &h, &sched, 4).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let spec = correlated_spec();
        let psi = StateVector::basis(4, 2).unwrap();
        let g = DenseOperator::sigma_z().complement().tensor(&DenseOperator::sigma_x()).scaled(1.0);
        let h = PiecewiseHamiltonian::constant(g, 0.0, 10.0).unwrap();
        let sched = DetectionSchedule::with_default_floor(0.2, 6).unwrap();
        let a = sample_detections(&spec, &h, &psi, &sched, 500, 7).unwrap();
        let b = sample_detections(&spec, &h, &psi, &sched, 500, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.iter().sum::<u64>() + a.undetected, 500);
    }
}
