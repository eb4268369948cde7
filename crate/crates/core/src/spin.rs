//! Two-spin detector model.
//!
//! A spin-½ system `a|↑⟩ + b|↓⟩` is watched by a spin-½ detector that starts
//! in `|↑'⟩` and evolves under `H = g(t) σ_x' (1 − σ_z)`, with `g` constant on
//! `[0, T)` and zero afterwards. The joint space is ordered system ⊗ detector
//! (index `2·s + d`, with `↑ = 0`, `↓ = 1`), so the generator is built as
//! `(1 − σ_z) ⊗ σ_x'`. When the system is `|↓⟩` the detector precesses at
//! angular frequency `2g`.

use std::f64::consts::PI;

use crate::detector::CorrelationSpec;
use crate::error::{Error, Result};
use crate::hilbert::{DenseOperator, PiecewiseHamiltonian, StateVector, Tensor, C64};

/// How the coupling strength `g` relates to the coupling time `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GConvention {
    /// `g = π/T`: the detector completes a full 2π turn over `[0, T]`.
    #[default]
    FullTurn,
    /// `g = π/(4T)`: the detector reaches the flipped state exactly at `T`.
    FlipAtT,
}

impl GConvention {
    pub fn coupling(self, period: f64) -> f64 {
        match self {
            GConvention::FullTurn => PI / period,
            GConvention::FlipAtT => PI / (4.0 * period),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinExampleConfig {
    pub a: C64,
    pub b: C64,
    /// Coupling duration `T`.
    pub period: f64,
    pub convention: GConvention,
    /// Interval between protocol measurements.
    pub delta: f64,
}

impl SpinExampleConfig {
    pub fn new(a: C64, b: C64, period: f64, convention: GConvention, delta: f64) -> Result<Self> {
        let norm = a.norm_sqr() + b.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("|a|² + |b|² = {norm}, expected 1")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be non-negative, got {delta}")));
        }
        Ok(Self { a, b, period, convention, delta })
    }

    /// System down, `T = 1`, full-turn convention, `Δ = T/8`.
    pub fn standard() -> Self {
        Self {
            a: C64::new(0.0, 0.0),
            b: C64::new(1.0, 0.0),
            period: 1.0,
            convention: GConvention::FullTurn,
            delta: 0.125,
        }
    }

    pub fn coupling(&self) -> f64 {
        self.convention.coupling(self.period)
    }
}

impl Default for SpinExampleConfig {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinExample {
    pub psi0: StateVector,
    pub hamiltonian: PiecewiseHamiltonian,
    pub spec: CorrelationSpec,
}

pub fn build(config: &SpinExampleConfig) -> Result<SpinExample> {
    let system = StateVector::normalized(nalgebra::DVector::from_vec(vec![config.a, config.b]))?;
    let detector = StateVector::basis(2, 0)?;
    let psi0 = system.tensor(&detector);

    let g = config.coupling();
    let generator = DenseOperator::sigma_z()
        .complement()
        .tensor(&DenseOperator::sigma_x())
        .scaled(g);
    let hamiltonian = PiecewiseHamiltonian::constant(generator, 0.0, config.period)?;

    let spec = CorrelationSpec::new(2, 2, vec![(0, 0), (1, 1)])?;
    Ok(SpinExample { psi0, hamiltonian, spec })
}

/// Closed-form probability that the detector has not fired after `k`
/// measurements: `cos^{2k}(2gΔ)`. Only valid for `a = 0`, `b = 1`, and for
/// `kΔ ≤ T` (the coupling is on throughout).
pub fn analytic_survival(config: &SpinExampleConfig, k: u32) -> Result<f64> {
    if config.a.norm() > 1e-12 {
        return Err(Error::InvalidArgument(
            "closed-form survival requires a = 0".into(),
        ));
    }
    let c = (2.0 * config.coupling() * config.delta).cos();
    Ok(c.powi(2).powi(k as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::expectation;

    #[test]
    fn generator_annihilates_system_up() {
        let cfg = SpinExampleConfig { a: C64::new(1.0, 0.0), b: C64::new(0.0, 0.0), ..Default::default() };
        let model = build(&cfg).unwrap();
        let g = model.hamiltonian.generator_at(0.5).unwrap();
        let out = g.apply(model.psi0.amplitudes()).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn generator_layout() {
        let model = build(&SpinExampleConfig::standard()).unwrap();
        let g = model.hamiltonian.generator_at(0.0).unwrap();
        let two_g = 2.0 * PI;
        // only the |down> block couples |down up'> (2) and |down down'> (3)
        assert!((g.matrix()[(2, 3)].re - two_g).abs() < 1e-14);
        assert!((g.matrix()[(3, 2)].re - two_g).abs() < 1e-14);
        assert_eq!(g.matrix()[(0, 1)].norm(), 0.0);
        assert!(model.hamiltonian.generator_at(1.0).is_none());
        assert_eq!(model.psi0.amplitudes()[2], C64::new(1.0, 0.0));
        let m = crate::detector::build_correlation_projector(&model.spec).unwrap();
        assert_eq!(expectation(&m, &model.psi0).unwrap(), 0.0);
    }

    #[test]
    fn analytic_survival_values() {
        let mut cfg = SpinExampleConfig::standard();
        for k in 0..10 {
            let s = analytic_survival(&cfg, k).unwrap();
            assert!((s - 0.5f64.powi(k as i32)).abs() < 1e-15);
        }
        cfg.delta = 0.0;
        assert_eq!(analytic_survival(&cfg, 17).unwrap(), 1.0);
        cfg.delta = 0.01;
        let s = analytic_survival(&cfg, 100).unwrap();
        assert!((s - 0.6737).abs() < 1e-3);
    }

    #[test]
    fn analytic_survival_rejects_nonzero_a() {
        let cfg = SpinExampleConfig {
            a: C64::new(0.6, 0.0),
            b: C64::new(0.8, 0.0),
            ..Default::default()
        };
        assert!(analytic_survival(&cfg, 1).is_err());
    }

    #[test]
    fn config_validation() {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        assert!(SpinExampleConfig::new(one, one, 1.0, GConvention::FullTurn, 0.1).is_err());
        assert!(SpinExampleConfig::new(z, one, 0.0, GConvention::FullTurn, 0.1).is_err());
        assert!(SpinExampleConfig::new(z, one, 1.0, GConvention::FullTurn, -0.1).is_err());
        assert!(SpinExampleConfig::new(z, one, 1.0, GConvention::FlipAtT, 0.1).is_ok());
    }
}
