//! Monte Carlo protocol optimization.
//!
//! Three annealers share one driver ([`anneal`]): [`bfmc`] over continuous
//! piecewise-constant controls, [`dbmc`] over bang values on a doubling interval
//! ladder and [`cbmc`] over jump times. [`run_pipeline`] chains DBMC into CBMC at
//! a fixed total time and [`find_tau_critical`] searches for the shortest time
//! reaching the target distance.
//!
//! All randomness flows from one [`McRng`] (ChaCha8, seeded with
//! `SeedableRng::seed_from_u64`), so a seed and a config fix the trajectory.

pub mod anneal;
mod baseline;
mod bfmc;
mod cbmc;
mod dbmc;
mod tau;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{CouplingRatio, Transfer, XxzSystem};
use crate::lattice::LatticeSpec;
use crate::propagator::ControlEigens;

pub use anneal::{anneal as run_anneal, calibrate_t0, AnnealOutcome, AnnealSchedule, Landscape, MoveBound, StageRecord, T0Estimate};
pub use baseline::{adiabatic_baseline, adiabatic_distance, BaselineResult};
pub use bfmc::{bfmc, BfmcResult};
pub use cbmc::{cbmc, CbmcResult};
pub use dbmc::{dbmc, DbmcResult, RungRecord};
pub use tau::{find_tau_critical, fit_quadratic_root, run_pipeline, PipelineOutcome, Probe, SearchPhase, TauCritical};

pub type McRng = rand_chacha::ChaCha8Rng;

/// Which normalized distance the annealers minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    #[default]
    State,
    Energy,
}

/// Numerical knobs of the optimization pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub cost: CostKind,
    pub n_min: usize,
    pub n_max: usize,
    pub decay: f64,
    /// Decay stops once `T < final_ratio * T0`.
    pub final_ratio: f64,
    pub frozen_stages: usize,
    pub dbmc_sweeps: usize,
    pub cbmc_sweeps: usize,
    pub bfmc_sweeps: usize,
    pub bound_initial: f64,
    pub bound_floor: f64,
    pub target_acceptance: f64,
    pub calibration_samples: usize,
    /// Target distance defining the critical time.
    pub epsilon: f64,
    pub epsilon_tol: f64,
    pub tau_initial: f64,
    /// Distance aimed at by the first linear extrapolation.
    pub extrapolation_target: f64,
    /// Growth factor cap of the extrapolation step.
    pub max_extrapolation: f64,
    pub kappa: f64,
    pub max_probes: usize,
    /// Independent pipeline runs per probe; the best is kept.
    pub restarts: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cost: CostKind::State,
            n_min: 4,
            n_max: 64,
            decay: 0.95,
            final_ratio: 1e-3,
            frozen_stages: 10,
            dbmc_sweeps: 50,
            cbmc_sweeps: 200,
            bfmc_sweeps: 50,
            bound_initial: 0.8,
            bound_floor: 0.02,
            target_acceptance: 0.85,
            calibration_samples: 200,
            epsilon: 0.02,
            epsilon_tol: 0.002,
            tau_initial: 0.25,
            extrapolation_target: 0.2,
            max_extrapolation: 16.0,
            kappa: 0.5,
            max_probes: 40,
            restarts: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} must lie in (0, 1)", self.epsilon));
        }
        if !(self.epsilon_tol > 0.0 && self.epsilon_tol < self.epsilon) {
            return bad(format!("epsilon_tol {} must lie in (0, epsilon)", self.epsilon_tol));
        }
        if !(self.tau_initial > 0.0 && self.tau_initial.is_finite()) {
            return bad(format!("tau_initial {} must be positive", self.tau_initial));
        }
        if !(self.extrapolation_target > self.epsilon && self.extrapolation_target < 1.0) {
            return bad("extrapolation_target must lie in (epsilon, 1)".into());
        }
        if !(self.kappa > 0.0) || !(self.max_extrapolation > 1.0) {
            return bad("kappa must be positive and max_extrapolation above 1".into());
        }
        if self.dbmc_sweeps == 0 || self.cbmc_sweeps == 0 || self.bfmc_sweeps == 0 {
            return bad("sweep factors must be at least 1".into());
        }
        if self.restarts == 0 || self.max_probes == 0 {
            return bad("restarts and max_probes must be at least 1".into());
        }
        AnnealSchedule::new(1.0, self.decay, self.final_ratio, self.frozen_stages, 1)?;
        self.bound()?;
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad(format!("target_acceptance {} must lie in (0, 1)", self.target_acceptance));
        }
        if !self.n_min.is_power_of_two() || !self.n_max.is_power_of_two() || self.n_min > self.n_max {
            return bad(format!("interval ladder {}..{} must be powers of two", self.n_min, self.n_max));
        }
        Ok(())
    }

    pub fn bound(&self) -> Result<MoveBound> {
        MoveBound::new(self.bound_initial, self.bound_floor)
    }

    /// Schedule for a landscape with `params` variational parameters.
    pub fn schedule(&self, t0: f64, sweeps: usize, params: usize) -> Result<AnnealSchedule> {
        AnnealSchedule::new(t0, self.decay, self.final_ratio, self.frozen_stages, sweeps * params.max(1))
    }
}

/// A state-transfer problem with its prediagonalized controls.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub eigs: Arc<ControlEigens>,
    pub transfer: Transfer,
}

impl ControlProblem {
    pub fn new(eigs: Arc<ControlEigens>, transfer: Transfer) -> Result<Self> {
        if eigs.dim() != transfer.dim() {
            return Err(Error::DimensionMismatch { expected: eigs.dim(), actual: transfer.dim() });
        }
        Ok(ControlProblem { eigs, transfer })
    }

    /// Ground state at `ln r_i` to ground state at `ln r_t` on an `L x L` lattice.
    pub fn xxz(lattice: LatticeSpec, occupants: usize, ln_r_init: f64, ln_r_target: f64) -> Result<Self> {
        let system = XxzSystem::new(lattice, occupants)?;
        let eigs = Arc::new(ControlEigens::new(&system)?);
        Self::on_system(&system, eigs, ln_r_init, ln_r_target)
    }

    /// Reuses the control eigensystems of `system` across many transfers.
    pub fn on_system(system: &XxzSystem, eigs: Arc<ControlEigens>, ln_r_init: f64, ln_r_target: f64) -> Result<Self> {
        let transfer =
            Transfer::new(system, CouplingRatio::from_ln(ln_r_init)?, CouplingRatio::from_ln(ln_r_target)?)?;
        Self::new(eigs, transfer)
    }

    pub fn dim(&self) -> usize {
        self.transfer.dim()
    }

    pub fn cost(&self, kind: CostKind, psi: &[Complex64]) -> f64 {
        match kind {
            CostKind::State => self.transfer.dist_state(psi),
            CostKind::Energy => self.transfer.dist_energy(psi),
        }
    }
}
