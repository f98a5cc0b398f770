use num_complex::Complex64;
use rand::Rng;

use super::anneal::{anneal, calibrate_t0, Landscape, StageRecord};
use super::{ControlProblem, CostKind, McRng, PipelineConfig};
use crate::error::Result;
use crate::propagator::{allowed_segments, evolve_continuous};
use crate::protocol::{Control, JumpProtocol};

#[derive(Debug, Clone)]
pub struct CbmcResult {
    pub protocol: JumpProtocol,
    pub cost: f64,
    pub t0: f64,
    pub stages: Vec<StageRecord>,
}

struct JumpLandscape<'a> {
    problem: &'a ControlProblem,
    kind: CostKind,
    protocol: JumpProtocol,
    cost: f64,
    trial: JumpProtocol,
    trial_cost: f64,
    last_step: f64,
    best: JumpProtocol,
    psi: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl<'a> JumpLandscape<'a> {
    fn new(problem: &'a ControlProblem, kind: CostKind, protocol: JumpProtocol, cost: f64) -> Self {
        let d = problem.dim();
        JumpLandscape {
            problem,
            kind,
            trial: protocol.clone(),
            best: protocol.clone(),
            protocol,
            cost,
            trial_cost: cost,
            last_step: 0.0,
            psi: vec![Complex64::default(); d],
            scratch: vec![Complex64::default(); d],
        }
    }

    /// Cost of `self.trial`, or `None` if it switches both controls off.
    fn evaluate_trial(&mut self) -> Option<f64> {
        let segments = allowed_segments(&self.trial).ok()?;
        self.psi.copy_from_slice(&self.problem.transfer.psi_init);
        for (seg, pair) in segments {
            self.problem.eigs.evolve(&mut self.psi, pair, seg.duration(), &mut self.scratch);
        }
        Some(self.problem.cost(self.kind, &self.psi))
    }
}

impl Landscape for JumpLandscape<'_> {
    fn cost(&self) -> f64 {
        self.cost
    }

    /// Shifts one jump by a signed amount of magnitude at most `scale * tau`.
    fn propose(&mut self, rng: &mut McRng, scale: f64) -> Option<f64> {
        let nj = self.protocol.j.jumps.len();
        let total = nj + self.protocol.k.jumps.len();
        let idx = rng.random_range(0..total);
        let (control, i) = if idx < nj { (Control::J, idx) } else { (Control::K, idx - nj) };
        let tau = self.protocol.tau;
        let magnitude = rng.random::<f64>() * scale * tau;
        let shift = if rng.random::<bool>() { magnitude } else { -magnitude };
        self.last_step = magnitude;
        let jumps = &self.protocol.trace(control).jumps;
        let lower = if i > 0 { jumps[i - 1] } else { 0.0 };
        let upper = jumps.get(i + 1).copied().unwrap_or(tau);
        let t = jumps[i] + shift;
        if !(t > lower && t < upper) {
            return None;
        }
        self.trial.clone_from(&self.protocol);
        self.trial.trace_mut(control).jumps[i] = t;
        self.trial_cost = self.evaluate_trial()?;
        Some(self.trial_cost)
    }

    fn accept(&mut self) {
        std::mem::swap(&mut self.protocol, &mut self.trial);
        self.cost = self.trial_cost;
    }

    fn record_best(&mut self) {
        self.best.clone_from(&self.protocol);
    }

    fn last_step(&self) -> f64 {
        self.last_step
    }
}

/// Anneals the jump times of `initial` with a fixed jump count. A protocol
/// without jumps is returned unchanged.
pub fn cbmc(problem: &ControlProblem, initial: &JumpProtocol, cfg: &PipelineConfig, rng: &mut McRng) -> Result<CbmcResult> {
    let psi = evolve_continuous(&problem.transfer.psi_init, initial, &problem.eigs)?;
    let cost = problem.cost(cfg.cost, &psi);
    let jumps = initial.jump_count();
    if jumps == 0 {
        return Ok(CbmcResult { protocol: initial.clone(), cost, t0: 0.0, stages: Vec::new() });
    }
    let bound = cfg.bound()?;
    let mut land = JumpLandscape::new(problem, cfg.cost, initial.clone(), cost);
    let est = calibrate_t0(&mut land, cfg.calibration_samples, cfg.target_acceptance, bound.fraction(1.0), rng)?;
    let schedule = cfg.schedule(est.t0, cfg.cbmc_sweeps, jumps)?;
    let out = anneal(&mut land, &schedule, |r| bound.fraction(r), rng);
    log::debug!("cbmc: {jumps} jumps, T0={:.3e}, cost {cost:.6} -> {:.6}", est.t0, out.best_cost);
    Ok(CbmcResult { protocol: land.best, cost: out.best_cost, t0: est.t0, stages: out.stages })
}
