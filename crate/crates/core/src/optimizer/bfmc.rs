use rand::Rng;

use super::anneal::{anneal, calibrate_t0, Landscape, StageRecord};
use super::{ControlProblem, CostKind, McRng, PipelineConfig};
use crate::error::{Error, Result};
use crate::hamiltonian::diagonalize;
use crate::linalg::ComplexMatrix;
use crate::propagator::PrefixCache;
use crate::protocol::{Control, Controls, PiecewiseProtocol};

#[derive(Debug, Clone)]
pub struct BfmcResult {
    pub protocol: PiecewiseProtocol,
    pub cost: f64,
    pub t0: f64,
    /// Best cost after each stage.
    pub stages: Vec<StageRecord>,
}

struct ContinuousLandscape<'a> {
    problem: &'a ControlProblem,
    kind: CostKind,
    dt: f64,
    values: Vec<Controls>,
    unitaries: Vec<ComplexMatrix>,
    prefix: PrefixCache,
    cost: f64,
    pending: Option<(usize, Controls, ComplexMatrix, f64)>,
    last_step: f64,
    best: Vec<Controls>,
}

impl<'a> ContinuousLandscape<'a> {
    fn new(problem: &'a ControlProblem, kind: CostKind, tau: f64, values: Vec<Controls>) -> Result<Self> {
        let dt = tau / values.len() as f64;
        let unitaries = values.iter().map(|v| interval_unitary(problem, *v, dt)).collect::<Result<Vec<_>>>()?;
        let mut prefix = PrefixCache::new(&problem.transfer.psi_init, values.len());
        let cost = problem.cost(kind, prefix.evolve_with(0, |k| &unitaries[k]));
        let best = values.clone();
        Ok(ContinuousLandscape {
            problem,
            kind,
            dt,
            values,
            unitaries,
            prefix,
            cost,
            pending: None,
            last_step: 0.0,
            best,
        })
    }
}

fn interval_unitary(problem: &ControlProblem, v: Controls, dt: f64) -> Result<ComplexMatrix> {
    Ok(diagonalize(&problem.eigs.operator(v.j, v.k))?.unitary(dt))
}

impl Landscape for ContinuousLandscape<'_> {
    fn cost(&self) -> f64 {
        self.cost
    }

    /// Adds a signed amount of magnitude at most `scale` to one control value,
    /// clamped to `[0, 1]`.
    fn propose(&mut self, rng: &mut McRng, scale: f64) -> Option<f64> {
        let i = rng.random_range(0..self.values.len());
        let control = Control::BOTH[rng.random_range(0..2)];
        let magnitude = rng.random::<f64>() * scale;
        let delta = if rng.random::<bool>() { magnitude } else { -magnitude };
        let mut next = self.values[i];
        next.set(control, (next.get(control) + delta).clamp(0.0, 1.0));
        self.last_step = magnitude;
        if next.j == 0.0 && next.k == 0.0 {
            self.pending = None;
            return None;
        }
        let u = interval_unitary(self.problem, next, self.dt).ok()?;
        let unitaries = &self.unitaries;
        let psi = self.prefix.propose_with(i, |k| if k == i { &u } else { &unitaries[k] });
        let cost = self.problem.cost(self.kind, psi);
        self.pending = Some((i, next, u, cost));
        Some(cost)
    }

    fn accept(&mut self) {
        if let Some((i, next, u, cost)) = self.pending.take() {
            self.values[i] = next;
            self.unitaries[i] = u;
            self.prefix.commit(i);
            self.cost = cost;
        }
    }

    fn record_best(&mut self) {
        self.best.clone_from(&self.values);
    }

    fn last_step(&self) -> f64 {
        self.last_step
    }
}

/// Anneals `n` continuous interval values from a uniformly random start.
pub fn bfmc(problem: &ControlProblem, tau: f64, n: usize, cfg: &PipelineConfig, rng: &mut McRng) -> Result<BfmcResult> {
    if n == 0 {
        return Err(Error::Protocol("at least one interval is required".into()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Protocol(format!("total time {tau} must be positive")));
    }
    let values: Vec<Controls> = (0..n)
        .map(|_| loop {
            let v = Controls { j: rng.random::<f64>(), k: rng.random::<f64>() };
            if v.j > 0.0 || v.k > 0.0 {
                break v;
            }
        })
        .collect();
    let mut land = ContinuousLandscape::new(problem, cfg.cost, tau, values)?;
    let est = calibrate_t0(&mut land, cfg.calibration_samples, cfg.target_acceptance, 1.0, rng)?;
    let schedule = cfg.schedule(est.t0, cfg.bfmc_sweeps, 2 * n)?;
    let out = anneal(&mut land, &schedule, |r| r, rng);
    log::debug!("bfmc N={n}: T0={:.3e}, best {:.6}", est.t0, out.best_cost);
    let protocol = PiecewiseProtocol::new(tau, land.best)?;
    Ok(BfmcResult { protocol, cost: out.best_cost, t0: est.t0, stages: out.stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::linalg::State;
    use rand::SeedableRng;

    fn evolve(problem: &ControlProblem, p: &PiecewiseProtocol) -> State {
        let mut psi = problem.transfer.psi_init.clone();
        let mut out = psi.clone();
        for v in &p.values {
            interval_unitary(problem, *v, p.dt()).unwrap().apply(&psi, &mut out);
            std::mem::swap(&mut psi, &mut out);
        }
        psi
    }

    #[test]
    fn vanishing_time_leaves_distance_at_one() {
        let problem = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.5, 1.5).unwrap();
        let cfg = PipelineConfig { bfmc_sweeps: 2, decay: 0.7, ..Default::default() };
        let res = bfmc(&problem, 1e-7, 4, &cfg, &mut McRng::seed_from_u64(0)).unwrap();
        assert!((res.cost - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reported_cost_matches_reevolution_and_best_is_monotone() {
        let problem = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.5, 1.5).unwrap();
        let cfg = PipelineConfig { bfmc_sweeps: 5, decay: 0.8, ..Default::default() };
        let res = bfmc(&problem, 1.0, 6, &cfg, &mut McRng::seed_from_u64(3)).unwrap();
        let d = problem.transfer.dist_state(&evolve(&problem, &res.protocol));
        assert!((d - res.cost).abs() < 1e-10);
        assert!(res.stages.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
        assert!(res.protocol.values.iter().all(|v| v.j > 0.0 || v.k > 0.0));
    }

    #[test]
    fn zero_intervals_are_rejected() {
        let problem = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.5, 1.5).unwrap();
        assert!(bfmc(&problem, 1.0, 0, &PipelineConfig::default(), &mut McRng::seed_from_u64(0)).is_err());
    }
}
