use rand::Rng;

use super::anneal::{anneal, calibrate_t0, Landscape, StageRecord};
use super::{ControlProblem, CostKind, McRng, PipelineConfig};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::propagator::{PrefixCache, UnitaryCache};
use crate::protocol::{Control, ControlPair, PiecewiseProtocol};

#[derive(Debug, Clone)]
pub struct RungRecord {
    pub intervals: usize,
    pub t0: f64,
    pub start_cost: f64,
    pub best_cost: f64,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone)]
pub struct DbmcResult {
    pub protocol: PiecewiseProtocol,
    pub pairs: Vec<ControlPair>,
    pub cost: f64,
    pub rungs: Vec<RungRecord>,
}

struct BangLandscape<'a> {
    problem: &'a ControlProblem,
    kind: CostKind,
    level: &'a [ComplexMatrix; 3],
    pairs: Vec<ControlPair>,
    prefix: PrefixCache,
    cost: f64,
    pending: Option<(usize, ControlPair, f64)>,
    best: Vec<ControlPair>,
}

impl<'a> BangLandscape<'a> {
    fn new(problem: &'a ControlProblem, kind: CostKind, level: &'a [ComplexMatrix; 3], pairs: Vec<ControlPair>) -> Self {
        let mut prefix = PrefixCache::new(&problem.transfer.psi_init, pairs.len());
        let cost = problem.cost(kind, prefix.evolve_with(0, |k| &level[pairs[k].index()]));
        let best = pairs.clone();
        BangLandscape { problem, kind, level, pairs, prefix, cost, pending: None, best }
    }

    /// Every existing neighbor of interval `i` carries the same pair as `i`.
    fn on_plateau(&self, i: usize) -> bool {
        let p = self.pairs[i];
        let left = (i > 0).then(|| self.pairs[i - 1]);
        let right = self.pairs.get(i + 1).copied();
        (left.is_some() || right.is_some()) && left.is_none_or(|q| q == p) && right.is_none_or(|q| q == p)
    }
}

impl Landscape for BangLandscape<'_> {
    fn cost(&self) -> f64 {
        self.cost
    }

    fn propose(&mut self, rng: &mut McRng, _scale: f64) -> Option<f64> {
        let n = self.pairs.len();
        let mut i = rng.random_range(0..n);
        if self.on_plateau(i) {
            i = rng.random_range(0..n);
        }
        let control = Control::BOTH[rng.random_range(0..2)];
        let Some(next) = self.pairs[i].flipped(control) else {
            self.pending = None;
            return None;
        };
        let (pairs, level) = (&self.pairs, self.level);
        let psi = self.prefix.propose_with(i, |k| {
            let p = if k == i { next } else { pairs[k] };
            &level[p.index()]
        });
        let cost = self.problem.cost(self.kind, psi);
        self.pending = Some((i, next, cost));
        Some(cost)
    }

    fn accept(&mut self) {
        if let Some((i, next, cost)) = self.pending.take() {
            self.pairs[i] = next;
            self.prefix.commit(i);
            self.cost = cost;
        }
    }

    fn record_best(&mut self) {
        self.best.clone_from(&self.pairs);
    }
}

/// Anneals bang values at every rung of the cache's ladder from the initial
/// interval count upward; each rung starts from the previous optimum with every
/// interval split in two.
pub fn dbmc(
    problem: &ControlProblem,
    cache: &UnitaryCache,
    cfg: &PipelineConfig,
    rng: &mut McRng,
    initial: Option<&PiecewiseProtocol>,
) -> Result<DbmcResult> {
    let ladder = cache.ladder();
    let mut pairs = match initial {
        Some(p) => {
            if !ladder.contains(&p.intervals()) {
                return Err(Error::Protocol(format!(
                    "initial protocol has {} intervals, not on the ladder {ladder:?}",
                    p.intervals()
                )));
            }
            if (p.tau - cache.tau()).abs() > 1e-12 * cache.tau() {
                return Err(Error::Protocol(format!("initial tau {} differs from cache tau {}", p.tau, cache.tau())));
            }
            p.to_pairs()?
        }
        None => (0..cache.n_min()).map(|_| ControlPair::ALL[rng.random_range(0..3)]).collect(),
    };
    let mut rungs = Vec::new();
    let mut cost = f64::INFINITY;
    let start = pairs.len();
    for n in ladder.into_iter().filter(|&n| n >= start) {
        while pairs.len() < n {
            pairs = pairs.iter().flat_map(|&p| [p, p]).collect();
        }
        let level = cache.level(n).expect("rung is on the ladder");
        let mut land = BangLandscape::new(problem, cfg.cost, level, pairs);
        let start_cost = land.cost;
        let est = calibrate_t0(&mut land, cfg.calibration_samples, cfg.target_acceptance, 1.0, rng)?;
        let schedule = cfg.schedule(est.t0, cfg.dbmc_sweeps, n)?;
        let out = anneal(&mut land, &schedule, |r| r, rng);
        log::debug!("dbmc rung N={n}: T0={:.3e} cost {start_cost:.6} -> {:.6}", est.t0, out.best_cost);
        cost = out.best_cost;
        pairs = land.best;
        rungs.push(RungRecord { intervals: n, t0: est.t0, start_cost, best_cost: out.best_cost, stages: out.stages });
    }
    Ok(DbmcResult { protocol: PiecewiseProtocol::from_pairs(cache.tau(), &pairs), pairs, cost, rungs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use crate::propagator::evolve_pairs;
    use rand::SeedableRng;

    fn quick() -> PipelineConfig {
        PipelineConfig { dbmc_sweeps: 10, frozen_stages: 3, decay: 0.85, ..Default::default() }
    }

    #[test]
    fn tiny_ladder_matches_exhaustive_enumeration() {
        let problem = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.5, 1.5).unwrap();
        let tau = 1.3;
        let cache = UnitaryCache::new(&problem.eigs, tau, 4, 4).unwrap();
        let mut best = f64::INFINITY;
        for code in 0..81usize {
            let pairs: Vec<_> = (0..4).map(|i| ControlPair::ALL[(code / 3usize.pow(i)) % 3]).collect();
            let psi = evolve_pairs(&problem.transfer.psi_init, &pairs, &cache).unwrap();
            best = best.min(problem.transfer.dist_state(&psi));
        }
        let mut rng = McRng::seed_from_u64(11);
        let res = dbmc(&problem, &cache, &quick(), &mut rng, None).unwrap();
        assert!((res.cost - best).abs() < 1e-12, "{} vs {}", res.cost, best);
    }

    #[test]
    fn reported_cost_matches_fresh_evolution_and_rungs_do_not_worsen() {
        let problem = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.0, 1.0).unwrap();
        let cache = UnitaryCache::new(&problem.eigs, 1.0, 4, 16).unwrap();
        let mut rng = McRng::seed_from_u64(3);
        let res = dbmc(&problem, &cache, &quick(), &mut rng, None).unwrap();
        assert_eq!(res.rungs.iter().map(|r| r.intervals).collect::<Vec<_>>(), vec![4, 8, 16]);
        for w in res.rungs.windows(2) {
            assert!(w[1].best_cost <= w[0].best_cost + 1e-12);
        }
        let psi = evolve_pairs(&problem.transfer.psi_init, &res.pairs, &cache).unwrap();
        assert!((problem.transfer.dist_state(&psi) - res.cost).abs() < 1e-12);
    }

    #[test]
    fn optimal_initial_protocol_is_not_made_worse() {
        let problem = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.0, 1.0).unwrap();
        let cache = UnitaryCache::new(&problem.eigs, 0.8, 4, 4).unwrap();
        let mut best = (f64::INFINITY, vec![]);
        for code in 0..81usize {
            let pairs: Vec<_> = (0..4).map(|i| ControlPair::ALL[(code / 3usize.pow(i)) % 3]).collect();
            let d = problem.transfer.dist_state(&evolve_pairs(&problem.transfer.psi_init, &pairs, &cache).unwrap());
            if d < best.0 {
                best = (d, pairs);
            }
        }
        let init = PiecewiseProtocol::from_pairs(0.8, &best.1);
        let mut rng = McRng::seed_from_u64(5);
        let res = dbmc(&problem, &cache, &quick(), &mut rng, Some(&init)).unwrap();
        assert!(res.cost <= best.0);
    }

    #[test]
    fn initial_protocol_off_the_ladder_is_rejected() {
        let problem = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.0, 1.0).unwrap();
        let cache = UnitaryCache::new(&problem.eigs, 1.0, 4, 8).unwrap();
        let init = PiecewiseProtocol::from_pairs(1.0, &[ControlPair::Both; 6]);
        let mut rng = McRng::seed_from_u64(5);
        assert!(dbmc(&problem, &cache, &quick(), &mut rng, Some(&init)).is_err());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let problem = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.0, 1.2).unwrap();
        let cache = UnitaryCache::new(&problem.eigs, 1.0, 4, 8).unwrap();
        let run = |seed| dbmc(&problem, &cache, &quick(), &mut McRng::seed_from_u64(seed), None).unwrap();
        let (a, b) = (run(9), run(9));
        assert_eq!(a.pairs, b.pairs);
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
    }
}
