//! Generic simulated-annealing driver.
//!
//! A stage runs `moves_per_stage` Metropolis proposals at a fixed
//! pseudotemperature; `T` decays geometrically stage by stage until it falls
//! below `final_ratio * T0`, after which a number of frozen stages run at `T = 0`.

use rand::Rng;

use super::McRng;
use crate::error::{Error, Result};

/// Returned by [`calibrate_t0`] when no sampled move increases the cost.
pub const MIN_T0: f64 = 1e-12;

/// Something the annealer can perturb. Proposals are evaluated against the
/// committed state and only take effect on [`Landscape::accept`].
pub trait Landscape {
    fn cost(&self) -> f64;

    /// Draws a random move of magnitude controlled by `scale` and returns its
    /// cost, or `None` when the move is invalid and rejected outright.
    fn propose(&mut self, rng: &mut McRng, scale: f64) -> Option<f64>;

    fn accept(&mut self);

    /// Snapshot the committed state as the best seen so far.
    fn record_best(&mut self);

    /// Magnitude of the last proposed move, when meaningful.
    fn last_step(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub decay: f64,
    pub decay_stages: usize,
    pub frozen_stages: usize,
    pub moves_per_stage: usize,
}

impl AnnealSchedule {
    /// `decay_stages` is the smallest `n` with `decay^n < final_ratio`.
    pub fn new(t0: f64, decay: f64, final_ratio: f64, frozen_stages: usize, moves_per_stage: usize) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::Config(format!("decay {decay} must lie in (0, 1)")));
        }
        if !(t0 > 0.0) {
            return Err(Error::Config(format!("initial temperature {t0} must be positive")));
        }
        if !(final_ratio > 0.0 && final_ratio < 1.0) {
            return Err(Error::Config(format!("final temperature ratio {final_ratio} must lie in (0, 1)")));
        }
        if moves_per_stage == 0 {
            return Err(Error::Config("at least one move per stage is required".into()));
        }
        let mut decay_stages = (final_ratio.ln() / decay.ln()).ceil() as usize;
        while decay.powi(decay_stages as i32) >= final_ratio {
            decay_stages += 1;
        }
        Ok(AnnealSchedule { t0, decay, decay_stages, frozen_stages, moves_per_stage })
    }

    pub fn stages(&self) -> usize {
        self.decay_stages + self.frozen_stages
    }

    pub fn temperature(&self, stage: usize) -> f64 {
        if stage < self.decay_stages {
            self.t0 * self.decay.powi(stage as i32)
        } else {
            0.0
        }
    }

    /// `T / T0` while decaying; frozen stages keep the last decayed ratio so
    /// that move sizes stay finite.
    pub fn move_ratio(&self, stage: usize) -> f64 {
        self.decay.powi(stage.min(self.decay_stages) as i32)
    }
}

/// Temperature-dependent bound on jump-time shifts, as a fraction of `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveBound {
    pub initial: f64,
    pub floor: f64,
}

impl Default for MoveBound {
    fn default() -> Self {
        MoveBound { initial: 0.8, floor: 0.02 }
    }
}

impl MoveBound {
    pub fn new(initial: f64, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor < initial && initial <= 1.0) {
            return Err(Error::Config(format!("move bound needs 0 < floor ({floor}) < initial ({initial}) <= 1")));
        }
        Ok(MoveBound { initial, floor })
    }

    /// Decays with the temperature ratio and never drops below the floor.
    pub fn fraction(&self, temperature_ratio: f64) -> f64 {
        (self.initial * temperature_ratio).max(self.floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub temperature: f64,
    pub scale: f64,
    pub best_cost: f64,
    pub cost: f64,
    pub proposed: usize,
    pub accepted: usize,
    pub uphill_accepted: usize,
    pub max_accepted_step: f64,
}

#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    pub best_cost: f64,
    pub stages: Vec<StageRecord>,
}

/// Runs the schedule; `scale` maps `T / T0` to the landscape's move scale.
pub fn anneal<L: Landscape>(
    land: &mut L,
    schedule: &AnnealSchedule,
    scale: impl Fn(f64) -> f64,
    rng: &mut McRng,
) -> AnnealOutcome {
    let mut best_cost = land.cost();
    land.record_best();
    let mut stages = Vec::with_capacity(schedule.stages());
    for stage in 0..schedule.stages() {
        let temperature = schedule.temperature(stage);
        let move_scale = scale(schedule.move_ratio(stage));
        let mut rec = StageRecord {
            stage,
            temperature,
            scale: move_scale,
            best_cost,
            cost: land.cost(),
            proposed: 0,
            accepted: 0,
            uphill_accepted: 0,
            max_accepted_step: 0.0,
        };
        for _ in 0..schedule.moves_per_stage {
            rec.proposed += 1;
            let Some(trial) = land.propose(rng, move_scale) else { continue };
            let delta = trial - land.cost();
            let take = if delta <= 0.0 {
                true
            } else if temperature > 0.0 {
                rng.random::<f64>() < (-delta / temperature).exp()
            } else {
                false
            };
            if take {
                rec.accepted += 1;
                if delta > 0.0 {
                    rec.uphill_accepted += 1;
                }
                rec.max_accepted_step = rec.max_accepted_step.max(land.last_step());
                land.accept();
                if land.cost() < best_cost {
                    best_cost = land.cost();
                    land.record_best();
                }
            }
        }
        rec.best_cost = best_cost;
        rec.cost = land.cost();
        stages.push(rec);
    }
    AnnealOutcome { best_cost, stages }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T0Estimate {
    pub t0: f64,
    /// Mean `exp(-dC / T0)` over the sampled cost-increasing moves.
    pub acceptance: f64,
    pub uphill_samples: usize,
    /// No sampled move increased the cost; `t0` is [`MIN_T0`].
    pub degenerate: bool,
}

/// Initial temperature giving mean acceptance `target` over cost-increasing moves
/// sampled at the stage-zero move `scale`.
pub fn calibrate_t0<L: Landscape>(
    land: &mut L,
    samples: usize,
    target: f64,
    scale: f64,
    rng: &mut McRng,
) -> Result<T0Estimate> {
    if samples == 0 {
        return Err(Error::Config("temperature calibration needs at least one sample".into()));
    }
    let base = land.cost();
    let deltas: Vec<f64> = (0..samples)
        .filter_map(|_| land.propose(rng, scale))
        .map(|c| c - base)
        .filter(|&d| d > 0.0)
        .collect();
    t0_from_deltas(&deltas, target)
}

/// Solves `mean(exp(-d / T)) = target` for `T` by bisection in `ln T`.
pub fn t0_from_deltas(deltas: &[f64], target: f64) -> Result<T0Estimate> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config(format!("target acceptance {target} must lie in (0, 1)")));
    }
    if deltas.is_empty() {
        log::info!("no cost-increasing move sampled; using minimal initial temperature");
        return Ok(T0Estimate { t0: MIN_T0, acceptance: 1.0, uphill_samples: 0, degenerate: true });
    }
    let mean_acc = |t: f64| deltas.iter().map(|d| (-d / t).exp()).sum::<f64>() / deltas.len() as f64;
    let k = -target.ln();
    let lo_d = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_d = deltas.iter().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = ((lo_d / k).ln(), (hi_d / k).ln());
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mean_acc(mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t0 = (0.5 * (lo + hi)).exp();
    Ok(T0Estimate { t0, acceptance: mean_acc(t0), uphill_samples: deltas.len(), degenerate: false })
}
