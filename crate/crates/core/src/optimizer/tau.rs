use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{cbmc, dbmc, ControlProblem, McRng, PipelineConfig};
use crate::error::{Error, Result};
use crate::propagator::{evolve_continuous, UnitaryCache};
use crate::protocol::{to_jump, JumpProtocol};

/// Best result of the DBMC then CBMC pipeline at one total time.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub tau: f64,
    /// Optimized cost, re-evaluated by a fresh evolution.
    pub cost: f64,
    pub dist_state: f64,
    pub dist_energy: f64,
    pub protocol: JumpProtocol,
    pub dbmc_cost: f64,
    pub cbmc_cost: f64,
}

/// Runs `cfg.restarts` independent DBMC + CBMC chains at total time `tau`.
pub fn run_pipeline(problem: &ControlProblem, tau: f64, cfg: &PipelineConfig, rng: &mut McRng) -> Result<PipelineOutcome> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Protocol(format!("total time {tau} must be positive")));
    }
    let cache = UnitaryCache::new(&problem.eigs, tau, cfg.n_min, cfg.n_max)?;
    let mut best: Option<PipelineOutcome> = None;
    for _ in 0..cfg.restarts {
        let discrete = dbmc(problem, &cache, cfg, rng, None)?;
        let jumps = to_jump(&discrete.protocol)?;
        let refined = cbmc(problem, &jumps, cfg, rng)?;
        let psi = evolve_continuous(&problem.transfer.psi_init, &refined.protocol, &problem.eigs)?;
        let report = problem.transfer.report(&psi);
        let outcome = PipelineOutcome {
            tau,
            cost: problem.cost(cfg.cost, &psi),
            dist_state: report.dist_state,
            dist_energy: report.dist_energy,
            protocol: refined.protocol,
            dbmc_cost: discrete.cost,
            cbmc_cost: refined.cost,
        };
        if best.as_ref().is_none_or(|b| outcome.cost < b.cost) {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchPhase {
    Extrapolating,
    Scaling,
    Bisecting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub tau: f64,
    pub dist_state: f64,
    pub phase: SearchPhase,
}

#[derive(Debug, Clone)]
pub struct TauCritical {
    pub tau_critical: f64,
    pub outcome: PipelineOutcome,
    /// Root of a quadratic fit to the probe history near `D_S = 0`.
    pub tau_extrapolated: Option<f64>,
    pub history: Vec<Probe>,
}

struct Search<'a> {
    problem: &'a ControlProblem,
    cfg: &'a PipelineConfig,
    history: Vec<Probe>,
}

impl Search<'_> {
    fn probe(&mut self, tau: f64, phase: SearchPhase, rng: &mut McRng) -> Result<PipelineOutcome> {
        if self.history.len() >= self.cfg.max_probes {
            return Err(self.failure(format!("no tau within tolerance after {} probes", self.cfg.max_probes)));
        }
        let out = run_pipeline(self.problem, tau, self.cfg, rng)?;
        log::info!("probe {:>2} ({phase:?}): tau={tau:.6} D_S={:.6}", self.history.len(), out.dist_state);
        self.history.push(Probe { tau, dist_state: out.dist_state, phase });
        Ok(out)
    }

    fn failure(&self, message: String) -> Error {
        Error::TauSearch { message, history: self.history.iter().map(|p| (p.tau, p.dist_state)).collect() }
    }
}

/// Shortest total time at which the pipeline reaches `D_S = epsilon` within
/// `epsilon_tol`: extrapolate linearly from a short time, grow `tau` in
/// proportion to the remaining distance until the target is passed, then bisect.
pub fn find_tau_critical(problem: &ControlProblem, cfg: &PipelineConfig, rng: &mut McRng) -> Result<TauCritical> {
    cfg.validate()?;
    let (eps, tol) = (cfg.epsilon, cfg.epsilon_tol);
    let mut search = Search { problem, cfg, history: Vec::new() };
    let mut tau = cfg.tau_initial;
    let mut out = search.probe(tau, SearchPhase::Extrapolating, rng)?;
    let mut low: Option<PipelineOutcome> = None;
    let mut high: Option<PipelineOutcome> = None;

    let finish = |out: PipelineOutcome, history: Vec<Probe>| {
        let points: Vec<(f64, f64)> = history.iter().map(|p| (p.tau, p.dist_state)).collect();
        TauCritical { tau_critical: out.tau, tau_extrapolated: fit_quadratic_root(&points), outcome: out, history }
    };

    loop {
        let d = out.dist_state;
        if (d - eps).abs() <= tol {
            return Ok(finish(out, search.history));
        }
        let first = search.history.len() == 1;
        if d <= eps {
            high = Some(out);
        } else {
            low = Some(out);
        }
        if low.is_some() && high.is_some() {
            break;
        }
        let (next, phase) = match &high {
            Some(h) => (0.5 * h.tau, SearchPhase::Extrapolating),
            None if first && d > cfg.extrapolation_target && d < 1.0 => {
                let factor = (1.0 - cfg.extrapolation_target) / (1.0 - d);
                (tau * factor.clamp(1.0 + cfg.kappa * d, cfg.max_extrapolation), SearchPhase::Extrapolating)
            }
            None if first && d >= 1.0 => (tau * cfg.max_extrapolation, SearchPhase::Extrapolating),
            None => (tau * (1.0 + cfg.kappa * d), SearchPhase::Scaling),
        };
        tau = next;
        out = search.probe(tau, phase, rng)?;
    }

    let (mut low, mut high) = (low.expect("bracketed"), high.expect("bracketed"));
    loop {
        if high.tau <= low.tau {
            return Err(search.failure(format!(
                "bracket inverted: D_S({}) <= eps but D_S({}) > eps",
                high.tau, low.tau
            )));
        }
        let mid = 0.5 * (low.tau + high.tau);
        let out = search.probe(mid, SearchPhase::Bisecting, rng)?;
        if (out.dist_state - eps).abs() <= tol {
            return Ok(finish(out, search.history));
        }
        if out.dist_state > eps {
            low = out;
        } else {
            high = out;
        }
    }
}

/// Zero of a least-squares quadratic through the (tau, D_S) points closest to
/// zero distance; falls back to a line through two points.
pub fn fit_quadratic_root(points: &[(f64, f64)]) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(t, d)| t.is_finite() && d > 1e-6 && d < 0.5).collect();
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    pts.dedup_by(|a, b| a.0 == b.0);
    pts.truncate(5);
    let anchor = pts.first()?.0;
    match pts.len() {
        0 | 1 => None,
        2 => {
            let ((t0, d0), (t1, d1)) = (pts[0], pts[1]);
            let slope = (d1 - d0) / (t1 - t0);
            (slope < 0.0).then(|| t0 - d0 / slope)
        }
        _ => {
            let mut ata = Matrix3::<f64>::zeros();
            let mut atb = Vector3::<f64>::zeros();
            for &(t, d) in &pts {
                let row = Vector3::new(1.0, t, t * t);
                ata += row * row.transpose();
                atb += row * d;
            }
            let c = ata.lu().solve(&atb)?;
            let (a, b, q) = (c[0], c[1], c[2]);
            let roots: Vec<f64> = if q.abs() < 1e-14 {
                if b == 0.0 { vec![] } else { vec![-a / b] }
            } else {
                let disc = b * b - 4.0 * q * a;
                if disc < 0.0 {
                    // No crossing: report the vertex, the closest approach to zero.
                    vec![-b / (2.0 * q)]
                } else {
                    let s = disc.sqrt();
                    vec![(-b - s) / (2.0 * q), (-b + s) / (2.0 * q)]
                }
            };
            roots.into_iter().filter(|r| r.is_finite() && *r > 0.0).min_by(|x, y| {
                (x - anchor).abs().total_cmp(&(y - anchor).abs())
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_root_of_exact_parabola() {
        // D = (3 - t)^2 / 9 vanishes at t = 3.
        let pts: Vec<_> = [1.5, 2.0, 2.4, 2.7].iter().map(|&t: &f64| (t, (3.0 - t).powi(2) / 9.0)).collect();
        let r = fit_quadratic_root(&pts).unwrap();
        assert!((r - 3.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn linear_fallback_with_two_points() {
        let r = fit_quadratic_root(&[(1.0, 0.3), (2.0, 0.1)]).unwrap();
        assert!((r - 2.5).abs() < 1e-12);
        assert_eq!(fit_quadratic_root(&[(1.0, 0.3)]), None);
    }
}
