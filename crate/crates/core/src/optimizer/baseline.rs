use num_complex::Complex64;

use super::ControlProblem;
use crate::error::Result;
use crate::hamiltonian::diagonalize;

/// Largest step count tried by [`adiabatic_baseline`].
const MAX_STEPS: usize = 1 << 16;
const STEP_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineResult {
    pub dist_state: f64,
    pub steps: usize,
    pub converged: bool,
}

/// `D_S` after a linear sweep of the normalized couplings from the initial to the
/// target ratio, approximated by `steps` midpoint piecewise-constant steps.
pub fn adiabatic_distance(problem: &ControlProblem, tau: f64, steps: usize) -> Result<f64> {
    let (j0, k0) = problem.transfer.r_init.couplings();
    let (j1, k1) = problem.transfer.r_target.couplings();
    let steps = steps.max(1);
    let dt = tau / steps as f64;
    let mut psi = problem.transfer.psi_init.clone();
    let mut scratch = vec![Complex64::default(); psi.len()];
    for s in 0..steps {
        let x = (s as f64 + 0.5) / steps as f64;
        let op = problem.eigs.operator(j0 + x * (j1 - j0), k0 + x * (k1 - k0));
        diagonalize(&op)?.evolve(&mut psi, dt, &mut scratch);
    }
    Ok(problem.transfer.dist_state(&psi))
}

/// Doubles the step count from `steps` until halving it changes `D_S` by less than 1e-3.
pub fn adiabatic_baseline(problem: &ControlProblem, tau: f64, steps: usize) -> Result<BaselineResult> {
    let mut steps = steps.max(1);
    let mut prev = adiabatic_distance(problem, tau, steps)?;
    while steps < MAX_STEPS {
        steps *= 2;
        let d = adiabatic_distance(problem, tau, steps)?;
        if (d - prev).abs() < STEP_TOLERANCE {
            return Ok(BaselineResult { dist_state: d, steps, converged: true });
        }
        prev = d;
    }
    log::warn!("adiabatic baseline not converged at {steps} steps");
    Ok(BaselineResult { dist_state: prev, steps, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    #[test]
    fn zero_time_is_distance_one() {
        let p = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.0, 1.0).unwrap();
        assert!((adiabatic_distance(&p, 0.0, 8).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slow_sweep_is_adiabatic() {
        let p = ControlProblem::xxz(LatticeSpec::open(2), 2, -1.0, 1.0).unwrap();
        let r = adiabatic_baseline(&p, 200.0, 64).unwrap();
        assert!(r.converged);
        assert!(r.dist_state < 0.05, "{}", r.dist_state);
    }
}
