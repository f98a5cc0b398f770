//! Conjugate-state propagation and switching functions.
//!
//! For the cost `C = 1 - |<t|psi(tau)>|^2` the conjugate state ends at
//! `Pi(tau) = -2 <t|psi(tau)> |t>` and evolves under the same Hamiltonian as the
//! state. The derivative of the cost with respect to control `g_a` at time `s` is
//! `Im <Pi(s)|O_a|psi(s)>`, so a minimizing control sits at its maximum where
//! that value is negative and at its minimum where it is positive.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, State};
use crate::propagator::{allowed_segments, ControlEigens};
use crate::protocol::{Control, ControlPair, JumpProtocol, Segment};

pub const DEFAULT_SAMPLES: usize = 2048;
/// Sign tolerance relative to the largest switching magnitude on the trace.
pub const SIGN_TOLERANCE: f64 = 1e-6;
/// A switching function pinned within tolerance for longer than this fraction
/// of `tau` is reported as a possible singular arc.
pub const SINGULAR_FRACTION: f64 = 0.05;

/// `Pi(tau) = -2 <target|psi(tau)> target`
pub fn conjugate_final(psi_tau: &[Complex64], psi_target: &[Complex64]) -> State {
    let amp = linalg::inner(psi_target, psi_tau);
    psi_target.iter().map(|t| -2.0 * amp * t).collect()
}

/// A state known at one end of every segment, evaluable anywhere in `[0, tau]`.
#[derive(Debug, Clone)]
pub struct Trajectory<'a> {
    eigs: &'a ControlEigens,
    tau: f64,
    segments: Vec<(Segment, ControlPair)>,
    /// Segment-start states for forward trajectories, segment-end states for backward ones.
    anchors: Vec<State>,
    backward: bool,
    end: State,
}

impl<'a> Trajectory<'a> {
    /// `psi(t)` from `psi(0) = psi0`.
    pub fn forward(psi0: &[Complex64], protocol: &JumpProtocol, eigs: &'a ControlEigens) -> Result<Self> {
        protocol.validate()?;
        let segments = allowed_segments(protocol)?;
        let mut psi = psi0.to_vec();
        let mut scratch = vec![Complex64::default(); psi.len()];
        let mut anchors = Vec::with_capacity(segments.len());
        for (seg, pair) in &segments {
            anchors.push(psi.clone());
            eigs.evolve(&mut psi, *pair, seg.duration(), &mut scratch);
        }
        Ok(Trajectory { eigs, tau: protocol.tau, segments, anchors, backward: false, end: psi })
    }

    /// `Pi(t)` from `Pi(tau) = pi_tau`, evolved backward with the inverse segment unitaries.
    pub fn backward(pi_tau: &[Complex64], protocol: &JumpProtocol, eigs: &'a ControlEigens) -> Result<Self> {
        protocol.validate()?;
        let segments = allowed_segments(protocol)?;
        let mut pi = pi_tau.to_vec();
        let mut scratch = vec![Complex64::default(); pi.len()];
        let mut anchors = vec![Vec::new(); segments.len()];
        for (k, (seg, pair)) in segments.iter().enumerate().rev() {
            anchors[k] = pi.clone();
            eigs.evolve(&mut pi, *pair, -seg.duration(), &mut scratch);
        }
        Ok(Trajectory { eigs, tau: protocol.tau, segments, anchors, backward: true, end: pi })
    }

    /// The state at the far end: `psi(tau)` going forward, `Pi(0)` going backward.
    pub fn far_end(&self) -> &[Complex64] {
        &self.end
    }

    pub fn at(&self, t: f64) -> Result<State> {
        if !(0.0..=self.tau).contains(&t) {
            return Err(Error::TimeOutOfRange { t, tau: self.tau });
        }
        if self.segments.is_empty() {
            return Ok(self.end.clone());
        }
        let k = self
            .segments
            .iter()
            .position(|(s, _)| t <= s.end)
            .unwrap_or(self.segments.len() - 1);
        let (seg, pair) = &self.segments[k];
        let mut state = self.anchors[k].clone();
        let dt = if self.backward { t - seg.end } else { t - seg.start };
        let mut scratch = vec![Complex64::default(); state.len()];
        self.eigs.evolve(&mut state, *pair, dt, &mut scratch);
        Ok(state)
    }
}

/// `Im <pi|O|psi>`
fn switching_value(pi: &[Complex64], op: &crate::hamiltonian::SectorOperator, psi: &[Complex64], tmp: &mut [Complex64]) -> f64 {
    op.apply(psi, tmp);
    linalg::inner(pi, tmp).im
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularArc {
    pub control: Control,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpCheck {
    pub control: Control,
    pub time: f64,
    pub before: f64,
    pub after: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SwitchingTrace {
    pub times: Vec<f64>,
    pub switch_j: Vec<f64>,
    pub switch_k: Vec<f64>,
    pub g_j: Vec<bool>,
    pub g_k: Vec<bool>,
    pub consistent: Vec<bool>,
    /// `sum_a g_a Im <Pi|O_a|psi>`
    pub hamiltonian: Vec<f64>,
    pub sign_tolerance: f64,
    pub singular_arcs: Vec<SingularArc>,
    pub jump_checks: Vec<JumpCheck>,
    /// Largest deviation of `<Pi(t)|psi(t)>` from its value at `tau`.
    pub invariant_drift: f64,
}

impl SwitchingTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn consistency_fraction(&self) -> f64 {
        self.consistent.iter().filter(|&&c| c).count() as f64 / self.len().max(1) as f64
    }

    pub fn switch(&self, c: Control) -> &[f64] {
        match c {
            Control::J => &self.switch_j,
            Control::K => &self.switch_k,
        }
    }

    /// Largest spread of the `a` switching value over samples lying strictly
    /// inside segments where only control `a` is on.
    pub fn flat_piece_spread(&self, protocol: &JumpProtocol) -> f64 {
        let mut worst: f64 = 0.0;
        for seg in protocol.segments() {
            let values = match seg.pair() {
                Some(ControlPair::JOnly) => &self.switch_j,
                Some(ControlPair::KOnly) => &self.switch_k,
                _ => continue,
            };
            let inside: Vec<f64> = self
                .times
                .iter()
                .zip(values)
                .filter(|(t, _)| **t > seg.start && **t < seg.end)
                .map(|(_, v)| *v)
                .collect();
            if let (Some(lo), Some(hi)) = (
                inside.iter().copied().reduce(f64::min),
                inside.iter().copied().reduce(f64::max),
            ) {
                worst = worst.max(hi - lo);
            }
        }
        worst
    }
}

fn consistent(value: f64, on: bool, tol: f64) -> bool {
    value.abs() <= tol || (value < 0.0 && on) || (value > 0.0 && !on)
}

/// Switching functions of `protocol` on a uniform grid of `samples` points over
/// `[0, tau]`. The grid is refined to at least ten points per jump.
pub fn switching_trace(
    psi0: &[Complex64],
    psi_target: &[Complex64],
    protocol: &JumpProtocol,
    eigs: &ControlEigens,
    samples: usize,
) -> Result<SwitchingTrace> {
    if samples < 2 {
        return Err(Error::Protocol(format!("switching trace needs at least 2 samples, got {samples}")));
    }
    let samples = samples.max(10 * protocol.jump_count());
    let forward = Trajectory::forward(psi0, protocol, eigs)?;
    let pi_tau = conjugate_final(forward.far_end(), psi_target);
    let backward = Trajectory::backward(&pi_tau, protocol, eigs)?;
    let invariant = linalg::inner(&pi_tau, forward.far_end());
    let tau = protocol.tau;
    let d = psi0.len();
    let mut tmp = vec![Complex64::default(); d];

    let eval = |t: f64, tmp: &mut [Complex64]| -> Result<(f64, f64, Complex64)> {
        let psi = forward.at(t)?;
        let pi = backward.at(t)?;
        Ok((
            switching_value(&pi, eigs.op_j(), &psi, tmp),
            switching_value(&pi, eigs.op_k(), &psi, tmp),
            linalg::inner(&pi, &psi),
        ))
    };

    let mut times = Vec::with_capacity(samples);
    let (mut switch_j, mut switch_k) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    let (mut g_j, mut g_k) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    let mut drift: f64 = 0.0;
    for i in 0..samples {
        let t = tau * i as f64 / (samples - 1) as f64;
        let (sj, sk, inv) = eval(t, &mut tmp)?;
        drift = drift.max((inv - invariant).norm());
        let (j, k) = protocol.controls_at(t);
        times.push(t);
        switch_j.push(sj);
        switch_k.push(sk);
        g_j.push(j);
        g_k.push(k);
    }
    let scale = switch_j.iter().chain(&switch_k).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = SIGN_TOLERANCE * scale;
    let consistent_flags: Vec<bool> = (0..samples)
        .map(|i| consistent(switch_j[i], g_j[i], tol) && consistent(switch_k[i], g_k[i], tol))
        .collect();
    let hamiltonian = (0..samples)
        .map(|i| f64::from(g_j[i] as u8) * switch_j[i] + f64::from(g_k[i] as u8) * switch_k[i])
        .collect();

    let mut singular_arcs = Vec::new();
    for (c, values) in [(Control::J, &switch_j), (Control::K, &switch_k)] {
        let mut start: Option<usize> = None;
        for i in 0..=samples {
            let small = i < samples && values[i].abs() <= tol;
            match (small, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    let (a, b) = (times[s], times[i - 1]);
                    if b - a > SINGULAR_FRACTION * tau {
                        singular_arcs.push(SingularArc { control: c, start: a, end: b });
                    }
                    start = None;
                }
                _ => {}
            }
        }
    }

    let h = tau / (samples - 1) as f64;
    let mut jump_checks = Vec::new();
    for c in Control::BOTH {
        let jumps = &protocol.trace(c).jumps;
        for (n, &tj) in jumps.iter().enumerate() {
            let lo = if n > 0 { 0.5 * (jumps[n - 1] + tj) } else { 0.0 };
            let hi = jumps.get(n + 1).map_or(tau, |&u| 0.5 * (tj + u));
            let pick = |v: (f64, f64, Complex64)| if c == Control::J { v.0 } else { v.1 };
            let before = pick(eval((tj - h).max(lo), &mut tmp)?);
            let after = pick(eval((tj + h).min(hi), &mut tmp)?);
            let at = pick(eval(tj, &mut tmp)?);
            let passed = before.signum() != after.signum() || at.abs().min(before.abs()).min(after.abs()) <= tol;
            jump_checks.push(JumpCheck { control: c, time: tj, before, after, passed });
        }
    }

    Ok(SwitchingTrace {
        times,
        switch_j,
        switch_k,
        g_j,
        g_k,
        consistent: consistent_flags,
        hamiltonian,
        sign_tolerance: tol,
        singular_arcs,
        jump_checks,
        invariant_drift: drift,
    })
}
