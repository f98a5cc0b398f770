//! Protocol representations.
//!
//! A [`PiecewiseProtocol`] holds `N` equal intervals with per-interval couplings
//! `(J, K)`. A [`JumpProtocol`] holds, for each control, its initial bang value
//! and the strictly increasing times at which it flips.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum segment width for counting pulses, as a fraction of `tau`.
pub const DEFAULT_MIN_PULSE_WIDTH: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Control {
    J,
    K,
}

impl Control {
    pub const BOTH: [Control; 2] = [Control::J, Control::K];
}

impl std::fmt::Display for Control {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Control::J => write!(f, "J"),
            Control::K => write!(f, "K"),
        }
    }
}

/// An allowed bang setting. `(0, 0)` is the identity and never appears.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlPair {
    Both,
    JOnly,
    KOnly,
}

impl ControlPair {
    pub const ALL: [ControlPair; 3] = [ControlPair::Both, ControlPair::JOnly, ControlPair::KOnly];

    pub fn from_bits(j: bool, k: bool) -> Option<Self> {
        match (j, k) {
            (true, true) => Some(ControlPair::Both),
            (true, false) => Some(ControlPair::JOnly),
            (false, true) => Some(ControlPair::KOnly),
            (false, false) => None,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            ControlPair::Both => (true, true),
            ControlPair::JOnly => (true, false),
            ControlPair::KOnly => (false, true),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn couplings(self) -> (f64, f64) {
        let (j, k) = self.bits();
        (j as u8 as f64, k as u8 as f64)
    }

    /// The pair with control `c` flipped, or `None` if that would switch both off.
    pub fn flipped(self, c: Control) -> Option<Self> {
        let (j, k) = self.bits();
        match c {
            Control::J => Self::from_bits(!j, k),
            Control::K => Self::from_bits(j, !k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub j: f64,
    pub k: f64,
}

impl Controls {
    pub fn get(&self, c: Control) -> f64 {
        match c {
            Control::J => self.j,
            Control::K => self.k,
        }
    }

    pub fn set(&mut self, c: Control, value: f64) {
        match c {
            Control::J => self.j = value,
            Control::K => self.k = value,
        }
    }
}

impl From<ControlPair> for Controls {
    fn from(p: ControlPair) -> Self {
        let (j, k) = p.couplings();
        Controls { j, k }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseProtocol {
    pub tau: f64,
    pub values: Vec<Controls>,
}

impl PiecewiseProtocol {
    pub fn new(tau: f64, values: Vec<Controls>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Protocol("protocol needs at least one interval".into()));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::Protocol(format!("total time {tau} must be finite and non-negative")));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(&v.j) || !(0.0..=1.0).contains(&v.k)) {
            return Err(Error::Protocol(format!("control values {v:?} outside [0, 1]")));
        }
        Ok(PiecewiseProtocol { tau, values })
    }

    pub fn from_pairs(tau: f64, pairs: &[ControlPair]) -> Self {
        PiecewiseProtocol { tau, values: pairs.iter().map(|&p| p.into()).collect() }
    }

    pub fn intervals(&self) -> usize {
        self.values.len()
    }

    pub fn dt(&self) -> f64 {
        self.tau / self.values.len() as f64
    }

    pub fn is_discrete(&self) -> bool {
        self.values.iter().all(|v| (v.j == 0.0 || v.j == 1.0) && (v.k == 0.0 || v.k == 1.0))
    }

    /// Bang values per interval; fails on intermediate values or a both-off interval.
    pub fn to_pairs(&self) -> Result<Vec<ControlPair>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let bit = |x: f64| {
                    if x == 0.0 {
                        Ok(false)
                    } else if x == 1.0 {
                        Ok(true)
                    } else {
                        Err(Error::Protocol(format!("interval {i} has non-bang value {x}")))
                    }
                };
                ControlPair::from_bits(bit(v.j)?, bit(v.k)?).ok_or_else(|| {
                    Error::Protocol(format!("interval {i} has both controls off"))
                })
            })
            .collect()
    }

    /// Fraction of control values within `tol` of 0 or 1.
    pub fn bang_fraction(&self, tol: f64) -> f64 {
        let near = |x: f64| x <= tol || x >= 1.0 - tol;
        let hits: usize = self.values.iter().map(|v| near(v.j) as usize + near(v.k) as usize).sum();
        hits as f64 / (2 * self.values.len()) as f64
    }
}

/// One control's bang-bang trace: initial value and flip times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTrace {
    pub initial: bool,
    pub jumps: Vec<f64>,
}

impl ControlTrace {
    pub fn constant(on: bool) -> Self {
        ControlTrace { initial: on, jumps: Vec::new() }
    }

    /// Value on `[t, next jump)`.
    pub fn value_at(&self, t: f64) -> bool {
        let flips = self.jumps.partition_point(|&s| s <= t);
        self.initial ^ (flips % 2 == 1)
    }

    pub fn final_value(&self) -> bool {
        self.initial ^ (self.jumps.len() % 2 == 1)
    }

    /// Maximal `(start, end, value)` segments over `[0, tau]`.
    pub fn segments(&self, tau: f64) -> Vec<(f64, f64, bool)> {
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        let mut start = 0.0;
        let mut value = self.initial;
        for &t in &self.jumps {
            out.push((start, t, value));
            start = t;
            value = !value;
        }
        out.push((start, tau, value));
        out
    }

    pub fn on_intervals(&self, tau: f64) -> Vec<(f64, f64)> {
        self.segments(tau).into_iter().filter(|s| s.2).map(|(a, b, _)| (a, b)).collect()
    }

    fn validate(&self, tau: f64, name: Control) -> Result<()> {
        for (n, &t) in self.jumps.iter().enumerate() {
            if !(t > 0.0 && t < tau) {
                return Err(Error::Protocol(format!("{name} jump {n} at {t} outside (0, {tau})")));
            }
            if n > 0 && t <= self.jumps[n - 1] {
                return Err(Error::Protocol(format!("{name} jumps not strictly increasing at index {n}")));
            }
        }
        Ok(())
    }
}

/// A constant-controls stretch of a jump protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub j: bool,
    pub k: bool,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn pair(&self) -> Option<ControlPair> {
        ControlPair::from_bits(self.j, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpProtocol {
    pub tau: f64,
    pub j: ControlTrace,
    pub k: ControlTrace,
}

impl JumpProtocol {
    pub fn new(tau: f64, j: ControlTrace, k: ControlTrace) -> Result<Self> {
        let p = JumpProtocol { tau, j, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Protocol(format!("total time {} must be positive", self.tau)));
        }
        self.j.validate(self.tau, Control::J)?;
        self.k.validate(self.tau, Control::K)
    }

    pub fn trace(&self, c: Control) -> &ControlTrace {
        match c {
            Control::J => &self.j,
            Control::K => &self.k,
        }
    }

    pub fn trace_mut(&mut self, c: Control) -> &mut ControlTrace {
        match c {
            Control::J => &mut self.j,
            Control::K => &mut self.k,
        }
    }

    pub fn jump_count(&self) -> usize {
        self.j.jumps.len() + self.k.jumps.len()
    }

    pub fn controls_at(&self, t: f64) -> (bool, bool) {
        (self.j.value_at(t), self.k.value_at(t))
    }

    /// Time-ordered constant-control segments; coincident jumps leave no
    /// zero-length segment behind.
    pub fn segments(&self) -> Vec<Segment> {
        let mut times: Vec<f64> = self.j.jumps.iter().chain(&self.k.jumps).copied().collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut out = Vec::with_capacity(times.len() + 1);
        let mut start = 0.0;
        for t in times.into_iter().chain(std::iter::once(self.tau)) {
            if t > start {
                let (j, k) = self.controls_at(start);
                out.push(Segment { start, end: t, j, k });
                start = t;
            }
        }
        out
    }

    /// Midpoint sampling on `n` equal intervals.
    pub fn to_piecewise(&self, n: usize) -> PiecewiseProtocol {
        let values = (0..n)
            .map(|i| {
                let t = self.tau * (i as f64 + 0.5) / n as f64;
                let (j, k) = self.controls_at(t);
                Controls { j: j as u8 as f64, k: k as u8 as f64 }
            })
            .collect();
        PiecewiseProtocol { tau: self.tau, values }
    }

    /// Same protocol on `[0, 1]`.
    pub fn normalize(&self) -> Result<JumpProtocol> {
        if self.tau <= 0.0 {
            return Err(Error::Protocol("cannot normalize a protocol with zero total time".into()));
        }
        let scale = |tr: &ControlTrace| ControlTrace {
            initial: tr.initial,
            jumps: tr.jumps.iter().map(|&t| t / self.tau).collect(),
        };
        Ok(JumpProtocol { tau: 1.0, j: scale(&self.j), k: scale(&self.k) })
    }

    /// The protocol run backwards in time.
    pub fn time_reversed(&self) -> JumpProtocol {
        let rev = |tr: &ControlTrace| ControlTrace {
            initial: tr.final_value(),
            jumps: tr.jumps.iter().rev().map(|&t| self.tau - t).collect(),
        };
        JumpProtocol { tau: self.tau, j: rev(&self.j), k: rev(&self.k) }
    }

    pub fn count_pulses(&self) -> PulseStats {
        let stats = |tr: &ControlTrace| {
            let on = tr.on_intervals(self.tau);
            let time: f64 = on.iter().map(|(a, b)| b - a).sum();
            let p = on.len();
            let frac = (p > 0).then(|| time / (p as f64 * self.tau));
            (p, time, frac)
        };
        let (pulses_j, on_time_j, on_fraction_j) = stats(&self.j);
        let (pulses_k, on_time_k, on_fraction_k) = stats(&self.k);
        PulseStats { pulses_j, pulses_k, on_time_j, on_time_k, on_fraction_j, on_fraction_k }
    }

    /// Removes pulses and gaps narrower than `min_width * tau`, merging each
    /// into its neighbors, narrowest first.
    pub fn canonicalize(&self, min_width: f64) -> Canonicalized {
        let threshold = min_width * self.tau;
        let mut removed = 0.0;
        let mut out = self.clone();
        for c in Control::BOTH {
            removed += prune_trace(out.trace_mut(c), self.tau, threshold);
        }
        Canonicalized { protocol: out, removed_measure: removed }
    }

    /// Width of the narrowest interior segment (bounded by two jumps) of `c`.
    pub fn narrowest_interior(&self, c: Control) -> Option<f64> {
        self.trace(c).jumps.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp)
    }
}

fn prune_trace(trace: &mut ControlTrace, tau: f64, threshold: f64) -> f64 {
    let mut removed = 0.0;
    loop {
        let segs = trace.segments(tau);
        if segs.len() < 2 {
            return removed;
        }
        let (idx, width) = segs
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.1 - s.0))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        if width >= threshold {
            return removed;
        }
        removed += width;
        let last = segs.len() - 1;
        if idx == 0 {
            trace.jumps.remove(0);
            trace.initial = !trace.initial;
        } else if idx == last {
            trace.jumps.pop();
        } else {
            // Segment idx spans jumps[idx-1]..jumps[idx].
            trace.jumps.drain(idx - 1..=idx);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Canonicalized {
    pub protocol: JumpProtocol,
    pub removed_measure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseStats {
    pub pulses_j: usize,
    pub pulses_k: usize,
    pub on_time_j: f64,
    pub on_time_k: f64,
    /// `t_on / (P tau)`, absent when `P = 0`.
    pub on_fraction_j: Option<f64>,
    pub on_fraction_k: Option<f64>,
}

impl PulseStats {
    pub fn pulses(&self, c: Control) -> usize {
        match c {
            Control::J => self.pulses_j,
            Control::K => self.pulses_k,
        }
    }

    pub fn on_fraction(&self, c: Control) -> Option<f64> {
        match c {
            Control::J => self.on_fraction_j,
            Control::K => self.on_fraction_k,
        }
    }
}

/// Jump representation of a discrete piecewise protocol; jumps sit on the
/// interval boundaries where a control flips.
pub fn to_jump(p: &PiecewiseProtocol) -> Result<JumpProtocol> {
    let pairs = p.to_pairs()?;
    let n = pairs.len();
    let trace = |select: fn((bool, bool)) -> bool| {
        let initial = select(pairs[0].bits());
        let mut jumps = Vec::new();
        for i in 1..n {
            if select(pairs[i].bits()) != select(pairs[i - 1].bits()) {
                jumps.push(p.tau * i as f64 / n as f64);
            }
        }
        ControlTrace { initial, jumps }
    };
    JumpProtocol::new(p.tau, trace(|b| b.0), trace(|b| b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn on_off(j: &[u8], k: &[u8]) -> PiecewiseProtocol {
        let values =
            j.iter().zip(k).map(|(&a, &b)| Controls { j: a as f64, k: b as f64 }).collect();
        PiecewiseProtocol::new(1.0, values).unwrap()
    }

    #[test]
    fn constant_protocol_has_no_jumps() {
        let p = PiecewiseProtocol::from_pairs(2.0, &[ControlPair::Both; 8]);
        let jp = to_jump(&p).unwrap();
        assert!(jp.j.initial && jp.k.initial);
        assert_eq!(jp.jump_count(), 0);
    }

    #[test]
    fn half_on_protocol_jumps_at_midpoint() {
        let p = PiecewiseProtocol { tau: 3.0, values: on_off(&[1, 1, 0, 0], &[1, 1, 1, 1]).values };
        let jp = to_jump(&p).unwrap();
        assert_eq!(jp.j.jumps, vec![1.5]);
        assert!(jp.k.jumps.is_empty());
    }

    #[test]
    fn to_jump_rejects_non_discrete() {
        let p = PiecewiseProtocol::new(1.0, vec![Controls { j: 0.5, k: 1.0 }]).unwrap();
        assert!(to_jump(&p).is_err());
        let off = PiecewiseProtocol::new(1.0, vec![Controls { j: 0.0, k: 0.0 }]).unwrap();
        assert!(to_jump(&off).is_err());
    }

    #[test]
    fn pulse_counts() {
        let full = JumpProtocol::new(2.0, ControlTrace::constant(true), ControlTrace::constant(true)).unwrap();
        let s = full.count_pulses();
        assert_eq!(s.pulses_j, 1);
        assert_eq!(s.on_fraction_j, Some(1.0));

        let two = JumpProtocol::new(
            4.0,
            ControlTrace { initial: true, jumps: vec![1.0, 2.0] },
            ControlTrace::constant(true),
        )
        .unwrap();
        let s = two.count_pulses();
        assert_eq!(s.pulses_j, 2);
        assert_eq!(s.on_time_j, 3.0);
        assert_eq!(s.on_fraction_j, Some(0.375));

        let off = JumpProtocol::new(1.0, ControlTrace::constant(false), ControlTrace::constant(true)).unwrap();
        let s = off.count_pulses();
        assert_eq!(s.pulses_j, 0);
        assert_eq!(s.on_fraction_j, None);
    }

    #[test]
    fn normalize_examples() {
        let p = JumpProtocol::new(
            2.0,
            ControlTrace { initial: false, jumps: vec![0.5, 1.0] },
            ControlTrace::constant(true),
        )
        .unwrap();
        let n = p.normalize().unwrap();
        assert_eq!(n.j.jumps, vec![0.25, 0.5]);
        assert!(n.k.jumps.is_empty());
        assert_eq!(n.normalize().unwrap(), n);
        assert_eq!(n.count_pulses().pulses_j, p.count_pulses().pulses_j);
        let zero = JumpProtocol { tau: 0.0, ..p };
        assert!(zero.normalize().is_err());
    }

    #[test]
    fn canonicalize_removes_narrow_pulse() {
        let p = JumpProtocol::new(
            1.0,
            ControlTrace { initial: true, jumps: vec![0.3, 0.5, 0.5 + 1e-9] },
            ControlTrace::constant(true),
        )
        .unwrap();
        let before = p.count_pulses().pulses_j;
        let c = p.canonicalize(1e-4);
        assert_eq!(c.protocol.count_pulses().pulses_j, before - 1);
        assert_eq!(c.protocol.j.jumps, vec![0.3]);
        assert!((c.removed_measure - 1e-9).abs() < 1e-15);

        let wide = p.canonicalize(0.0);
        assert_eq!(wide.protocol, p);
        assert_eq!(wide.removed_measure, 0.0);
    }

    #[test]
    fn canonicalize_leading_segment_flips_initial() {
        let p = JumpProtocol::new(
            1.0,
            ControlTrace { initial: false, jumps: vec![1e-6, 0.5] },
            ControlTrace::constant(true),
        )
        .unwrap();
        let c = p.canonicalize(1e-4);
        assert!(c.protocol.j.initial);
        assert_eq!(c.protocol.j.jumps, vec![0.5]);
        assert!((c.removed_measure - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn segments_merge_both_controls() {
        let p = JumpProtocol::new(
            1.0,
            ControlTrace { initial: true, jumps: vec![0.5] },
            ControlTrace { initial: false, jumps: vec![0.25, 0.5] },
        )
        .unwrap();
        let segs = p.segments();
        assert_eq!(segs.len(), 3);
        assert_eq!((segs[0].j, segs[0].k), (true, false));
        assert_eq!((segs[1].j, segs[1].k), (true, true));
        assert_eq!((segs[2].j, segs[2].k), (false, false));
        assert_eq!(segs[2].pair(), None);
    }

    #[test]
    fn invalid_jump_lists_rejected() {
        let bad = |jumps: Vec<f64>| {
            JumpProtocol::new(1.0, ControlTrace { initial: true, jumps }, ControlTrace::constant(true))
        };
        assert!(bad(vec![0.5, 0.5]).is_err());
        assert!(bad(vec![0.6, 0.4]).is_err());
        assert!(bad(vec![0.0]).is_err());
        assert!(bad(vec![1.0]).is_err());
        assert!(bad(vec![0.2, 0.7]).is_ok());
    }

    #[test]
    fn flipping_never_switches_both_off() {
        assert_eq!(ControlPair::JOnly.flipped(Control::J), None);
        assert_eq!(ControlPair::JOnly.flipped(Control::K), Some(ControlPair::Both));
        assert_eq!(ControlPair::Both.flipped(Control::J), Some(ControlPair::KOnly));
    }

    fn arb_pairs(n: usize) -> impl Strategy<Value = Vec<ControlPair>> {
        prop::collection::vec(prop::sample::select(ControlPair::ALL.to_vec()), n)
    }

    proptest! {
        #[test]
        fn sampling_inverts_to_jump(pairs in arb_pairs(16), tau in 0.1f64..10.0) {
            let p = PiecewiseProtocol::from_pairs(tau, &pairs);
            let jp = to_jump(&p).unwrap();
            prop_assert_eq!(jp.to_piecewise(16), p);
        }

        #[test]
        fn canonicalize_never_adds_pulses(pairs in arb_pairs(32), width in 0.0f64..0.2) {
            let jp = to_jump(&PiecewiseProtocol::from_pairs(1.0, &pairs)).unwrap();
            let before = jp.count_pulses();
            let after = jp.canonicalize(width).protocol.count_pulses();
            prop_assert!(after.pulses_j + after.pulses_k <= before.pulses_j + before.pulses_k);
        }

        #[test]
        fn reversal_preserves_pulse_counts(pairs in arb_pairs(24)) {
            let jp = to_jump(&PiecewiseProtocol::from_pairs(2.0, &pairs)).unwrap();
            let rev = jp.time_reversed();
            prop_assert!(rev.validate().is_ok());
            prop_assert_eq!(rev.count_pulses().pulses_j, jp.count_pulses().pulses_j);
            let back = rev.time_reversed();
            for c in Control::BOTH {
                prop_assert_eq!(back.trace(c).initial, jp.trace(c).initial);
                prop_assert_eq!(back.trace(c).jumps.len(), jp.trace(c).jumps.len());
                for (a, b) in back.trace(c).jumps.iter().zip(&jp.trace(c).jumps) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
