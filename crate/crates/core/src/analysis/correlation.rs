//! Shape overlap of two bang-bang controls on `[0, 1]`.
//!
//! `C[a, b] = int_0^1 (1/2) {(2a - 1)(2b - 1) + 1} dt` is the measure of the
//! time where `a` and `b` agree. For `S` jumps placed uniformly at random the
//! agreement indicator flips `S` times, which gives the background
//! `<C[S]> = (S + 2) / (2 (S + 1))` for even `S` and `1/2` for odd `S`.

use rand::Rng;

use crate::protocol::ControlTrace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub c: f64,
    /// Total number of jumps in both controls.
    pub s: usize,
    pub background: f64,
    /// `C - <C[S]>`
    pub modified: f64,
}

pub fn background(s: usize) -> f64 {
    if s % 2 == 0 {
        (s as f64 + 2.0) / (2.0 * (s as f64 + 1.0))
    } else {
        0.5
    }
}

/// Measure of `[0, 1]` where the two controls agree, by merging jump lists.
pub fn agreement(a: &ControlTrace, b: &ControlTrace) -> f64 {
    let (mut ia, mut ib) = (0, 0);
    let (mut va, mut vb) = (a.initial, b.initial);
    let mut t = 0.0;
    let mut agree = 0.0;
    loop {
        let na = a.jumps.get(ia).copied().unwrap_or(1.0);
        let nb = b.jumps.get(ib).copied().unwrap_or(1.0);
        let next = na.min(nb).min(1.0);
        if va == vb {
            agree += next - t;
        }
        t = next;
        if ia >= a.jumps.len() && ib >= b.jumps.len() {
            break;
        }
        if na <= next && ia < a.jumps.len() {
            va = !va;
            ia += 1;
        }
        if nb <= next && ib < b.jumps.len() {
            vb = !vb;
            ib += 1;
        }
    }
    agree
}

/// Correlation of two controls normalized to `[0, 1]`.
pub fn correlation(a: &ControlTrace, b: &ControlTrace) -> CorrelationReport {
    let c = agreement(a, b).clamp(0.0, 1.0);
    let s = a.jumps.len() + b.jumps.len();
    let bg = background(s);
    CorrelationReport { c, s, background: bg, modified: c - bg }
}

/// Mean `C` over `samples` random pairs sharing an initial value, with `s`
/// uniform jumps split at random between the two.
pub fn monte_carlo_background<R: Rng>(s: usize, samples: usize, rng: &mut R) -> f64 {
    let mut total = 0.0;
    let draw = |n: usize, rng: &mut R| {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    for _ in 0..samples {
        let initial = rng.random::<bool>();
        let na = rng.random_range(0..=s);
        let a = ControlTrace { initial, jumps: draw(na, rng) };
        let b = ControlTrace { initial, jumps: draw(s - na, rng) };
        total += agreement(&a, &b);
    }
    total / samples as f64
}
