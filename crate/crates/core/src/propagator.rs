//! Piecewise-constant time evolution.
//!
//! Discrete protocols use precompiled interval unitaries `exp(-i (tau/N) H_JK)`
//! for every `N` on a power-of-two ladder, with a prefix cache so a change at
//! interval `k` only re-evolves from `k` onward. Jump protocols use the three
//! prediagonalized control Hamiltonians: one segment costs two dense
//! matrix-vector products and a diagonal phase.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{diagonalize, EigenDecomposition, SectorOperator, XxzSystem};
use crate::linalg::{ComplexMatrix, State};
use crate::protocol::{ControlPair, JumpProtocol, PiecewiseProtocol, Segment};

/// Eigendecompositions of `H(1,1)`, `H(1,0)` and `H(0,1)`, indexed by [`ControlPair`].
#[derive(Debug, Clone)]
pub struct ControlEigens {
    op_j: SectorOperator,
    op_k: SectorOperator,
    pairs: [EigenDecomposition; 3],
}

impl ControlEigens {
    pub fn new(system: &XxzSystem) -> Result<Self> {
        Self::from_operators(system.op_j.clone(), system.op_k.clone())
    }

    /// Any pair of control operators on a common space.
    pub fn from_operators(op_j: SectorOperator, op_k: SectorOperator) -> Result<Self> {
        if op_j.dim() != op_k.dim() {
            return Err(Error::DimensionMismatch { expected: op_j.dim(), actual: op_k.dim() });
        }
        let pairs = [
            diagonalize(&SectorOperator::combine(&op_j, 1.0, &op_k, 1.0))?,
            diagonalize(&op_j)?,
            diagonalize(&op_k)?,
        ];
        Ok(ControlEigens { op_j, op_k, pairs })
    }

    pub fn op_j(&self) -> &SectorOperator {
        &self.op_j
    }

    pub fn op_k(&self) -> &SectorOperator {
        &self.op_k
    }

    /// `J O_J + K O_K`
    pub fn operator(&self, j: f64, k: f64) -> SectorOperator {
        SectorOperator::combine(&self.op_j, j, &self.op_k, k)
    }

    pub fn dim(&self) -> usize {
        self.pairs[0].dim()
    }

    pub fn get(&self, pair: ControlPair) -> &EigenDecomposition {
        &self.pairs[pair.index()]
    }

    /// Evolves `psi` by `dt` under the pair's Hamiltonian. `dt == 0` is exact identity.
    pub fn evolve(&self, psi: &mut [Complex64], pair: ControlPair, dt: f64, scratch: &mut [Complex64]) {
        if dt != 0.0 {
            self.get(pair).evolve(psi, dt, scratch);
        }
    }
}

fn is_power_of_two(n: usize) -> bool {
    n > 0 && n & (n - 1) == 0
}

/// Interval unitaries for every `N = n_min * 2^a <= n_max` and every allowed pair.
#[derive(Debug, Clone)]
pub struct UnitaryCache {
    tau: f64,
    n_min: usize,
    n_max: usize,
    levels: Vec<[ComplexMatrix; 3]>,
}

impl UnitaryCache {
    pub fn new(eigs: &ControlEigens, tau: f64, n_min: usize, n_max: usize) -> Result<Self> {
        if !is_power_of_two(n_min) || !is_power_of_two(n_max) || n_min > n_max {
            return Err(Error::Config(format!(
                "interval ladder {n_min}..{n_max} must be powers of two with n_min <= n_max"
            )));
        }
        let mut levels = Vec::new();
        let mut n = n_min;
        while n <= n_max {
            let dt = tau / n as f64;
            levels.push(ControlPair::ALL.map(|p| eigs.get(p).unitary(dt)));
            n *= 2;
        }
        Ok(UnitaryCache { tau, n_min, n_max, levels })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Interval counts on the ladder, ascending.
    pub fn ladder(&self) -> Vec<usize> {
        (0..self.levels.len()).map(|a| self.n_min << a).collect()
    }

    pub fn unitary_count(&self) -> usize {
        3 * self.levels.len()
    }

    pub fn level(&self, n: usize) -> Option<&[ComplexMatrix; 3]> {
        if !is_power_of_two(n) || n < self.n_min || n > self.n_max {
            return None;
        }
        let a = (n / self.n_min).trailing_zeros() as usize;
        self.levels.get(a)
    }

    pub fn unitary(&self, n: usize, pair: ControlPair) -> Option<&ComplexMatrix> {
        self.level(n).map(|l| &l[pair.index()])
    }
}

/// States after each applied interval; `states[k]` follows `k` intervals.
#[derive(Debug, Clone)]
pub struct PrefixCache {
    dim: usize,
    intervals: usize,
    states: Vec<Complex64>,
    trial: Vec<Complex64>,
    valid_up_to: usize,
}

impl PrefixCache {
    pub fn new(psi0: &[Complex64], intervals: usize) -> Self {
        let dim = psi0.len();
        let mut states = vec![Complex64::default(); (intervals + 1) * dim];
        states[..dim].copy_from_slice(psi0);
        let trial = states.clone();
        PrefixCache { dim, intervals, states, trial, valid_up_to: 0 }
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn valid_up_to(&self) -> usize {
        self.valid_up_to
    }

    pub fn state(&self, k: usize) -> &[Complex64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[Complex64] {
        debug_assert_eq!(self.valid_up_to, self.intervals);
        self.state(self.intervals)
    }

    fn run<'u>(
        buf: &mut [Complex64],
        dim: usize,
        from: usize,
        to: usize,
        unitary_at: impl Fn(usize) -> &'u ComplexMatrix,
    ) {
        for k in from..to {
            let (head, tail) = buf.split_at_mut((k + 1) * dim);
            unitary_at(k).apply(&head[k * dim..], &mut tail[..dim]);
        }
    }

    /// Re-evolves from interval `changed_at` (0-based) onward and returns the
    /// final state. `changed_at >= intervals` with a complete cache is a hit.
    pub fn evolve_with<'u>(
        &mut self,
        changed_at: usize,
        unitary_at: impl Fn(usize) -> &'u ComplexMatrix,
    ) -> &[Complex64] {
        let from = changed_at.min(self.valid_up_to);
        if from < self.intervals {
            Self::run(&mut self.states, self.dim, from, self.intervals, unitary_at);
        }
        self.valid_up_to = self.intervals;
        self.final_state()
    }

    /// Evaluates a change at `changed_at` without touching the cached states.
    pub fn propose_with<'u>(
        &mut self,
        changed_at: usize,
        unitary_at: impl Fn(usize) -> &'u ComplexMatrix,
    ) -> &[Complex64] {
        debug_assert_eq!(self.valid_up_to, self.intervals);
        let d = self.dim;
        let from = changed_at.min(self.intervals);
        self.trial[from * d..(from + 1) * d].copy_from_slice(&self.states[from * d..(from + 1) * d]);
        Self::run(&mut self.trial, d, from, self.intervals, unitary_at);
        &self.trial[self.intervals * d..]
    }

    /// Accepts the last proposal made at `changed_at`.
    pub fn commit(&mut self, changed_at: usize) {
        let d = self.dim;
        let from = (changed_at.min(self.intervals) + 1) * d;
        self.states[from..].copy_from_slice(&self.trial[from..]);
    }
}

/// `psi(tau) = prod_j U_j psi0`, reusing the prefix cache from `changed_at` on.
pub fn evolve_discrete(
    protocol: &PiecewiseProtocol,
    cache: &UnitaryCache,
    prefix: &mut PrefixCache,
    changed_at: usize,
) -> Result<State> {
    let pairs = protocol.to_pairs()?;
    let n = pairs.len();
    let level = cache
        .level(n)
        .ok_or_else(|| Error::Config(format!("no cached unitaries for {n} intervals")))?;
    if prefix.intervals() != n {
        return Err(Error::DimensionMismatch { expected: prefix.intervals(), actual: n });
    }
    Ok(prefix.evolve_with(changed_at, |k| &level[pairs[k].index()]).to_vec())
}

/// Full evolution of a discrete protocol without caching.
pub fn evolve_pairs(psi0: &[Complex64], pairs: &[ControlPair], cache: &UnitaryCache) -> Result<State> {
    let level = cache
        .level(pairs.len())
        .ok_or_else(|| Error::Config(format!("no cached unitaries for {} intervals", pairs.len())))?;
    let mut psi = psi0.to_vec();
    let mut out = psi.clone();
    for p in pairs {
        level[p.index()].apply(&psi, &mut out);
        std::mem::swap(&mut psi, &mut out);
    }
    Ok(psi)
}

/// One application of a cached unitary covering `span` fine intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanStep {
    pub start: usize,
    pub span: usize,
    pub pair: ControlPair,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolutionPlan {
    pub intervals: usize,
    pub steps: Vec<PlanStep>,
}

/// Merges aligned runs of `2^k` identical intervals into single coarse steps.
pub fn coarse_skip(pairs: &[ControlPair], cache: &UnitaryCache) -> Result<EvolutionPlan> {
    let n = pairs.len();
    if cache.level(n).is_none() {
        return Err(Error::Config(format!("no cached unitaries for {n} intervals")));
    }
    let max_span = n / cache.n_min();
    let mut steps = Vec::new();
    let mut i = 0;
    while i < n {
        let mut span = 1;
        while span < max_span
            && i % (2 * span) == 0
            && i + 2 * span <= n
            && pairs[i..i + 2 * span].iter().all(|&p| p == pairs[i])
        {
            span *= 2;
        }
        steps.push(PlanStep { start: i, span, pair: pairs[i] });
        i += span;
    }
    Ok(EvolutionPlan { intervals: n, steps })
}

pub fn evolve_plan(psi0: &[Complex64], plan: &EvolutionPlan, cache: &UnitaryCache) -> Result<State> {
    let mut psi = psi0.to_vec();
    let mut out = psi.clone();
    for step in &plan.steps {
        let u = cache
            .unitary(plan.intervals / step.span, step.pair)
            .ok_or_else(|| Error::Config(format!("no cached unitaries for span {}", step.span)))?;
        u.apply(&psi, &mut out);
        std::mem::swap(&mut psi, &mut out);
    }
    Ok(psi)
}

/// Checks that every positive-length segment has an allowed control pair.
pub fn allowed_segments(protocol: &JumpProtocol) -> Result<Vec<(Segment, ControlPair)>> {
    protocol
        .segments()
        .into_iter()
        .map(|s| {
            s.pair().map(|p| (s, p)).ok_or_else(|| {
                Error::Protocol(format!("both controls off on [{}, {}]", s.start, s.end))
            })
        })
        .collect()
}

/// Final state of a jump protocol via the prediagonalized propagators.
pub fn evolve_continuous(psi0: &[Complex64], protocol: &JumpProtocol, eigs: &ControlEigens) -> Result<State> {
    protocol.validate()?;
    let segments = allowed_segments(protocol)?;
    let mut psi = psi0.to_vec();
    let mut scratch = vec![Complex64::default(); psi.len()];
    for (seg, pair) in segments {
        eigs.evolve(&mut psi, pair, seg.duration(), &mut scratch);
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{CouplingRatio, Transfer};
    use crate::lattice::LatticeSpec;
    use crate::linalg::{max_abs_diff, norm};
    use crate::protocol::{to_jump, ControlTrace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(l: usize, c: usize) -> (XxzSystem, ControlEigens, State) {
        let sys = XxzSystem::new(LatticeSpec::open(l), c).unwrap();
        let eigs = ControlEigens::new(&sys).unwrap();
        let t = Transfer::new(&sys, CouplingRatio::from_ln(-1.0).unwrap(), CouplingRatio::from_ln(1.0).unwrap())
            .unwrap();
        (sys, eigs, t.psi_init)
    }

    fn random_pairs(rng: &mut ChaCha8Rng, n: usize) -> Vec<ControlPair> {
        (0..n).map(|_| ControlPair::ALL[rng.random_range(0..3)]).collect()
    }

    #[test]
    fn cache_layout() {
        let (_, eigs, _) = setup(2, 2);
        let cache = UnitaryCache::new(&eigs, 1.3, 4, 64).unwrap();
        assert_eq!(cache.unitary_count(), 3 * 4 + 3);
        assert_eq!(cache.ladder(), vec![4, 8, 16, 32, 64]);
        assert!(cache.level(12).is_none());
        assert!(cache.level(128).is_none());
        for n in cache.ladder() {
            for p in ControlPair::ALL {
                assert!(cache.unitary(n, p).unwrap().unitarity_defect() <= 1e-9);
            }
        }
        assert!(UnitaryCache::new(&eigs, 1.0, 3, 64).is_err());
        assert!(UnitaryCache::new(&eigs, 1.0, 64, 4).is_err());
    }

    #[test]
    fn constant_protocol_matches_single_exponential() {
        let (sys, eigs, psi0) = setup(2, 2);
        let tau = 0.9;
        let cache = UnitaryCache::new(&eigs, tau, 4, 16).unwrap();
        let p = PiecewiseProtocol::from_pairs(tau, &[ControlPair::Both; 16]);
        let mut prefix = PrefixCache::new(&psi0, 16);
        let fin = evolve_discrete(&p, &cache, &mut prefix, 0).unwrap();
        let whole = diagonalize(&sys.operator(1.0, 1.0)).unwrap().unitary(tau);
        let mut expect = vec![Complex64::default(); psi0.len()];
        whole.apply(&psi0, &mut expect);
        assert!(max_abs_diff(&fin, &expect) < 1e-12);
    }

    #[test]
    fn cache_hit_is_bit_identical() {
        let (_, eigs, psi0) = setup(2, 2);
        let cache = UnitaryCache::new(&eigs, 1.0, 4, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = PiecewiseProtocol::from_pairs(1.0, &random_pairs(&mut rng, 8));
        let mut prefix = PrefixCache::new(&psi0, 8);
        let a = evolve_discrete(&p, &cache, &mut prefix, 0).unwrap();
        let b = evolve_discrete(&p, &cache, &mut prefix, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn incremental_matches_full_recomputation() {
        let (_, eigs, psi0) = setup(2, 2);
        let cache = UnitaryCache::new(&eigs, 1.7, 8, 8).unwrap();
        let level = cache.level(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pairs = random_pairs(&mut rng, 8);
        let mut prefix = PrefixCache::new(&psi0, 8);
        prefix.evolve_with(0, |k| &level[pairs[k].index()]);
        for _ in 0..200 {
            let at = rng.random_range(0..8);
            pairs[at] = ControlPair::ALL[rng.random_range(0..3)];
            let trial = prefix.propose_with(at, |k| &level[pairs[k].index()]).to_vec();
            let full = evolve_pairs(&psi0, &pairs, &cache).unwrap();
            assert!(max_abs_diff(&trial, &full) <= 1e-10);
            prefix.commit(at);
            assert!(max_abs_diff(prefix.final_state(), &full) <= 1e-10);
            for k in 0..=8 {
                let part = evolve_pairs_prefix(&psi0, &pairs[..k], level);
                assert!(max_abs_diff(prefix.state(k), &part) <= 1e-10);
            }
        }
    }

    fn evolve_pairs_prefix(psi0: &[Complex64], pairs: &[ControlPair], level: &[ComplexMatrix; 3]) -> State {
        let mut psi = psi0.to_vec();
        let mut out = psi.clone();
        for p in pairs {
            level[p.index()].apply(&psi, &mut out);
            std::mem::swap(&mut psi, &mut out);
        }
        psi
    }

    #[test]
    fn rejects_both_off_interval() {
        let (_, eigs, psi0) = setup(2, 2);
        let cache = UnitaryCache::new(&eigs, 1.0, 4, 4).unwrap();
        let mut p = PiecewiseProtocol::from_pairs(1.0, &[ControlPair::Both; 4]);
        p.values[2].j = 0.0;
        p.values[2].k = 0.0;
        let mut prefix = PrefixCache::new(&psi0, 4);
        assert!(evolve_discrete(&p, &cache, &mut prefix, 0).is_err());
    }

    #[test]
    fn coarse_skip_examples() {
        let (_, eigs, psi0) = setup(2, 2);
        let cache = UnitaryCache::new(&eigs, 2.0, 4, 64).unwrap();
        let same = vec![ControlPair::KOnly; 64];
        let plan = coarse_skip(&same, &cache).unwrap();
        assert_eq!(plan.steps.len(), 4);
        assert!(plan.steps.iter().all(|s| s.span == 16));

        let alternating: Vec<ControlPair> =
            (0..64).map(|i| if i % 2 == 0 { ControlPair::JOnly } else { ControlPair::KOnly }).collect();
        assert_eq!(coarse_skip(&alternating, &cache).unwrap().steps.len(), 64);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            // Long random runs so merges actually happen.
            let mut pairs = Vec::new();
            while pairs.len() < 64 {
                let p = ControlPair::ALL[rng.random_range(0..3)];
                let run = rng.random_range(1..20);
                pairs.extend(std::iter::repeat_n(p, run));
            }
            pairs.truncate(64);
            let plan = coarse_skip(&pairs, &cache).unwrap();
            let merged = evolve_plan(&psi0, &plan, &cache).unwrap();
            let full = evolve_pairs(&psi0, &pairs, &cache).unwrap();
            assert!(max_abs_diff(&merged, &full) <= 1e-10);
            assert_eq!(plan.steps.iter().map(|s| s.span).sum::<usize>(), 64);
        }
    }

    #[test]
    fn zero_length_segment_is_identity() {
        let (_, eigs, psi0) = setup(2, 2);
        let mut psi = psi0.clone();
        let mut scratch = psi.clone();
        eigs.evolve(&mut psi, ControlPair::Both, 0.0, &mut scratch);
        assert_eq!(psi, psi0);
    }

    #[test]
    fn single_segment_matches_discrete() {
        let (_, eigs, psi0) = setup(2, 2);
        let tau = 1.4;
        let jp = JumpProtocol::new(tau, ControlTrace::constant(true), ControlTrace::constant(false)).unwrap();
        let cont = evolve_continuous(&psi0, &jp, &eigs).unwrap();
        let cache = UnitaryCache::new(&eigs, tau, 8, 8).unwrap();
        let disc = evolve_pairs(&psi0, &[ControlPair::JOnly; 8], &cache).unwrap();
        assert!(max_abs_diff(&cont, &disc) <= 1e-9);
    }

    #[test]
    fn continuous_rejects_bad_protocols() {
        let (_, eigs, psi0) = setup(2, 2);
        let unsorted = JumpProtocol {
            tau: 1.0,
            j: ControlTrace { initial: true, jumps: vec![0.6, 0.3] },
            k: ControlTrace::constant(true),
        };
        assert!(evolve_continuous(&psi0, &unsorted, &eigs).is_err());
        let outside = JumpProtocol {
            tau: 1.0,
            j: ControlTrace { initial: true, jumps: vec![1.5] },
            k: ControlTrace::constant(true),
        };
        assert!(evolve_continuous(&psi0, &outside, &eigs).is_err());
    }

    #[test]
    fn norm_preserved_over_many_segments() {
        let (_, eigs, psi0) = setup(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut psi = psi0.clone();
        let mut scratch = psi.clone();
        for _ in 0..10_000 {
            let p = ControlPair::ALL[rng.random_range(0..3)];
            eigs.evolve(&mut psi, p, rng.random_range(0.0..0.5), &mut scratch);
        }
        assert!((norm(&psi) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn piecewise_and_jump_representations_agree() {
        let (_, eigs, psi0) = setup(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let tau = rng.random_range(0.2..3.0);
            let pairs = random_pairs(&mut rng, 16);
            let cache = UnitaryCache::new(&eigs, tau, 16, 16).unwrap();
            let p = PiecewiseProtocol::from_pairs(tau, &pairs);
            let disc = evolve_pairs(&psi0, &pairs, &cache).unwrap();
            let cont = evolve_continuous(&psi0, &to_jump(&p).unwrap(), &eigs).unwrap();
            assert!(max_abs_diff(&disc, &cont) <= 1e-9);
        }
    }
}
