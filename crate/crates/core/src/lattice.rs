//! Square lattice geometry and the fixed-magnetization sector basis.
//!
//! Site `s = row * L + col`; bit `s` of a configuration is the spin on site `s`
//! (1 = up). A sector with `C` up spins is enumerated in ascending integer order,
//! which for fixed popcount coincides with colexicographic order, so ranks are
//! computed with the combinatorial number system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sector dimension accepted unless overridden.
pub const DEFAULT_MAX_DIMENSION: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Open => write!(f, "open"),
            Boundary::Periodic => write!(f, "periodic"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub side_length: usize,
    pub boundary: Boundary,
    /// Periodic lattices with `L <= 2` produce repeated site pairs; they are
    /// rejected unless this is set, in which case repeats are dropped.
    #[serde(default)]
    pub dedup_bonds: bool,
}

impl LatticeSpec {
    pub fn open(side_length: usize) -> Self {
        LatticeSpec { side_length, boundary: Boundary::Open, dedup_bonds: false }
    }

    pub fn periodic(side_length: usize) -> Self {
        LatticeSpec { side_length, boundary: Boundary::Periodic, dedup_bonds: false }
    }

    pub fn sites(&self) -> usize {
        self.side_length * self.side_length
    }
}

/// Nearest-neighbor bond `(i, j)` with `i < j`.
pub type Bond = (usize, usize);

/// Bonds of the lattice: all horizontal bonds row by row, then all vertical bonds.
pub fn build_lattice(spec: &LatticeSpec) -> Result<Vec<Bond>> {
    let l = spec.side_length;
    if l == 0 {
        return Err(Error::Lattice("side length must be at least 1".into()));
    }
    if l * l > 64 {
        return Err(Error::Lattice(format!("{} sites exceed the 64-bit configuration word", l * l)));
    }
    let periodic = spec.boundary == Boundary::Periodic;
    if periodic && l <= 2 && !spec.dedup_bonds {
        return Err(Error::Lattice(format!(
            "periodic boundary with L = {l} repeats site pairs; enable bond deduplication to allow it"
        )));
    }
    let site = |r: usize, c: usize| r * l + c;
    let mut raw = Vec::with_capacity(2 * l * l);
    for r in 0..l {
        for c in 0..l {
            if c + 1 < l {
                raw.push((site(r, c), site(r, c + 1)));
            } else if periodic {
                raw.push((site(r, c), site(r, 0)));
            }
        }
    }
    for r in 0..l {
        for c in 0..l {
            if r + 1 < l {
                raw.push((site(r, c), site(r + 1, c)));
            } else if periodic {
                raw.push((site(r, c), site(0, c)));
            }
        }
    }
    let mut bonds: Vec<Bond> = Vec::with_capacity(raw.len());
    for (a, b) in raw {
        if a == b {
            continue;
        }
        let bond = (a.min(b), a.max(b));
        if !bonds.contains(&bond) {
            bonds.push(bond);
        }
    }
    Ok(bonds)
}

/// Exact binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All `M`-bit configurations with exactly `C` set bits.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    sites: usize,
    occupants: usize,
    states: Vec<u64>,
    // binom[n][k] for n <= sites, k <= occupants, used for ranking.
    binom: Vec<Vec<usize>>,
}

impl SectorBasis {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn occupants(&self) -> usize {
        self.occupants
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn unrank(&self, index: usize) -> u64 {
        self.states[index]
    }

    /// Index of `config` in the basis, or `None` if it is not in the sector.
    pub fn rank(&self, config: u64) -> Option<usize> {
        if self.sites < 64 && config >> self.sites != 0 {
            return None;
        }
        if config.count_ones() as usize != self.occupants {
            return None;
        }
        let mut rank = 0;
        let mut rest = config;
        let mut k = 0;
        while rest != 0 {
            let pos = rest.trailing_zeros() as usize;
            k += 1;
            rank += self.binom[pos][k];
            rest &= rest - 1;
        }
        Some(rank)
    }
}

pub fn enumerate_sector(sites: usize, occupants: usize) -> Result<SectorBasis> {
    enumerate_sector_capped(sites, occupants, DEFAULT_MAX_DIMENSION)
}

pub fn enumerate_sector_capped(
    sites: usize,
    occupants: usize,
    max_dim: usize,
) -> Result<SectorBasis> {
    if sites == 0 || sites > 64 {
        return Err(Error::Lattice(format!("site count {sites} outside 1..=64")));
    }
    if occupants > sites {
        return Err(Error::Occupants { sites, occupants });
    }
    let dim = binomial(sites, occupants);
    if dim > max_dim as u128 {
        return Err(Error::DimensionTooLarge { dim, max: max_dim });
    }
    let dim = dim as usize;

    let mut states = Vec::with_capacity(dim);
    if occupants == 0 {
        states.push(0);
    } else {
        // Gosper's hack: next larger integer with the same popcount.
        let mut x: u64 = if occupants == 64 { u64::MAX } else { (1u64 << occupants) - 1 };
        for n in 0..dim {
            states.push(x);
            if n + 1 == dim {
                break;
            }
            let c = x & x.wrapping_neg();
            let r = x + c;
            x = (((r ^ x) >> 2) / c) | r;
        }
    }

    let binom = (0..=sites)
        .map(|n| (0..=occupants + 1).map(|k| binomial(n, k) as usize).collect())
        .collect();
    Ok(SectorBasis { sites, occupants, states, binom })
}

/// Exchanges the spins on sites `i` and `j` if they differ.
pub fn hop(config: u64, i: usize, j: usize) -> Option<u64> {
    let bi = (config >> i) & 1;
    let bj = (config >> j) & 1;
    if bi == bj {
        None
    } else {
        Some(config ^ (1u64 << i) ^ (1u64 << j))
    }
}
