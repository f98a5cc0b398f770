//! Time-optimal bang-bang control of the square-lattice XXZ model.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: square lattice bonds and the fixed-magnetization sector basis.
//! - [`hamiltonian`]: sector Hamiltonians, eigendecompositions, ground states and
//!   distance measures.
//! - [`propagator`]: piecewise-constant time evolution (cached interval unitaries,
//!   prediagonalized variable-length segments, prefix caching).
//! - [`protocol`]: piecewise and jump-time protocol representations.
//! - [`optimizer`]: simulated annealing over continuous values (BFMC), bang values
//!   on a doubling interval ladder (DBMC), jump times (CBMC), the search for the
//!   critical time and the linear adiabatic baseline.
//! - [`pontryagin`]: conjugate-state switching functions and sign-rule checks.
//! - [`analysis`]: grid sweeps over (ln r_i, ln r_t) and the derived analyses.
//! - [`io`]: configuration, persisted records and plot-data files.

pub mod analysis;
pub mod error;
pub mod hamiltonian;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod optimizer;
pub mod pontryagin;
pub mod propagator;
pub mod protocol;

pub use error::{Error, Result};
pub use hamiltonian::{CouplingRatio, Transfer, XxzSystem};
pub use lattice::{Boundary, LatticeSpec, SectorBasis};
pub use protocol::{ControlTrace, JumpProtocol, PiecewiseProtocol};
