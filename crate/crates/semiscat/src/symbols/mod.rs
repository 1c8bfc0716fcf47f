//! The symbol calculus behind the small-h matrix element expansion.
//!
//! The expansion is organized around an exponent lattice: every power
//! of h that can arise from combining potential homogeneities with the
//! dilation shift. Each lattice entry owns a pair of one-sided symbols
//! (decaying along +omega and -omega) solved from a triangular
//! transport recursion, and an assembled coefficient operator pairing
//! source against receiver bumps:
//!
//! - [`lattice`]: exponent enumeration with provenance,
//! - [`plan`]: source discovery and the packed derivative-tracking
//!   layout of the per-line ODE system,
//! - [`line`]: the transport solver along admissible lines,
//! - [`operators`]: coefficient operators and bump pairings.

pub mod lattice;
pub mod line;
pub mod operators;
pub mod plan;

pub use lattice::{generate_lattice, ExponentLattice, LatticeEntry, LatticeError, Provenance};
pub use line::{Direction, LineSolution, LineSolver, SymbolError};
pub use operators::{
    orthonormal_frame, pair_symbols, point_states, CoefficientOperator, Frame, Pairing,
    PairingSettings, PointStates,
};
pub use plan::{build_plan, MultiTable, NodePlan, Source, SymbolPlan};
