//! Depth optimization for hardware-compliant quantum circuits.
//!
//! The pipeline alternates three stages until the depth stops improving:
//! a genetic search over SWAP/CNOT commutations ([`commute`]), extraction of
//! CNOT/SWAP blocks ([`sweep`]), and replacement of the most promising blocks
//! by depth-optimal equivalents found with a SAT solver ([`synth`]), guided by
//! an optimal-depth estimate ([`predictor`]). [`driver`] ties them together.

pub mod arch;
pub mod circuit;
pub mod commute;
pub mod driver;
pub mod error;
pub mod gf2;
pub mod predictor;
pub mod qasm;
pub mod sweep;
pub mod synth;
pub mod verify;

pub use arch::ArchitectureGraph;
pub use circuit::{Circuit, Gate, GateKind, Layering};
pub use error::{Error, Result};
pub use gf2::GF2Matrix;
