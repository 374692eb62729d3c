//! CreDRO: credal uncertainty quantification from ensembles trained with
//! top-δ distributionally robust selection.
//!
//! Modules, bottom-up:
//! - [`simplex`]: probability vectors, member sets and box credal sets.
//! - [`entropy`]: exact upper/lower entropy over box and hull credal sets.
//! - [`oracle`]: brute-force reference solvers used for verification.
//! - [`measures`]: epistemic uncertainty measures (MI, entropy difference, width, PIL).
//! - [`data`]: synthetic datasets.
//! - [`train`]: MLP ensembles with top-δ selection.
//! - [`eval`]: AUROC, ECE, accuracy-rejection curves.
//! - [`io`]: file formats.
//! - [`verify`]: seeded random instances and the oracle cross-check suite.

pub mod data;
pub mod entropy;
pub mod eval;
pub mod io;
pub mod measures;
pub mod oracle;
pub mod simplex;
pub mod train;
pub mod verify;

pub use entropy::{box_entropy_bounds, hull_entropy_bounds, shannon_entropy, EntropyPair};
pub use simplex::{BoxCredalSet, MemberSet, ProbVector};
