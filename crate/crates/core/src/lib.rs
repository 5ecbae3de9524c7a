//! Analytic and combinatorial machinery for approximate-coloring hardness reductions.
//!
//! * [`qcube`]: real functions on `[q]^n`, Fourier expansion, influences, bunching.
//! * [`operators`]: symmetric Markov operators, their tensor powers and the three gadget operators.
//! * [`gaussian`]: Gaussian noise stability quantities and the noisy inner product bound checkers.
//! * [`labelcover`]: label-cover instances, t-labelings and the bipartite transformations.
//! * [`reduction`]: label cover to graph reductions, intended colorings and the soundness decoder.
//! * [`oracles`]: exact brute-force solvers used as ground truth.
//!
//! Coordinates and labels are 1-based (`1..=n`, `1..=R`); alphabet symbols are 0-based (`0..q`).

#![forbid(unsafe_code)]

pub mod error;
pub mod gaussian;
pub mod labelcover;
pub mod operators;
pub mod oracles;
pub mod qcube;
pub mod rational;
pub mod reduction;

pub use error::{Error, Result};
pub use gaussian::{BoundReport, McEstimate, StabilityQuery, Verdict};
pub use labelcover::{BipartiteLc, Constraint, LabelCoverInstance, Relation, TLabeling};
pub use operators::{GadgetKind, MarkovOp};
pub use oracles::{Graph, SearchBudget};
pub use qcube::{FourierTable, OrthonormalBasis, QFunction};
pub use reduction::{BlockGraph, ColoringAssignment, ReductionKind};
