//! Semi-supervised constrained clustering with pseudo-constraints.
//!
//! A small softmax cluster head is trained from pairwise must-link and
//! cannot-link constraints. Unconstrained samples contribute soft
//! pseudo-constraints derived from the Jensen-Shannon divergence between
//! confident (low-entropy) predictions on weakly augmented inputs, and those
//! targets supervise strongly augmented views of the same samples.

pub mod dataspace;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod nethead;
pub mod pairloss;
pub mod pseudo;
pub mod rng;
pub mod trainer;

pub use dataspace::{ConstraintPair, Dataset, Split};
pub use error::{Error, Result};
pub use eval::{evaluate, hungarian, EvalReport};
pub use nethead::{ClusterHead, OptimizerState, ProbVector};
pub use trainer::{train, Regime, TrainConfig, TrainOutcome};
