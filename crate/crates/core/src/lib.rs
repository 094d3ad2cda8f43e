//! Finite-dimensional laboratory for greedy-type bases.
//!
//! Sequence norms and fundamental functions, ordered partitions and block
//! averages, bases in finite-dimensional normed spaces, the DKK family of
//! constructions and witness-based estimators for conditionality parameters.

pub mod basis;
pub mod constructions;
pub mod error;
pub mod estimators;
pub mod fit;
pub mod io;
pub mod partition;
pub mod sampling;
pub mod seqspace;
pub mod suite;

pub use basis::{Basis, DirectSumSpace, GreedyResult, NormedSpace, SpanSpace, TieRule};
pub use constructions::{DkkSpace, EtaSequence, MainA, PairedDkk, RotationPair, ThmA};
pub use error::{Error, Result};
pub use estimators::{BoundKind, EstimateReport, Witness, WitnessFamily};
pub use partition::{BlockSystem, OrderedPartition};
pub use seqspace::{FundamentalFunction, SeqNorm, SeqNormKind, Weight};
