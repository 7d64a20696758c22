//! Construction and certification of free, dense groups of automorphisms of
//! countable homogeneous structures.
//!
//! Generators are never total: each is a [`LazyAutomorphism`] whose finite
//! graph only grows. Every claim the constructions make (a word is not the
//! identity, a partial map has an extension) is recorded in a certificate
//! that [`verify`] re-checks from scratch.

pub mod automorphisms;
pub mod certificate;
pub mod cli;
pub mod free_extension;
pub mod generate;
pub mod stable;
pub mod structures;
pub mod tree;
pub mod verify;
pub mod words;

pub use automorphisms::{Direction, ImagePolicy, LazyAutomorphism, PartialAutomorphism};
pub use certificate::{export_tree, Certificate};
pub use free_extension::{kill_word, witness_persists, KillConfig, Witness};
pub use stable::{ArrayDims, ArrayIndex, ArrayRegistry, IndexPermutation, WordIndex};
pub use structures::{PointId, QfType, Structure, StructureKind};
pub use tree::{TreeParams, TreeState};
pub use verify::{verify, VerifyReport};
pub use words::{reduce, GeneratorLabel, Letter, ReducedWord, Role, Sign};
