//! Static analysis of semantic breaking changes between library versions.
//!
//! The pipeline loads two snapshots of a library written in MVIL (a small
//! textual three-address IR), pairs up public APIs whose signatures still
//! match, and then decides per API whether the upgrade kept its observable
//! behavior. Signature-level breaks are reported directly; for signature-
//! compatible APIs the analysis builds per-cluster dependency summaries,
//! compares them with a label-refinement graph kernel that de-emphasizes
//! benign edit patterns, and confirms candidate breaks by checking that old
//! inputs can trigger them and that the effect propagates back to the API.

pub mod benign;
pub mod callgraph;
pub mod cfg;
pub mod corpus;
pub mod differ;
mod hash;
pub mod impact;
pub mod ir;
pub mod pdg;
pub mod report;
pub mod semdiff;
pub mod slicer;
