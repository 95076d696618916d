//! Loomweaver: an optimizing compiler from a decoupled algorithm/schedule
//! DSL to synthesizable HLS C.
//!
//! The pipeline lowers a parsed program through three IR layers:
//!
//! ```text
//! DSL -> dependence graph IR -> polyhedral IR -> loop IR -> HLS C
//! ```
//!
//! Dependence analysis runs on the graph IR, loop transformations are set
//! and map manipulations on the polyhedral IR, and hardware pragmas attach
//! to the loop IR. A two-stage design space exploration engine drives the
//! transformations automatically, and a reference interpreter provides the
//! semantic-equivalence oracle for every rewrite.

pub mod affine;
pub mod corpus;
pub mod depgraph;
pub mod diag;
pub mod dse;
pub mod emit;
pub mod frontend;
pub mod interp;
pub mod loopir;
pub mod oracle;
pub mod perfmodel;
pub mod pipeline;
pub mod polyhedral;
pub mod report;
