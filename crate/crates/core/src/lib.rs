//! Test-driven repair for a small object-oriented intermediate language.
//!
//! The pipeline: [`abstraction`] swaps `@network` functions for models,
//! [`localizer`] finds a single suspicious line by relaxing the symbolic
//! encoding built in [`encoder`], [`synth`] fills a hole at that line by
//! enumerating a typed grammar, and [`driver`] iterates the two over the
//! program's functions. [`testkit`] is the concrete ground truth
//! throughout.

pub mod abstraction;
pub mod corpus;
pub mod driver;
pub mod encoder;
pub mod ir;
pub mod localizer;
pub mod smt;
pub mod synth;
pub mod testkit;
