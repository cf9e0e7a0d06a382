//! Doc-test shim for the mdBook guide.
//!
//! Each chapter of `book/src` is included as the documentation of an empty
//! module, so `cargo test -p rotinit-guide --doc` compiles and runs every
//! fenced Rust snippet in the book against the current `rotinit` API. The
//! book cannot drift from the code without this crate failing.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/rotations.md")]
pub mod rotations {}

#[doc = include_str!("../../../book/src/preintegration.md")]
pub mod preintegration {}

#[doc = include_str!("../../../book/src/epipolar.md")]
pub mod epipolar {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/refinement.md")]
pub mod refinement {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}

#[doc = include_str!("../../../book/src/configuration.md")]
pub mod configuration {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
