//! The guide's chapters as doc comments, so `cargo test --doc` runs every
//! listing in `book/src` against the current API.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/operator.md")]
pub mod operator {}
#[doc = include_str!("../../../book/src/energy.md")]
pub mod energy {}
#[doc = include_str!("../../../book/src/solvers.md")]
pub mod solvers {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
