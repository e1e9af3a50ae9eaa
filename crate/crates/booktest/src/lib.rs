//! mdbook cannot run listings that depend on a local crate, so the chapters
//! are pulled in as doc comments and `cargo test --doc` runs them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/configuration.md")]
pub mod configuration {}
#[doc = include_str!("../../../book/src/certificates.md")]
pub mod certificates {}
#[doc = include_str!("../../../book/src/controller.md")]
pub mod controller {}
#[doc = include_str!("../../../book/src/comparison.md")]
pub mod comparison {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
