// mdbook can't run snippets that depend on workspace crates, so each chapter
// is pulled in as the docs of an empty module and `cargo test --doc` runs
// them instead. One module per chapter keeps failures traceable to a file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/traces.md")]
pub mod traces {}
#[doc = include_str!("../../../book/src/lstm.md")]
pub mod lstm {}
#[doc = include_str!("../../../book/src/ensembles.md")]
pub mod ensembles {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/harvesting.md")]
pub mod harvesting {}
#[doc = include_str!("../../../book/src/cross_validation.md")]
pub mod cross_validation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
