//! The book's listings, compiled and run as doc-tests. One module per chapter
//! so a failure points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/states.md")]
pub mod states {}
#[doc = include_str!("../../../book/src/observables.md")]
pub mod observables {}
#[doc = include_str!("../../../book/src/correlation.md")]
pub mod correlation {}
#[doc = include_str!("../../../book/src/optimizer.md")]
pub mod optimizer {}
#[doc = include_str!("../../../book/src/scaling.md")]
pub mod scaling {}
#[doc = include_str!("../../../book/src/baselines.md")]
pub mod baselines {}
#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
