//! Guide chapters compiled as doc-tests.

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/toy.md")]
pub mod toy {}
#[doc = include_str!("../../../book/src/lc.md")]
pub mod lc {}
#[doc = include_str!("../../../book/src/cones.md")]
pub mod cones {}
#[doc = include_str!("../../../book/src/manifold.md")]
pub mod manifold {}
#[doc = include_str!("../../../book/src/contraction.md")]
pub mod contraction {}
