//! Compiles the code blocks of the guide in `book/` as doctests.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/linalg.md")]
pub mod linalg {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/batch.md")]
pub mod batch {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/acopf.md")]
pub mod acopf {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
pub mod readme {}
