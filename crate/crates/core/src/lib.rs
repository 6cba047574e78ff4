//! Numerical laboratory for mixed Lebesgue, mixed Morrey and block spaces.

pub mod error;
pub mod grid;
pub mod norms;
pub mod duality;
pub mod operators;
pub mod lab;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/grids.md")]
    pub struct Grids;
    #[doc = include_str!("../../../book/src/norms.md")]
    pub struct Norms;
    #[doc = include_str!("../../../book/src/duality.md")]
    pub struct Duality;
    #[doc = include_str!("../../../book/src/operators.md")]
    pub struct Operators;
    #[doc = include_str!("../../../book/src/lab.md")]
    pub struct Lab;
}
