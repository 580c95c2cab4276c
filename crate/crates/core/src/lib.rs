//! Tensor-train arithmetic and a stochastic Galerkin pipeline for elliptic
//! problems with lognormal-type random coefficients.

pub mod cross;
pub mod error;
pub mod galerkin;
pub mod linalg;
pub mod pce;
pub mod pipeline;
pub mod stats;
pub mod tt;

pub use error::{Error, Result};
pub use tt::{Core, Direction, OpCore, TtOperator, TtTensor};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/tensor-trains.md")]
    mod tensor_trains {}
    #[doc = include_str!("../../../book/src/cross.md")]
    mod cross {}
    #[doc = include_str!("../../../book/src/chaos.md")]
    mod chaos {}
    #[doc = include_str!("../../../book/src/galerkin.md")]
    mod galerkin {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
