//! Tensor trains: storage, arithmetic, rounding and operators.

mod arith;
mod io;
mod operator;
mod round;
mod tensor;

pub use operator::{OpCore, TtOperator};
pub use round::{left_interface, BondReport, Direction, RoundOptions, TruncationReport, ZERO_NORM};
pub use tensor::{increment, Core, DenseTensor, TtTensor, DENSE_LIMIT};
