//! Dense `f64` arrays and a small reverse-mode differentiation engine.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{
    compare_gradients, grad_check, numeric_gradients, relative_error, GradCheckReport, FD_STEP,
    REL_ERROR_FLOOR,
};
pub use params::{GradStore, Param, ParamId, ParamStore};
pub use tape::{Axis, Tape, Var, PROB_FLOOR};
pub use tensor::{softmax_rows, Tensor};
