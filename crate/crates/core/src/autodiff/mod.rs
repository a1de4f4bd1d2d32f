//! Reverse-mode differentiation over the handful of matrix primitives the
//! DAE-PCA network needs, plus the Adam optimizer and its step schedule.

mod adam;
mod tape;

pub use adam::{lr_schedule, AdamConfig, AdamState, LrSchedule};
pub use tape::{Gradients, Tape, Var};

#[cfg(test)]
mod tests;
