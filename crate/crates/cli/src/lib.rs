//! Library half of the `regdiv` binary: case dispatch, table regeneration,
//! verification and simulation front ends.

pub mod error;
pub mod simulate;
pub mod solve;
pub mod tables;
pub mod verify;
