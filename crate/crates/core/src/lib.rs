//! A continuous-time evolving-algebra engine with exact rational time, the
//! railroad crossing built on it, and a checker for its safety, liveness
//! and timing properties.

// Errors carry exact rationals for their messages and sit on cold paths.
#![allow(clippy::result_large_err)]

pub mod builder;
pub mod checker;
pub mod crossing;
pub mod fuzz;
pub mod rule;
pub mod scenario;
pub mod state;
pub mod timeline;
pub mod trace;
pub mod value;
