//! Solver library for the cell growth equation, a transport equation with a
//! nonlocal division term sampled at a dilated argument.
//!
//! The physical density is evolved in a transformed variable where the
//! equation reduces to transport plus a bounded dilation operator. Two
//! independent solvers are provided:
//!
//! - [`dyson_phillips`]: the perturbation-series solution with an a-priori
//!   remainder bound, so every result carries a certificate of its truncation
//!   error;
//! - [`upwind`]: a first-order upwind method-of-lines scheme used to
//!   cross-validate the series solver.
//!
//! [`asymptotics`] estimates the long-time behavior of the rescaled solution
//! through running time-averages and Laplace-transform (resolvent) limits.
//! [`cli`] wires everything into a reproducible command-line tool with CSV
//! snapshot output.

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod dyson_phillips;
pub mod error;
pub mod grid;
pub mod operators;
pub mod output;
pub mod trajectory;
pub mod upwind;

pub use error::{Error, Result};
pub use grid::{make_initial, Grid, GridFunction, InitialPreset, ModelParams, SpaceTag};
pub use trajectory::{SolverTag, Trajectory};
