//! Simulator for the photonic quantum memristor and the memristor-based
//! quantum reservoir computer.
//!
//! * [`fock`]: Fock-space basis, permanent lifting of linear optics, density-operator algebra.
//! * [`memristor`]: device relations, output states, update laws, classical analogue.
//! * [`hysteresis`]: closed-loop time-domain simulation with detection statistics.
//! * [`tomography`]: simulated measurement and maximum-likelihood reconstruction.
//! * [`reservoir`]: encodings, random meshes and the memristor reservoir.
//! * [`readout`]: linear softmax readout trained by SGD.
//! * [`mnist`]: IDX parsing and the 0/3/8 digit subset.
//! * [`pipeline`]: end-to-end reservoir-computing tasks.
//! * [`config`] and [`cli`]: JSON experiment configs and the command-line driver.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod fock;
pub mod hysteresis;
pub mod io;
pub mod memristor;
pub mod mnist;
pub mod pipeline;
pub mod readout;
pub mod reservoir;
pub mod tomography;

pub use error::{Error, Result};
