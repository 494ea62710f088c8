//! Discrete-time quantum walk on a body-centred cubic lattice, its Dirac
//! continuum limit and leading Lorentz-violating correction, and the
//! interferometer phase such a correction would produce.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod effective;
pub mod error;
pub mod geometry;
pub mod layout_file;
pub mod scan;
pub mod spinor;
pub mod walk;

pub use error::{Error, Result};
