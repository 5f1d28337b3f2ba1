//! Interpolatory model order reduction.
//!
//! Descriptor, coprime (delay / polynomial) and affine-parametric systems are
//! reduced by tangential rational interpolation. The crate covers projection
//! bases, IRKA and H2 descent, Loewner realizations and TF-IRKA, DAE-aware
//! reduction, weighted-H2 diagnostics, and the file formats used by the CLI.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub mod cli;
pub mod coprime;
pub mod dae;
pub mod error;
pub mod linalg;
pub mod loewner;
pub mod lti;
pub mod h2;
pub mod interp;
pub mod io;
pub mod models;
pub mod parametric;
pub mod weighted;

pub use error::{MorError, Result};
pub use lti::{DescriptorSystem, PoleResidueForm, StabilityReport, TransferFunction};
