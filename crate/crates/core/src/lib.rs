//! Pseudo-spectral tools for the one-dimensional Zakharov system
//! `i u_t + u_xx = nu`, `n_tt − n_xx = (|u|²)_xx` on a periodic box, together
//! with the numerical experiments that probe norm inflation, decoherence and
//! failure of smoothness of the data-to-solution map.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod experiments;
pub mod linear;
pub mod norms;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{ComplexField, FourierGrid, RealField, C64};
