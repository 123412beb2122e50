//! Energy-efficient proactive eavesdropping in cooperative cognitive-radio
//! networks: system model, surrogate bounds and the perfect-CSI and robust
//! optimizers.

// links the BLAS/LAPACK used by the SDP path of clarabel
extern crate openblas_src;

pub mod conic;
pub mod error;
pub mod linalg;
pub mod model;
pub mod pathfollow;
pub mod robust;
pub mod scenario;
pub mod surrogate;
pub mod vars;

pub use error::{Error, Result};
