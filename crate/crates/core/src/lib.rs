//! Disturbance response control (DRC) for partially observed linear systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`lds`]: state-space systems, Markov operators, simulation, Nature's y.
//! * [`drc`]: the DRC class, counterfactual losses, gradients, projection.
//! * [`oco`]: online gradient descent with memory and the control driver.
//! * [`sysid`]: Gaussian exploration and least-squares Markov estimates.
//! * [`drc_ex`]: nominal stabilizing controllers, Nature's eta, Youla tools.
//! * [`convexity`]: Toeplitz bounds, torus functionals, curvature certificates.
//! * [`gen`]: random plants and controllers.

pub mod convexity;
pub mod drc;
pub mod drc_ex;
pub mod gen;
mod error;
pub mod lds;
pub mod linalg;
pub mod oco;
pub mod projection;
pub mod sysid;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
