//! Pseudo-spectral solver for a two-dimensional moist primitive-equation
//! model on the periodic torus.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod spectral;
pub mod thermo;
pub mod timestepper;

pub use error::{Error, Result};
pub use model::{Component, Forcing, Model, NoForcing, State, SystemVariant};
pub use spectral::{Grid, RealField, Spectral, SpectralField};
pub use thermo::{Heaviside, PhysConsts};
pub use timestepper::{RunFailure, Scheme, StepPolicy, Stepper, Trajectory};
