//! Pseudo-spectral solver for two-dimensional incompressible flow coupled
//! to a diffusive Oldroyd-B polymer stress and a transported density, on
//! a periodic square.

pub mod check;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod integrate;
pub mod io;
pub mod picard;
pub mod spectral;

pub use error::{Error, Result};
pub use fields::{PhysParams, SimState, StressField};
pub use integrate::{run, step, Monitors, StepControl, Trajectory};
pub use spectral::{make_grid, Grid, ScalarField, VectorField};
