pub mod error;
pub mod energy;
pub mod exec;
pub mod grid;
pub mod linalg;
pub mod minimizer;
pub mod norms;
pub mod ode;
pub mod params;
pub mod radial;
pub mod split;
pub mod verify;

pub use error::{Error, Result};
