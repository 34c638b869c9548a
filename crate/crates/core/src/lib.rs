//! Free-boundary axisymmetric vortex flows through semi-discrete optimal
//! transport.
//!
//! A discrete measure of particles in angular-momentum and temperature
//! coordinates determines, through a concave dual problem, the fluid region
//! and the cell of fluid owned by each particle. [`dual::solve_dual`] solves
//! one such problem, [`dynamics::simulate`] steps particles forward in time
//! and [`reconstruction`] turns a solution into physical fields.

pub mod config;
pub mod dual;
pub mod dynamics;
pub mod error;
pub mod measure;
pub mod model;
pub mod reconstruction;
pub mod transport;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/transport.md")]
    mod transport {}
    #[doc = include_str!("../../../book/src/dual.md")]
    mod dual {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    mod reconstruction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
