//! Vortex sheets of the magnetic Ginzburg–Landau equations in R⁴ along
//! minimal surfaces: the radial vortex, surface and tube geometry,
//! approximate solutions with their residuals, the 2-D linearized operator
//! and the Jacobi system on the surface.
//!
//! Geometry and interpolation are generic over [`Real`] (`f32`, `f64`); the
//! solvers and field assembly work in `f64`.

pub mod error;
pub mod fermi;
pub mod fields;
pub mod interp;
pub mod jacobi;
pub mod linop;
pub mod profile;
pub mod scalar;
pub mod sparse;
pub mod stencil;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Catenoid64 = surface::Catenoid<f64>;
pub type Catenoid32 = surface::Catenoid<f32>;
pub type Cylinder64 = surface::Cylinder<f64>;
pub type Cylinder32 = surface::Cylinder<f32>;
pub type Plane64 = surface::Plane<f64>;
pub type Plane32 = surface::Plane<f32>;
pub type ChartGrid64 = surface::ChartGrid<f64>;
pub type ChartGrid32 = surface::ChartGrid<f32>;
pub type FermiFrame64 = fermi::FermiFrame<f64>;
pub type FermiFrame32 = fermi::FermiFrame<f32>;
