//! Lawrence-Doniach (LD) and anisotropic Ginzburg-Landau (AGL) models of
//! layered superconductors on a staggered lattice-gauge grid.
//!
//! The crate builds the discretized energies, the periodic vortex-lattice
//! test configuration used for upper bounds, single-layer potentials and a
//! set of diagnostics, plus a batch runner behind the `ldgl` binary.

pub mod analysis;
pub mod construction;
pub mod domain;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod io;
pub mod linalg;
pub mod minimize;
pub mod potentials;
pub mod sum;

pub use domain::{build_domain, Domain, Mesh, ModelParams, PlaneGrid};
pub use energy::{EnergyBreakdown, Gl2dMode};
pub use error::{Error, Result};
pub use fields::{
    ContinuumConfiguration, GaugeFunction, LayerStack, LayeredConfiguration, PlaneLinks,
    Potential3D, C64,
};
