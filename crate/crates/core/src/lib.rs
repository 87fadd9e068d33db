//! Charged particle on a square lattice in crossed electric and magnetic
//! fields: fibered spectra, transporting states, wave-packet propagation,
//! the effective classical system and the derived transport observables.

pub mod bands;
pub mod bessel;
pub mod classical;
pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod fiber;
pub mod gauge;
pub mod lattice;
pub mod model;
pub mod observables;
pub mod packet;
pub mod patch;
pub mod perturbation;
pub mod propagate;
pub mod strip;
pub mod transport;

pub use error::{Error, Result};
pub use lattice::{from_extended, to_extended, ExtendedIndex, SiteIndex};
pub use model::{derive_scales, validate, DerivedScales, Direction, Gauge, ModelConfig};
