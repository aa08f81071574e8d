//! Ground-to-satellite spectrum coexistence toolkit.
//!
//! The crate models how passive EESS microwave radiometers (e.g. ATMS at
//! 23.8 GHz) see terrestrial mm-wave transmitters, and what to do about it:
//!
//! * [`orbit`]: TLE ingestion, SGP4 propagation, WGS-84 frames, look angles.
//! * [`radiometer`]: cross-track scan phase, pixel footprints and the
//!   subtension predicate.
//! * [`geofence`]: dark-space schedules (when a transmitter must pause) and
//!   white-space availability, plus a brute-force sampling oracle.
//! * [`linkbudget`]: loss chain, noise power and the ON/OFF detection ratio.
//! * [`propagation`]: LOS and two-ray aggregate interference, deployments
//!   and compliance statistics.
//! * [`experiment`]: flashlight pulse planning, ON/OFF pairing, safety audit
//!   and pixel exclusion records.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the default
//! `parallel` feature they run on rayon, otherwise sequentially.

pub mod exec;
pub mod experiment;
pub mod geofence;
pub mod linkbudget;
pub mod orbit;
pub mod propagation;
pub mod radiometer;
pub mod time;

pub use orbit::{GroundPoint, LookAngles, OrbitalElements, SatelliteState};
pub use radiometer::{PixelFootprint, RadiometerSpec, ScanSample};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
