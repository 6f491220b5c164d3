//! Deterministic, polarization-aware ray tracing of UWB links in metal-shelf warehouses.
//!
//! Paths are found by shooting and bouncing rays with reception-sphere capture,
//! refined to exact geometry by the image method, and complemented by single
//! UTD edge diffraction. Fields are synthesized per path with Fresnel
//! reflection, band-averaged and thresholded into coverage maps.

pub mod antenna;
pub mod diffraction;
pub mod exec;
pub mod geometry;
pub mod link;
pub mod materials;
pub mod pathfinder;
pub mod report;
pub mod scenario;
pub mod validate;

pub use exec::Execution;
