//! Numerical verification kernel for capillary hypersurfaces in balls in
//! space forms: test-surface factories, identity certification (Minkowski,
//! Robin, Jacobi, Heintze-Karcher-Ros), and constrained stability spectra.

pub mod geometry;
pub mod hkr;
pub mod identities;
pub mod quadrature;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod spaceform;
pub mod stability;
pub mod surfaces;
