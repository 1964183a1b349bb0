//! Fourier spectral solver for the L²-gradient flow of a Cahn–Hilliard plus
//! Willmore phase-field energy with a one-well/one-obstacle potential.
//!
//! The flow approximates non-oriented mean curvature flow: interfaces are
//! represented by the bump profile `-q'(dist/ε)` rather than by a phase
//! transition, so curves in 3-d, triple junctions and other non-boundary
//! sets can be evolved.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod potential;
pub mod solver;
pub mod spectral;
pub mod model;
pub mod util;

pub use error::{Error, Result};
pub use grid::{forward, inverse, Grid, RealField, SpectralField};
pub use model::{EnergyBreakdown, ModelParams, Stepper};
