//! Dynamic simulation of a flash clay calciner.
//!
//! The reactor is modeled as a one-dimensional plug-flow tube carrying a
//! suspension of clay particles in hot gas. Kaolinite calcines to
//! metakaolin and water vapor on the way up; the balance equations for
//! species, solid energy and gas energy in each finite-volume cell, closed
//! by temperature and pressure constraints, form a semi-explicit index-1
//! differential-algebraic system that a purpose-built implicit integrator
//! advances in time or solves directly for the steady profile.
//!
//! Crate layout:
//!
//! * [`thermo`] — heat capacities, enthalpies, internal energies and molar
//!   volumes of the species, from polynomial and Shomate-form coefficient
//!   data.
//! * [`data`] — the embedded species data file and its loader.
//! * [`chemistry`] — calcination kinetics and stoichiometry.
//! * [`transport`] — density, viscosity, pressure-drop velocity and flux
//!   laws.
//! * [`model`] — the finite-volume reactor scenario and its DAE residual.
//! * [`solver`] — the implicit integrator, consistent initialization and
//!   the steady-state solver.
//! * [`diag`] — warning counters for modeling-assumption violations.
//! * [`scenario`] — the configuration file schema and scenario loader.
//! * [`output`] — data tables and atomic file writes.
//! * [`report`] — the run report emitted next to the tables.
//! * [`cli`] — the command-line interface.

pub mod chemistry;
pub mod cli;
pub mod data;
pub mod diag;
pub mod model;
pub mod output;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod thermo;
pub mod transport;
