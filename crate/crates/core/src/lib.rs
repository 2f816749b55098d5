//! Exact simulation of a two-qubit circuit whose chained classical deductions
//! fail, together with the analysis around it: classical-vs-quantum outcome
//! curves, state discrimination bounds, a Jones-calculus model of a photonic
//! realization, and simulated state tomography with maximum-likelihood
//! reconstruction.

pub mod circuit;
pub mod io;
pub mod logic;
pub mod optics;
pub mod qcore;
pub mod tomography;
