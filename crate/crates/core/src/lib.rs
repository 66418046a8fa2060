//! Pseudo-spectral Monte Carlo simulation of the renormalized cubic
//! stochastic nonlinear wave equation on the 3-torus.

pub mod lattice;
pub mod noise;
pub mod renorm;
pub mod objects;
pub mod diagnostics;
pub mod solver;
pub mod counting;
pub mod ensemble;
pub mod cli;
