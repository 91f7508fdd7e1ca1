//! Numerical toolkit for Hölder regularity of stochastic fractional heat equations.

pub mod cli;
pub mod fields;
pub mod fit;
pub mod io;
pub mod kernel;
pub mod quadrature;
pub mod regularity;
pub mod seminorms;
pub mod solver;
pub mod spectral;
