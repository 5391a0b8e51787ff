//! Numerical toolkit for Kähler–Einstein potentials on the ball and on
//! radial strongly pseudoconvex domains.
//!
//! The core is a forward-mode Wirtinger jet engine ([`complexad`]). On top of it
//! sit metric and curvature evaluation ([`kaehler`]), the domain catalog and
//! ball automorphisms ([`domains`]), the boundary scaling experiment
//! ([`scaling`]), the holomorphic gradient field and its flow
//! ([`vectorfield`]) and a radial Monge–Ampère solver ([`ma_solver`]).

pub mod complexad;
pub mod domains;
pub mod error;
pub mod kaehler;
pub mod linalg;
pub mod ma_solver;
pub mod ode;
pub mod sampling;
pub mod scaling;
pub mod vectorfield;

pub use complexad::{CPoint, Coords, JetEval, Var, WJet};
pub use error::{Error, Result};
