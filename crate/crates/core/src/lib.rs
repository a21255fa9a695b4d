//! Numerical weak KAM theory on the circle.
//!
//! The crate evaluates Tonelli Hamiltonians, the forward and backward
//! Lax-Oleinik semigroups on periodic grids, estimates the critical value,
//! regularizes critical sub-solutions into `C^{1,1}` ones through
//! `T_s ∘ T̆_t`, and estimates the Aubry set together with its lift.

pub mod action;
pub mod aubry;
pub mod config;
pub mod error;
pub mod flow;
pub mod grid;
pub mod hamiltonian;
pub mod laxoleinik;
pub mod regularize;
pub mod selftest;
pub mod semiconcave;

pub use error::{Error, Result};
pub use grid::GridFunction;
pub use hamiltonian::{CustomHamiltonian, Family, Hamiltonian, Potential};
pub use laxoleinik::Direction;
