//! Numerics for quasiperiodic SL(2,ℝ) Schrödinger cocycles.
//!
//! The crate computes finite-scale Lyapunov exponents of transfer-matrix
//! cocycles over irrational rotations, provides the avalanche-principle and
//! multiscale machinery needed to extrapolate the infinite-scale exponent
//! from two finite scales, and carries almost-Mathieu specifics (periodic
//! approximant spectra via the trace condition).
//!
//! Per-x grid evaluations are data-parallel; with the default `parallel`
//! feature they fan out over a rayon pool. Reductions always run in a fixed
//! sequential order so results are bit-identical regardless of thread count.

pub mod amo;
pub mod avalanche;
pub mod cocycle;
pub mod diophantine;
pub mod error;
pub mod experiments;
pub mod lyapunov;
pub mod multiscale;
pub mod par;
pub mod potential;
pub mod sl2;

pub use error::{Error, Result};
pub use potential::PotentialSpec;
pub use sl2::Sl2;
