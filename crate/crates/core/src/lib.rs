//! Exact and certified computations on coprime-fraction approximation sets
//! over the circle, the p-adic integers and formal Laurent series.

pub mod blocks;
pub mod borel_cantelli;
pub mod certified;
pub mod cli;
pub mod circle;
pub mod dimfn;
pub mod laurent;
pub mod numtheory;
pub mod padic;
pub mod poly;
pub mod psi;
pub mod psi_gen;
pub mod rational;
pub mod series;

pub use rational::Rational;
