//! Equilibrium selection for generalized Nash games with shared affine
//! constraints.
//!
//! A lower-level game is described by a [`LowerGame`]: per-player convex
//! strategy sets, a monotone Lipschitz pseudo-gradient and a shared
//! constraint `Lx ∈ D`. Its variational equilibria are the fixed points of a
//! forward-backward-forward operator on the primal-dual space. The
//! [`solver`] module runs the hybrid steepest descent method on top of that
//! operator to select, among all equilibria, the one that minimizes an upper
//! level objective described by an [`UpperSelector`].

pub mod error;
pub mod experiment;
mod linalg;
pub mod model;
pub mod oracles;
pub mod sets;
pub mod solver;
pub mod space;
pub mod splitting;

pub use error::{Error, Result};
pub use model::{CoupledGame, LinearCoupling, LowerGame, PseudoGradient, UpperSelector};
pub use sets::{BallSet, BoxSet, ConvexSet, UpperBoundedSet, WholeSpace};
pub use solver::{IterationTrace, SolverConfig};
pub use space::{BlockVector, PrimalDualPoint, SpaceSignature};
pub use splitting::{DualUpdate, SplittingContext, StepPolicy};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    mod spaces {}
    #[doc = include_str!("../../../book/src/sets.md")]
    mod sets {}
    #[doc = include_str!("../../../book/src/games.md")]
    mod games {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
}
