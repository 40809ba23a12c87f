//! Genetic programming for symbolic regression built around a linear-time
//! tree hashing pass.
//!
//! Hash sequences give a cheap structural distance between trees, which in
//! turn drives population diversity measurement and diversity-aware
//! selection, and they identify isomorphic subtrees for simplification.

pub mod expr;
pub mod diversity;
pub mod evolve;
pub mod hash;
pub mod par;
pub mod problems;
pub mod simplify;
