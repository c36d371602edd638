//! Exact and numeric machinery for building infinitely ramified `p`-adic
//! lifts of a mod `p` Galois representation over a synthetic global model.

pub mod analytic;
pub mod groups;
pub mod lifter;
pub mod linalg;
pub mod localdims;
pub mod tame;
pub mod zmod;
