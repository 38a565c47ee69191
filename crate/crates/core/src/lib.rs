//! Veering triangulations of punctured mapping tori, Thurston's gluing
//! equations, and interval-certified (non-)geometricity verdicts.

pub mod certify;
pub mod cli;
pub mod cusp;
pub mod flatsurf;
pub mod geometry;
pub mod homology;
pub mod interval;
pub mod perm;
pub mod triangulation;
pub mod veering;
