//! Exact q-calculus on polynomials: Askey-Wilson operators, the q-families
//! of orthogonal polynomials, structure relations, and their characterization.

pub mod awops;
pub mod characterize;
pub mod cli;
pub mod families;
pub mod linalg;
pub mod poly;
pub mod scalar;
pub mod structure;
