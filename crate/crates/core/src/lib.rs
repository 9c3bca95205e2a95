pub mod cli;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod nspoly;
pub mod orthogonalizer;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod theory;
pub mod verify;
