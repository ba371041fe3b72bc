pub mod error;
pub mod linalg;
pub mod model;
pub mod solvers;
pub mod taboo;
pub mod fluctuation;
pub mod extrema;
pub mod mmbm;
pub mod verify;
pub mod format;
pub mod sim;
pub mod cli;
