pub mod estimators;
pub mod fitting;
pub mod geometry;
pub mod cli;
pub mod io;
pub mod kernels;
mod linalg;
pub mod model;
pub mod seeds;
pub mod testcases;
