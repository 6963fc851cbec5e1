//! Oil-slick segmentation of dual-polarisation SAR scenes with bagged
//! support vector machines trained classically, by simulated annealing of a
//! QUBO, or with a simulated gate-circuit kernel.

pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod gate;
pub mod pipeline;
pub mod preprocess;
pub mod qubo;
pub mod raster;
pub mod scene_io;
pub mod seed;
pub mod svm;

pub use error::{Error, Result};
