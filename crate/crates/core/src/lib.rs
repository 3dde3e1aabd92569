pub mod data;
pub mod density;
pub mod encode;
pub mod error;
pub mod fock;
pub mod kernels;
pub mod learn;
pub mod lossmodel;
pub mod measure;
pub mod rng;
pub mod specialfn;

pub use error::{KerrError, Result};
