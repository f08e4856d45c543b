pub mod data;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod measures;
pub mod nn;
pub mod optim;
pub mod scalar;
pub mod seed;

pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Network64 = nn::Network<f64>;
pub type Network32 = nn::Network<f32>;
pub type Measure64 = measures::Measure<f64>;
pub type Measure32 = measures::Measure<f32>;
pub type Matrix64 = Matrix<f64>;
