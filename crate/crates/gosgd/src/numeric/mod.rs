//! Parameter-vector arithmetic and seeded random sources shared by every
//! other module. All arithmetic is f64; any operation that would produce a
//! NaN or infinity reports an error instead of letting it propagate.

mod kahan;
mod rng;
mod vector;

pub use kahan::Kahan;
pub use rng::{streams, RandomSource};
pub use vector::ParamVector;
