//! Serial statistics over a distance matrix: vote curve, group tests,
//! neighbour position series and logistic transition fits.

mod logistic;
mod series;
mod summary;

pub use logistic::*;
pub use series::*;
pub use summary::*;
