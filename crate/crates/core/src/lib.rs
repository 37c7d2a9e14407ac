pub mod contour;
pub mod corpus;
pub mod error;
pub mod image;

pub use error::{Error, Result};
pub mod codebook;
pub mod feature;
pub mod fraglet;
pub mod hinge;
pub mod pipeline;
pub mod preproc;
pub mod space;
pub mod stats;
pub mod synth;
pub mod visual;
