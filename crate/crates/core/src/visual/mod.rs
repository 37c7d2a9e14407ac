//! Post-hoc visualization: glyph charts, heatmaps, discriminative fraglets,
//! overlays and plots.

mod glyphs;
mod saliency;
mod svg;

pub use glyphs::*;
pub use saliency::*;
pub use svg::{render_scatter, render_series, PALETTE};
