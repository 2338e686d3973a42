//! Software splat renderer.
//!
//! [`project`] turns Gaussians into screen-space splats; [`rasterize`]
//! blends them front to back and can simultaneously accumulate, per
//! Gaussian, the blending weight `alpha * T` it received over a set of
//! pixel classes. That weight is exactly the derivative of the pixel color
//! with respect to the Gaussian's color, so it doubles as an influence
//! score for voting and pruning.

mod project;
mod raster;

use serde::{Deserialize, Serialize};

pub use project::{project, project_gaussian, Projection, Splat2D};
pub use raster::{
    accumulate_influence, accumulate_partitioned, max_abs_pixel_error, rasterize, render,
    InfluenceBuffer, Rasterized, RenderedImage, NO_CLASS,
};

/// Numerical constants of the rasterizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Added to both diagonal entries of every 2D covariance (px^2).
    pub low_pass: f64,
    /// Per-splat alpha is clamped to this value.
    pub alpha_max: f64,
    /// Splats with alpha below this are skipped at a pixel.
    pub alpha_min: f64,
    /// A pixel stops blending once its transmittance drops below this.
    pub min_transmittance: f64,
    /// Splat extent in standard deviations.
    pub extent_sigmas: f64,
    /// Gaussians with view depth at or below this are culled.
    pub near: f64,
    /// Side of the square tiles used to bin splats. Output does not depend
    /// on it beyond floating-point summation order of influence.
    pub tile_size: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            low_pass: 0.3,
            alpha_max: 0.99,
            alpha_min: 1.0 / 255.0,
            min_transmittance: 1e-4,
            extent_sigmas: 3.0,
            near: 0.01,
            tile_size: 16,
        }
    }
}
