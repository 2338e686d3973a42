//! Segmentation, affordance labelling and lossless pruning of 3D Gaussian
//! splat scenes by influence voting.
//!
//! Every pipeline is built on one primitive: render a view with the
//! software rasterizer in [`splatting`] and record, per Gaussian, the total
//! blending weight it contributed to each class of pixels. Summing those
//! weights over many views turns 2D masks, label maps or plain visibility
//! into per-Gaussian decisions.
//!
//! ```no_run
//! use splatvote::{io, segmentation, splatting::RenderConfig};
//!
//! # fn main() -> splatvote::Result<()> {
//! let scene = io::load_ply("scene.ply")?;
//! let cameras = io::load_cameras("cameras.json")?;
//! let mask = io::load_mask("mask_0000.png")?;
//! let frames = vec![(cameras[0].clone(), mask)];
//! let seg = segmentation::segment(&scene, &frames, &RenderConfig::default())?;
//! io::save_ply(&segmentation::extract(&scene, &seg.mask)?, "object.ply")?;
//! # Ok(())
//! # }
//! ```

pub mod affordance;
pub mod camera;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod mask;
mod parallel;
pub mod pruning;
pub mod scene;
pub mod segmentation;
pub mod sh;
pub mod splatting;
pub mod synthetic;

pub use camera::Camera;
pub use error::{Error, Result};
pub use mask::{GaussianMask, LabelMap2D, Mask2D};
pub use scene::{Gaussian, GaussianScene};
pub use splatting::RenderConfig;
