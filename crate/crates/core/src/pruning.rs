//! Lossless pruning: drop every Gaussian that never blends into any pixel
//! of any supplied view.
//!
//! The rasterizer either blends a splat with a strictly positive weight or
//! leaves the pixel untouched, so a zero total influence means the Gaussian
//! never altered any pixel's color or transmittance. Removing it leaves
//! renders from the same cameras bit-identical. Other viewpoints carry no
//! such guarantee.

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::parallel::ordered_fold;
use crate::scene::GaussianScene;
use crate::splatting::{
    max_abs_pixel_error, rasterize, render, InfluenceBuffer, RenderConfig, RenderedImage,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub original_count: usize,
    pub pruned_count: usize,
    /// Percentage of Gaussians removed.
    pub removed_fraction: f64,
    pub max_abs_pixel_error: f64,
    pub per_camera_errors: Vec<f64>,
}

/// Whole-image influence summed over `cameras`, plus each camera's render.
fn full_frame_votes(
    scene: &GaussianScene,
    cameras: &[Camera],
    config: &RenderConfig,
) -> Result<(InfluenceBuffer, Vec<RenderedImage>)> {
    ordered_fold(
        cameras,
        (
            InfluenceBuffer::zeros(scene.len()),
            Vec::with_capacity(cameras.len()),
        ),
        |_, camera| {
            let ids = vec![0u8; camera.pixel_count()];
            rasterize(scene, camera, Some((&ids, 1)), config)
        },
        |(mut votes, mut images), mut r| {
            votes.add(&r.influence.swap_remove(0));
            images.push(r.image);
            (votes, images)
        },
    )
}

/// Whole-image influence of every Gaussian, summed over `cameras`.
pub fn visibility_votes(
    scene: &GaussianScene,
    cameras: &[Camera],
    config: &RenderConfig,
) -> Result<InfluenceBuffer> {
    Ok(full_frame_votes(scene, cameras, config)?.0)
}

/// Keeps Gaussians with strictly positive whole-image influence and checks
/// the result against the original renders.
pub fn prune(
    scene: &GaussianScene,
    cameras: &[Camera],
    config: &RenderConfig,
) -> Result<(GaussianScene, PruneReport)> {
    if cameras.is_empty() {
        return Err(Error::usage("pruning needs at least one camera"));
    }
    let (votes, originals) = full_frame_votes(scene, cameras, config)?;
    let keep: Vec<bool> = votes.as_slice().iter().map(|&v| v > 0.0).collect();
    let pruned = scene.select(&keep)?;

    let per_camera_errors = ordered_fold(
        cameras,
        Vec::with_capacity(cameras.len()),
        |i, camera| max_abs_pixel_error(&originals[i], &render(&pruned, camera, config)),
        |mut errs, e| {
            errs.push(e);
            errs
        },
    )?;
    let report = PruneReport {
        original_count: scene.len(),
        pruned_count: pruned.len(),
        removed_fraction: removed_percent(scene.len(), pruned.len()),
        max_abs_pixel_error: per_camera_errors.iter().copied().fold(0.0, f64::max),
        per_camera_errors,
    };
    Ok((pruned, report))
}

fn removed_percent(original: usize, kept: usize) -> f64 {
    if original == 0 {
        0.0
    } else {
        100.0 * (1.0 - kept as f64 / original as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub max_abs_pixel_error: f64,
    pub per_camera_errors: Vec<f64>,
}

/// Largest pixel difference between renders of two scenes over `cameras`.
pub fn verify(
    original: &GaussianScene,
    pruned: &GaussianScene,
    cameras: &[Camera],
    config: &RenderConfig,
) -> Result<Verification> {
    let per_camera_errors = ordered_fold(
        cameras,
        Vec::with_capacity(cameras.len()),
        |_, camera| {
            max_abs_pixel_error(
                &render(original, camera, config),
                &render(pruned, camera, config),
            )
        },
        |mut errs, e| {
            errs.push(e);
            errs
        },
    )?;
    Ok(Verification {
        max_abs_pixel_error: per_camera_errors.iter().copied().fold(0.0, f64::max),
        per_camera_errors,
    })
}
