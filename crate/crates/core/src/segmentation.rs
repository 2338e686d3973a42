//! Lifting 2D masks to a 3D Gaussian mask by voting.
//!
//! Per frame, every Gaussian's influence over the mask is added to its vote
//! and its influence over the complement is subtracted; Gaussians with a
//! strictly positive total are selected. Two simpler voters are provided
//! for comparison: one counts projected centers inside the mask regardless
//! of occlusion, the other casts a constant +1/-1 per frame wherever the
//! Gaussian has any influence at all.

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::mask::{GaussianMask, Mask2D};
use crate::parallel::ordered_fold;
use crate::scene::GaussianScene;
use crate::splatting::{accumulate_partitioned, InfluenceBuffer, RenderConfig};

/// Default influence threshold of the constant-magnitude voter.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentMethod {
    /// Influence-weighted foreground minus background.
    Ours,
    /// +1/-1 for the projected center falling inside/outside the mask.
    Baseline1,
    /// +1 if foreground influence exceeds epsilon, -1 if background does.
    Baseline2,
}

/// Signed per-Gaussian vote accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteState(pub Vec<f64>);

impl VoteState {
    pub fn zeros(len: usize) -> Self {
        VoteState(vec![0.0; len])
    }

    /// Strictly positive votes are in; never-seen Gaussians (vote 0) are out.
    pub fn to_mask(&self) -> GaussianMask {
        GaussianMask(self.0.iter().map(|&v| v > 0.0).collect())
    }

    /// Adds `foreground - background` for one frame.
    pub fn add_frame(&mut self, foreground: &InfluenceBuffer, background: &InfluenceBuffer) {
        for ((v, f), b) in self
            .0
            .iter_mut()
            .zip(foreground.as_slice())
            .zip(background.as_slice())
        {
            *v += f - b;
        }
    }
}

#[derive(Clone, Debug)]
pub struct Segmentation {
    pub mask: GaussianMask,
    pub votes: VoteState,
}

/// Influence over the mask and over its complement, from one traversal.
pub fn masked_influence(
    scene: &GaussianScene,
    camera: &Camera,
    mask: &Mask2D,
    config: &RenderConfig,
) -> Result<(InfluenceBuffer, InfluenceBuffer)> {
    mask.check_camera(camera)?;
    let ids: Vec<u8> = mask.bits.iter().map(|&b| u8::from(b)).collect();
    let mut buffers = accumulate_partitioned(scene, camera, &ids, 2, config)?;
    let foreground = buffers.pop().expect("two classes");
    let background = buffers.pop().expect("two classes");
    Ok((foreground, background))
}

fn check_frames(frames: &[(Camera, Mask2D)]) -> Result<()> {
    if frames.is_empty() {
        return Err(Error::usage("segmentation needs at least one frame"));
    }
    for (i, (camera, mask)) in frames.iter().enumerate() {
        mask.check_camera(camera)
            .map_err(|e| Error::dimension(format!("frame {i}: {e}")))?;
    }
    Ok(())
}

/// Influence-weighted voting.
pub fn segment(
    scene: &GaussianScene,
    frames: &[(Camera, Mask2D)],
    config: &RenderConfig,
) -> Result<Segmentation> {
    check_frames(frames)?;
    let votes = ordered_fold(
        frames,
        VoteState::zeros(scene.len()),
        |_, (camera, mask)| masked_influence(scene, camera, mask, config),
        |mut votes, (fg, bg)| {
            votes.add_frame(&fg, &bg);
            votes
        },
    )?;
    Ok(Segmentation {
        mask: votes.to_mask(),
        votes,
    })
}

/// Center-in-mask voting. Occlusion is ignored: a Gaussian hidden behind
/// the masked object still collects votes.
pub fn segment_baseline1(
    scene: &GaussianScene,
    frames: &[(Camera, Mask2D)],
    config: &RenderConfig,
) -> Result<Segmentation> {
    check_frames(frames)?;
    let votes = ordered_fold(
        frames,
        VoteState::zeros(scene.len()),
        |_, (camera, mask)| Ok::<_, Error>(center_votes(scene, camera, mask, config)),
        |mut votes, frame| {
            for (v, f) in votes.0.iter_mut().zip(frame) {
                *v += f;
            }
            votes
        },
    )?;
    Ok(Segmentation {
        mask: votes.to_mask(),
        votes,
    })
}

fn center_votes(
    scene: &GaussianScene,
    camera: &Camera,
    mask: &Mask2D,
    config: &RenderConfig,
) -> Vec<f64> {
    let rotation = camera.rotation();
    let translation = camera.translation();
    scene
        .means()
        .iter()
        .map(|m| {
            let p = rotation * nalgebra::Vector3::from(m.map(f64::from)) + translation;
            if p.z <= config.near {
                return 0.0;
            }
            let u = (camera.fx * p.x / p.z + camera.cx + 0.5).floor();
            let v = (camera.fy * p.y / p.z + camera.cy + 0.5).floor();
            let on_image =
                u >= 0.0 && v >= 0.0 && u < f64::from(camera.width) && v < f64::from(camera.height);
            match on_image {
                false => 0.0,
                true if mask.get(u as u32, v as u32) => 1.0,
                true => -1.0,
            }
        })
        .collect()
}

/// Constant-magnitude voting: per frame, +1 when foreground influence
/// exceeds `epsilon` and -1 when background influence does (both can fire).
pub fn segment_baseline2(
    scene: &GaussianScene,
    frames: &[(Camera, Mask2D)],
    epsilon: f64,
    config: &RenderConfig,
) -> Result<Segmentation> {
    check_frames(frames)?;
    let votes = ordered_fold(
        frames,
        VoteState::zeros(scene.len()),
        |_, (camera, mask)| masked_influence(scene, camera, mask, config),
        |mut votes, (fg, bg)| {
            for ((v, f), b) in votes.0.iter_mut().zip(fg.as_slice()).zip(bg.as_slice()) {
                if *f > epsilon {
                    *v += 1.0;
                }
                if *b > epsilon {
                    *v -= 1.0;
                }
            }
            votes
        },
    )?;
    Ok(Segmentation {
        mask: votes.to_mask(),
        votes,
    })
}

/// Dispatches to one of the three voters.
pub fn segment_with(
    method: SegmentMethod,
    scene: &GaussianScene,
    frames: &[(Camera, Mask2D)],
    epsilon: f64,
    config: &RenderConfig,
) -> Result<Segmentation> {
    match method {
        SegmentMethod::Ours => segment(scene, frames, config),
        SegmentMethod::Baseline1 => segment_baseline1(scene, frames, config),
        SegmentMethod::Baseline2 => segment_baseline2(scene, frames, epsilon, config),
    }
}

/// The Gaussians selected by `mask`.
pub fn extract(scene: &GaussianScene, mask: &GaussianMask) -> Result<GaussianScene> {
    scene.select(mask.as_slice())
}

/// The Gaussians not selected by `mask`.
pub fn delete(scene: &GaussianScene, mask: &GaussianMask) -> Result<GaussianScene> {
    let keep: Vec<bool> = mask.as_slice().iter().map(|b| !b).collect();
    scene.select(&keep)
}
