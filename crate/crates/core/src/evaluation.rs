//! Mask metrics and the render-threshold protocol.
//!
//! A Gaussian mask is scored by recoloring the full scene (selected white,
//! the rest black, opacities untouched), rendering it, and thresholding the
//! grayscale image. Occluded parts of the object therefore stay hidden,
//! exactly as in the ground-truth masks.

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::mask::{GaussianMask, Mask2D};
use crate::parallel::ordered_fold;
use crate::scene::GaussianScene;
use crate::sh::dc_for_rgb;
use crate::splatting::{render, RenderConfig};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Copy of `scene` with selected Gaussians white and the rest black. Higher
/// SH bands are zeroed; geometry and opacity are unchanged.
pub fn recolor(scene: &GaussianScene, mask: &GaussianMask) -> Result<GaussianScene> {
    if mask.len() != scene.len() {
        return Err(Error::dimension(format!(
            "mask has {} entries, scene has {} Gaussians",
            mask.len(),
            scene.len()
        )));
    }
    let white = dc_for_rgb([1.0; 3]);
    let black = dc_for_rgb([0.0; 3]);
    let mut out = scene.clone();
    for (i, &selected) in mask.as_slice().iter().enumerate() {
        let sh = out.sh_mut(i);
        sh[0] = if selected { white } else { black };
        for c in &mut sh[1..] {
            *c = [0.0; 3];
        }
    }
    Ok(out)
}

/// Renders `scene` and marks pixels whose channel mean is at least `threshold`.
pub fn mask_from_render(
    scene: &GaussianScene,
    camera: &Camera,
    threshold: f64,
    config: &RenderConfig,
) -> Mask2D {
    let image = render(scene, camera, config);
    let bits = image
        .rgb
        .iter()
        .map(|p| (p[0] + p[1] + p[2]) / 3.0 >= threshold)
        .collect();
    Mask2D {
        width: image.width,
        height: image.height,
        bits,
    }
}

fn check_dims(pred: &Mask2D, gt: &Mask2D) -> Result<()> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::dimension(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    Ok(())
}

fn counts(pred: &Mask2D, gt: &Mask2D) -> (usize, usize) {
    pred.bits
        .iter()
        .zip(&gt.bits)
        .fold((0, 0), |(i, u), (&p, &g)| {
            (i + usize::from(p && g), u + usize::from(p || g))
        })
}

/// Intersection over union; 1 when both masks are empty.
pub fn iou(pred: &Mask2D, gt: &Mask2D) -> Result<f64> {
    check_dims(pred, gt)?;
    let (inter, union) = counts(pred, gt);
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Fraction of ground-truth pixels predicted; 1 when the ground truth is empty.
pub fn recall(pred: &Mask2D, gt: &Mask2D) -> Result<f64> {
    check_dims(pred, gt)?;
    let (inter, _) = counts(pred, gt);
    let total = gt.count();
    Ok(if total == 0 {
        1.0
    } else {
        inter as f64 / total as f64
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSplit {
    pub segment: Vec<usize>,
    pub eval: Vec<usize>,
}

/// Even-stride split: `ceil(fraction * n)` frames for segmentation, the rest
/// for evaluation. `seed` shifts the whole stride pattern within one stride.
pub fn split_frames(n_frames: usize, fraction: f64, seed: u64) -> Result<FrameSplit> {
    if n_frames == 0 {
        return Err(Error::usage("cannot split zero frames"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::usage(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let k = ((fraction * n_frames as f64).ceil() as usize).clamp(1, n_frames);
    let offset = (seed % (n_frames / k) as u64) as usize;
    let segment: Vec<usize> = (0..k).map(|i| i * n_frames / k + offset).collect();
    let eval = (0..n_frames).filter(|i| !segment.contains(i)).collect();
    Ok(FrameSplit { segment, eval })
}

/// One evaluation view: frame index, camera, and ground-truth mask.
#[derive(Clone, Debug)]
pub struct EvalFrame {
    pub index: usize,
    pub camera: Camera,
    pub gt: Mask2D,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_frame_iou: Vec<f64>,
    pub per_frame_recall: Vec<f64>,
    pub miou: f64,
    pub recall: Option<f64>,
    pub frames_used: Vec<usize>,
}

/// Scores `mask` against every frame's ground truth.
pub fn evaluate(
    scene: &GaussianScene,
    mask: &GaussianMask,
    frames: &[EvalFrame],
    threshold: f64,
    config: &RenderConfig,
) -> Result<EvalReport> {
    if frames.is_empty() {
        return Err(Error::usage("evaluation needs at least one frame"));
    }
    let recolored = recolor(scene, mask)?;
    let (per_frame_iou, per_frame_recall) = ordered_fold(
        frames,
        (Vec::new(), Vec::new()),
        |_, frame| {
            frame
                .gt
                .check_camera(&frame.camera)
                .map_err(|e| Error::dimension(format!("frame {}: {e}", frame.index)))?;
            let pred = mask_from_render(&recolored, &frame.camera, threshold, config);
            Ok::<_, Error>((iou(&pred, &frame.gt)?, recall(&pred, &frame.gt)?))
        },
        |(mut ious, mut recalls), (i, r)| {
            ious.push(i);
            recalls.push(r);
            (ious, recalls)
        },
    )?;
    let n = frames.len() as f64;
    Ok(EvalReport {
        miou: per_frame_iou.iter().sum::<f64>() / n,
        recall: Some(per_frame_recall.iter().sum::<f64>() / n),
        per_frame_iou,
        per_frame_recall,
        frames_used: frames.iter().map(|f| f.index).collect(),
    })
}
