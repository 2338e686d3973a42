//! Few-shot part labelling.
//!
//! Each rendered frame's patch features are labelled by kNN against an
//! annotated exemplar set (2D-2D), and the resulting label maps are
//! distilled onto the Gaussians by per-label influence voting (2D-3D).

use rayon::prelude::*;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::mask::LabelMap2D;
use crate::parallel::ordered_fold;
use crate::scene::GaussianScene;
use crate::splatting::{accumulate_partitioned, RenderConfig};

/// Label id reserved for background.
pub const BACKGROUND: u8 = 0;

pub const DEFAULT_K: usize = 5;

/// Patch-grid feature vectors for one image, row-major by patch then channel.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    grid_h: u32,
    grid_w: u32,
    dim: u32,
    patch_px: u32,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(grid_h: u32, grid_w: u32, dim: u32, patch_px: u32, data: Vec<f32>) -> Result<Self> {
        let ctx = "feature map";
        if grid_h == 0 || grid_w == 0 || dim == 0 || patch_px == 0 {
            return Err(Error::data(
                ctx,
                "grid size, dim and patch_px must all be positive",
            ));
        }
        let expected = grid_h as usize * grid_w as usize * dim as usize;
        if data.len() != expected {
            return Err(Error::dimension(format!(
                "feature map holds {} floats, expected {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(
                ctx,
                format!("non-finite value in patch {}", i / dim as usize),
            ));
        }
        Ok(FeatureMap {
            grid_h,
            grid_w,
            dim,
            patch_px,
            data,
        })
    }

    pub fn grid_h(&self) -> u32 {
        self.grid_h
    }

    pub fn grid_w(&self) -> u32 {
        self.grid_w
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn patch_px(&self) -> u32 {
        self.patch_px
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn patch_count(&self) -> usize {
        self.grid_h as usize * self.grid_w as usize
    }

    /// Feature of patch number `patch` (row-major).
    pub fn patch(&self, patch: usize) -> &[f32] {
        let d = self.dim as usize;
        &self.data[patch * d..(patch + 1) * d]
    }

    pub fn patch_mut(&mut self, patch: usize) -> &mut [f32] {
        let d = self.dim as usize;
        &mut self.data[patch * d..(patch + 1) * d]
    }

    /// Patch index owning pixel `(x, y)`.
    pub fn patch_of(&self, x: u32, y: u32) -> usize {
        (y / self.patch_px) as usize * self.grid_w as usize + (x / self.patch_px) as usize
    }

    /// The grid must cover the image; the last row and column may be partial.
    pub fn check_covers(&self, width: u32, height: u32) -> Result<()> {
        let covers = |grid: u32, extent: u32| {
            let span = u64::from(grid) * u64::from(self.patch_px);
            span >= u64::from(extent) && span - u64::from(self.patch_px) < u64::from(extent)
        };
        if !covers(self.grid_w, width) || !covers(self.grid_h, height) {
            return Err(Error::dimension(format!(
                "{}x{} patches of {} px do not tile a {width}x{height} image",
                self.grid_w, self.grid_h, self.patch_px
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Exemplar {
    pub label: u8,
    pub feature: Vec<f32>,
}

/// Annotated training features for kNN. Label 0 is background.
#[derive(Clone, Debug, PartialEq)]
pub struct ExemplarSet {
    labels: Vec<String>,
    entries: Vec<Exemplar>,
    /// Unit-normalized copies of the entries, flattened.
    unit: Vec<f64>,
    dim: usize,
}

impl ExemplarSet {
    pub fn new(labels: Vec<String>, entries: Vec<Exemplar>) -> Result<Self> {
        let ctx = "exemplars";
        if labels.is_empty() || labels.len() > usize::from(u8::MAX) {
            return Err(Error::data(ctx, "between 1 and 255 labels are required"));
        }
        if entries.is_empty() {
            return Err(Error::data(ctx, "no exemplar entries"));
        }
        let dim = entries[0].feature.len();
        if dim == 0 {
            return Err(Error::data(ctx, "exemplar features are empty"));
        }
        let mut unit = Vec::with_capacity(entries.len() * dim);
        for (i, e) in entries.iter().enumerate() {
            if usize::from(e.label) >= labels.len() {
                return Err(Error::data(
                    ctx,
                    format!(
                        "entry {i} has label {} of {} declared",
                        e.label,
                        labels.len()
                    ),
                ));
            }
            if e.feature.len() != dim {
                return Err(Error::dimension(format!(
                    "exemplar entry {i} has dim {}, entry 0 has {dim}",
                    e.feature.len()
                )));
            }
            if e.feature.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(
                    ctx,
                    format!("entry {i} has a non-finite feature"),
                ));
            }
            let norm = l2(&e.feature);
            if norm == 0.0 {
                return Err(Error::data(
                    ctx,
                    format!("entry {i} has a zero-norm feature"),
                ));
            }
            unit.extend(e.feature.iter().map(|&v| f64::from(v) / norm));
        }
        for (id, name) in labels.iter().enumerate().skip(1) {
            if !entries.iter().any(|e| usize::from(e.label) == id) {
                return Err(Error::data(
                    ctx,
                    format!("label '{name}' ({id}) has no entries"),
                ));
            }
        }
        Ok(ExemplarSet {
            labels,
            entries,
            unit,
            dim,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn entries(&self) -> &[Exemplar] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    fn unit(&self, i: usize) -> &[f64] {
        &self.unit[i * self.dim..(i + 1) * self.dim]
    }

    /// kNN label for one feature vector; `None` for a zero-norm query.
    ///
    /// The `k` most similar entries (cosine; equal similarity resolved by
    /// entry order) vote by count. A count tie goes to the label with the
    /// larger summed similarity, then to the lower label id.
    pub fn classify(&self, feature: &[f32], k: usize) -> Option<u8> {
        debug_assert_eq!(feature.len(), self.dim);
        let norm = l2(feature);
        if norm == 0.0 {
            return None;
        }
        let mut sims: Vec<(f64, usize)> = (0..self.entries.len())
            .map(|i| {
                let dot: f64 = self
                    .unit(i)
                    .iter()
                    .zip(feature)
                    .map(|(a, &b)| a * f64::from(b))
                    .sum();
                (dot / norm, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        let k = k.clamp(1, sims.len());
        if k < sims.len() {
            sims.select_nth_unstable_by(k - 1, order);
            sims.truncate(k);
        }

        let mut count = vec![0usize; self.labels.len()];
        let mut total = vec![0.0f64; self.labels.len()];
        // fixed summation order for determinism
        sims.sort_by(order);
        for &(s, i) in &sims {
            let l = usize::from(self.entries[i].label);
            count[l] += 1;
            total[l] += s;
        }
        (0..self.labels.len())
            .filter(|&l| count[l] > 0)
            .max_by(|&a, &b| {
                count[a]
                    .cmp(&count[b])
                    .then(total[a].total_cmp(&total[b]))
                    .then(b.cmp(&a))
            })
            .map(|l| l as u8)
    }
}

fn l2(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchLabels {
    /// One label per patch, row-major.
    pub labels: Vec<u8>,
    /// Patches whose feature had zero norm; they are labelled background.
    pub zero_norm: usize,
}

/// Labels every patch of `features` by kNN over `exemplars`.
pub fn classify_patches(
    features: &FeatureMap,
    exemplars: &ExemplarSet,
    k: usize,
) -> Result<PatchLabels> {
    if k == 0 {
        return Err(Error::usage("k must be at least 1"));
    }
    if features.dim() as usize != exemplars.dim() {
        return Err(Error::dimension(format!(
            "feature dim {} does not match exemplar dim {}",
            features.dim(),
            exemplars.dim()
        )));
    }
    let labels: Vec<Option<u8>> = (0..features.patch_count())
        .into_par_iter()
        .map(|p| exemplars.classify(features.patch(p), k))
        .collect();
    let zero_norm = labels.iter().filter(|l| l.is_none()).count();
    Ok(PatchLabels {
        labels: labels
            .into_iter()
            .map(|l| l.unwrap_or(BACKGROUND))
            .collect(),
        zero_norm,
    })
}

/// Paints per-patch labels over a `width x height` image. Pixel `(x, y)`
/// belongs to patch `(y / patch_px, x / patch_px)`.
pub fn paint_patches(
    features: &FeatureMap,
    patch_labels: &[u8],
    width: u32,
    height: u32,
) -> Result<LabelMap2D> {
    features.check_covers(width, height)?;
    if patch_labels.len() != features.patch_count() {
        return Err(Error::dimension(format!(
            "{} patch labels for {} patches",
            patch_labels.len(),
            features.patch_count()
        )));
    }
    let mut labels = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        for x in 0..width {
            labels.push(patch_labels[features.patch_of(x, y)]);
        }
    }
    LabelMap2D::new(width, height, labels)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transfer2D {
    pub label_map: LabelMap2D,
    pub patches: PatchLabels,
}

/// 2D-2D transfer: kNN patch labels painted into a full-resolution label map.
pub fn transfer_2d(
    features: &FeatureMap,
    exemplars: &ExemplarSet,
    k: usize,
    width: u32,
    height: u32,
) -> Result<Transfer2D> {
    features.check_covers(width, height)?;
    let patches = classify_patches(features, exemplars, k)?;
    let label_map = paint_patches(features, &patches.labels, width, height)?;
    Ok(Transfer2D { label_map, patches })
}

/// Labels x Gaussians matrix of accumulated influence.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVotes {
    labels: usize,
    gaussians: usize,
    data: Vec<f64>,
}

impl LabelVotes {
    pub fn zeros(labels: usize, gaussians: usize) -> Self {
        LabelVotes {
            labels,
            gaussians,
            data: vec![0.0; labels * gaussians],
        }
    }

    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn gaussian_count(&self) -> usize {
        self.gaussians
    }

    pub fn row(&self, label: usize) -> &[f64] {
        &self.data[label * self.gaussians..(label + 1) * self.gaussians]
    }

    pub fn row_mut(&mut self, label: usize) -> &mut [f64] {
        &mut self.data[label * self.gaussians..(label + 1) * self.gaussians]
    }

    pub fn get(&self, label: usize, gaussian: usize) -> f64 {
        self.data[label * self.gaussians + gaussian]
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// Winning label per Gaussian. Ties, including all-zero columns, go to
    /// the lowest id, so unseen Gaussians are background.
    pub fn argmax(&self) -> Vec<u8> {
        (0..self.gaussians)
            .map(|g| {
                let mut best = 0;
                for l in 1..self.labels {
                    if self.get(l, g) > self.get(best, g) {
                        best = l;
                    }
                }
                best as u8
            })
            .collect()
    }
}

/// 2D-3D distillation: for each frame and each label, adds the influence
/// of every Gaussian over that label's pixels to the label's row.
pub fn distill_labels(
    scene: &GaussianScene,
    frames: &[(Camera, LabelMap2D)],
    label_count: usize,
    config: &RenderConfig,
) -> Result<LabelVotes> {
    if frames.is_empty() {
        return Err(Error::usage("at least one frame is required"));
    }
    if label_count == 0 || label_count > usize::from(u8::MAX) {
        return Err(Error::usage("between 1 and 255 labels are required"));
    }
    ordered_fold(
        frames,
        LabelVotes::zeros(label_count, scene.len()),
        |_, (camera, map)| {
            map.check_camera(camera)?;
            map.validate_labels(label_count)?;
            accumulate_partitioned(scene, camera, &map.labels, label_count, config)
        },
        |mut votes, per_label| {
            for (l, buffer) in per_label.iter().enumerate() {
                for (v, b) in votes.row_mut(l).iter_mut().zip(buffer.as_slice()) {
                    *v += b;
                }
            }
            votes
        },
    )
}

#[derive(Clone, Debug)]
pub struct AffordanceResult {
    /// Winning label per Gaussian.
    pub labels: Vec<u8>,
    pub votes: LabelVotes,
    /// The 2D transfer of every frame, in frame order.
    pub label_maps: Vec<LabelMap2D>,
    pub zero_norm_patches: usize,
}

/// Full pipeline: kNN transfer per frame, then influence voting and argmax.
pub fn affordance_segment(
    scene: &GaussianScene,
    frames: &[(Camera, FeatureMap)],
    exemplars: &ExemplarSet,
    k: usize,
    config: &RenderConfig,
) -> Result<AffordanceResult> {
    if frames.is_empty() {
        return Err(Error::usage("at least one frame is required"));
    }
    let transfers: Vec<Transfer2D> = frames
        .iter()
        .map(|(camera, features)| transfer_2d(features, exemplars, k, camera.width, camera.height))
        .collect::<Result<_>>()?;
    let zero_norm_patches = transfers.iter().map(|t| t.patches.zero_norm).sum();
    let labelled: Vec<(Camera, LabelMap2D)> = frames
        .iter()
        .zip(transfers)
        .map(|((camera, _), t)| (camera.clone(), t.label_map))
        .collect();
    let votes = distill_labels(scene, &labelled, exemplars.label_count(), config)?;
    Ok(AffordanceResult {
        labels: votes.argmax(),
        votes,
        label_maps: labelled.into_iter().map(|(_, m)| m).collect(),
        zero_norm_patches,
    })
}
