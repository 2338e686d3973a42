//! Procedural scenes and camera rigs for tests and demos.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::Camera;
use crate::error::Result;
use crate::evaluation::{mask_from_render, recolor, DEFAULT_THRESHOLD};
use crate::mask::{GaussianMask, Mask2D};
use crate::scene::{Gaussian, GaussianScene};
use crate::sh::dc_for_rgb;
use crate::splatting::RenderConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` cameras evenly spaced on a horizontal circle around `target`, world +z up.
pub fn ring_cameras(
    n: usize,
    radius: f64,
    height: f64,
    target: [f64; 3],
    focal: f64,
    width: u32,
    image_height: u32,
) -> Result<Vec<Camera>> {
    arc_cameras(
        n,
        radius,
        height,
        target,
        0.0,
        360.0 * (1.0 - 1.0 / n.max(1) as f64),
        focal,
        width,
        image_height,
    )
}

/// `n` cameras on a horizontal arc around `target` spanning
/// `[start_deg, start_deg + span_deg]`, measured from +x toward +y.
#[allow(clippy::too_many_arguments)]
pub fn arc_cameras(
    n: usize,
    radius: f64,
    height: f64,
    target: [f64; 3],
    start_deg: f64,
    span_deg: f64,
    focal: f64,
    width: u32,
    image_height: u32,
) -> Result<Vec<Camera>> {
    (0..n)
        .map(|i| {
            let t = if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            let theta = (start_deg + t * span_deg).to_radians();
            let eye = [
                target[0] + radius * theta.cos(),
                target[1] + radius * theta.sin(),
                target[2] + height,
            ];
            Camera::look_at(eye, target, [0.0, 0.0, 1.0], focal, width, image_height)
        })
        .collect()
}

/// Random unit quaternion, w first.
pub fn random_rotation(rng: &mut impl Rng) -> [f32; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return q.map(|v| (v / n) as f32);
        }
    }
}

/// A ball of randomly oriented anisotropic Gaussians.
#[derive(Clone, Debug)]
pub struct Blob {
    pub center: [f64; 3],
    pub radius: f64,
    pub count: usize,
    pub scale: (f64, f64),
    pub opacity: (f64, f64),
    pub rgb: [f64; 3],
}

impl Blob {
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<Gaussian> {
        (0..self.count)
            .map(|_| {
                let offset = loop {
                    let p: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                    if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                        break p;
                    }
                };
                let jitter: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.05..0.05));
                Gaussian {
                    mean: std::array::from_fn(|k| {
                        (self.center[k] + self.radius * offset[k]) as f32
                    }),
                    rotation: random_rotation(rng),
                    scale: std::array::from_fn(|_| {
                        rng.gen_range(self.scale.0..=self.scale.1) as f32
                    }),
                    opacity: rng.gen_range(self.opacity.0..=self.opacity.1) as f32,
                    sh: vec![dc_for_rgb(std::array::from_fn(|k| {
                        (self.rgb[k] + jitter[k]).clamp(0.0, 1.0)
                    }))],
                }
            })
            .collect()
    }
}

/// A scene whose Gaussians carry a group id each.
#[derive(Clone, Debug)]
pub struct LabelledScene {
    pub scene: GaussianScene,
    pub groups: Vec<u8>,
}

impl LabelledScene {
    pub fn new(sh_degree: usize) -> Result<Self> {
        Ok(LabelledScene {
            scene: GaussianScene::new(sh_degree)?,
            groups: Vec::new(),
        })
    }

    pub fn push_all(
        &mut self,
        group: u8,
        gaussians: impl IntoIterator<Item = Gaussian>,
    ) -> Result<()> {
        for g in gaussians {
            self.scene.push(g)?;
            self.groups.push(group);
        }
        Ok(())
    }

    pub fn group_mask(&self, group: u8) -> GaussianMask {
        GaussianMask(self.groups.iter().map(|&g| g == group).collect())
    }

    /// Per-camera 2D masks of `group`, rendered in-scene so occluders apply.
    pub fn render_group_masks(
        &self,
        group: u8,
        cameras: &[Camera],
        config: &RenderConfig,
    ) -> Result<Vec<Mask2D>> {
        let recolored = recolor(&self.scene, &self.group_mask(group))?;
        Ok(cameras
            .iter()
            .map(|c| mask_from_render(&recolored, c, DEFAULT_THRESHOLD, config))
            .collect())
    }
}

/// Two equal blobs of radius 1 on the x axis, `separation` apart. Group 1 is
/// the blob at negative x, group 2 the other.
pub fn two_clusters(per_cluster: usize, separation: f64, seed: u64) -> Result<LabelledScene> {
    let mut rng = rng(seed);
    let mut out = LabelledScene::new(0)?;
    for (group, x, rgb) in [
        (1u8, -separation / 2.0, [0.8, 0.3, 0.2]),
        (2, separation / 2.0, [0.2, 0.4, 0.8]),
    ] {
        let blob = Blob {
            center: [x, 0.0, 0.0],
            radius: 1.0,
            count: per_cluster,
            scale: (0.05, 0.12),
            opacity: (0.5, 0.9),
            rgb,
        };
        out.push_all(group, blob.sample(&mut rng))?;
    }
    Ok(out)
}

/// Random scene of at most `max_count` Gaussians in front of
/// [`oracle_camera`], with colors kept well inside (0, 1) so no clamping
/// occurs in rendering.
pub fn random_scene(max_count: usize, sh_degree: usize, seed: u64) -> Result<GaussianScene> {
    let mut rng = rng(seed);
    let n = rng.gen_range(1..=max_count);
    let coeffs = crate::scene::sh_coeff_count(sh_degree);
    let mut scene = GaussianScene::new(sh_degree)?;
    for _ in 0..n {
        let mut sh = vec![dc_for_rgb(std::array::from_fn(|_| rng.gen_range(0.3..0.7)))];
        for _ in 1..coeffs {
            sh.push(std::array::from_fn(|_| rng.gen_range(-0.03..0.03)));
        }
        scene.push(Gaussian {
            mean: [
                rng.gen_range(-0.6..0.6),
                rng.gen_range(-0.6..0.6),
                rng.gen_range(2.0..4.0),
            ],
            rotation: random_rotation(&mut rng),
            scale: std::array::from_fn(|_| rng.gen_range(0.03..0.25)),
            opacity: rng.gen_range(0.05..0.95),
            sh,
        })?;
    }
    Ok(scene)
}

/// Identity-pose camera looking down +z with a 40x32 image.
pub fn oracle_camera() -> Camera {
    let mut m = [0.0; 16];
    m[0] = 1.0;
    m[5] = 1.0;
    m[10] = 1.0;
    m[15] = 1.0;
    Camera::new(40.0, 40.0, 19.5, 15.5, 40, 32, m).expect("valid camera")
}

/// Random mask with roughly `density` of the pixels set.
pub fn random_mask(width: u32, height: u32, density: f64, rng: &mut impl Rng) -> Mask2D {
    let bits = (0..width as usize * height as usize)
        .map(|_| rng.gen_bool(density))
        .collect();
    Mask2D {
        width,
        height,
        bits,
    }
}
