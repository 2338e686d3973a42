use rayon::prelude::*;

use super::{project, RenderConfig, Splat2D};
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::mask::Mask2D;
use crate::scene::GaussianScene;

/// Pixel class id that accumulates into no buffer.
pub const NO_CLASS: u8 = u8::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedImage {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<[f64; 3]>,
    /// Transmittance left after blending, per pixel.
    pub final_transmittance: Vec<f64>,
}

impl RenderedImage {
    fn blank(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        RenderedImage {
            width,
            height,
            rgb: vec![[0.0; 3]; n],
            final_transmittance: vec![1.0; n],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        self.rgb[(y * self.width + x) as usize]
    }

    /// 8-bit RGB with half-up rounding.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.rgb
            .iter()
            .flat_map(|px| px.map(|v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8))
            .collect()
    }
}

/// Per-Gaussian sum of `alpha * T` over a pixel set.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceBuffer(pub Vec<f64>);

impl InfluenceBuffer {
    pub fn zeros(len: usize) -> Self {
        InfluenceBuffer(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn add(&mut self, other: &InfluenceBuffer) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}

#[derive(Clone, Debug)]
pub struct Rasterized {
    pub image: RenderedImage,
    /// One buffer per pixel class; empty when no classes were requested.
    pub influence: Vec<InfluenceBuffer>,
    pub splat_count: usize,
    pub culled: usize,
}

/// Renders `scene` and, if `classes` is given as `(ids, n_classes)`,
/// accumulates `alpha * T` per Gaussian into the buffer of each pixel's
/// class. Pixels whose id is `>= n_classes` (for instance [`NO_CLASS`])
/// accumulate nothing.
///
/// Per pixel, splats are visited in ascending depth (ties by Gaussian
/// index). A splat contributes `alpha = min(alpha_max, o * exp(-d'Qd/2))`
/// unless `alpha < alpha_min`; after blending, the pixel stops once its
/// transmittance falls below `min_transmittance`. Hence a splat either
/// blends with a strictly positive weight or leaves the pixel untouched.
pub fn rasterize(
    scene: &GaussianScene,
    camera: &Camera,
    classes: Option<(&[u8], usize)>,
    config: &RenderConfig,
) -> Result<Rasterized> {
    if let Some((ids, _)) = classes {
        if ids.len() != camera.pixel_count() {
            return Err(Error::dimension(format!(
                "{} pixel classes for a {}x{} camera",
                ids.len(),
                camera.width,
                camera.height
            )));
        }
    }
    if config.tile_size == 0 {
        return Err(Error::usage("tile size must be positive"));
    }
    let projection = project(scene, camera, config);
    let mut splats = projection.splats;
    splats.sort_by(|a, b| {
        a.depth
            .total_cmp(&b.depth)
            .then(a.gaussian_index.cmp(&b.gaussian_index))
    });
    let (image, influence) = blend(&splats, scene.len(), camera, classes, config);
    Ok(Rasterized {
        image,
        influence,
        splat_count: splats.len(),
        culled: projection.culled,
    })
}

pub fn render(scene: &GaussianScene, camera: &Camera, config: &RenderConfig) -> RenderedImage {
    rasterize(scene, camera, None, config)
        .expect("rendering without pixel classes cannot fail")
        .image
}

/// Influence of every Gaussian over the pixels where `mask` is set.
pub fn accumulate_influence(
    scene: &GaussianScene,
    camera: &Camera,
    mask: &Mask2D,
    config: &RenderConfig,
) -> Result<InfluenceBuffer> {
    mask.check_camera(camera)?;
    let ids: Vec<u8> = mask
        .bits
        .iter()
        .map(|&b| if b { 0 } else { NO_CLASS })
        .collect();
    let mut out = rasterize(scene, camera, Some((&ids, 1)), config)?;
    Ok(out.influence.swap_remove(0))
}

/// Influence per pixel class in one traversal; returns `n_classes` buffers.
pub fn accumulate_partitioned(
    scene: &GaussianScene,
    camera: &Camera,
    ids: &[u8],
    n_classes: usize,
    config: &RenderConfig,
) -> Result<Vec<InfluenceBuffer>> {
    Ok(rasterize(scene, camera, Some((ids, n_classes)), config)?.influence)
}

/// Largest per-channel absolute difference between two images.
pub fn max_abs_pixel_error(a: &RenderedImage, b: &RenderedImage) -> Result<f64> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::dimension(format!(
            "images are {}x{} and {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(a.rgb
        .iter()
        .zip(&b.rgb)
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]).abs()))
        .fold(0.0, f64::max))
}

struct TileOutput {
    rgb: Vec<[f64; 3]>,
    transmittance: Vec<f64>,
    /// `n_classes * bin.len()` weights, indexed `class * bin.len() + slot`.
    partial: Vec<f64>,
}

fn blend(
    splats: &[Splat2D],
    gaussian_count: usize,
    camera: &Camera,
    classes: Option<(&[u8], usize)>,
    config: &RenderConfig,
) -> (RenderedImage, Vec<InfluenceBuffer>) {
    let (width, height) = (camera.width, camera.height);
    let ts = config.tile_size;
    let tiles_x = width.div_ceil(ts);
    let tiles_y = height.div_ceil(ts);

    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (pos, s) in splats.iter().enumerate() {
        let [x0, x1, y0, y1] = s.rect;
        for ty in y0 / ts..=y1 / ts {
            for tx in x0 / ts..=x1 / ts {
                bins[(ty * tiles_x + tx) as usize].push(pos as u32);
            }
        }
    }

    let n_classes = classes.map_or(0, |(_, n)| n);
    let outputs: Vec<TileOutput> = bins
        .par_iter()
        .enumerate()
        .map(|(tile, bin)| {
            let tx = tile as u32 % tiles_x;
            let ty = tile as u32 / tiles_x;
            let xr = tx * ts..((tx + 1) * ts).min(width);
            let yr = ty * ts..((ty + 1) * ts).min(height);
            blend_tile(splats, bin, xr, yr, width, classes, n_classes, config)
        })
        .collect();

    let mut image = RenderedImage::blank(width, height);
    let mut influence = vec![InfluenceBuffer::zeros(gaussian_count); n_classes];
    for (tile, (out, bin)) in outputs.into_iter().zip(&bins).enumerate() {
        let tx = tile as u32 % tiles_x;
        let ty = tile as u32 / tiles_x;
        let tile_w = (((tx + 1) * ts).min(width) - tx * ts) as usize;
        for (i, (rgb, t)) in out.rgb.into_iter().zip(out.transmittance).enumerate() {
            let x = tx * ts + (i % tile_w) as u32;
            let y = ty * ts + (i / tile_w) as u32;
            let p = (y * width + x) as usize;
            image.rgb[p] = rgb;
            image.final_transmittance[p] = t;
        }
        for (class, buffer) in influence.iter_mut().enumerate() {
            let weights = &out.partial[class * bin.len()..(class + 1) * bin.len()];
            for (&pos, &w) in bin.iter().zip(weights) {
                buffer.0[splats[pos as usize].gaussian_index as usize] += w;
            }
        }
    }
    (image, influence)
}

#[allow(clippy::too_many_arguments)]
fn blend_tile(
    splats: &[Splat2D],
    bin: &[u32],
    xr: std::ops::Range<u32>,
    yr: std::ops::Range<u32>,
    width: u32,
    classes: Option<(&[u8], usize)>,
    n_classes: usize,
    config: &RenderConfig,
) -> TileOutput {
    let pixels = xr.len() * yr.len();
    let mut out = TileOutput {
        rgb: Vec::with_capacity(pixels),
        transmittance: Vec::with_capacity(pixels),
        partial: vec![0.0; n_classes * bin.len()],
    };
    for y in yr {
        for x in xr.clone() {
            let class = classes
                .map(|(ids, _)| ids[(y * width + x) as usize] as usize)
                .filter(|&c| c < n_classes);
            let mut t = 1.0f64;
            let mut rgb = [0.0f64; 3];
            for (slot, &pos) in bin.iter().enumerate() {
                let s = &splats[pos as usize];
                let [x0, x1, y0, y1] = s.rect;
                if x < x0 || x > x1 || y < y0 || y > y1 {
                    continue;
                }
                let dx = f64::from(x) - s.mean2d[0];
                let dy = f64::from(y) - s.mean2d[1];
                let power =
                    -0.5 * (s.conic[0] * dx * dx + s.conic[2] * dy * dy) - s.conic[1] * dx * dy;
                let alpha = (s.base_opacity * power.exp()).min(config.alpha_max);
                if alpha < config.alpha_min {
                    continue;
                }
                let weight = alpha * t;
                for c in 0..3 {
                    rgb[c] += s.rgb[c] * weight;
                }
                if let Some(class) = class {
                    out.partial[class * bin.len() + slot] += weight;
                }
                t *= 1.0 - alpha;
                if t < config.min_transmittance {
                    break;
                }
            }
            out.rgb.push(rgb);
            out.transmittance.push(t);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Gaussian;
    use crate::sh::dc_for_rgb;

    fn axis_camera(size: u32) -> Camera {
        let mut m = [0.0; 16];
        m[0] = 1.0;
        m[5] = 1.0;
        m[10] = 1.0;
        m[15] = 1.0;
        let c = f64::from(size / 2);
        Camera::new(100.0, 100.0, c, c, size, size, m).unwrap()
    }

    /// A tiny splat that covers only its center pixel at full `opacity`.
    fn dot(z: f32, opacity: f32, rgb: [f64; 3]) -> Gaussian {
        Gaussian::isotropic([0.0, 0.0, z], 1e-4, opacity, dc_for_rgb(rgb))
    }

    #[test]
    fn empty_scene_is_black_and_clear() {
        let scene = GaussianScene::new(0).unwrap();
        let img = render(&scene, &axis_camera(20), &RenderConfig::default());
        assert!(img.rgb.iter().all(|p| *p == [0.0; 3]));
        assert!(img.final_transmittance.iter().all(|&t| t == 1.0));
    }

    #[test]
    fn two_splat_stack_blends_front_to_back() {
        // Scene order is back-to-front to exercise the depth sort.
        let scene = GaussianScene::from_gaussians(
            0,
            [
                dot(3.0, 0.5, [0.0, 1.0, 0.0]),
                dot(2.0, 0.6, [1.0, 0.0, 0.0]),
            ],
        )
        .unwrap();
        let cam = axis_camera(20);
        let cfg = RenderConfig::default();
        let img = render(&scene, &cam, &cfg);
        let px = img.pixel(10, 10);
        assert!((px[0] - 0.6).abs() < 1e-6, "{px:?}");
        assert!((px[1] - 0.2).abs() < 1e-6, "{px:?}");
        assert!(px[2].abs() < 1e-6);

        let mut mask = Mask2D::filled(20, 20, false);
        mask.set(10, 10, true);
        let inf = accumulate_influence(&scene, &cam, &mask, &cfg).unwrap();
        assert!((inf.0[1] - 0.6).abs() < 1e-6);
        assert!((inf.0[0] - 0.2).abs() < 1e-6);
    }

    #[test]
    fn single_splat_influence_is_its_alpha() {
        let scene = GaussianScene::from_gaussians(0, [dot(2.0, 0.5, [1.0; 3])]).unwrap();
        let cam = axis_camera(20);
        let mut mask = Mask2D::filled(20, 20, false);
        mask.set(10, 10, true);
        let inf = accumulate_influence(&scene, &cam, &mask, &RenderConfig::default()).unwrap();
        assert!((inf.0[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn opaque_splat_leaves_clamped_transmittance() {
        let scene = GaussianScene::from_gaussians(0, [dot(2.0, 1.0, [1.0; 3])]).unwrap();
        let img = render(&scene, &axis_camera(20), &RenderConfig::default());
        assert!((img.final_transmittance[10 * 20 + 10] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn occluded_splat_gets_residual_then_nothing() {
        let cam = axis_camera(20);
        let cfg = RenderConfig::default();
        let mut mask = Mask2D::filled(20, 20, false);
        mask.set(10, 10, true);

        let one =
            GaussianScene::from_gaussians(0, [dot(2.0, 1.0, [1.0; 3]), dot(5.0, 0.5, [1.0; 3])])
                .unwrap();
        let inf = accumulate_influence(&one, &cam, &mask, &cfg).unwrap();
        assert!((inf.0[1] - 0.01 * 0.5).abs() < 1e-12);

        let stack = GaussianScene::from_gaussians(
            0,
            [
                dot(2.0, 1.0, [1.0; 3]),
                dot(2.1, 1.0, [1.0; 3]),
                dot(2.2, 1.0, [1.0; 3]),
                dot(5.0, 0.5, [1.0; 3]),
            ],
        )
        .unwrap();
        let inf = accumulate_influence(&stack, &cam, &mask, &cfg).unwrap();
        assert_eq!(inf.0[3], 0.0);
        assert!(inf.0[2] > 0.0);
    }

    #[test]
    fn faint_splat_is_skipped() {
        let scene = GaussianScene::from_gaussians(0, [dot(2.0, 0.003, [1.0; 3])]).unwrap();
        let cam = axis_camera(20);
        let inf = accumulate_influence(
            &scene,
            &cam,
            &Mask2D::filled(20, 20, true),
            &RenderConfig::default(),
        )
        .unwrap();
        assert_eq!(inf.0[0], 0.0);
    }

    #[test]
    fn mask_size_mismatch_is_rejected() {
        let scene = GaussianScene::new(0).unwrap();
        let err = accumulate_influence(
            &scene,
            &axis_camera(20),
            &Mask2D::filled(10, 20, true),
            &RenderConfig::default(),
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn pixel_error_metric() {
        let mut a = RenderedImage::blank(4, 3);
        let b = a.clone();
        assert_eq!(max_abs_pixel_error(&a, &b).unwrap(), 0.0);
        a.rgb[5][1] = 0.25;
        assert_eq!(max_abs_pixel_error(&a, &b).unwrap(), 0.25);
        assert!(max_abs_pixel_error(&a, &RenderedImage::blank(3, 4)).is_err());
    }

    #[test]
    fn png_rounding_is_half_up() {
        let mut img = RenderedImage::blank(1, 1);
        img.rgb[0] = [0.25, 1.0, 0.5];
        assert_eq!(img.to_rgb8(), vec![64, 255, 128]);
    }
}
