use nalgebra::{Matrix2x3, Matrix3, Quaternion, UnitQuaternion, Vector3};

use super::RenderConfig;
use crate::camera::Camera;
use crate::scene::GaussianScene;
use crate::sh::eval_sh;

/// A Gaussian after projection to the image plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Splat2D {
    pub gaussian_index: u32,
    /// Pixel coordinates; pixel centers sit on integers.
    pub mean2d: [f64; 2],
    /// Screen covariance `[xx, xy, yy]`, low-pass included.
    pub cov2d: [f64; 3],
    /// Inverse of `cov2d`, `[xx, xy, yy]`.
    pub conic: [f64; 3],
    /// View-space z.
    pub depth: f64,
    pub rgb: [f64; 3],
    pub base_opacity: f64,
    pub radius: f64,
    /// Inclusive pixel bounds `[x0, x1, y0, y1]` of the extent box, clipped
    /// to the image.
    pub rect: [u32; 4],
}

#[derive(Clone, Debug, Default)]
pub struct Projection {
    pub splats: Vec<Splat2D>,
    pub culled: usize,
}

/// Projects every Gaussian, dropping those behind the near plane or whose
/// extent box contains no pixel center. Output is in scene order.
pub fn project(scene: &GaussianScene, camera: &Camera, config: &RenderConfig) -> Projection {
    let view = ViewGeometry::new(camera);
    let mut out = Projection::default();
    for index in 0..scene.len() {
        match project_with(scene, index, camera, &view, config) {
            Some(s) => out.splats.push(s),
            None => out.culled += 1,
        }
    }
    out
}

/// Projects a single Gaussian; `None` when culled.
pub fn project_gaussian(
    scene: &GaussianScene,
    index: usize,
    camera: &Camera,
    config: &RenderConfig,
) -> Option<Splat2D> {
    project_with(scene, index, camera, &ViewGeometry::new(camera), config)
}

struct ViewGeometry {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    center: Vector3<f64>,
}

impl ViewGeometry {
    fn new(camera: &Camera) -> Self {
        ViewGeometry {
            rotation: camera.rotation(),
            translation: camera.translation(),
            center: camera.center(),
        }
    }
}

fn project_with(
    scene: &GaussianScene,
    index: usize,
    camera: &Camera,
    view: &ViewGeometry,
    config: &RenderConfig,
) -> Option<Splat2D> {
    let mean = Vector3::from(scene.means()[index].map(f64::from));
    let p = view.rotation * mean + view.translation;
    let (x, y, z) = (p.x, p.y, p.z);
    if z <= config.near {
        return None;
    }

    let [qw, qx, qy, qz] = scene.rotations()[index].map(f64::from);
    let rot = UnitQuaternion::from_quaternion(Quaternion::new(qw, qx, qy, qz)).to_rotation_matrix();
    let s = Vector3::from(scene.scales()[index].map(f64::from));
    let m = rot.matrix() * Matrix3::from_diagonal(&s);
    let cov3d = m * m.transpose();

    let j = Matrix2x3::new(
        camera.fx / z,
        0.0,
        -camera.fx * x / (z * z),
        0.0,
        camera.fy / z,
        -camera.fy * y / (z * z),
    );
    let t = j * view.rotation;
    let cov = t * cov3d * t.transpose();
    let a = cov[(0, 0)] + config.low_pass;
    let b = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    let c = cov[(1, 1)] + config.low_pass;
    let det = a * c - b * b;
    if !det.is_finite() || det <= 0.0 {
        return None;
    }
    let conic = [c / det, -b / det, a / det];

    let mid = 0.5 * (a + c);
    let lambda_max = mid + (mid * mid - det).max(0.0).sqrt();
    let radius = (config.extent_sigmas * lambda_max.sqrt()).max(1.0);

    let u = camera.fx * x / z + camera.cx;
    let v = camera.fy * y / z + camera.cy;
    let rect = pixel_rect(u, v, radius, camera.width, camera.height)?;

    let dir = (mean - view.center).normalize();
    let rgb = eval_sh(scene.sh_degree(), scene.sh(index), dir);

    Some(Splat2D {
        gaussian_index: index as u32,
        mean2d: [u, v],
        cov2d: [a, b, c],
        conic,
        depth: z,
        rgb,
        base_opacity: f64::from(scene.opacities()[index]),
        radius,
        rect,
    })
}

fn pixel_rect(u: f64, v: f64, radius: f64, width: u32, height: u32) -> Option<[u32; 4]> {
    let span = |center: f64, extent: u32| -> Option<(u32, u32)> {
        let lo = (center - radius).ceil().max(0.0);
        let hi = (center + radius).floor().min(f64::from(extent) - 1.0);
        (lo <= hi).then_some((lo as u32, hi as u32))
    };
    let (x0, x1) = span(u, width)?;
    let (y0, y1) = span(v, height)?;
    Some([x0, x1, y0, y1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Gaussian;

    fn axis_camera() -> Camera {
        let mut m = [0.0; 16];
        m[0] = 1.0;
        m[5] = 1.0;
        m[10] = 1.0;
        m[15] = 1.0;
        Camera::new(100.0, 100.0, 50.0, 50.0, 100, 100, m).unwrap()
    }

    fn single(mean: [f32; 3], scale: f32) -> GaussianScene {
        GaussianScene::from_gaussians(0, [Gaussian::isotropic(mean, scale, 0.8, [0.0; 3])]).unwrap()
    }

    #[test]
    fn on_axis_gaussian_projects_to_principal_point() {
        let cfg = RenderConfig::default();
        let s = project_gaussian(&single([0.0, 0.0, 2.0], 0.02), 0, &axis_camera(), &cfg).unwrap();
        assert_eq!(s.mean2d, [50.0, 50.0]);
        assert!((s.cov2d[0] - 1.3).abs() < 1e-6);
        assert!(s.cov2d[1].abs() < 1e-12);
        assert!((s.cov2d[2] - 1.3).abs() < 1e-6);
        assert_eq!(s.depth, 2.0);
        assert!((s.conic[0] - 1.0 / 1.3).abs() < 1e-6);
        assert!((s.radius - 3.0 * 1.3f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn behind_camera_is_culled() {
        let cfg = RenderConfig::default();
        let proj = project(&single([0.0, 0.0, -1.0], 0.02), &axis_camera(), &cfg);
        assert!(proj.splats.is_empty());
        assert_eq!(proj.culled, 1);
        let near = project(&single([0.0, 0.0, 0.01], 0.001), &axis_camera(), &cfg);
        assert_eq!(near.culled, 1);
    }

    #[test]
    fn off_image_is_culled() {
        let cfg = RenderConfig::default();
        let proj = project(&single([5.0, 0.0, 2.0], 0.02), &axis_camera(), &cfg);
        assert_eq!(proj.culled, 1);
    }

    #[test]
    fn doubling_scale_quadruples_covariance() {
        let cfg = RenderConfig {
            low_pass: 0.0,
            ..RenderConfig::default()
        };
        let mut g = Gaussian::isotropic([0.1, -0.2, 2.0], 0.02, 0.8, [0.0; 3]);
        g.scale = [0.02, 0.05, 0.01];
        let base = GaussianScene::from_gaussians(0, [g.clone()]).unwrap();
        g.scale = g.scale.map(|s| 2.0 * s);
        let doubled = GaussianScene::from_gaussians(0, [g]).unwrap();
        let a = project_gaussian(&base, 0, &axis_camera(), &cfg).unwrap();
        let b = project_gaussian(&doubled, 0, &axis_camera(), &cfg).unwrap();
        for i in 0..3 {
            assert!((b.cov2d[i] - 4.0 * a.cov2d[i]).abs() < 1e-9 * a.cov2d[i].abs().max(1.0));
        }
    }

    #[test]
    fn rotated_gaussian_matches_world_aligned_equivalent() {
        // A 90 degree turn about z swaps the x and y extents.
        let cfg = RenderConfig::default();
        let mut g = Gaussian::isotropic([0.0, 0.0, 2.0], 0.02, 0.8, [0.0; 3]);
        g.scale = [0.04, 0.01, 0.02];
        let h = std::f32::consts::FRAC_1_SQRT_2;
        g.rotation = [h, 0.0, 0.0, h];
        let rotated = GaussianScene::from_gaussians(0, [g.clone()]).unwrap();
        g.rotation = [1.0, 0.0, 0.0, 0.0];
        g.scale = [0.01, 0.04, 0.02];
        let aligned = GaussianScene::from_gaussians(0, [g]).unwrap();
        let a = project_gaussian(&rotated, 0, &axis_camera(), &cfg).unwrap();
        let b = project_gaussian(&aligned, 0, &axis_camera(), &cfg).unwrap();
        for i in 0..3 {
            assert!((a.cov2d[i] - b.cov2d[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn jacobian_matches_finite_difference_of_projection() {
        // Independent check of J: perturb the view point along each axis.
        let cam = axis_camera();
        let (x, y, z) = (0.3, -0.2, 2.5);
        let proj = |p: [f64; 3]| [cam.fx * p[0] / p[2] + cam.cx, cam.fy * p[1] / p[2] + cam.cy];
        let h = 1e-6;
        let mut jac = [[0.0; 3]; 2];
        for k in 0..3 {
            let mut plus = [x, y, z];
            let mut minus = [x, y, z];
            plus[k] += h;
            minus[k] -= h;
            let (p, m) = (proj(plus), proj(minus));
            for r in 0..2 {
                jac[r][k] = (p[r] - m[r]) / (2.0 * h);
            }
        }
        // cov3d = I * s^2 so cov2d = s^2 J J^T + low_pass
        let s = 0.03f32;
        let cfg = RenderConfig::default();
        let scene = single([x as f32, y as f32, z as f32], s);
        let splat = project_gaussian(&scene, 0, &cam, &cfg).unwrap();
        let s2 = f64::from(s) * f64::from(s);
        let jj = |a: usize, b: usize| (0..3).map(|k| jac[a][k] * jac[b][k]).sum::<f64>();
        let expected = [s2 * jj(0, 0) + 0.3, s2 * jj(0, 1), s2 * jj(1, 1) + 0.3];
        for i in 0..3 {
            assert!(
                (splat.cov2d[i] - expected[i]).abs() < 1e-4,
                "{i}: {} vs {}",
                splat.cov2d[i],
                expected[i]
            );
        }
    }
}
