//! Pinhole camera with OpenCV axes (+x right, +y down, +z forward).

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SNAP_THRESHOLD: f64 = 1e-9;

/// Largest deviation from orthonormality accepted on load. Anything within
/// it is snapped back onto SO(3).
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Rigid world-to-camera transform, row-major.
    pub world_to_camera: [f64; 16],
}

impl Camera {
    /// Validates intrinsics and extrinsics. A rotation block that is off
    /// by less than [`ORTHONORMAL_TOLERANCE`] is re-orthonormalized.
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        world_to_camera: [f64; 16],
    ) -> Result<Self> {
        let ctx = "camera";
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::data(ctx, "focal lengths must be positive"));
        }
        if !(cx.is_finite() && cy.is_finite()) || world_to_camera.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(ctx, "non-finite parameter"));
        }
        if width == 0 || height == 0 {
            return Err(Error::data(ctx, "image size must be at least 1x1"));
        }
        let m = &world_to_camera;
        let bottom = [m[12], m[13], m[14], m[15]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::data(
                ctx,
                "last row of world_to_camera must be [0, 0, 0, 1]",
            ));
        }
        let r = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let deviation = (r * r.transpose() - Matrix3::identity()).abs().max();
        if deviation > ORTHONORMAL_TOLERANCE || r.determinant() <= 0.0 {
            return Err(Error::data(
                ctx,
                format!("rotation block is not a proper rotation (deviation {deviation:.3e})"),
            ));
        }
        let mut world_to_camera = world_to_camera;
        // rounding noise from serialization is left alone so that a
        // save/load cycle reproduces the matrix exactly
        if deviation > SNAP_THRESHOLD {
            let svd = r.svd(true, true);
            let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
            let fixed = u * v_t;
            for row in 0..3 {
                for col in 0..3 {
                    world_to_camera[row * 4 + col] = fixed[(row, col)];
                }
            }
        }
        Ok(Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            world_to_camera,
        })
    }

    /// Camera at `eye` looking at `target`. `up` is the world direction that
    /// should appear upward in the image (the camera's -y).
    pub fn look_at(
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        focal: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let eye = Vector3::from(eye);
        let forward = (Vector3::from(target) - eye).normalize();
        let right = forward.cross(&Vector3::from(up)).normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        let mut m = [0.0; 16];
        for row in 0..3 {
            for col in 0..3 {
                m[row * 4 + col] = r[(row, col)];
            }
            m[row * 4 + 3] = t[row];
        }
        m[15] = 1.0;
        Camera::new(
            focal,
            focal,
            (f64::from(width) - 1.0) / 2.0,
            (f64::from(height) - 1.0) / 2.0,
            width,
            height,
            m,
        )
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let m = &self.world_to_camera;
        Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10])
    }

    pub fn translation(&self) -> Vector3<f64> {
        let m = &self.world_to_camera;
        Vector3::new(m[3], m[7], m[11])
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_row_slice(&self.world_to_camera)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation().transpose() * self.translation())
    }

    pub fn to_view(&self, world: Vector3<f64>) -> Vector3<f64> {
        self.rotation() * world + self.translation()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}
