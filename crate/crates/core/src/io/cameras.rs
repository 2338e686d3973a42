use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file};
use crate::camera::Camera;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct CameraFile {
    cameras: Vec<CameraEntry>,
}

#[derive(Serialize, Deserialize)]
struct CameraEntry {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    world_to_camera: Vec<f64>,
}

pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    let path = path.as_ref();
    parse_cameras(&read_file(path)?, &path.display().to_string())
}

pub fn parse_cameras(json: &[u8], ctx: &str) -> Result<Vec<Camera>> {
    let file: CameraFile =
        serde_json::from_slice(json).map_err(|e| Error::format(ctx, e.to_string()))?;
    file.cameras
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let m: [f64; 16] = c.world_to_camera.try_into().map_err(|v: Vec<f64>| {
                Error::format(
                    ctx,
                    format!(
                        "camera {i}: world_to_camera has {} numbers, expected 16",
                        v.len()
                    ),
                )
            })?;
            Camera::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height, m).map_err(|e| match e {
                Error::Data { message, .. } => Error::data(ctx, format!("camera {i}: {message}")),
                other => other,
            })
        })
        .collect()
}

pub fn cameras_to_json(cameras: &[Camera]) -> String {
    let file = CameraFile {
        cameras: cameras
            .iter()
            .map(|c| CameraEntry {
                fx: c.fx,
                fy: c.fy,
                cx: c.cx,
                cy: c.cy,
                width: c.width,
                height: c.height,
                world_to_camera: c.world_to_camera.to_vec(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("camera serialization is infallible")
}

pub fn save_cameras(cameras: &[Camera], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), cameras_to_json(cameras).as_bytes())
}
