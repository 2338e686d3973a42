//! On-disk formats.
//!
//! | what | format |
//! |---|---|
//! | scene | binary little-endian 3DGS PLY ([`ply`]) |
//! | cameras | JSON, `{"cameras": [{fx, fy, cx, cy, width, height, world_to_camera}]}` |
//! | 2D masks, label maps | 8-bit single-channel PNG |
//! | Gaussian masks | `GMSK`, u32 count, one 0/1 byte per Gaussian |
//! | Gaussian labels | `GLBL`, u32 count, one label byte per Gaussian |
//! | feature maps | `FMAP` v1, see [`write_feature_map`] |
//! | exemplars | JSON, `{"labels": [..], "entries": [{label, feature}]}` |
//!
//! All integers are little-endian.

mod binary;
mod cameras;
mod features;
pub mod ply;
mod png;

pub use binary::{
    load_gaussian_labels, load_gaussian_mask, read_gaussian_labels, read_gaussian_mask,
    save_gaussian_labels, save_gaussian_mask, write_gaussian_labels, write_gaussian_mask,
};
pub use cameras::{cameras_to_json, load_cameras, parse_cameras, save_cameras};
pub use features::{
    load_exemplars, load_feature_map, parse_exemplars, read_feature_map, save_exemplars,
    save_feature_map, write_feature_map,
};
pub use ply::{load_ply, save_ply};
pub use png::{load_label_map, load_mask, save_label_map, save_mask, save_rendered_png};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
