//! Matching per-frame files to cameras by the frame index in their name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use splatvote::{Error, Result};

/// Index encoded by the trailing digits of a file stem: `00042.png` and
/// `mask_0042.png` both map to 42.
pub fn frame_index(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_str()?;
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    stem[stem.len() - digits..].parse().ok()
}

/// Files in `dir` with extension `ext`, keyed by frame index. Every index
/// must refer to one of the `camera_count` cameras and appear once.
pub fn index_dir(dir: &Path, ext: &str, camera_count: usize) -> Result<BTreeMap<usize, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Error::Io {
                path: dir.into(),
                source: e,
            })?
            .path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let Some(index) = frame_index(&path) else {
            tracing::warn!(file = %path.display(), "skipping file without a frame index");
            continue;
        };
        if index >= camera_count {
            return Err(Error::Data {
                context: path.display().to_string(),
                message: format!("frame index {index} but only {camera_count} cameras"),
            });
        }
        if let Some(previous) = out.insert(index, path.clone()) {
            return Err(Error::Data {
                context: path.display().to_string(),
                message: format!("frame {index} also provided by {}", previous.display()),
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Usage(format!(
            "no .{ext} files with a frame index in {}",
            dir.display()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_digits() {
        assert_eq!(frame_index(Path::new("m/00042.png")), Some(42));
        assert_eq!(frame_index(Path::new("mask_0007.png")), Some(7));
        assert_eq!(frame_index(Path::new("mask.png")), None);
        assert_eq!(frame_index(Path::new("12a.png")), None);
    }
}
