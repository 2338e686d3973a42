use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file};
use crate::affordance::{Exemplar, ExemplarSet, FeatureMap};
use crate::error::{Error, Result};

const FMAP_MAGIC: &[u8; 4] = b"FMAP";
const FMAP_VERSION: u32 = 1;
const FMAP_HEADER: usize = 24;

/// `FMAP`, then u32 version (1), grid_h, grid_w, dim, patch_px, then
/// `grid_h * grid_w * dim` f32 values, patch-major.
pub fn write_feature_map(map: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(FMAP_HEADER + 4 * map.data().len());
    out.extend_from_slice(FMAP_MAGIC);
    for v in [
        FMAP_VERSION,
        map.grid_h(),
        map.grid_w(),
        map.dim(),
        map.patch_px(),
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in map.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_feature_map(data: &[u8], ctx: &str) -> Result<FeatureMap> {
    if data.len() < FMAP_HEADER || &data[..4] != FMAP_MAGIC {
        return Err(Error::format(ctx, "expected FMAP magic"));
    }
    let word = |i: usize| u32::from_le_bytes(data[4 * i..4 * i + 4].try_into().unwrap());
    let version = word(1);
    if version != FMAP_VERSION {
        return Err(Error::format(
            ctx,
            format!("unsupported FMAP version {version}"),
        ));
    }
    let (grid_h, grid_w, dim, patch_px) = (word(2), word(3), word(4), word(5));
    let floats = grid_h as u64 * grid_w as u64 * dim as u64;
    let expected = FMAP_HEADER as u64 + 4 * floats;
    if data.len() as u64 != expected {
        return Err(Error::format(
            ctx,
            format!("file is {} bytes, header implies {expected}", data.len()),
        ));
    }
    let values: Vec<f32> = data[FMAP_HEADER..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureMap::new(grid_h, grid_w, dim, patch_px, values).map_err(|e| match e {
        Error::Data { message, .. } => Error::data(ctx, message),
        other => other,
    })
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    read_feature_map(&read_file(path)?, &path.display().to_string())
}

pub fn save_feature_map(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_feature_map(map))
}

#[derive(Serialize, Deserialize)]
struct ExemplarFile {
    labels: Vec<String>,
    entries: Vec<ExemplarEntry>,
}

#[derive(Serialize, Deserialize)]
struct ExemplarEntry {
    label: u8,
    feature: Vec<f32>,
}

pub fn parse_exemplars(json: &[u8], ctx: &str) -> Result<ExemplarSet> {
    let file: ExemplarFile =
        serde_json::from_slice(json).map_err(|e| Error::format(ctx, e.to_string()))?;
    let entries = file
        .entries
        .into_iter()
        .map(|e| Exemplar {
            label: e.label,
            feature: e.feature,
        })
        .collect();
    ExemplarSet::new(file.labels, entries).map_err(|e| match e {
        Error::Data { message, .. } => Error::data(ctx, message),
        other => other,
    })
}

pub fn load_exemplars(path: impl AsRef<Path>) -> Result<ExemplarSet> {
    let path = path.as_ref();
    parse_exemplars(&read_file(path)?, &path.display().to_string())
}

pub fn save_exemplars(set: &ExemplarSet, path: impl AsRef<Path>) -> Result<()> {
    let file = ExemplarFile {
        labels: set.labels().to_vec(),
        entries: set
            .entries()
            .iter()
            .map(|e| ExemplarEntry {
                label: e.label,
                feature: e.feature.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&file).expect("exemplar serialization is infallible");
    write_file(path.as_ref(), &json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_size_arithmetic() {
        let map = FeatureMap::new(2, 2, 4, 14, (0..16).map(|v| v as f32).collect()).unwrap();
        let bytes = write_feature_map(&map);
        assert_eq!(bytes.len(), 24 + 2 * 2 * 4 * 4);
        assert_eq!(bytes.len(), 88);
        assert_eq!(read_feature_map(&bytes, "mem").unwrap(), map);
    }

    #[test]
    fn rejects_bad_magic_version_and_nan() {
        let map = FeatureMap::new(1, 1, 2, 8, vec![1.0, 2.0]).unwrap();
        let good = write_feature_map(&map);
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_feature_map(&bad, "mem"),
            Err(Error::Format { .. })
        ));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            read_feature_map(&bad, "mem"),
            Err(Error::Format { .. })
        ));
        let mut bad = good.clone();
        bad[24..28].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            read_feature_map(&bad, "mem"),
            Err(Error::Data { .. })
        ));
        assert!(read_feature_map(&good[..good.len() - 1], "mem").is_err());
    }

    #[test]
    fn exemplar_json() {
        let json = br#"{"labels":["background","grasp"],"entries":[{"label":1,"feature":[1,0]},{"label":0,"feature":[0,1]}]}"#;
        let set = parse_exemplars(json, "mem").unwrap();
        assert_eq!(
            set.labels(),
            &["background".to_string(), "grasp".to_string()]
        );
        assert_eq!(set.dim(), 2);
        let empty = br#"{"labels":["background"],"entries":[]}"#;
        assert!(matches!(
            parse_exemplars(empty, "mem"),
            Err(Error::Data { .. })
        ));
    }
}
