//! Feature maps and exemplars as an external exporter would write them.

use rand::Rng;
use splatvote::affordance::{transfer_2d, Exemplar, ExemplarSet, FeatureMap};
use splatvote::io::{load_exemplars, load_feature_map, save_exemplars, save_feature_map};
use splatvote::synthetic::rng;

#[test]
fn exported_features_transfer_back_to_their_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(2);
    let (grid_h, grid_w, dim, patch) = (16u32, 16u32, 32u32, 14u32);
    // annotated patches: a square of label 1 and a stripe of label 2
    let annotation: Vec<u8> = (0..grid_h * grid_w)
        .map(|p| {
            let (x, y) = (p % grid_w, p / grid_w);
            if (3..8).contains(&x) && (3..8).contains(&y) {
                1
            } else if y == 12 {
                2
            } else {
                0
            }
        })
        .collect();
    let data: Vec<f32> = (0..grid_h * grid_w * dim)
        .map(|_| r.gen_range(-1.0f32..1.0))
        .collect();
    let map = FeatureMap::new(grid_h, grid_w, dim, patch, data).unwrap();
    save_feature_map(&map, dir.path().join("00000.fmap")).unwrap();

    let entries = annotation
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != 0)
        .map(|(p, &label)| Exemplar {
            label,
            feature: map.patch(p).to_vec(),
        })
        .collect();
    let set = ExemplarSet::new(
        vec!["background".into(), "grasp".into(), "cut".into()],
        entries,
    )
    .unwrap();
    save_exemplars(&set, dir.path().join("exemplars.json")).unwrap();

    let map = load_feature_map(dir.path().join("00000.fmap")).unwrap();
    let set = load_exemplars(dir.path().join("exemplars.json")).unwrap();
    assert_eq!(map.grid_h(), 16);
    assert_eq!(set.dim(), 32);
    let out = transfer_2d(&map, &set, 1, 224, 224).unwrap();
    let annotated: Vec<usize> = (0..annotation.len())
        .filter(|&p| annotation[p] != 0)
        .collect();
    let hits = annotated
        .iter()
        .filter(|&&p| out.patches.labels[p] == annotation[p])
        .count();
    assert!(
        hits as f64 >= 0.9 * annotated.len() as f64,
        "{hits}/{}",
        annotated.len()
    );
}

#[test]
fn truncated_feature_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let map = FeatureMap::new(2, 2, 4, 14, vec![0.5; 16]).unwrap();
    let path = dir.path().join("f.fmap");
    save_feature_map(&map, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(
        load_feature_map(&path),
        Err(splatvote::Error::Format { .. })
    ));
}
