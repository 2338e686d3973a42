use proptest::prelude::*;
use rand::seq::SliceRandom;
use splatvote::io::ply::{read_ply, write_ply};
use splatvote::pruning::{prune, visibility_votes};
use splatvote::segmentation::{segment, VoteState};
use splatvote::splatting::InfluenceBuffer;
use splatvote::synthetic::{oracle_camera, random_mask, random_scene, rng};
use splatvote::{Camera, GaussianScene, Mask2D, RenderConfig};

fn shifted_cameras(n: usize) -> Vec<Camera> {
    let base = oracle_camera();
    (0..n)
        .map(|i| {
            let mut m = base.world_to_camera;
            m[3] = 0.15 * i as f64 - 0.3;
            m[7] = 0.1 * (i % 3) as f64 - 0.1;
            Camera::new(
                base.fx,
                base.fy,
                base.cx,
                base.cy,
                base.width,
                base.height,
                m,
            )
            .unwrap()
        })
        .collect()
}

fn frames(n: usize, seed: u64) -> Vec<(Camera, Mask2D)> {
    let mut r = rng(seed);
    shifted_cameras(n)
        .into_iter()
        .map(|c| {
            let m = random_mask(c.width, c.height, 0.5, &mut r);
            (c, m)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn positive_scaling_keeps_the_mask(
        fg in proptest::collection::vec(0.0f64..2.0, 1..40),
        bg_seed in any::<u64>(),
        lambda in 1e-6f64..1e6,
    ) {
        let mut r = rng(bg_seed);
        let bg: Vec<f64> = fg.iter().map(|_| rand::Rng::gen_range(&mut r, 0.0..2.0)).collect();
        let mut plain = VoteState::zeros(fg.len());
        plain.add_frame(&InfluenceBuffer(fg.clone()), &InfluenceBuffer(bg.clone()));
        let mut scaled = VoteState::zeros(fg.len());
        scaled.add_frame(
            &InfluenceBuffer(fg.iter().map(|v| v * lambda).collect()),
            &InfluenceBuffer(bg.iter().map(|v| v * lambda).collect()),
        );
        prop_assert_eq!(plain.to_mask(), scaled.to_mask());
    }

    #[test]
    fn frame_order_does_not_matter(seed in 0u64..1000) {
        let scene = random_scene(25, 0, seed).unwrap();
        let fr = frames(4, seed);
        let mut shuffled = fr.clone();
        shuffled.shuffle(&mut rng(seed ^ 0x5eed));
        let cfg = RenderConfig::default();
        let a = segment(&scene, &fr, &cfg).unwrap();
        let b = segment(&scene, &shuffled, &cfg).unwrap();
        for (k, (x, y)) in a.votes.0.iter().zip(&b.votes.0).enumerate() {
            prop_assert!((x - y).abs() <= 1e-12);
            if x.abs() > 1e-12 {
                prop_assert_eq!(a.mask.0[k], b.mask.0[k]);
            }
        }
    }

    #[test]
    fn pruning_is_idempotent_and_lossless(seed in 0u64..1000, n in 1usize..4) {
        let scene = random_scene(40, 1, seed).unwrap();
        let cams = shifted_cameras(n);
        let cfg = RenderConfig::default();
        let (once, report) = prune(&scene, &cams, &cfg).unwrap();
        prop_assert_eq!(report.max_abs_pixel_error, 0.0);
        prop_assert!(report.pruned_count <= report.original_count);
        let (twice, again) = prune(&once, &cams, &cfg).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(again.removed_fraction, 0.0);
    }

    #[test]
    fn more_cameras_keep_more(seed in 0u64..1000) {
        let scene = random_scene(40, 0, seed).unwrap();
        let cams = shifted_cameras(4);
        let cfg = RenderConfig::default();
        let few = visibility_votes(&scene, &cams[..2], &cfg).unwrap();
        let all = visibility_votes(&scene, &cams, &cfg).unwrap();
        for (a, b) in few.as_slice().iter().zip(all.as_slice()) {
            prop_assert!(*a <= 0.0 || *b > 0.0);
        }
    }

    #[test]
    fn ply_round_trip(seed in any::<u64>(), degree in 0usize..=3, n in 1usize..30) {
        let scene = random_scene(n, degree, seed).unwrap();
        let mut bytes = Vec::new();
        prop_assert_eq!(write_ply(&scene, &mut bytes).unwrap(), 0);
        let back = read_ply(&mut bytes.as_slice(), "mem").unwrap();
        prop_assert_eq!(back.len(), scene.len());
        prop_assert_eq!(back.sh_degree(), scene.sh_degree());
        assert_close(&scene, &back);
    }
}

fn assert_close(a: &GaussianScene, b: &GaussianScene) {
    let rel = |x: f32, y: f32| (x - y).abs() <= 1e-5 * x.abs().max(1e-3);
    for i in 0..a.len() {
        let (ga, gb) = (a.gaussian(i), b.gaussian(i));
        assert_eq!(ga.mean, gb.mean);
        assert!(
            ga.rotation
                .iter()
                .zip(&gb.rotation)
                .all(|(x, y)| (x - y).abs() < 1e-6),
            "rotation {i}"
        );
        assert!(
            ga.scale.iter().zip(&gb.scale).all(|(x, y)| rel(*x, *y)),
            "scale {i}"
        );
        assert!((ga.opacity - gb.opacity).abs() < 1e-5, "opacity {i}");
        assert_eq!(ga.sh, gb.sh);
    }
}
