mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cisca_core::grid::{MagProfile, Magnification};
use cisca_core::{gt, metrics, postprocess, tiling, Tensor};

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_match_oracles(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = random_labels(&mut rng, 20, 24, 5);
        let pred = perturb_labels(&mut rng, &gt);
        prop_assert!((metrics::aji(&gt, &pred).unwrap() - oracle_aji(&gt, &pred)).abs() < 1e-9);
        let s = metrics::pq(&gt, &pred).unwrap();
        let (dq, sq, pq) = oracle_pq(&gt, &pred);
        prop_assert!((s.dq - dq).abs() < 1e-9 && (s.sq - sq).abs() < 1e-9 && (s.pq - pq).abs() < 1e-9);
    }

    #[test]
    fn dice_and_pq_are_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_labels(&mut rng, 16, 16, 4);
        let b = perturb_labels(&mut rng, &a);
        prop_assert_eq!(metrics::dice_fg(&a, &b).unwrap(), metrics::dice_fg(&b, &a).unwrap());
        prop_assert!((metrics::pq(&a, &b).unwrap().pq - metrics::pq(&b, &a).unwrap().pq).abs() < 1e-12);
    }

    #[test]
    fn relabelling_does_not_change_scores(seed in any::<u64>(), offset in 1u32..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = random_labels(&mut rng, 18, 18, 5);
        let pred = perturb_labels(&mut rng, &gt);
        let mut shifted = pred.clone();
        for v in shifted.as_mut_slice() {
            if *v != 0 {
                *v += offset;
            }
        }
        prop_assert_eq!(metrics::pq(&gt, &pred).unwrap(), metrics::pq(&gt, &shifted).unwrap());
        prop_assert_eq!(metrics::aji(&gt, &pred).unwrap(), metrics::aji(&gt, &shifted).unwrap());
    }

    #[test]
    fn tiling_round_trips(h in 1usize..200, w in 1usize..200, tile in prop::sample::select(vec![16usize, 32, 64])) {
        let image = Tensor::from_fn(h, w, 2, |r, c, k| (r * 31 + c * 17 + k) as f32 % 13.0);
        let grid = tiling::plan_tiles(h, w, tile, tile / 2).unwrap();
        let tiles = tiling::extract_tiles(&image, &grid).unwrap();
        let back = tiling::blend_untile(&tiles, &grid, &tiling::spline_window(tile).unwrap()).unwrap();
        for (a, b) in image.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-5 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn encoded_scene_survives_postprocessing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = blob_scene(&mut rng, 64, 64, 5, 5.0, 9.0);
        let profile = MagProfile::new(Magnification::X20);
        let prob = gt::one_hot_ternary(&gt::ternary_from_labels(&labels, &profile));
        let dist = gt::distance_maps_from_labels(&labels);
        let out = postprocess::postprocess(&prob, &dist, None, &postprocess::PostprocessConfig::new(profile)).unwrap();
        prop_assert!(metrics::pq(&labels, &out.labels).unwrap().pq >= 0.9);
    }
}

#[test]
fn watershed_matches_flood_oracle_on_plateaus() {
    use cisca_core::grid::{Grid, LabelMap};
    let topo = Grid::filled(5, 7, 0.5f32);
    let mut markers = LabelMap::zeros(5, 7);
    markers.set(2, 0, 4);
    markers.set(2, 6, 9);
    let mask = Grid::filled(5, 7, true);
    let got = postprocess::watershed(&topo, &markers, &mask).unwrap();
    assert_eq!(got.as_slice(), oracle_watershed(&topo, &markers, &mask).as_slice());
}
