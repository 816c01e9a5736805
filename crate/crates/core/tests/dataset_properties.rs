use cuboid3d::dataset::{
    pearson, stats, AnnotationEntry, CategoryEntry, Dataset, DatasetFile, ImageEntry, IntrinsicsEntry, StatsConfig,
};
use cuboid3d::sampling::random_rotation;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FOCAL: f64 = 700.0;
const CAMERA_HEIGHT: f64 = 1.6;

fn image(id: u64) -> ImageEntry {
    ImageEntry {
        id,
        width: 1280.0,
        height: 720.0,
        intrinsics: Some(IntrinsicsEntry {
            fx: FOCAL,
            fy: FOCAL,
            px: 640.0,
            py: 360.0,
        }),
        source: Some("synthetic".into()),
        split: None,
    }
}

fn random_dataset(seed: u64, n: usize) -> DatasetFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let annotations = (0..n)
        .map(|i| {
            let r = random_rotation(&mut rng);
            let z = rng.random_range(2.0..40.0);
            AnnotationEntry {
                id: Some(i as u64),
                image_id: rng.random_range(1..=3),
                category: ["car", "chair", "lamp"][rng.random_range(0..3)].into(),
                bbox2d: [
                    rng.random_range(0.0..1000.0),
                    rng.random_range(0.0..600.0),
                    rng.random_range(5.0..300.0),
                    rng.random_range(5.0..300.0),
                ],
                center: [rng.random_range(-8.0..8.0), rng.random_range(-1.0..2.0), z],
                rotation: std::array::from_fn(|k| r[(k / 3, k % 3)]),
                dims: std::array::from_fn(|_| rng.random_range(0.2..5.0)),
                occlusion: rng.random_bool(0.5).then(|| rng.random()),
                truncation: rng.random_bool(0.5).then(|| rng.random()),
            }
        })
        .collect();
    DatasetFile {
        images: (1..=3).map(image).collect(),
        categories: vec![
            CategoryEntry {
                name: "car".into(),
                priors: Some([1.8, 1.5, 4.2]),
            },
            CategoryEntry {
                name: "chair".into(),
                priors: None,
            },
            CategoryEntry {
                name: "lamp".into(),
                priors: None,
            },
        ],
        annotations,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stats_do_not_depend_on_annotation_order(seed in any::<u64>(), n in 2usize..80) {
        let file = random_dataset(seed, n);
        let mut shuffled = file.clone();
        shuffled.annotations.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let cfg = StatsConfig::default();
        let a = stats(&Dataset::from_file(file).unwrap(), &cfg).unwrap();
        let b = stats(&Dataset::from_file(shuffled).unwrap(), &cfg).unwrap();
        prop_assert_eq!(&a.center_histogram, &b.center_histogram);
        prop_assert_eq!(&a.topview_histogram, &b.topview_histogram);
        prop_assert_eq!(&a.relative_size_histogram, &b.relative_size_histogram);
        prop_assert_eq!(&a.category_counts, &b.category_counts);
        let close = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
            (x, y) => x == y,
        };
        prop_assert!(close(a.correlations.y_vs_depth, b.correlations.y_vs_depth));
        prop_assert!(close(a.correlations.size_vs_depth, b.correlations.size_vs_depth));
    }

    #[test]
    fn pearson_is_affine_invariant(
        xs in prop::collection::vec(-100.0..100.0f64, 3..200),
        seed in any::<u64>(),
        a in 0.01..100.0f64,
        b in -100.0..100.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x + rng.random_range(-50.0..50.0)).collect();
        let moved: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
        let r = pearson(&xs, &ys).unwrap();
        prop_assert!((r - pearson(&xs, &moved).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn load_save_round_trip_is_lossless(seed in any::<u64>(), n in 0usize..40) {
        let ds = Dataset::from_file(random_dataset(seed, n)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.json");
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        prop_assert_eq!(back.file(), ds.file());
        prop_assert_eq!(back.cuboids(), ds.cuboids());
    }
}

/// Objects resting on a flat ground below the camera project to image row
/// `py + f * h / z`, so the normalized row is an increasing affine function of
/// `1 / z`. For `z ~ U(a, b)` the correlation of `1 / z` with `z` has a
/// closed form.
#[test]
fn ground_plane_row_depth_correlation_matches_closed_form() {
    let (a, b) = (4.0f64, 40.0f64);
    let mean_z = (a + b) / 2.0;
    let var_z = (b - a).powi(2) / 12.0;
    let mean_inv = (b / a).ln() / (b - a);
    let var_inv = 1.0 / (a * b) - mean_inv * mean_inv;
    let rho = (1.0 - mean_inv * mean_z) / (var_inv * var_z).sqrt();

    let mut file = random_dataset(9, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..4000 {
        let z = rng.random_range(a..b);
        file.annotations.push(AnnotationEntry {
            id: Some(i),
            image_id: 1,
            category: "car".into(),
            bbox2d: [0.0, 0.0, 10.0, 10.0],
            center: [rng.random_range(-0.2..0.2) * z, CAMERA_HEIGHT, z],
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            dims: [1.0, 1.0, 1.0],
            occlusion: None,
            truncation: None,
        });
    }
    let report = stats(&Dataset::from_file(file).unwrap(), &StatsConfig::default()).unwrap();
    let measured = report.correlations.y_vs_depth.unwrap();
    assert!((measured - rho).abs() <= 0.02, "measured {measured}, closed form {rho}");
}

#[test]
fn empty_annotation_list_has_zero_counts() {
    let report = stats(&Dataset::from_file(random_dataset(1, 0)).unwrap(), &StatsConfig::default()).unwrap();
    assert_eq!(report.num_annotations, 0);
    assert_eq!(report.center_histogram.total(), 0);
    assert_eq!(report.correlations.y_vs_depth, None);
}
