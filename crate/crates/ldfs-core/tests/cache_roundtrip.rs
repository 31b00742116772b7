use ldfs_core::{normalize, read_feature_cache, write_feature_cache, FeatureMatrix};
use ndarray::{Array1, Array2, Axis};

fn demo_matrix() -> FeatureMatrix {
    let raw = [
        [0.3f32, -1.25, 2.0, 0.125],
        [1.0, 0.0, 0.0, 0.0],
        [-0.5, 0.5, 0.5, 0.5],
    ];
    let mut rows = Array2::zeros((3, 4));
    for (i, r) in raw.iter().enumerate() {
        // Normalize in f64, then round-trip the f32 value that the cache
        // stores so the in-memory matrix is bit-identical to a reload.
        let v = Array1::from_iter(r.iter().map(|&x| x as f64));
        let unit = normalize(v.view()).unwrap();
        let quantized = unit.view().mapv(|x| x as f32 as f64);
        rows.row_mut(i).assign(&quantized);
    }
    FeatureMatrix::new(
        rows,
        vec![0, 1, 0],
        vec![0, 0, 1],
        vec!["a".into(), "b".into(), "c".into()],
    )
    .unwrap()
}

#[test]
fn cache_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let m = demo_matrix();
    let classes = vec!["cat".to_string(), "dog".to_string()];
    let domains = vec!["photo".to_string(), "sketch".to_string()];

    write_feature_cache(dir.path(), &m, &classes, &domains).unwrap();
    let loaded = read_feature_cache(dir.path()).unwrap();

    assert_eq!(loaded.class_names, classes);
    assert_eq!(loaded.domain_names, domains);
    assert_eq!(loaded.features.labels(), m.labels());
    assert_eq!(loaded.features.domain_tags(), m.domain_tags());
    assert_eq!(loaded.features.instance_ids(), m.instance_ids());
    for (a, b) in loaded.features.rows().iter().zip(m.rows().iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // Writing the reloaded cache again reproduces identical bytes.
    let dir2 = tempfile::tempdir().unwrap();
    write_feature_cache(dir2.path(), &loaded.features, &classes, &domains).unwrap();
    let bin1 = std::fs::read(dir.path().join("features.bin")).unwrap();
    let bin2 = std::fs::read(dir2.path().join("features.bin")).unwrap();
    assert_eq!(bin1, bin2);
}

#[test]
fn truncated_blob_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let m = demo_matrix();
    write_feature_cache(dir.path(), &m, &["c".into(), "d".into()], &["p".into(), "s".into()])
        .unwrap();
    let bin = dir.path().join("features.bin");
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() - 4]).unwrap();
    assert!(read_feature_cache(dir.path()).is_err());
}

#[test]
fn label_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let m = demo_matrix();
    // Only one class name while labels reach 1.
    write_feature_cache(dir.path(), &m, &["only".into()], &["p".into(), "s".into()]).unwrap();
    assert!(read_feature_cache(dir.path()).is_err());
}

#[test]
fn raw_cache_preserves_unnormalized_rows() {
    let dir = tempfile::tempdir().unwrap();
    let rows = ndarray::array![[3.0, 4.0], [0.5, 0.5]];
    let m = FeatureMatrix::raw(rows, vec![0, 0], vec![0, 0], vec!["x".into(), "y".into()]).unwrap();
    write_feature_cache(dir.path(), &m, &["c".into()], &["p".into()]).unwrap();
    let loaded = read_feature_cache(dir.path()).unwrap();
    assert!(!loaded.features.is_normalized());
    assert_eq!(loaded.features.rows()[[0, 1]], 4.0);
}

mod properties {
    use super::*;
    use ldfs_core::{cosine, modality_gap};
    use proptest::prelude::*;

    fn unit_vec(dim: usize) -> impl Strategy<Value = Array1<f64>> {
        proptest::collection::vec(-10.0f64..10.0, dim)
            .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
            .prop_map(|v| {
                let a = Array1::from_vec(v);
                normalize(a.view()).unwrap().into_inner()
            })
    }

    proptest! {
        #[test]
        fn normalize_idempotent(v in unit_vec(8)) {
            let again = normalize(v.view()).unwrap();
            for (a, b) in v.iter().zip(again.as_slice()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn cosine_is_symmetric(u in unit_vec(8), v in unit_vec(8)) {
            let a = ldfs_core::UnitVector::new(u).unwrap();
            let b = ldfs_core::UnitVector::new(v).unwrap();
            prop_assert_eq!(cosine(&a, &b).unwrap(), cosine(&b, &a).unwrap());
        }

        #[test]
        fn gap_of_set_with_itself_is_zero(vs in proptest::collection::vec(unit_vec(6), 1..8)) {
            let mut rows = Array2::zeros((vs.len(), 6));
            for (i, v) in vs.iter().enumerate() {
                rows.row_mut(i).assign(v);
            }
            let n = vs.len();
            let m = FeatureMatrix::new(
                rows,
                vec![0; n],
                vec![0; n],
                (0..n).map(|i| i.to_string()).collect(),
            ).unwrap();
            prop_assert_eq!(modality_gap(&m, &m).unwrap(), 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn cache_round_trip_any_matrix(
            seed_rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 5), 1..12)
        ) {
            let n = seed_rows.len();
            let mut rows = Array2::zeros((n, 5));
            for (i, r) in seed_rows.iter().enumerate() {
                rows.row_mut(i).assign(&Array1::from_vec(r.clone()).mapv(|x| x as f32 as f64));
            }
            let m = FeatureMatrix::raw(
                rows,
                vec![0; n],
                vec![0; n],
                (0..n).map(|i| format!("id{i}")).collect(),
            ).unwrap();
            let dir = tempfile::tempdir().unwrap();
            write_feature_cache(dir.path(), &m, &["c".into()], &["d".into()]).unwrap();
            let loaded = read_feature_cache(dir.path()).unwrap();
            for (a, b) in loaded.features.rows().iter().zip(m.rows().iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn property_row_means_shift() {
        // adding c to every text row moves the gap by exactly the shift when
        // images are fixed and texts start identical to images
        let rows = Array2::from_shape_vec((2, 3), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let img =
            FeatureMatrix::new(rows.clone(), vec![0, 0], vec![0, 0], vec!["a".into(), "b".into()])
                .unwrap();
        let c = ndarray::array![0.1, 0.2, -0.3];
        let shifted = &rows + &c;
        let txt = FeatureMatrix::raw(shifted, vec![0, 0], vec![0, 0], vec!["a".into(), "b".into()])
            .unwrap();
        let gap = modality_gap(&img, &txt).unwrap();
        assert!((gap - c.dot(&c).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn axis_iter_guard(v in unit_vec(4)) {
            // centroid of a single row equals the row itself
            let mut rows = Array2::zeros((1, 4));
            rows.row_mut(0).assign(&v);
            let m = FeatureMatrix::new(rows, vec![0], vec![0], vec!["x".into()]).unwrap();
            let c = m.centroid().unwrap();
            for (a, b) in c.iter().zip(v.iter()) {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[allow(unused_imports)]
    use ndarray::Axis as _Axis;
}
