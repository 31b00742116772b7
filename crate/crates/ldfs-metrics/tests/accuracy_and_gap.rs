use std::collections::BTreeMap;

use ldfs_adapt::FinetuneStrategy;
use ldfs_core::{modality_gap, normalize, ClassTextBank, FeatureMatrix, UnitVector};
use ldfs_metrics::{evaluate_accuracy, gap_sweep, MetricsError};
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(rows: Array2<f64>, labels: Vec<usize>, domains: Vec<usize>) -> FeatureMatrix {
    let n = rows.nrows();
    FeatureMatrix::new(
        rows,
        labels,
        domains,
        (0..n).map(|i| format!("r{i}")).collect(),
    )
    .unwrap()
}

/// Classifies by nearest axis; perfect on axis-aligned test sets.
struct AxisStrategy;
impl FinetuneStrategy for AxisStrategy {
    fn name(&self) -> &str {
        "axis"
    }
    fn fit(&mut self, _f: &FeatureMatrix, _b: &ClassTextBank) -> ldfs_adapt::Result<()> {
        Ok(())
    }
    fn predict(&self, f: &UnitVector) -> ldfs_adapt::Result<usize> {
        Ok(f.as_slice()
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0))
    }
}

/// Always predicts one fixed class.
struct ConstantStrategy(usize);
impl FinetuneStrategy for ConstantStrategy {
    fn name(&self) -> &str {
        "constant"
    }
    fn fit(&mut self, _f: &FeatureMatrix, _b: &ClassTextBank) -> ldfs_adapt::Result<()> {
        Ok(())
    }
    fn predict(&self, _f: &UnitVector) -> ldfs_adapt::Result<usize> {
        Ok(self.0)
    }
}

#[test]
fn perfect_classifier_scores_one_everywhere() {
    let mut sets = BTreeMap::new();
    sets.insert(
        1usize,
        matrix(array![[1.0, 0.0], [0.0, 1.0]], vec![0, 1], vec![1, 1]),
    );
    sets.insert(
        2usize,
        matrix(array![[0.0, 1.0], [1.0, 0.0]], vec![1, 0], vec![2, 2]),
    );
    let report = evaluate_accuracy(&AxisStrategy, &sets).unwrap();
    assert_eq!(report.per_domain[&1], 1.0);
    assert_eq!(report.per_domain[&2], 1.0);
    assert_eq!(report.average, 1.0);
}

#[test]
fn constant_stub_matches_class_prior_by_direct_count() {
    let labels = vec![0, 0, 0, 1, 1, 2];
    let n = labels.len();
    let mut rows = Array2::zeros((n, 3));
    for (i, &y) in labels.iter().enumerate() {
        rows[[i, y]] = 1.0;
    }
    let mut sets = BTreeMap::new();
    sets.insert(1usize, matrix(rows, labels.clone(), vec![1; n]));

    let prior = labels.iter().filter(|&&y| y == 0).count() as f64 / n as f64;
    let report = evaluate_accuracy(&ConstantStrategy(0), &sets).unwrap();
    assert!((report.per_domain[&1] - prior).abs() < 1e-12);
}

#[test]
fn average_is_unweighted_across_domains() {
    let mut sets = BTreeMap::new();
    // domain 1: always right; domain 2: three rows, always wrong
    sets.insert(1usize, matrix(array![[1.0, 0.0]], vec![0], vec![1]));
    sets.insert(
        2usize,
        matrix(
            array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]],
            vec![1, 1, 1],
            vec![2, 2, 2],
        ),
    );
    let report = evaluate_accuracy(&ConstantStrategy(0), &sets).unwrap();
    assert!((report.average - 0.5).abs() < 1e-12);
}

#[test]
fn empty_test_set_errors() {
    let mut sets: BTreeMap<usize, FeatureMatrix> = BTreeMap::new();
    sets.insert(1usize, FeatureMatrix::empty(2));
    assert!(matches!(
        evaluate_accuracy(&AxisStrategy, &sets),
        Err(MetricsError::Empty { .. })
    ));
}

fn offset_clusters(offset: f64, seed: u64) -> (FeatureMatrix, FeatureMatrix) {
    let d = 12;
    let n = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base = Array1::<f64>::zeros(d);
    base[0] = 1.0;
    let mut gap_dir = Array1::<f64>::zeros(d);
    gap_dir[1] = 1.0;
    let mut img = Array2::zeros((n, d));
    let mut txt = Array2::zeros((n, d));
    for i in 0..n {
        let eps = Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.1);
        img.row_mut(i)
            .assign(&normalize((&base + &eps).view()).unwrap().view());
        let eps = Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.05);
        txt.row_mut(i).assign(
            &normalize((&base + &gap_dir.mapv(|x| x * offset) + &eps).view())
                .unwrap()
                .view(),
        );
    }
    (
        matrix(img, vec![0; n], vec![0; n]),
        matrix(txt, vec![0; n], vec![0; n]),
    )
}

#[test]
fn single_zero_gamma_point_equals_raw_gap() {
    let (img, txt) = offset_clusters(0.5, 7);
    let curve = gap_sweep(&img, &txt, &[0.0], &[1, 2, 3]).unwrap();
    assert_eq!(curve.len(), 1);
    let raw = modality_gap(&img, &txt).unwrap();
    assert!((curve[0].1 - raw).abs() < 1e-12);
}

#[test]
fn identical_sets_have_zero_gap_at_zero_gamma() {
    let (img, _) = offset_clusters(0.5, 8);
    let curve = gap_sweep(&img, &img, &[0.0], &[1]).unwrap();
    assert_eq!(curve[0].1, 0.0);
}

#[test]
fn gap_declines_with_noise_on_offset_fixture() {
    let (img, txt) = offset_clusters(0.5, 9);
    let seeds: Vec<u64> = (0..100).collect();
    let curve = gap_sweep(&img, &txt, &[0.0, 0.1], &seeds).unwrap();
    assert!(
        curve[1].1 < curve[0].1,
        "gap did not decline: {:?}",
        curve
    );
}

#[test]
fn empty_inputs_are_rejected() {
    let (img, txt) = offset_clusters(0.5, 10);
    assert!(gap_sweep(&img, &txt, &[], &[1]).is_err());
    assert!(gap_sweep(&img, &txt, &[0.0], &[]).is_err());
}
