//! Statistical behavior of text perturbation on a toy sphere: averaged
//! over many seeds, raising the noise level does not increase the gap
//! between the text cluster and a fixed image cluster.

use ldfs_core::{modality_gap, normalize, FeatureMatrix, UnitVector};
use ldfs_text::perturb_text;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const DIM: usize = 16;

/// Image cluster around a base direction, text cluster around the same
/// direction plus a fixed modality offset.
fn toy_clusters(offset: f64, rng: &mut ChaCha8Rng) -> (FeatureMatrix, Vec<UnitVector>) {
    let mut base = Array1::zeros(DIM);
    base[0] = 1.0;
    let mut gap_dir = Array1::zeros(DIM);
    gap_dir[1] = 1.0;

    let n = 24;
    let mut img_rows = Array2::zeros((n, DIM));
    let mut texts = Vec::with_capacity(n);
    for i in 0..n {
        let eps = Array1::from_shape_fn(DIM, |_| rng.sample::<f64, _>(StandardNormal) * 0.1);
        let img = normalize((&base + &eps).view()).unwrap();
        img_rows.row_mut(i).assign(&img.view());

        let eps = Array1::from_shape_fn(DIM, |_| rng.sample::<f64, _>(StandardNormal) * 0.05);
        let txt = normalize((&base + &(&gap_dir * offset) + &eps).view()).unwrap();
        texts.push(txt);
    }
    let images = FeatureMatrix::new(
        img_rows,
        vec![0; n],
        vec![0; n],
        (0..n).map(|i| format!("i{i}")).collect(),
    )
    .unwrap();
    (images, texts)
}

fn mean_gap_at(gamma: f64, images: &FeatureMatrix, texts: &[UnitVector], seeds: u64) -> f64 {
    let mut total = 0.0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Array2::zeros((texts.len(), DIM));
        for (i, t) in texts.iter().enumerate() {
            let p = perturb_text(t, gamma, &mut rng).unwrap();
            rows.row_mut(i).assign(&p.view());
        }
        let text_set = FeatureMatrix::new(
            rows,
            vec![0; texts.len()],
            vec![0; texts.len()],
            (0..texts.len()).map(|i| format!("t{i}")).collect(),
        )
        .unwrap();
        total += modality_gap(images, &text_set).unwrap();
    }
    total / seeds as f64
}

#[test]
fn mean_gap_is_non_increasing_in_gamma() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (images, texts) = toy_clusters(0.5, &mut rng);

    let gammas = [0.0, 0.05, 0.1];
    let means: Vec<f64> = gammas
        .iter()
        .map(|&g| mean_gap_at(g, &images, &texts, 100))
        .collect();

    // Averaged over 100 seeds the curve must not rise; individual draws may.
    for w in means.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-9,
            "mean gap rose along the gamma sweep: {means:?}"
        );
    }
}
