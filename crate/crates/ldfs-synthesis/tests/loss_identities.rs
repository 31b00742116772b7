use ldfs_core::{normalize, ClassTextBank};
use ldfs_synthesis::{
    pairwise_relation_loss, total_loss, Activation, LossConfig, MapperParams, SynthesisBatch,
};
use ldfs_text::InstanceDescriptionPair;
use ndarray::{array, Array1, Array2};

fn unit2(x: f64, y: f64) -> ldfs_core::UnitVector {
    normalize(array![x, y].view()).unwrap()
}

/// Mapper that ignores its input and emits `out` (up to scale) via the
/// output bias.
fn constant_mapper(out: Array1<f64>) -> MapperParams {
    let d = out.len();
    MapperParams {
        w1: Array2::zeros((d, d)),
        b1: Array1::zeros(d),
        w2: Array2::zeros((d, d)),
        b2: out,
        activation: Activation::Linear,
        target_domain: 1,
    }
}

fn single_instance_batch(
    f: (f64, f64),
    t_source: (f64, f64),
    t_target: (f64, f64),
) -> SynthesisBatch {
    let mut source = Array2::zeros((1, 2));
    source.row_mut(0).assign(&unit2(f.0, f.1).view());
    SynthesisBatch::new(
        source,
        vec![0],
        vec![InstanceDescriptionPair {
            t_source: unit2(t_source.0, t_source.1),
            t_target: unit2(t_target.0, t_target.1),
            target_domain: 1,
            attribute_used: String::new(),
        }],
        vec!["x".into()],
    )
    .unwrap()
}

fn two_class_bank() -> ClassTextBank {
    ClassTextBank::new(
        vec!["a".into(), "b".into()],
        array![[1.0, 0.0], [0.0, 1.0]],
    )
    .unwrap()
}

fn ld_only() -> LossConfig {
    LossConfig {
        alpha: 0.0,
        beta: 0.0,
        ..LossConfig::default()
    }
}

#[test]
fn aligned_directions_score_zero() {
    // adapted (0,1) from f (1,0): delta_i = (-1,1); text direction matches.
    let batch = single_instance_batch((1.0, 0.0), (1.0, 0.0), (0.0, 1.0));
    let params = constant_mapper(array![0.0, 2.0]);
    let losses = total_loss(&batch, &params, &two_class_bank(), &ld_only()).unwrap();
    assert!(losses.ld.abs() <= 1e-9, "ld = {}", losses.ld);
}

#[test]
fn anti_aligned_directions_score_two() {
    // text direction (1,-1) is exactly the negative of delta_i (-1,1).
    let batch = single_instance_batch((1.0, 0.0), (0.0, 1.0), (1.0, 0.0));
    let params = constant_mapper(array![0.0, 2.0]);
    let losses = total_loss(&batch, &params, &two_class_bank(), &ld_only()).unwrap();
    assert!((losses.ld - 2.0).abs() <= 1e-9, "ld = {}", losses.ld);
}

#[test]
fn partial_alignment_matches_hand_cosine() {
    // adapted (0.6,0.8): delta_i = (-0.4,0.8); delta_t = (-1,1)
    // cos = 1.2 / (sqrt(0.8) sqrt(2)) = 0.94868...
    let batch = single_instance_batch((1.0, 0.0), (1.0, 0.0), (0.0, 1.0));
    let params = constant_mapper(array![0.6, 0.8]);
    let losses = total_loss(&batch, &params, &two_class_bank(), &ld_only()).unwrap();
    assert!((losses.ld - 0.05132).abs() < 1e-5, "ld = {}", losses.ld);
}

#[test]
fn degenerate_image_direction_contributes_maximum_and_is_counted() {
    // Identity mapper leaves adapted == source, so delta_i = 0.
    let batch = single_instance_batch((1.0, 0.0), (1.0, 0.0), (0.0, 1.0));
    let params = MapperParams::identity(2, 1);
    let losses = total_loss(&batch, &params, &two_class_bank(), &ld_only()).unwrap();
    assert_eq!(losses.degenerate_instances, 1);
    assert!((losses.ld - 1.0).abs() <= 1e-12);
}

#[test]
fn zero_text_direction_is_rejected_at_batch_construction() {
    let mut source = Array2::zeros((1, 2));
    source.row_mut(0).assign(&unit2(1.0, 0.0).view());
    let err = SynthesisBatch::new(
        source,
        vec![0],
        vec![InstanceDescriptionPair {
            t_source: unit2(1.0, 0.0),
            t_target: unit2(1.0, 0.0),
            target_domain: 1,
            attribute_used: String::new(),
        }],
        vec!["x".into()],
    )
    .unwrap_err();
    assert!(matches!(
        err,
        ldfs_synthesis::SynthesisError::DegenerateDirection { .. }
    ));
}

#[test]
fn class_consistency_matches_two_class_closed_form() {
    // adapted (1,0), label 0, tau 1: CE = ln(1 + e^{-1})
    let batch = single_instance_batch((1.0, 0.0), (1.0, 0.0), (0.0, 1.0));
    let params = constant_mapper(array![1.0, 0.0]);
    let cfg = LossConfig {
        alpha: 1.0,
        beta: 0.0,
        tau: 1.0,
        ..LossConfig::default()
    };
    let losses = total_loss(&batch, &params, &two_class_bank(), &cfg).unwrap();
    let expected = (1.0 + (-1.0f64).exp()).ln();
    assert!((losses.cc - expected).abs() < 1e-12, "cc = {}", losses.cc);
}

#[test]
fn equidistant_feature_scores_ln_c() {
    // adapted e4 is orthogonal to all three bank rows: uniform softmax.
    let bank = ClassTextBank::new(
        vec!["a".into(), "b".into(), "c".into()],
        array![
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0]
        ],
    )
    .unwrap();
    let mut source = Array2::zeros((1, 4));
    source[[0, 0]] = 1.0;
    let batch = SynthesisBatch::new(
        source,
        vec![0],
        vec![InstanceDescriptionPair {
            t_source: normalize(array![1.0, 0.0, 0.0, 0.0].view()).unwrap(),
            t_target: normalize(array![0.0, 1.0, 0.0, 0.0].view()).unwrap(),
            target_domain: 1,
            attribute_used: String::new(),
        }],
        vec!["x".into()],
    )
    .unwrap();
    let params = constant_mapper(array![0.0, 0.0, 0.0, 1.0]);
    let cfg = LossConfig {
        alpha: 1.0,
        beta: 0.0,
        tau: 1.0,
        ..LossConfig::default()
    };
    let losses = total_loss(&batch, &params, &bank, &cfg).unwrap();
    assert!((losses.cc - 3.0f64.ln()).abs() <= 1e-9, "cc = {}", losses.cc);
}

#[test]
fn small_tau_with_correct_max_drives_cc_to_zero() {
    let batch = single_instance_batch((1.0, 0.0), (1.0, 0.0), (0.0, 1.0));
    let params = constant_mapper(array![1.0, 0.0]); // cos (1, 0) to classes
    let cfg = LossConfig {
        alpha: 1.0,
        beta: 0.0,
        tau: 0.01,
        ..LossConfig::default()
    };
    let losses = total_loss(&batch, &params, &two_class_bank(), &cfg).unwrap();
    assert!(losses.cc < 1e-3, "cc = {}", losses.cc);
}

#[test]
fn non_positive_tau_is_rejected() {
    let batch = single_instance_batch((1.0, 0.0), (1.0, 0.0), (0.0, 1.0));
    let params = constant_mapper(array![1.0, 0.0]);
    for tau in [0.0, -1.0] {
        let cfg = LossConfig {
            tau,
            ..LossConfig::default()
        };
        assert!(matches!(
            total_loss(&batch, &params, &two_class_bank(), &cfg),
            Err(ldfs_synthesis::SynthesisError::TauNonPositive { .. })
        ));
    }
}

#[test]
fn pairwise_loss_zero_for_identical_sets() {
    let rows = array![[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]];
    assert_eq!(pairwise_relation_loss(rows.view(), rows.view()).unwrap(), 0.0);
}

#[test]
fn pairwise_loss_single_pair_hand_computed() {
    // cos(source pair) = 0, cos(adapted pair) = 1 -> (0-1)^2 / 1 = 1
    let source = array![[1.0, 0.0], [0.0, 1.0]];
    let adapted = array![[1.0, 0.0], [1.0, 0.0]];
    let loss = pairwise_relation_loss(source.view(), adapted.view()).unwrap();
    assert!((loss - 1.0).abs() <= 1e-12);
}

#[test]
fn pairwise_loss_invariant_under_rotation() {
    let source = array![[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]];
    let theta: f64 = 0.7;
    let rot = array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
    let rotated = source.dot(&rot.t());
    let loss = pairwise_relation_loss(source.view(), rotated.view()).unwrap();
    assert!(loss <= 1e-9, "loss = {loss}");
}

#[test]
fn pairwise_loss_invariant_under_simultaneous_permutation() {
    let source = array![[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]];
    let adapted = array![[0.8, 0.6], [1.0, 0.0], [0.0, 1.0]];
    let a = pairwise_relation_loss(source.view(), adapted.view()).unwrap();
    let perm = [2usize, 0, 1];
    let source_p = source.select(ndarray::Axis(0), &perm);
    let adapted_p = adapted.select(ndarray::Axis(0), &perm);
    let b = pairwise_relation_loss(source_p.view(), adapted_p.view()).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn pairwise_loss_of_single_row_is_zero_with_warning() {
    let row = array![[1.0, 0.0]];
    assert_eq!(pairwise_relation_loss(row.view(), row.view()).unwrap(), 0.0);
}

#[test]
fn zero_weights_reduce_total_to_direction_loss() {
    let batch = single_instance_batch((1.0, 0.0), (1.0, 0.0), (0.0, 1.0));
    let params = constant_mapper(array![0.6, 0.8]);
    let losses = total_loss(&batch, &params, &two_class_bank(), &ld_only()).unwrap();
    assert_eq!(losses.total, losses.ld);
}

mod bounds {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_setup(seed: u64) -> (SynthesisBatch, MapperParams, ClassTextBank) {
        use ldfs_core::normalize;
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 6;
        let b = 4;
        let c = 3;
        let unit = |rng: &mut ChaCha8Rng| {
            let v =
                Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
            normalize(v.view()).unwrap()
        };
        let mut source = Array2::zeros((b, d));
        let mut pairs = Vec::new();
        for i in 0..b {
            source.row_mut(i).assign(&unit(&mut rng).view());
            pairs.push(InstanceDescriptionPair {
                t_source: unit(&mut rng),
                t_target: unit(&mut rng),
                target_domain: 1,
                attribute_used: String::new(),
            });
        }
        let batch = SynthesisBatch::new(
            source,
            (0..b).map(|i| i % c).collect(),
            pairs,
            (0..b).map(|i| i.to_string()).collect(),
        )
        .unwrap();

        let mut bank_rows = Array2::zeros((c, d));
        for i in 0..c {
            bank_rows.row_mut(i).assign(&unit(&mut rng).view());
        }
        let bank = ClassTextBank::new(
            (0..c).map(|i| format!("c{i}")).collect(),
            bank_rows,
        )
        .unwrap();

        let mut params = MapperParams::init_near_identity(
            d,
            d,
            Activation::Gelu,
            1,
            &mut rng,
        )
        .unwrap();
        // random perturbation so the mapper is far from identity
        params.w1.mapv_inplace(|x| x + 0.3);
        (batch, params, bank)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn loss_terms_respect_bounds(seed in 0u64..1000) {
            let (batch, params, bank) = random_setup(seed);
            let cfg = LossConfig { alpha: 0.7, beta: 0.4, tau: 0.05, ..LossConfig::default() };
            let losses = total_loss(&batch, &params, &bank, &cfg).unwrap();
            prop_assert!(losses.ld >= 0.0 && losses.ld <= 2.0);
            prop_assert!(losses.pair >= 0.0);
            let c = bank.num_classes() as f64;
            prop_assert!(losses.cc >= 0.0 && losses.cc <= c.ln() + 2.0 / cfg.tau + 1e-9);
        }
    }
}
