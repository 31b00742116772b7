//! Stochastic text feature augmentation: Gaussian perturbation of
//! description embeddings followed by renormalization.

use ldfs_core::{normalize, UnitVector};
use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TextError};
use crate::templates::InstanceDescriptionPair;

/// One standard-normal draw per component.
pub fn standard_normal_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.sample(StandardNormal))
}

/// `normalize(t + gamma * z)` for a caller-supplied noise vector. Gamma
/// zero returns the input bit-identically.
pub fn perturb_with_noise(t: &UnitVector, gamma: f64, z: &Array1<f64>) -> Result<UnitVector> {
    if gamma < 0.0 {
        return Err(TextError::NegativeGamma { gamma });
    }
    if gamma == 0.0 {
        return Ok(t.clone());
    }
    let shifted = t.as_ref() + &(z * gamma);
    Ok(normalize(shifted.view())?)
}

/// Perturbs one embedding with a fresh standard-normal draw from `rng`.
/// Deterministic for a fixed random stream.
pub fn perturb_text<R: Rng + ?Sized>(t: &UnitVector, gamma: f64, rng: &mut R) -> Result<UnitVector> {
    if gamma < 0.0 {
        return Err(TextError::NegativeGamma { gamma });
    }
    if gamma == 0.0 {
        return Ok(t.clone());
    }
    let z = standard_normal_vector(t.dim(), rng);
    perturb_with_noise(t, gamma, &z)
}

/// Perturbs both members of a description pair. With `shared_noise` the
/// same draw z is applied to source and target; otherwise each side gets
/// an independent draw.
pub fn perturb_pair<R: Rng + ?Sized>(
    pair: &InstanceDescriptionPair,
    gamma: f64,
    shared_noise: bool,
    rng: &mut R,
) -> Result<InstanceDescriptionPair> {
    if gamma < 0.0 {
        return Err(TextError::NegativeGamma { gamma });
    }
    if gamma == 0.0 {
        return Ok(pair.clone());
    }
    let z_source = standard_normal_vector(pair.t_source.dim(), rng);
    let z_target = if shared_noise {
        z_source.clone()
    } else {
        standard_normal_vector(pair.t_target.dim(), rng)
    };
    Ok(InstanceDescriptionPair {
        t_source: perturb_with_noise(&pair.t_source, gamma, &z_source)?,
        t_target: perturb_with_noise(&pair.t_target, gamma, &z_target)?,
        target_domain: pair.target_domain,
        attribute_used: pair.attribute_used.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ldfs_core::l2_norm;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(x: f64, y: f64) -> UnitVector {
        normalize(array![x, y].view()).unwrap()
    }

    #[test]
    fn zero_gamma_is_bit_identity() {
        let t = unit(0.6, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = perturb_text(&t, 0.0, &mut rng).unwrap();
        for (a, b) in out.as_slice().iter().zip(t.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn injected_noise_matches_hand_computation() {
        // normalize((1,0) + 0.1*(1,1)) = (1.1, 0.1)/|(1.1, 0.1)|
        let t = unit(1.0, 0.0);
        let z = array![1.0, 1.0];
        let out = perturb_with_noise(&t, 0.1, &z).unwrap();
        assert_abs_diff_eq!(out.as_slice()[0], 0.99589, epsilon = 1e-5);
        assert_abs_diff_eq!(out.as_slice()[1], 0.09054, epsilon = 1e-5);
    }

    #[test]
    fn output_stays_unit_norm_across_gammas() {
        let t = unit(0.28, -0.96);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for gamma in [0.01, 0.1, 1.0] {
            let out = perturb_text(&t, gamma, &mut rng).unwrap();
            assert_abs_diff_eq!(l2_norm(out.view()), 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn negative_gamma_is_rejected() {
        let t = unit(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            perturb_text(&t, -0.1, &mut rng),
            Err(TextError::NegativeGamma { .. })
        ));
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let t = unit(0.6, 0.8);
        let a = perturb_text(&t, 0.2, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = perturb_text(&t, 0.2, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn shared_noise_moves_pair_members_together() {
        let pair = InstanceDescriptionPair {
            t_source: unit(1.0, 0.0),
            t_target: unit(1.0, 0.0),
            target_domain: 1,
            attribute_used: String::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = perturb_pair(&pair, 0.3, true, &mut rng).unwrap();
        // identical inputs + shared z => identical outputs
        assert_eq!(out.t_source.as_slice(), out.t_target.as_slice());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = perturb_pair(&pair, 0.3, false, &mut rng).unwrap();
        assert_ne!(out.t_source.as_slice(), out.t_target.as_slice());
    }
}
