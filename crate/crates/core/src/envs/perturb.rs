use rand::Rng;
use rand_distr::StandardNormal;

/// `obs + sigma * xi` with an independent standard normal per component.
pub fn perturb_observation<R: Rng + ?Sized>(obs: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return obs.to_vec();
    }
    obs.iter()
        .map(|o| o + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{rng, Stream};

    #[test]
    fn zero_sigma_is_identity() {
        let obs = [1.5, -2.0, 1e9];
        assert_eq!(perturb_observation(&obs, 0.0, &mut rng(1, Stream::ObsNoise, 0)), obs);
    }

    #[test]
    fn seeded_noise_reproduces() {
        let obs = [0.0; 5];
        let a = perturb_observation(&obs, 0.25, &mut rng(4, Stream::ObsNoise, 0));
        let b = perturb_observation(&obs, 0.25, &mut rng(4, Stream::ObsNoise, 0));
        assert_eq!(a, b);
        assert!(a.iter().any(|v| *v != 0.0));
    }

    #[test]
    fn noise_mean_vanishes() {
        let n = 100_000;
        let sigma = 0.25;
        let mut r = rng(11, Stream::ObsNoise, 0);
        let mean = (0..n).map(|_| perturb_observation(&[3.0], sigma, &mut r)[0] - 3.0).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "{mean}");
    }
}
