//! Block head-count model: the number of people in a block of area `|U|`
//! with density `λ` is Poisson with mean `λ·|U|`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::CrowdBlock;
use crate::error::{Error, Result};

/// Above this mean the sampler switches from CDF inversion to the normal
/// approximation.
pub const INVERSION_LIMIT: f64 = 50.0;

/// `P(N = k) = (λ|U|)^k / k! · e^(−λ|U|)`.
pub fn poisson_pmf(lambda_area: f64, k: u64) -> Result<f64> {
    if !lambda_area.is_finite() || lambda_area < 0.0 {
        return Err(Error::domain(format!("poisson mean must be finite and >= 0, got {lambda_area}")));
    }
    if lambda_area == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let kf = k as f64;
    Ok((kf * lambda_area.ln() - lambda_area - ln_gamma(kf + 1.0)).exp())
}

/// Draws a Poisson count with the given mean.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::domain(format!("poisson mean must be finite and >= 0, got {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean > INVERSION_LIMIT {
        let z: f64 = StandardNormal.sample(rng);
        // continuity correction: round to nearest integer
        let k = (mean + mean.sqrt() * z + 0.5).floor();
        return Ok(k.max(0.0) as u64);
    }
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p < 1e-300 && cdf >= 1.0 - 1e-15 {
            break;
        }
    }
    Ok(k)
}

/// Number of people that a block holds for one scene draw.
pub fn sample_block_count<R: Rng + ?Sized>(block: &CrowdBlock, rng: &mut R) -> Result<u64> {
    sample_poisson(block.density * block.region.area(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::rng_from_seed;

    #[test]
    fn pmf_examples() {
        assert!((poisson_pmf(2.0, 0).unwrap() - (-2.0f64).exp()).abs() < 1e-12);
        assert!((poisson_pmf(2.0, 2).unwrap() - 2.0 * (-2.0f64).exp()).abs() < 1e-12);
        assert!((poisson_pmf(2.0, 0).unwrap() - 0.135335).abs() < 1e-6);
        assert!((poisson_pmf(2.0, 2).unwrap() - 0.270671).abs() < 1e-6);
        assert_eq!(poisson_pmf(0.0, 0).unwrap(), 1.0);
        assert_eq!(poisson_pmf(0.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn pmf_rejects_bad_mean() {
        assert!(poisson_pmf(-1.0, 0).is_err());
        assert!(poisson_pmf(f64::NAN, 0).is_err());
        assert!(poisson_pmf(f64::INFINITY, 1).is_err());
    }

    #[test]
    fn pmf_sums_to_one() {
        for mean in [0.5, 4.0, 37.0, 120.0] {
            let mut total = 0.0;
            let mut k = 0;
            loop {
                let p = poisson_pmf(mean, k).unwrap();
                total += p;
                if k as f64 > mean && p < 1e-12 {
                    break;
                }
                k += 1;
            }
            assert!((total - 1.0).abs() < 1e-9, "mean {mean}: {total}");
        }
    }

    #[test]
    fn empty_block_yields_zero() {
        let block = CrowdBlock { region: Rect::new(0.0, 0.0, 10.0, 10.0), base_height: 0.0, density: 0.0 };
        let mut rng = rng_from_seed(3);
        for _ in 0..100 {
            assert_eq!(sample_block_count(&block, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn same_seed_same_count() {
        let block = CrowdBlock { region: Rect::new(0.0, 0.0, 2.0, 2.0), base_height: 0.0, density: 1.0 };
        let a = sample_block_count(&block, &mut rng_from_seed(17)).unwrap();
        let b = sample_block_count(&block, &mut rng_from_seed(17)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn moments_match_pmf() {
        // oracle: moments from direct pmf summation
        let mean = 4.0;
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 0..60u64 {
            let p = poisson_pmf(mean, k).unwrap();
            m1 += p * k as f64;
            m2 += p * (k * k) as f64;
        }
        let pmf_var = m2 - m1 * m1;
        assert!((m1 - 4.0).abs() < 1e-9 && (pmf_var - 4.0).abs() < 1e-9);

        let mut rng = rng_from_seed(2024);
        let draws: Vec<f64> = (0..10_000).map(|_| sample_poisson(mean, &mut rng).unwrap() as f64).collect();
        let n = draws.len() as f64;
        let mu = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((3.9..=4.1).contains(&mu), "mean {mu}");
        assert!((3.7..=4.3).contains(&var), "variance {var}");
    }

    #[test]
    fn large_mean_uses_normal_branch() {
        let mut rng = rng_from_seed(5);
        let draws: Vec<f64> = (0..4000).map(|_| sample_poisson(5000.0, &mut rng).unwrap() as f64).collect();
        let mu = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mu - 5000.0).abs() < 5.0, "{mu}");
    }
}
