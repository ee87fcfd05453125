//! The compound rGTL Power Series distribution.
//!
//! Y = min(Y₁, …, Y_Z) with Y_i i.i.d. reflected Generalized Topp-Leone and
//! Z zero-truncated Power Series. With S(y) the base survival and A the
//! family's generating function:
//!
//! ```text
//! f(y) = θ g(y) A′{θ S(y)} / A(θ)          (density)
//! F(y) = 1 − A{θ S(y)} / A(θ)              (cdf)
//! h(y) = θ g(y) A′{θ S(y)} / A{θ S(y)}     (hazard)
//! ```
//!
//! Equivalently f is the mixture Σ_z w_z g(y; α, νz) with weights
//! w_z = a_z θ^z / A(θ); the mixture form backs the moments and the
//! brute-force cross checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::open_unit;
use crate::power_series::{PsFamily, SERIES_TERM_CAP};
use crate::rgtl::RgtlParams;

/// A Power Series family bound to base shapes and a compounding parameter θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompoundModel {
    base: RgtlParams,
    family: PsFamily,
    theta: f64,
}

/// Mixture sums stop once this much probability mass has been covered.
const MIXTURE_WEIGHT_TAIL: f64 = 1e-14;

impl CompoundModel {
    pub fn new(base: RgtlParams, family: PsFamily, theta: f64) -> Result<Self> {
        family.validate()?;
        family.check_theta(theta)?;
        Ok(CompoundModel { base, family, theta })
    }

    pub fn base(&self) -> &RgtlParams {
        &self.base
    }

    pub fn family(&self) -> &PsFamily {
        &self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Density θ g(y) A′{θS(y)}/A(θ).
    pub fn pdf(&self, y: f64) -> Result<f64> {
        let s = self.base.survival(y)?;
        let g = self.base.pdf(y)?;
        Ok(self.theta * g * self.family.a_prime_unchecked(self.theta * s)
            / self.family.a_unchecked(self.theta))
    }

    /// ln f(y) for y strictly inside (0, 1); the likelihood works on this.
    pub fn ln_pdf(&self, y: f64) -> Result<f64> {
        let ln_s = self.base.nu() * ((1.0 - y) * (1.0 + (self.base.alpha() - 1.0) * y)).ln();
        Ok(self.theta.ln()
            + self.base.ln_pdf(y)?
            + self.family.ln_a_prime_over_a(self.theta, ln_s))
    }

    /// Survival A{θS(y)}/A(θ), formed without subtracting near-equal terms.
    pub fn survival(&self, y: f64) -> Result<f64> {
        let s = self.base.survival(y)?;
        Ok(self.family.a_unchecked(self.theta * s) / self.family.a_unchecked(self.theta))
    }

    /// Cdf 1 − A{θS(y)}/A(θ).
    pub fn cdf(&self, y: f64) -> Result<f64> {
        Ok(1.0 - self.survival(y)?)
    }

    /// Hazard θ g(y) A′{θS(y)}/A{θS(y)} on [0, 1).
    ///
    /// At y = 0 this reduces exactly to νθ(2−α)A′(θ)/A(θ); it diverges as
    /// y → 1.
    pub fn hazard(&self, y: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&y) {
            return Err(Error::domain(format!("hazard needs y in [0, 1), got {y}")));
        }
        let s = self.base.survival(y)?;
        let x = self.theta * s;
        Ok(self.theta * self.base.pdf(y)? * self.family.a_prime_unchecked(x)
            / self.family.a_unchecked(x))
    }

    /// Quantile G⁻¹(1 − A⁻¹[(1−q)A(θ)]/θ).
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::domain(format!("probability {q} outside [0, 1]")));
        }
        let target = self.family.a_inv((1.0 - q) * self.family.a_unchecked(self.theta))?;
        let s = (target / self.theta).clamp(0.0, 1.0);
        Ok(self.base.quantile_from_survival(s.powf(1.0 / self.base.nu())))
    }

    /// Mixture weight w_z = a_z θ^z / A(θ).
    pub fn mixture_weight(&self, z: u64) -> Result<f64> {
        self.family.pmf(self.theta, z)
    }

    /// Moment E[Y^r] = Σ_z w_z E[Y^r; α, νz], truncated once the cumulative
    /// weight reaches 1 − 1e-14 (exactly m terms for Binomial).
    pub fn moment(&self, r: u32) -> Result<f64> {
        let mut total = 0.0;
        let mut weight_seen = 0.0;
        let mut z: u64 = 1;
        loop {
            let w = self.mixture_weight(z)?;
            if w > 0.0 {
                total += w * self.base.with_nu_scaled(z as f64).moment(r)?;
                weight_seen += w;
            }
            if weight_seen >= 1.0 - MIXTURE_WEIGHT_TAIL {
                return Ok(total);
            }
            if let Some(m) = self.family.binomial_size() {
                if z >= u64::from(m) {
                    return Ok(total);
                }
            }
            if z as usize >= SERIES_TERM_CAP {
                return Err(Error::TruncationCap { cap: SERIES_TERM_CAP });
            }
            z += 1;
        }
    }

    /// Draws `n` values by inverse transform through the quantile.
    pub fn sample_inverse<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        (0..n)
            .map(|_| {
                let y = self.quantile(open_unit(rng))?;
                Ok(clamp_open_unit(y))
            })
            .collect()
    }

    /// Draws `n` values by the generative construction: Z from the family,
    /// then the minimum of Z base draws. Distributionally identical to
    /// [`Self::sample_inverse`].
    pub fn sample_min<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        (0..n)
            .map(|_| {
                let z = self.family.sample(self.theta, rng)?;
                let mut min = f64::INFINITY;
                for _ in 0..z {
                    let y = self.base.quantile(open_unit(rng))?;
                    if y < min {
                        min = y;
                    }
                }
                Ok(clamp_open_unit(min))
            })
            .collect()
    }
}

/// Keeps sampler output strictly inside (0, 1) even when the quantile rounds
/// to an endpoint.
fn clamp_open_unit(y: f64) -> f64 {
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geo(theta: f64, alpha: f64, nu: f64) -> CompoundModel {
        CompoundModel::new(RgtlParams::new(alpha, nu).unwrap(), PsFamily::Geometric, theta).unwrap()
    }

    #[test]
    fn construction_checks_theta_domain() {
        let base = RgtlParams::new(1.0, 1.0).unwrap();
        assert!(CompoundModel::new(base, PsFamily::Logarithmic, 1.5).is_err());
        assert!(CompoundModel::new(base, PsFamily::Poisson, 1.5).is_ok());
        assert!(CompoundModel::new(base, PsFamily::Binomial { m: 0 }, 0.5).is_err());
    }

    #[test]
    fn pdf_closed_values() {
        // Geometric: f = (1−θ)g/(1−θS)²; uniform base at y = 0.5.
        let m = geo(0.5, 1.0, 1.0);
        assert_relative_eq!(m.pdf(0.5).unwrap(), 0.888_888_888_888_888_9, epsilon = 1e-12);

        // Poisson at y = 0: θe^θ/(e^θ−1).
        let base = RgtlParams::new(1.0, 1.0).unwrap();
        let poi = CompoundModel::new(base, PsFamily::Poisson, 1.0).unwrap();
        assert_relative_eq!(poi.pdf(0.0).unwrap(), 1.581_977, epsilon = 1e-6);
    }

    #[test]
    fn tiny_theta_degenerates_to_base() {
        let base = RgtlParams::new(1.3, 1.7).unwrap();
        let m = CompoundModel::new(base, PsFamily::Geometric, 1e-12).unwrap();
        for &y in &[0.1, 0.5, 0.9] {
            assert_relative_eq!(m.pdf(y).unwrap(), base.pdf(y).unwrap(), epsilon = 1e-9);
            assert_relative_eq!(m.cdf(y).unwrap(), base.cdf(y).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn cdf_closed_values() {
        let m = geo(0.5, 1.0, 1.0);
        assert_relative_eq!(m.cdf(0.5).unwrap(), 2.0 / 3.0, epsilon = 1e-14);
        assert_eq!(m.cdf(0.0).unwrap(), 0.0);
        assert_eq!(m.cdf(1.0).unwrap(), 1.0);

        let base = RgtlParams::new(1.0, 1.0).unwrap();
        let log = CompoundModel::new(base, PsFamily::Logarithmic, 0.5).unwrap();
        assert_relative_eq!(log.cdf(0.5).unwrap(), 0.584_962_500_721_156_2, epsilon = 1e-12);
    }

    #[test]
    fn survival_complements_cdf() {
        let m = geo(0.5, 1.0, 1.0);
        assert_eq!(m.survival(0.0).unwrap(), 1.0);
        assert_relative_eq!(m.survival(0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
        for i in 0..=20 {
            let y = i as f64 / 20.0;
            let sum = m.survival(y).unwrap() + m.cdf(y).unwrap();
            assert!((sum - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hazard_values_and_divergence() {
        let base = RgtlParams::new(1.0, 1.0).unwrap();
        let poi = CompoundModel::new(base, PsFamily::Poisson, 1.0).unwrap();
        assert_relative_eq!(poi.hazard(0.0).unwrap(), 1.581_977, epsilon = 1e-6);

        let m = geo(0.5, 1.0, 1.0);
        assert_relative_eq!(m.hazard(0.5).unwrap(), 8.0 / 3.0, epsilon = 1e-12);
        assert!(m.hazard(1.0 - 1e-6).unwrap() > 1e5);
        assert!(m.hazard(1.0).is_err());
    }

    #[test]
    fn quantile_closed_values() {
        let m = geo(0.5, 1.0, 1.0);
        assert_eq!(m.quantile(0.0).unwrap(), 0.0);
        assert_eq!(m.quantile(1.0).unwrap(), 1.0);
        // F(y) = y/(1−θ(1−y)) inverts to y = q(1−θ)/(1−qθ) on this slice.
        assert_relative_eq!(m.quantile(2.0 / 3.0).unwrap(), 0.5, epsilon = 1e-13);

        let base = RgtlParams::new(1.0, 1.0).unwrap();
        let log = CompoundModel::new(base, PsFamily::Logarithmic, 0.5).unwrap();
        assert_relative_eq!(log.quantile(0.584_962_500_721_156_2).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn moment_closed_value() {
        // Geometric, uniform base: E[Y] = ((1−θ)/θ²)(−log(1−θ) − θ).
        let m = geo(0.5, 1.0, 1.0);
        let expect = (0.5 / 0.25) * (-(0.5f64.ln()) - 0.5);
        assert_relative_eq!(m.moment(1).unwrap(), expect, epsilon = 1e-10);
        assert_relative_eq!(m.moment(0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_sampler_mean_matches_moment() {
        let m = geo(0.5, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = m.sample_inverse(100_000, &mut rng).unwrap();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.386_294).abs() < 0.003, "sample mean {mean}");
        assert!(draws.iter().all(|&y| y > 0.0 && y < 1.0));
    }

    #[test]
    fn min_sampler_degenerates_for_binomial_one() {
        let base = RgtlParams::new(1.4, 0.9).unwrap();
        let m = CompoundModel::new(base, PsFamily::Binomial { m: 1 }, 2.0).unwrap();
        let mut rng1 = ChaCha8Rng::seed_from_u64(5);
        let draws = m.sample_min(2_000, &mut rng1).unwrap();
        // Z ≡ 1, so each draw is a base draw; compare against the base cdf.
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &y) in sorted.iter().enumerate() {
            let f = base.cdf(y).unwrap();
            d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        }
        assert!(d < 0.04, "KS distance {d}");
    }

    #[test]
    fn samplers_are_reproducible() {
        let m = geo(0.7, 1.2, 0.8);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            m.sample_inverse(16, &mut rng).unwrap()
        };
        assert_eq!(run(9), run(9));
    }
}
