//! The standard reflected Generalized Topp-Leone distribution on [0, 1].
//!
//! Cdf `G(y) = 1 − (1−y)^ν [α − (α−1)(1−y)]^ν` with shapes α ∈ (0, 2] and
//! ν > 0. Writing the bracket as `1 + (α−1)y` keeps every evaluation free of
//! cancellation; the survival function is computed directly as a single
//! power, which the compound distribution and the hazard both rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{self, QuadratureSpec};
use crate::power_series::SERIES_TERM_CAP;
use crate::special::beta;

/// Shape parameters of the base distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgtlParams {
    alpha: f64,
    nu: f64,
}

/// Series expansions of the moments converge for |α−1|/α < 1; they are only
/// selected automatically above this margin, quadrature otherwise.
pub const MOMENT_SERIES_MIN_ALPHA: f64 = 0.6;

/// The moment series sums terms of magnitude up to (1+|k|)^ν before they
/// cancel, so it loses roughly ν·ln(1+|k|)/ln(10) digits. Beyond this bound
/// (about 6 digits of headroom left) quadrature takes over.
const MOMENT_SERIES_MAX_CANCELLATION: f64 = 14.0;

impl RgtlParams {
    /// Validates 0 < α ≤ 2 and ν > 0.
    pub fn new(alpha: f64, nu: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 2.0 {
            return Err(Error::domain(format!("alpha = {alpha} outside (0, 2]")));
        }
        if !nu.is_finite() || nu <= 0.0 {
            return Err(Error::domain(format!("nu = {nu} must be positive")));
        }
        Ok(RgtlParams { alpha, nu })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// The ratio (α − 1)/α driving the binomial expansion of the moments.
    pub fn moment_series_ratio(&self) -> f64 {
        (self.alpha - 1.0) / self.alpha
    }

    /// Returns the same shape with ν scaled by `factor` (mixture components
    /// of the compound distribution have shapes (α, νz)).
    pub(crate) fn with_nu_scaled(&self, factor: f64) -> RgtlParams {
        RgtlParams { alpha: self.alpha, nu: self.nu * factor }
    }

    // bracket(y) = α − (α−1)(1−y) = 1 + (α−1)y, positive on [0, 1].
    #[inline]
    fn bracket(&self, y: f64) -> f64 {
        1.0 + (self.alpha - 1.0) * y
    }

    // slope(y) = α − 2(α−1)(1−y) = (2−α) + 2(α−1)y, positive on (0, 1].
    #[inline]
    fn slope(&self, y: f64) -> f64 {
        (2.0 - self.alpha) + 2.0 * (self.alpha - 1.0) * y
    }

    fn check_unit(&self, y: f64) -> Result<()> {
        if (0.0..=1.0).contains(&y) {
            Ok(())
        } else {
            Err(Error::domain(format!("y = {y} outside [0, 1]")))
        }
    }

    /// Survival 1 − G(y) = [(1−y)(1 + (α−1)y)]^ν, computed as one power.
    pub fn survival(&self, y: f64) -> Result<f64> {
        self.check_unit(y)?;
        Ok(((1.0 - y) * self.bracket(y)).powf(self.nu))
    }

    /// Cdf G(y); exact 0 and 1 at the endpoints.
    pub fn cdf(&self, y: f64) -> Result<f64> {
        Ok(1.0 - self.survival(y)?)
    }

    /// Density ν[(1−y)(1+(α−1)y)]^{ν−1}[(2−α)+2(α−1)y].
    ///
    /// At y = 1 the limit is returned: +∞ for ν < 1, α for ν = 1, 0 for
    /// ν > 1. At y = 0 the value is ν(2−α).
    pub fn pdf(&self, y: f64) -> Result<f64> {
        self.check_unit(y)?;
        let core = (1.0 - y) * self.bracket(y);
        Ok(self.nu * core.powf(self.nu - 1.0) * self.slope(y))
    }

    /// ln pdf for y strictly inside (0, 1).
    pub fn ln_pdf(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::domain(format!("ln_pdf needs y in (0, 1), got {y}")));
        }
        let core = (1.0 - y) * self.bracket(y);
        Ok(self.nu.ln() + (self.nu - 1.0) * core.ln() + self.slope(y).ln())
    }

    /// Quantile: the y with G(y) = p.
    ///
    /// The inner equation u[α − (α−1)u] = c (u = 1−y, c = (1−p)^{1/ν}) is
    /// solved by the rationalized root u = 2c/(α + √(α² − 4(α−1)c)), which is
    /// the unique root in [0, 1] for every α ∈ (0, 2] and stays exact across
    /// α = 1.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        Ok(self.quantile_from_survival((1.0 - p).powf(1.0 / self.nu)))
    }

    /// Solves (1−y)·bracket(1−y) = c for y given c ∈ [0, 1]; c is the ν-th
    /// root of the target survival value.
    pub(crate) fn quantile_from_survival(&self, c: f64) -> f64 {
        let c = c.clamp(0.0, 1.0);
        let disc = (self.alpha * self.alpha - 4.0 * (self.alpha - 1.0) * c).max(0.0);
        let u = 2.0 * c / (self.alpha + disc.sqrt());
        (1.0 - u).clamp(0.0, 1.0)
    }

    /// Hazard rate g/(1−G) = ν·slope(y)/[(1−y)·bracket(y)], increasing in y.
    pub fn hazard(&self, y: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&y) {
            return Err(Error::domain(format!("hazard needs y in [0, 1), got {y}")));
        }
        Ok(self.nu * self.slope(y) / ((1.0 - y) * self.bracket(y)))
    }

    /// Unnormalized incomplete moment ∫₀^{y*} w^r g(w) dw.
    ///
    /// This is the integral itself, not the conditional expectation
    /// E[Y^r | Y ≤ y*]; divide by `cdf(y_star)` for the latter. Picks the
    /// series expansion when it converges comfortably (α ≥ 0.6), adaptive
    /// quadrature otherwise.
    pub fn incomplete_moment(&self, r: u32, y_star: f64) -> Result<f64> {
        if self.moment_series_is_accurate() {
            self.incomplete_moment_series(r, y_star)
        } else {
            self.incomplete_moment_quadrature(r, y_star)
        }
    }

    /// Whether the series route keeps enough significant digits; see
    /// [`MOMENT_SERIES_MAX_CANCELLATION`].
    pub fn moment_series_is_accurate(&self) -> bool {
        self.alpha >= MOMENT_SERIES_MIN_ALPHA
            && self.nu * self.moment_series_ratio().abs().ln_1p()
                <= MOMENT_SERIES_MAX_CANCELLATION
    }

    /// Series route for the incomplete moment:
    /// ν α^{ν−1} Σ_h C(ν−1, h)(−k)^h [(2−α)B_{y*}(r+1, ν+h) + 2(α−1)B_{y*}(r+2, ν+h)]
    /// with k = (α−1)/α. Terminates exactly at h = ν−1 for integer ν.
    pub fn incomplete_moment_series(&self, r: u32, y_star: f64) -> Result<f64> {
        self.check_moment_target(y_star)?;
        if self.alpha < MOMENT_SERIES_MIN_ALPHA {
            return Err(Error::domain(format!(
                "moment series requires alpha >= {MOMENT_SERIES_MIN_ALPHA}, got {}",
                self.alpha
            )));
        }
        if !self.moment_series_is_accurate() {
            return Err(Error::domain(format!(
                "moment series loses all significant digits at nu = {} with alpha = {}",
                self.nu, self.alpha
            )));
        }
        let (alpha, nu) = (self.alpha, self.nu);
        let k = self.moment_series_ratio();
        let a1 = r as f64 + 1.0;
        let a2 = r as f64 + 2.0;

        // Incomplete-beta values at b = ν, advanced upward in b by
        // B_x(a, b+1) = [b·B_x(a, b) + x^a (1−x)^b] / (a + b).
        let (mut b1, mut b2) = seed_incomplete_betas(a1, a2, nu, y_star)?;
        let mut pw1 = y_star.powf(a1) * (1.0 - y_star).powf(nu);
        let mut pw2 = y_star.powf(a2) * (1.0 - y_star).powf(nu);

        let mut coeff = 1.0; // C(ν−1, h)(−k)^h at h = 0
        let mut sum = 0.0;
        for h in 0..SERIES_TERM_CAP {
            let hf = h as f64;
            let term = coeff * ((2.0 - alpha) * b1 + 2.0 * (alpha - 1.0) * b2);
            sum += term;
            if term == 0.0 || (h > 0 && term.abs() < 1e-16 * sum.abs().max(1e-300)) {
                return Ok(nu * alpha.powf(nu - 1.0) * sum);
            }
            let b = nu + hf;
            b1 = (b * b1 + pw1) / (a1 + b);
            b2 = (b * b2 + pw2) / (a2 + b);
            pw1 *= 1.0 - y_star;
            pw2 *= 1.0 - y_star;
            coeff *= (nu - 1.0 - hf) / (hf + 1.0) * (-k);
        }
        Err(Error::TruncationCap { cap: SERIES_TERM_CAP })
    }

    /// Quadrature route for the incomplete moment; splits off the analytic
    /// tail when the density is singular at 1.
    pub fn incomplete_moment_quadrature(&self, r: u32, y_star: f64) -> Result<f64> {
        self.check_moment_target(y_star)?;
        let spec = QuadratureSpec::default();
        if y_star < 1.0 || self.nu >= 1.0 {
            let q = oracles::integrate(
                |w| w.powi(r as i32) * self.pdf(w).unwrap_or(f64::INFINITY),
                0.0,
                y_star,
                &spec,
            )?;
            Ok(q.value)
        } else {
            oracles::integrate_moment_with_tail(
                |w| self.pdf(w).unwrap_or(f64::INFINITY),
                |w| self.survival(w).unwrap_or(0.0),
                r,
                &spec,
            )
        }
    }

    fn check_moment_target(&self, y_star: f64) -> Result<()> {
        if y_star > 0.0 && y_star <= 1.0 {
            Ok(())
        } else {
            Err(Error::domain(format!("moment endpoint y* = {y_star} outside (0, 1]")))
        }
    }

    /// Ordinary moment E[Y^r]; incomplete moment at y* = 1.
    pub fn moment(&self, r: u32) -> Result<f64> {
        self.incomplete_moment(r, 1.0)
    }

    /// Series route for the ordinary moment (complete-beta terms).
    pub fn moment_series(&self, r: u32) -> Result<f64> {
        self.incomplete_moment_series(r, 1.0)
    }

    /// Quadrature route for the ordinary moment.
    pub fn moment_quadrature(&self, r: u32) -> Result<f64> {
        self.incomplete_moment_quadrature(r, 1.0)
    }
}

/// B_{y*}(a, ν) seeds for the series: complete beta when y* = 1, adaptive
/// quadrature of the defining integral otherwise (the integrand is smooth on
/// [0, y*] for y* < 1).
fn seed_incomplete_betas(a1: f64, a2: f64, nu: f64, y_star: f64) -> Result<(f64, f64)> {
    if y_star >= 1.0 {
        return Ok((beta(a1, nu), beta(a2, nu)));
    }
    let spec = QuadratureSpec::default();
    let b1 = oracles::integrate(|w| w.powf(a1 - 1.0) * (1.0 - w).powf(nu - 1.0), 0.0, y_star, &spec)?;
    let b2 = oracles::integrate(|w| w.powf(a2 - 1.0) * (1.0 - w).powf(nu - 1.0), 0.0, y_star, &spec)?;
    Ok((b1.value, b2.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn construction_guards() {
        assert!(RgtlParams::new(1.0, 1.0).is_ok());
        assert!(RgtlParams::new(2.0, 0.5).is_ok());
        assert!(RgtlParams::new(0.0, 1.0).is_err());
        assert!(RgtlParams::new(2.1, 1.0).is_err());
        assert!(RgtlParams::new(1.0, 0.0).is_err());
        assert!(RgtlParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn cdf_values() {
        let uniform = RgtlParams::new(1.0, 1.0).unwrap();
        assert_relative_eq!(uniform.cdf(0.3).unwrap(), 0.3, epsilon = 1e-15);

        let p = RgtlParams::new(1.5, 2.0).unwrap();
        assert_relative_eq!(p.cdf(0.5).unwrap(), 0.609_375, epsilon = 1e-15);
        assert_eq!(p.cdf(0.0).unwrap(), 0.0);
        assert_eq!(p.cdf(1.0).unwrap(), 1.0);
        assert!(p.cdf(1.1).is_err());
    }

    #[test]
    fn pdf_values_and_limits() {
        let uniform = RgtlParams::new(1.0, 1.0).unwrap();
        assert_relative_eq!(uniform.pdf(0.7).unwrap(), 1.0, epsilon = 1e-15);

        let p = RgtlParams::new(1.5, 2.0).unwrap();
        assert_relative_eq!(p.pdf(0.5).unwrap(), 1.25, epsilon = 1e-15);

        // g(0) = ν(2−α)
        let edge = RgtlParams::new(2.0, 1.0).unwrap();
        assert_eq!(edge.pdf(0.0).unwrap(), 0.0);

        // y = 1 endpoint conventions by ν
        assert_eq!(RgtlParams::new(1.2, 0.5).unwrap().pdf(1.0).unwrap(), f64::INFINITY);
        assert_relative_eq!(RgtlParams::new(1.2, 1.0).unwrap().pdf(1.0).unwrap(), 1.2);
        assert_eq!(RgtlParams::new(1.2, 2.0).unwrap().pdf(1.0).unwrap(), 0.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let uniform = RgtlParams::new(1.0, 1.0).unwrap();
        assert_relative_eq!(uniform.quantile(0.25).unwrap(), 0.25, epsilon = 1e-15);

        let p = RgtlParams::new(1.5, 2.0).unwrap();
        assert_relative_eq!(p.quantile(0.609_375).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(p.quantile(0.0).unwrap(), 0.0);
        assert_eq!(p.quantile(1.0).unwrap(), 1.0);
    }

    #[test]
    fn hazard_values_and_identity() {
        let uniform = RgtlParams::new(1.0, 1.0).unwrap();
        assert_relative_eq!(uniform.hazard(0.5).unwrap(), 2.0, epsilon = 1e-14);

        let p = RgtlParams::new(1.5, 2.0).unwrap();
        assert_relative_eq!(p.hazard(0.0).unwrap(), 1.0, epsilon = 1e-14);
        assert!(p.hazard(1.0).is_err());

        // h·(1−G) = g
        for &y in &[0.1, 0.4, 0.85, 0.999] {
            let lhs = p.hazard(y).unwrap() * p.survival(y).unwrap();
            let rhs = p.pdf(y).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }

    #[test]
    fn incomplete_moment_closed_cases() {
        let uniform = RgtlParams::new(1.0, 1.0).unwrap();
        assert_relative_eq!(uniform.incomplete_moment(1, 1.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(
            uniform.incomplete_moment(2, 0.5).unwrap(),
            1.0 / 24.0,
            epsilon = 1e-12
        );
        assert!(uniform.incomplete_moment(1, 0.0).is_err());
    }

    #[test]
    fn moment_closed_cases() {
        assert_relative_eq!(RgtlParams::new(1.0, 1.0).unwrap().moment(1).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(
            RgtlParams::new(1.0, 2.0).unwrap().moment(1).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn series_and_quadrature_agree() {
        let p = RgtlParams::new(1.5, 2.0).unwrap();
        for r in [1u32, 2] {
            let series = p.moment_series(r).unwrap();
            let quad = p.moment_quadrature(r).unwrap();
            assert!((series - quad).abs() < 1e-9, "r = {r}: {series} vs {quad}");
        }
        // incomplete endpoint
        let s = p.incomplete_moment_series(1, 0.7).unwrap();
        let q = p.incomplete_moment_quadrature(1, 0.7).unwrap();
        assert!((s - q).abs() < 1e-9);
    }

    #[test]
    fn series_gate_rejects_small_alpha() {
        let p = RgtlParams::new(0.4, 1.5).unwrap();
        assert!(p.moment_series(1).is_err());
        // auto route still works through quadrature
        assert!(p.moment(1).unwrap() > 0.0);
    }
}
