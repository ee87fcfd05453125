//! Reference distributions on (0, 1) used for model comparison: Beta,
//! Kumaraswamy, Topp-Leone and the plain reflected Generalized Topp-Leone,
//! each with its own maximum-likelihood fitter.

use rand::Rng;

use crate::error::{validate_unit_observations, Error, Result};
use crate::estimation::{invert_spd, minimize, OptimSettings, Transform};
use crate::gof;
use crate::oracles;
use crate::rgtl::RgtlParams;
use crate::special::{ln_beta, reg_inc_beta};

/// Estimates with optional standard errors plus fit diagnostics, shared by
/// the two-parameter baselines.
#[derive(Debug, Clone)]
pub struct BaselineFit {
    pub params: Vec<(&'static str, f64, Option<f64>)>,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Beta distribution with shape parameters (a, b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta {
    pub a: f64,
    pub b: f64,
}

impl Beta {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::domain(format!("beta shapes ({a}, {b}) must be positive")));
        }
        Ok(Beta { a, b })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if !(0.0..=1.0).contains(&y) {
            return 0.0;
        }
        ((self.a - 1.0) * y.ln() + (self.b - 1.0) * (-y).ln_1p() - ln_beta(self.a, self.b)).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        reg_inc_beta(self.a, self.b, y.clamp(0.0, 1.0))
    }

    pub fn loglik(&self, data: &[f64]) -> Result<f64> {
        validate_unit_observations(data)?;
        let lb = ln_beta(self.a, self.b);
        Ok(data
            .iter()
            .map(|&y| (self.a - 1.0) * y.ln() + (self.b - 1.0) * (-y).ln_1p() - lb)
            .sum())
    }

    /// Quantile by bisection on the regularized incomplete beta.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        oracles::invert_cdf_bisection(|y| self.cdf(y), q)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        (0..n).map(|_| self.quantile(crate::open_unit(rng))).collect()
    }

    /// ML fit with numeric gradients on (ln a, ln b); moment-matched start
    /// plus two fixed fallbacks.
    pub fn fit(data: &[f64]) -> Result<(Beta, BaselineFit)> {
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        let var = data.iter().map(|&y| (y - mean).powi(2)).sum::<f64>() / data.len() as f64;
        let mut starts = vec![[1.0, 1.0], [0.5, 0.5], [2.0, 2.0]];
        if var > 1e-12 {
            let common = mean * (1.0 - mean) / var - 1.0;
            if common > 1e-6 {
                starts.insert(0, [mean * common, (1.0 - mean) * common]);
            }
        }
        let (params, fit) = fit_two_param(data, &starts, |p, data| {
            Beta::new(p[0], p[1]).and_then(|d| d.loglik(data))
        })?;
        Ok((Beta::new(params[0], params[1])?, fit))
    }
}

/// Kumaraswamy distribution: cdf 1 − (1 − y^a)^b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kumaraswamy {
    pub a: f64,
    pub b: f64,
}

impl Kumaraswamy {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::domain(format!("kumaraswamy shapes ({a}, {b}) must be positive")));
        }
        Ok(Kumaraswamy { a, b })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if !(0.0 < y && y < 1.0) {
            return 0.0;
        }
        self.a * self.b * y.powf(self.a - 1.0) * (1.0 - y.powf(self.a)).powf(self.b - 1.0)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, 1.0);
        1.0 - (1.0 - y.powf(self.a)).powf(self.b)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        (1.0 - (1.0 - q.clamp(0.0, 1.0)).powf(1.0 / self.b)).powf(1.0 / self.a)
    }

    pub fn loglik(&self, data: &[f64]) -> Result<f64> {
        validate_unit_observations(data)?;
        Ok(data
            .iter()
            .map(|&y| {
                self.a.ln() + self.b.ln()
                    + (self.a - 1.0) * y.ln()
                    + (self.b - 1.0) * (-y.powf(self.a)).ln_1p()
            })
            .sum())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.quantile(crate::open_unit(rng))).collect()
    }

    pub fn fit(data: &[f64]) -> Result<(Kumaraswamy, BaselineFit)> {
        let starts =
            vec![[1.0, 1.0], [0.5, 2.0], [2.0, 0.5], [2.0, 2.0], [0.5, 0.5], [3.0, 1.0]];
        let (params, fit) = fit_two_param(data, &starts, |p, data| {
            Kumaraswamy::new(p[0], p[1]).and_then(|d| d.loglik(data))
        })?;
        Ok((Kumaraswamy::new(params[0], params[1])?, fit))
    }
}

/// Topp-Leone distribution: cdf [y(2 − y)]^ν.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToppLeone {
    pub nu: f64,
}

impl ToppLeone {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::domain(format!("topp-leone shape {nu} must be positive")));
        }
        Ok(ToppLeone { nu })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if !(0.0 < y && y < 1.0) {
            return 0.0;
        }
        self.nu * (2.0 - 2.0 * y) * (y * (2.0 - y)).powf(self.nu - 1.0)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, 1.0);
        (y * (2.0 - y)).powf(self.nu)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        1.0 - (1.0 - q.clamp(0.0, 1.0).powf(1.0 / self.nu)).sqrt()
    }

    pub fn loglik(&self, data: &[f64]) -> Result<f64> {
        validate_unit_observations(data)?;
        Ok(data
            .iter()
            .map(|&y| self.nu.ln() + (2.0 - 2.0 * y).ln() + (self.nu - 1.0) * (y * (2.0 - y)).ln())
            .sum())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.quantile(crate::open_unit(rng))).collect()
    }

    /// Closed-form MLE ν̂ = −n / Σ ln[yᵢ(2 − yᵢ)] with SE ν̂/√n.
    pub fn fit(data: &[f64]) -> Result<(ToppLeone, BaselineFit)> {
        validate_unit_observations(data)?;
        if data.is_empty() {
            return Err(Error::TooFewObservations { needed: 1, got: 0 });
        }
        let n = data.len() as f64;
        let log_sum: f64 = data.iter().map(|&y| (y * (2.0 - y)).ln()).sum();
        let nu = -n / log_sum;
        let dist = ToppLeone::new(nu)?;
        let ll = dist.loglik(data)?;
        Ok((
            dist,
            BaselineFit {
                params: vec![("nu", nu, Some(nu / n.sqrt()))],
                loglik: ll,
                aic: gof::aic(ll, 1),
                converged: true,
                iterations: 0,
            },
        ))
    }
}

/// ML fit of the plain reflected Generalized Topp-Leone base distribution
/// (α, ν), with analytic gradient.
pub fn fit_rgtl(data: &[f64]) -> Result<(RgtlParams, BaselineFit)> {
    validate_unit_observations(data)?;
    if data.len() < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: data.len() });
    }
    let transforms = [Transform::ScaledLogit { scale: 2.0 }, Transform::Log];
    let objective = |z: &[f64]| -> (f64, Vec<f64>) {
        let alpha = transforms[0].to_constrained(z[0]);
        let nu = transforms[1].to_constrained(z[1]);
        if RgtlParams::new(alpha, nu).is_err() {
            return (f64::INFINITY, vec![0.0; 2]);
        }
        let mut ll = 0.0;
        let mut d_alpha = 0.0;
        let mut d_nu = 0.0;
        for &y in data {
            let p = 1.0 + (alpha - 1.0) * y;
            let q = (2.0 - alpha) + 2.0 * (alpha - 1.0) * y;
            let l = ((1.0 - y) * p).ln();
            ll += nu.ln() + (nu - 1.0) * l + q.ln();
            d_alpha += (nu - 1.0) * y / p + (2.0 * y - 1.0) / q;
            d_nu += 1.0 / nu + l;
        }
        if !ll.is_finite() {
            return (f64::INFINITY, vec![0.0; 2]);
        }
        (
            -ll,
            vec![
                -d_alpha * transforms[0].jacobian(alpha),
                -d_nu * transforms[1].jacobian(nu),
            ],
        )
    };

    let starts = [[1.0, 1.0], [0.5, 0.7], [1.5, 2.0], [1.9, 0.5], [0.8, 3.0]];
    let settings = OptimSettings { grad_scale: 1e-8, ..Default::default() };
    let mut best: Option<crate::estimation::OptimOutcome> = None;
    for s in starts {
        let z0 = vec![transforms[0].to_unconstrained(s[0]), transforms[1].to_unconstrained(s[1])];
        let out = minimize(&objective, &z0, &settings);
        if !out.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| out.value < b.value) {
            best = Some(out);
        }
    }
    let best =
        best.ok_or_else(|| Error::NonConvergence("base-distribution fit found no feasible start".into()))?;
    let alpha = transforms[0].to_constrained(best.x[0]);
    let nu = transforms[1].to_constrained(best.x[1]);
    let params = RgtlParams::new(alpha, nu)?;
    let ll = -best.value;

    let hess = oracles::finite_diff_hessian(
        |p| match RgtlParams::new(p[0], p[1]) {
            Ok(d) => -data.iter().map(|&y| d.ln_pdf(y).unwrap_or(f64::NEG_INFINITY)).sum::<f64>(),
            Err(_) => f64::INFINITY,
        },
        &[alpha, nu],
    );
    let ses = invert_spd(&hess).map(|inv| (inv[0][0].sqrt(), inv[1][1].sqrt()));

    Ok((
        params,
        BaselineFit {
            params: vec![
                ("alpha", alpha, ses.map(|s| s.0)),
                ("nu", nu, ses.map(|s| s.1)),
            ],
            loglik: ll,
            aic: gof::aic(ll, 2),
            converged: best.converged,
            iterations: best.iterations,
        },
    ))
}

/// Shared two-parameter fitter: BFGS on log-transformed shapes with central
/// finite-difference gradients of the log-likelihood, standard errors from
/// the finite-difference Hessian.
fn fit_two_param<L>(data: &[f64], starts: &[[f64; 2]], loglik: L) -> Result<([f64; 2], BaselineFit)>
where
    L: Fn(&[f64], &[f64]) -> Result<f64>,
{
    validate_unit_observations(data)?;
    if data.len() < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: data.len() });
    }
    let neg_ll_orig = |p: &[f64]| -> f64 {
        match loglik(p, data) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    let objective = |z: &[f64]| -> (f64, Vec<f64>) {
        let p = [z[0].clamp(-700.0, 700.0).exp(), z[1].clamp(-700.0, 700.0).exp()];
        let v = neg_ll_orig(&p);
        if !v.is_finite() {
            return (f64::INFINITY, vec![0.0; 2]);
        }
        let g = oracles::finite_diff_gradient(
            |zz| {
                let pp = [zz[0].clamp(-700.0, 700.0).exp(), zz[1].clamp(-700.0, 700.0).exp()];
                neg_ll_orig(&pp)
            },
            z,
            1e-6,
        );
        (v, g)
    };

    let settings = OptimSettings { grad_scale: 1e-8, ..Default::default() };
    let mut best: Option<crate::estimation::OptimOutcome> = None;
    for s in starts {
        let z0 = vec![s[0].ln(), s[1].ln()];
        let out = minimize(&objective, &z0, &settings);
        if !out.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| out.value < b.value) {
            best = Some(out);
        }
    }
    let best = best.ok_or_else(|| Error::NonConvergence("no feasible baseline start".into()))?;
    let params = [best.x[0].exp(), best.x[1].exp()];
    let ll = -best.value;

    let hess = oracles::finite_diff_hessian(neg_ll_orig, &params);
    let ses = invert_spd(&hess).map(|inv| (inv[0][0].sqrt(), inv[1][1].sqrt()));

    Ok((
        params,
        BaselineFit {
            params: vec![("a", params[0], ses.map(|s| s.0)), ("b", params[1], ses.map(|s| s.1))],
            loglik: ll,
            aic: gof::aic(ll, 2),
            converged: best.converged,
            iterations: best.iterations,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn beta_uniform_case() {
        let b = Beta::new(1.0, 1.0).unwrap();
        for &y in &[0.1, 0.5, 0.9] {
            assert_relative_eq!(b.cdf(y), y, epsilon = 1e-12);
            assert_relative_eq!(b.pdf(y), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_cdf_matches_density_quadrature() {
        // Substituting u = t^a removes the t^{a−1} endpoint singularity:
        // B_y(a, b) = (1/a) ∫₀^{y^a} (1 − u^{1/a})^{b−1} du.
        let spec = oracles::QuadratureSpec::default();
        for &(a, bb) in &[(0.2, 0.7), (2.5, 3.5), (10.0, 0.4), (5.0, 5.0)] {
            let d = Beta::new(a, bb).unwrap();
            let norm = crate::special::beta(a, bb);
            for &y in &[0.25f64, 0.6, 0.9] {
                let q = oracles::integrate(
                    |u| (1.0 - u.powf(1.0 / a)).powf(bb - 1.0),
                    0.0,
                    y.powf(a),
                    &spec,
                )
                .unwrap();
                let via_quad = q.value / (a * norm);
                assert!(
                    (via_quad - d.cdf(y)).abs() < 1e-10,
                    "Beta({a},{bb}) at {y}: {via_quad} vs {}",
                    d.cdf(y)
                );
            }
        }
    }

    #[test]
    fn kumaraswamy_uniform_and_round_trip() {
        let k = Kumaraswamy::new(1.0, 1.0).unwrap();
        assert_relative_eq!(k.cdf(0.37), 0.37, epsilon = 1e-14);
        let k2 = Kumaraswamy::new(2.3, 0.8).unwrap();
        for i in 1..20 {
            let q = i as f64 / 20.0;
            assert_relative_eq!(k2.cdf(k2.quantile(q)), q, epsilon = 1e-12);
        }
    }

    #[test]
    fn topp_leone_recovers_shape() {
        let truth = ToppLeone::new(0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let data = truth.sample(5_000, &mut rng);
        let (fitted, fit) = ToppLeone::fit(&data).unwrap();
        let se = fit.params[0].2.unwrap();
        assert!(
            (fitted.nu - 0.6).abs() < 3.0 * se,
            "nu = {}, se = {se}",
            fitted.nu
        );
    }

    #[test]
    fn beta_fit_recovers_shapes() {
        let truth = Beta::new(2.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = truth.sample(3_000, &mut rng).unwrap();
        let (fitted, fit) = Beta::fit(&data).unwrap();
        assert!(fit.converged);
        assert!((fitted.a - 2.0).abs() < 0.2, "a = {}", fitted.a);
        assert!((fitted.b - 5.0).abs() < 0.5, "b = {}", fitted.b);
    }

    #[test]
    fn kumaraswamy_fit_recovers_shapes() {
        let truth = Kumaraswamy::new(0.6, 2.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = truth.sample(3_000, &mut rng);
        let (fitted, fit) = Kumaraswamy::fit(&data).unwrap();
        assert!(fit.converged);
        assert!((fitted.a - 0.6).abs() < 0.1, "a = {}", fitted.a);
        assert!((fitted.b - 2.2).abs() < 0.4, "b = {}", fitted.b);
    }

    #[test]
    fn rgtl_fit_recovers_shapes() {
        let truth = RgtlParams::new(1.5, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data: Vec<f64> =
            (0..4_000).map(|_| truth.quantile(crate::open_unit(&mut rng)).unwrap()).collect();
        let (fitted, fit) = fit_rgtl(&data).unwrap();
        assert!(fit.converged);
        assert!((fitted.alpha() - 1.5).abs() < 0.25, "alpha = {}", fitted.alpha());
        assert!((fitted.nu() - 2.0).abs() < 0.3, "nu = {}", fitted.nu());
    }
}
