//! Maximum-likelihood estimation for the compound distribution: analytic
//! score and observed information, direct multi-start quasi-Newton fitting,
//! and an EM algorithm over the latent component count.
//!
//! The log-likelihood of a sample y₁…y_n is
//!
//! ```text
//! ℓ(α, ν, θ) = n ln θ − n ln A(θ) + Σ ln g(yᵢ) + Σ ln A′{θ S(yᵢ)}
//! ```
//!
//! with S the base survival function. The score and the observed information
//! J = −∇²ℓ are evaluated from closed forms below and are validated against
//! finite differences of ℓ in the test suite; the finite-difference check is
//! the authority wherever transcriptions of these formulas disagree.

mod em;
mod optim;

pub use em::{conditional_expected_z, fit_em};

use serde::{Deserialize, Serialize};

use crate::compound::CompoundModel;
use crate::error::{validate_unit_observations, Error, Result};
use crate::oracles::{self, QuadratureSpec};
use crate::power_series::PsFamily;
use crate::rgtl::RgtlParams;

pub(crate) use optim::{halton, invert_spd, minimize, OptimOutcome, OptimSettings, Transform};

/// Tuning knobs for [`fit_ml`] and [`fit_em`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitOptions {
    /// Number of low-discrepancy grid starts (a moment-matched start is
    /// always added on top).
    pub starts: usize,
    /// Iteration cap: quasi-Newton steps per start for direct ML, cycles for
    /// EM.
    pub max_iter: usize,
    /// Step/parameter-change tolerance declaring convergence.
    pub tol: f64,
    /// Seed for sampling-dependent consumers (bootstrap, synthetic data);
    /// the fit itself is deterministic by construction.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { starts: 8, max_iter: 500, tol: 1e-9, seed: 0 }
    }
}

impl FitOptions {
    /// Defaults adapted to EM: fewer starts, more (cheaper) iterations.
    pub fn default_em() -> Self {
        FitOptions { starts: 3, max_iter: 2000, tol: 1e-8, seed: 0 }
    }
}

/// Which fitter produced a [`FitResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    DirectMl,
    Em,
}

/// Point estimates of the three free parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimates {
    pub alpha: f64,
    pub nu: f64,
    pub theta: f64,
}

/// Per-parameter indicators that an estimate sits within `BOUNDARY_TOL` of
/// the edge of its domain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundaryFlags {
    pub alpha: bool,
    pub nu: bool,
    pub theta: bool,
}

const BOUNDARY_TOL: f64 = 1e-3;

/// Outcome of a maximum-likelihood or EM fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub family: PsFamily,
    pub estimates: Estimates,
    /// Square roots of the diagonal of J⁻¹ at the optimum, absent when the
    /// observed information is not positive definite.
    pub std_errors: Option<Estimates>,
    /// Reason standard errors are absent, when they are.
    pub se_failure: Option<String>,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_inf_norm: f64,
    pub method: FitMethod,
    pub boundary_flags: BoundaryFlags,
    pub n_obs: usize,
}

impl FitResult {
    /// Number of free parameters (the binomial size m is fixed, never
    /// estimated).
    pub fn n_params(&self) -> usize {
        3
    }

    /// Rebuilds the fitted model object.
    pub fn model(&self) -> Result<CompoundModel> {
        CompoundModel::new(
            RgtlParams::new(self.estimates.alpha, self.estimates.nu)?,
            self.family,
            self.estimates.theta,
        )
    }
}

/// Per-observation quantities shared by the likelihood, score and
/// information sums.
struct ObsTerms {
    y: f64,
    /// bracket 1 + (α−1)y
    p: f64,
    /// slope (2−α) + 2(α−1)y
    q: f64,
    /// ln[(1−y)·bracket]
    l: f64,
    /// base survival S = [(1−y)·bracket]^ν
    s: f64,
    /// A″/A′ at θS
    r2: f64,
    /// d/dx [A″/A′] at θS
    r1: f64,
}

fn obs_terms(model: &CompoundModel, y: f64) -> ObsTerms {
    let alpha = model.base().alpha();
    let nu = model.base().nu();
    let p = 1.0 + (alpha - 1.0) * y;
    let q = (2.0 - alpha) + 2.0 * (alpha - 1.0) * y;
    let l = ((1.0 - y) * p).ln();
    let s = (nu * l).exp();
    let x = model.theta() * s;
    ObsTerms {
        y,
        p,
        q,
        l,
        s,
        r2: model.family().curvature_ratio(x),
        r1: model.family().curvature_ratio_slope(x),
    }
}

/// Log-likelihood of `data` under `model`; every observation must lie
/// strictly inside (0, 1).
pub fn loglik(model: &CompoundModel, data: &[f64]) -> Result<f64> {
    validate_unit_observations(data)?;
    let family = model.family();
    let theta = model.theta();
    let nu = model.base().nu();
    let n = data.len() as f64;
    let mut sum = n * theta.ln();
    for &y in data {
        let t = obs_terms(model, y);
        sum += nu.ln() + (nu - 1.0) * t.l + t.q.ln();
        sum += family.ln_a_prime_over_a(theta, nu * t.l);
    }
    Ok(sum)
}

/// Analytic score (∂ℓ/∂α, ∂ℓ/∂ν, ∂ℓ/∂θ).
pub fn score(model: &CompoundModel, data: &[f64]) -> Result<[f64; 3]> {
    validate_unit_observations(data)?;
    Ok(loglik_and_score(model, data).1)
}

/// One pass over the data producing ℓ and its gradient together.
fn loglik_and_score(model: &CompoundModel, data: &[f64]) -> (f64, [f64; 3]) {
    let family = model.family();
    let theta = model.theta();
    let nu = model.base().nu();
    let n = data.len() as f64;

    let mut ll = n * theta.ln();
    let mut d_alpha = 0.0;
    let mut d_nu = 0.0;
    let mut d_theta = n / theta - n * family.a_prime_over_a(theta);

    for &y in data {
        let t = obs_terms(model, y);
        ll += nu.ln() + (nu - 1.0) * t.l + t.q.ln();
        ll += family.ln_a_prime_over_a(theta, nu * t.l);

        let dg_a = -nu * t.y * t.s / t.p; // ∂G-complement slope: Ġ_α
        let dg_n = -t.s * t.l; // Ġ_ν
        d_alpha += (nu - 1.0) * t.y / t.p + (2.0 * t.y - 1.0) / t.q - theta * t.r2 * dg_a;
        d_nu += 1.0 / nu + t.l - theta * t.r2 * dg_n;
        d_theta += t.r2 * t.s;
    }
    (ll, [d_alpha, d_nu, d_theta])
}

/// Observed information J = −∇²ℓ in the (α, ν, θ) ordering, symmetric by
/// construction.
pub fn observed_information(model: &CompoundModel, data: &[f64]) -> Result<[[f64; 3]; 3]> {
    validate_unit_observations(data)?;
    let family = model.family();
    let theta = model.theta();
    let nu = model.base().nu();
    let n = data.len() as f64;

    // (A″A − A′²)/A² = (A″/A′)(A′/A) − (A′/A)², formed from the stable ratios
    let ratio = family.a_prime_over_a(theta);
    let curv = family.curvature_ratio(theta);

    let mut j_aa = 0.0;
    let mut j_an = 0.0;
    let mut j_nn = n / (nu * nu);
    let mut j_at = 0.0;
    let mut j_nt = 0.0;
    let mut j_tt = n / (theta * theta) + n * (curv * ratio - ratio * ratio);

    for &y in data {
        let t = obs_terms(model, y);
        let dg_a = -nu * t.y * t.s / t.p;
        let dg_n = -t.s * t.l;
        let d2g_aa = -nu * (nu - 1.0) * t.y * t.y * t.s / (t.p * t.p);
        let d2g_an = dg_a * (1.0 / nu + t.l);
        let d2g_nn = dg_n * t.l;

        // −∂² ln g contributions
        j_aa += (nu - 1.0) * t.y * t.y / (t.p * t.p)
            + (2.0 * t.y - 1.0) * (2.0 * t.y - 1.0) / (t.q * t.q);
        j_an += -t.y / t.p;

        // −∂² ln A′{θS} contributions
        j_aa += -theta * theta * t.r1 * dg_a * dg_a + theta * t.r2 * d2g_aa;
        j_an += -theta * theta * t.r1 * dg_a * dg_n + theta * t.r2 * d2g_an;
        j_nn += -theta * theta * t.r1 * dg_n * dg_n + theta * t.r2 * d2g_nn;
        j_at += t.r2 * dg_a + theta * t.r1 * dg_a * t.s;
        j_nt += t.r2 * dg_n + theta * t.r1 * dg_n * t.s;
        j_tt += -t.r1 * t.s * t.s;
    }

    Ok([[j_aa, j_an, j_at], [j_an, j_nn, j_nt], [j_at, j_nt, j_tt]])
}

/// Uncorrected variant of [`observed_information`] reproducing three common
/// transcription slips (J_νν built from the α derivatives, the J_αθ/J_νθ
/// leading sums missing their Ġ factor, and n/θ in place of n/θ² in J_θθ).
/// Retained so the tests can document that the corrected form, not this one,
/// matches the finite-difference Hessian.
#[cfg(test)]
pub(crate) fn observed_information_as_printed(
    model: &CompoundModel,
    data: &[f64],
) -> Result<[[f64; 3]; 3]> {
    validate_unit_observations(data)?;
    let family = model.family();
    let theta = model.theta();
    let nu = model.base().nu();
    let n = data.len() as f64;

    let ratio = family.a_prime_over_a(theta);
    let curv = family.curvature_ratio(theta);

    let mut j_aa = 0.0;
    let mut j_an = 0.0;
    let mut j_nn = 0.0;
    let mut j_at = 0.0;
    let mut j_nt = 0.0;
    let mut j_tt = n / theta + n * (curv * ratio - ratio * ratio);

    for &y in data {
        let t = obs_terms(model, y);
        let dg_a = -nu * t.y * t.s / t.p;
        let dg_n = -t.s * t.l;
        let d2g_aa = -nu * (nu - 1.0) * t.y * t.y * t.s / (t.p * t.p);
        let d2g_an = dg_a * (1.0 / nu + t.l);
        let d2g_nn = dg_n * t.l;

        let lng_aa = (nu - 1.0) * t.y * t.y / (t.p * t.p)
            + (2.0 * t.y - 1.0) * (2.0 * t.y - 1.0) / (t.q * t.q);
        j_aa += lng_aa - theta * theta * t.r1 * dg_a * dg_a + theta * t.r2 * d2g_aa;
        j_an += -t.y / t.p - theta * theta * t.r1 * dg_a * dg_n + theta * t.r2 * d2g_an;
        // slip: copies the αα log-density curvature into the νν slot
        j_nn += lng_aa - theta * theta * t.r1 * dg_n * dg_n + theta * t.r2 * d2g_nn;
        // slip: leading sums lack the Ġ factors
        j_at += t.r2 + theta * t.r1 * dg_a * t.s;
        j_nt += t.r2 + theta * t.r1 * dg_n * t.s;
        j_tt += -t.r1 * t.s * t.s;
    }

    Ok([[j_aa, j_an, j_at], [j_an, j_nn, j_nt], [j_at, j_nt, j_tt]])
}

pub(crate) fn param_transforms(family: PsFamily) -> [Transform; 3] {
    let theta_transform = if family.theta_domain().1.is_finite() {
        Transform::ScaledLogit { scale: 1.0 }
    } else {
        Transform::Log
    };
    [Transform::ScaledLogit { scale: 2.0 }, Transform::Log, theta_transform]
}

pub(crate) fn model_from_unconstrained(
    family: PsFamily,
    transforms: &[Transform; 3],
    z: &[f64],
) -> Option<CompoundModel> {
    let alpha = transforms[0].to_constrained(z[0]);
    let nu = transforms[1].to_constrained(z[1]);
    let theta = transforms[2].to_constrained(z[2]);
    let base = RgtlParams::new(alpha, nu).ok()?;
    CompoundModel::new(base, family, theta).ok()
}

/// Deterministic start set: `n_grid` Halton points over a broad box plus a
/// moment-matched point (sample mean against the model mean over a coarse
/// parameter grid).
pub(crate) fn build_starts(family: PsFamily, data: &[f64], n_grid: usize) -> Vec<[f64; 3]> {
    let infinite_theta = !family.theta_domain().1.is_finite();
    let mut starts = Vec::with_capacity(n_grid + 1);
    for i in 1..=n_grid {
        let u1 = halton(i, 2);
        let u2 = halton(i, 3);
        let u3 = halton(i, 5);
        let alpha = 0.2 + 1.75 * u1;
        let nu = (0.25f64.ln() + u2 * (4.0f64 / 0.25).ln()).exp();
        let theta = if infinite_theta {
            (0.1f64.ln() + u3 * (6.0f64 / 0.1).ln()).exp()
        } else {
            0.05 + 0.9 * u3
        };
        starts.push([alpha, nu, theta]);
    }
    starts.push(moment_matched_start(family, data, infinite_theta));
    starts
}

/// Coarse grid search matching the model mean E[Y] = ∫₀¹ A(θS(y))/A(θ) dy to
/// the sample mean.
fn moment_matched_start(family: PsFamily, data: &[f64], infinite_theta: bool) -> [f64; 3] {
    let sample_mean = data.iter().sum::<f64>() / data.len().max(1) as f64;
    let alphas = [0.6, 1.0, 1.4, 1.8];
    let nus = [0.3, 0.7, 1.2, 2.0, 3.5];
    let thetas: [f64; 4] =
        if infinite_theta { [0.3, 1.0, 2.5, 5.0] } else { [0.15, 0.45, 0.75, 0.95] };
    let spec = QuadratureSpec { abs_tol: 1e-8, rel_tol: 1e-6, ..Default::default() };

    let mut best = [1.0, 1.0, thetas[1]];
    let mut best_gap = f64::INFINITY;
    for &alpha in &alphas {
        for &nu in &nus {
            let Ok(base) = RgtlParams::new(alpha, nu) else { continue };
            for &theta in &thetas {
                let Ok(model) = CompoundModel::new(base, family, theta) else { continue };
                // E[Y] = ∫ survival for a nonnegative bounded variable
                let Ok(q) = oracles::integrate(|y| model.survival(y).unwrap_or(0.0), 0.0, 1.0, &spec)
                else {
                    continue;
                };
                let gap = (q.value - sample_mean).abs();
                if gap < best_gap {
                    best_gap = gap;
                    best = [alpha, nu, theta];
                }
            }
        }
    }
    best
}

/// Direct maximum likelihood: quasi-Newton ascent in log/logit-transformed
/// coordinates from every start, best final log-likelihood wins (ties keep
/// the earliest start). Standard errors come from the inverse observed
/// information at the optimum.
pub fn fit_ml(family: PsFamily, data: &[f64], opts: &FitOptions) -> Result<FitResult> {
    family.validate()?;
    validate_unit_observations(data)?;
    if data.len() < 5 {
        return Err(Error::TooFewObservations { needed: 5, got: data.len() });
    }

    let transforms = param_transforms(family);
    let objective = |z: &[f64]| -> (f64, Vec<f64>) {
        match model_from_unconstrained(family, &transforms, z) {
            Some(model) => {
                let (ll, grad) = loglik_and_score(&model, data);
                if !ll.is_finite() {
                    return (f64::INFINITY, vec![0.0; 3]);
                }
                let x = [model.base().alpha(), model.base().nu(), model.theta()];
                let g: Vec<f64> = (0..3).map(|j| -grad[j] * transforms[j].jacobian(x[j])).collect();
                (-ll, g)
            }
            None => (f64::INFINITY, vec![0.0; 3]),
        }
    };

    // Tight gradient criterion in transformed coordinates so the score in
    // original coordinates is stationary to 1e-6·(1+|ℓ|) even after the
    // Jacobian rescaling.
    let settings = OptimSettings { max_iter: opts.max_iter, grad_scale: 1e-8, step_tol: opts.tol };
    let mut best: Option<optim::OptimOutcome> = None;
    for start in build_starts(family, data, opts.starts) {
        let z0: Vec<f64> =
            (0..3).map(|j| transforms[j].to_unconstrained(start[j])).collect();
        let outcome = minimize(&objective, &z0, &settings);
        if !outcome.value.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => outcome.value < b.value,
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.ok_or_else(|| {
        Error::NonConvergence("no start produced a finite log-likelihood".into())
    })?;

    let model = model_from_unconstrained(family, &transforms, &best.x)
        .ok_or_else(|| Error::NonConvergence("optimum left the parameter domain".into()))?;
    finalize_fit(model, data, FitMethod::DirectMl, best.converged, best.iterations, best.grad_inf_norm)
}

/// Builds the [`FitResult`] for a final parameter point: log-likelihood,
/// AIC, standard errors from J⁻¹ and boundary flags.
pub(crate) fn finalize_fit(
    model: CompoundModel,
    data: &[f64],
    method: FitMethod,
    converged: bool,
    iterations: usize,
    grad_inf_norm: f64,
) -> Result<FitResult> {
    let family = *model.family();
    let (alpha, nu, theta) = (model.base().alpha(), model.base().nu(), model.theta());
    let ll = loglik(&model, data)?;

    let info = observed_information(&model, data)?;
    let info_vec: Vec<Vec<f64>> = info.iter().map(|r| r.to_vec()).collect();
    let (std_errors, se_failure) = match invert_spd(&info_vec) {
        Some(inv) => (
            Some(Estimates {
                alpha: inv[0][0].sqrt(),
                nu: inv[1][1].sqrt(),
                theta: inv[2][2].sqrt(),
            }),
            None,
        ),
        None => (None, Some("observed information matrix is not positive definite".to_string())),
    };

    let (theta_lo, theta_hi) = family.theta_domain();
    let boundary_flags = BoundaryFlags {
        alpha: alpha <= BOUNDARY_TOL || 2.0 - alpha <= BOUNDARY_TOL,
        nu: nu <= BOUNDARY_TOL,
        theta: theta - theta_lo <= BOUNDARY_TOL
            || (theta_hi.is_finite() && theta_hi - theta <= BOUNDARY_TOL),
    };

    Ok(FitResult {
        family,
        estimates: Estimates { alpha, nu, theta },
        std_errors,
        se_failure,
        loglik: ll,
        aic: crate::gof::aic(ll, 3),
        converged,
        iterations,
        grad_inf_norm,
        method,
        boundary_flags,
        n_obs: data.len(),
    })
}
