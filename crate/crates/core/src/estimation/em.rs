//! EM estimation over the latent component count.
//!
//! Treating (Yᵢ, Zᵢ) as the complete data, the expected complete-data
//! log-likelihood given the observations is
//!
//! ```text
//! Q(α, ν, θ) = ln θ Σ ẑᵢ − n ln A(θ) + Σ (ẑᵢ − 1) ln S(yᵢ) + Σ ln g(yᵢ)
//! ```
//!
//! with ẑᵢ = E[Z | Y = yᵢ] from the current parameters. The θ update is the
//! root of θA′(θ)/A(θ) = mean(ẑ) (the family mean equation); the (α, ν)
//! update maximizes the remaining two sums numerically. Each cycle must not
//! decrease the observed-data log-likelihood; a decrease beyond tolerance is
//! reported as an internal error rather than ignored.

use crate::compound::CompoundModel;
use crate::error::{validate_unit_observations, Error, Result};
use crate::estimation::{
    build_starts, finalize_fit, loglik, minimize, FitMethod, FitOptions, FitResult, OptimSettings,
    Transform,
};
use crate::power_series::PsFamily;
use crate::rgtl::RgtlParams;

/// E[Z | Y = y]: with x = θS(y), this is x·A″(x)/A′(x) + 1, the mean of the
/// conditional count given the observation. Always at least 1.
pub fn conditional_expected_z(model: &CompoundModel, y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::domain(format!("conditional expectation needs y in (0, 1), got {y}")));
    }
    let x = model.theta() * model.base().survival(y)?;
    Ok(x * model.family().curvature_ratio(x) + 1.0)
}

/// Solves θ·A′(θ)/A(θ) = target for θ by bracketed bisection. The family
/// mean is strictly increasing with limit 1 at θ → 0, so the root is unique
/// whenever the target is attainable.
fn solve_theta_for_mean(family: PsFamily, target: f64) -> Result<f64> {
    let (lo_edge, hi_edge) = family.theta_domain();
    let mut lo = lo_edge + 1e-12;
    let mut hi = if hi_edge.is_finite() {
        hi_edge - 1e-12
    } else {
        let mut h = 1.0;
        while family.mean(h)? < target {
            h *= 2.0;
            if h > 1e12 {
                return Err(Error::NonConvergence(format!(
                    "no theta reaches mean {target} for the {family} family"
                )));
            }
        }
        h
    };
    if family.mean(hi)? < target {
        // Target above the attainable range (can only happen for Binomial,
        // whose mean is capped below m); clamp to the upper edge.
        return Ok(hi);
    }
    if family.mean(lo)? >= target {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if family.mean(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Maximizes Σ(ẑᵢ−1)ln S(yᵢ) + Σ ln g(yᵢ) over (α, ν), warm-started from the
/// current shapes.
fn maximize_shape_step(
    data: &[f64],
    zhat: &[f64],
    alpha0: f64,
    nu0: f64,
) -> Result<(f64, f64)> {
    let transforms = [Transform::ScaledLogit { scale: 2.0 }, Transform::Log];
    let objective = |z: &[f64]| -> (f64, Vec<f64>) {
        let alpha = transforms[0].to_constrained(z[0]);
        let nu = transforms[1].to_constrained(z[1]);
        if RgtlParams::new(alpha, nu).is_err() {
            return (f64::INFINITY, vec![0.0; 2]);
        }
        let mut value = 0.0;
        let mut d_alpha = 0.0;
        let mut d_nu = 0.0;
        for (&y, &zh) in data.iter().zip(zhat) {
            let p = 1.0 + (alpha - 1.0) * y;
            let q = (2.0 - alpha) + 2.0 * (alpha - 1.0) * y;
            let l = ((1.0 - y) * p).ln();
            value += (zh - 1.0) * nu * l + nu.ln() + (nu - 1.0) * l + q.ln();
            // ∂lnS/∂α = νy/P, ∂lnS/∂ν = L
            d_alpha += (zh - 1.0) * nu * y / p + (nu - 1.0) * y / p + (2.0 * y - 1.0) / q;
            d_nu += (zh - 1.0) * l + 1.0 / nu + l;
        }
        if !value.is_finite() {
            return (f64::INFINITY, vec![0.0; 2]);
        }
        let g = vec![
            -d_alpha * transforms[0].jacobian(alpha),
            -d_nu * transforms[1].jacobian(nu),
        ];
        (-value, g)
    };
    let z0 = vec![transforms[0].to_unconstrained(alpha0), transforms[1].to_unconstrained(nu0)];
    let settings = OptimSettings { max_iter: 200, grad_scale: 1e-10, step_tol: 1e-12 };
    let out = minimize(&objective, &z0, &settings);
    if !out.value.is_finite() {
        return Err(Error::NonConvergence("EM shape update left the parameter domain".into()));
    }
    Ok((transforms[0].to_constrained(out.x[0]), transforms[1].to_constrained(out.x[1])))
}

/// EM fit: expectation of the latent counts, then the two-block
/// maximization, iterated until the parameter change falls below `opts.tol`
/// or `opts.max_iter` cycles elapse. Runs from the moment-matched start plus
/// up to `opts.starts − 1` grid starts and keeps the best final
/// log-likelihood.
pub fn fit_em(family: PsFamily, data: &[f64], opts: &FitOptions) -> Result<FitResult> {
    family.validate()?;
    validate_unit_observations(data)?;
    if data.len() < 5 {
        return Err(Error::TooFewObservations { needed: 5, got: data.len() });
    }

    let mut starts = build_starts(family, data, opts.starts.saturating_sub(1));
    starts.reverse(); // moment-matched start first
    let mut best: Option<(f64, CompoundModel, bool, usize)> = None;
    let mut last_err = None;
    for start in starts {
        match em_from_start(family, data, start, opts) {
            Ok((model, ll, converged, cycles)) => {
                let better = match &best {
                    None => true,
                    Some((best_ll, ..)) => ll > *best_ll,
                };
                if better {
                    best = Some((ll, model, converged, cycles));
                }
            }
            Err(e @ Error::EmLoglikDecreased { .. }) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    let (_, model, converged, cycles) = best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::NonConvergence("every EM start failed".into()))
    })?;

    let grad = crate::estimation::score(&model, data)?;
    let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    finalize_fit(model, data, FitMethod::Em, converged, cycles, grad_norm)
}

fn em_from_start(
    family: PsFamily,
    data: &[f64],
    start: [f64; 3],
    opts: &FitOptions,
) -> Result<(CompoundModel, f64, bool, usize)> {
    let n = data.len() as f64;
    let mut model = CompoundModel::new(RgtlParams::new(start[0], start[1])?, family, start[2])?;
    let mut ll = loglik(&model, data)?;
    if !ll.is_finite() {
        return Err(Error::NonConvergence("infeasible EM start".into()));
    }
    let mut converged = false;
    let mut cycles = 0;

    while cycles < opts.max_iter {
        cycles += 1;
        let zhat: Vec<f64> =
            data.iter().map(|&y| conditional_expected_z(&model, y)).collect::<Result<_>>()?;
        let zbar = zhat.iter().sum::<f64>() / n;

        let theta_new = solve_theta_for_mean(family, zbar)?;
        let (alpha_new, nu_new) = maximize_shape_step(
            data,
            &zhat,
            model.base().alpha(),
            model.base().nu(),
        )?;
        let next = CompoundModel::new(RgtlParams::new(alpha_new, nu_new)?, family, theta_new)?;
        let ll_next = loglik(&next, data)?;
        if ll_next < ll - 1e-8 {
            if std::env::var_os("RGTLPS_EM_TRACE").is_some() {
                let q = |m: &CompoundModel| -> (f64, f64) {
                    let n = data.len() as f64;
                    let q1 = zbar * n * m.theta().ln()
                        - n * family.ln_a(m.theta()).unwrap();
                    let q2: f64 = data
                        .iter()
                        .zip(&zhat)
                        .map(|(&y, &zh)| {
                            let lnp = m.base().ln_pdf(y).unwrap();
                            let lns = m.base().nu()
                                * ((1.0 - y) * (1.0 + (m.base().alpha() - 1.0) * y)).ln();
                            (zh - 1.0) * lns + lnp
                        })
                        .sum();
                    (q1, q2)
                };
                let (q1_old, q2_old) = q(&model);
                let (q1_new, q2_new) = q(&next);
                eprintln!(
                    "cycle {cycles}: ll {ll:.12e} -> {ll_next:.12e} (drop {:.3e})",
                    ll - ll_next
                );
                eprintln!(
                    "  zbar-1 {:.17e}, mean(theta_t)-1 {:.17e}, mean(theta')-1 {:.17e}",
                    zbar - 1.0,
                    family.mean(model.theta()).unwrap() - 1.0,
                    family.mean(theta_new).unwrap() - 1.0
                );
                let n = data.len() as f64;
                let q1_slope = |t: f64| {
                    n * zbar / t - n * family.a_prime(t).unwrap() / family.a(t).unwrap()
                };
                eprintln!(
                    "  Q1'(theta_t) {:.6e}, Q1'(theta') {:.6e}",
                    q1_slope(model.theta()),
                    q1_slope(theta_new)
                );
                eprintln!("  theta {:.17} -> {theta_new:.17}", model.theta());
                eprintln!(
                    "  alpha {:.17} -> {alpha_new:.17}, nu {:.17} -> {nu_new:.17}",
                    model.base().alpha(),
                    model.base().nu()
                );
                eprintln!("  Q1 {q1_old:.12e} -> {q1_new:.12e} (d {:.3e})", q1_new - q1_old);
                eprintln!("  Q2 {q2_old:.12e} -> {q2_new:.12e} (d {:.3e})", q2_new - q2_old);
            }
            return Err(Error::EmLoglikDecreased { cycle: cycles, drop: ll - ll_next });
        }

        let step = (alpha_new - model.base().alpha())
            .abs()
            .max((nu_new - model.base().nu()).abs())
            .max((theta_new - model.theta()).abs());
        model = next;
        ll = ll_next;
        if step < opts.tol {
            converged = true;
            break;
        }
    }
    Ok((model, ll, converged, cycles))
}
