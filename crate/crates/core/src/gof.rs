//! Goodness-of-fit statistics and model comparison: Kolmogorov-Smirnov test
//! with asymptotic p-values, AIC, candidate-model fitting and ranked
//! comparison reports.

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_rgtl, BaselineFit, Beta, Kumaraswamy, ToppLeone};
use crate::compound::CompoundModel;
use crate::error::{Error, Result};
use crate::estimation::{fit_ml, FitOptions, FitResult};
use crate::power_series::PsFamily;
use crate::rgtl::RgtlParams;

/// AIC = 2k − 2ℓ; lower is better.
pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

/// Two-sided one-sample KS statistic D_n for `sorted` data against `cdf`:
/// max over i of max(i/n − F(y₍ᵢ₎), F(y₍ᵢ₎) − (i−1)/n).
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &y) in sorted.iter().enumerate() {
        let f = cdf(y);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// Survival function of the Kolmogorov distribution,
/// Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}.
///
/// Below λ = 0.3 the alternating series needs many near-unit terms, so the
/// Jacobi-transformed representation of the same function is used there;
/// both truncate once a term drops under 1e-12.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        let mut cdf = 0.0;
        let factor = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let mut j = 1.0_f64;
        loop {
            let term = (-(j * j) * std::f64::consts::PI * std::f64::consts::PI
                / (8.0 * lambda * lambda))
                .exp();
            cdf += factor * term;
            if factor * term < 1e-12 || j > 199.0 {
                break;
            }
            j += 2.0;
        }
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=1_000 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `data` against a fitted cdf. Sorts internally;
/// the p-value uses the asymptotic Kolmogorov distribution at
/// λ = (√n + 0.12 + 0.11/√n)·D.
pub fn ks_test<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> Result<(f64, f64)> {
    if data.len() < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: data.len() });
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-comparable observation"));
    let d = ks_statistic(&sorted, cdf);
    let sqrt_n = (sorted.len() as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok((d, kolmogorov_survival(lambda)))
}

/// Two-sample KS test; p-value from the asymptotic distribution with the
/// effective sample size nm/(n+m).
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: a.len().min(b.len()) });
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("non-comparable observation"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("non-comparable observation"));

    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    Ok((d, kolmogorov_survival(lambda)))
}

/// A model that can enter a comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateModel {
    /// Compound model with the given Power Series family.
    RgtlPs(PsFamily),
    /// Plain two-parameter base distribution.
    Rgtl,
    ToppLeone,
    Beta,
    Kumaraswamy,
}

impl std::fmt::Display for CandidateModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CandidateModel::RgtlPs(PsFamily::Logarithmic) => write!(f, "rgtl-log"),
            CandidateModel::RgtlPs(PsFamily::Geometric) => write!(f, "rgtl-geo"),
            CandidateModel::RgtlPs(PsFamily::Poisson) => write!(f, "rgtl-poi"),
            CandidateModel::RgtlPs(PsFamily::Binomial { m }) => write!(f, "rgtl-bin[m={m}]"),
            CandidateModel::Rgtl => write!(f, "rgtl"),
            CandidateModel::ToppLeone => write!(f, "tl"),
            CandidateModel::Beta => write!(f, "beta"),
            CandidateModel::Kumaraswamy => write!(f, "kumaraswamy"),
        }
    }
}

/// One parameter estimate in a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Comparison-ready per-model summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GofReport {
    pub model_name: String,
    pub k: usize,
    pub loglik: f64,
    pub aic: f64,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    /// Parametric-bootstrap p-value, present only when requested.
    pub ks_bootstrap_pvalue: Option<f64>,
    pub converged: bool,
    pub params: Vec<ParamEstimate>,
}

/// A fitted candidate: enough to evaluate the cdf and to resample from the
/// fitted law (parametric bootstrap).
#[derive(Debug, Clone)]
pub enum FittedCandidate {
    RgtlPs(CompoundModel, FitResult),
    Rgtl(RgtlParams, BaselineFit),
    ToppLeone(ToppLeone, BaselineFit),
    Beta(Beta, BaselineFit),
    Kumaraswamy(Kumaraswamy, BaselineFit),
}

impl FittedCandidate {
    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            FittedCandidate::RgtlPs(m, _) => m.cdf(y).unwrap_or(f64::NAN),
            FittedCandidate::Rgtl(m, _) => m.cdf(y).unwrap_or(f64::NAN),
            FittedCandidate::ToppLeone(m, _) => m.cdf(y),
            FittedCandidate::Beta(m, _) => m.cdf(y),
            FittedCandidate::Kumaraswamy(m, _) => m.cdf(y),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            FittedCandidate::RgtlPs(m, _) => m.sample_inverse(n, rng),
            FittedCandidate::Rgtl(m, _) => (0..n)
                .map(|_| m.quantile(crate::open_unit(rng)))
                .collect(),
            FittedCandidate::ToppLeone(m, _) => Ok(m.sample(n, rng)),
            FittedCandidate::Beta(m, _) => m.sample(n, rng),
            FittedCandidate::Kumaraswamy(m, _) => Ok(m.sample(n, rng)),
        }
    }

    pub fn loglik(&self) -> f64 {
        match self {
            FittedCandidate::RgtlPs(_, fit) => fit.loglik,
            FittedCandidate::Rgtl(_, fit)
            | FittedCandidate::ToppLeone(_, fit)
            | FittedCandidate::Beta(_, fit)
            | FittedCandidate::Kumaraswamy(_, fit) => fit.loglik,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            FittedCandidate::RgtlPs(..) => 3,
            FittedCandidate::Rgtl(..) | FittedCandidate::Beta(..) | FittedCandidate::Kumaraswamy(..) => 2,
            FittedCandidate::ToppLeone(..) => 1,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            FittedCandidate::RgtlPs(_, fit) => fit.converged,
            FittedCandidate::Rgtl(_, fit)
            | FittedCandidate::ToppLeone(_, fit)
            | FittedCandidate::Beta(_, fit)
            | FittedCandidate::Kumaraswamy(_, fit) => fit.converged,
        }
    }

    fn params(&self) -> Vec<ParamEstimate> {
        match self {
            FittedCandidate::RgtlPs(_, fit) => {
                let se = fit.std_errors.as_ref();
                vec![
                    ParamEstimate {
                        name: "alpha".into(),
                        value: fit.estimates.alpha,
                        std_error: se.map(|s| s.alpha),
                    },
                    ParamEstimate {
                        name: "nu".into(),
                        value: fit.estimates.nu,
                        std_error: se.map(|s| s.nu),
                    },
                    ParamEstimate {
                        name: "theta".into(),
                        value: fit.estimates.theta,
                        std_error: se.map(|s| s.theta),
                    },
                ]
            }
            FittedCandidate::Rgtl(_, fit)
            | FittedCandidate::ToppLeone(_, fit)
            | FittedCandidate::Beta(_, fit)
            | FittedCandidate::Kumaraswamy(_, fit) => fit
                .params
                .iter()
                .map(|(name, value, se)| ParamEstimate {
                    name: (*name).into(),
                    value: *value,
                    std_error: *se,
                })
                .collect(),
        }
    }
}

/// Fits one candidate to the data.
pub fn fit_candidate(
    candidate: CandidateModel,
    data: &[f64],
    opts: &FitOptions,
) -> Result<FittedCandidate> {
    Ok(match candidate {
        CandidateModel::RgtlPs(family) => {
            let fit = fit_ml(family, data, opts)?;
            let model = fit.model()?;
            FittedCandidate::RgtlPs(model, fit)
        }
        CandidateModel::Rgtl => {
            let (params, fit) = fit_rgtl(data)?;
            FittedCandidate::Rgtl(params, fit)
        }
        CandidateModel::ToppLeone => {
            let (dist, fit) = ToppLeone::fit(data)?;
            FittedCandidate::ToppLeone(dist, fit)
        }
        CandidateModel::Beta => {
            let (dist, fit) = Beta::fit(data)?;
            FittedCandidate::Beta(dist, fit)
        }
        CandidateModel::Kumaraswamy => {
            let (dist, fit) = Kumaraswamy::fit(data)?;
            FittedCandidate::Kumaraswamy(dist, fit)
        }
    })
}

/// Builds the [`GofReport`] for a fitted candidate against the data.
pub fn report_for(candidate: CandidateModel, fitted: &FittedCandidate, data: &[f64]) -> Result<GofReport> {
    let (d, p) = ks_test(data, |y| fitted.cdf(y))?;
    Ok(GofReport {
        model_name: candidate.to_string(),
        k: fitted.k(),
        loglik: fitted.loglik(),
        aic: aic(fitted.loglik(), fitted.k()),
        ks_statistic: d,
        ks_pvalue: p,
        ks_bootstrap_pvalue: None,
        converged: fitted.converged(),
        params: fitted.params(),
    })
}

/// Fits every candidate and returns (candidate, fitted, report) triples
/// ranked by ascending AIC, ties broken by the KS statistic. A candidate
/// whose fitter fails outright is reported inline with NaN statistics rather
/// than aborting the comparison.
pub fn compare_models_detailed(
    data: &[f64],
    candidates: &[CandidateModel],
    opts: &FitOptions,
) -> Result<Vec<(CandidateModel, Option<FittedCandidate>, GofReport)>> {
    if candidates.is_empty() {
        return Err(Error::domain("model comparison needs at least one candidate"));
    }
    let mut rows = Vec::with_capacity(candidates.len());
    for &candidate in candidates {
        match fit_candidate(candidate, data, opts)
            .and_then(|f| report_for(candidate, &f, data).map(|r| (f, r)))
        {
            Ok((fitted, report)) => rows.push((candidate, Some(fitted), report)),
            Err(err) => rows.push((
                candidate,
                None,
                GofReport {
                    model_name: format!("{candidate} [failed: {err}]"),
                    k: 0,
                    loglik: f64::NAN,
                    aic: f64::NAN,
                    ks_statistic: f64::NAN,
                    ks_pvalue: f64::NAN,
                    ks_bootstrap_pvalue: None,
                    converged: false,
                    params: Vec::new(),
                },
            )),
        }
    }
    rows.sort_by(|(_, _, a), (_, _, b)| match (a.aic.is_nan(), b.aic.is_nan()) {
        (true, true) => std::cmp::Ordering::Equal,
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        (false, false) => a
            .aic
            .partial_cmp(&b.aic)
            .unwrap()
            .then(a.ks_statistic.partial_cmp(&b.ks_statistic).unwrap()),
    });
    Ok(rows)
}

/// Fits every candidate and returns the ranked reports; see
/// [`compare_models_detailed`].
pub fn compare_models(
    data: &[f64],
    candidates: &[CandidateModel],
    opts: &FitOptions,
) -> Result<Vec<GofReport>> {
    Ok(compare_models_detailed(data, candidates, opts)?
        .into_iter()
        .map(|(_, _, report)| report)
        .collect())
}

/// Parametric-bootstrap KS p-value: refits the candidate on each synthetic
/// sample drawn from the fitted law, so the null accounts for estimated
/// parameters. Returns (1 + #{D_b ≥ D_obs}) / (B + 1).
pub fn ks_bootstrap_pvalue(
    candidate: CandidateModel,
    fitted: &FittedCandidate,
    data: &[f64],
    replicates: usize,
    opts: &FitOptions,
) -> Result<f64> {
    if replicates == 0 {
        return Err(Error::domain("bootstrap needs at least one replicate"));
    }
    let (d_obs, _) = ks_test(data, |y| fitted.cdf(y))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut exceed = 0usize;
    for _ in 0..replicates {
        let synthetic = fitted.sample(data.len(), &mut rng)?;
        let refit = fit_candidate(candidate, &synthetic, opts)?;
        let (d_b, _) = ks_test(&synthetic, |y| refit.cdf(y))?;
        if d_b >= d_obs {
            exceed += 1;
        }
    }
    Ok((1.0 + exceed as f64) / (replicates as f64 + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn aic_definition() {
        assert_eq!(aic(0.0, 3), 6.0);
        assert_eq!(aic(10.0, 2), -16.0);
        // one extra parameter with no likelihood gain costs exactly 2
        assert_relative_eq!(aic(5.0, 3) - aic(5.0, 2), 2.0);
    }

    #[test]
    fn ks_near_perfect_fit() {
        // Data placed at the fitted quantiles i/(n+1) of the uniform.
        let n = 200;
        let data: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let (d, p) = ks_test(&data, |y| y).unwrap();
        assert!(d < 0.01, "statistic {d}");
        assert!(p > 0.999, "p-value {p}");
    }

    #[test]
    fn kolmogorov_survival_limits() {
        assert_eq!(kolmogorov_survival(0.0), 1.0);
        assert!(kolmogorov_survival(1e-6) > 1.0 - 1e-12);
        assert!(kolmogorov_survival(8.0) < 1e-12);
        // continuity across the series switch at 0.3
        let below = kolmogorov_survival(0.299_999_9);
        let above = kolmogorov_survival(0.300_000_1);
        assert!((below - above).abs() < 1e-9, "{below} vs {above}");
        // table value Q(1) ≈ 0.26999967
        assert_relative_eq!(kolmogorov_survival(1.0), 0.269_999_67, epsilon = 1e-7);
    }

    #[test]
    fn ks_calibration_under_the_null() {
        // n = 100 uniform samples against the uniform cdf: the rejection
        // rate at 5% should be close to 5%.
        let mut rejections = 0;
        let reps = 1_000;
        for seed in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..100).map(|_| crate::open_unit(&mut rng)).collect();
            let (_, p) = ks_test(&data, |y| y).unwrap();
            if p < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!((rate - 0.05).abs() < 0.02, "rejection rate {rate}");
    }

    #[test]
    fn ks_statistic_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<f64> = (0..500).map(|_| crate::open_unit(&mut rng)).collect();
        let (d_raw, _) = ks_test(&data, |y| y).unwrap();
        // y ↦ y³ applied to both data and cdf
        let cubed: Vec<f64> = data.iter().map(|y| y.powi(3)).collect();
        let (d_cubed, _) = ks_test(&cubed, |y| y.powf(1.0 / 3.0)).unwrap();
        assert_relative_eq!(d_raw, d_cubed, epsilon = 1e-12);
    }

    #[test]
    fn two_sample_ks_same_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a: Vec<f64> = (0..5_000).map(|_| crate::open_unit(&mut rng)).collect();
        let b: Vec<f64> = (0..5_000).map(|_| crate::open_unit(&mut rng)).collect();
        let (_, p) = two_sample_ks(&a, &b).unwrap();
        assert!(p > 0.01, "p = {p}");

        let shifted: Vec<f64> = a.iter().map(|y| y.powf(1.5)).collect();
        let (_, p_diff) = two_sample_ks(&a, &shifted).unwrap();
        assert!(p_diff < 1e-6, "p = {p_diff}");
    }

    #[test]
    fn ks_rejects_tiny_samples() {
        assert!(ks_test(&[], |y: f64| y).is_err());
        assert!(ks_test(&[0.5], |y: f64| y).is_err());
    }

    #[test]
    fn single_model_comparison() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<f64> = (0..400).map(|_| crate::open_unit(&mut rng)).collect();
        let reports =
            compare_models(&data, &[CandidateModel::Beta], &FitOptions::default()).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].model_name, "beta");
        assert_eq!(reports[0].k, 2);
        assert!(compare_models(&data, &[], &FitOptions::default()).is_err());
    }

    #[test]
    fn comparison_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data: Vec<f64> = (0..300).map(|_| crate::open_unit(&mut rng)).collect();
        let candidates = [CandidateModel::Beta, CandidateModel::Kumaraswamy, CandidateModel::ToppLeone];
        let a = compare_models(&data, &candidates, &FitOptions::default()).unwrap();
        let b = compare_models(&data, &candidates, &FitOptions::default()).unwrap();
        let names_a: Vec<_> = a.iter().map(|r| r.model_name.clone()).collect();
        let names_b: Vec<_> = b.iter().map(|r| r.model_name.clone()).collect();
        assert_eq!(names_a, names_b);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.aic.to_bits(), y.aic.to_bits());
        }
    }
}
