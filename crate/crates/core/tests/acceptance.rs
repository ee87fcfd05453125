//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Tolerances are pinned in the assertions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rgtlps::estimation::{self, fit_em, fit_ml, FitOptions};
use rgtlps::gof;
use rgtlps::oracles::{self, MixtureKind, QuadratureSpec};
use rgtlps::{open_unit, CompoundModel, PsFamily, RgtlParams};

const ALPHAS: [f64; 5] = [0.25, 0.7, 1.0, 1.4, 1.95];
const NUS: [f64; 5] = [0.25, 0.6, 1.0, 2.5, 9.5];

fn all_families() -> [PsFamily; 4] {
    [
        PsFamily::Logarithmic,
        PsFamily::Geometric,
        PsFamily::Poisson,
        PsFamily::Binomial { m: 3 },
    ]
}

fn thetas_for(family: PsFamily) -> [f64; 2] {
    if family.theta_domain().1.is_finite() {
        [0.35, 0.9]
    } else {
        [0.7, 3.5]
    }
}

fn model(family: PsFamily, alpha: f64, nu: f64, theta: f64) -> CompoundModel {
    CompoundModel::new(RgtlParams::new(alpha, nu).unwrap(), family, theta).unwrap()
}

/// ∫₀¹ y^r f(y) dy with the analytic survival tail when the density is
/// singular at 1.
fn moment_quadrature(m: &CompoundModel, r: u32) -> f64 {
    let spec = QuadratureSpec::default();
    if m.base().nu() >= 1.0 {
        oracles::integrate(|y| y.powi(r as i32) * m.pdf(y).unwrap(), 0.0, 1.0, &spec)
            .unwrap()
            .value
    } else {
        oracles::integrate_moment_with_tail(
            |y| m.pdf(y).unwrap_or(f64::INFINITY),
            |y| m.survival(y).unwrap_or(0.0),
            r,
            &spec,
        )
        .unwrap()
    }
}

#[test]
fn criterion_01_density_normalization() {
    let start = std::time::Instant::now();
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    for family in all_families() {
        for &theta in &thetas_for(family) {
            // 25 shape pairs per (family, θ): 200 grid points total
            for &alpha in &ALPHAS {
                for &nu in &NUS {
                    let m = model(family, alpha, nu, theta);
                    let mass = moment_quadrature(&m, 0);
                    worst = worst.max((mass - 1.0).abs());
                    assert!(
                        (mass - 1.0).abs() < 1e-9,
                        "{family} ({alpha},{nu},{theta}): mass = {mass}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 200);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "normalization took {elapsed:?}");
    println!(
        "acceptance 01 density normalization: PASS ({checked} grid points, worst |mass-1| = {worst:.2e}, {elapsed:?})"
    );
}

#[test]
fn criterion_02_mixture_oracle_equivalence() {
    let start = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    for family in all_families() {
        let theta = thetas_for(family)[0];
        for &(alpha, nu) in &[(1.4, 0.9), (0.7, 2.2)] {
            let m = model(family, alpha, nu, theta);
            for i in 1..=50 {
                let y = i as f64 / 51.0;
                let pdf_closed = m.pdf(y).unwrap();
                let pdf_mix = oracles::brute_force_mixture(&m, y, MixtureKind::Pdf).unwrap();
                let cdf_closed = m.cdf(y).unwrap();
                let cdf_mix = oracles::brute_force_mixture(&m, y, MixtureKind::Cdf).unwrap();
                worst = worst.max((pdf_closed - pdf_mix).abs()).max((cdf_closed - cdf_mix).abs());
                assert!(
                    (pdf_closed - pdf_mix).abs() < 1e-10,
                    "{family} ({alpha},{nu},{theta}) pdf at {y}: {pdf_closed} vs {pdf_mix}"
                );
                assert!(
                    (cdf_closed - cdf_mix).abs() < 1e-10,
                    "{family} ({alpha},{nu},{theta}) cdf at {y}: {cdf_closed} vs {cdf_mix}"
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "mixture equivalence took {elapsed:?}");
    println!("acceptance 02 mixture-oracle equivalence: PASS (worst gap {worst:.2e}, {elapsed:?})");
}

#[test]
fn criterion_03_quantile_round_trip() {
    let qs =
        [1e-6, 1e-4, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.9999, 1.0 - 1e-6];
    let alphas = [1.0 - 1e-9, 1.0, 1.0 + 1e-9, 0.3, 1.7, 2.0];
    let nus = [0.9, 2.5, 8.0];
    let mut worst_rt: f64 = 0.0;
    let mut worst_bis: f64 = 0.0;
    for family in all_families() {
        let theta = thetas_for(family)[0];
        for &alpha in &alphas {
            for &nu in &nus {
                let m = model(family, alpha, nu, theta);
                for &q in &qs {
                    let y = m.quantile(q).unwrap();
                    let back = m.cdf(y).unwrap();
                    worst_rt = worst_rt.max((back - q).abs());
                    assert!(
                        (back - q).abs() < 1e-9,
                        "{family} ({alpha},{nu},{theta}) q={q}: F(Q(q)) = {back}"
                    );
                    let bis = oracles::invert_cdf_bisection(|t| m.cdf(t).unwrap(), q).unwrap();
                    worst_bis = worst_bis.max((y - bis).abs());
                    assert!(
                        (y - bis).abs() < 1e-9,
                        "{family} ({alpha},{nu},{theta}) q={q}: Q = {y} vs bisection {bis}"
                    );
                }
            }
        }
    }
    println!(
        "acceptance 03 quantile round trip: PASS (worst |F(Q(q))-q| = {worst_rt:.2e}, worst vs bisection = {worst_bis:.2e})"
    );
}

#[test]
fn criterion_04_hazard_boundary_limits() {
    let mut worst: f64 = 0.0;
    for family in all_families() {
        for &theta in &thetas_for(family) {
            for &alpha in &ALPHAS {
                for &nu in &NUS {
                    let m = model(family, alpha, nu, theta);
                    let h0 = m.hazard(0.0).unwrap();
                    let expect =
                        nu * theta * (2.0 - alpha) * family.a_prime(theta).unwrap()
                            / family.a(theta).unwrap();
                    worst = worst.max((h0 - expect).abs() / expect.abs().max(1.0));
                    assert!(
                        (h0 - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                        "{family} ({alpha},{nu},{theta}): h(0) = {h0} vs {expect}"
                    );
                    let near_one = m.hazard(1.0 - 1e-6).unwrap();
                    assert!(
                        near_one > 1e3,
                        "{family} ({alpha},{nu},{theta}): h(1-1e-6) = {near_one}"
                    );
                }
            }
        }
    }

    // base hazard strictly increasing on random draws
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let alpha = 0.05 + 1.95 * open_unit(&mut rng);
        let nu = (open_unit(&mut rng) * 3.0 - 1.0).exp();
        let p = RgtlParams::new(alpha, nu).unwrap();
        let mut prev = p.hazard(0.0).unwrap();
        for i in 1..1000 {
            let y = 0.9995 * i as f64 / 999.0;
            let h = p.hazard(y).unwrap();
            assert!(h > prev, "base hazard not increasing at ({alpha}, {nu})");
            prev = h;
        }
    }
    println!("acceptance 04 hazard boundary limits: PASS (worst h(0) relative gap {worst:.2e})");
}

#[test]
fn criterion_05_moments_dual_path() {
    let mut worst: f64 = 0.0;
    for family in all_families() {
        let theta = thetas_for(family)[0];
        for &(alpha, nu) in &[(1.4, 0.9), (0.7, 2.2)] {
            let m = model(family, alpha, nu, theta);
            for r in [1u32, 2, 3] {
                let series = m.moment(r).unwrap();
                let quad = moment_quadrature(&m, r);
                worst = worst.max((series - quad).abs());
                assert!(
                    (series - quad).abs() < 1e-8,
                    "{family} ({alpha},{nu},{theta}) r={r}: mixture {series} vs quadrature {quad}"
                );
            }
        }
    }

    // closed-form mean of the geometric compound with a uniform base:
    // E[Y] = ((1-θ)/θ²)(−log(1−θ) − θ)
    for &theta in &[0.2, 0.5, 0.8] {
        let m = model(PsFamily::Geometric, 1.0, 1.0, theta);
        let expect = ((1.0 - theta) / (theta * theta)) * (-(1.0f64 - theta).ln() - theta);
        let got = m.moment(1).unwrap();
        assert!(
            (got - expect).abs() < 1e-10,
            "geometric mean at theta={theta}: {got} vs closed form {expect}"
        );
    }
    println!("acceptance 05 moments dual path: PASS (worst series-vs-quadrature gap {worst:.2e})");
}

#[test]
fn criterion_06_score_and_information_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut worst_score: f64 = 0.0;
    let mut worst_info: f64 = 0.0;
    for family in all_families() {
        for _ in 0..50 {
            let alpha = 0.3 + 1.6 * open_unit(&mut rng);
            let nu = 0.4 + 2.6 * open_unit(&mut rng);
            let theta = if family.theta_domain().1.is_finite() {
                0.15 + 0.7 * open_unit(&mut rng)
            } else {
                0.3 + 2.7 * open_unit(&mut rng)
            };
            let m = model(family, alpha, nu, theta);
            let data = m.sample_inverse(40, &mut rng).unwrap();

            let analytic = estimation::score(&m, &data).unwrap();
            let fd = oracles::finite_diff_gradient(
                |x| {
                    estimation::loglik(&model(family, x[0], x[1], x[2]), &data).unwrap()
                },
                &[alpha, nu, theta],
                1e-5,
            );
            for (a, f) in analytic.iter().zip(&fd) {
                let rel = (a - f).abs() / a.abs().max(1.0);
                worst_score = worst_score.max(rel);
                assert!(rel < 1e-6, "{family} ({alpha},{nu},{theta}): score {a} vs fd {f}");
            }

            let info = estimation::observed_information(&m, &data).unwrap();
            let neg_hess = oracles::finite_diff_hessian(
                |x| -estimation::loglik(&model(family, x[0], x[1], x[2]), &data).unwrap(),
                &[alpha, nu, theta],
            );
            for i in 0..3 {
                for j in 0..3 {
                    let rel = (info[i][j] - neg_hess[i][j]).abs() / neg_hess[i][j].abs().max(1.0);
                    worst_info = worst_info.max(rel);
                    assert!(
                        rel < 1e-4,
                        "{family} ({alpha},{nu},{theta}): J[{i}][{j}] = {} vs fd {}",
                        info[i][j],
                        neg_hess[i][j]
                    );
                }
            }
        }
    }
    println!(
        "acceptance 06 score/information vs finite differences: PASS (worst score rel {worst_score:.2e}, worst J rel {worst_info:.2e})"
    );
}

#[test]
fn criterion_07_em_validity() {
    // Observed-data log-likelihood monotonicity is enforced inside the EM
    // loop (any decrease beyond 1e-8 aborts the fit with an error), so every
    // successful fit below certifies it.
    let truths = [
        (PsFamily::Geometric, 1.3, 1.0, 0.7),
        (PsFamily::Logarithmic, 1.2, 1.5, 0.8),
        (PsFamily::Poisson, 1.2, 1.1, 1.4),
        (PsFamily::Binomial { m: 2 }, 1.2, 1.5, 2.0),
    ];
    let em_opts = FitOptions { starts: 5, max_iter: 30_000, tol: 1e-9, seed: 0 };
    let mut worst_gap: f64 = 0.0;
    let mut datasets = 0;
    for (family, alpha, nu, theta) in truths {
        let truth = model(family, alpha, nu, theta);
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let data = truth.sample_inverse(2000, &mut rng).unwrap();
            let ml = fit_ml(family, &data, &FitOptions::default()).unwrap();
            let em = fit_em(family, &data, &em_opts).unwrap();
            let gap = (ml.estimates.alpha - em.estimates.alpha)
                .abs()
                .max((ml.estimates.nu - em.estimates.nu).abs())
                .max((ml.estimates.theta - em.estimates.theta).abs());
            worst_gap = worst_gap.max(gap);
            assert!(
                gap < 1e-3,
                "{family} seed {seed}: EM {:?} vs ML {:?} (gap {gap:.2e})",
                em.estimates,
                ml.estimates
            );
            datasets += 1;
        }
    }
    assert_eq!(datasets, 20);
    println!("acceptance 07 EM validity: PASS (20 datasets, worst EM-vs-ML gap {worst_gap:.2e})");
}

#[test]
fn criterion_08_statistical_recovery() {
    // 200 replicates of n = 2000 from the geometric compound at
    // (α, ν, θ) = (1.4, 0.9, 0.9): per-parameter 95% Wald coverage must lie
    // in [88%, 99%] and the median KS p-value of the fitted true model must
    // exceed 0.2.
    let start = std::time::Instant::now();
    let (alpha, nu, theta) = (1.4, 0.9, 0.9);
    let truth = model(PsFamily::Geometric, alpha, nu, theta);
    let reps = 200;
    let mut cover = [0usize; 3];
    let mut with_se = 0usize;
    let mut ks_pvalues = Vec::with_capacity(reps);
    for seed in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let data = truth.sample_inverse(2000, &mut rng).unwrap();
        let fit = fit_ml(PsFamily::Geometric, &data, &FitOptions::default()).unwrap();
        if let Some(se) = &fit.std_errors {
            with_se += 1;
            if ((fit.estimates.alpha - alpha) / se.alpha).abs() <= 1.96 {
                cover[0] += 1;
            }
            if ((fit.estimates.nu - nu) / se.nu).abs() <= 1.96 {
                cover[1] += 1;
            }
            if ((fit.estimates.theta - theta) / se.theta).abs() <= 1.96 {
                cover[2] += 1;
            }
        }
        let fitted = fit.model().unwrap();
        let (_, p) = gof::ks_test(&data, |y| fitted.cdf(y).unwrap()).unwrap();
        ks_pvalues.push(p);
    }
    ks_pvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_p = 0.5 * (ks_pvalues[reps / 2 - 1] + ks_pvalues[reps / 2]);
    let rates: Vec<f64> = cover.iter().map(|&c| 100.0 * c as f64 / with_se as f64).collect();
    let elapsed = start.elapsed();
    println!(
        "acceptance 08 statistical recovery: coverage alpha {:.1}% nu {:.1}% theta {:.1}% ({with_se}/{reps} fits with SEs), median KS p = {median_p:.3}, {elapsed:?}",
        rates[0], rates[1], rates[2]
    );
    assert!(elapsed.as_secs() < 900, "recovery run took {elapsed:?}");
    assert!(median_p > 0.2, "median KS p-value {median_p}");
    for (i, name) in ["alpha", "nu", "theta"].iter().enumerate() {
        assert!(
            (88.0..=99.0).contains(&rates[i]),
            "95% Wald coverage for {name} is {:.1}%, outside [88%, 99%]",
            rates[i]
        );
    }
    println!("acceptance 08 statistical recovery: PASS");
}

#[test]
fn criterion_09_sampler_agreement() {
    let n = 100_000;
    for family in all_families() {
        let theta = if family.theta_domain().1.is_finite() { 0.6 } else { 1.5 };
        let m = model(family, 1.3, 1.1, theta);
        let mut rng_a = ChaCha8Rng::seed_from_u64(7);
        let mut rng_b = ChaCha8Rng::seed_from_u64(8);
        let a = m.sample_inverse(n, &mut rng_a).unwrap();
        let b = m.sample_min(n, &mut rng_b).unwrap();
        let (d, p) = gof::two_sample_ks(&a, &b).unwrap();
        assert!(p > 0.01, "{family}: two-sample KS d = {d:.5}, p = {p:.4}");

        // both samplers against the analytic cdf as well
        let (_, p_a) = gof::ks_test(&a, |y| m.cdf(y).unwrap()).unwrap();
        let (_, p_b) = gof::ks_test(&b, |y| m.cdf(y).unwrap()).unwrap();
        assert!(p_a > 0.01, "{family}: inverse sampler vs cdf p = {p_a:.4}");
        assert!(p_b > 0.01, "{family}: min-construction sampler vs cdf p = {p_b:.4}");
    }
    println!("acceptance 09 sampler agreement: PASS (two-sample KS at 1% level, n = {n} per sampler)");
}
