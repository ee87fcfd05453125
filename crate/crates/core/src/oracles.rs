//! Independent verification machinery: adaptive quadrature, finite-difference
//! derivatives, bisection cdf inversion and brute-force mixture evaluation.
//!
//! Everything here avoids the closed-form code paths it is used to check, so
//! the test suite can compare two genuinely different routes to the same
//! number. The quadrature is also the production fallback for moments where
//! the series expansion does not apply.

use crate::compound::CompoundModel;
use crate::error::{Error, Result};
use crate::rgtl::RgtlParams;

/// Quadrature rule backing [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadRule {
    /// Nested 7-point Gauss / 15-point Kronrod pair.
    #[default]
    GaussKronrod,
    /// Adaptive Simpson (five-point refinement estimate).
    Simpson,
}

/// Tolerances and limits for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: usize,
    pub rule: QuadRule,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_depth: 60,
            rule: QuadRule::GaussKronrod,
        }
    }
}

/// Integral value together with the accumulated error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
}

// 7-point Gauss nodes are the odd-indexed Kronrod nodes; weights below are
// the standard (G7, K15) pair on [-1, 1]. All nodes are interior, so
// integrable endpoint singularities are never evaluated directly.
const KRONROD_NODES: [f64; 15] = [
    -0.991_455_371_120_812_6,
    -0.949_107_912_342_758_5,
    -0.864_864_423_359_769_1,
    -0.741_531_185_599_394_4,
    -0.586_087_235_467_691_1,
    -0.405_845_151_377_397_2,
    -0.207_784_955_007_898_5,
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_4,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_812_6,
];

const KRONROD_WEIGHTS: [f64; 15] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
    0.204_432_940_075_298_9,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_92,
    0.104_790_010_322_250_18,
    0.063_092_092_629_978_55,
    0.022_935_322_010_529_224,
];

const GAUSS_WEIGHTS: [f64; 7] = [
    0.129_484_966_168_869_93,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_94,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_93,
];

fn gk15_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in KRONROD_NODES.iter().zip(&KRONROD_WEIGHTS).enumerate() {
        let v = f(mid + half * x);
        kronrod += wk * v;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * v;
        }
    }
    (half * kronrod, half * (kronrod - gauss).abs())
}

fn simpson_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let coarse = h / 6.0 * (fa + 4.0 * fm + fb);
    let fine = h / 12.0 * (fa + 4.0 * f(0.5 * (a + m)) + 2.0 * fm + 4.0 * f(0.5 * (m + b)) + fb);
    (fine, (fine - coarse).abs() / 15.0)
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// Keeps a worst-panel-first queue and bisects the panel with the largest
/// error estimate until the accumulated estimate meets the tolerance, which
/// concentrates refinement toward steep regions and integrable endpoint
/// singularities. Fails explicitly when `max_depth` bisection levels or the
/// panel budget cannot meet the tolerance; never returns a silent
/// low-quality value.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Quadrature> {
    if !(a < b) {
        return Err(Error::domain(format!("integration bounds [{a}, {b}] are not increasing")));
    }
    const MAX_PANELS: usize = 100_000;

    struct Panel {
        err: f64,
        a: f64,
        b: f64,
        value: f64,
        depth: usize,
    }

    impl PartialEq for Panel {
        fn eq(&self, other: &Self) -> bool {
            self.err == other.err && self.a == other.a
        }
    }
    impl Eq for Panel {}
    impl PartialOrd for Panel {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Panel {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            // max-heap on error; ties broken by position for determinism
            self.err.total_cmp(&other.err).then(other.a.total_cmp(&self.a))
        }
    }

    let make_panel = |a: f64, b: f64, depth: usize| -> Result<Panel> {
        let (value, err) = match spec.rule {
            QuadRule::GaussKronrod => gk15_panel(&f, a, b),
            QuadRule::Simpson => simpson_panel(&f, a, b),
        };
        if !value.is_finite() {
            return Err(Error::Quadrature(format!("non-finite panel value over [{a}, {b}]")));
        }
        Ok(Panel { err, a, b, value, depth })
    };

    let first = make_panel(a, b, 0)?;
    let mut total_value = first.value;
    let mut total_err = first.err;
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(first);

    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total_value.abs());
        if total_err <= tol {
            return Ok(Quadrature { value: total_value, error_estimate: total_err });
        }
        let worst = heap.pop().expect("at least one panel");
        if worst.depth >= spec.max_depth {
            return Err(Error::Quadrature(format!(
                "max depth reached over [{}, {}] with panel error {:.3e}",
                worst.a, worst.b, worst.err
            )));
        }
        if heap.len() + 2 > MAX_PANELS {
            return Err(Error::Quadrature(format!(
                "panel budget exhausted with error estimate {total_err:.3e} > {tol:.3e}"
            )));
        }
        total_value -= worst.value;
        total_err -= worst.err;
        let mid = 0.5 * (worst.a + worst.b);
        for half in [make_panel(worst.a, mid, worst.depth + 1)?, make_panel(mid, worst.b, worst.depth + 1)?] {
            total_value += half.value;
            total_err += half.err;
            heap.push(half);
        }
    }
}

/// Integrates `y^r · f(y)` over `[0, 1]` for densities that may blow up at
/// y = 1 like `(1−y)^{ν−1}` with ν < 1.
///
/// The integrand is handled by quadrature on `[0, 1−ε]` plus the analytic
/// tail `ξ^r · S(1−ε)` with ξ = 1−ε/2, where `S` is the survival function;
/// the tail approximation error is bounded by `r·ε·S(1−ε)`.
pub fn integrate_moment_with_tail<F, S>(f: F, survival: S, r: u32, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    const EPS: f64 = 1e-8;
    let cut = 1.0 - EPS;
    let body = integrate(|y| y.powi(r as i32) * f(y), 0.0, cut, spec)?.value;
    let tail = (1.0 - 0.5 * EPS).powi(r as i32) * survival(cut);
    Ok(body + tail)
}

/// Central-difference gradient with per-coordinate step `h·max(1, |x_j|)`.
pub fn finite_diff_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let step = h * x[j].abs().max(1.0);
        probe[j] = x[j] + step;
        let up = f(&probe);
        probe[j] = x[j] - step;
        let down = f(&probe);
        probe[j] = x[j];
        grad[j] = (up - down) / (2.0 * step);
    }
    grad
}

/// Central-difference Hessian (step `1e-4·max(1, |x_j|)`), symmetrized.
pub fn finite_diff_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|&v| 1e-4 * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut hess = vec![vec![0.0; n]; n];
    let mut probe = x.to_vec();
    for i in 0..n {
        probe[i] = x[i] + h[i];
        let up = f(&probe);
        probe[i] = x[i] - h[i];
        let down = f(&probe);
        probe[i] = x[i];
        hess[i][i] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in (i + 1)..n {
            probe[i] = x[i] + h[i];
            probe[j] = x[j] + h[j];
            let pp = f(&probe);
            probe[j] = x[j] - h[j];
            let pm = f(&probe);
            probe[i] = x[i] - h[i];
            let mm = f(&probe);
            probe[j] = x[j] + h[j];
            let mp = f(&probe);
            probe[i] = x[i];
            probe[j] = x[j];
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Inverts a monotone cdf on `[0, 1]` by bisection to interval width 1e-14.
pub fn invert_cdf_bisection<F: Fn(f64) -> f64>(cdf: F, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level {q} outside [0, 1]")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(1.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut flo = cdf(lo);
    let mut fhi = cdf(hi);
    if flo > fhi {
        return Err(Error::NonMonotoneCdf(0.5));
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        let fmid = cdf(mid);
        if fmid < flo - 1e-12 || fmid > fhi + 1e-12 {
            return Err(Error::NonMonotoneCdf(mid));
        }
        if fmid < q {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Which mixture quantity [`brute_force_mixture`] evaluates.
#[derive(Debug, Clone, Copy)]
pub enum MixtureKind {
    Pdf,
    Cdf,
    Moment(u32),
}

/// Direct mixture summation Σ_z w_z · (pdf | cdf | moment) of the base
/// distribution with shape `ν z`, using only base-distribution primitives and
/// the family pmf — no generating-function closed forms.
///
/// Moments go through the quadrature route of the base moment so the sum is
/// independent of the series expansion as well.
pub fn brute_force_mixture(model: &CompoundModel, y: f64, kind: MixtureKind) -> Result<f64> {
    const CAP: usize = 1_000_000;
    const WEIGHT_TAIL: f64 = 1e-14;
    let family = model.family();
    let theta = model.theta();
    let alpha = model.base().alpha();
    let nu = model.base().nu();
    let mut total = 0.0;
    let mut weight_seen = 0.0;
    let mut z: u64 = 1;
    loop {
        let w = family.pmf(theta, z)?;
        if w > 0.0 {
            let scaled = RgtlParams::new(alpha, nu * z as f64)?;
            let term = match kind {
                MixtureKind::Pdf => scaled.pdf(y)?,
                MixtureKind::Cdf => scaled.cdf(y)?,
                MixtureKind::Moment(r) => scaled.moment_quadrature(r)?,
            };
            total += w * term;
            weight_seen += w;
        }
        if weight_seen >= 1.0 - WEIGHT_TAIL {
            break;
        }
        if let Some(m) = family.binomial_size() {
            if z >= u64::from(m) {
                break;
            }
        }
        if z as usize >= CAP {
            return Err(Error::TruncationCap { cap: CAP });
        }
        z += 1;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_constants_and_polynomials() {
        let spec = QuadratureSpec::default();
        let one = integrate(|_| 1.0, 0.0, 1.0, &spec).unwrap();
        assert_relative_eq!(one.value, 1.0, epsilon = 1e-14);

        // GK15 is exact well past degree 20; a single panel suffices.
        let poly = integrate(|x| x.powi(20), 0.0, 1.0, &spec).unwrap();
        assert_relative_eq!(poly.value, 1.0 / 21.0, epsilon = 1e-14);

        let lin = integrate(|x| 2.0 * (1.0 - x), 0.0, 1.0, &spec).unwrap();
        assert_relative_eq!(lin.value, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn simpson_rule_agrees_on_smooth_integrands() {
        let spec = QuadratureSpec { rule: QuadRule::Simpson, ..Default::default() };
        let v = integrate(|x| (3.0 * x).sin(), 0.0, 1.0, &spec).unwrap();
        let exact = (1.0 - (3.0f64).cos()) / 3.0;
        assert_relative_eq!(v.value, exact, epsilon = 1e-10);
    }

    #[test]
    fn error_estimate_is_honored() {
        let spec = QuadratureSpec::default();
        let q = integrate(|x| (-x * x).exp(), 0.0, 3.0, &spec).unwrap();
        assert!(q.error_estimate <= spec.abs_tol.max(spec.rel_tol * q.value.abs()));
    }

    #[test]
    fn rejects_bad_bounds() {
        let spec = QuadratureSpec::default();
        assert!(integrate(|x| x, 1.0, 0.0, &spec).is_err());
    }

    #[test]
    fn handles_integrable_endpoint_singularity() {
        // ∫₀¹ (1−x)^{-1/2} dx = 2, singular at 1; quadrature on [0, 1−ε]
        // plus the analytic tail 2√ε recovers it.
        let spec = QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-10, ..Default::default() };
        let eps = 1e-8;
        let body = integrate(|x| (1.0 - x).powf(-0.5), 0.0, 1.0 - eps, &spec).unwrap();
        let total = body.value + 2.0 * eps.sqrt();
        assert_relative_eq!(total, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn gradient_exact_on_quadratics() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1] - 2.0 * x[1] * x[1];
        let g = finite_diff_gradient(f, &[1.5, -0.5], 1e-5);
        assert_relative_eq!(g[0], 2.0 * 1.5 + 3.0 * -0.5, epsilon = 1e-9);
        assert_relative_eq!(g[1], 3.0 * 1.5 - 4.0 * -0.5, epsilon = 1e-9);
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1] - 2.0 * x[1] * x[1];
        let h = finite_diff_hessian(f, &[0.3, 0.7]);
        assert_relative_eq!(h[0][0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(h[0][1], 3.0, epsilon = 1e-6);
        assert_relative_eq!(h[1][0], 3.0, epsilon = 1e-6);
        assert_relative_eq!(h[1][1], -4.0, epsilon = 1e-6);
    }

    #[test]
    fn gradient_step_halving_is_stable() {
        let f = |x: &[f64]| (2.0 * x[0]).sin() + x[1].exp();
        let x = [0.4, -0.2];
        let g1 = finite_diff_gradient(f, &x, 1e-5);
        let g2 = finite_diff_gradient(f, &x, 5e-6);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() / a.abs().max(1.0) < 1e-6);
        }
    }

    #[test]
    fn bisection_inverts_uniform() {
        let y = invert_cdf_bisection(|x| x, 0.3).unwrap();
        assert_relative_eq!(y, 0.3, epsilon = 1e-12);
        assert_eq!(invert_cdf_bisection(|x| x, 0.0).unwrap(), 0.0);
        assert_eq!(invert_cdf_bisection(|x| x, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn bisection_detects_non_monotone() {
        assert!(invert_cdf_bisection(|x| 1.0 - x, 0.5).is_err());
    }
}
