//! Small dense quasi-Newton machinery shared by the fitters: BFGS with
//! backtracking line search, box-free reparameterizations, a Halton sequence
//! for deterministic multi-start designs, and tiny SPD solves for standard
//! errors.

/// Maps one coordinate between its constrained domain and the real line.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Transform {
    /// x = scale · σ(z), for domains (0, scale).
    ScaledLogit { scale: f64 },
    /// x = e^z, for domains (0, ∞).
    Log,
}

impl Transform {
    pub(crate) fn to_unconstrained(&self, x: f64) -> f64 {
        match self {
            Transform::ScaledLogit { scale } => {
                let u = (x / scale).clamp(1e-12, 1.0 - 1e-12);
                (u / (1.0 - u)).ln()
            }
            Transform::Log => x.ln(),
        }
    }

    pub(crate) fn to_constrained(&self, z: f64) -> f64 {
        match self {
            Transform::ScaledLogit { scale } => scale * sigmoid(z),
            Transform::Log => z.clamp(-700.0, 700.0).exp(),
        }
    }

    /// dx/dz at the constrained value x.
    pub(crate) fn jacobian(&self, x: f64) -> f64 {
        match self {
            Transform::ScaledLogit { scale } => x * (1.0 - x / scale),
            Transform::Log => x,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct OptimSettings {
    pub max_iter: usize,
    /// Converged when ‖∇f‖_∞ < grad_scale · (1 + |f|).
    pub grad_scale: f64,
    /// Converged when the accepted step is below this in every coordinate.
    pub step_tol: f64,
}

impl Default for OptimSettings {
    fn default() -> Self {
        OptimSettings { max_iter: 500, grad_scale: 1e-7, step_tol: 1e-9 }
    }
}

/// Minimizes `f` from `x0` with BFGS and Armijo backtracking.
///
/// The objective returns the value and gradient together; non-finite values
/// are treated as infeasible and rejected by the line search.
pub(crate) fn minimize<F>(f: &F, x0: &[f64], settings: &OptimSettings) -> OptimOutcome
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut grad) = f(&x);
    if !fx.is_finite() {
        return OptimOutcome { x, value: fx, grad_inf_norm: f64::INFINITY, iterations: 0, converged: false };
    }
    let mut h_inv = identity(d);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iter {
        let gnorm = inf_norm(&grad);
        if gnorm < settings.grad_scale * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut dir = neg_matvec(&h_inv, &grad);
        let mut slope = dot(&dir, &grad);
        if !(slope < 0.0) {
            // Curvature information went bad; restart from steepest descent.
            h_inv = identity(d);
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&dir, &grad);
        }

        // Armijo backtracking.
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // No acceptable step: the objective is flat to rounding along
            // this direction. Call it converged when the gradient is already
            // small on the same scale.
            converged = gnorm < 1e-4 * (1.0 + fx.abs());
            break;
        };

        let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y_vec: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let step_norm = inf_norm(&step);
        let sy = dot(&step, &y_vec);
        if sy > 1e-12 * norm2(&step) * norm2(&y_vec) {
            bfgs_update(&mut h_inv, &step, &y_vec, sy);
        } else {
            h_inv = identity(d);
        }

        x = x_new;
        fx = f_new;
        grad = g_new;
        if step_norm < settings.step_tol {
            converged = true;
            break;
        }
    }

    OptimOutcome { value: fx, grad_inf_norm: inf_norm(&grad), iterations, converged, x }
}

// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ with ρ = 1/(sᵀy).
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let rho = 1.0 / sy;
    let hy = matvec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..d {
        for j in 0..d {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + rho * (1.0 + rho * yhy) * s[i] * s[j];
        }
    }
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn neg_matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| -dot(row, v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Radical-inverse (Halton) sequence value for index `i ≥ 1` in `base`.
pub(crate) fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Inverse of a symmetric positive-definite matrix via Cholesky; `None` when
/// a pivot is not positive.
pub(crate) fn invert_spd(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    // Cholesky factor L with A = L Lᵀ.
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // Invert by solving A X = I column by column.
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l[i][k] * y[k];
            }
            y[i] = sum / l[i][i];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[k][i] * inv[k][col];
            }
            inv[i][col] = sum / l[i][i];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (v, g)
        };
        let out = minimize(&f, &[-1.2, 1.0], &OptimSettings::default());
        assert!(out.converged, "grad norm {}", out.grad_inf_norm);
        assert_relative_eq!(out.x[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(out.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn transform_round_trips() {
        let t = Transform::ScaledLogit { scale: 2.0 };
        for &x in &[0.01, 0.5, 1.0, 1.99] {
            assert_relative_eq!(t.to_constrained(t.to_unconstrained(x)), x, epsilon = 1e-10);
        }
        let l = Transform::Log;
        for &x in &[1e-6, 1.0, 42.0] {
            assert_relative_eq!(l.to_constrained(l.to_unconstrained(x)), x, max_relative = 1e-12);
        }
    }

    #[test]
    fn halton_is_low_discrepancy_deterministic() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert_eq!(halton(1, 3), 1.0 / 3.0);
    }

    #[test]
    fn spd_inverse_matches_hand_computation() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let inv = invert_spd(&a).unwrap();
        // inverse of [[4,1],[1,3]] is 1/11·[[3,−1],[−1,4]]
        assert_relative_eq!(inv[0][0], 3.0 / 11.0, epsilon = 1e-12);
        assert_relative_eq!(inv[0][1], -1.0 / 11.0, epsilon = 1e-12);
        assert_relative_eq!(inv[1][1], 4.0 / 11.0, epsilon = 1e-12);
    }

    #[test]
    fn spd_inverse_rejects_indefinite() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(invert_spd(&a).is_none());
    }
}
