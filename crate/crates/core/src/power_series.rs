//! Zero-truncated Power Series family: Logarithmic, Geometric, Poisson and
//! Binomial members with their generating functions.
//!
//! Each member is characterized by coefficients `a_z ≥ 0` and the generating
//! function `A(θ) = Σ_{z≥1} a_z θ^z`, giving the probability function
//! `P(Z = z) = a_z θ^z / A(θ)`. The compound distribution, the likelihood and
//! the EM update all run on `A` and its first three derivatives, so those are
//! provided in closed form rather than numerically.
//!
//! | member      | a_z      | A(θ)          | θ range |
//! |-------------|----------|---------------|---------|
//! | Logarithmic | 1/z      | −log(1−θ)     | (0, 1)  |
//! | Geometric   | 1        | θ/(1−θ)       | (0, 1)  |
//! | Poisson     | 1/z!     | e^θ − 1       | (0, ∞)  |
//! | Binomial m  | C(m, z)  | (θ+1)^m − 1   | (0, ∞)  |

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_gamma, binomial};

/// Hard cap for any series walked term by term.
pub(crate) const SERIES_TERM_CAP: usize = 1_000_000;

/// One member of the zero-truncated Power Series family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsFamily {
    Logarithmic,
    Geometric,
    Poisson,
    /// Binomial with a fixed, user-supplied size parameter `m ≥ 1`.
    /// `m` is never estimated.
    Binomial { m: u32 },
}

impl fmt::Display for PsFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsFamily::Logarithmic => write!(f, "logarithmic"),
            PsFamily::Geometric => write!(f, "geometric"),
            PsFamily::Poisson => write!(f, "poisson"),
            PsFamily::Binomial { m } => write!(f, "binomial(m={m})"),
        }
    }
}

impl PsFamily {
    /// Rejects structurally invalid members (Binomial with m = 0).
    pub fn validate(&self) -> Result<()> {
        match self {
            PsFamily::Binomial { m: 0 } => {
                Err(Error::domain("binomial size parameter m must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Open interval of admissible θ.
    pub fn theta_domain(&self) -> (f64, f64) {
        match self {
            PsFamily::Logarithmic | PsFamily::Geometric => (0.0, 1.0),
            PsFamily::Poisson | PsFamily::Binomial { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Validates θ against the open domain.
    pub fn check_theta(&self, theta: f64) -> Result<()> {
        let (lo, hi) = self.theta_domain();
        if theta.is_finite() && theta > lo && theta < hi {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "theta = {theta} outside the open interval ({lo}, {hi}) for the {self} family"
            )))
        }
    }

    /// The binomial size parameter, when this member has one.
    pub fn binomial_size(&self) -> Option<u32> {
        match self {
            PsFamily::Binomial { m } => Some(*m),
            _ => None,
        }
    }

    /// Series coefficient `a_z`; zero for Binomial when z exceeds m.
    pub fn coefficient(&self, z: u64) -> Result<f64> {
        if z < 1 {
            return Err(Error::domain(format!("power-series index z = {z} must be at least 1")));
        }
        Ok(match self {
            PsFamily::Logarithmic => 1.0 / z as f64,
            PsFamily::Geometric => 1.0,
            PsFamily::Poisson => (-ln_gamma(z as f64 + 1.0)).exp(),
            PsFamily::Binomial { m } => {
                if z > u64::from(*m) {
                    0.0
                } else {
                    binomial(*m, z as u32)
                }
            }
        })
    }

    /// Generating function A(θ), validated against the θ domain.
    pub fn a(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.a_unchecked(theta))
    }

    /// First derivative A′(θ).
    pub fn a_prime(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.a_prime_unchecked(theta))
    }

    /// Second derivative A″(θ).
    pub fn a_double_prime(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.a_double_prime_unchecked(theta))
    }

    /// Third derivative A‴(θ).
    pub fn a_triple_prime(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.a_triple_prime_unchecked(theta))
    }

    // The unchecked evaluators accept any x ≥ 0 (the series converge on the
    // closed left endpoint; A(0) = 0, A'(0) = a_1). Compound-distribution
    // internals evaluate them at x = θ·S(y), which reaches 0 as y → 1.

    pub(crate) fn a_unchecked(&self, x: f64) -> f64 {
        match self {
            PsFamily::Logarithmic => -(-x).ln_1p(),
            PsFamily::Geometric => x / (1.0 - x),
            PsFamily::Poisson => x.exp_m1(),
            PsFamily::Binomial { m } => (x.ln_1p() * f64::from(*m)).exp_m1(),
        }
    }

    pub(crate) fn a_prime_unchecked(&self, x: f64) -> f64 {
        match self {
            PsFamily::Logarithmic => 1.0 / (1.0 - x),
            PsFamily::Geometric => (1.0 - x).powi(-2),
            PsFamily::Poisson => x.exp(),
            PsFamily::Binomial { m } => f64::from(*m) * (1.0 + x).powi(*m as i32 - 1),
        }
    }

    pub(crate) fn a_double_prime_unchecked(&self, x: f64) -> f64 {
        match self {
            PsFamily::Logarithmic => (1.0 - x).powi(-2),
            PsFamily::Geometric => 2.0 * (1.0 - x).powi(-3),
            PsFamily::Poisson => x.exp(),
            PsFamily::Binomial { m } => {
                let m = f64::from(*m);
                m * (m - 1.0) * (1.0 + x).powf(m - 2.0)
            }
        }
    }

    pub(crate) fn a_triple_prime_unchecked(&self, x: f64) -> f64 {
        match self {
            PsFamily::Logarithmic => 2.0 * (1.0 - x).powi(-3),
            PsFamily::Geometric => 6.0 * (1.0 - x).powi(-4),
            PsFamily::Poisson => x.exp(),
            PsFamily::Binomial { m } => {
                let m = f64::from(*m);
                m * (m - 1.0) * (m - 2.0) * (1.0 + x).powf(m - 3.0)
            }
        }
    }

    /// ln A(θ), evaluated without forming A when that would lose precision.
    pub fn ln_a(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self {
            PsFamily::Logarithmic => (-(-theta).ln_1p()).ln(),
            PsFamily::Geometric => theta.ln() - (-theta).ln_1p(),
            PsFamily::Poisson => theta + ln_one_minus_exp_neg(theta),
            PsFamily::Binomial { m } => {
                let mlog = f64::from(*m) * theta.ln_1p();
                mlog + ln_one_minus_exp_neg(mlog)
            }
        })
    }

    /// Ratio A′(θ)/A(θ), formed from closed forms so it stays finite where
    /// A itself overflows (large Poisson/Binomial θ).
    pub(crate) fn a_prime_over_a(&self, theta: f64) -> f64 {
        match self {
            PsFamily::Logarithmic => 1.0 / ((1.0 - theta) * -(-theta).ln_1p()),
            PsFamily::Geometric => 1.0 / (theta * (1.0 - theta)),
            PsFamily::Poisson => 1.0 / -(-theta).exp_m1(),
            PsFamily::Binomial { m } => {
                let m = f64::from(*m);
                m / ((1.0 + theta) * -(-m * theta.ln_1p()).exp_m1())
            }
        }
    }

    /// ln[A′(θ·s)/A(θ)] with s = e^{ln_s}, ln_s ≤ 0 — the per-observation
    /// likelihood term. Pairing the two logarithms keeps the Poisson case
    /// exact for large θ, where ln A′(θs) and ln A(θ) are both ≈ θ and their
    /// separate evaluation would cancel catastrophically.
    pub(crate) fn ln_a_prime_over_a(&self, theta: f64, ln_s: f64) -> f64 {
        let s = ln_s.exp();
        match self {
            PsFamily::Logarithmic => {
                -(-theta * s).ln_1p() - (-(-theta).ln_1p()).ln()
            }
            PsFamily::Geometric => {
                -2.0 * (-theta * s).ln_1p() - theta.ln() + (-theta).ln_1p()
            }
            PsFamily::Poisson => theta * ln_s.exp_m1() - ln_one_minus_exp_neg(theta),
            PsFamily::Binomial { m } => {
                let m = f64::from(*m);
                let mlog = m * theta.ln_1p();
                m.ln() + (m - 1.0) * (theta * s).ln_1p() - mlog - ln_one_minus_exp_neg(mlog)
            }
        }
    }

    /// Ratio A″(x)/A′(x), the per-observation weight in the score and the
    /// conditional expectation of the latent count.
    pub(crate) fn curvature_ratio(&self, x: f64) -> f64 {
        match self {
            PsFamily::Logarithmic => 1.0 / (1.0 - x),
            PsFamily::Geometric => 2.0 / (1.0 - x),
            PsFamily::Poisson => 1.0,
            PsFamily::Binomial { m } => (f64::from(*m) - 1.0) / (1.0 + x),
        }
    }

    /// d/dx of [`Self::curvature_ratio`], i.e. (A‴A′ − A″²)/A′².
    pub(crate) fn curvature_ratio_slope(&self, x: f64) -> f64 {
        match self {
            PsFamily::Logarithmic => (1.0 - x).powi(-2),
            PsFamily::Geometric => 2.0 * (1.0 - x).powi(-2),
            PsFamily::Poisson => 0.0,
            PsFamily::Binomial { m } => -(f64::from(*m) - 1.0) * (1.0 + x).powi(-2),
        }
    }

    /// Inverse of the generating function: the unique θ* ≥ 0 with A(θ*) = u.
    pub fn a_inv(&self, u: f64) -> Result<f64> {
        if !u.is_finite() || u < 0.0 {
            return Err(Error::domain(format!("a_inv argument u = {u} must be nonnegative")));
        }
        Ok(match self {
            PsFamily::Logarithmic => -(-u).exp_m1(),
            PsFamily::Geometric => u / (1.0 + u),
            PsFamily::Poisson => u.ln_1p(),
            PsFamily::Binomial { m } => (u.ln_1p() / f64::from(*m)).exp_m1(),
        })
    }

    /// Probability function a_z θ^z / A(θ) of the zero-truncated member.
    pub fn pmf(&self, theta: f64, z: u64) -> Result<f64> {
        self.check_theta(theta)?;
        if z < 1 {
            return Err(Error::domain(format!("power-series index z = {z} must be at least 1")));
        }
        if let PsFamily::Binomial { m } = self {
            if z > u64::from(*m) {
                return Ok(0.0);
            }
        }
        let ln_coeff = match self {
            PsFamily::Logarithmic => -(z as f64).ln(),
            PsFamily::Geometric => 0.0,
            PsFamily::Poisson => -ln_gamma(z as f64 + 1.0),
            PsFamily::Binomial { m } => {
                ln_gamma(f64::from(*m) + 1.0)
                    - ln_gamma(z as f64 + 1.0)
                    - ln_gamma(f64::from(*m) - z as f64 + 1.0)
            }
        };
        Ok((ln_coeff + z as f64 * theta.ln() - self.ln_a(theta)?).exp())
    }

    /// Mean θ·A′(θ)/A(θ) of the zero-truncated member.
    pub fn mean(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(theta * self.a_prime_unchecked(theta) / self.a_unchecked(theta))
    }

    /// Draws one value by inverse transform over the cumulative pmf.
    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Result<u64> {
        self.check_theta(theta)?;
        let u = crate::open_unit(rng);
        let mut z: u64 = 1;
        let mut cum = self.pmf(theta, z)?;
        while cum < u {
            if let PsFamily::Binomial { m } = self {
                if z >= u64::from(*m) {
                    break;
                }
            }
            if z as usize >= SERIES_TERM_CAP {
                break;
            }
            z += 1;
            cum += self.pmf(theta, z)?;
        }
        Ok(z)
    }
}
