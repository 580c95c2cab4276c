//! Hermite expansion of the pointwise transform `kappa = phi(gamma)` and the
//! implicit equation linking the covariances of `kappa` and `gamma`.

use std::sync::Arc;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

use super::hermite::{factorial, gauss_hermite, hermite_values};
use crate::error::{Error, Result};

const QUAD_AGREEMENT: f64 = 1e-8;
const ROOT_TOL: f64 = 1e-12;

/// Marginal of the coefficient: `shift + Beta(a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaMarginal {
    pub a: f64,
    pub b: f64,
    pub shift: f64,
}

impl Default for BetaMarginal {
    fn default() -> Self {
        Self {
            a: 5.0,
            b: 2.0,
            shift: 1.0,
        }
    }
}

impl BetaMarginal {
    /// The transform `z -> shift + F^{-1}(Phi(z))` mapping a standard Gaussian to this law.
    pub fn transform(&self) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        let m = *self;
        move |z| m.shift + m.gaussian_quantile(z)
    }

    /// `F^{-1}(Phi(z))`, using the upper tail for positive `z` so neither tail rounds to 0 or 1.
    pub fn gaussian_quantile(&self, z: f64) -> f64 {
        let n = Normal::standard();
        if z <= 0.0 {
            inverse_beta_reg(self.a, self.b, n.cdf(z))
        } else {
            1.0 - inverse_beta_reg(self.b, self.a, n.cdf(-z))
        }
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }
}

/// Solves `I_x(a, b) = p` for `x` by bisection to `1e-12`.
pub fn inverse_beta_reg(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Hermite coefficients `phi_0..phi_Q` of a univariate transform.
#[derive(Clone)]
pub struct TransformPhi {
    coeffs: Vec<f64>,
    phi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    order: usize,
    /// Coefficients at the lower quadrature order when the two orders disagreed.
    lower: Option<Vec<f64>>,
}

impl std::fmt::Debug for TransformPhi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformPhi")
            .field("coeffs", &self.coeffs)
            .field("order", &self.order)
            .field("lower", &self.lower)
            .finish()
    }
}

impl TransformPhi {
    /// `phi_i = E[phi(Z) h_i(Z)] / i!`, by Gauss-Hermite quadrature at order
    /// `n = max(4Q, 40)` checked against order `2n`. The higher order is kept.
    pub fn new(phi: impl Fn(f64) -> f64 + Send + Sync + 'static, q: usize) -> Self {
        let phi: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(phi);
        let n = (4 * q).max(40);
        let low = project(&*phi, q, n);
        let high = project(&*phi, q, 2 * n);
        let gap = low
            .iter()
            .zip(&high)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let lower = if gap > QUAD_AGREEMENT {
            log::warn!(
                "transform coefficients differ by {gap:e} between quadrature orders {n} and {}",
                2 * n
            );
            Some(low)
        } else {
            None
        };
        Self {
            coeffs: high,
            phi,
            order: 2 * n,
            lower,
        }
    }

    /// Wraps known coefficients (the pointwise transform becomes the truncated series).
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        let c = coeffs.clone();
        Self {
            phi: Arc::new(move |z| {
                let h = hermite_values(c.len() - 1, z);
                c.iter().zip(&h).map(|(a, b)| a * b).sum()
            }),
            coeffs,
            order: 0,
            lower: None,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Truncation order `Q`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn quadrature_order(&self) -> usize {
        self.order
    }

    pub fn lower_order_coeffs(&self) -> Option<&[f64]> {
        self.lower.as_deref()
    }

    pub fn eval(&self, z: f64) -> f64 {
        (self.phi)(z)
    }

    /// `phi_i`, zero beyond the truncation order.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// `g(c) = sum_{i>=1} i! phi_i^2 c^i`, the covariance of `phi` at Gaussian correlation `c`.
    pub fn covariance_map(&self, c: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        let mut fact = 1.0;
        for (i, &p) in self.coeffs.iter().enumerate().skip(1) {
            pow *= c;
            fact *= i as f64;
            acc += fact * p * p * pow;
        }
        acc
    }

    /// Variance of the truncated series, `g(1)`.
    pub fn variance(&self) -> f64 {
        self.covariance_map(1.0)
    }

    /// `sum_{i>Q/2} i! phi_i^2`: variance carried by the upper half of the series.
    pub fn tail(&self) -> f64 {
        let q = self.order();
        (q / 2 + 1..=q)
            .map(|i| factorial(i) * self.coeffs[i] * self.coeffs[i])
            .sum()
    }

    /// Root of `g(c) = target` in `[-1, 1]`.
    pub fn invert(&self, target: f64) -> Result<f64> {
        self.invert_entry(target, 0, 0)
    }

    fn invert_entry(&self, target: f64, row: usize, col: usize) -> Result<f64> {
        let (lo, hi) = (self.covariance_map(-1.0), self.covariance_map(1.0));
        let slack = 1e-10 * hi.abs().max(f64::MIN_POSITIVE);
        if target == 0.0 {
            return Ok(0.0);
        }
        let (a, b) = if target > 0.0 {
            if target > hi + slack {
                return Err(Error::Unattainable { row, col, target, lo, hi });
            }
            if target >= hi {
                return Ok(1.0);
            }
            (0.0, 1.0)
        } else {
            if target < lo - slack {
                return Err(Error::Unattainable { row, col, target, lo, hi });
            }
            if target <= lo {
                return Ok(-1.0);
            }
            (-1.0, 0.0)
        };
        // g - target changes sign on [a, b]; Newton steps that leave the bracket fall back to bisection
        let f = |c: f64| self.covariance_map(c) - target;
        let (mut a, mut b) = (a, b);
        let fa_neg = f(a) < 0.0;
        let mut c = 0.5 * (a + b);
        for _ in 0..200 {
            let fc = f(c);
            if fc == 0.0 {
                return Ok(c);
            }
            if (fc < 0.0) == fa_neg {
                a = c;
            } else {
                b = c;
            }
            let step = fc / self.covariance_slope(c);
            let next = c - step;
            if next > a && next < b {
                c = next;
                if step.abs() < ROOT_TOL {
                    return Ok(c);
                }
            } else {
                c = 0.5 * (a + b);
            }
            if b - a < ROOT_TOL {
                return Ok(0.5 * (a + b));
            }
        }
        Ok(c)
    }

    fn covariance_slope(&self, c: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        let mut fact = 1.0;
        for (i, &p) in self.coeffs.iter().enumerate().skip(1) {
            fact *= i as f64;
            acc += fact * p * p * i as f64 * pow;
            pow *= c;
        }
        acc
    }
}

fn project(phi: &dyn Fn(f64) -> f64, q: usize, n: usize) -> Vec<f64> {
    let (z, w) = gauss_hermite(n);
    let mut out = vec![0.0; q + 1];
    for (&x, &wt) in z.iter().zip(&w) {
        let f = phi(x) * wt;
        for (o, h) in out.iter_mut().zip(hermite_values(q, x)) {
            *o += f * h;
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o /= factorial(i);
    }
    out
}

/// Entrywise solution of `g(c_xy) = cov_kappa(x, y)`: the Gaussian covariance
/// that `phi` maps to the prescribed coefficient covariance.
pub fn gamma_covariance(cov_kappa: &DMatrix<f64>, phi: &TransformPhi) -> Result<DMatrix<f64>> {
    let n = cov_kappa.nrows();
    if cov_kappa.ncols() != n {
        return Err(Error::Shape(format!("covariance is {}x{}", n, cov_kappa.ncols())));
    }
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let t = 0.5 * (cov_kappa[(i, j)] + cov_kappa[(j, i)]);
            let c = phi.invert_entry(t, i, j)?;
            out[(i, j)] = c;
            out[(j, i)] = c;
        }
    }
    Ok(out)
}
