//! Probabilists' Hermite polynomials and their Gaussian integrals.
//!
//! All integrals are taken against the standard Gaussian probability measure,
//! so that `E[h_a h_b] = a! delta_ab`.

use nalgebra::{DMatrix, SymmetricEigen};

/// `h_0(z) .. h_n(z)` by the three-term recurrence `h_{k+1} = z h_k - k h_{k-1}`.
pub fn hermite_values(n: usize, z: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(1.0);
    if n >= 1 {
        h.push(z);
    }
    for k in 1..n {
        let next = z * h[k] - k as f64 * h[k - 1];
        h.push(next);
    }
    h
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `ln(n!)` computed as a plain sum, exact enough for the multinomial weights.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `E[h_a h_b h_c]`; zero unless `a+b+c` is even and the triangle inequalities hold.
pub fn triple(a: usize, b: usize, c: usize) -> f64 {
    let sum = a + b + c;
    if sum % 2 == 1 {
        return 0.0;
    }
    let s = sum / 2;
    if a > s || b > s || c > s {
        return 0.0;
    }
    // a! b! c! / ((s-a)! (s-b)! (s-c)!) in log space keeps large orders finite
    (ln_factorial(a) + ln_factorial(b) + ln_factorial(c)
        - ln_factorial(s - a)
        - ln_factorial(s - b)
        - ln_factorial(s - c))
    .exp()
    .round_if_small()
}

trait RoundIfSmall {
    fn round_if_small(self) -> Self;
}

impl RoundIfSmall for f64 {
    // the triple products are integers; snap them when they are exactly representable
    fn round_if_small(self) -> f64 {
        if self < 9.0e15 {
            self.round()
        } else {
            self
        }
    }
}

/// Gauss-Hermite rule for the standard Gaussian probability measure
/// (Golub-Welsch). Nodes ascend; weights sum to one.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let jac = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize to remove eigen-solver noise
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// Precomputed triple-product slices `Delta_nu` (each `(p+1) x (p+1)`) for `nu = 0..=nu_max`.
#[derive(Clone, Debug)]
pub struct HermiteTools {
    p: usize,
    slices: Vec<DMatrix<f64>>,
}

impl HermiteTools {
    /// Slices for solution order `p` and coefficient orders up to `2p`.
    pub fn new(p: usize) -> Self {
        Self::with_range(p, 2 * p)
    }

    pub fn with_range(p: usize, nu_max: usize) -> Self {
        let slices = (0..=nu_max)
            .map(|nu| DMatrix::from_fn(p + 1, p + 1, |a, b| triple(a, b, nu)))
            .collect();
        Self { p, slices }
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn nu_max(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn delta(&self, nu: usize) -> &DMatrix<f64> {
        &self.slices[nu]
    }

    /// `sum_nu Delta_nu c(nu)`.
    pub fn contract(&self, c: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.p + 1, self.p + 1);
        for (nu, &x) in c.iter().enumerate() {
            if x != 0.0 {
                out += &self.slices[nu] * x;
            }
        }
        out
    }
}
