use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Deserialize;

use super::transform::{gamma_covariance, BetaMarginal, TransformPhi};
use crate::error::{Error, Result};

/// Negative eigenvalues down to this fraction of the largest are clipped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Looser bound for the Gaussian covariance recovered by entrywise inversion of
/// the transform, which is only approximately PSD in the far spectral tail.
pub const GAMMA_PSD_TOLERANCE: f64 = 1e-3;

/// Stationary correlation families `rho(d)` for distance `d`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Correlation {
    /// `exp(-d^2 / sigma^2)`
    Gaussian { sigma: f64 },
    /// `exp(-d / sigma)`
    Exponential { sigma: f64 },
}

impl Correlation {
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            Correlation::Gaussian { sigma } => (-(d * d) / (sigma * sigma)).exp(),
            Correlation::Exponential { sigma } => (-d / sigma).exp(),
        }
    }

    pub fn matrix(&self, points: &[[f64; 2]]) -> DMatrix<f64> {
        let n = points.len();
        DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (points[i], points[j]);
            self.eval(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
        })
    }
}

/// Leading eigenpairs of a covariance operator discretized with weights `W`.
#[derive(Clone, Debug)]
pub struct KlePairs {
    /// Descending.
    pub values: Vec<f64>,
    /// Columns are `W`-orthonormal: `v^T W v = I`.
    pub vectors: DMatrix<f64>,
}

/// Solves `C W v = lambda v` through the symmetric form `W^{1/2} C W^{1/2}`
/// and returns the top `count` pairs.
pub fn discrete_kle(cov: &DMatrix<f64>, weights: &[f64], count: usize) -> Result<KlePairs> {
    discrete_kle_with(cov, weights, count, PSD_TOLERANCE)
}

/// [`discrete_kle`] with an explicit relative tolerance for negative eigenvalues.
pub fn discrete_kle_with(cov: &DMatrix<f64>, weights: &[f64], count: usize, psd_tol: f64) -> Result<KlePairs> {
    let n = cov.nrows();
    if cov.ncols() != n || weights.len() != n {
        return Err(Error::Shape(format!(
            "{}x{} covariance with {} weights",
            n,
            cov.ncols(),
            weights.len()
        )));
    }
    if count > n {
        return Err(Error::Invalid(format!("{count} eigenpairs requested from {n} points")));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Invalid("quadrature weights must be positive".into()));
    }
    let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let b = DMatrix::from_fn(n, n, |i, j| {
        sq[i] * 0.5 * (cov[(i, j)] + cov[(j, i)]) * sq[j]
    });
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let largest = eig.eigenvalues[order[0]].max(0.0);
    let smallest = eig.eigenvalues[order[n - 1]];
    if smallest < -psd_tol * largest || (largest == 0.0 && smallest < 0.0) {
        return Err(Error::NotPsd {
            value: smallest,
            largest,
        });
    }
    if smallest < -PSD_TOLERANCE * largest {
        log::warn!("clipping negative covariance eigenvalue {smallest:e} (largest {largest:e})");
    }
    let mut values = Vec::with_capacity(count);
    let mut vectors = DMatrix::zeros(n, count);
    for (c, &k) in order.iter().take(count).enumerate() {
        values.push(eig.eigenvalues[k].max(0.0));
        let y = eig.eigenvectors.column(k);
        // fix the sign so the largest-magnitude entry is positive
        let imax = y.iamax();
        let sign = if y[imax] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, c)] = sign * y[i] / sq[i];
        }
    }
    Ok(KlePairs { values, vectors })
}

/// Trapezoidal rule on an `n x n` tensor grid of `[-1, 1]^2`.
pub fn trapezoid_grid(n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    assert!(n >= 2, "trapezoid grid needs two points per side");
    let h = 2.0 / (n - 1) as f64;
    let w1 = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
    let mut pts = Vec::with_capacity(n * n);
    let mut w = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            pts.push([-1.0 + i as f64 * h, -1.0 + j as f64 * h]);
            w.push(w1(i) * w1(j));
        }
    }
    (pts, w)
}

/// Random coefficient `kappa(x) = phi(gamma(x))` described by its marginal and correlation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldModel {
    pub correlation: Correlation,
    pub marginal: BetaMarginal,
    /// Gaussian KLE terms `M`.
    pub m: usize,
    /// Coefficient KLE terms `L`.
    pub l: usize,
    /// Hermite truncation `Q` of the transform.
    pub q: usize,
}

/// Spatial ingredients of the coefficient expansion on a fixed set of points.
#[derive(Clone, Debug)]
pub struct KleBasis {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// `kappa_bar`.
    pub mean: Vec<f64>,
    /// `mu_1 >= .. >= mu_L > 0`.
    pub mu: Vec<f64>,
    /// `N x L`, `W`-orthonormal columns `v_l`.
    pub v: DMatrix<f64>,
    /// Gaussian KLE eigenvalues `lambda_m`.
    pub lambda: Vec<f64>,
    /// `N x M`, columns `g_m = sqrt(lambda_m) y_m`.
    pub g: DMatrix<f64>,
}

impl KleBasis {
    /// Builds both expansions: `v_l` from the coefficient covariance and `g_m`
    /// from the Gaussian covariance obtained by inverting the transform.
    pub fn build(points: &[[f64; 2]], weights: &[f64], model: &FieldModel) -> Result<(Self, TransformPhi)> {
        let phi = TransformPhi::new(model.marginal.transform(), model.q);
        let basis = Self::with_transform(points, weights, model, &phi)?;
        Ok((basis, phi))
    }

    pub fn with_transform(
        points: &[[f64; 2]],
        weights: &[f64],
        model: &FieldModel,
        phi: &TransformPhi,
    ) -> Result<Self> {
        let n = points.len();
        if model.l == 0 || model.m == 0 {
            return Err(Error::Invalid("M and L must be positive".into()));
        }
        let cov_kappa = model.correlation.matrix(points) * phi.variance();
        let kappa = discrete_kle(&cov_kappa, weights, model.l)?;
        if let Some(k) = kappa.values.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::Invalid(format!("coefficient covariance has only {k} positive eigenvalues")));
        }
        let cov_gamma = gamma_covariance(&cov_kappa, phi)?;
        let gamma = discrete_kle_with(&cov_gamma, weights, model.m, GAMMA_PSD_TOLERANCE)?;
        let mut g = gamma.vectors;
        for (j, mut col) in g.column_iter_mut().enumerate() {
            col *= gamma.values[j].sqrt();
        }
        log::info!(
            "KLE on {n} points: mu[0..L] = {:?}, lambda captures {:.4} of the Gaussian variance",
            kappa.values,
            gamma.values.iter().sum::<f64>() / weights.iter().sum::<f64>()
        );
        Ok(Self {
            points: points.to_vec(),
            weights: weights.to_vec(),
            mean: vec![phi.coeff(0); n],
            mu: kappa.values,
            v: kappa.vectors,
            lambda: gamma.values,
            g,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn l(&self) -> usize {
        self.v.ncols()
    }

    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    /// `<a, b>_W`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }

    /// Projection coefficients `<f, v_l>_W`, `l = 1..L`.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        let fw = DVector::from_iterator(f.len(), f.iter().zip(&self.weights).map(|(a, w)| a * w));
        (self.v.transpose() * fw).iter().copied().collect()
    }

    /// CSV with columns `x,y,mean,v1..vL`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "x,y,mean")?;
        for l in 1..=self.l() {
            write!(out, ",v{l}")?;
        }
        writeln!(out)?;
        for (i, p) in self.points.iter().enumerate() {
            write!(out, "{},{},{}", p[0], p[1], self.mean[i])?;
            for l in 0..self.l() {
                write!(out, ",{}", self.v[(i, l)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
