use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pce::{factorial, hermite_values};
use crate::tt::{Core, TtTensor};

/// Largest spatial size for which a dense covariance matrix is formed.
pub const COVARIANCE_LIMIT: usize = 5000;

/// Largest `|theta_m|` at which Hermite polynomials are evaluated.
pub const THETA_LIMIT: f64 = 6.0;

/// Splits a response surface `u(x, alpha)` into its spatial matrix `U0` (`N x r_1`)
/// and the parametric block train (leading rank `r_1`).
pub(crate) fn split(u: &TtTensor) -> Result<(DMatrix<f64>, TtTensor)> {
    if u.ndim() < 2 {
        return Err(Error::Shape("response surface needs a spatial and at least one parametric mode".into()));
    }
    let c0 = u.core(0);
    if c0.left_rank() != 1 {
        return Err(Error::Shape("response surface must have leading rank 1".into()));
    }
    let u0 = DMatrix::from_column_slice(c0.mode(), c0.right_rank(), c0.data());
    let param = TtTensor::new(u.cores()[1..].to_vec())?;
    Ok((u0, param))
}

fn unit(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    e
}

/// Coefficient at `alpha = 0`, i.e. the mean field.
pub fn mean(u: &TtTensor) -> Result<Vec<f64>> {
    let (_, param) = split(u)?;
    coefficient(u, &vec![0; param.ndim()])
}

/// Spatial coefficient `u_alpha(x)`.
pub fn coefficient(u: &TtTensor, alpha: &[usize]) -> Result<Vec<f64>> {
    let (u0, param) = split(u)?;
    if alpha.len() != param.ndim() || alpha.iter().zip(param.modes()).any(|(&a, n)| a >= n) {
        return Err(Error::Index(format!("{alpha:?} outside the parametric modes {:?}", param.modes())));
    }
    let w: Vec<Vec<f64>> = param
        .modes()
        .iter()
        .zip(alpha)
        .map(|(&n, &a)| {
            let mut e = vec![0.0; n];
            e[a] = 1.0;
            e
        })
        .collect();
    let c = DVector::from_vec(param.contract_all(&w)?);
    Ok((u0 * c).iter().copied().collect())
}

/// `u(x, theta) = sum_alpha u_alpha(x) H_alpha(theta)` at one parameter point.
pub fn surface_eval(u: &TtTensor, theta: &[f64]) -> Result<Vec<f64>> {
    let (u0, param) = split(u)?;
    if theta.len() != param.ndim() {
        return Err(Error::Shape(format!("{} parameters for {} modes", theta.len(), param.ndim())));
    }
    check_theta(theta)?;
    let w: Vec<Vec<f64>> = param
        .modes()
        .iter()
        .zip(theta)
        .map(|(&n, &t)| hermite_values(n - 1, t))
        .collect();
    let c = DVector::from_vec(param.contract_all(&w)?);
    Ok((u0 * c).iter().copied().collect())
}

fn check_theta(theta: &[f64]) -> Result<()> {
    if let Some(t) = theta.iter().find(|t| !(t.abs() <= THETA_LIMIT)) {
        return Err(Error::Invalid(format!("|theta| = {t} exceeds {THETA_LIMIT}")));
    }
    Ok(())
}

/// Collocation nodes per parametric dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaGrid {
    pub nodes: Vec<Vec<f64>>,
}

impl ThetaGrid {
    /// `n` equispaced nodes on `[-s, s]` in each of `m` dimensions.
    pub fn uniform(m: usize, n: usize, s: f64) -> Result<Self> {
        if n == 0 || !(0.0..=THETA_LIMIT).contains(&s) || (n > 1 && s == 0.0) {
            return Err(Error::Invalid(format!("theta grid with {n} nodes on [-{s}, {s}]")));
        }
        let line: Vec<f64> = if n == 1 {
            vec![0.0]
        } else {
            (0..n).map(|i| -s + 2.0 * s * i as f64 / (n - 1) as f64).collect()
        };
        Ok(Self { nodes: vec![line; m] })
    }

    /// Nine nodes on `[-4, 4]`.
    pub fn default_for(m: usize) -> Self {
        Self::uniform(m, 9, 4.0).expect("default grid is valid")
    }

    pub fn new(nodes: Vec<Vec<f64>>) -> Result<Self> {
        for line in &nodes {
            if line.is_empty() || line.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Invalid("theta nodes must be nonempty and strictly increasing".into()));
            }
            check_theta(line)?;
        }
        Ok(Self { nodes })
    }

    pub fn dims(&self) -> usize {
        self.nodes.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.nodes.iter().map(|l| l.len()).collect()
    }

    /// `n_theta x (p+1)` matrix `H[t, a] = h_a(theta_t)` for dimension `m`.
    pub fn hermite_matrix(&self, m: usize, p: usize) -> DMatrix<f64> {
        let line = &self.nodes[m];
        let mut h = DMatrix::zeros(line.len(), p + 1);
        for (t, &x) in line.iter().enumerate() {
            for (a, v) in hermite_values(p, x).into_iter().enumerate() {
                h[(t, a)] = v;
            }
        }
        h
    }
}

/// Replaces every parametric index by the theta-node index; ranks are unchanged.
pub fn surface_grid(u: &TtTensor, grid: &ThetaGrid) -> Result<TtTensor> {
    if grid.dims() + 1 != u.ndim() {
        return Err(Error::Shape(format!("grid has {} dimensions, surface {}", grid.dims(), u.ndim() - 1)));
    }
    let mut out = u.clone();
    for m in 0..grid.dims() {
        let h = grid.hermite_matrix(m, u.modes()[m + 1] - 1);
        out = out.map_mode(m + 1, &h)?;
    }
    Ok(out)
}

/// `C = u0 G u0^T` with `G` the Gram matrix of the mass-scaled fluctuation.
#[derive(Clone, Debug)]
pub struct CovarianceFactor {
    pub u0: DMatrix<f64>,
    pub gram: DMatrix<f64>,
}

impl CovarianceFactor {
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.u0.nrows();
        if n > COVARIANCE_LIMIT {
            return Err(Error::Guard {
                what: "dense covariance",
                size: n * n,
                limit: COVARIANCE_LIMIT * COVARIANCE_LIMIT,
            });
        }
        let ug = &self.u0 * &self.gram;
        Ok(&ug * self.u0.transpose())
    }

    pub fn variance(&self) -> Vec<f64> {
        let ug = &self.u0 * &self.gram;
        (0..self.u0.nrows())
            .map(|i| ug.row(i).dot(&self.u0.row(i)))
            .collect()
    }
}

/// Multiplies each parametric index `a` by `sqrt(a!)`.
pub(crate) fn mass_scale(param: &TtTensor) -> Result<TtTensor> {
    let mut cores = Vec::with_capacity(param.ndim());
    for c in param.cores() {
        let s: Vec<f64> = (0..c.mode()).map(|a| factorial(a).sqrt()).collect();
        cores.push(Core::from_fn(c.left_rank(), c.mode(), c.right_rank(), |l, a, r| s[a] * c.get(l, a, r)));
    }
    TtTensor::new(cores)
}

/// Removes the `alpha = 0` entry of a block train (one extra rank).
pub(crate) fn drop_zero_index(param: &TtTensor) -> Result<TtTensor> {
    let w: Vec<Vec<f64>> = param.modes().iter().map(|&n| unit(n)).collect();
    let w0 = param.contract_all(&w)?;
    let modes = param.modes();
    let mut cores = Vec::with_capacity(modes.len());
    for (k, &n) in modes.iter().enumerate() {
        let left = if k == 0 { w0.len() } else { 1 };
        cores.push(Core::from_fn(left, n, 1, |s, a, _| {
            if a != 0 {
                0.0
            } else if k == 0 {
                w0[s]
            } else {
                1.0
            }
        }));
    }
    param.sub(&TtTensor::new(cores)?)
}

/// Gram matrix `sum_{alpha != 0} alpha! w_alpha w_alpha^T` of a block train.
pub(crate) fn fluctuation_gram(param: &TtTensor) -> Result<DMatrix<f64>> {
    let w = drop_zero_index(&mass_scale(param)?)?;
    w.dot_matrix(&w)
}

/// Covariance `sum_{alpha != 0} alpha! u_alpha(x) u_alpha(y)` in factored form.
pub fn covariance(u: &TtTensor) -> Result<CovarianceFactor> {
    let (u0, param) = split(u)?;
    Ok(CovarianceFactor {
        u0,
        gram: fluctuation_gram(&param)?,
    })
}

pub fn variance(u: &TtTensor) -> Result<Vec<f64>> {
    Ok(covariance(u)?.variance())
}

/// `||C_a - C_b||_F / ||C_b||_F`, the relative covariance discrepancy.
pub fn covariance_error(a: &CovarianceFactor, b: &CovarianceFactor) -> Result<f64> {
    let (ca, cb) = (a.matrix()?, b.matrix()?);
    if ca.shape() != cb.shape() {
        return Err(Error::Shape("covariances of different spatial size".into()));
    }
    let nb = cb.norm();
    if nb == 0.0 {
        return Ok(if ca.norm() == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((ca - cb).norm() / nb)
}
