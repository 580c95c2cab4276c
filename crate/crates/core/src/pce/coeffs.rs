use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::DMatrix;

use super::hermite::ln_factorial;
use super::kle::KleBasis;
use super::multiindex::MultiIndexSet;
use super::transform::TransformPhi;
use crate::cross::Evaluator;
use crate::error::{Error, Result};
use crate::tt::{Core, TtTensor, DENSE_LIMIT};

/// Element oracle for the projected chaos coefficients `kappa~_alpha(l)`, `l = 1..L`.
///
/// The mean field is removed from the `alpha = 0` coefficient before projecting,
/// so that the mean is carried only by the separate zero-index channel of
/// [`build_kappa_tt`].
pub struct PceEvaluator {
    modes: Vec<usize>,
    n: usize,
    m: usize,
    l: usize,
    /// `g` row-major by point.
    g: Vec<f64>,
    /// `W v_l`, row-major by point.
    wv: Vec<f64>,
    phi: Vec<f64>,
    ln_fact: Vec<f64>,
    mean_proj: Vec<f64>,
    warned: AtomicBool,
}

impl PceEvaluator {
    /// Evaluator over the full set with limits `limits` (mode sizes `limits + 1`).
    pub fn new(kle: &KleBasis, phi: &TransformPhi, limits: &[usize]) -> Result<Self> {
        let (n, m, l) = (kle.len(), kle.m(), kle.l());
        if limits.len() != m {
            return Err(Error::Shape(format!("{} order limits for {m} Gaussian modes", limits.len())));
        }
        let reach: usize = limits.iter().sum();
        if reach > phi.order() {
            log::debug!(
                "orders up to {reach} reachable but the transform is truncated at Q = {}",
                phi.order()
            );
        }
        let g = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| kle.g[(i, j)]).collect();
        let wv = (0..n)
            .flat_map(|i| (0..l).map(move |j| (i, j)))
            .map(|(i, j)| kle.weights[i] * kle.v[(i, j)])
            .collect();
        let top = reach.max(phi.order());
        Ok(Self {
            modes: limits.iter().map(|p| p + 1).collect(),
            n,
            m,
            l,
            g,
            wv,
            phi: phi.coeffs().to_vec(),
            ln_fact: (0..=top).map(ln_factorial).collect(),
            mean_proj: kle.project(&kle.mean),
            warned: AtomicBool::new(false),
        })
    }

    /// `|alpha|! / prod alpha_m! * phi_|alpha|`.
    fn prefactor(&self, alpha: &[usize]) -> f64 {
        let s: usize = alpha.iter().sum();
        if s >= self.phi.len() {
            if !self.warned.swap(true, Ordering::Relaxed) {
                log::warn!(
                    "multi-index order {s} exceeds the transform truncation Q = {}; treated as zero",
                    self.phi.len() - 1
                );
            }
            return 0.0;
        }
        let ln: f64 = self.ln_fact[s] - alpha.iter().map(|&a| self.ln_fact[a]).sum::<f64>();
        ln.exp() * self.phi[s]
    }

    /// Pointwise chaos coefficient `kappa_alpha(x)` (before projection).
    pub fn pointwise(&self, alpha: &[usize]) -> Vec<f64> {
        let c = self.prefactor(alpha);
        (0..self.n)
            .map(|i| {
                if c == 0.0 {
                    return 0.0;
                }
                let gx = &self.g[i * self.m..(i + 1) * self.m];
                c * monomial(gx, alpha)
            })
            .collect()
    }
}

fn monomial(gx: &[f64], alpha: &[usize]) -> f64 {
    gx.iter()
        .zip(alpha)
        .filter(|(_, &a)| a > 0)
        .map(|(x, &a)| x.powi(a as i32))
        .product()
}

impl Evaluator for PceEvaluator {
    fn modes(&self) -> Vec<usize> {
        self.modes.clone()
    }

    fn outputs(&self) -> usize {
        self.l
    }

    fn eval(&self, alpha: &[usize], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let c = self.prefactor(alpha);
        if c != 0.0 {
            for i in 0..self.n {
                let gx = &self.g[i * self.m..(i + 1) * self.m];
                let f = c * monomial(gx, alpha);
                for (o, w) in out.iter_mut().zip(&self.wv[i * self.l..(i + 1) * self.l]) {
                    *o += f * w;
                }
            }
        }
        if alpha.iter().all(|&a| a == 0) {
            for (o, p) in out.iter_mut().zip(&self.mean_proj) {
                *o -= p;
            }
        }
    }
}

/// Attaches the spatial block `[kappa_bar, v_1..v_L]` and a zero-index channel
/// to the parametric block TT of `kappa~` (leading rank `L`).
///
/// The result has modes `(N, n_1, .., n_M)` and element
/// `kappa_alpha(x) = kappa_bar(x) delta_{alpha,0} + sum_l v_l(x) kappa~_alpha(l)`.
pub fn build_kappa_tt(param: &TtTensor, kle: &KleBasis) -> Result<TtTensor> {
    let l = kle.l();
    if param.boundary_rank() != l {
        return Err(Error::Shape(format!(
            "parametric part has leading rank {}, expected L = {l}",
            param.boundary_rank()
        )));
    }
    let n = kle.len();
    let spatial = Core::from_fn(1, n, l + 1, |_, x, c| if c == 0 { kle.mean[x] } else { kle.v[(x, c - 1)] });
    let mut cores = vec![spatial];
    let d = param.ndim();
    for (k, c) in param.cores().iter().enumerate() {
        let (rl, nk, rr) = (c.left_rank(), c.mode(), c.right_rank());
        let last = k + 1 == d;
        let new_r = if last { 1 } else { rr + 1 };
        // channel 0 on both sides is the delta_{alpha_k, 0} chain
        let core = Core::from_fn(rl + 1, nk, new_r, |s, a, t| {
            if s == 0 {
                if t == 0 && a == 0 {
                    1.0
                } else {
                    0.0
                }
            } else if last {
                c.get(s - 1, a, t)
            } else if t == 0 {
                0.0
            } else {
                c.get(s - 1, a, t - 1)
            }
        });
        cores.push(core);
    }
    TtTensor::new(cores)
}

/// Direct coefficients `kappa_alpha(x)` on an explicit set, as an `N x #set` matrix
/// (column order follows the set's positions).
pub fn sparse_pce_direct(kle: &KleBasis, phi: &TransformPhi, set: &MultiIndexSet) -> Result<DMatrix<f64>> {
    let n = kle.len();
    let size = n.saturating_mul(set.len());
    if size > DENSE_LIMIT {
        return Err(Error::Guard {
            what: "direct coefficient array",
            size,
            limit: DENSE_LIMIT,
        });
    }
    let limits = vec![set.max_degree(); kle.m()];
    let ev = PceEvaluator::new(kle, phi, &limits)?;
    let mut out = DMatrix::zeros(n, set.len());
    let mut kt = vec![0.0; kle.l()];
    for (j, alpha) in set.iter().enumerate() {
        ev.eval(&alpha, &mut kt);
        let mut col = out.column_mut(j);
        if alpha.iter().all(|&a| a == 0) {
            for (x, v) in col.iter_mut().enumerate() {
                *v = kle.mean[x];
            }
        }
        for (ell, &c) in kt.iter().enumerate() {
            col += kle.v.column(ell) * c;
        }
    }
    Ok(out)
}
