use std::io::Write;

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CscMatrix, CsrMatrix};

use super::assembly::StiffnessSet;
use crate::error::{Error, Result};
use crate::pce::factorial;
use crate::tt::{Core, TtOperator, TtTensor};

/// `P = K_0^{-1} (x) diag(1/alpha_1!) (x) .. (x) diag(1/alpha_M!)`, the inverse of
/// the mean part of the Galerkin operator.
pub struct MeanPreconditioner {
    chol: CscCholesky<f64>,
    n: usize,
}

impl MeanPreconditioner {
    pub fn new(k0: &CsrMatrix<f64>) -> Result<Self> {
        let csc = CscMatrix::from(k0);
        let chol = CscCholesky::factor(&csc)
            .map_err(|e| Error::Invalid(format!("mean stiffness is not positive definite: {e}")))?;
        Ok(Self { chol, n: k0.nrows() })
    }

    /// Applies `P`; TT ranks are unchanged.
    pub fn apply(&self, u: &TtTensor) -> Result<TtTensor> {
        let mut cores = self.apply_spatial(u)?.cores().to_vec();
        for c in cores.iter_mut().skip(1) {
            let inv: Vec<f64> = (0..c.mode()).map(|a| 1.0 / factorial(a)).collect();
            *c = Core::from_fn(c.left_rank(), c.mode(), c.right_rank(), |s, a, t| inv[a] * c.get(s, a, t));
        }
        TtTensor::new(cores)
    }

    /// Applies `K_0^{-1}` to the spatial block only, which is `P` in the normalized Hermite basis.
    pub fn apply_spatial(&self, u: &TtTensor) -> Result<TtTensor> {
        let c0 = u.core(0);
        if c0.left_rank() != 1 || c0.mode() != self.n {
            return Err(Error::Shape(format!(
                "preconditioner expects a spatial block 1 x {} x r, got {}x{}x{}",
                self.n,
                c0.left_rank(),
                c0.mode(),
                c0.right_rank()
            )));
        }
        let r = c0.right_rank();
        let b = DMatrix::from_column_slice(self.n, r, c0.data());
        let x = self.chol.solve(&b);
        u.with_core(0, Core::new(1, self.n, r, x.as_slice().to_vec())?)
    }
}

/// Stochastic Galerkin system in TT form.
pub struct GalerkinSystemTt {
    pub op: TtOperator,
    pub rhs: TtTensor,
    pub precond: MeanPreconditioner,
}

impl GalerkinSystemTt {
    /// Takes the preconditioner from the mean channel `K_0` of the operator's spatial block.
    pub fn from_operator(op: TtOperator, rhs: TtTensor) -> Result<Self> {
        let k0 = op.cores()[0].block(0, 0);
        let csr = CsrMatrix::from(&nalgebra_sparse::CooMatrix::from(&k0));
        let stiff = StiffnessSet {
            k: vec![csr],
            f0: Vec::new(),
        };
        Self::new(op, rhs, &stiff)
    }

    pub fn new(op: TtOperator, rhs: TtTensor, stiff: &StiffnessSet) -> Result<Self> {
        if op.col_modes() != rhs.modes() {
            return Err(Error::Shape(format!(
                "operator columns {:?} vs right-hand side {:?}",
                op.col_modes(),
                rhs.modes()
            )));
        }
        Ok(Self {
            precond: MeanPreconditioner::new(&stiff.k[0])?,
            op,
            rhs,
        })
    }
}

/// One logged iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    pub max_rank: usize,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub u: TtTensor,
    pub converged: bool,
    pub iterations: usize,
    /// Final `||f - K u|| / ||f||` in the orthonormal Hermite basis, computed in TT arithmetic.
    pub residual: f64,
    pub history: Vec<IterationRecord>,
}

impl SolveResult {
    /// CSV with header `iteration,residual,max_rank`.
    pub fn write_log<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,residual,max_rank")?;
        for r in &self.history {
            writeln!(out, "{},{:e},{}", r.iteration, r.residual, r.max_rank)?;
        }
        Ok(())
    }
}

/// Linear solvers for TT Galerkin systems.
pub trait TtSolver {
    fn solve(&self, sys: &GalerkinSystemTt) -> Result<SolveResult>;
}

/// Preconditioned conjugate gradients in TT arithmetic, every result rounded at
/// `rounding * eps`.
#[derive(Clone, Debug)]
pub struct Pcg {
    pub eps: f64,
    pub max_iter: usize,
    pub rounding: f64,
    pub trace: bool,
}

/// Default ratio between the rounding tolerance and the residual tolerance.
pub const ROUNDING_RATIO: f64 = 1e-2;

/// Iterations without a new best residual after which PCG gives up.
pub const STALL_WINDOW: usize = 20;

impl Pcg {
    pub fn new(eps: f64, max_iter: usize) -> Self {
        Self {
            eps,
            max_iter,
            rounding: ROUNDING_RATIO,
            trace: false,
        }
    }

    fn round(&self, u: &TtTensor) -> TtTensor {
        u.round(self.rounding * self.eps).0
    }
}

/// `sqrt(a!)` for `a < n`, the norms of the Hermite polynomials.
fn hermite_norms(n: usize) -> Vec<f64> {
    (0..n).map(|a| factorial(a).sqrt()).collect()
}

/// Multiplies every parametric block entry with mode index `a` by `w(norms[a])`.
fn scale_parametric(u: &TtTensor, w: impl Fn(f64) -> f64) -> Result<TtTensor> {
    let mut cores = u.cores().to_vec();
    for c in cores.iter_mut().skip(1) {
        let d: Vec<f64> = hermite_norms(c.mode()).into_iter().map(&w).collect();
        *c = Core::from_fn(c.left_rank(), c.mode(), c.right_rank(), |s, a, t| d[a] * c.get(s, a, t));
    }
    TtTensor::new(cores)
}

/// `D^{-1/2} K D^{-1/2}` with `D = I (x) diag(alpha!)`.
fn normalize_operator(op: &TtOperator) -> Result<TtOperator> {
    let mut cores = op.cores().to_vec();
    for c in cores.iter_mut().skip(1) {
        let (di, dj) = (hermite_norms(c.rows()), hermite_norms(c.cols()));
        for t in 0..c.right_rank() {
            for j in 0..c.cols() {
                for i in 0..c.rows() {
                    for s in 0..c.left_rank() {
                        c.set(s, i, j, t, c.get(s, i, j, t) / (di[i] * dj[j]));
                    }
                }
            }
        }
    }
    TtOperator::new(cores)
}

impl TtSolver for Pcg {
    /// Runs in the orthonormal Hermite basis `w_alpha = sqrt(alpha!) u_alpha`, so rounding
    /// and the residual are measured in the `L^2` norm over the random inputs. There
    /// `P` reduces to `K_0^{-1} (x) I`; the iterates equal those of plain PCG with `P`.
    fn solve(&self, sys: &GalerkinSystemTt) -> Result<SolveResult> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Invalid(format!("solver tolerance {} outside (0, 1)", self.eps)));
        }
        let op = normalize_operator(&sys.op)?;
        let f = scale_parametric(&sys.rhs, |d| 1.0 / d)?;
        let fnorm = f.norm();
        let mut x = TtTensor::zeros(&f.modes());
        let mut history = Vec::new();
        if fnorm == 0.0 {
            return Ok(SolveResult {
                u: x,
                converged: true,
                iterations: 0,
                residual: 0.0,
                history,
            });
        }
        let finish = |x: &TtTensor| scale_parametric(x, |d| 1.0 / d);
        let true_residual = |x: &TtTensor| -> Result<TtTensor> {
            let kx = op.apply_round(x, self.rounding * self.eps)?.0;
            Ok(self.round(&f.sub(&kx)?))
        };
        let mut r = f.clone();
        let mut z = sys.precond.apply_spatial(&r)?;
        let mut p = z.clone();
        let mut rz = r.dot(&z)?;
        let mut best = (f64::INFINITY, x.clone(), 0);
        let mut res = 1.0;
        let mut iterations = 0;
        for it in 1..=self.max_iter {
            iterations = it;
            let q = op.apply_round(&p, self.rounding * self.eps)?.0;
            let pq = p.dot(&q)?;
            if !(pq > 0.0) {
                return Err(Error::Indefinite(pq));
            }
            let a = rz / pq;
            x = self.round(&x.add(&p.scale(a))?);
            r = self.round(&r.sub(&q.scale(a))?);
            res = r.norm() / fnorm;
            if res <= self.eps {
                // confirm against the residual of the rounded iterate
                r = true_residual(&x)?;
                res = r.norm() / fnorm;
            }
            history.push(IterationRecord {
                iteration: it,
                residual: res,
                max_rank: x.max_rank(),
            });
            if self.trace {
                eprintln!("{it},{res:e},{}", x.max_rank());
            }
            if res < best.0 {
                best = (res, x.clone(), it);
            }
            if res <= self.eps {
                return Ok(SolveResult {
                    u: finish(&x)?,
                    converged: true,
                    iterations: it,
                    residual: res,
                    history,
                });
            }
            z = sys.precond.apply_spatial(&r)?;
            let rz_new = r.dot(&z)?;
            let beta = rz_new / rz;
            rz = rz_new;
            p = self.round(&z.add(&p.scale(beta))?);
            if it - best.2 >= STALL_WINDOW {
                break;
            }
        }
        log::warn!("PCG stopped after {iterations} iterations at residual {res:e}");
        Ok(SolveResult {
            residual: best.0,
            u: finish(&best.1)?,
            converged: false,
            iterations,
            history,
        })
    }
}

/// Sparse Cholesky solve of an explicit Galerkin system (oracle path).
pub fn solve_dense(a: &CsrMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let chol = CscCholesky::factor(&CscMatrix::from(a))
        .map_err(|e| Error::Invalid(format!("explicit Galerkin matrix is not positive definite: {e}")))?;
    let x = chol.solve(&DMatrix::from_column_slice(b.len(), 1, b));
    Ok(x.as_slice().to_vec())
}
