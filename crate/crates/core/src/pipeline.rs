//! The three-stage stochastic Galerkin experiment: coefficient expansion,
//! operator assembly and solution, on both the TT and the explicit-set path.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::cross::{cross, CrossOptions, CrossResult};
use crate::error::{Error, Result};
use crate::galerkin::{
    assemble_load, assemble_operator_dense, assemble_operator_tt, assemble_rhs, assemble_spatial, solve_dense,
    Domain, GalerkinSystemTt, Mesh, Pcg, SolveResult, StiffnessSet, TtSolver, ORACLE_LIMIT,
};
use crate::pce::{
    build_kappa_tt, factorial, sparse_pce_direct, BetaMarginal, Correlation, FieldModel, HermiteTools, KleBasis,
    MultiIndexSet, PceEvaluator, TransformPhi,
};
use crate::stats::coefficient;
use crate::tt::{TtOperator, TtTensor};

/// Largest number of mesh nodes for which the dense KLE covariance is formed.
pub const KLE_NODE_LIMIT: usize = 5000;

/// Random coefficient, mesh and discretization orders.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    pub domain: Domain,
    /// Mesh with `2^refinement` cells per half side.
    pub refinement: u32,
    pub correlation: Correlation,
    pub marginal: BetaMarginal,
    /// Gaussian KLE terms.
    #[serde(alias = "M")]
    pub m: usize,
    /// Coefficient KLE terms.
    #[serde(alias = "L")]
    pub l: usize,
    /// Solution order; the coefficient is expanded to order `2p`.
    pub p: usize,
    /// Hermite truncation of the transform.
    #[serde(alias = "Q")]
    pub q: usize,
    /// Cross approximation tolerance.
    pub eps: f64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            domain: Domain::LShape,
            refinement: 3,
            correlation: Correlation::Gaussian { sigma: 0.3 },
            marginal: BetaMarginal::default(),
            m: 5,
            l: 6,
            p: 3,
            q: 24,
            eps: 1e-4,
        }
    }
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Invalid(format!("cross eps {} outside (0, 1)", self.eps)));
        }
        if self.m == 0 || self.l == 0 {
            return Err(Error::Invalid("M and L must be positive".into()));
        }
        let sigma = match self.correlation {
            Correlation::Gaussian { sigma } | Correlation::Exponential { sigma } => sigma,
        };
        if !(sigma > 0.0) {
            return Err(Error::Invalid(format!("correlation length {sigma} must be positive")));
        }
        let BetaMarginal { a, b, shift } = self.marginal;
        if !(a > 0.0 && b > 0.0 && shift.is_finite()) {
            return Err(Error::Invalid(format!("beta marginal ({a}, {b}) + {shift} is not valid")));
        }
        if self.q < 1 {
            return Err(Error::Invalid("transform truncation Q must be at least 1".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> FieldModel {
        FieldModel {
            correlation: self.correlation,
            marginal: self.marginal,
            m: self.m,
            l: self.l,
            q: self.q,
        }
    }

    /// Order of the coefficient expansion needed for an exact Galerkin operator.
    pub fn coefficient_order(&self) -> usize {
        2 * self.p
    }
}

/// Iterative solver settings.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            max_iter: 200,
        }
    }
}

impl SolverSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Invalid(format!("solver eps {} outside (0, 1)", self.eps)));
        }
        if self.max_iter == 0 {
            return Err(Error::Invalid("solver needs at least one iteration".into()));
        }
        Ok(())
    }

    pub fn pcg(&self) -> Pcg {
        Pcg::new(self.eps, self.max_iter)
    }
}

/// Mesh and coefficient expansion shared by all stages.
pub struct Problem {
    pub spec: FieldSpec,
    pub mesh: Mesh,
    pub kle: KleBasis,
    pub phi: TransformPhi,
}

impl Problem {
    pub fn new(spec: &FieldSpec) -> Result<Self> {
        spec.validate()?;
        let mesh = Mesh::build(spec.domain, spec.refinement)?;
        if mesh.num_nodes() > KLE_NODE_LIMIT {
            return Err(Error::Guard {
                what: "dense KLE covariance",
                size: mesh.num_nodes() * mesh.num_nodes(),
                limit: KLE_NODE_LIMIT * KLE_NODE_LIMIT,
            });
        }
        let (kle, phi) = KleBasis::build(&mesh.nodes, &mesh.lumped_weights(), &spec.model())?;
        Ok(Self {
            spec: spec.clone(),
            mesh,
            kle,
            phi,
        })
    }

    /// Interior unknowns `N`.
    pub fn dofs(&self) -> usize {
        self.mesh.num_dofs()
    }

    pub fn cross_options(&self, seed: u64) -> CrossOptions {
        CrossOptions {
            seed,
            ..CrossOptions::with_eps(self.spec.eps)
        }
    }

    /// TT coefficient `kappa(x, alpha)` on the full set of order `2p`.
    pub fn expand_tt(&self, opts: &CrossOptions) -> Result<(TtTensor, CrossResult)> {
        let limits = vec![self.spec.coefficient_order(); self.spec.m];
        let ev = PceEvaluator::new(&self.kle, &self.phi, &limits)?;
        let res = cross(&ev, opts)?;
        let kappa = build_kappa_tt(&res.tt, &self.kle)?;
        Ok((kappa, res))
    }

    /// Direct coefficients on an explicit set, `nodes x #set`.
    pub fn expand_direct(&self, set: &MultiIndexSet) -> Result<DMatrix<f64>> {
        sparse_pce_direct(&self.kle, &self.phi, set)
    }

    pub fn load(&self) -> Vec<f64> {
        assemble_load(&self.mesh, |_| 1.0)
    }

    /// Stiffness matrices of the spatial channels of a coefficient train.
    pub fn stiffness(&self, kappa: &TtTensor) -> Result<StiffnessSet> {
        let c0 = kappa.core(0);
        if c0.left_rank() != 1 || c0.mode() != self.mesh.num_nodes() {
            return Err(Error::Shape(format!(
                "coefficient spatial block {}x{}x{} does not match {} mesh nodes",
                c0.left_rank(),
                c0.mode(),
                c0.right_rank(),
                self.mesh.num_nodes()
            )));
        }
        let fields = DMatrix::from_column_slice(c0.mode(), c0.right_rank(), c0.data());
        StiffnessSet::assemble(&self.mesh, &fields, self.load())
    }

    /// Galerkin operator and right-hand side on the full set of order `p`.
    pub fn assemble_tt(&self, kappa: &TtTensor) -> Result<(TtOperator, TtTensor)> {
        let stiff = self.stiffness(kappa)?;
        let tools = HermiteTools::new(self.spec.p);
        let op = assemble_operator_tt(&stiff, kappa, &tools)?;
        let rhs = assemble_rhs(&stiff, self.spec.m, self.spec.p)?;
        Ok((op, rhs))
    }

    /// Explicit Galerkin system for `sol_set` from direct coefficients `coeffs`
    /// (`nodes x #nu_set`, see [`Problem::expand_direct`]).
    pub fn assemble_explicit(
        &self,
        sol_set: &MultiIndexSet,
        nu_set: &MultiIndexSet,
        coeffs: &DMatrix<f64>,
    ) -> Result<ExplicitSystem> {
        let size = self.dofs().saturating_mul(sol_set.len());
        if size > ORACLE_LIMIT {
            return Err(Error::Guard {
                what: "explicit Galerkin matrix",
                size,
                limit: ORACLE_LIMIT,
            });
        }
        if coeffs.shape() != (self.mesh.num_nodes(), nu_set.len()) {
            return Err(Error::Shape(format!(
                "{}x{} coefficients for {} nodes and {} indices",
                coeffs.nrows(),
                coeffs.ncols(),
                self.mesh.num_nodes(),
                nu_set.len()
            )));
        }
        let p = sol_set.max_degree();
        let kmats = coeffs
            .column_iter()
            .map(|c| assemble_spatial(&self.mesh, c.as_slice()))
            .collect::<Result<Vec<_>>>()?;
        let matrix = assemble_operator_dense(&kmats, nu_set, sol_set, &HermiteTools::new(p))?;
        let zero = sol_set
            .position(&vec![0; sol_set.dims()])
            .ok_or_else(|| Error::Invalid("solution set lacks the zero index".into()))?;
        let n = self.dofs();
        let mut rhs = vec![0.0; n * sol_set.len()];
        rhs[zero * n..(zero + 1) * n].copy_from_slice(&self.load());
        Ok(ExplicitSystem {
            set: sol_set.clone(),
            matrix,
            rhs,
            dofs: n,
        })
    }
}

/// Explicit Galerkin matrix on `(x, alpha)`, unknowns ordered `x + N * position(alpha)`.
pub struct ExplicitSystem {
    pub set: MultiIndexSet,
    pub matrix: nalgebra_sparse::CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    pub dofs: usize,
}

impl ExplicitSystem {
    pub fn solve(&self) -> Result<ExplicitSolution> {
        let x = solve_dense(&self.matrix, &self.rhs)?;
        Ok(ExplicitSolution {
            set: self.set.clone(),
            u: DMatrix::from_vec(self.dofs, self.set.len(), x),
        })
    }
}

/// Solution coefficients on an explicit set, `N x #set`.
#[derive(Clone, Debug)]
pub struct ExplicitSolution {
    pub set: MultiIndexSet,
    pub u: DMatrix<f64>,
}

impl ExplicitSolution {
    pub fn mean(&self) -> Vec<f64> {
        let zero = self.set.position(&vec![0; self.set.dims()]).expect("set contains zero");
        self.u.column(zero).iter().copied().collect()
    }

    /// `sum_{alpha != 0} alpha! u_alpha u_alpha^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.u.nrows();
        let mut scaled = DMatrix::zeros(n, self.set.len());
        for (j, alpha) in self.set.iter().enumerate() {
            if alpha.iter().any(|&a| a > 0) {
                let w: f64 = alpha.iter().map(|&a| factorial(a)).product();
                scaled.set_column(j, &(self.u.column(j) * w.sqrt()));
            }
        }
        &scaled * scaled.transpose()
    }

    /// Writes the coefficients with header `alpha,dof,value` (alpha as space-separated orders).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "alpha,dof,value")?;
        for (j, alpha) in self.set.iter().enumerate() {
            let label = alpha_label(&alpha);
            for x in 0..self.u.nrows() {
                writeln!(out, "{label},{x},{:e}", self.u[(x, j)])?;
            }
        }
        Ok(())
    }
}

pub fn alpha_label(alpha: &[usize]) -> String {
    alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
}

/// Solves a TT Galerkin system with the mean-based preconditioner taken from the operator.
pub fn solve_tt(op: TtOperator, rhs: TtTensor, solver: &Pcg) -> Result<SolveResult> {
    let sys = GalerkinSystemTt::from_operator(op, rhs)?;
    solver.solve(&sys)
}

/// Per-index relative discrepancy between a coefficient train and direct values.
#[derive(Clone, Debug)]
pub struct Discrepancy {
    /// `(alpha, ||a_alpha - b_alpha|| / ||b_alpha||)`, zero norms reported as absolute.
    pub rows: Vec<(Vec<usize>, f64)>,
    /// `||a - b||_F / ||b||_F` over all shared indices.
    pub total: f64,
    /// Largest `|a - b|` over all entries, relative to the largest `|b|`.
    pub max: f64,
}

impl Discrepancy {
    /// Header `alpha,relative_error`, then a final `all` row.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "alpha,relative_error")?;
        for (alpha, e) in &self.rows {
            writeln!(out, "{},{e:e}", alpha_label(alpha))?;
        }
        writeln!(out, "all,{:e}", self.total)?;
        Ok(())
    }
}

/// Compares `u(x, alpha)` (TT) with the columns of `direct` on `set`.
pub fn compare_coefficients(u: &TtTensor, direct: &DMatrix<f64>, set: &MultiIndexSet) -> Result<Discrepancy> {
    if direct.ncols() != set.len() {
        return Err(Error::Shape(format!("{} columns for {} indices", direct.ncols(), set.len())));
    }
    let mut rows = Vec::with_capacity(set.len());
    let (mut num, mut den, mut worst, mut top) = (0.0, 0.0, 0.0f64, 0.0f64);
    for (j, alpha) in set.iter().enumerate() {
        let a = DVector::from_vec(coefficient(u, &alpha)?);
        let b = direct.column(j);
        let d = (&a - b).norm();
        let bn = b.norm();
        rows.push((alpha, if bn > 0.0 { d / bn } else { d }));
        num += d * d;
        den += bn * bn;
        worst = worst.max((&a - b).amax());
        top = top.max(b.amax());
    }
    Ok(Discrepancy {
        rows,
        total: if den > 0.0 { (num / den).sqrt() } else { num.sqrt() },
        max: if top > 0.0 { worst / top } else { worst },
    })
}

/// `||a - b||_F / ||b||_F`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let nb = b.norm();
    if nb == 0.0 {
        (a - b).norm()
    } else {
        (a - b).norm() / nb
    }
}
