use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;
use ttchaos::galerkin::solve_dense;
use ttchaos::pce::MultiIndexSet;
use ttchaos::pipeline::{compare_coefficients, relative_frobenius, solve_tt, ExplicitSolution, Problem};
use ttchaos::stats::{
    self, characteristic, reduce_to_grid, Interval, SobolAnalysis, SobolSpec, SpatialFunctional, ThetaGrid,
};
use ttchaos::{TtOperator, TtTensor};

use crate::artifacts::{read_indexed, read_vector, with_file, write_indexed, write_table, write_vector};
use crate::config::RunConfig;
use crate::error::CliError;

/// Shared state of one invocation.
pub struct Ctx {
    pub cfg: RunConfig,
    pub trace: bool,
    problem: Option<Problem>,
    /// Stages whose iteration stopped before reaching its tolerance.
    pub unconverged: Vec<String>,
    pub timing: Vec<(&'static str, f64)>,
}

impl Ctx {
    pub fn new(cfg: RunConfig, trace: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::artifact(&cfg.out)(e.into()))?;
        Ok(Self {
            cfg,
            trace,
            problem: None,
            unconverged: Vec::new(),
            timing: Vec::new(),
        })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    /// Builds the mesh and field expansion on first use.
    fn init(&mut self) -> Result<(), CliError> {
        if self.problem.is_none() {
            self.problem = Some(Problem::new(&self.cfg.field)?);
        }
        Ok(())
    }

    fn problem(&self) -> &Problem {
        self.problem.as_ref().expect("init runs first")
    }

    /// Coefficient set of the explicit path, total degree `2p`.
    fn nu_set(&self) -> Result<MultiIndexSet, CliError> {
        Ok(MultiIndexSet::sparse(self.cfg.field.m, self.cfg.field.coefficient_order())?)
    }

    /// Solution set of the explicit path, total degree `p`.
    fn sol_set(&self) -> Result<MultiIndexSet, CliError> {
        Ok(MultiIndexSet::sparse(self.cfg.field.m, self.cfg.field.p)?)
    }

    pub fn timed(&mut self, stage: &'static str, f: fn(&mut Self) -> Result<(), CliError>) -> Result<(), CliError> {
        let t = Instant::now();
        f(self)?;
        self.timing.push((stage, t.elapsed().as_secs_f64()));
        Ok(())
    }

    pub fn write_timing(&self) -> Result<(), CliError> {
        let rows: Vec<Vec<String>> = self
            .timing
            .iter()
            .map(|(s, t)| vec![s.to_string(), format!("{t:.3}")])
            .collect();
        write_table(&self.file("timing.csv"), "stage,seconds", &rows)
    }
}

fn load_tt(path: &Path) -> Result<TtTensor, CliError> {
    TtTensor::load(path).map_err(CliError::artifact(path))
}

pub fn expand(ctx: &mut Ctx) -> Result<(), CliError> {
    ctx.init()?;
    let path = ctx.cfg.path;
    let mut rows = Vec::new();
    let kappa = if path.tt() {
        let mut opts = ctx.problem().cross_options(ctx.cfg.seed);
        opts.trace = ctx.trace;
        let (kappa, res) = ctx.problem().expand_tt(&opts)?;
        let file = ctx.file("kappa.ttc");
        kappa.save(&file).map_err(CliError::artifact(&file))?;
        let kle = ctx.file("kle.csv");
        with_file(&kle, |w| ctx.problem().kle.write_csv(w))?;
        println!(
            "expand tt: {} evaluations, max rank {}, overhead {:.2}, held-out error {:.2e}, converged {}",
            res.evaluations,
            kappa.max_rank(),
            res.overhead(),
            res.heldout_error,
            res.converged
        );
        if !res.converged {
            ctx.unconverged.push("expand: cross".into());
        }
        rows.push(vec![
            "tt".into(),
            res.evaluations.to_string(),
            res.validation_evaluations.to_string(),
            res.tt.storage().to_string(),
            format!("{:e}", res.overhead()),
            kappa.max_rank().to_string(),
            format!("{:e}", res.heldout_error),
            res.sweeps.to_string(),
            res.converged.to_string(),
        ]);
        Some(kappa)
    } else {
        None
    };
    if path.sparse() {
        let set = ctx.nu_set()?;
        let coeffs = ctx.problem().expand_direct(&set)?;
        write_indexed(&ctx.file("coefficients_sparse.csv"), "node", &coeffs, &set)?;
        let entries = coeffs.len();
        println!("expand sparse: {} indices, {entries} coefficients", set.len());
        rows.push(vec![
            "sparse".into(),
            entries.to_string(),
            "0".into(),
            entries.to_string(),
            format!("{:e}", 1.0),
            String::new(),
            String::new(),
            String::new(),
            "true".into(),
        ]);
        if let Some(kappa) = &kappa {
            let d = compare_coefficients(kappa, &coeffs, &set)?;
            with_file(&ctx.file("coefficient_discrepancy.csv"), |w| d.write_csv(w))?;
            println!("expand both: coefficient discrepancy {:.2e} (max entry {:.2e})", d.total, d.max);
        }
    }
    write_table(
        &ctx.file("expand.csv"),
        "path,evaluations,validation_evaluations,stored_entries,overhead,max_rank,heldout_error,sweeps,converged",
        &rows,
    )
}

pub fn assemble(ctx: &mut Ctx) -> Result<(), CliError> {
    ctx.init()?;
    let path = ctx.cfg.path;
    let mut rows = Vec::new();
    if path.tt() {
        let kappa = load_tt(&ctx.file("kappa.ttc"))?;
        let (op, rhs) = ctx.problem().assemble_tt(&kappa)?;
        let (fo, fr) = (ctx.file("operator.ttc"), ctx.file("rhs.ttc"));
        op.save(&fo).map_err(CliError::artifact(&fo))?;
        rhs.save(&fr).map_err(CliError::artifact(&fr))?;
        let unknowns: usize = op.col_modes().iter().product();
        let stored: usize = op.cores().iter().map(|c| c.data().len()).sum();
        let max_rank = op.ranks().into_iter().max().unwrap_or(1);
        println!("assemble tt: ranks {:?}, {stored} stored entries", op.ranks());
        rows.push(vec!["tt".into(), unknowns.to_string(), max_rank.to_string(), stored.to_string()]);
    }
    if path.sparse() {
        let (nu, sol) = (ctx.nu_set()?, ctx.sol_set()?);
        let nodes = ctx.problem().mesh.num_nodes();
        let coeffs = read_indexed(&ctx.file("coefficients_sparse.csv"), nodes, &nu)?;
        let sys = ctx.problem().assemble_explicit(&sol, &nu, &coeffs)?;
        let file = ctx.file("operator_sparse.mtx");
        nalgebra_sparse::io::save_to_matrix_market_file(&sys.matrix, &file)
            .map_err(|e| CliError::artifact(&file)(e.into()))?;
        write_vector(&ctx.file("rhs_sparse.csv"), &sys.rhs)?;
        println!("assemble sparse: {} unknowns, {} nonzeros", sys.rhs.len(), sys.matrix.nnz());
        rows.push(vec![
            "sparse".into(),
            sys.rhs.len().to_string(),
            String::new(),
            sys.matrix.nnz().to_string(),
        ]);
    }
    write_table(&ctx.file("assemble.csv"), "path,unknowns,max_rank,stored_entries", &rows)
}

pub fn solve(ctx: &mut Ctx) -> Result<(), CliError> {
    ctx.init()?;
    let path = ctx.cfg.path;
    let mut rows = Vec::new();
    let u = if path.tt() {
        let fo = ctx.file("operator.ttc");
        let op = TtOperator::load(&fo).map_err(CliError::artifact(&fo))?;
        let rhs = load_tt(&ctx.file("rhs.ttc"))?;
        let mut pcg = ctx.cfg.solver.pcg();
        pcg.trace = ctx.trace;
        let sol = solve_tt(op, rhs, &pcg)?;
        let fs = ctx.file("solution.ttc");
        sol.u.save(&fs).map_err(CliError::artifact(&fs))?;
        with_file(&ctx.file("solve_log.csv"), |w| sol.write_log(w))?;
        println!(
            "solve tt: {} iterations, residual {:.2e}, ranks {:?}, converged {}",
            sol.iterations,
            sol.residual,
            sol.u.ranks(),
            sol.converged
        );
        if !sol.converged {
            ctx.unconverged.push("solve: PCG".into());
        }
        rows.push(vec![
            "tt".into(),
            sol.iterations.to_string(),
            format!("{:e}", sol.residual),
            sol.u.max_rank().to_string(),
            sol.converged.to_string(),
        ]);
        Some(sol.u)
    } else {
        None
    };
    if path.sparse() {
        let file = ctx.file("operator_sparse.mtx");
        let coo = nalgebra_sparse::io::load_coo_from_matrix_market_file(&file)
            .map_err(|e| CliError::artifact(&file)(ttchaos::Error::Format(e.to_string())))?;
        let a = CsrMatrix::from(&coo);
        let b = read_vector(&ctx.file("rhs_sparse.csv"))?;
        let x = solve_dense(&a, &b)?;
        let ax = &a * &DMatrix::from_column_slice(x.len(), 1, &x);
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rn = ax.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let residual = if bn > 0.0 { rn / bn } else { rn };
        let set = ctx.sol_set()?;
        let n = ctx.problem().dofs();
        let xs = DMatrix::from_vec(n, set.len(), x);
        write_indexed(&ctx.file("solution_sparse.csv"), "dof", &xs, &set)?;
        println!("solve sparse: {} unknowns, residual {residual:.2e}", b.len());
        rows.push(vec![
            "sparse".into(),
            "1".into(),
            format!("{residual:e}"),
            String::new(),
            "true".into(),
        ]);
        if let Some(u) = &u {
            let d = compare_coefficients(u, &xs, &set)?;
            with_file(&ctx.file("solution_discrepancy.csv"), |w| d.write_csv(w))?;
            println!("solve both: solution discrepancy {:.2e}", d.total);
        }
    }
    write_table(&ctx.file("solve.csv"), "path,iterations,residual,max_rank,converged", &rows)
}

pub fn stats(ctx: &mut Ctx) -> Result<(), CliError> {
    ctx.init()?;
    let path = ctx.cfg.path;
    let mut cov_rows = Vec::new();
    let mut tt_cov = None;
    if path.tt() {
        let u = load_tt(&ctx.file("solution.ttc"))?;
        let mesh = &ctx.problem().mesh;
        let mean = stats::mean(&u)?;
        let cov = stats::covariance(&u)?;
        with_file(&ctx.file("mean.csv"), |w| stats::write_field(w, mesh, &mean))?;
        with_file(&ctx.file("variance.csv"), |w| stats::write_field(w, mesh, &cov.variance()))?;
        match &ctx.cfg.stats.reference {
            Some(r) => {
                let reference = stats::covariance(&load_tt(r)?)?;
                let e = stats::covariance_error(&cov, &reference)?;
                println!("stats tt: covariance error vs {} = {e:.3e}", r.display());
                cov_rows.push(vec!["tt".into(), r.display().to_string(), format!("{e:e}")]);
            }
            None => log::info!("no reference solution configured; covariance error vs reference skipped"),
        }
        sobol(ctx, &u)?;
        frequency(ctx, &u)?;
        tt_cov = Some(cov);
    }
    if path.sparse() {
        let set = ctx.sol_set()?;
        let n = ctx.problem().dofs();
        let u = read_indexed(&ctx.file("solution_sparse.csv"), n, &set)?;
        let sol = ExplicitSolution { set, u };
        let cov = sol.covariance();
        let mesh = &ctx.problem().mesh;
        with_file(&ctx.file("mean_sparse.csv"), |w| stats::write_field(w, mesh, &sol.mean()))?;
        let var: Vec<f64> = cov.diagonal().iter().copied().collect();
        with_file(&ctx.file("variance_sparse.csv"), |w| stats::write_field(w, mesh, &var))?;
        if let Some(t) = &tt_cov {
            let e = relative_frobenius(&cov, &t.matrix()?);
            println!("stats both: sparse covariance vs tt = {e:.3e}");
            cov_rows.push(vec!["sparse".into(), "tt".into(), format!("{e:e}")]);
        }
    }
    write_table(&ctx.file("covariance_error.csv"), "solution,reference,relative_error", &cov_rows)
}

fn sobol(ctx: &mut Ctx, u: &TtTensor) -> Result<(), CliError> {
    let m = ctx.cfg.field.m;
    let specs = match &ctx.cfg.stats.sobol {
        Some(sets) => sets.iter().map(|q| SobolSpec::new(q.clone())).collect::<ttchaos::Result<Vec<_>>>()?,
        None => (1..=m).map(|v| SobolSpec::new(vec![v])).collect::<ttchaos::Result<Vec<_>>>()?,
    };
    let mut analysis = SobolAnalysis::new(u)?;
    let rows = specs.iter().map(|s| analysis.index(s)).collect::<ttchaos::Result<Vec<_>>>()?;
    with_file(&ctx.file("sobol.csv"), |w| stats::write_sobol(w, &rows))
}

fn frequency(ctx: &mut Ctx, u: &TtTensor) -> Result<(), CliError> {
    if ctx.cfg.stats.frequency.is_empty() {
        return Ok(());
    }
    let specs = ctx.cfg.stats.frequency.clone();
    let grid = ThetaGrid::uniform(ctx.cfg.field.m, ctx.cfg.stats.grid_nodes, 4.0)?;
    let mut opts = ctx.problem().cross_options(ctx.cfg.seed);
    opts.trace = ctx.trace;
    let mesh = &ctx.problem().mesh;
    let mut rows = Vec::new();
    for spec in &specs {
        let (label, f) = match spec.point {
            Some([x, y]) => {
                let d = mesh.nearest_dof([x, y]);
                (format!("point {x} {y}"), SpatialFunctional::Point(d))
            }
            None => {
                let w = mesh.lumped_weights();
                let wi: Vec<f64> = mesh.interior().iter().map(|&n| w[n]).collect();
                let area: f64 = w.iter().sum();
                (
                    "mean".to_string(),
                    SpatialFunctional::Mean(wi.iter().map(|v| v / area).collect()),
                )
            }
        };
        let surface = reduce_to_grid(u, &f, &grid)?;
        for &[lo, hi] in &spec.intervals {
            let interval = Interval::new(lo, hi)?;
            let chi = characteristic(&surface, interval, &opts)?;
            let total: usize = surface.modes().iter().product();
            rows.push(vec![
                label.clone(),
                interval.to_string(),
                format!("{}", chi.frequency().round()),
                total.to_string(),
                chi.exact.to_string(),
            ]);
        }
    }
    write_table(&ctx.file("frequency.csv"), "functional,interval,count,total,exact", &rows)
}
