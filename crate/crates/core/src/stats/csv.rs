use std::io::Write;

use super::functional::{Characteristic, Interval};
use super::moments::CovarianceFactor;
use super::sobol::SobolIndex;
use crate::error::{Error, Result};
use crate::galerkin::Mesh;

/// Nodal field on the interior unknowns, header `x,y,value`.
pub fn write_field<W: Write>(mut out: W, mesh: &Mesh, values: &[f64]) -> Result<()> {
    if values.len() != mesh.num_dofs() {
        return Err(Error::Shape(format!("{} values for {} unknowns", values.len(), mesh.num_dofs())));
    }
    writeln!(out, "x,y,value")?;
    for (&v, &node) in values.iter().zip(mesh.interior()) {
        let [x, y] = mesh.nodes[node];
        writeln!(out, "{x},{y},{v:e}")?;
    }
    Ok(())
}

/// Dense covariance, header `i,j,value` (row-major, guarded).
pub fn write_covariance<W: Write>(mut out: W, cov: &CovarianceFactor) -> Result<()> {
    let c = cov.matrix()?;
    writeln!(out, "i,j,value")?;
    for i in 0..c.nrows() {
        for j in 0..c.ncols() {
            writeln!(out, "{i},{j},{:e}", c[(i, j)])?;
        }
    }
    Ok(())
}

/// Header `subset,D_q,S_q` with the spatially aggregated partial variance and index.
pub fn write_sobol<W: Write>(mut out: W, rows: &[SobolIndex]) -> Result<()> {
    writeln!(out, "subset,D_q,S_q")?;
    for r in rows {
        writeln!(out, "{},{:e},{:e}", r.spec.label(), r.partial.iter().sum::<f64>(), r.aggregate)?;
    }
    Ok(())
}

/// Header `interval,count,total`.
pub fn write_frequency<W: Write>(mut out: W, rows: &[(Interval, &Characteristic)]) -> Result<()> {
    writeln!(out, "interval,count,total")?;
    for (i, c) in rows {
        let total: usize = c.chi.modes().iter().product();
        writeln!(out, "{i},{},{total}", c.frequency())?;
    }
    Ok(())
}
