use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;

use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Element stiffness of one P1 triangle with unit coefficient.
fn element_stiffness(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let p = mesh.triangles[t].map(|v| mesh.nodes[v]);
    let area = mesh.area(t);
    // gradients of the barycentric coordinates, times 2*area
    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    k
}

fn triplets(mesh: &Mesh, coeff: &[f64], constrained: bool) -> Vec<(usize, usize, f64)> {
    let per_element: Vec<Vec<(usize, usize, f64)>> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangles[t];
            let c = (coeff[tri[0]] + coeff[tri[1]] + coeff[tri[2]]) / 3.0;
            let k = element_stiffness(mesh, t);
            let mut out = Vec::with_capacity(9);
            for i in 0..3 {
                for j in 0..3 {
                    let (a, b) = if constrained {
                        match (mesh.dof(tri[i]), mesh.dof(tri[j])) {
                            (Some(a), Some(b)) => (a, b),
                            _ => continue,
                        }
                    } else {
                        (tri[i], tri[j])
                    };
                    out.push((a, b, c * k[i][j]));
                }
            }
            out
        })
        .collect();
    per_element.concat()
}

fn to_csr(n: usize, trip: Vec<(usize, usize, f64)>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for (i, j, v) in trip {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

/// P1 stiffness `int c grad phi_i . grad phi_j` on the interior unknowns, with `c`
/// given at the nodes and averaged over each triangle.
pub fn assemble_spatial(mesh: &Mesh, coeff: &[f64]) -> Result<CsrMatrix<f64>> {
    check_field(mesh, coeff)?;
    Ok(to_csr(mesh.num_dofs(), triplets(mesh, coeff, true)))
}

/// Same as [`assemble_spatial`] over all nodes, before eliminating the boundary.
pub fn assemble_unconstrained(mesh: &Mesh, coeff: &[f64]) -> Result<CsrMatrix<f64>> {
    check_field(mesh, coeff)?;
    Ok(to_csr(mesh.num_nodes(), triplets(mesh, coeff, false)))
}

fn check_field(mesh: &Mesh, coeff: &[f64]) -> Result<()> {
    if coeff.len() != mesh.num_nodes() {
        return Err(Error::Shape(format!(
            "coefficient has {} values for {} nodes",
            coeff.len(),
            mesh.num_nodes()
        )));
    }
    Ok(())
}

/// Load vector `int f phi_i` on the interior unknowns, using the edge-midpoint rule.
pub fn assemble_load(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_dofs()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|v| mesh.nodes[v]);
        let mid = |a: usize, b: usize| f([(p[a][0] + p[b][0]) / 2.0, (p[a][1] + p[b][1]) / 2.0]);
        let m = [mid(1, 2), mid(2, 0), mid(0, 1)];
        let a = mesh.area(t) / 3.0;
        for i in 0..3 {
            if let Some(d) = mesh.dof(tri[i]) {
                // phi_i is 1/2 at the two adjacent edge midpoints, 0 at the opposite one
                out[d] += a * 0.5 * (m[(i + 1) % 3] + m[(i + 2) % 3]);
            }
        }
    }
    out
}

/// Stiffness matrices of the coefficient channels and the deterministic load.
#[derive(Clone, Debug)]
pub struct StiffnessSet {
    /// `K_0` (mean channel) followed by `K_1..K_L`.
    pub k: Vec<CsrMatrix<f64>>,
    pub f0: Vec<f64>,
}

impl StiffnessSet {
    /// Assembles one matrix per nodal field (columns of `fields`).
    pub fn assemble(mesh: &Mesh, fields: &DMatrix<f64>, f0: Vec<f64>) -> Result<Self> {
        let k = fields
            .column_iter()
            .map(|c| assemble_spatial(mesh, c.as_slice()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { k, f0 })
    }

    pub fn dofs(&self) -> usize {
        self.f0.len()
    }

    pub fn channels(&self) -> usize {
        self.k.len()
    }

    /// Writes `K_l` in Matrix Market coordinate format.
    pub fn write_matrix_market(&self, l: usize, path: impl AsRef<std::path::Path>) -> Result<()> {
        nalgebra_sparse::io::save_to_matrix_market_file(&self.k[l], path)?;
        Ok(())
    }
}

pub fn csr_to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplet_iter() {
        d[(i, j)] += v;
    }
    d
}

pub fn csr_mul(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let v = a * &DVector::from_column_slice(x);
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::mesh::Domain;
    use crate::tt::TtOperator;

    #[test]
    fn constant_coefficient_is_five_point_laplacian() {
        let mesh = Mesh::build(Domain::Square, 2).unwrap();
        let k = csr_to_dense(&assemble_spatial(&mesh, &vec![1.0; mesh.num_nodes()]).unwrap());
        let lap = TtOperator::laplacian(2, 7).unwrap().full().unwrap();
        assert!((&k - lap).amax() < 1e-12);
        let k2 = csr_to_dense(&assemble_spatial(&mesh, &vec![2.0; mesh.num_nodes()]).unwrap());
        assert_eq!(k2, k * 2.0);
    }

    #[test]
    fn random_coefficient_symmetric_zero_row_sums() {
        let mesh = Mesh::build(Domain::LShape, 2).unwrap();
        let c: Vec<f64> = (0..mesh.num_nodes()).map(|i| 1.0 + ((i * 37) % 11) as f64 / 7.0).collect();
        let k = csr_to_dense(&assemble_unconstrained(&mesh, &c).unwrap());
        assert!((&k - k.transpose()).amax() < 1e-14);
        for i in 0..k.nrows() {
            assert!(k.row(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn unit_load() {
        let mesh = Mesh::build(Domain::Square, 1).unwrap();
        let f = assemble_load(&mesh, |_| 1.0);
        for (d, &v) in mesh.interior().iter().zip(&f) {
            let patch: f64 = mesh
                .triangles
                .iter()
                .enumerate()
                .filter(|(_, t)| t.contains(d))
                .map(|(t, _)| mesh.area(t))
                .sum();
            assert!((v - patch / 3.0).abs() < 1e-15);
        }
        assert!(assemble_load(&mesh, |_| 0.0).iter().all(|&v| v == 0.0));
    }
}
