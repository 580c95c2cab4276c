use std::collections::HashMap;

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// `[-1, 1]^2`
    Square,
    /// `[-1, 1]^2` without the quadrant `[0, 1] x [-1, 0]`.
    LShape,
}

/// Structured P1 triangulation with Dirichlet conditions on the whole boundary.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Interior unknown number of each node.
    dof: Vec<Option<usize>>,
    interior: Vec<usize>,
    /// Cells per half side.
    pub cells: usize,
}

impl Mesh {
    /// Grid of `2^(refinement+1) + 1` nodes per side, two triangles per cell.
    pub fn build(domain: Domain, refinement: u32) -> Result<Self> {
        if refinement > 12 {
            return Err(Error::Invalid(format!("refinement {refinement} is too fine")));
        }
        Self::with_cells(domain, 1 << refinement)
    }

    /// Grid with `k` cells on each half side (spacing `1/k`).
    pub fn with_cells(domain: Domain, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid("a mesh needs at least one cell per half side".into()));
        }
        let n = 2 * k + 1;
        let h = 1.0 / k as f64;
        let keep_cell = |i: usize, j: usize| match domain {
            Domain::Square => true,
            // cell (i, j) spans [x_i, x_{i+1}] x [y_j, y_{j+1}]; drop x > 0, y < 0
            Domain::LShape => !(i >= k && j < k),
        };
        let mut id = HashMap::new();
        let mut nodes = Vec::new();
        let mut node = |i: usize, j: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
            *id.entry((i, j)).or_insert_with(|| {
                nodes.push([-1.0 + i as f64 * h, -1.0 + j as f64 * h]);
                nodes.len() - 1
            })
        };
        // number nodes row by row (x fastest) so interior dofs follow the same order
        let mut present = vec![false; n * n];
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                if keep_cell(i, j) {
                    for (a, b) in [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)] {
                        present[a + n * b] = true;
                    }
                }
            }
        }
        for j in 0..n {
            for i in 0..n {
                if present[i + n * j] {
                    node(i, j, &mut nodes);
                }
            }
        }
        let mut triangles = Vec::new();
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                if !keep_cell(i, j) {
                    continue;
                }
                let a = node(i, j, &mut nodes);
                let b = node(i + 1, j, &mut nodes);
                let c = node(i, j + 1, &mut nodes);
                let d = node(i + 1, j + 1, &mut nodes);
                triangles.push([a, b, d]);
                triangles.push([a, d, c]);
            }
        }
        // a node is interior when all four surrounding cells exist
        let cell_ok = |i: isize, j: isize| {
            i >= 0 && j >= 0 && (i as usize) < n - 1 && (j as usize) < n - 1 && keep_cell(i as usize, j as usize)
        };
        let mut boundary = vec![true; nodes.len()];
        for j in 0..n {
            for i in 0..n {
                if let Some(&v) = id.get(&(i, j)) {
                    let (ii, jj) = (i as isize, j as isize);
                    boundary[v] = !(cell_ok(ii - 1, jj - 1)
                        && cell_ok(ii, jj - 1)
                        && cell_ok(ii - 1, jj)
                        && cell_ok(ii, jj));
                }
            }
        }
        let mut dof = vec![None; nodes.len()];
        let mut interior = Vec::new();
        for (v, &b) in boundary.iter().enumerate() {
            if !b {
                dof[v] = Some(interior.len());
                interior.push(v);
            }
        }
        Ok(Self {
            nodes,
            triangles,
            boundary,
            dof,
            interior,
            cells: k,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of interior unknowns `N`.
    pub fn num_dofs(&self) -> usize {
        self.interior.len()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.dof[node]
    }

    /// Node of each interior unknown.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.nodes[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Lumped mass: each node collects a third of the area of its triangles.
    pub fn lumped_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = self.area(t) / 3.0;
            for &v in tri {
                w[v] += a;
            }
        }
        w
    }

    /// Interior node nearest to `p`.
    pub fn nearest_dof(&self, p: [f64; 2]) -> usize {
        let d = |v: usize| {
            let q = self.nodes[v];
            (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)
        };
        (0..self.interior.len())
            .min_by(|&a, &b| d(self.interior[a]).total_cmp(&d(self.interior[b])))
            .expect("mesh has interior nodes")
    }

    /// Edges with the number of triangles that contain them.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut e = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *e.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        e
    }
}
