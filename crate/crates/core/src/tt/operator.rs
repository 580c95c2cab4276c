use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use super::round::{bond_tolerances, truncate_orthogonal, zero_rounding, RoundOptions, TruncationReport, ZERO_NORM};
use super::tensor::{increment, Core, TtTensor, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::linalg;

/// One 4-way block of an operator train, shape `left x rows x cols x right`.
///
/// Layout: left rank fastest, then row, then column, then right rank.
#[derive(Clone, Debug, PartialEq)]
pub struct OpCore {
    left: usize,
    rows: usize,
    cols: usize,
    right: usize,
    data: Vec<f64>,
}

impl OpCore {
    pub fn new(left: usize, rows: usize, cols: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left * rows * cols * right == 0 || data.len() != left * rows * cols * right {
            return Err(Error::Shape(format!(
                "operator core {left}x{rows}x{cols}x{right} with {} entries",
                data.len()
            )));
        }
        Ok(Self {
            left,
            rows,
            cols,
            right,
            data,
        })
    }

    pub fn zeros(left: usize, rows: usize, cols: usize, right: usize) -> Self {
        Self {
            left,
            rows,
            cols,
            right,
            data: vec![0.0; left * rows * cols * right],
        }
    }

    /// Builds a core from one `rows x cols` matrix per rank pair.
    pub fn from_blocks(
        left: usize,
        right: usize,
        mut block: impl FnMut(usize, usize) -> Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let mut shape: Option<(usize, usize)> = None;
        let mut blocks = Vec::with_capacity(left * right);
        for t in 0..right {
            for s in 0..left {
                let b = block(s, t);
                if let Some(m) = &b {
                    match shape {
                        None => shape = Some(m.shape()),
                        Some(sh) if sh != m.shape() => {
                            return Err(Error::Shape("operator blocks differ in shape".into()))
                        }
                        _ => {}
                    }
                }
                blocks.push(b);
            }
        }
        let (rows, cols) =
            shape.ok_or_else(|| Error::Shape("operator core has no nonzero block".into()))?;
        let mut c = Self::zeros(left, rows, cols, right);
        for t in 0..right {
            for s in 0..left {
                if let Some(m) = &blocks[s + left * t] {
                    for j in 0..cols {
                        for i in 0..rows {
                            c.set(s, i, j, t, m[(i, j)]);
                        }
                    }
                }
            }
        }
        Ok(c)
    }

    pub fn left_rank(&self) -> usize {
        self.left
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn right_rank(&self) -> usize {
        self.right
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, s: usize, i: usize, j: usize, t: usize) -> f64 {
        self.data[s + self.left * (i + self.rows * (j + self.cols * t))]
    }

    #[inline]
    pub fn set(&mut self, s: usize, i: usize, j: usize, t: usize, v: f64) {
        self.data[s + self.left * (i + self.rows * (j + self.cols * t))] = v;
    }

    /// The `rows x cols` matrix for rank pair `(s, t)`.
    pub fn block(&self, s: usize, t: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(s, i, j, t))
    }

    /// Same storage seen as a tensor core with merged mode `i + rows * j`.
    pub fn as_core(&self) -> Core {
        Core::new(self.left, self.rows * self.cols, self.right, self.data.clone())
            .expect("sizes agree")
    }

    /// Applies this block to a tensor core; the result has ranks multiplied,
    /// with the operator rank index varying fastest.
    pub fn apply_core(&self, u: &Core) -> Result<Core> {
        if u.mode() != self.cols {
            return Err(Error::Shape(format!(
                "operator block expects mode {}, tensor block has {}",
                self.cols,
                u.mode()
            )));
        }
        let (la, ra, lu, ru) = (self.left, self.right, u.left_rank(), u.right_rank());
        let m = self.rows;
        let left = la * lu;
        let mut out = Core::zeros(left, m, ra * ru);
        let data = out.data_mut();
        for tu in 0..ru {
            for ta in 0..ra {
                let t = ta + ra * tu;
                for j in 0..self.cols {
                    for su in 0..lu {
                        let x = u.get(su, j, tu);
                        if x == 0.0 {
                            continue;
                        }
                        for i in 0..m {
                            let base = la * su + left * (i + m * t);
                            let abase = self.left * (i + self.rows * (j + self.cols * ta));
                            for sa in 0..la {
                                data[base + sa] += self.data[abase + sa] * x;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// An operator (matrix) in tensor-train format, mapping tensors with mode sizes
/// `cols` to tensors with mode sizes `rows`.
#[derive(Clone, Debug, PartialEq)]
pub struct TtOperator {
    cores: Vec<OpCore>,
}

impl TtOperator {
    pub fn new(cores: Vec<OpCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Shape("operator needs at least one block".into()));
        }
        if cores[0].left != 1 || cores.last().unwrap().right != 1 {
            return Err(Error::Shape("operator boundary ranks must be 1".into()));
        }
        for k in 1..cores.len() {
            if cores[k - 1].right != cores[k].left {
                return Err(Error::Shape(format!("operator rank mismatch at bond {k}")));
            }
        }
        Ok(Self { cores })
    }

    pub fn identity(modes: &[usize]) -> Self {
        let cores = modes
            .iter()
            .map(|&n| OpCore::from_blocks(1, 1, |_, _| Some(DMatrix::identity(n, n))).unwrap())
            .collect();
        Self { cores }
    }

    /// Kronecker-sum Laplacian `A (x) I (x) ... + ... + I (x) ... (x) A` with
    /// `A = tridiag(-1, 2, -1)` of size `n`; interior ranks are all 2.
    pub fn laplacian(dims: usize, n: usize) -> Result<Self> {
        if dims == 0 || n < 2 {
            return Err(Error::Invalid(format!("laplacian needs M >= 1 and n >= 2, got {dims}, {n}")));
        }
        let a = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let id = DMatrix::<f64>::identity(n, n);
        if dims == 1 {
            return Self::new(vec![OpCore::from_blocks(1, 1, |_, _| Some(a.clone()))?]);
        }
        let mut cores = Vec::with_capacity(dims);
        cores.push(OpCore::from_blocks(1, 2, |_, t| {
            Some(if t == 0 { a.clone() } else { id.clone() })
        })?);
        for _ in 1..dims - 1 {
            cores.push(OpCore::from_blocks(2, 2, |s, t| match (s, t) {
                (0, 0) | (1, 1) => Some(id.clone()),
                (1, 0) => Some(a.clone()),
                _ => None,
            })?);
        }
        cores.push(OpCore::from_blocks(2, 1, |s, _| {
            Some(if s == 0 { id.clone() } else { a.clone() })
        })?);
        Self::new(cores)
    }

    pub fn ndim(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[OpCore] {
        &self.cores
    }

    pub fn row_modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.rows).collect()
    }

    pub fn col_modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.cols).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.left).collect();
        r.push(1);
        r
    }

    /// Matrix-vector product in TT arithmetic; ranks multiply.
    pub fn apply(&self, u: &TtTensor) -> Result<TtTensor> {
        if self.col_modes() != u.modes() {
            return Err(Error::Shape(format!(
                "operator columns {:?} do not match tensor modes {:?}",
                self.col_modes(),
                u.modes()
            )));
        }
        let cores = self
            .cores
            .iter()
            .zip(u.cores())
            .map(|(a, c)| a.apply_core(c))
            .collect::<Result<Vec<_>>>()?;
        TtTensor::new(cores)
    }

    /// `round(self.apply(u), eps)` without forming the product blocks: each block is
    /// multiplied into the running triangular factor of the left orthogonalization.
    pub fn apply_round(&self, u: &TtTensor, eps: f64) -> Result<(TtTensor, TruncationReport)> {
        if self.col_modes() != u.modes() {
            return Err(Error::Shape(format!(
                "operator columns {:?} do not match tensor modes {:?}",
                self.col_modes(),
                u.modes()
            )));
        }
        let m = self.ndim();
        let tols = bond_tolerances(m, &RoundOptions::new(eps))?;
        let boundary = self.cores[0].left * u.core(0).left_rank();
        let mut r = DMatrix::identity(boundary, boundary);
        let mut cores = Vec::with_capacity(m);
        for (k, (a, c)) in self.cores.iter().zip(u.cores()).enumerate() {
            let fold = absorb(&r, a, c);
            let rows = r.nrows();
            if k + 1 < m {
                let (q, rk) = linalg::qr_thin(fold);
                cores.push(Core::from_left(rows, a.rows, &q));
                r = rk;
            } else {
                cores.push(Core::new(rows, a.rows, 1, fold.as_slice().to_vec())?);
            }
        }
        let norm = linalg::frobenius(cores[m - 1].data());
        if norm < ZERO_NORM {
            return Ok(zero_rounding(boundary, &self.row_modes(), norm));
        }
        Ok(truncate_orthogonal(cores, &tols, None, norm))
    }

    /// Dense matrix, rows and columns ordered with the first mode fastest.
    pub fn full(&self) -> Result<DMatrix<f64>> {
        let (rows, cols) = (
            self.row_modes().iter().product::<usize>(),
            self.col_modes().iter().product::<usize>(),
        );
        let size = rows.saturating_mul(cols);
        if size > DENSE_LIMIT {
            return Err(Error::Guard {
                what: "dense operator",
                size,
                limit: DENSE_LIMIT,
            });
        }
        let merged = TtTensor::new(self.cores.iter().map(OpCore::as_core).collect())?;
        let flat = merged.full()?;
        let (rm, cm) = (self.row_modes(), self.col_modes());
        let merged_modes: Vec<usize> = rm.iter().zip(&cm).map(|(a, b)| a * b).collect();
        let mut out = DMatrix::zeros(rows, cols);
        let mut idx = vec![0; self.ndim()];
        for &v in flat.data() {
            let (mut r, mut c, mut rs, mut cs) = (0, 0, 1, 1);
            for k in 0..idx.len() {
                r += (idx[k] % rm[k]) * rs;
                c += (idx[k] / rm[k]) * cs;
                rs *= rm[k];
                cs *= cm[k];
            }
            out[(r, c)] = v;
            increment(&mut idx, &merged_modes);
        }
        Ok(out)
    }
}

/// Left fold of `r * (a applied to c)`, shape `(r.nrows() * a.rows) x (a.right * c.right_rank())`.
fn absorb(r: &DMatrix<f64>, a: &OpCore, c: &Core) -> DMatrix<f64> {
    let (rp, la, lu) = (r.nrows(), a.left, c.left_rank());
    let (n, ra, ru) = (a.cols, a.right, c.right_rank());
    // contract the tensor block: rows (s', sa), columns (j, tu)
    let rr = DMatrixView::from_slice(r.as_slice(), rp * la, lu);
    let t1 = rr * c.right_fold();
    // operator block with rows (sa, j) and columns (i, ta)
    let ahat = DMatrix::from_fn(la * n, a.rows * ra, |row, col| {
        a.get(row % la, col % a.rows, row / la, col / a.rows)
    });
    let mut out = DMatrix::zeros(rp * a.rows, ra * ru);
    let (xs, os) = (rp * la * n, rp * a.rows * ra);
    for tu in 0..ru {
        let x = DMatrixView::from_slice(&t1.as_slice()[tu * xs..(tu + 1) * xs], rp, la * n);
        let mut o = DMatrixViewMut::from_slice(&mut out.as_mut_slice()[tu * os..(tu + 1) * os], rp, a.rows * ra);
        o.gemm(1.0, &x, &ahat, 0.0);
    }
    out
}
