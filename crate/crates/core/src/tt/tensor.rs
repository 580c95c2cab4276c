use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Largest number of entries a tensor may have before it is refused for densification.
pub const DENSE_LIMIT: usize = 10_000_000;

/// One 3-way block of a tensor train, shape `left x mode x right`.
///
/// Entries are stored column-major with the left rank index fastest, then the mode
/// index, then the right rank index. The left-folded matrix (`left*mode x right`) and
/// the right-folded matrix (`left x mode*right`) are both plain views of this buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || mode == 0 || right == 0 {
            return Err(Error::Shape(format!(
                "core dimensions must be positive, got {left}x{mode}x{right}"
            )));
        }
        if data.len() != left * mode * right {
            return Err(Error::Shape(format!(
                "core {left}x{mode}x{right} needs {} entries, got {}",
                left * mode * right,
                data.len()
            )));
        }
        Ok(Self {
            left,
            mode,
            right,
            data,
        })
    }

    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Self {
            left,
            mode,
            right,
            data: vec![0.0; left * mode * right],
        }
    }

    pub fn from_fn(
        left: usize,
        mode: usize,
        right: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(left * mode * right);
        for t in 0..right {
            for a in 0..mode {
                for s in 0..left {
                    data.push(f(s, a, t));
                }
            }
        }
        Self {
            left,
            mode,
            right,
            data,
        }
    }

    /// Builds a core from its left-folded matrix (`left*mode x right`).
    pub fn from_left(left: usize, mode: usize, m: &DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), left * mode);
        Self {
            left,
            mode,
            right: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }

    /// Builds a core from its right-folded matrix (`left x mode*right`).
    pub fn from_right(mode: usize, right: usize, m: &DMatrix<f64>) -> Self {
        debug_assert_eq!(m.ncols(), mode * right);
        Self {
            left: m.nrows(),
            mode,
            right,
            data: m.as_slice().to_vec(),
        }
    }

    pub fn left_rank(&self) -> usize {
        self.left
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn right_rank(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize, t: usize) -> f64 {
        self.data[s + self.left * (a + self.mode * t)]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, t: usize, v: f64) {
        self.data[s + self.left * (a + self.mode * t)] = v;
    }

    pub fn left_fold(&self) -> DMatrixView<'_, f64> {
        linalg::view(&self.data, self.left * self.mode, self.right)
    }

    pub fn right_fold(&self) -> DMatrixView<'_, f64> {
        linalg::view(&self.data, self.left, self.mode * self.right)
    }

    /// The `left x right` matrix obtained by fixing the mode index.
    pub fn slice(&self, a: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.left, self.right, |s, t| self.get(s, a, t))
    }

    /// Contracts the mode index with a vector of weights, giving a `left x right` matrix.
    pub fn contract(&self, w: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.left, self.right);
        for t in 0..self.right {
            for (a, &wa) in w.iter().enumerate() {
                if wa == 0.0 {
                    continue;
                }
                for s in 0..self.left {
                    out[(s, t)] += wa * self.get(s, a, t);
                }
            }
        }
        out
    }

    /// Applies `m` (new_mode x mode) along the mode index.
    pub fn map_mode(&self, m: &DMatrix<f64>) -> Core {
        assert_eq!(m.ncols(), self.mode);
        let n = m.nrows();
        Core::from_fn(self.left, n, self.right, |s, b, t| {
            (0..self.mode).map(|a| m[(b, a)] * self.get(s, a, t)).sum()
        })
    }

    /// `m * core` on the left rank index.
    pub fn mul_left(&self, m: &DMatrix<f64>) -> Core {
        let prod = m * self.right_fold();
        Core::from_right(self.mode, self.right, &prod)
    }

    /// `core * m` on the right rank index.
    pub fn mul_right(&self, m: &DMatrix<f64>) -> Core {
        let prod = self.left_fold() * m;
        Core::from_left(self.left, self.mode, &prod)
    }

    pub fn scaled(&self, a: f64) -> Core {
        let mut c = self.clone();
        c.data.iter_mut().for_each(|x| *x *= a);
        c
    }
}

/// Dense multiway array, column-major (first index fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let size = checked_size(&shape)?;
        if size != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {size} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let size = checked_size(&shape)?;
        Ok(Self {
            shape,
            data: vec![0.0; size],
        })
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let size = checked_size(&shape)?;
        let mut data = Vec::with_capacity(size);
        let mut idx = vec![0; shape.len()];
        for _ in 0..size {
            data.push(f(&idx));
            increment(&mut idx, &shape);
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &n) in idx.iter().zip(&self.shape) {
            lin += i * stride;
            stride *= n;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn norm(&self) -> f64 {
        linalg::frobenius(&self.data)
    }
}

fn checked_size(shape: &[usize]) -> Result<usize> {
    let mut size: usize = 1;
    for &n in shape {
        size = size.saturating_mul(n);
    }
    if size > DENSE_LIMIT {
        return Err(Error::Guard {
            what: "dense tensor",
            size,
            limit: DENSE_LIMIT,
        });
    }
    Ok(size)
}

/// Advances a column-major multi-index; returns false after wrapping around.
pub fn increment(idx: &mut [usize], shape: &[usize]) -> bool {
    for (i, &n) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < n {
            return true;
        }
        *i = 0;
    }
    false
}

/// A tensor in tensor-train format.
///
/// The leading rank `r_0` may exceed one: the tensor then carries an auxiliary
/// index (a block of `r_0` tensors sharing one train). The trailing rank is always one.
#[derive(Clone, Debug, PartialEq)]
pub struct TtTensor {
    cores: Vec<Core>,
}

impl TtTensor {
    pub fn new(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Shape("a tensor train needs at least one core".into()));
        }
        for k in 1..cores.len() {
            if cores[k - 1].right != cores[k].left {
                return Err(Error::Shape(format!(
                    "rank mismatch between cores {} and {}: {} vs {}",
                    k - 1,
                    k,
                    cores[k - 1].right,
                    cores[k].left
                )));
            }
        }
        if cores.last().unwrap().right != 1 {
            return Err(Error::Shape("trailing rank must be 1".into()));
        }
        Ok(Self { cores })
    }

    pub(crate) fn from_cores_unchecked(cores: Vec<Core>) -> Self {
        debug_assert!(Self::new(cores.clone()).is_ok());
        Self { cores }
    }

    pub fn zeros(modes: &[usize]) -> Self {
        Self::zeros_block(1, modes)
    }

    /// Zero tensor with leading rank `r0` and all other ranks one.
    pub fn zeros_block(r0: usize, modes: &[usize]) -> Self {
        let cores = modes
            .iter()
            .enumerate()
            .map(|(k, &n)| Core::zeros(if k == 0 { r0 } else { 1 }, n, 1))
            .collect();
        Self { cores }
    }

    pub fn ones(modes: &[usize]) -> Self {
        let cores = modes
            .iter()
            .map(|&n| Core::new(1, n, 1, vec![1.0; n]).unwrap())
            .collect();
        Self { cores }
    }

    /// Rank-one tensor `x_1 (outer) x_2 (outer) ... (outer) x_M`.
    pub fn rank_one(vectors: &[Vec<f64>]) -> Result<Self> {
        let cores = vectors
            .iter()
            .map(|v| Core::new(1, v.len(), 1, v.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    /// The canonical basis tensor with a single one at `index`.
    pub fn unit(modes: &[usize], index: &[usize]) -> Result<Self> {
        if modes.len() != index.len() || index.iter().zip(modes).any(|(&i, &n)| i >= n) {
            return Err(Error::Index(format!("{index:?} for modes {modes:?}")));
        }
        Self::rank_one(
            &modes
                .iter()
                .zip(index)
                .map(|(&n, &i)| {
                    let mut v = vec![0.0; n];
                    v[i] = 1.0;
                    v
                })
                .collect::<Vec<_>>(),
        )
    }

    /// Random tensor train with independent standard normal entries.
    ///
    /// `ranks` lists the interior ranks `r_1..r_{M-1}`.
    pub fn random<R: Rng + ?Sized>(modes: &[usize], ranks: &[usize], rng: &mut R) -> Result<Self> {
        Self::random_block(1, modes, ranks, rng)
    }

    pub fn random_block<R: Rng + ?Sized>(
        r0: usize,
        modes: &[usize],
        ranks: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if modes.is_empty() || ranks.len() + 1 != modes.len() {
            return Err(Error::Shape(format!(
                "{} modes need {} interior ranks, got {}",
                modes.len(),
                modes.len().saturating_sub(1),
                ranks.len()
            )));
        }
        let mut full_ranks = vec![r0];
        full_ranks.extend_from_slice(ranks);
        full_ranks.push(1);
        let cores = modes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let (l, r) = (full_ranks[k], full_ranks[k + 1]);
                let data = (0..l * n * r).map(|_| rng.sample(StandardNormal)).collect();
                Core::new(l, n, r, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    pub fn ndim(&self) -> usize {
        self.cores.len()
    }

    pub fn modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.mode).collect()
    }

    /// Ranks `r_0..r_M`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.left).collect();
        r.push(1);
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    pub fn boundary_rank(&self) -> usize {
        self.cores[0].left
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }

    pub fn into_cores(self) -> Vec<Core> {
        self.cores
    }

    /// Number of stored floating-point values.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.ndim() {
            return Err(Error::Index(format!(
                "expected {} indices, got {}",
                self.ndim(),
                index.len()
            )));
        }
        for (k, (&i, c)) in index.iter().zip(&self.cores).enumerate() {
            if i >= c.mode {
                return Err(Error::Index(format!(
                    "index {i} out of range for mode {k} of size {}",
                    c.mode
                )));
            }
        }
        Ok(())
    }

    /// Entry at `index` as the chain product `u1(a1) u2(a2) ... uM(aM)`.
    ///
    /// Returns `r_0` values, one per slice of the leading rank index.
    pub fn element(&self, index: &[usize]) -> Result<Vec<f64>> {
        self.check_index(index)?;
        Ok(self.element_unchecked(index))
    }

    pub(crate) fn element_unchecked(&self, index: &[usize]) -> Vec<f64> {
        // right-to-left keeps the running vector short
        let last = self.cores.last().unwrap();
        let a = index[self.ndim() - 1];
        let mut acc: Vec<f64> = (0..last.left).map(|s| last.get(s, a, 0)).collect();
        for k in (0..self.ndim() - 1).rev() {
            let c = &self.cores[k];
            let a = index[k];
            let mut next = vec![0.0; c.left];
            for (t, &x) in acc.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (s, n) in next.iter_mut().enumerate() {
                    *n += c.get(s, a, t) * x;
                }
            }
            acc = next;
        }
        acc
    }

    /// Scalar entry; requires `r_0 = 1`.
    pub fn value(&self, index: &[usize]) -> Result<f64> {
        if self.boundary_rank() != 1 {
            return Err(Error::Shape("value() needs leading rank 1; use element()".into()));
        }
        Ok(self.element(index)?[0])
    }

    /// Densifies the train. A leading rank above one becomes the first axis.
    pub fn full(&self) -> Result<DenseTensor> {
        let mut shape = Vec::new();
        let r0 = self.boundary_rank();
        if r0 > 1 {
            shape.push(r0);
        }
        shape.extend(self.modes());
        checked_size(&shape)?;
        // accumulate (r0 * n1 * ... * nk) x r_k, column-major
        let mut acc = self.cores[0].left_fold().into_owned();
        for c in &self.cores[1..] {
            let rows = acc.nrows();
            let prod = &acc * c.right_fold();
            // prod is rows x (n*r'); column-major reinterpretation gives (rows*n) x r'
            acc = DMatrix::from_vec(rows * c.mode, c.right, prod.as_slice().to_vec());
        }
        DenseTensor::new(shape, acc.as_slice().to_vec())
    }

    /// TT-SVD of a dense array with relative Frobenius accuracy `eps`.
    pub fn from_dense(dense: &DenseTensor, eps: f64) -> Result<Self> {
        let shape = dense.shape();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("cannot decompose shape {shape:?}")));
        }
        let m = shape.len();
        let norm = dense.norm();
        if norm == 0.0 {
            return Ok(Self::zeros(shape));
        }
        let tol = if m > 1 { eps / ((m - 1) as f64).sqrt() } else { 0.0 };
        let mut cores = Vec::with_capacity(m);
        let mut left = 1;
        let mut rest = DMatrix::from_vec(1, dense.data().len(), dense.data().to_vec());
        for (k, &n) in shape.iter().enumerate().take(m - 1) {
            let cols = rest.len() / (left * n);
            let mat = DMatrix::from_vec(left * n, cols, rest.as_slice().to_vec());
            let d = linalg::svd(&mat);
            let r = linalg::truncation_rank(&d.s, tol);
            let u = d.u.columns(0, r).into_owned();
            cores.push(Core::from_left(left, n, &u));
            let mut sv = d.vt.rows(0, r).into_owned();
            for (i, mut row) in sv.row_iter_mut().enumerate() {
                row *= d.s[i];
            }
            rest = sv;
            left = r;
            let _ = k;
        }
        let n = shape[m - 1];
        cores.push(Core::new(left, n, 1, rest.as_slice().to_vec())?);
        Self::new(cores)
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut cores = self.cores.clone();
        // the last core is the cheapest place to put a scalar
        let last = cores.len() - 1;
        cores[last] = cores[last].scaled(a);
        Self { cores }
    }

    /// Replaces core `k`; ranks must stay consistent.
    pub fn with_core(&self, k: usize, core: Core) -> Result<Self> {
        let mut cores = self.cores.clone();
        cores[k] = core;
        Self::new(cores)
    }

    /// Applies a matrix (`new_mode x mode`) along mode `k`; ranks are unchanged.
    pub fn map_mode(&self, k: usize, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.cores[k].mode {
            return Err(Error::Shape(format!(
                "mode {k} has size {}, matrix has {} columns",
                self.cores[k].mode,
                m.ncols()
            )));
        }
        let mut cores = self.cores.clone();
        cores[k] = cores[k].map_mode(m);
        Ok(Self { cores })
    }

    /// Contracts mode `k` with weights `w`, removing that dimension.
    ///
    /// The resulting matrix is merged into the neighbouring core. Contracting the
    /// only remaining mode is refused; use [`TtTensor::contract_all`] instead.
    pub fn contract_mode(&self, k: usize, w: &[f64]) -> Result<Self> {
        if w.len() != self.cores[k].mode {
            return Err(Error::Shape(format!(
                "mode {k} has size {}, got {} weights",
                self.cores[k].mode,
                w.len()
            )));
        }
        if self.ndim() == 1 {
            return Err(Error::Shape("cannot contract the last remaining mode".into()));
        }
        let m = self.cores[k].contract(w);
        let mut cores = self.cores.clone();
        cores.remove(k);
        if k < cores.len() {
            cores[k] = cores[k].mul_left(&m);
        } else {
            cores[k - 1] = cores[k - 1].mul_right(&m);
        }
        Self::new(cores)
    }

    /// Contracts every mode with the given weights; returns the `r_0` values.
    pub fn contract_all(&self, weights: &[Vec<f64>]) -> Result<Vec<f64>> {
        if weights.len() != self.ndim() {
            return Err(Error::Shape("one weight vector per mode required".into()));
        }
        let mut acc = DMatrix::from_element(1, 1, 1.0);
        for (k, c) in self.cores.iter().enumerate().rev() {
            if weights[k].len() != c.mode {
                return Err(Error::Shape(format!("weights for mode {k} have wrong length")));
            }
            acc = c.contract(&weights[k]) * acc;
        }
        Ok(acc.column(0).iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_ones_element_is_one() {
        let t = TtTensor::ones(&[2, 3, 4]);
        assert_eq!(t.value(&[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(t.ranks(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn element_out_of_range_errors() {
        let t = TtTensor::ones(&[2, 3]);
        assert!(matches!(t.element(&[2, 0]), Err(Error::Index(_))));
        assert!(matches!(t.element(&[0]), Err(Error::Index(_))));
    }

    #[test]
    fn zero_array_decomposes_to_rank_one_zero() {
        let d = DenseTensor::zeros(vec![2, 2, 2]).unwrap();
        let t = TtTensor::from_dense(&d, 1e-12).unwrap();
        assert_eq!(t.ranks(), vec![1, 1, 1, 1]);
        assert!(t.cores().iter().all(|c| c.data().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn separable_array_is_rank_one() {
        let (x, y, z) = ([1.0, 2.0], [1.0, 1.0], [3.0, 0.0]);
        let d = DenseTensor::from_fn(vec![2, 2, 2], |i| x[i[0]] * y[i[1]] * z[i[2]]).unwrap();
        let t = TtTensor::from_dense(&d, 1e-12).unwrap();
        assert_eq!(t.ranks(), vec![1, 1, 1, 1]);
        let f = t.full().unwrap();
        for (a, b) in f.data().iter().zip(d.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn from_dense_random_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = DenseTensor::from_fn(vec![4, 4, 4], |_| rng.random::<f64>() - 0.5).unwrap();
        let t = TtTensor::from_dense(&d, 1e-10).unwrap();
        let r = t.ranks();
        assert!(r[1] <= 4 && r[2] <= 4);
        let f = t.full().unwrap();
        for (a, b) in f.data().iter().zip(d.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn element_matches_stored_entry() {
        let d = DenseTensor::from_fn(vec![3, 3, 3], |i| (i[0] * 9 + i[1] * 3 + i[2]) as f64 + 0.5)
            .unwrap();
        let t = TtTensor::from_dense(&d, 1e-14).unwrap();
        let v = t.value(&[2, 0, 1]).unwrap();
        assert!((v - d.get(&[2, 0, 1])).abs() < 1e-12);
    }

    #[test]
    fn block_element_returns_each_slice() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = TtTensor::random_block(2, &[3, 2, 4], &[2, 3], &mut rng).unwrap();
        let f = t.full().unwrap();
        assert_eq!(f.shape(), &[2, 3, 2, 4]);
        let e = t.element(&[1, 0, 3]).unwrap();
        assert_eq!(e.len(), 2);
        for (l, v) in e.iter().enumerate() {
            assert!((v - f.get(&[l, 1, 0, 3])).abs() < 1e-12);
        }
    }

    #[test]
    fn densify_guard_refuses() {
        let t = TtTensor::ones(&[100, 100, 100, 100]);
        assert!(matches!(t.full(), Err(Error::Guard { .. })));
    }

    #[test]
    fn contract_mode_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = TtTensor::random(&[3, 4, 2], &[2, 3], &mut rng).unwrap();
        let w = [0.5, -1.0, 2.0, 0.25];
        let c = t.contract_mode(1, &w).unwrap();
        let f = t.full().unwrap();
        for i in 0..3 {
            for k in 0..2 {
                let expect: f64 = (0..4).map(|j| w[j] * f.get(&[i, j, k])).sum();
                assert!((c.value(&[i, k]).unwrap() - expect).abs() < 1e-12);
            }
        }
    }
}
