use nalgebra::DMatrix;

use super::tensor::{Core, TtTensor};
use crate::error::{Error, Result};
use crate::linalg;

/// Norm below which a tensor is treated as exactly zero during rounding.
pub const ZERO_NORM: f64 = 1e-300;

// Relative to the summation scale, anything below this is cancellation noise.
const NOISE_LEVEL: f64 = 64.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Blocks `1..M-1` become left-orthogonal; the norm ends up in the last block.
    Left,
    /// Blocks `2..M` become right-orthogonal; the norm ends up in the first block.
    Right,
}

/// Singular values observed at one bond during rounding.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BondReport {
    pub kept: Vec<f64>,
    pub discarded: Vec<f64>,
}

/// Diagnostics of a rounding pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TruncationReport {
    /// One entry per interior bond `r_1..r_{M-1}`.
    pub bonds: Vec<BondReport>,
    /// Upper bound on `|u - rounded| / |u|`.
    pub error_bound: f64,
    pub ranks: Vec<usize>,
    pub norm: f64,
}

/// Knobs for [`TtTensor::round_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOptions {
    pub eps: f64,
    /// Explicit per-bond relative tolerances (length `M-1`), replacing the uniform split.
    pub per_bond: Option<Vec<f64>>,
    pub max_rank: Option<usize>,
}

impl RoundOptions {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            per_bond: None,
            max_rank: None,
        }
    }
}

impl TtTensor {
    pub fn orthogonalize(&self, dir: Direction) -> Self {
        let mut cores = self.cores().to_vec();
        orthogonalize_cores(&mut cores, dir);
        Self::from_cores_unchecked(cores)
    }

    /// Frobenius norm over all entries (and all leading-rank slices).
    pub fn norm(&self) -> f64 {
        let t = self.orthogonalize(Direction::Left);
        linalg::frobenius(t.cores().last().unwrap().data())
    }

    /// TT rounding with the uniform split `eps / sqrt(M-1)` per bond.
    /// Frobenius norm of the train with every block entry replaced by its modulus.
    fn abs_norm(&self) -> f64 {
        let cores = self
            .cores()
            .iter()
            .map(|c| Core::from_fn(c.left_rank(), c.mode(), c.right_rank(), |s, a, t| c.get(s, a, t).abs()))
            .collect();
        let a = Self::from_cores_unchecked(cores);
        a.dot_matrix(&a).map(|g| g.trace().max(0.0).sqrt()).unwrap_or(f64::INFINITY)
    }

    pub fn round(&self, eps: f64) -> (Self, TruncationReport) {
        self.round_with(&RoundOptions::new(eps))
            .expect("uniform rounding options are always valid")
    }

    pub fn round_with(&self, opts: &RoundOptions) -> Result<(Self, TruncationReport)> {
        let tols = bond_tolerances(self.ndim(), opts)?;
        let log_scale: f64 = self
            .cores()
            .iter()
            .map(|c| linalg::frobenius(c.data()).ln())
            .sum();
        let mut cores = self.cores().to_vec();
        orthogonalize_cores(&mut cores, Direction::Left);
        let norm = linalg::frobenius(cores.last().unwrap().data());
        // the block-norm product is a cheap but loose bound on the summation scale;
        // confirm against the entrywise-absolute train before declaring cancellation
        if norm < ZERO_NORM || (norm.ln() < log_scale + NOISE_LEVEL.ln() && norm < NOISE_LEVEL * self.abs_norm()) {
            return Ok(zero_rounding(self.boundary_rank(), &self.modes(), norm));
        }
        Ok(truncate_orthogonal(cores, &tols, opts.max_rank, norm))
    }
}

pub(crate) fn bond_tolerances(m: usize, opts: &RoundOptions) -> Result<Vec<f64>> {
    if !(opts.eps >= 0.0) {
        return Err(Error::Invalid(format!("rounding tolerance {} < 0", opts.eps)));
    }
    match &opts.per_bond {
        Some(v) if v.len() + 1 != m => Err(Error::Shape(format!(
            "{} per-bond tolerances for {} bonds",
            v.len(),
            m - 1
        ))),
        Some(v) => Ok(v.clone()),
        None if m > 1 => Ok(vec![opts.eps / ((m - 1) as f64).sqrt(); m - 1]),
        None => Ok(Vec::new()),
    }
}

pub(crate) fn zero_rounding(boundary: usize, modes: &[usize], norm: f64) -> (TtTensor, TruncationReport) {
    let z = TtTensor::zeros_block(boundary, modes);
    let ranks = z.ranks();
    let report = TruncationReport {
        bonds: vec![BondReport::default(); modes.len().saturating_sub(1)],
        error_bound: 0.0,
        ranks,
        norm,
    };
    (z, report)
}

/// Right-to-left SVD truncation of a left-orthogonal chain whose last block has norm `norm`.
pub(crate) fn truncate_orthogonal(
    mut cores: Vec<Core>,
    tols: &[f64],
    max_rank: Option<usize>,
    norm: f64,
) -> (TtTensor, TruncationReport) {
    let m = cores.len();
    let mut bonds = vec![BondReport::default(); m.saturating_sub(1)];
    let mut tail_energy = 0.0;
    for k in (1..m).rev() {
        let c = &cores[k];
        let (n, rr) = (c.mode(), c.right_rank());
        let d = linalg::svd(&c.right_fold().into_owned());
        let mut r = linalg::truncation_rank(&d.s, tols[k - 1]);
        if let Some(cap) = max_rank {
            r = r.min(cap.max(1));
        }
        let vt = d.vt.rows(0, r).into_owned();
        let mut us = d.u.columns(0, r).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= d.s[j];
        }
        cores[k] = Core::from_right(n, rr, &vt);
        cores[k - 1] = cores[k - 1].mul_right(&us);
        tail_energy += d.s[r..].iter().map(|x| x * x).sum::<f64>();
        bonds[k - 1] = BondReport {
            kept: d.s[..r].to_vec(),
            discarded: d.s[r..].to_vec(),
        };
    }
    let out = TtTensor::from_cores_unchecked(cores);
    let ranks = out.ranks();
    let report = TruncationReport {
        bonds,
        error_bound: tail_energy.sqrt() / norm,
        ranks,
        norm,
    };
    (out, report)
}

pub(crate) fn orthogonalize_cores(cores: &mut [Core], dir: Direction) {
    let m = cores.len();
    match dir {
        Direction::Left => {
            for k in 0..m.saturating_sub(1) {
                let (l, n) = (cores[k].left_rank(), cores[k].mode());
                let (q, r) = linalg::qr_thin(cores[k].left_fold().into_owned());
                cores[k] = Core::from_left(l, n, &q);
                cores[k + 1] = cores[k + 1].mul_left(&r);
            }
        }
        Direction::Right => {
            for k in (1..m).rev() {
                let (n, rr) = (cores[k].mode(), cores[k].right_rank());
                let (q, r) = linalg::qr_thin(cores[k].right_fold().transpose());
                cores[k] = Core::from_right(n, rr, &q.transpose());
                cores[k - 1] = cores[k - 1].mul_right(&r.transpose());
            }
        }
    }
}

/// Left interface matrix `U^{(1:q)}` (rows: leading rank and first `q` indices).
///
/// Densifies the first `q` blocks; meant for checks at small sizes.
pub fn left_interface(t: &TtTensor, q: usize) -> DMatrix<f64> {
    let cores = t.cores();
    let mut acc = cores[0].left_fold().into_owned();
    for c in &cores[1..q] {
        let rows = acc.nrows();
        let prod = &acc * c.right_fold();
        acc = DMatrix::from_vec(rows * c.mode(), c.right_rank(), prod.as_slice().to_vec());
    }
    acc
}
