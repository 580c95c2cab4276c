//! Small dense linear-algebra helpers shared by the tensor-train routines.

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::error::{Error, Result};

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin blocked Householder QR: `a = q * r` with `q` having orthonormal columns.
pub fn qr_thin(a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    if a.is_empty() {
        let qr = a.qr();
        return (qr.q(), qr.r());
    }
    let qr = to_faer(&a).qr();
    (from_faer(qr.compute_thin_Q().as_ref()), from_faer(qr.thin_R()))
}

/// Singular value decomposition with singular values sorted in descending order.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Svd {
            u: DMatrix::zeros(m, 0),
            s: Vec::new(),
            vt: DMatrix::zeros(0, n),
        };
    }
    let (u, s, vt) = match to_faer(a).thin_svd() {
        Ok(d) => (
            from_faer(d.U()),
            DVector::from_fn(k, |i, _| d.S().column_vector()[i]),
            from_faer(d.V().transpose()),
        ),
        Err(_) => {
            let dec = a.clone().svd(true, true);
            (
                dec.u.expect("left singular vectors requested"),
                dec.singular_values,
                dec.v_t.expect("right singular vectors requested"),
            )
        }
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    if order.iter().enumerate().all(|(a, &b)| a == b) {
        return Svd {
            u,
            s: s.iter().copied().collect(),
            vt,
        };
    }
    let mut us = DMatrix::zeros(m, k);
    let mut vts = DMatrix::zeros(k, n);
    let mut ss = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vts.set_row(dst, &vt.row(src));
        ss.push(s[src]);
    }
    Svd { u: us, s: ss, vt: vts }
}

/// Minimal rank `r >= 1` whose discarded tail satisfies
/// `sum_{s > r} sigma_s^2 <= tol^2 * sum_s sigma_s^2`.
pub fn truncation_rank(s: &[f64], tol: f64) -> usize {
    if s.is_empty() {
        return 0;
    }
    let total: f64 = s.iter().map(|x| x * x).sum();
    let budget = tol * tol * total;
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next > budget {
            break;
        }
        tail = next;
        r -= 1;
    }
    r
}

/// Solves `a * x = b` with partial-pivoting LU.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::RankDeficient(format!("singular {}x{} system", a.nrows(), a.ncols())))
}

/// Computes `b * a^{-1}` through the transposed system.
pub fn solve_right(b: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(solve(&a.transpose(), &b.transpose())?.transpose())
}

/// 2-norm condition number estimate from singular values.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = a.clone().singular_values();
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn view(data: &[f64], rows: usize, cols: usize) -> DMatrixView<'_, f64> {
    DMatrixView::from_slice(data, rows, cols)
}

pub fn frobenius(data: &[f64]) -> f64 {
    data.iter().map(|x| x * x).sum::<f64>().sqrt()
}
