use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

pub const MAXVOL_TOL: f64 = 1.01;
pub const MAXVOL_ITERS: usize = 200;

/// Quasi-maximum-volume row selection.
///
/// Returns `r` row indices of the `n x r` matrix `a` such that no single row
/// swap grows `|det a(I, :)|` by more than `tol`. Rows are seeded by pivoted
/// elimination and refined by greedy swaps (at most 200).
pub fn maxvol(a: &DMatrix<f64>, tol: f64) -> Result<Vec<usize>> {
    let (n, r) = a.shape();
    if r == 0 {
        return Ok(Vec::new());
    }
    if n < r {
        return Err(Error::Shape(format!("maxvol needs at least {r} rows, got {n}")));
    }
    let mut rows = pivot_rows(a)?;
    let sub = DMatrix::from_fn(r, r, |i, j| a[(rows[i], j)]);
    let mut b = linalg::solve_right(a, &sub)?;
    for _ in 0..MAXVOL_ITERS {
        let (mut bi, mut bj, mut best) = (0, 0, 0.0);
        for j in 0..r {
            for i in 0..n {
                let v = b[(i, j)].abs();
                if v > best {
                    (bi, bj, best) = (i, j, v);
                }
            }
        }
        if best <= tol {
            break;
        }
        // swapping row bj of the submatrix for row bi scales the volume by |b[bi, bj]|
        let x = b.column(bj).into_owned();
        let mut y = b.row(bi).into_owned();
        y[bj] -= 1.0;
        let piv = b[(bi, bj)];
        b -= (x * y) / piv;
        rows[bj] = bi;
    }
    Ok(rows)
}

/// Row pivots of Gaussian elimination with partial pivoting.
fn pivot_rows(a: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (n, r) = a.shape();
    let mut w = a.clone();
    let scale = a.amax();
    let mut used = vec![false; n];
    let mut rows = Vec::with_capacity(r);
    for j in 0..r {
        let mut best = (usize::MAX, 0.0);
        for i in 0..n {
            if !used[i] && w[(i, j)].abs() > best.1 {
                best = (i, w[(i, j)].abs());
            }
        }
        let (p, mag) = best;
        if p == usize::MAX || !(mag > 1e-13 * scale) {
            return Err(Error::RankDeficient(format!(
                "column {j} of a {n}x{r} matrix has no usable pivot"
            )));
        }
        used[p] = true;
        rows.push(p);
        let piv = w[(p, j)];
        for i in 0..n {
            if used[i] {
                continue;
            }
            let f = w[(i, j)] / piv;
            if f != 0.0 {
                for c in j..r {
                    let v = w[(p, c)];
                    w[(i, c)] -= f * v;
                }
            }
        }
    }
    Ok(rows)
}

/// Rank-`r` cross approximation of a matrix by alternating row and column maxvol.
///
/// Returns the row indices, column indices and the skeleton
/// `A(:, J) A(I, J)^{-1} A(I, :)`.
pub fn matrix_cross(
    a: &DMatrix<f64>,
    r: usize,
    sweeps: usize,
) -> Result<(Vec<usize>, Vec<usize>, DMatrix<f64>)> {
    let (n, m) = a.shape();
    if r == 0 || r > n.min(m) {
        return Err(Error::Invalid(format!("cross rank {r} for a {n}x{m} matrix")));
    }
    // seed the columns from the dominant right singular subspace
    let d = linalg::svd(a);
    let vr = d.vt.rows(0, r).transpose();
    let mut cols = maxvol(&vr, MAXVOL_TOL)?;
    let mut rows = Vec::new();
    for _ in 0..sweeps.max(1) {
        let ac = DMatrix::from_fn(n, r, |i, j| a[(i, cols[j])]);
        rows = maxvol(&ac, MAXVOL_TOL)?;
        let ar = DMatrix::from_fn(m, r, |j, i| a[(rows[i], j)]);
        cols = maxvol(&ar, MAXVOL_TOL)?;
    }
    let ac = DMatrix::from_fn(n, r, |i, j| a[(i, cols[j])]);
    let ar = DMatrix::from_fn(r, m, |i, j| a[(rows[i], j)]);
    let core = DMatrix::from_fn(r, r, |i, j| a[(rows[i], cols[j])]);
    let skel = linalg::solve_right(&ac, &core)? * ar;
    Ok((rows, cols, skel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_on_top() {
        let mut a = DMatrix::zeros(6, 3);
        for i in 0..3 {
            a[(i, i)] = 1.0;
        }
        let mut rows = maxvol(&a, MAXVOL_TOL).unwrap();
        rows.sort();
        assert_eq!(rows, vec![0, 1, 2]);
    }

    #[test]
    fn single_column_picks_largest() {
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert_eq!(maxvol(&a, MAXVOL_TOL).unwrap(), vec![2]);
    }

    #[test]
    fn rank_deficient_is_reported() {
        let a = DMatrix::from_fn(5, 2, |i, _| i as f64);
        assert!(matches!(maxvol(&a, MAXVOL_TOL), Err(Error::RankDeficient(_))));
        assert!(maxvol(&DMatrix::zeros(1, 2), MAXVOL_TOL).is_err());
    }

    #[test]
    fn no_single_swap_improves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(40, 5, |_, _| rng.random::<f64>() - 0.5);
        let rows = maxvol(&a, MAXVOL_TOL).unwrap();
        let det = |rs: &[usize]| DMatrix::from_fn(5, 5, |i, j| a[(rs[i], j)]).determinant().abs();
        let base = det(&rows);
        for pos in 0..5 {
            for cand in 0..40 {
                if rows.contains(&cand) {
                    continue;
                }
                let mut rs = rows.clone();
                rs[pos] = cand;
                assert!(det(&rs) <= MAXVOL_TOL * base * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn matrix_cross_exact_for_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = DMatrix::from_fn(20, 3, |_, _| rng.random::<f64>());
        let v = DMatrix::from_fn(3, 15, |_, _| rng.random::<f64>());
        let a = &u * &v;
        let (_, _, s) = matrix_cross(&a, 3, 2).unwrap();
        assert!((s - a).amax() < 1e-10);
    }
}
