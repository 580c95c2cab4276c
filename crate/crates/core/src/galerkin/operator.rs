use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::assembly::{csr_to_dense, StiffnessSet};
use crate::error::{Error, Result};
use crate::pce::{HermiteTools, MultiIndexSet};
use crate::tt::{Core, OpCore, TtOperator, TtTensor};

/// Size limit `N * #set` for the explicit Galerkin matrix.
pub const ORACLE_LIMIT: usize = 20_000;

/// Stochastic Galerkin operator
/// `K = sum_c K_c (x) sum_alpha kappa_c(alpha) Delta_alpha_1 (x) .. (x) Delta_alpha_M`
/// in operator-TT form, built from the coefficient train's parametric blocks.
///
/// `kappa` must have a spatial first block whose right rank equals the number
/// of stiffness channels; its remaining blocks run over coefficient orders
/// `0..n_m - 1` with `n_m <= 2p + 1`.
pub fn assemble_operator_tt(stiff: &StiffnessSet, kappa: &TtTensor, tools: &HermiteTools) -> Result<TtOperator> {
    let first = kappa.core(0);
    if first.left_rank() != 1 || first.right_rank() != stiff.channels() {
        return Err(Error::Shape(format!(
            "coefficient spatial block is {}x{}x{}, expected 1 x N x {}",
            first.left_rank(),
            first.mode(),
            first.right_rank(),
            stiff.channels()
        )));
    }
    let mut cores = Vec::with_capacity(kappa.ndim());
    let dense: Vec<DMatrix<f64>> = stiff.k.iter().map(csr_to_dense).collect();
    cores.push(OpCore::from_blocks(1, stiff.channels(), |_, t| Some(dense[t].clone()))?);
    for (m, c) in kappa.cores().iter().enumerate().skip(1) {
        cores.push(parametric_block(c, tools).map_err(|e| match e {
            Error::Shape(s) => Error::Shape(format!("parametric block {m}: {s}")),
            other => other,
        })?);
    }
    TtOperator::new(cores)
}

/// `K^(m)_{s,t} = sum_nu Delta_nu kappa^(m)_{s,t}(nu)`.
fn parametric_block(c: &Core, tools: &HermiteTools) -> Result<OpCore> {
    if c.mode() > tools.nu_max() + 1 {
        return Err(Error::Shape(format!(
            "{} coefficient orders but triple products only up to {}",
            c.mode(),
            tools.nu_max()
        )));
    }
    let q = tools.order() + 1;
    let (l, r) = (c.left_rank(), c.right_rank());
    let mut out = OpCore::zeros(l, q, q, r);
    for t in 0..r {
        for s in 0..l {
            let w: Vec<f64> = (0..c.mode()).map(|nu| c.get(s, nu, t)).collect();
            let b = tools.contract(&w);
            for j in 0..q {
                for i in 0..q {
                    out.set(s, i, j, t, b[(i, j)]);
                }
            }
        }
    }
    Ok(out)
}

/// Right-hand side `f_0 (x) e_0 (x) .. (x) e_0`.
pub fn assemble_rhs(stiff: &StiffnessSet, m: usize, p: usize) -> Result<TtTensor> {
    let mut e0 = vec![0.0; p + 1];
    e0[0] = 1.0;
    let mut v = vec![stiff.f0.clone()];
    v.extend(std::iter::repeat_n(e0, m));
    TtTensor::rank_one(&v)
}

/// Explicit Galerkin matrix on the unknowns `(x, alpha)`, `alpha` in `sol_set`,
/// ordered `x + N * position(alpha)`.
///
/// `kmats[j]` is the stiffness matrix of the coefficient `kappa_nu` for the
/// `j`-th member `nu` of `nu_set`.
pub fn assemble_operator_dense(
    kmats: &[CsrMatrix<f64>],
    nu_set: &MultiIndexSet,
    sol_set: &MultiIndexSet,
    tools: &HermiteTools,
) -> Result<CsrMatrix<f64>> {
    if kmats.len() != nu_set.len() {
        return Err(Error::Shape(format!("{} matrices for {} coefficients", kmats.len(), nu_set.len())));
    }
    let n = kmats.first().map(|k| k.nrows()).unwrap_or(0);
    let size = n.saturating_mul(sol_set.len());
    if size > ORACLE_LIMIT {
        return Err(Error::Guard {
            what: "explicit Galerkin matrix",
            size,
            limit: ORACLE_LIMIT,
        });
    }
    if nu_set.dims() != sol_set.dims() {
        return Err(Error::Shape("coefficient and solution sets differ in dimension".into()));
    }
    let p = tools.order();
    let sol: Vec<Vec<usize>> = sol_set.iter().collect();
    if sol.iter().flatten().any(|&a| a > p) {
        return Err(Error::Shape(format!("solution set exceeds the triple-product order {p}")));
    }
    let mut coo = CooMatrix::new(size, size);
    let mut block = DMatrix::zeros(n, n);
    for (ia, a) in sol.iter().enumerate() {
        for (ib, b) in sol.iter().enumerate() {
            block.fill(0.0);
            let mut any = false;
            // Delta_{a,b,nu} vanishes unless |a - b| <= nu <= a + b with a + b + nu even
            let lo: Vec<usize> = a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y)).collect();
            let hi: Vec<usize> = a.iter().zip(b).map(|(&x, &y)| (x + y).min(tools.nu_max())).collect();
            if lo.iter().zip(&hi).any(|(l, h)| l > h) {
                continue;
            }
            let mut nu = lo.clone();
            'nu: loop {
                if let Some(jn) = nu_set.position(&nu) {
                    let w: f64 = (0..a.len()).map(|m| tools.delta(nu[m])[(a[m], b[m])]).product();
                    if w != 0.0 {
                        any = true;
                        for (i, j, v) in kmats[jn].triplet_iter() {
                            block[(i, j)] += w * v;
                        }
                    }
                }
                for m in 0..nu.len() {
                    if nu[m] + 2 <= hi[m] {
                        nu[m] += 2;
                        continue 'nu;
                    }
                    nu[m] = lo[m];
                }
                break;
            }
            if !any {
                continue;
            }
            for j in 0..n {
                for i in 0..n {
                    let v = block[(i, j)];
                    if v != 0.0 {
                        coo.push(i + n * ia, j + n * ib, v);
                    }
                }
            }
        }
    }
    Ok(CsrMatrix::from(&coo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::assembly::assemble_load;
    use crate::galerkin::mesh::{Domain, Mesh};

    fn set_up(l: usize) -> (Mesh, StiffnessSet) {
        let mesh = Mesh::build(Domain::Square, 1).unwrap();
        let fields = DMatrix::from_fn(mesh.num_nodes(), l + 1, |i, c| {
            if c == 0 {
                1.5
            } else {
                ((i * (c + 3)) % 5) as f64 / 10.0
            }
        });
        let f0 = assemble_load(&mesh, |_| 1.0);
        let s = StiffnessSet::assemble(&mesh, &fields, f0).unwrap();
        (mesh, s)
    }

    #[test]
    fn deterministic_coefficient_gives_mean_block() {
        let (_, s) = set_up(1);
        let tools = HermiteTools::new(1);
        // spatial block [1, 0]: only the mean channel, all parametric orders at zero
        let spatial = Core::from_fn(1, 9, 2, |_, _, t| if t == 0 { 1.0 } else { 0.0 });
        let p1 = Core::from_fn(2, 3, 1, |s, a, _| if a == 0 && s == 0 { 1.0 } else { 0.0 });
        let kappa = TtTensor::new(vec![spatial, p1]).unwrap();
        let op = assemble_operator_tt(&s, &kappa, &tools).unwrap();
        let full = op.full().unwrap();
        let k0 = csr_to_dense(&s.k[0]);
        let n = k0.nrows();
        let want = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if i / n == j / n {
                k0[(i % n, j % n)]
            } else {
                0.0
            }
        });
        assert!((full - want).amax() < 1e-14);
    }

    #[test]
    fn single_mode_closed_form() {
        // one parametric mode, coefficient kappa_0 = K_0 channel, kappa_(1) = K_1 channel
        let (_, s) = set_up(1);
        let tools = HermiteTools::new(1);
        let nu = MultiIndexSet::full(vec![2]);
        let sol = MultiIndexSet::full(vec![1]);
        let zero = CsrMatrix::zeros(s.dofs(), s.dofs());
        let a = assemble_operator_dense(&[s.k[0].clone(), s.k[1].clone(), zero], &nu, &sol, &tools).unwrap();
        let a = csr_to_dense(&a);
        let (k0, k1) = (csr_to_dense(&s.k[0]), csr_to_dense(&s.k[1]));
        let n = s.dofs();
        // Delta_{a,b,0} = a! delta_ab and Delta_{a,b,1} = 1 exactly when a != b
        for (bi, bj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let d0 = if bi == bj { 1.0 } else { 0.0 };
            let want = &k0 * d0 + &k1 * (1.0 - d0);
            let got = a.view((bi * n, bj * n), (n, n));
            assert!((got - want).amax() < 1e-14, "{bi} {bj}");
        }
    }

    #[test]
    fn guard() {
        let (_, s) = set_up(1);
        let tools = HermiteTools::new(3);
        let nu = MultiIndexSet::full(vec![0; 6]);
        let sol = MultiIndexSet::full(vec![3; 6]);
        assert!(matches!(
            assemble_operator_dense(&[s.k[0].clone()], &nu, &sol, &tools),
            Err(Error::Guard { .. })
        ));
    }
}
