use nalgebra::DMatrix;

use super::tensor::{Core, TtTensor};
use crate::error::{Error, Result};

fn check_modes(u: &TtTensor, v: &TtTensor, what: &str) -> Result<()> {
    if u.modes() != v.modes() {
        return Err(Error::Shape(format!(
            "{what}: mode sizes {:?} and {:?} differ",
            u.modes(),
            v.modes()
        )));
    }
    Ok(())
}

impl TtTensor {
    /// Elementwise sum. Interior ranks add; the leading ranks must agree.
    pub fn add(&self, other: &TtTensor) -> Result<TtTensor> {
        check_modes(self, other, "add")?;
        if self.boundary_rank() != other.boundary_rank() {
            return Err(Error::Shape(format!(
                "add: leading ranks {} and {} differ",
                self.boundary_rank(),
                other.boundary_rank()
            )));
        }
        let m = self.ndim();
        if m == 1 {
            let mut c = self.core(0).clone();
            for (x, y) in c.data_mut().iter_mut().zip(other.core(0).data()) {
                *x += y;
            }
            return TtTensor::new(vec![c]);
        }
        let mut cores = Vec::with_capacity(m);
        for k in 0..m {
            let (a, b) = (self.core(k), other.core(k));
            let n = a.mode();
            let core = if k == 0 {
                let (ra, rb) = (a.right_rank(), b.right_rank());
                Core::from_fn(a.left_rank(), n, ra + rb, |s, i, t| {
                    if t < ra {
                        a.get(s, i, t)
                    } else {
                        b.get(s, i, t - ra)
                    }
                })
            } else if k == m - 1 {
                let (la, lb) = (a.left_rank(), b.left_rank());
                Core::from_fn(la + lb, n, 1, |s, i, _| {
                    if s < la {
                        a.get(s, i, 0)
                    } else {
                        b.get(s - la, i, 0)
                    }
                })
            } else {
                let (la, ra) = (a.left_rank(), a.right_rank());
                Core::from_fn(la + b.left_rank(), n, ra + b.right_rank(), |s, i, t| {
                    match (s < la, t < ra) {
                        (true, true) => a.get(s, i, t),
                        (false, false) => b.get(s - la, i, t - ra),
                        _ => 0.0,
                    }
                })
            };
            cores.push(core);
        }
        TtTensor::new(cores)
    }

    pub fn sub(&self, other: &TtTensor) -> Result<TtTensor> {
        self.add(&other.scale(-1.0))
    }

    /// Elementwise product. Ranks multiply bond by bond (leading ranks included).
    pub fn hadamard(&self, other: &TtTensor) -> Result<TtTensor> {
        check_modes(self, other, "hadamard")?;
        let cores = self
            .cores()
            .iter()
            .zip(other.cores())
            .map(|(a, b)| {
                let (la, ra) = (a.left_rank(), a.right_rank());
                Core::from_fn(la * b.left_rank(), a.mode(), ra * b.right_rank(), |s, i, t| {
                    a.get(s % la, i, t % ra) * b.get(s / la, i, t / ra)
                })
            })
            .collect();
        TtTensor::new(cores)
    }

    /// Matrix of pairwise scalar products between leading-rank slices:
    /// entry `(i, j)` is `<self_i, other_j>`, shape `r_0(self) x r_0(other)`.
    pub fn dot_matrix(&self, other: &TtTensor) -> Result<DMatrix<f64>> {
        check_modes(self, other, "dot")?;
        let mut g = DMatrix::from_element(1, 1, 1.0);
        for (a, b) in self.cores().iter().zip(other.cores()).rev() {
            // (rl_a n x rr_a)(rr_a x rr_b), reinterpreted as rl_a x (n rr_b)
            let x = a.left_fold() * &g;
            let xr = crate::linalg::view(x.as_slice(), a.left_rank(), a.mode() * b.right_rank());
            g = xr * b.right_fold().transpose();
        }
        Ok(g)
    }

    /// Scalar product `sum_alpha u(alpha) v(alpha)`; leading ranks must be 1.
    pub fn dot(&self, other: &TtTensor) -> Result<f64> {
        if self.boundary_rank() != 1 || other.boundary_rank() != 1 {
            return Err(Error::Shape("dot needs leading rank 1; use dot_matrix".into()));
        }
        Ok(self.dot_matrix(other)?[(0, 0)])
    }

    /// Sum of all entries, one value per leading-rank slice.
    pub fn sum(&self) -> Vec<f64> {
        let w: Vec<Vec<f64>> = self.modes().iter().map(|&n| vec![1.0; n]).collect();
        self.contract_all(&w).expect("weights match modes")
    }
}
