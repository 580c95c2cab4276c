use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::moments::{split, ThetaGrid};
use crate::cross::{cross, CrossOptions, CrossResult, FnEvaluator};
use crate::error::{Error, Result};
use crate::tt::TtTensor;

/// Scalar quantity of interest extracted from the spatial field.
#[derive(Clone, Debug, PartialEq)]
pub enum SpatialFunctional {
    /// Value at one interior unknown.
    Point(usize),
    /// `sum_x w(x) u(x)`, e.g. lumped mass weights over the area.
    Mean(Vec<f64>),
}

impl SpatialFunctional {
    fn weights(&self, n: usize) -> Result<DVector<f64>> {
        match self {
            Self::Point(d) if *d < n => {
                let mut w = DVector::zeros(n);
                w[*d] = 1.0;
                Ok(w)
            }
            Self::Point(d) => Err(Error::Index(format!("unknown {d} of {n}"))),
            Self::Mean(w) if w.len() == n => Ok(DVector::from_column_slice(w)),
            Self::Mean(w) => Err(Error::Shape(format!("{} weights for {n} unknowns", w.len()))),
        }
    }
}

/// Applies the functional to the spatial block: a scalar train over the parametric modes.
pub fn reduce(u: &TtTensor, f: &SpatialFunctional) -> Result<TtTensor> {
    let (u0, param) = split(u)?;
    let w = f.weights(u0.nrows())?;
    let row = DMatrix::from_row_slice(1, u0.ncols(), (u0.transpose() * w).as_slice());
    let first = param.core(0).mul_left(&row);
    param.with_core(0, first)
}

/// Scalar surface on the theta grid.
pub fn reduce_to_grid(u: &TtTensor, f: &SpatialFunctional, grid: &ThetaGrid) -> Result<TtTensor> {
    let s = reduce(u, f)?;
    if grid.dims() != s.ndim() {
        return Err(Error::Shape(format!("grid has {} dimensions, surface {}", grid.dims(), s.ndim())));
    }
    let mut out = s.clone();
    for m in 0..grid.dims() {
        out = out.map_mode(m, &grid.hermite_matrix(m, s.modes()[m] - 1))?;
    }
    Ok(out)
}

/// Interval `[lo, hi]`; infinite ends are allowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Invalid(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{} {}]", self.lo, self.hi)
    }
}

#[derive(Clone, Debug)]
pub struct Characteristic {
    /// Indicator train over the theta grid.
    pub chi: TtTensor,
    /// False when the rank cap stopped the cross before convergence.
    pub exact: bool,
    /// Fraction of random held-out grid points where rounding `chi` gives the wrong class.
    pub misclassification: f64,
    pub cross: CrossResult,
}

impl Characteristic {
    /// Number of grid points with `u` in the interval, `<chi, 1>`.
    pub fn frequency(&self) -> f64 {
        self.chi.sum()[0]
    }

    /// `u` restricted to the level set, `u * chi` on the grid.
    pub fn level_set(&self, surface: &TtTensor) -> Result<TtTensor> {
        surface.hadamard(&self.chi)
    }
}

/// Number of held-out points used for the misclassification rate.
pub const CLASSIFICATION_SAMPLES: usize = 1000;

/// Indicator of `{theta : u(theta) in interval}` on a grid, built by cross.
///
/// `surface` is a scalar train over the theta grid (see [`reduce_to_grid`]).
pub fn characteristic(surface: &TtTensor, interval: Interval, opts: &CrossOptions) -> Result<Characteristic> {
    if surface.boundary_rank() != 1 {
        return Err(Error::Shape("characteristic needs a scalar surface".into()));
    }
    let modes = surface.modes();
    let indicator = |idx: &[usize]| -> f64 {
        let v = surface.value(idx).expect("grid index in range");
        if interval.contains(v) {
            1.0
        } else {
            0.0
        }
    };
    let ev = FnEvaluator::new(modes.clone(), indicator);
    let res = cross(&ev, opts)?;
    let capped = opts.rank_cap.is_some_and(|c| res.tt.max_rank() >= c);
    let chi = res.tt.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(0x5eed));
    let mut wrong = 0usize;
    for _ in 0..CLASSIFICATION_SAMPLES {
        let idx: Vec<usize> = modes.iter().map(|&n| rng.random_range(0..n)).collect();
        let got = chi.value(&idx)? >= 0.5;
        if got != (indicator(&idx) == 1.0) {
            wrong += 1;
        }
    }
    let misclassification = wrong as f64 / CLASSIFICATION_SAMPLES as f64;
    let exact = res.converged && !capped && wrong == 0;
    if !exact {
        log::warn!(
            "characteristic of {interval} is approximate: rank {}, misclassification {misclassification}",
            chi.max_rank()
        );
    }
    Ok(Characteristic {
        chi,
        exact,
        misclassification,
        cross: res,
    })
}

/// Largest sampled `|u|` over all cross fibers; a lower bound on `max |u|`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxEstimate {
    pub value: f64,
    pub index: Vec<usize>,
    pub evaluations: usize,
}

/// Runs a fresh cross on `|u|` and reports the largest entry it sampled.
pub fn max_estimate(u: &TtTensor, opts: &CrossOptions) -> Result<MaxEstimate> {
    if u.boundary_rank() != 1 {
        return Err(Error::Shape("maximum estimate needs a scalar train".into()));
    }
    let ev = FnEvaluator::new(u.modes(), |idx: &[usize]| u.value(idx).expect("index in range").abs());
    let res = cross(&ev, opts)?;
    Ok(MaxEstimate {
        value: res.max_abs,
        index: res.argmax.clone(),
        evaluations: res.evaluations + res.validation_evaluations,
    })
}
