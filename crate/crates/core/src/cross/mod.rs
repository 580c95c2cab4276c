//! Maximum-volume row selection and block cross interpolation of black-box tensors.

mod block;
mod maxvol;

pub use block::{block_cross, cross, CrossOptions, CrossResult, IndexSets, SweepRecord};
pub use maxvol::{matrix_cross, maxvol, MAXVOL_ITERS, MAXVOL_TOL};

use rayon::prelude::*;

/// A tensor known only through an element oracle.
///
/// Each call returns `outputs()` values for one multi-index. Implementations
/// must be pure: the same index always yields bitwise identical values.
pub trait Evaluator: Sync {
    fn modes(&self) -> Vec<usize>;

    /// Number of values `L` returned per index.
    fn outputs(&self) -> usize {
        1
    }

    fn eval(&self, index: &[usize], out: &mut [f64]);

    /// Values for many indices, `outputs()` consecutive entries per index.
    fn eval_batch(&self, indices: &[Vec<usize>]) -> Vec<f64> {
        let l = self.outputs();
        let chunks: Vec<Vec<f64>> = indices
            .par_iter()
            .map(|idx| {
                let mut out = vec![0.0; l];
                self.eval(idx, &mut out);
                out
            })
            .collect();
        chunks.concat()
    }
}

/// Wraps a closure `index -> value` as a single-output evaluator.
pub struct FnEvaluator<F> {
    modes: Vec<usize>,
    f: F,
}

impl<F: Fn(&[usize]) -> f64 + Sync> FnEvaluator<F> {
    pub fn new(modes: Vec<usize>, f: F) -> Self {
        Self { modes, f }
    }
}

impl<F: Fn(&[usize]) -> f64 + Sync> Evaluator for FnEvaluator<F> {
    fn modes(&self) -> Vec<usize> {
        self.modes.clone()
    }

    fn eval(&self, index: &[usize], out: &mut [f64]) {
        out[0] = (self.f)(index);
    }
}

/// Wraps a closure `(index, out)` as an evaluator with `L` outputs.
pub struct BlockFnEvaluator<F> {
    modes: Vec<usize>,
    outputs: usize,
    f: F,
}

impl<F: Fn(&[usize], &mut [f64]) + Sync> BlockFnEvaluator<F> {
    pub fn new(modes: Vec<usize>, outputs: usize, f: F) -> Self {
        Self { modes, outputs, f }
    }
}

impl<F: Fn(&[usize], &mut [f64]) + Sync> Evaluator for BlockFnEvaluator<F> {
    fn modes(&self) -> Vec<usize> {
        self.modes.clone()
    }

    fn outputs(&self) -> usize {
        self.outputs
    }

    fn eval(&self, index: &[usize], out: &mut [f64]) {
        (self.f)(index, out)
    }
}
