use std::collections::HashMap;

use nalgebra::DMatrix;

use super::moments::{fluctuation_gram, split};
use crate::error::{Error, Result};
use crate::tt::TtTensor;

/// Largest subset handled by the inclusion-exclusion recursion.
pub const SOBOL_LIMIT: usize = 12;

/// A nonempty set of parametric variables, numbered from 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SobolSpec {
    q: Vec<usize>,
}

impl SobolSpec {
    pub fn new(mut q: Vec<usize>) -> Result<Self> {
        q.sort_unstable();
        let before = q.len();
        q.dedup();
        if q.is_empty() || q.len() != before || q[0] == 0 {
            return Err(Error::Invalid(format!("Sobol subset {q:?} must be nonempty, duplicate-free and 1-based")));
        }
        if q.len() > SOBOL_LIMIT {
            return Err(Error::Guard {
                what: "Sobol subset recursion",
                size: 1 << q.len(),
                limit: 1 << SOBOL_LIMIT,
            });
        }
        Ok(Self { q })
    }

    pub fn variables(&self) -> &[usize] {
        &self.q
    }

    /// Every nonempty subset of `1..=m`, ordered by size then lexicographically.
    pub fn all(m: usize) -> Result<Vec<Self>> {
        if m > SOBOL_LIMIT {
            return Err(Error::Guard {
                what: "Sobol subset enumeration",
                size: 1 << m,
                limit: 1 << SOBOL_LIMIT,
            });
        }
        let mut out: Vec<Self> = (1u32..1 << m)
            .map(|mask| Self {
                q: (0..m).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect(),
            })
            .collect();
        out.sort_by(|a, b| a.q.len().cmp(&b.q.len()).then(a.q.cmp(&b.q)));
        Ok(out)
    }

    pub fn label(&self) -> String {
        let v: Vec<String> = self.q.iter().map(|v| v.to_string()).collect();
        format!("{{{}}}", v.join(" "))
    }
}

#[derive(Clone, Debug)]
pub struct SobolIndex {
    pub spec: SobolSpec,
    /// Partial variance `D_q(x)`.
    pub partial: Vec<f64>,
    /// `S_q(x) = D_q(x) / D(x)`, zero where `D(x) = 0`.
    pub index: Vec<f64>,
    /// `sum_x D_q(x) / sum_x D(x)`.
    pub aggregate: f64,
}

/// Partial variances of a response surface, memoized over subsets.
pub struct SobolAnalysis {
    u0: DMatrix<f64>,
    param: TtTensor,
    total: Vec<f64>,
    restricted: HashMap<Vec<usize>, Vec<f64>>,
    partial: HashMap<Vec<usize>, Vec<f64>>,
}

impl SobolAnalysis {
    pub fn new(u: &TtTensor) -> Result<Self> {
        let (u0, param) = split(u)?;
        let gram = fluctuation_gram(&param)?;
        let total = diag(&u0, &gram);
        Ok(Self {
            u0,
            param,
            total,
            restricted: HashMap::new(),
            partial: HashMap::new(),
        })
    }

    /// Total variance `D(x)`.
    pub fn variance(&self) -> &[f64] {
        &self.total
    }

    /// Variance of `u` restricted to the variables `t` (all others at order zero).
    fn restricted_variance(&mut self, t: &[usize]) -> Result<Vec<f64>> {
        if let Some(v) = self.restricted.get(t) {
            return Ok(v.clone());
        }
        let mut w = self.param.clone();
        for (m, n) in self.param.modes().into_iter().enumerate() {
            if !t.contains(&(m + 1)) {
                let mut p0 = DMatrix::zeros(1, n);
                p0[(0, 0)] = 1.0;
                w = w.map_mode(m, &p0)?;
            }
        }
        let v = diag(&self.u0, &fluctuation_gram(&w)?);
        self.restricted.insert(t.to_vec(), v.clone());
        Ok(v)
    }

    /// `D_q = V_q - sum_{t proper nonempty subset of q} D_t`.
    fn partial_variance(&mut self, q: &[usize]) -> Result<Vec<f64>> {
        if let Some(v) = self.partial.get(q) {
            return Ok(v.clone());
        }
        let mut d = self.restricted_variance(q)?;
        for mask in 1u32..(1 << q.len()) - 1 {
            let t: Vec<usize> = (0..q.len()).filter(|b| mask >> b & 1 == 1).map(|b| q[b]).collect();
            let dt = self.partial_variance(&t)?;
            for (a, b) in d.iter_mut().zip(dt) {
                *a -= b;
            }
        }
        self.partial.insert(q.to_vec(), d.clone());
        Ok(d)
    }

    pub fn index(&mut self, spec: &SobolSpec) -> Result<SobolIndex> {
        let m = self.param.ndim();
        if let Some(&v) = spec.q.iter().find(|&&v| v > m) {
            return Err(Error::Invalid(format!("variable {v} exceeds the {m} parametric dimensions")));
        }
        let partial = self.partial_variance(&spec.q)?;
        let index = partial
            .iter()
            .zip(&self.total)
            .map(|(&d, &t)| if t > 0.0 { d / t } else { 0.0 })
            .collect();
        let total: f64 = self.total.iter().sum();
        let aggregate = if total > 0.0 {
            partial.iter().sum::<f64>() / total
        } else {
            0.0
        };
        Ok(SobolIndex {
            spec: spec.clone(),
            partial,
            index,
            aggregate,
        })
    }
}

fn diag(u0: &DMatrix<f64>, g: &DMatrix<f64>) -> Vec<f64> {
    let ug = u0 * g;
    (0..u0.nrows()).map(|i| ug.row(i).dot(&u0.row(i))).collect()
}

/// Sobol index of one subset.
pub fn sobol_index(u: &TtTensor, spec: &SobolSpec) -> Result<SobolIndex> {
    SobolAnalysis::new(u)?.index(spec)
}
