use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest explicit (sparse) multi-index set that will be enumerated.
pub const SPARSE_LIMIT: usize = 1_000_000;

/// Retained polynomial orders of a chaos expansion.
#[derive(Clone, Debug, PartialEq)]
pub enum MultiIndexSet {
    /// Tensor box `0 <= alpha_m <= p_m`, kept implicit.
    Full { limits: Vec<usize> },
    /// Total-degree simplex `|alpha| <= p`, enumerated lexicographically
    /// (first component most significant).
    Sparse {
        m: usize,
        p: usize,
        list: Vec<Vec<usize>>,
        lookup: HashMap<Vec<usize>, usize>,
    },
}

/// `C(n, k)` as `u128`, saturating on overflow.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

impl MultiIndexSet {
    pub fn full(limits: Vec<usize>) -> Self {
        MultiIndexSet::Full { limits }
    }

    /// Same order limit `p` in each of `m` variables.
    pub fn full_uniform(m: usize, p: usize) -> Self {
        MultiIndexSet::Full { limits: vec![p; m] }
    }

    pub fn sparse(m: usize, p: usize) -> Result<Self> {
        let card = binomial(m + p, p);
        if card > SPARSE_LIMIT as u128 {
            return Err(Error::Guard {
                what: "sparse multi-index set",
                size: card.min(usize::MAX as u128) as usize,
                limit: SPARSE_LIMIT,
            });
        }
        let mut list = Vec::with_capacity(card as usize);
        let mut cur = vec![0usize; m];
        enumerate(&mut cur, 0, p, &mut list);
        let lookup = list.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        Ok(MultiIndexSet::Sparse { m, p, list, lookup })
    }

    pub fn dims(&self) -> usize {
        match self {
            MultiIndexSet::Full { limits } => limits.len(),
            MultiIndexSet::Sparse { m, .. } => *m,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            MultiIndexSet::Full { limits } => limits.iter().map(|p| p + 1).product(),
            MultiIndexSet::Sparse { list, .. } => list.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, alpha: &[usize]) -> bool {
        self.position(alpha).is_some()
    }

    /// Position of `alpha`; for full sets the first component varies fastest.
    pub fn position(&self, alpha: &[usize]) -> Option<usize> {
        match self {
            MultiIndexSet::Full { limits } => {
                if alpha.len() != limits.len() {
                    return None;
                }
                let mut pos = 0;
                let mut stride = 1;
                for (&a, &p) in alpha.iter().zip(limits) {
                    if a > p {
                        return None;
                    }
                    pos += a * stride;
                    stride *= p + 1;
                }
                Some(pos)
            }
            MultiIndexSet::Sparse { lookup, .. } => lookup.get(alpha).copied(),
        }
    }

    /// Multi-index at position `i`, inverse of [`position`](Self::position).
    pub fn get(&self, i: usize) -> Vec<usize> {
        match self {
            MultiIndexSet::Full { limits } => {
                let mut rest = i;
                limits
                    .iter()
                    .map(|&p| {
                        let a = rest % (p + 1);
                        rest /= p + 1;
                        a
                    })
                    .collect()
            }
            MultiIndexSet::Sparse { list, .. } => list[i].clone(),
        }
    }

    /// All members in position order.
    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Largest total degree `|alpha|` in the set.
    pub fn max_degree(&self) -> usize {
        match self {
            MultiIndexSet::Full { limits } => limits.iter().sum(),
            MultiIndexSet::Sparse { p, .. } => *p,
        }
    }
}

fn enumerate(cur: &mut Vec<usize>, k: usize, budget: usize, out: &mut Vec<Vec<usize>>) {
    if k == cur.len() {
        out.push(cur.clone());
        return;
    }
    for a in 0..=budget {
        cur[k] = a;
        enumerate(cur, k + 1, budget - a, out);
    }
    cur[k] = 0;
}
