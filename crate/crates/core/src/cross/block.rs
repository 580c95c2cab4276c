use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::maxvol::{maxvol, MAXVOL_TOL};
use super::Evaluator;
use crate::error::{Error, Result};
use crate::linalg;
use crate::tt::{Core, TtTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct CrossOptions {
    /// Relative accuracy of each block SVD and of the sweep-to-sweep change.
    pub eps: f64,
    pub max_sweeps: usize,
    /// Interior rank of the random initial guess.
    pub guess_rank: usize,
    pub seed: u64,
    /// Size of the random validation set.
    pub heldout: usize,
    /// Restarts with a doubled guess rank when the validation error stalls.
    pub max_restarts: usize,
    /// Validation errors below `stall_factor * eps` never trigger a restart.
    pub stall_factor: f64,
    pub rank_cap: Option<usize>,
    /// Write one CSV line per sweep to standard error.
    pub trace: bool,
    pub maxvol_tol: f64,
}

impl Default for CrossOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            max_sweeps: 10,
            guess_rank: 8,
            seed: 0,
            heldout: 1000,
            max_restarts: 2,
            stall_factor: 1.0,
            rank_cap: None,
            trace: false,
            maxvol_tol: MAXVOL_TOL,
        }
    }
}

impl CrossOptions {
    pub fn with_eps(eps: f64) -> Self {
        Self {
            eps,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    pub max_rank: usize,
    pub evaluations: usize,
    pub heldout_error: f64,
    /// Relative Frobenius change from the previous sweep (infinite on the first).
    pub change: f64,
}

/// Nested interpolation indices of the final sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IndexSets {
    /// `left[k]` holds `r_k` tuples of length `k`, for `k = 0..M-1`.
    pub left: Vec<Vec<Vec<usize>>>,
    /// `right[k]` holds `r_k` tuples of length `M-k`, for `k = 1..M` (`right[0]` is empty).
    pub right: Vec<Vec<Vec<usize>>>,
    /// Condition numbers of the left interface matrices.
    pub left_cond: Vec<f64>,
    pub right_cond: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CrossResult {
    /// The approximation, with the evaluator's output index as leading rank.
    pub tt: TtTensor,
    /// Distinct indices passed to the evaluator during construction.
    pub evaluations: usize,
    /// Indices evaluated for validation only.
    pub validation_evaluations: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub heldout_error: f64,
    pub restarts: usize,
    /// Largest `|u_l(alpha)|` among all sampled entries, its index and output.
    pub max_abs: f64,
    pub argmax: Vec<usize>,
    pub argmax_output: usize,
    pub history: Vec<SweepRecord>,
    pub sets: IndexSets,
    /// `2 * sweeps * sum_k n_k * r_max^2`, the a-priori sampling budget.
    pub budget_bound: usize,
}

impl CrossResult {
    /// Evaluations per stored TT entry.
    pub fn overhead(&self) -> f64 {
        self.evaluations as f64 / self.tt.storage() as f64
    }
}

struct Sampler<'a, E: Evaluator + ?Sized> {
    ev: &'a E,
    outputs: usize,
    slots: HashMap<Vec<usize>, usize>,
    values: Vec<f64>,
    max_abs: f64,
    argmax: Vec<usize>,
    argmax_output: usize,
}

impl<'a, E: Evaluator + ?Sized> Sampler<'a, E> {
    fn new(ev: &'a E) -> Self {
        Self {
            ev,
            outputs: ev.outputs(),
            slots: HashMap::new(),
            values: Vec::new(),
            max_abs: 0.0,
            argmax: Vec::new(),
            argmax_output: 0,
        }
    }

    fn evaluations(&self) -> usize {
        self.slots.len()
    }

    fn fetch(&mut self, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
        let mut missing: Vec<Vec<usize>> = Vec::new();
        let mut pending: HashMap<&[usize], ()> = HashMap::new();
        for idx in indices {
            if !self.slots.contains_key(idx) && pending.insert(idx.as_slice(), ()).is_none() {
                missing.push(idx.clone());
            }
        }
        drop(pending);
        if !missing.is_empty() {
            let vals = self.ev.eval_batch(&missing);
            let l = self.outputs;
            for (i, idx) in missing.into_iter().enumerate() {
                let chunk = &vals[i * l..(i + 1) * l];
                if chunk.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { index: idx });
                }
                for (o, &v) in chunk.iter().enumerate() {
                    if v.abs() > self.max_abs || self.argmax.is_empty() {
                        self.max_abs = v.abs();
                        self.argmax = idx.clone();
                        self.argmax_output = o;
                    }
                }
                let slot = self.values.len();
                self.values.extend_from_slice(chunk);
                self.slots.insert(idx, slot);
            }
        }
        let l = self.outputs;
        let mut out = Vec::with_capacity(indices.len() * l);
        for idx in indices {
            let s = self.slots[idx];
            out.extend_from_slice(&self.values[s..s + l]);
        }
        Ok(out)
    }

    /// Samples `u_l(left_s, a, right_t)`; layout `s + rl*(a + n*(t + rr*l))`.
    fn fiber(&mut self, left: &[Vec<usize>], n: usize, right: &[Vec<usize>]) -> Result<Vec<f64>> {
        let (rl, rr) = (left.len(), right.len());
        let mut idx = Vec::with_capacity(rl * n * rr);
        for t in right {
            for a in 0..n {
                for s in left {
                    let mut full = Vec::with_capacity(s.len() + 1 + t.len());
                    full.extend_from_slice(s);
                    full.push(a);
                    full.extend_from_slice(t);
                    idx.push(full);
                }
            }
        }
        let raw = self.fetch(&idx)?;
        let l = self.outputs;
        let block = rl * n * rr;
        let mut v = vec![0.0; block * l];
        for p in 0..block {
            for o in 0..l {
                v[p + block * o] = raw[p * l + o];
            }
        }
        Ok(v)
    }
}

/// `ul^{-1} v ur^{-1}` applied to every output slab of a sampled fiber.
fn interpolate(
    v: &[f64],
    rl: usize,
    n: usize,
    rr: usize,
    l: usize,
    ul: &DMatrix<f64>,
    ur: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let x = linalg::solve(ul, &linalg::view(v, rl, n * rr * l).into_owned())?;
    let block = rl * n * rr;
    let mut out = Vec::with_capacity(block * l);
    for o in 0..l {
        let slab = linalg::view(&x.as_slice()[o * block..(o + 1) * block], rl * n, rr).into_owned();
        out.extend_from_slice(linalg::solve_right(&slab, ur)?.as_slice());
    }
    Ok(out)
}

fn truncated_rank(s: &[f64], eps: f64, cap: Option<usize>) -> usize {
    let r = linalg::truncation_rank(s, eps);
    cap.map_or(r, |c| r.min(c.max(1)))
}

struct State {
    cores: Vec<Core>,
    left: Vec<Vec<Vec<usize>>>,
    ul: Vec<DMatrix<f64>>,
    right: Vec<Vec<Vec<usize>>>,
    ur: Vec<DMatrix<f64>>,
}

fn sweep<E: Evaluator + ?Sized>(
    st: &mut State,
    sampler: &mut Sampler<'_, E>,
    modes: &[usize],
    warmup: bool,
    opts: &CrossOptions,
    r_max: &mut usize,
) -> Result<TtTensor> {
    let m = modes.len();
    let l = sampler.outputs;
    // forward: refresh blocks (after warmup) and the left index sets
    for k in 0..m.saturating_sub(1) {
        let n = modes[k];
        let rl = st.left[k].len();
        if warmup {
            let (q, r) = linalg::qr_thin(st.cores[k].left_fold().into_owned());
            st.cores[k] = Core::from_left(rl, n, &q);
            st.cores[k + 1] = st.cores[k + 1].mul_left(&r);
        } else {
            let rr = st.right[k + 1].len();
            let v = sampler.fiber(&st.left[k], n, &st.right[k + 1])?;
            let uhat = interpolate(&v, rl, n, rr, l, &st.ul[k], &st.ur[k + 1])?;
            let d = linalg::svd(&linalg::view(&uhat, rl * n, rr * l).into_owned());
            let r = truncated_rank(&d.s, opts.eps, opts.rank_cap);
            st.cores[k] = Core::from_left(rl, n, &d.u.columns(0, r).into_owned());
        }
        let v = st.cores[k].mul_left(&st.ul[k]);
        let vf = v.left_fold().into_owned();
        let rows = maxvol(&vf, opts.maxvol_tol)?;
        st.left[k + 1] = rows
            .iter()
            .map(|&i| {
                let mut t = st.left[k][i % rl].clone();
                t.push(i / rl);
                t
            })
            .collect();
        st.ul[k + 1] = DMatrix::from_fn(rows.len(), vf.ncols(), |i, j| vf[(rows[i], j)]);
        *r_max = (*r_max).max(rows.len());
    }
    // backward: sample every block but the first, collect right index sets
    for k in (1..m).rev() {
        let n = modes[k];
        let (rl, rr) = (st.left[k].len(), st.right[k + 1].len());
        let v = sampler.fiber(&st.left[k], n, &st.right[k + 1])?;
        let uhat = interpolate(&v, rl, n, rr, l, &st.ul[k], &st.ur[k + 1])?;
        // rows (s, l), columns (a, t)
        let b = DMatrix::from_fn(rl * l, n * rr, |row, col| {
            let (s, o) = (row % rl, row / rl);
            let (a, t) = (col % n, col / n);
            uhat[s + rl * (a + n * (t + rr * o))]
        });
        let d = linalg::svd(&b);
        let r = truncated_rank(&d.s, opts.eps, opts.rank_cap);
        st.cores[k] = Core::from_right(n, rr, &d.vt.rows(0, r).into_owned());
        let w = st.cores[k].mul_right(&st.ur[k + 1]);
        let wf = w.right_fold().into_owned();
        let cols = maxvol(&wf.transpose(), opts.maxvol_tol)?;
        st.right[k] = cols
            .iter()
            .map(|&c| {
                let mut t = vec![c % n];
                t.extend_from_slice(&st.right[k + 1][c / n]);
                t
            })
            .collect();
        st.ur[k] = DMatrix::from_fn(r, cols.len(), |i, j| wf[(i, cols[j])]);
        *r_max = (*r_max).max(r);
    }
    // first block carries the output index as its leading rank
    let n = modes[0];
    let rr = st.right[1].len();
    let v = sampler.fiber(&st.left[0], n, &st.right[1])?;
    let x = interpolate(&v, 1, n, rr, l, &st.ul[0], &st.ur[1])?;
    let first = Core::from_fn(l, n, rr, |o, a, t| x[a + n * (t + rr * o)]);
    let mut cores = Vec::with_capacity(m);
    cores.push(first);
    cores.extend_from_slice(&st.cores[1..]);
    TtTensor::new(cores)
}

/// Random held-out entries. The error is the sampled residual scaled to the
/// whole index set, relative to the Frobenius norm of the approximation, so
/// that a few large entries among many tiny ones do not dominate.
struct Validation {
    indices: Vec<Vec<usize>>,
    values: Vec<f64>,
    norm: f64,
    scale: f64,
}

impl Validation {
    fn new<E: Evaluator + ?Sized>(ev: &E, modes: &[usize], count: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_4e1d_0u64);
        let indices: Vec<Vec<usize>> = (0..count)
            .map(|_| modes.iter().map(|&n| rng.random_range(0..n)).collect())
            .collect();
        let values = ev.eval_batch(&indices);
        let l = ev.outputs();
        for (i, chunk) in values.chunks(l.max(1)).enumerate() {
            if chunk.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    index: indices[i].clone(),
                });
            }
        }
        let norm = linalg::frobenius(&values);
        let total: f64 = modes.iter().map(|&n| n as f64).product();
        let scale = if count > 0 { (total / count as f64).sqrt() } else { 0.0 };
        Ok(Self {
            indices,
            values,
            norm,
            scale,
        })
    }

    fn error(&self, tt: &TtTensor) -> f64 {
        if self.indices.is_empty() {
            return 0.0;
        }
        let l = tt.boundary_rank();
        let mut err = 0.0;
        for (i, idx) in self.indices.iter().enumerate() {
            let got = tt.element_unchecked(idx);
            for o in 0..l {
                let d = got[o] - self.values[i * l + o];
                err += d * d;
            }
        }
        let reference = tt.norm();
        if reference > 0.0 {
            self.scale * err.sqrt() / reference
        } else if self.norm > 0.0 {
            err.sqrt() / self.norm
        } else {
            err.sqrt()
        }
    }
}

fn fresh_state(guess: &TtTensor) -> State {
    let m = guess.ndim();
    let one = DMatrix::from_element(1, 1, 1.0);
    let mut left = vec![Vec::new(); m];
    left[0] = vec![Vec::new()];
    let mut ul = vec![DMatrix::zeros(0, 0); m];
    ul[0] = one.clone();
    let mut right = vec![Vec::new(); m + 1];
    right[m] = vec![Vec::new()];
    let mut ur = vec![DMatrix::zeros(0, 0); m + 1];
    ur[m] = one;
    State {
        cores: guess.cores().to_vec(),
        left,
        ul,
        right,
        ur,
    }
}

/// Block cross interpolation with a random initial guess of rank `opts.guess_rank`.
pub fn cross<E: Evaluator + ?Sized>(ev: &E, opts: &CrossOptions) -> Result<CrossResult> {
    let modes = ev.modes();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let guess = random_guess(&modes, opts.guess_rank, &mut rng)?;
    block_cross(ev, &guess, opts)
}

fn random_guess(modes: &[usize], rank: usize, rng: &mut ChaCha8Rng) -> Result<TtTensor> {
    let ranks = vec![rank.max(1); modes.len().saturating_sub(1)];
    TtTensor::random(modes, &ranks, rng)
}

/// Block cross interpolation starting from `guess` (leading rank 1).
///
/// Returns a train whose leading rank equals `ev.outputs()`.
pub fn block_cross<E: Evaluator + ?Sized>(
    ev: &E,
    guess: &TtTensor,
    opts: &CrossOptions,
) -> Result<CrossResult> {
    let modes = ev.modes();
    if guess.modes() != modes {
        return Err(Error::Shape(format!(
            "guess modes {:?} differ from evaluator modes {modes:?}",
            guess.modes()
        )));
    }
    if guess.boundary_rank() != 1 {
        return Err(Error::Shape("the initial guess must have leading rank 1".into()));
    }
    if ev.outputs() == 0 {
        return Err(Error::Invalid("evaluator declares zero outputs".into()));
    }
    if !(opts.eps > 0.0) || opts.max_sweeps == 0 {
        return Err(Error::Invalid("cross needs eps > 0 and at least one sweep".into()));
    }
    let validation = Validation::new(ev, &modes, opts.heldout, opts.seed)?;
    let mut sampler = Sampler::new(ev);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(0x9e37_79b9));
    let mut guess = guess.clone();
    let mut history = Vec::new();
    let mut restarts = 0;
    let mut total_sweeps = 0;
    let mut r_max = guess.max_rank();
    if opts.trace {
        eprintln!("sweep,max_rank,evaluations,heldout_error");
    }
    loop {
        let mut st = fresh_state(&guess);
        let mut prev: Option<TtTensor> = None;
        let mut errs: Vec<f64> = Vec::new();
        let mut converged = false;
        let mut restart_rank = None;
        for s in 1..=opts.max_sweeps {
            total_sweeps += 1;
            let tt = match sweep(&mut st, &mut sampler, &modes, s == 1, opts, &mut r_max) {
                Ok(tt) => tt,
                Err(Error::RankDeficient(msg)) if restarts < opts.max_restarts => {
                    log::warn!("cross: singular interface ({msg}); restarting from a fresh guess");
                    restart_rank = Some(guess.max_rank());
                    break;
                }
                Err(e) => return Err(e),
            };
            let tnorm = tt.norm();
            let change = match &prev {
                None => f64::INFINITY,
                Some(p) => {
                    let d = tt.sub(p)?.norm();
                    if tnorm > 0.0 {
                        d / tnorm
                    } else {
                        d
                    }
                }
            };
            let err = validation.error(&tt);
            let rec = SweepRecord {
                sweep: total_sweeps,
                max_rank: tt.max_rank(),
                evaluations: sampler.evaluations(),
                heldout_error: err,
                change,
            };
            if opts.trace {
                eprintln!("{},{},{},{:e}", rec.sweep, rec.max_rank, rec.evaluations, rec.heldout_error);
                let _ = std::io::stderr().flush();
            }
            log::debug!("cross sweep {rec:?}");
            history.push(rec);
            errs.push(err);
            converged = change < opts.eps;
            let threshold = opts.stall_factor * opts.eps;
            let n = errs.len();
            let stalled = n >= 2
                && errs[n - 1] > threshold
                && errs[n - 2] > threshold
                && errs[n - 1] >= 0.9 * errs[n - 2];
            let capped = opts.rank_cap.is_some_and(|c| tt.max_rank() >= c);
            let new_guess_rank = 2 * tt.max_rank().max(guess.max_rank());
            prev = Some(tt);
            if stalled && !capped && restarts < opts.max_restarts {
                restart_rank = Some(new_guess_rank);
                break;
            }
            if converged {
                break;
            }
        }
        if let Some(rank) = restart_rank {
            restarts += 1;
            let rank = opts.rank_cap.map_or(rank, |c| rank.min(c));
            log::info!("cross: restart {restarts} with guess rank {rank}");
            guess = random_guess(&modes, rank, &mut rng)?;
            r_max = r_max.max(rank);
            continue;
        }
        let tt = prev.ok_or_else(|| Error::Invalid("cross produced no iterate".into()))?;
        let heldout_error = validation.error(&tt);
        let sets = IndexSets {
            left_cond: st.ul.iter().map(linalg::condition_number).collect(),
            right_cond: st.ur.iter().skip(1).map(linalg::condition_number).collect(),
            left: st.left,
            right: st.right,
        };
        for (k, c) in sets.left_cond.iter().chain(&sets.right_cond).enumerate() {
            if *c > 1e8 {
                log::warn!("cross: interface matrix {k} has condition number {c:e}");
            }
        }
        let budget_bound = 2 * total_sweeps * modes.iter().sum::<usize>() * r_max * r_max;
        return Ok(CrossResult {
            tt,
            evaluations: sampler.evaluations(),
            validation_evaluations: validation.indices.len(),
            sweeps: total_sweeps,
            converged,
            heldout_error,
            restarts,
            max_abs: sampler.max_abs,
            argmax: sampler.argmax,
            argmax_output: sampler.argmax_output,
            history,
            sets,
            budget_bound,
        });
    }
}
