use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cross::CrossOptions;
use crate::pce::{factorial, gauss_hermite, hermite_values};
use crate::tt::{increment, TtTensor};

fn random_surface(n: usize, m: usize, p: usize, rank: usize, seed: u64) -> TtTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = vec![n];
    modes.extend(std::iter::repeat_n(p + 1, m));
    TtTensor::random(&modes, &vec![rank; m], &mut rng).unwrap()
}

/// All `(alpha, u_alpha)` pairs of a small surface.
fn coefficients(u: &TtTensor) -> Vec<(Vec<usize>, Vec<f64>)> {
    let modes = u.modes();
    let param = &modes[1..];
    let mut alpha = vec![0; param.len()];
    let mut out = Vec::new();
    loop {
        let col = (0..modes[0])
            .map(|x| {
                let mut idx = vec![x];
                idx.extend(&alpha);
                u.value(&idx).unwrap()
            })
            .collect();
        out.push((alpha.clone(), col));
        if !increment(&mut alpha, param) {
            break;
        }
    }
    out
}

fn mass(alpha: &[usize]) -> f64 {
    alpha.iter().map(|&a| factorial(a)).product()
}

fn separable(w: &[Vec<f64>]) -> TtTensor {
    TtTensor::rank_one(w).unwrap()
}

#[test]
fn deterministic_surface() {
    let field = vec![1.0, -2.0, 0.5];
    let u = separable(&[field.clone(), vec![1.0, 0.0, 0.0], vec![1.0, 0.0]]);
    assert_eq!(mean(&u).unwrap(), field);
    let c = covariance(&u).unwrap();
    assert!(c.matrix().unwrap().amax() < 1e-15);
    assert!(variance(&u).unwrap().iter().all(|v| v.abs() < 1e-15));
    let at = surface_eval(&u, &[1.3, -0.4]).unwrap();
    for (a, b) in at.iter().zip(&field) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn single_mode_covariance_is_outer_product() {
    let w = vec![0.3, -1.1, 2.0, 0.7];
    let u = separable(&[w.clone(), vec![0.0, 1.0, 0.0]]);
    let c = covariance(&u).unwrap().matrix().unwrap();
    let v = nalgebra::DVector::from_vec(w);
    assert!((c - &v * v.transpose()).amax() < 1e-14);
}

#[test]
fn covariance_matches_dense_sum() {
    let u = random_surface(7, 3, 2, 3, 11);
    let mut want = DMatrix::zeros(7, 7);
    for (alpha, col) in coefficients(&u) {
        if alpha.iter().all(|&a| a == 0) {
            continue;
        }
        let v = nalgebra::DVector::from_vec(col);
        want += &v * v.transpose() * mass(&alpha);
    }
    let cov = covariance(&u).unwrap();
    let got = cov.matrix().unwrap();
    assert!((&got - &want).amax() <= 1e-10 * want.amax());
    for (i, v) in cov.variance().iter().enumerate() {
        assert!((v - got[(i, i)]).abs() <= 1e-14 * got[(i, i)].abs().max(1.0));
    }
    let eig = got.symmetric_eigenvalues();
    assert!(eig.min() >= -1e-10 * eig.max());
    assert_eq!(covariance_error(&cov, &cov).unwrap(), 0.0);
}

#[test]
fn mean_is_linear() {
    let u = random_surface(5, 2, 3, 2, 1);
    let v = random_surface(5, 2, 3, 3, 2);
    let w = u.scale(2.0).add(&v.scale(-0.5)).unwrap();
    let (mu, mv, mw) = (mean(&u).unwrap(), mean(&v).unwrap(), mean(&w).unwrap());
    for i in 0..5 {
        assert!((mw[i] - (2.0 * mu[i] - 0.5 * mv[i])).abs() < 1e-12);
    }
}

#[test]
fn surface_eval_matches_dense_sum() {
    let u = random_surface(4, 3, 2, 2, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let coeffs = coefficients(&u);
    for trial in 0..5 {
        let theta: Vec<f64> = if trial == 0 {
            vec![0.0; 3]
        } else {
            (0..3).map(|_| rng.random_range(-3.0..3.0)).collect()
        };
        let h: Vec<Vec<f64>> = theta.iter().map(|&t| hermite_values(2, t)).collect();
        let mut want = [0.0; 4];
        for (alpha, col) in &coeffs {
            if trial == 0 && alpha.iter().any(|a| a % 2 == 1) {
                continue;
            }
            let w: f64 = alpha.iter().enumerate().map(|(m, &a)| h[m][a]).product();
            for x in 0..4 {
                want[x] += w * col[x];
            }
        }
        let got = surface_eval(&u, &theta).unwrap();
        for x in 0..4 {
            assert!((got[x] - want[x]).abs() < 1e-12, "{trial} {x}");
        }
    }
    assert!(surface_eval(&u, &[0.0, 7.0, 0.0]).is_err());
}

#[test]
fn grid_quadrature_reproduces_mean() {
    let u = random_surface(3, 2, 3, 2, 4);
    let (nodes, weights) = gauss_hermite(4);
    let grid = ThetaGrid::new(vec![nodes.clone(), nodes.clone()]).unwrap();
    let g = surface_grid(&u, &grid).unwrap();
    assert_eq!(g.ranks(), u.ranks());
    let avg = g.contract_mode(2, &weights).unwrap().contract_mode(1, &weights).unwrap();
    let want = mean(&u).unwrap();
    for x in 0..3 {
        assert!((avg.value(&[x]).unwrap() - want[x]).abs() < 1e-12);
    }
}

#[test]
fn theta_grid_validation() {
    assert!(ThetaGrid::new(vec![vec![0.0, 0.0]]).is_err());
    assert!(ThetaGrid::new(vec![vec![]]).is_err());
    assert!(ThetaGrid::uniform(2, 3, 8.0).is_err());
    let g = ThetaGrid::default_for(3);
    assert_eq!(g.sizes(), vec![9, 9, 9]);
    assert_eq!(g.nodes[0][0], -4.0);
    assert_eq!(g.nodes[0][8], 4.0);
}

#[test]
fn additive_sobol() {
    let (w1, w2) = (vec![1.0, 2.0, 0.0], vec![1.0, 1.0, 0.0]);
    let e1 = vec![0.0, 1.0];
    let e0 = vec![1.0, 0.0];
    let a = separable(&[w1.clone(), e1.clone(), e0.clone()]);
    let b = separable(&[w2.clone(), e0, e1]);
    let u = a.add(&b).unwrap();
    let mut s = SobolAnalysis::new(&u).unwrap();
    let one = s.index(&SobolSpec::new(vec![1]).unwrap()).unwrap();
    let both = s.index(&SobolSpec::new(vec![2, 1]).unwrap()).unwrap();
    for x in 0..2 {
        let want = w1[x] * w1[x] / (w1[x] * w1[x] + w2[x] * w2[x]);
        assert!((one.index[x] - want).abs() < 1e-14);
        assert!(both.index[x].abs() < 1e-14);
    }
    // zero variance at the third point
    assert_eq!(one.index[2], 0.0);
    assert!((one.aggregate - 5.0 / 7.0).abs() < 1e-14);
}

#[test]
fn single_variable_sobol() {
    let u = separable(&[vec![1.0, -3.0], vec![2.0, 1.0, 0.5], vec![1.0, 0.0, 0.0]]);
    let mut s = SobolAnalysis::new(&u).unwrap();
    for spec in SobolSpec::all(2).unwrap() {
        let want = if spec.variables() == [1] { 1.0 } else { 0.0 };
        let r = s.index(&spec).unwrap();
        for x in 0..2 {
            assert!((r.index[x] - want).abs() < 1e-14, "{}", spec.label());
        }
    }
}

#[test]
fn sobol_completeness_and_dense_partials() {
    let u = random_surface(6, 3, 2, 3, 21);
    let coeffs = coefficients(&u);
    let mut s = SobolAnalysis::new(&u).unwrap();
    let total = s.variance().to_vec();
    let mut sum = [0.0; 6];
    for spec in SobolSpec::all(3).unwrap() {
        let r = s.index(&spec).unwrap();
        let mut want = [0.0; 6];
        for (alpha, col) in &coeffs {
            let support: Vec<usize> = (0..3).filter(|&m| alpha[m] > 0).map(|m| m + 1).collect();
            if support == spec.variables() {
                for x in 0..6 {
                    want[x] += mass(alpha) * col[x] * col[x];
                }
            }
        }
        for x in 0..6 {
            assert!((r.partial[x] - want[x]).abs() <= 1e-10 * total[x]);
            sum[x] += r.partial[x];
        }
    }
    for x in 0..6 {
        assert!((sum[x] - total[x]).abs() <= 1e-10 * total[x]);
    }
}

#[test]
fn sobol_spec_validation() {
    assert!(SobolSpec::new(vec![]).is_err());
    assert!(SobolSpec::new(vec![1, 1]).is_err());
    assert!(SobolSpec::new(vec![0]).is_err());
    assert!(matches!(SobolSpec::new((1..=13).collect()), Err(crate::Error::Guard { .. })));
    assert_eq!(SobolSpec::new(vec![3, 1]).unwrap().variables(), &[1, 3]);
    let u = random_surface(2, 2, 1, 1, 0);
    assert!(sobol_index(&u, &SobolSpec::new(vec![3]).unwrap()).is_err());
}

fn exact_opts() -> CrossOptions {
    CrossOptions {
        eps: 1e-10,
        guess_rank: 4,
        max_sweeps: 12,
        ..CrossOptions::default()
    }
}

#[test]
fn whole_line_characteristic() {
    let s = random_surface(1, 3, 2, 2, 3).contract_mode(0, &[1.0]).unwrap();
    let grid = ThetaGrid::uniform(3, 5, 2.0).unwrap();
    let mut g = s.clone();
    for m in 0..3 {
        g = g.map_mode(m, &grid.hermite_matrix(m, 2)).unwrap();
    }
    let c = characteristic(&g, Interval::new(f64::NEG_INFINITY, f64::INFINITY).unwrap(), &exact_opts()).unwrap();
    assert!((c.frequency() - 125.0).abs() < 1e-8);
    assert!(c.exact);
}

#[test]
fn slab_characteristic_is_rank_one() {
    // u(theta) = theta_1 on a 5^3 grid
    let u = separable(&[vec![1.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
    let grid = ThetaGrid::uniform(3, 5, 2.0).unwrap();
    let g = reduce_to_grid(&u, &SpatialFunctional::Point(0), &grid).unwrap();
    let c = characteristic(&g, Interval::new(-1.5, 0.5).unwrap(), &exact_opts()).unwrap();
    // nodes -1 and 0 fall in the slab
    assert!((c.frequency() - 50.0).abs() < 1e-8);
    assert_eq!(c.chi.round(1e-10).0.max_rank(), 1);
    let level = c.level_set(&g).unwrap();
    assert!((level.value(&[1, 3, 2]).unwrap() + 1.0).abs() < 1e-8);
    assert!(level.value(&[4, 0, 0]).unwrap().abs() < 1e-8);
}

#[test]
fn frequency_matches_enumeration() {
    let u = random_surface(4, 3, 2, 2, 8);
    let grid = ThetaGrid::uniform(3, 5, 2.0).unwrap();
    let f = SpatialFunctional::Mean(vec![0.25; 4]);
    let g = reduce_to_grid(&u, &f, &grid).unwrap();
    let dense = g.full().unwrap();
    let mut vals = dense.data().to_vec();
    vals.sort_by(f64::total_cmp);
    // a threshold halfway between two sorted values, away from ties
    let cut = 0.5 * (vals[60] + vals[61]);
    let above = Interval::new(cut, f64::INFINITY).unwrap();
    let below = Interval::new(f64::NEG_INFINITY, cut).unwrap();
    let want = dense.data().iter().filter(|&&v| above.contains(v)).count() as f64;
    let c = characteristic(&g, above, &exact_opts()).unwrap();
    let d = characteristic(&g, below, &exact_opts()).unwrap();
    assert!(c.exact && d.exact);
    assert!((c.frequency() - want).abs() < 1e-6, "{} vs {want}", c.frequency());
    assert!((c.frequency() + d.frequency() - 125.0).abs() < 1e-6);
    assert_eq!(c.misclassification, 0.0);
}

#[test]
fn max_of_separable_and_constant() {
    let u = separable(&[vec![0.5, 2.0, 1.0], vec![3.0, 1.0], vec![0.1, 0.7, 0.4, 0.2]]);
    let m = max_estimate(&u, &exact_opts()).unwrap();
    assert!((m.value - 2.0 * 3.0 * 0.7).abs() < 1e-14);
    assert_eq!(m.index, vec![1, 0, 1]);
    let c = TtTensor::ones(&[3, 4, 2]).scale(-2.5);
    assert_eq!(max_estimate(&c, &exact_opts()).unwrap().value, 2.5);
}

#[test]
fn max_estimate_quality_gate() {
    let mut good = 0;
    let trials = 20;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let u = TtTensor::random(&[6, 6, 6], &[2, 2], &mut rng).unwrap();
        let truth = u.full().unwrap().data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let opts = CrossOptions {
            seed,
            heldout: 50,
            ..exact_opts()
        };
        let m = max_estimate(&u, &opts).unwrap();
        assert!(m.value <= truth * (1.0 + 1e-12));
        if m.value >= 0.9 * truth {
            good += 1;
        }
    }
    assert!(good * 10 >= trials * 9, "{good}/{trials}");
}

#[test]
fn spatial_reduction() {
    let u = random_surface(3, 2, 2, 2, 6);
    let p = reduce(&u, &SpatialFunctional::Point(2)).unwrap();
    assert_eq!(p.value(&[1, 2]).unwrap(), u.value(&[2, 1, 2]).unwrap());
    let w = vec![0.2, 0.3, 0.5];
    let m = reduce(&u, &SpatialFunctional::Mean(w.clone())).unwrap();
    let want: f64 = (0..3).map(|x| w[x] * u.value(&[x, 0, 1]).unwrap()).sum();
    assert!((m.value(&[0, 1]).unwrap() - want).abs() < 1e-14);
    assert!(reduce(&u, &SpatialFunctional::Point(3)).is_err());
}

#[test]
fn csv_headers() {
    let mesh = crate::galerkin::Mesh::with_cells(crate::galerkin::Domain::Square, 1).unwrap();
    let mut buf = Vec::new();
    write_field(&mut buf, &mesh, &[2.0]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "x,y,value\n0,0,2e0\n");
    let u = random_surface(2, 2, 1, 1, 0);
    let mut s = SobolAnalysis::new(&u).unwrap();
    let rows: Vec<_> = SobolSpec::all(2).unwrap().iter().map(|q| s.index(q).unwrap()).collect();
    let mut buf = Vec::new();
    write_sobol(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("subset,D_q,S_q\n{1},"));
    assert_eq!(text.lines().count(), 4);
}
