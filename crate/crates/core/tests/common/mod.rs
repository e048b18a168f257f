//! Reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use scorewriter::seqmodel::{GmmParams, HmmParams};

pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn random_gmm<R: Rng>(rng: &mut R, d: usize, m: usize) -> GmmParams {
    let weights = random_simplex(rng, m);
    let means = Array2::from_shape_fn((m, d), |_| rng.random_range(-2.0..2.0));
    let vars = Array2::from_shape_fn((m, d), |_| rng.random_range(0.3..2.0));
    GmmParams::new(weights, means, vars).unwrap()
}

/// Dense (fully connected) random HMM.
pub fn random_hmm<R: Rng>(rng: &mut R, s: usize, d: usize) -> HmmParams {
    let init = random_simplex(rng, s);
    let mut a = Array2::zeros((s, s));
    for i in 0..s {
        for (j, p) in random_simplex(rng, s).into_iter().enumerate() {
            a[[i, j]] = p;
        }
    }
    let states = (0..s).map(|_| {
        let m = rng.random_range(1..=2);
        random_gmm(rng, d, m)
    });
    HmmParams::new(init, a, states.collect()).unwrap()
}

pub fn random_frames<R: Rng>(rng: &mut R, t: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((t, d), |_| rng.random_range(-3.0..3.0))
}

/// Log-sum and log-max over every state path that ends in the last state.
pub fn brute_force(frames: ArrayView2<'_, f64>, hmm: &HmmParams) -> (f64, f64) {
    let s = hmm.n_states();
    let t = frames.nrows();
    let mut best = f64::NEG_INFINITY;
    let mut log_terms = Vec::new();
    let mut path = vec![0usize; t];
    let count = s.pow(t as u32);
    for code in 0..count {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % s;
            c /= s;
        }
        if path[t - 1] != s - 1 {
            continue;
        }
        let mut lp = hmm.initial()[path[0]].ln();
        for k in 0..t {
            if k > 0 {
                lp += hmm.transitions()[[path[k - 1], path[k]]].ln();
            }
            lp += hmm.states()[path[k]].log_density(frames.row(k));
        }
        best = best.max(lp);
        log_terms.push(lp);
    }
    let m = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total = if m.is_finite() {
        m + log_terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
    } else {
        f64::NEG_INFINITY
    };
    (total, best)
}

/// Cyclic Jacobi eigensolver for symmetric matrices; eigenpairs sorted by
/// descending eigenvalue, eigenvectors as columns.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y][y].total_cmp(&m[x][x]));
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (vals, vecs)
}

/// Sample covariance with divisor `N − 1`, formed entry by entry.
pub fn explicit_covariance(x: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    let (n, d) = x.dim();
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).sum() / n as f64).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (0..n).map(|r| (x[[r, i]] - mean[i]) * (x[[r, j]] - mean[j])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect()
}

/// Principal angles in degrees between the column spans of `a` and `b`.
pub fn principal_angles_deg(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let s = (qa.transpose() * qb).singular_values();
    s.iter().map(|c| c.clamp(-1.0, 1.0).acos().to_degrees()).collect()
}

pub fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot.abs() / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}
