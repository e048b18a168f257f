//! Diagonal-covariance Gaussian mixtures: density evaluation and EM fitting
//! with k-means++ initialization.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trellis::{ln, log_sum_exp_slice};
use crate::error::{Error, Result};

/// Variance floor relative to the global per-dimension variance.
pub const RELATIVE_VARIANCE_FLOOR: f64 = 1e-3;
/// Absolute lower bound on every variance.
pub const ABSOLUTE_VARIANCE_FLOOR: f64 = 1e-6;

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    weights: Vec<f64>,
    means: Array2<f64>,
    variances: Array2<f64>,
    // cached: ln w_i - ½ Σ_d ln(2π v_id)
    log_norm: Vec<f64>,
    inv_var: Array2<f64>,
}

impl GmmParams {
    pub fn new(weights: Vec<f64>, means: Array2<f64>, variances: Array2<f64>) -> Result<Self> {
        let m = weights.len();
        if m == 0 || means.nrows() != m || variances.dim() != means.dim() || means.ncols() == 0 {
            return Err(Error::Argument(format!(
                "inconsistent mixture shapes: {m} weights, means {:?}, variances {:?}",
                means.dim(),
                variances.dim()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Argument("mixture weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("mixture weights sum to {total}")));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || means.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("means must be finite and variances positive".into()));
        }
        Ok(Self::from_parts_unchecked(weights, means, variances))
    }

    pub(crate) fn from_parts_unchecked(weights: Vec<f64>, means: Array2<f64>, variances: Array2<f64>) -> Self {
        let inv_var = variances.mapv(|v| 1.0 / v);
        let log_norm = weights
            .iter()
            .zip(variances.rows())
            .map(|(w, var)| ln(*w) - 0.5 * var.iter().map(|v| (TAU * v).ln()).sum::<f64>())
            .collect();
        Self { weights, means, variances, log_norm, inv_var }
    }

    /// Single Gaussian.
    pub fn single(mean: Array1<f64>, variance: Array1<f64>) -> Result<Self> {
        let d = mean.len();
        Self::new(
            vec![1.0],
            mean.into_shape_with_order((1, d)).expect("1xD reshape"),
            variance.into_shape_with_order((1, d)).expect("1xD reshape"),
        )
    }

    pub fn n_mixtures(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn variances(&self) -> &Array2<f64> {
        &self.variances
    }

    /// Per-component `ln w_i + ln N(x; μ_i, C_i)` written into `out`.
    pub(crate) fn component_log_densities(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            let mu = self.means.row(i);
            let iv = self.inv_var.row(i);
            let mut q = 0.0;
            for d in 0..x.len() {
                let diff = x[d] - mu[d];
                q += diff * diff * iv[d];
            }
            *slot = self.log_norm[i] - 0.5 * q;
        }
    }

    pub fn log_density(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut buf = vec![0.0; self.n_mixtures()];
        self.component_log_densities(x, &mut buf);
        log_sum_exp_slice(&buf)
    }

    /// Splits every component into two with halved weight and means moved
    /// ±0.2σ, doubling the mixture count (or stopping at `limit`). Heavier
    /// components split first.
    pub fn split(&self, limit: usize) -> GmmParams {
        let m = self.n_mixtures();
        let target = (2 * m).min(limit.max(m));
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        let n_split = target - m;
        let split_set: Vec<bool> = {
            let mut s = vec![false; m];
            for &i in order.iter().take(n_split) {
                s[i] = true;
            }
            s
        };
        let d = self.dim();
        let mut weights = Vec::with_capacity(target);
        let mut means = Array2::zeros((target, d));
        let mut vars = Array2::zeros((target, d));
        let mut r = 0;
        for i in 0..m {
            let mu = self.means.row(i);
            let var = self.variances.row(i);
            if split_set[i] {
                for sign in [1.0, -1.0] {
                    weights.push(self.weights[i] / 2.0);
                    for k in 0..d {
                        means[[r, k]] = mu[k] + sign * 0.2 * var[k].sqrt();
                        vars[[r, k]] = var[k];
                    }
                    r += 1;
                }
            } else {
                weights.push(self.weights[i]);
                means.row_mut(r).assign(&mu);
                vars.row_mut(r).assign(&var);
                r += 1;
            }
        }
        GmmParams::from_parts_unchecked(weights, means, vars)
    }
}

/// Per-dimension variance floor for a pooled data set.
pub fn variance_floor(frames: ArrayView2<'_, f64>) -> Array1<f64> {
    let n = frames.nrows().max(1) as f64;
    let mean = frames.sum_axis(Axis(0)) / n;
    let mut var = Array1::zeros(frames.ncols());
    for row in frames.rows() {
        for d in 0..row.len() {
            let diff = row[d] - mean[d];
            var[d] += diff * diff;
        }
    }
    var.mapv(|v: f64| (RELATIVE_VARIANCE_FLOOR * v / n).max(ABSOLUTE_VARIANCE_FLOOR))
}

/// Sufficient statistics for one mixture.
#[derive(Debug, Clone)]
pub(crate) struct MixtureStats {
    pub occ: Vec<f64>,
    pub sum: Array2<f64>,
    pub sum_sq: Array2<f64>,
}

impl MixtureStats {
    pub fn zeros(m: usize, d: usize) -> Self {
        Self { occ: vec![0.0; m], sum: Array2::zeros((m, d)), sum_sq: Array2::zeros((m, d)) }
    }

    /// Adds `x` with responsibilities `resp` (already scaled by any state weight).
    pub fn add(&mut self, x: ArrayView1<'_, f64>, resp: &[f64]) {
        for (i, &r) in resp.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            self.occ[i] += r;
            let mut s = self.sum.row_mut(i);
            let mut s2 = self.sum_sq.row_mut(i);
            for d in 0..x.len() {
                s[d] += r * x[d];
                s2[d] += r * x[d] * x[d];
            }
        }
    }

    pub fn merge(&mut self, other: &MixtureStats) {
        for (a, b) in self.occ.iter_mut().zip(&other.occ) {
            *a += b;
        }
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
    }

    /// Maximum-likelihood update under the variance floor. Components with no
    /// occupancy keep their previous mean and variance at weight zero.
    pub fn update(&self, prev: &GmmParams, floor: &Array1<f64>) -> Option<GmmParams> {
        let total: f64 = self.occ.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let (m, d) = (prev.n_mixtures(), prev.dim());
        let mut weights = Vec::with_capacity(m);
        let mut means = prev.means.clone();
        let mut vars = prev.variances.clone();
        for i in 0..m {
            let occ = self.occ[i];
            weights.push(occ / total);
            if occ <= 1e-300 {
                continue;
            }
            for k in 0..d {
                let mu = self.sum[[i, k]] / occ;
                let v = self.sum_sq[[i, k]] / occ - mu * mu;
                means[[i, k]] = mu;
                vars[[i, k]] = v.max(floor[k]);
            }
        }
        Some(GmmParams::from_parts_unchecked(weights, means, vars))
    }
}

fn check_frames(frames: ArrayView2<'_, f64>) -> Result<()> {
    if frames.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    Ok(())
}

/// Sum of frame log-densities.
pub fn gmm_loglik(frames: ArrayView2<'_, f64>, g: &GmmParams) -> Result<f64> {
    if frames.nrows() > 0 && frames.ncols() != g.dim() {
        return Err(Error::Argument(format!(
            "frame dimension {} does not match model dimension {}",
            frames.ncols(),
            g.dim()
        )));
    }
    let mut buf = vec![0.0; g.n_mixtures()];
    Ok(frames
        .rows()
        .into_iter()
        .map(|x| {
            g.component_log_densities(x, &mut buf);
            log_sum_exp_slice(&buf)
        })
        .sum())
}

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp_init(frames: ArrayView2<'_, f64>, m: usize, floor: &Array1<f64>, rng: &mut ChaCha8Rng) -> GmmParams {
    let n = frames.nrows();
    let d = frames.ncols();
    let mut centers = Vec::with_capacity(m);
    centers.push(rng.random_range(0..n));
    let mut dist: Vec<f64> = frames.rows().into_iter().map(|x| squared_distance(x, frames.row(centers[0]))).collect();
    while centers.len() < m {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(next);
        for (i, x) in frames.rows().into_iter().enumerate() {
            dist[i] = dist[i].min(squared_distance(x, frames.row(next)));
        }
    }
    // hard assignment to the nearest centre gives the starting moments
    let mut stats = MixtureStats::zeros(m, d);
    let mut resp = vec![0.0; m];
    for x in frames.rows() {
        let mut best = (f64::INFINITY, 0);
        for (k, &c) in centers.iter().enumerate() {
            let dd = squared_distance(x, frames.row(c));
            if dd < best.0 {
                best = (dd, k);
            }
        }
        resp.iter_mut().for_each(|r| *r = 0.0);
        resp[best.1] = 1.0;
        stats.add(x, &resp);
    }
    let mut means = Array2::zeros((m, d));
    for (k, &c) in centers.iter().enumerate() {
        means.row_mut(k).assign(&frames.row(c));
    }
    let global_var = floor.mapv(|f| f / RELATIVE_VARIANCE_FLOOR);
    let mut vars = Array2::zeros((m, d));
    for k in 0..m {
        vars.row_mut(k).assign(&global_var.mapv(|v| v.max(ABSOLUTE_VARIANCE_FLOOR)));
    }
    let seed = GmmParams::from_parts_unchecked(vec![1.0 / m as f64; m], means, vars);
    stats.update(&seed, floor).unwrap_or(seed)
}

/// EM fit; returns the model and the data log-likelihood before the first
/// and after every M-step.
pub fn gmm_fit_traced(frames: ArrayView2<'_, f64>, m: usize, iters: usize, seed: u64) -> Result<(GmmParams, Vec<f64>)> {
    if m == 0 || frames.ncols() == 0 {
        return Err(Error::Argument("mixture count and dimension must be positive".into()));
    }
    if frames.nrows() < m {
        return Err(Error::Argument(format!(
            "{} frames cannot support {m} mixtures",
            frames.nrows()
        )));
    }
    check_frames(frames)?;
    let floor = variance_floor(frames);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = kmeans_pp_init(frames, m, &floor, &mut rng);
    let mut trace = Vec::with_capacity(iters + 1);
    let mut buf = vec![0.0; m];
    for _ in 0..iters {
        let mut stats = MixtureStats::zeros(m, frames.ncols());
        let mut ll = 0.0;
        for x in frames.rows() {
            model.component_log_densities(x, &mut buf);
            let lse = log_sum_exp_slice(&buf);
            ll += lse;
            buf.iter_mut().for_each(|v| *v = (*v - lse).exp());
            stats.add(x, &buf);
        }
        trace.push(ll);
        model = stats
            .update(&model, &floor)
            .ok_or_else(|| Error::Numerical("mixture lost all occupancy".into()))?;
    }
    let final_ll = gmm_loglik(frames, &model)?;
    if final_ll.is_nan() {
        return Err(Error::Numerical("log-likelihood is NaN".into()));
    }
    trace.push(final_ll);
    Ok((model, trace))
}

pub fn gmm_fit(frames: ArrayView2<'_, f64>, m: usize, iters: usize, seed: u64) -> Result<GmmParams> {
    gmm_fit_traced(frames, m, iters, seed).map(|(g, _)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standard_normal_at_mode() {
        let g = GmmParams::single(array![0.0], array![1.0]).unwrap();
        let ll = gmm_loglik(array![[0.0]].view(), &g).unwrap();
        assert!((ll - (1.0 / TAU.sqrt()).ln()).abs() < 1e-15);
        let empty = Array2::<f64>::zeros((0, 1));
        assert_eq!(gmm_loglik(empty.view(), &g).unwrap(), 0.0);
        assert!(gmm_loglik(array![[0.0, 1.0]].view(), &g).is_err());
    }

    #[test]
    fn single_mixture_is_closed_form() {
        let x = array![[1.0, 2.0], [3.0, -1.0], [2.0, 0.5], [6.0, 4.0]];
        let g = gmm_fit(x.view(), 1, 3, 0).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        let var = x.var_axis(Axis(0), 0.0);
        for k in 0..2 {
            assert!((g.means()[[0, k]] - mean[k]).abs() < 1e-12);
            assert!((g.variances()[[0, k]] - var[k]).abs() < 1e-9);
        }
        assert_eq!(g.weights(), &[1.0]);
    }

    #[test]
    fn fit_errors() {
        let x = array![[1.0], [2.0]];
        assert!(matches!(gmm_fit(x.view(), 3, 5, 0), Err(Error::Argument(_))));
        let bad = array![[1.0], [f64::NAN], [0.0]];
        assert!(matches!(gmm_fit(bad.view(), 1, 5, 0), Err(Error::Data(_))));
    }

    #[test]
    fn split_doubles_and_preserves_weight() {
        let g = GmmParams::single(array![1.0, 2.0], array![4.0, 1.0]).unwrap();
        let s = g.split(8);
        assert_eq!(s.n_mixtures(), 2);
        assert!((s.means()[[0, 0]] - 1.4).abs() < 1e-12);
        assert!((s.means()[[1, 0]] - 0.6).abs() < 1e-12);
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let s3 = s.split(3);
        assert_eq!(s3.n_mixtures(), 3);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GmmParams::new(vec![0.5, 0.6], Array2::zeros((2, 1)), Array2::ones((2, 1))).is_err());
        assert!(GmmParams::new(vec![1.0], Array2::zeros((1, 1)), Array2::zeros((1, 1))).is_err());
    }
}
