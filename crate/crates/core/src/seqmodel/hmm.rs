//! Left-to-right continuous-density HMMs: flat-start initialization,
//! Baum–Welch re-estimation with mixture splitting, and likelihood scoring.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gmm::{variance_floor, GmmParams, MixtureStats};
use super::trellis::{ln, log_sum_exp_slice, Graph};
use crate::error::{Error, Result};

pub const DEFAULT_SELF_LOOP: f64 = 0.6;

/// HMM whose paths start in the first state and end in the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmParams {
    initial: Vec<f64>,
    transitions: Array2<f64>,
    states: Vec<GmmParams>,
}

impl HmmParams {
    pub fn new(initial: Vec<f64>, transitions: Array2<f64>, states: Vec<GmmParams>) -> Result<Self> {
        let s = states.len();
        if s == 0 || initial.len() != s || transitions.dim() != (s, s) {
            return Err(Error::Argument(format!(
                "inconsistent HMM shapes: {} states, {} initial probs, transitions {:?}",
                s,
                initial.len(),
                transitions.dim()
            )));
        }
        let d = states[0].dim();
        if states.iter().any(|g| g.dim() != d) {
            return Err(Error::Argument("state emissions differ in dimension".into()));
        }
        let bad = |v: &f64| !(*v >= 0.0) || !v.is_finite();
        if initial.iter().any(bad) || transitions.iter().any(bad) {
            return Err(Error::Argument("probabilities must be finite and non-negative".into()));
        }
        if (initial.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Argument("initial probabilities do not sum to 1".into()));
        }
        for (i, row) in transitions.rows().into_iter().enumerate() {
            if (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::Argument(format!("transition row {i} does not sum to 1")));
            }
        }
        Ok(Self { initial, transitions, states })
    }

    /// Left-to-right chain over `states` with the given self-loop probability;
    /// the last state loops with probability 1.
    pub fn left_to_right(states: Vec<GmmParams>, self_loop: f64) -> Result<Self> {
        let s = states.len();
        let mut a = Array2::zeros((s, s));
        for i in 0..s {
            if i + 1 < s {
                a[[i, i]] = self_loop;
                a[[i, i + 1]] = 1.0 - self_loop;
            } else {
                a[[i, i]] = 1.0;
            }
        }
        let mut init = vec![0.0; s];
        if s > 0 {
            init[0] = 1.0;
        }
        Self::new(init, a, states)
    }

    /// One-state wrapper around a mixture.
    pub fn from_gmm(g: GmmParams) -> Self {
        Self { initial: vec![1.0], transitions: Array2::ones((1, 1)), states: vec![g] }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Mixture count of the first state (all states share it after training).
    pub fn n_mixtures(&self) -> usize {
        self.states[0].n_mixtures()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self) -> &Array2<f64> {
        &self.transitions
    }

    pub fn states(&self) -> &[GmmParams] {
        &self.states
    }

    pub(crate) fn graph(&self) -> Graph {
        let s = self.n_states();
        let mut log_final = vec![f64::NEG_INFINITY; s];
        log_final[s - 1] = 0.0;
        Graph {
            log_init: self.initial.iter().map(|&p| ln(p)).collect(),
            log_trans: self.transitions.mapv(ln),
            log_final,
        }
    }

    /// T×S emission log-densities.
    pub(crate) fn emission_matrix(&self, frames: ArrayView2<'_, f64>) -> Array2<f64> {
        emission_matrix(&self.states, frames)
    }

    fn check_dim(&self, frames: ArrayView2<'_, f64>) -> Result<()> {
        if frames.ncols() != self.dim() {
            return Err(Error::Argument(format!(
                "frame dimension {} does not match model dimension {}",
                frames.ncols(),
                self.dim()
            )));
        }
        Ok(())
    }
}

pub(crate) fn emission_matrix(states: &[GmmParams], frames: ArrayView2<'_, f64>) -> Array2<f64> {
    let t_len = frames.nrows();
    let mut out = Array2::zeros((t_len, states.len()));
    let max_m = states.iter().map(|g| g.n_mixtures()).max().unwrap_or(0);
    let mut buf = vec![0.0; max_m];
    for (t, x) in frames.rows().into_iter().enumerate() {
        for (s, g) in states.iter().enumerate() {
            let b = &mut buf[..g.n_mixtures()];
            g.component_log_densities(x, b);
            out[[t, s]] = log_sum_exp_slice(b);
        }
    }
    out
}

/// Best-path log-likelihood and state path. Sequences too short to reach
/// the final state give `(-inf, [])`.
pub fn viterbi_loglik(frames: ArrayView2<'_, f64>, model: &HmmParams) -> Result<(f64, Vec<usize>)> {
    model.check_dim(frames)?;
    if frames.nrows() == 0 {
        return Err(Error::Argument("empty observation sequence".into()));
    }
    Ok(model.graph().viterbi(&model.emission_matrix(frames)))
}

/// Total log-likelihood summed over all state paths.
pub fn forward_loglik(frames: ArrayView2<'_, f64>, model: &HmmParams) -> Result<f64> {
    model.check_dim(frames)?;
    if frames.nrows() == 0 {
        return Err(Error::Argument("empty observation sequence".into()));
    }
    Ok(model.graph().forward(&model.emission_matrix(frames)).1)
}

/// Flat start: each sequence is cut into `n_states` equal chunks and state
/// `s` takes the pooled mean and variance of chunk `s`.
pub fn hmm_init_flat(seqs: &[ArrayView2<'_, f64>], n_states: usize) -> Result<HmmParams> {
    if seqs.is_empty() || n_states == 0 {
        return Err(Error::Argument("flat start needs sequences and at least one state".into()));
    }
    let d = seqs[0].ncols();
    if d == 0 || seqs.iter().any(|s| s.ncols() != d) {
        return Err(Error::Argument("sequences differ in dimension".into()));
    }
    if let Some(short) = seqs.iter().find(|s| s.nrows() < n_states) {
        return Err(Error::Data(format!(
            "sequence of {} frames is shorter than {n_states} states",
            short.nrows()
        )));
    }
    if seqs.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    let floor = pooled_floor(seqs);
    let mut states = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let mut stats = MixtureStats::zeros(1, d);
        for seq in seqs {
            let t_len = seq.nrows();
            for t in s * t_len / n_states..(s + 1) * t_len / n_states {
                stats.add(seq.row(t), &[1.0]);
            }
        }
        let seed = GmmParams::from_parts_unchecked(vec![1.0], Array2::zeros((1, d)), Array2::ones((1, d)));
        states.push(stats.update(&seed, &floor).expect("every chunk holds at least one frame"));
    }
    HmmParams::left_to_right(states, DEFAULT_SELF_LOOP)
}

fn pooled_floor(seqs: &[ArrayView2<'_, f64>]) -> Array1<f64> {
    let views: Vec<_> = seqs.to_vec();
    let pooled = ndarray::concatenate(Axis(0), &views).expect("sequences share dimension");
    variance_floor(pooled.view())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaumWelchConfig {
    /// EM iterations after the final mixture size is reached.
    pub iterations: usize,
    pub mixture_target: usize,
    /// EM iterations run before each mixture split.
    pub iterations_per_split: usize,
}

impl Default for BaumWelchConfig {
    fn default() -> Self {
        Self { iterations: 10, mixture_target: 64, iterations_per_split: 5 }
    }
}

/// Log-likelihood after each E-step, tagged with the mixture stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub loglik: Vec<f64>,
    pub stage: Vec<usize>,
}

impl TrainingTrace {
    /// Largest decrease between consecutive entries within one stage.
    pub fn max_drop(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.loglik.len() {
            if self.stage[i] == self.stage[i - 1] {
                worst = worst.max(self.loglik[i - 1] - self.loglik[i]);
            }
        }
        worst
    }
}

struct Accumulator {
    loglik: f64,
    init: Vec<f64>,
    trans: Array2<f64>,
    mix: Vec<MixtureStats>,
}

impl Accumulator {
    fn zeros(model: &HmmParams) -> Self {
        let s = model.n_states();
        Self {
            loglik: 0.0,
            init: vec![0.0; s],
            trans: Array2::zeros((s, s)),
            mix: model.states.iter().map(|g| MixtureStats::zeros(g.n_mixtures(), g.dim())).collect(),
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.loglik += other.loglik;
        for (a, b) in self.init.iter_mut().zip(&other.init) {
            *a += b;
        }
        self.trans += &other.trans;
        for (a, b) in self.mix.iter_mut().zip(&other.mix) {
            a.merge(b);
        }
    }
}

fn e_step(model: &HmmParams, graph: &Graph, frames: ArrayView2<'_, f64>) -> Option<Accumulator> {
    let s = model.n_states();
    let log_b = model.emission_matrix(frames);
    let (alpha, ll) = graph.forward(&log_b);
    if !ll.is_finite() {
        return None;
    }
    let beta = graph.backward(&log_b);
    let mut acc = Accumulator::zeros(model);
    acc.loglik = ll;
    let t_len = frames.nrows();
    for i in 0..s {
        acc.init[i] = (alpha[[0, i]] + beta[[0, i]] - ll).exp();
    }
    for t in 0..t_len.saturating_sub(1) {
        for i in 0..s {
            let a = alpha[[t, i]];
            if a == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..s {
                let lt = graph.log_trans[[i, j]];
                if lt == f64::NEG_INFINITY {
                    continue;
                }
                acc.trans[[i, j]] += (a + lt + log_b[[t + 1, j]] + beta[[t + 1, j]] - ll).exp();
            }
        }
    }
    let max_m = model.states.iter().map(|g| g.n_mixtures()).max().unwrap_or(1);
    let mut buf = vec![0.0; max_m];
    for (t, x) in frames.rows().into_iter().enumerate() {
        for (j, g) in model.states.iter().enumerate() {
            let occ = (alpha[[t, j]] + beta[[t, j]] - ll).exp();
            if occ < 1e-300 {
                continue;
            }
            let b = &mut buf[..g.n_mixtures()];
            g.component_log_densities(x, b);
            let lb = log_b[[t, j]];
            b.iter_mut().for_each(|v| *v = occ * (*v - lb).exp());
            acc.mix[j].add(x, b);
        }
    }
    Some(acc)
}

fn m_step(model: &HmmParams, acc: &Accumulator, floor: &Array1<f64>) -> HmmParams {
    let s = model.n_states();
    let init_total: f64 = acc.init.iter().sum();
    let initial = if init_total > 0.0 {
        acc.init.iter().map(|v| v / init_total).collect()
    } else {
        model.initial.clone()
    };
    let mut trans = model.transitions.clone();
    for i in 0..s {
        let row_total: f64 = acc.trans.row(i).sum();
        if row_total > 0.0 {
            for j in 0..s {
                trans[[i, j]] = acc.trans[[i, j]] / row_total;
            }
        }
    }
    let states = model
        .states
        .iter()
        .zip(&acc.mix)
        .map(|(g, st)| st.update(g, floor).unwrap_or_else(|| g.clone()))
        .collect();
    HmmParams { initial, transitions: trans, states }
}

/// One EM pass over all sequences: returns the re-estimated model and the
/// total log-likelihood under the input model.
fn em_iteration(model: &HmmParams, seqs: &[ArrayView2<'_, f64>], floor: &Array1<f64>) -> Result<(HmmParams, f64)> {
    let graph = model.graph();
    let parts: Vec<Option<Accumulator>> = seqs.par_iter().map(|x| e_step(model, &graph, *x)).collect();
    let mut total = Accumulator::zeros(model);
    let mut used = 0;
    for part in parts.iter().flatten() {
        total.merge(part);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Numerical("no training sequence has a finite likelihood".into()));
    }
    if total.loglik.is_nan() {
        return Err(Error::Numerical("log-likelihood is NaN".into()));
    }
    Ok((m_step(model, &total, floor), total.loglik))
}

/// Baum–Welch re-estimation. Mixtures are split toward `mixture_target`
/// after every `iterations_per_split` iterations; transition structural
/// zeros are preserved because their expected counts are zero.
pub fn baum_welch(seqs: &[ArrayView2<'_, f64>], model: &HmmParams, cfg: &BaumWelchConfig) -> Result<(HmmParams, TrainingTrace)> {
    if seqs.is_empty() {
        return Err(Error::Argument("Baum-Welch needs at least one sequence".into()));
    }
    for s in seqs {
        model.check_dim(*s)?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
    }
    let floor = pooled_floor(seqs);
    let mut model = model.clone();
    let mut trace = TrainingTrace::default();
    let mut stage = 0;
    while model.n_mixtures() < cfg.mixture_target {
        for _ in 0..cfg.iterations_per_split {
            let (next, ll) = em_iteration(&model, seqs, &floor)?;
            trace.loglik.push(ll);
            trace.stage.push(stage);
            model = next;
        }
        let limit = cfg.mixture_target;
        model = HmmParams {
            initial: model.initial.clone(),
            transitions: model.transitions.clone(),
            states: model.states.iter().map(|g| g.split(limit)).collect(),
        };
        stage += 1;
    }
    for _ in 0..cfg.iterations {
        let (next, ll) = em_iteration(&model, seqs, &floor)?;
        trace.loglik.push(ll);
        trace.stage.push(stage);
        model = next;
    }
    let graph = model.graph();
    let final_ll: f64 = seqs
        .iter()
        .map(|x| graph.forward(&model.emission_matrix(*x)).1)
        .filter(|v| v.is_finite())
        .sum();
    if final_ll.is_nan() {
        return Err(Error::Numerical("log-likelihood is NaN".into()));
    }
    trace.loglik.push(final_ll);
    trace.stage.push(stage);
    Ok((model, trace))
}
