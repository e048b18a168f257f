//! Filler grammar of Score / WithoutScore zone models and Viterbi forced
//! alignment over it.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::hmm::{baum_welch, BaumWelchConfig, HmmParams};
use super::trellis::{ln, Graph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ZoneLabel {
    WithoutScore,
    Score,
}

impl ZoneLabel {
    pub const ALL: [ZoneLabel; 2] = [ZoneLabel::WithoutScore, ZoneLabel::Score];

    pub fn other(self) -> ZoneLabel {
        match self {
            ZoneLabel::WithoutScore => ZoneLabel::Score,
            ZoneLabel::Score => ZoneLabel::WithoutScore,
        }
    }
}

/// Looping alternation of the two zone models. Either label may start or
/// end the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FillerGrammar {
    pub without_score: HmmParams,
    pub score: HmmParams,
    /// Probability of leaving a zone model's last state for the other label.
    pub switch_prob: f64,
}

impl FillerGrammar {
    pub const DEFAULT_SWITCH_PROB: f64 = 0.1;

    pub fn new(without_score: HmmParams, score: HmmParams) -> Result<Self> {
        Self::with_switch_prob(without_score, score, Self::DEFAULT_SWITCH_PROB)
    }

    pub fn with_switch_prob(without_score: HmmParams, score: HmmParams, switch_prob: f64) -> Result<Self> {
        if without_score.dim() != score.dim() {
            return Err(Error::Argument(format!(
                "zone models differ in dimension: {} vs {}",
                without_score.dim(),
                score.dim()
            )));
        }
        if !(switch_prob > 0.0 && switch_prob < 1.0) {
            return Err(Error::Argument(format!("switch probability {switch_prob} outside (0, 1)")));
        }
        Ok(Self { without_score, score, switch_prob })
    }

    pub fn model(&self, label: ZoneLabel) -> &HmmParams {
        match label {
            ZoneLabel::WithoutScore => &self.without_score,
            ZoneLabel::Score => &self.score,
        }
    }

    pub fn dim(&self) -> usize {
        self.score.dim()
    }

    fn state_labels(&self) -> Vec<ZoneLabel> {
        let mut v = vec![ZoneLabel::WithoutScore; self.without_score.n_states()];
        v.extend(std::iter::repeat_n(ZoneLabel::Score, self.score.n_states()));
        v
    }

    /// Composite graph: WithoutScore states first, then Score states.
    fn graph(&self) -> Graph {
        let (sw, ss) = (self.without_score.n_states(), self.score.n_states());
        let n = sw + ss;
        let mut a = Array2::from_elem((n, n), f64::NEG_INFINITY);
        let blocks = [(0usize, &self.without_score, sw), (sw, &self.score, 0usize)];
        for &(off, model, other_first) in &blocks {
            let s = model.n_states();
            for i in 0..s {
                for j in 0..s {
                    a[[off + i, off + j]] = ln(model.transitions()[[i, j]]);
                }
            }
            let last = off + s - 1;
            let stay = model.transitions()[[s - 1, s - 1]];
            a[[last, last]] = ln(stay * (1.0 - self.switch_prob));
            a[[last, other_first]] = ln(self.switch_prob);
        }
        let mut log_init = vec![f64::NEG_INFINITY; n];
        log_init[0] = 0.5f64.ln();
        log_init[sw] = 0.5f64.ln();
        let mut log_final = vec![f64::NEG_INFINITY; n];
        log_final[sw - 1] = 0.0;
        log_final[n - 1] = 0.0;
        Graph { log_init, log_trans: a, log_final }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneSegment {
    pub label: ZoneLabel,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

impl ZoneSegment {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneAlignment {
    pub segments: Vec<ZoneSegment>,
    pub loglik: f64,
}

impl ZoneAlignment {
    /// Per-frame labels.
    pub fn frame_labels(&self) -> Vec<ZoneLabel> {
        let mut out = Vec::new();
        for s in &self.segments {
            out.extend(std::iter::repeat_n(s.label, s.len()));
        }
        out
    }

    pub fn count(&self, label: ZoneLabel) -> usize {
        self.segments.iter().filter(|s| s.label == label).count()
    }

    /// Contiguity, coverage of `[0, t_len)` and label alternation.
    pub fn is_well_formed(&self, t_len: usize) -> bool {
        let mut next = 0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.start != next || s.end < s.start {
                return false;
            }
            if i > 0 && self.segments[i - 1].label == s.label {
                return false;
            }
            next = s.end + 1;
        }
        next == t_len
    }
}

/// Viterbi decoding through the filler grammar.
pub fn forced_align(frames: ArrayView2<'_, f64>, grammar: &FillerGrammar) -> Result<ZoneAlignment> {
    if frames.ncols() != grammar.dim() {
        return Err(Error::Argument(format!(
            "frame dimension {} does not match grammar dimension {}",
            frames.ncols(),
            grammar.dim()
        )));
    }
    if frames.nrows() == 0 {
        return Err(Error::Alignment("empty frame sequence".into()));
    }
    let mut states = grammar.without_score.states().to_vec();
    states.extend_from_slice(grammar.score.states());
    let log_b = super::hmm::emission_matrix(&states, frames);
    let (loglik, path) = grammar.graph().viterbi(&log_b);
    if path.is_empty() {
        return Err(Error::Alignment(format!(
            "no admissible path through the grammar for {} frames",
            frames.nrows()
        )));
    }
    let labels = grammar.state_labels();
    let mut segments: Vec<ZoneSegment> = Vec::new();
    for (t, &s) in path.iter().enumerate() {
        let label = labels[s];
        // the grammar only switches between different labels
        if t == 0 || labels[path[t - 1]] != label {
            segments.push(ZoneSegment { label, start: t, end: t });
        } else {
            segments.last_mut().expect("segment open").end = t;
        }
    }
    Ok(ZoneAlignment { segments, loglik })
}

/// Result of iterative realignment: the grammar and the total alignment
/// log-likelihood before the first round and after each accepted round.
#[derive(Debug, Clone)]
pub struct RealignOutcome {
    pub grammar: FillerGrammar,
    pub trace: Vec<f64>,
}

fn total_alignment(strips: &[ArrayView2<'_, f64>], grammar: &FillerGrammar) -> Result<(f64, Vec<ZoneAlignment>)> {
    let mut total = 0.0;
    let mut out = Vec::with_capacity(strips.len());
    for s in strips {
        let a = forced_align(*s, grammar)?;
        total += a.loglik;
        out.push(a);
    }
    Ok((total, out))
}

/// Alternates forced alignment and Baum–Welch retraining of the zone models
/// on the realigned segments. A round whose retrained grammar scores lower
/// than its predecessor is rejected and iteration stops.
pub fn realign_retrain(
    strips: &[ArrayView2<'_, f64>],
    grammar: &FillerGrammar,
    rounds: usize,
    iterations: usize,
) -> Result<RealignOutcome> {
    let mut grammar = grammar.clone();
    if rounds == 0 {
        return Ok(RealignOutcome { grammar, trace: Vec::new() });
    }
    let (mut score, mut alignments) = total_alignment(strips, &grammar)?;
    let mut trace = vec![score];
    for _ in 0..rounds {
        let mut retrained = Vec::with_capacity(2);
        for label in ZoneLabel::ALL {
            let model = grammar.model(label);
            let segs: Vec<ArrayView2<'_, f64>> = strips
                .iter()
                .zip(&alignments)
                .flat_map(|(x, a)| {
                    a.segments
                        .iter()
                        .filter(move |s| s.label == label)
                        .map(move |s| x.slice(ndarray::s![s.start..=s.end, ..]))
                })
                .collect();
            if segs.is_empty() {
                retrained.push(model.clone());
                continue;
            }
            let cfg = BaumWelchConfig { iterations, mixture_target: model.n_mixtures(), iterations_per_split: 0 };
            retrained.push(baum_welch(&segs, model, &cfg)?.0);
        }
        let score_model = retrained.pop().expect("two labels");
        let without = retrained.pop().expect("two labels");
        let candidate = FillerGrammar::with_switch_prob(without, score_model, grammar.switch_prob)?;
        let (next_score, next_alignments) = total_alignment(strips, &candidate)?;
        if next_score < score {
            break;
        }
        grammar = candidate;
        score = next_score;
        alignments = next_alignments;
        trace.push(score);
    }
    Ok(RealignOutcome { grammar, trace })
}
