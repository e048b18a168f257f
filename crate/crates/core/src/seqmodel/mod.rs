//! Continuous-density GMM and HMM engine used for writer models and zone
//! models.

mod gmm;
mod grammar;
mod hmm;
mod io;
mod trellis;

pub use gmm::{
    gmm_fit, gmm_fit_traced, gmm_loglik, variance_floor, GmmParams, ABSOLUTE_VARIANCE_FLOOR,
    RELATIVE_VARIANCE_FLOOR,
};
pub use grammar::{forced_align, realign_retrain, FillerGrammar, RealignOutcome, ZoneAlignment, ZoneLabel, ZoneSegment};
pub use hmm::{
    baum_welch, forward_loglik, hmm_init_flat, viterbi_loglik, BaumWelchConfig, HmmParams, TrainingTrace,
    DEFAULT_SELF_LOOP,
};
pub use io::{TOPOLOGY_ENTRY_EITHER, TOPOLOGY_EXIT_EITHER};
