//! Writer identification for handwritten music scores, working directly on
//! pages with their staff-lines in place.
//!
//! The crate is organised as a pipeline of independent stages:
//!
//! - [`imgproc`]: page loading, Otsu binarization, projection profiles, strips
//! - [`synth`]: ground-truthed synthetic pages and degradations
//! - [`features`]: sliding-window LGH and Gabor features, silence detection
//! - [`seqmodel`]: GMM/HMM training and scoring, filler-grammar alignment
//! - [`dimred`]: factor analysis, PCA and LDA feature transforms
//! - [`segmentation`]: projection line segmentation and HMM block-line detection
//! - [`pipeline`]: writer models, line scoring and page-level fusion
//! - [`eval`]: cross-validation protocol and metrics

pub mod digest;
pub mod dimred;
pub mod error;
pub mod eval;
pub mod features;
pub mod imgproc;
pub mod pipeline;
pub mod segmentation;
pub mod seqmodel;
pub mod synth;

pub use error::{Error, Result};
