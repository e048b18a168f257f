//! Binary model files.
//!
//! HMM layout (all integers u32 LE, all reals f64 LE):
//! magic `WHMM`, version, D, S, M, then π (S), A (S×S row-major),
//! weights (S×M), means (S×M×D), variances (S×M×D).
//!
//! Grammar layout: magic `FGRM`, version, topology flags, switch
//! probability, then the WithoutScore and Score models, each prefixed by its
//! byte length as u64 LE.

use std::io::Read;

use ndarray::Array2;

use super::gmm::GmmParams;
use super::grammar::FillerGrammar;
use super::hmm::HmmParams;
use crate::error::{Error, Result};
use crate::features::read_u32;

const HMM_MAGIC: &[u8; 4] = b"WHMM";
const GRAMMAR_MAGIC: &[u8; 4] = b"FGRM";
const VERSION: u32 = 1;

/// Either label may open the sequence.
pub const TOPOLOGY_ENTRY_EITHER: u32 = 1;
/// Either label may close the sequence.
pub const TOPOLOGY_EXIT_EITHER: u32 = 2;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s<'a>(out: &mut Vec<u8>, vals: impl IntoIterator<Item = &'a f64>) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn take_f64s(r: &mut &[u8], n: usize) -> Result<Vec<f64>> {
    if r.len() < n * 8 {
        return Err(Error::Format("truncated model payload".into()));
    }
    let (head, tail) = r.split_at(n * 8);
    *r = tail;
    Ok(head.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn check_magic(r: &mut &[u8], magic: &[u8; 4], what: &str) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|_| Error::Format(format!("truncated {what} file")))?;
    if &m != magic {
        return Err(Error::Format(format!("not a {what} file")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported {what} version {version}")));
    }
    Ok(())
}

impl HmmParams {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (d, s, m) = (self.dim(), self.n_states(), self.n_mixtures());
        if self.states().iter().any(|g| g.n_mixtures() != m) {
            return Err(Error::Format("model file requires equal mixture counts per state".into()));
        }
        let mut out = Vec::new();
        out.extend_from_slice(HMM_MAGIC);
        put_u32(&mut out, VERSION as usize);
        put_u32(&mut out, d);
        put_u32(&mut out, s);
        put_u32(&mut out, m);
        put_f64s(&mut out, self.initial());
        put_f64s(&mut out, self.transitions().iter());
        for g in self.states() {
            put_f64s(&mut out, g.weights());
        }
        for g in self.states() {
            put_f64s(&mut out, g.means().iter());
        }
        for g in self.states() {
            put_f64s(&mut out, g.variances().iter());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<HmmParams> {
        let mut r = bytes;
        let model = Self::read_from(&mut r)?;
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after model", r.len())));
        }
        Ok(model)
    }

    fn read_from(r: &mut &[u8]) -> Result<HmmParams> {
        check_magic(r, HMM_MAGIC, "model")?;
        let d = read_u32(r)? as usize;
        let s = read_u32(r)? as usize;
        let m = read_u32(r)? as usize;
        if d == 0 || s == 0 || m == 0 {
            return Err(Error::Format("model dimensions must be positive".into()));
        }
        let initial = take_f64s(r, s)?;
        let trans = Array2::from_shape_vec((s, s), take_f64s(r, s * s)?).expect("shape checked");
        let weights = take_f64s(r, s * m)?;
        let means = take_f64s(r, s * m * d)?;
        let vars = take_f64s(r, s * m * d)?;
        let states = (0..s)
            .map(|i| {
                GmmParams::new(
                    weights[i * m..(i + 1) * m].to_vec(),
                    Array2::from_shape_vec((m, d), means[i * m * d..(i + 1) * m * d].to_vec()).expect("shape"),
                    Array2::from_shape_vec((m, d), vars[i * m * d..(i + 1) * m * d].to_vec()).expect("shape"),
                )
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Format(format!("invalid model parameters: {e}")))?;
        HmmParams::new(initial, trans, states).map_err(|e| Error::Format(format!("invalid model parameters: {e}")))
    }
}

impl FillerGrammar {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(GRAMMAR_MAGIC);
        put_u32(&mut out, VERSION as usize);
        put_u32(&mut out, (TOPOLOGY_ENTRY_EITHER | TOPOLOGY_EXIT_EITHER) as usize);
        out.extend_from_slice(&self.switch_prob.to_le_bytes());
        for model in [&self.without_score, &self.score] {
            let b = model.to_bytes()?;
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            out.extend_from_slice(&b);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<FillerGrammar> {
        let mut r = bytes;
        check_magic(&mut r, GRAMMAR_MAGIC, "grammar")?;
        let flags = read_u32(&mut r)?;
        if flags != TOPOLOGY_ENTRY_EITHER | TOPOLOGY_EXIT_EITHER {
            return Err(Error::Format(format!("unsupported grammar topology flags {flags:#x}")));
        }
        let switch = take_f64s(&mut r, 1)?[0];
        let mut models = Vec::with_capacity(2);
        for _ in 0..2 {
            let mut len = [0u8; 8];
            r.read_exact(&mut len).map_err(|_| Error::Format("truncated grammar file".into()))?;
            let len = u64::from_le_bytes(len) as usize;
            if r.len() < len {
                return Err(Error::Format("truncated grammar model".into()));
            }
            let (head, tail) = r.split_at(len);
            models.push(HmmParams::from_bytes(head)?);
            r = tail;
        }
        let score = models.pop().expect("two models");
        let without = models.pop().expect("two models");
        FillerGrammar::with_switch_prob(without, score, switch)
    }
}
