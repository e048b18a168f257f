//! Log-domain forward, backward and Viterbi recursions over a dense state
//! graph with explicit entry and exit weights.

use ndarray::Array2;

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    log_sum_exp_slice(&values)
}

pub(crate) fn log_sum_exp_slice(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[inline]
pub(crate) fn ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// State graph in log domain.
#[derive(Debug, Clone)]
pub(crate) struct Graph {
    pub log_init: Vec<f64>,
    pub log_trans: Array2<f64>,
    pub log_final: Vec<f64>,
}

impl Graph {
    /// Forward lattice and total log-likelihood. `log_b` is T×S.
    pub fn forward(&self, log_b: &Array2<f64>) -> (Array2<f64>, f64) {
        let (t_len, s) = log_b.dim();
        let mut alpha = Array2::from_elem((t_len, s), f64::NEG_INFINITY);
        if t_len == 0 {
            return (alpha, f64::NEG_INFINITY);
        }
        for j in 0..s {
            alpha[[0, j]] = self.log_init[j] + log_b[[0, j]];
        }
        let mut buf = vec![0.0; s];
        for t in 1..t_len {
            for j in 0..s {
                for i in 0..s {
                    buf[i] = alpha[[t - 1, i]] + self.log_trans[[i, j]];
                }
                alpha[[t, j]] = log_sum_exp_slice(&buf) + log_b[[t, j]];
            }
        }
        let total = log_sum_exp((0..s).map(|j| alpha[[t_len - 1, j]] + self.log_final[j]));
        (alpha, total)
    }

    pub fn backward(&self, log_b: &Array2<f64>) -> Array2<f64> {
        let (t_len, s) = log_b.dim();
        let mut beta = Array2::from_elem((t_len, s), f64::NEG_INFINITY);
        if t_len == 0 {
            return beta;
        }
        for i in 0..s {
            beta[[t_len - 1, i]] = self.log_final[i];
        }
        let mut buf = vec![0.0; s];
        for t in (0..t_len - 1).rev() {
            for i in 0..s {
                for j in 0..s {
                    buf[j] = self.log_trans[[i, j]] + log_b[[t + 1, j]] + beta[[t + 1, j]];
                }
                beta[[t, i]] = log_sum_exp_slice(&buf);
            }
        }
        beta
    }

    /// Best path score and state sequence; ties go to the lower state index.
    /// Returns `(-inf, [])` when no path is admissible.
    pub fn viterbi(&self, log_b: &Array2<f64>) -> (f64, Vec<usize>) {
        let (t_len, s) = log_b.dim();
        if t_len == 0 {
            return (f64::NEG_INFINITY, Vec::new());
        }
        let mut delta = Array2::from_elem((t_len, s), f64::NEG_INFINITY);
        let mut back = Array2::<usize>::zeros((t_len, s));
        for j in 0..s {
            delta[[0, j]] = self.log_init[j] + log_b[[0, j]];
        }
        for t in 1..t_len {
            for j in 0..s {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for i in 0..s {
                    let v = delta[[t - 1, i]] + self.log_trans[[i, j]];
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                delta[[t, j]] = best + log_b[[t, j]];
                back[[t, j]] = arg;
            }
        }
        let mut best = f64::NEG_INFINITY;
        let mut last = 0;
        for j in 0..s {
            let v = delta[[t_len - 1, j]] + self.log_final[j];
            if v > best {
                best = v;
                last = j;
            }
        }
        if best == f64::NEG_INFINITY || best.is_nan() {
            return (f64::NEG_INFINITY, Vec::new());
        }
        let mut path = vec![0; t_len];
        path[t_len - 1] = last;
        for t in (1..t_len).rev() {
            path[t - 1] = back[[t, path[t]]];
        }
        (best, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp([0.0f64.ln(), 1.0f64.ln(), 3.0f64.ln()]);
        assert!((v - 4.0f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp([-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
