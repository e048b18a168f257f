//! Linear feature transforms fitted on pooled frames: factor analysis with
//! isotropic noise (plus varimax rotation), PCA and Fisher LDA.

use std::f64::consts::TAU;
use std::io::Read;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::read_u32;

fn to_matrix(frames: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(frames.nrows(), frames.ncols(), |i, j| frames[[i, j]])
}

fn column_mean(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Scatter matrix Σ (x−μ)(x−μ)ᵀ of the rows of `x`.
fn scatter(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    centered.transpose() * centered
}

/// Eigenpairs sorted by descending eigenvalue; each eigenvector's
/// largest-magnitude entry is made positive.
fn sorted_eigen(sym: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(sym.clone());
    let n = sym.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut vecs = DMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (k, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        canonical_sign(&mut v);
        vecs.set_column(k, &v);
        vals.push(eig.eigenvalues[i]);
    }
    (vals, vecs)
}

fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = (0.0f64, 0usize);
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best.0 + 1e-12 {
            best = (x.abs(), i);
        }
    }
    if v[best.1] < 0.0 {
        *v *= -1.0;
    }
}

fn check_input(frames: ArrayView2<'_, f64>) -> Result<()> {
    if frames.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite feature value".into()));
    }
    Ok(())
}

fn check_dim(x: ArrayView1<'_, f64>, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::Argument(format!("input dimension {} does not match {n}", x.len())));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Factor analysis

/// `x = W y + μ + c` with `y ~ N(0, I)` and `c ~ N(0, σ² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaModel {
    pub mean: DVector<f64>,
    /// n×m loading matrix.
    pub loadings: DMatrix<f64>,
    pub noise_var: f64,
}

impl FaModel {
    pub fn input_dim(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn factors(&self) -> usize {
        self.loadings.ncols()
    }

    /// Average data log-likelihood terms for a covariance `s` (ML scatter / N).
    fn loglik(&self, s: &DMatrix<f64>, n_samples: usize) -> f64 {
        fa_loglik(&self.loadings, self.noise_var, s, n_samples)
    }

    /// `(WᵀW + σ²I)⁻¹ Wᵀ`, the m×n posterior-mean operator.
    pub fn posterior_operator(&self) -> DMatrix<f64> {
        let w = &self.loadings;
        let m = w.ncols();
        let mm = w.transpose() * w + DMatrix::identity(m, m) * self.noise_var;
        let inv = mm.try_inverse().expect("WᵀW + σ²I is positive definite");
        inv * w.transpose()
    }
}

fn fa_loglik(w: &DMatrix<f64>, sigma2: f64, s: &DMatrix<f64>, n_samples: usize) -> f64 {
    let (n, m) = (w.nrows(), w.ncols());
    let mm = w.transpose() * w + DMatrix::identity(m, m) * sigma2;
    let chol = Cholesky::new(mm.clone()).expect("WᵀW + σ²I is positive definite");
    let log_det_m: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let log_det_c = (n - m) as f64 * sigma2.ln() + log_det_m;
    let sw = s * w;
    let inner = chol.solve(&(w.transpose() * &sw));
    let tr_cinv_s = (s.trace() - inner.trace()) / sigma2;
    -0.5 * n_samples as f64 * (n as f64 * TAU.ln() + log_det_c + tr_cinv_s)
}

/// Varimax criterion: Σ_j variance over rows of the squared loadings.
pub fn varimax_criterion(w: &DMatrix<f64>) -> f64 {
    let n = w.nrows() as f64;
    w.column_iter()
        .map(|c| {
            let s2: f64 = c.iter().map(|x| x * x).sum::<f64>() / n;
            let s4: f64 = c.iter().map(|x| x.powi(4)).sum::<f64>() / n;
            s4 - s2 * s2
        })
        .sum()
}

/// Varimax by successive pairwise plane rotations, each at its closed-form
/// optimal angle. Returns the rotated loadings and the criterion after each
/// sweep (first entry is the input's criterion).
pub fn varimax_traced(w: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut w = w.clone();
    let m = w.ncols();
    let n = w.nrows() as f64;
    let mut trace = vec![varimax_criterion(&w)];
    if m < 2 {
        return (w, trace);
    }
    for _ in 0..500 {
        for j in 0..m - 1 {
            for k in j + 1..m {
                let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..w.nrows() {
                    let (x, y) = (w[(i, j)], w[(i, k)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    a += u;
                    b += v;
                    c += u * u - v * v;
                    d += 2.0 * u * v;
                }
                let num = d - 2.0 * a * b / n;
                let den = c - (a * a - b * b) / n;
                if num.abs() < 1e-15 && den >= 0.0 {
                    continue;
                }
                let phi = num.atan2(den) / 4.0;
                let (s, co) = phi.sin_cos();
                for i in 0..w.nrows() {
                    let (x, y) = (w[(i, j)], w[(i, k)]);
                    w[(i, j)] = x * co + y * s;
                    w[(i, k)] = -x * s + y * co;
                }
            }
        }
        let crit = varimax_criterion(&w);
        let gain = crit - trace.last().copied().unwrap_or(f64::NEG_INFINITY);
        trace.push(crit);
        if gain < 1e-8 {
            break;
        }
    }
    (w, trace)
}

pub fn varimax(w: &DMatrix<f64>) -> DMatrix<f64> {
    varimax_traced(w).0
}

/// EM fit of the isotropic-noise factor model, started from the leading
/// principal directions and finished with a varimax rotation.
/// Returns the model and the log-likelihood before the first and after
/// every EM iteration.
pub fn fa_fit_traced(frames: ArrayView2<'_, f64>, m: usize, iters: usize, seed: u64) -> Result<(FaModel, Vec<f64>)> {
    let (n_samples, n) = frames.dim();
    if m == 0 || m >= n || n_samples <= n {
        return Err(Error::Argument(format!(
            "factor analysis needs samples > dimension > factors >= 1, got {n_samples} samples, {n} dims, {m} factors"
        )));
    }
    check_input(frames)?;
    let x = to_matrix(frames);
    let mean = column_mean(&x);
    let s = scatter(&x, &mean) / n_samples as f64;
    let (vals, vecs) = sorted_eigen(&s);
    let top = vals[0].max(0.0);
    let rank = vals.iter().filter(|&&v| v > 1e-10 * top && v > 0.0).count();
    if rank < m {
        return Err(Error::Fit(format!("sample covariance rank {rank} is below {m} factors")));
    }
    let trace_s = s.trace();
    let min_var = 1e-12 * (trace_s / n as f64).max(f64::MIN_POSITIVE);
    let mut sigma2 = (vals[m..].iter().sum::<f64>() / (n - m) as f64).max(min_var);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(n, m);
    for j in 0..m {
        let scale = vals[j].max(0.0).sqrt();
        for i in 0..n {
            let jitter: f64 = StandardNormal.sample(&mut rng);
            w[(i, j)] = vecs[(i, j)] * scale + 1e-3 * scale * jitter / (n as f64).sqrt();
        }
    }
    let mut trace = vec![fa_loglik(&w, sigma2, &s, n_samples)];
    for _ in 0..iters {
        let mm = w.transpose() * &w + DMatrix::identity(m, m) * sigma2;
        let mm_inv = mm.try_inverse().ok_or_else(|| Error::Numerical("singular latent covariance".into()))?;
        let sw = &s * &w;
        let inner = DMatrix::identity(m, m) * sigma2 + &mm_inv * w.transpose() * &sw;
        let inner_inv = inner
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular loading update".into()))?;
        let w_new = &sw * inner_inv;
        let resid = (&s - &sw * &mm_inv * w_new.transpose()).trace();
        sigma2 = (resid / n as f64).max(min_var);
        w = w_new;
        let ll = fa_loglik(&w, sigma2, &s, n_samples);
        if !ll.is_finite() {
            return Err(Error::Numerical("factor analysis log-likelihood is not finite".into()));
        }
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if (ll - prev).abs() <= 1e-12 * ll.abs().max(1.0) {
            break;
        }
    }
    let model = FaModel { mean, loadings: varimax(&w), noise_var: sigma2 };
    debug_assert!((model.loglik(&s, n_samples) - trace.last().unwrap()).abs() < 1e-6 * trace.last().unwrap().abs().max(1.0));
    Ok((model, trace))
}

pub fn fa_fit(frames: ArrayView2<'_, f64>, m: usize, iters: usize, seed: u64) -> Result<FaModel> {
    fa_fit_traced(frames, m, iters, seed).map(|(f, _)| f)
}

/// Posterior mean `E[y | x]`.
pub fn fa_transform(x: ArrayView1<'_, f64>, model: &FaModel) -> Result<Vec<f64>> {
    check_dim(x, model.input_dim())?;
    let centered = DVector::from_iterator(x.len(), x.iter().zip(model.mean.iter()).map(|(a, b)| a - b));
    Ok((model.posterior_operator() * centered).iter().copied().collect())
}

// ---------------------------------------------------------------------------
// PCA

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// k×n, orthonormal rows.
    pub components: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub eigenvalues: Vec<f64>,
}

pub fn pca_fit(frames: ArrayView2<'_, f64>, k: usize) -> Result<PcaModel> {
    let (n_samples, n) = frames.dim();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("component count {k} must be in 1..={n}")));
    }
    if n_samples < 2 {
        return Err(Error::Argument("PCA needs at least two samples".into()));
    }
    check_input(frames)?;
    let x = to_matrix(frames);
    let mean = column_mean(&x);
    let cov = scatter(&x, &mean) / (n_samples - 1) as f64;
    let (vals, vecs) = sorted_eigen(&cov);
    let components = vecs.columns(0, k).transpose();
    let eigenvalues = vals[..k].iter().map(|v| v.max(0.0)).collect();
    Ok(PcaModel { components, mean, eigenvalues })
}

pub fn pca_transform(x: ArrayView1<'_, f64>, model: &PcaModel) -> Result<Vec<f64>> {
    check_dim(x, model.mean.len())?;
    let centered = DVector::from_iterator(x.len(), x.iter().zip(model.mean.iter()).map(|(a, b)| a - b));
    Ok((&model.components * centered).iter().copied().collect())
}

// ---------------------------------------------------------------------------
// LDA

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// n×m, unit-norm columns.
    pub projection: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub class_means: Vec<DVector<f64>>,
    pub class_counts: Vec<usize>,
    /// Generalized eigenvalues of the retained directions.
    pub eigenvalues: Vec<f64>,
    /// All generalized eigenvalues, descending.
    pub spectrum: Vec<f64>,
}

/// Within- and between-class scatter (between-class weighted by counts).
pub fn class_scatter(frames: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<usize>, Vec<DVector<f64>>, DVector<f64>)> {
    if labels.len() != frames.nrows() {
        return Err(Error::Argument("label count does not match frame count".into()));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let x = to_matrix(frames);
    let n = x.ncols();
    let mean = column_mean(&x);
    let mut sw = DMatrix::zeros(n, n);
    let mut sb = DMatrix::zeros(n, n);
    let mut counts = Vec::with_capacity(classes.len());
    let mut means = Vec::with_capacity(classes.len());
    for &c in &classes {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let xc = x.select_rows(&rows);
        let mc = column_mean(&xc);
        sw += scatter(&xc, &mc);
        let diff = &mc - &mean;
        sb += &diff * diff.transpose() * rows.len() as f64;
        counts.push(rows.len());
        means.push(mc);
    }
    Ok((sw, sb, counts, means, mean))
}

pub fn lda_fit(frames: ArrayView2<'_, f64>, labels: &[usize], m: usize) -> Result<LdaModel> {
    check_input(frames)?;
    let (sw, sb, counts, class_means, mean) = class_scatter(frames, labels)?;
    let c = counts.len();
    if c < 2 {
        return Err(Error::Data(format!("LDA needs at least two classes, got {c}")));
    }
    if let Some(pos) = counts.iter().position(|&k| k < 2) {
        return Err(Error::Data(format!("class {pos} has fewer than two samples")));
    }
    if m == 0 || m > c - 1 {
        return Err(Error::Argument(format!("LDA dimension {m} must be in 1..={}", c - 1)));
    }
    let n = sw.nrows();
    let scale = (sw.trace() / n as f64).max(f64::MIN_POSITIVE);
    if sb.trace() <= 1e-12 * scale * frames.nrows() as f64 {
        return Err(Error::Data("class means coincide; between-class scatter is zero".into()));
    }
    let min_eig = SymmetricEigen::new(sw.clone()).eigenvalues.min();
    let sw_reg = if min_eig <= 1e-10 * scale * n as f64 {
        &sw + DMatrix::identity(n, n) * (1e-6 * sw.trace() / n as f64).max(1e-12)
    } else {
        sw.clone()
    };
    let chol = Cholesky::new(sw_reg).ok_or_else(|| Error::Numerical("within-class scatter not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse().ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let sym = &l_inv * &sb * l_inv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let (vals, vecs) = sorted_eigen(&sym);
    let mut projection = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut v = l_inv.transpose() * vecs.column(j);
        v /= v.norm();
        canonical_sign(&mut v);
        projection.set_column(j, &v);
    }
    let spectrum: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    Ok(LdaModel {
        projection,
        mean,
        class_means,
        class_counts: counts,
        eigenvalues: spectrum[..m].to_vec(),
        spectrum,
    })
}

pub fn lda_transform(x: ArrayView1<'_, f64>, model: &LdaModel) -> Result<Vec<f64>> {
    check_dim(x, model.mean.len())?;
    let centered = DVector::from_iterator(x.len(), x.iter().zip(model.mean.iter()).map(|(a, b)| a - b));
    Ok((model.projection.transpose() * centered).iter().copied().collect())
}

// ---------------------------------------------------------------------------
// Unified transform and file format

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Fa,
    Pca,
    Lda,
}

impl TransformKind {
    fn tag(self) -> u32 {
        match self {
            TransformKind::Fa => 1,
            TransformKind::Pca => 2,
            TransformKind::Lda => 3,
        }
    }
}

/// A fitted transform; applied as `y = P (x − μ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Fa(FaModel),
    Pca(PcaModel),
    Lda(LdaModel),
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::Fa(_) => TransformKind::Fa,
            Transform::Pca(_) => TransformKind::Pca,
            Transform::Lda(_) => TransformKind::Lda,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.mean().len()
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Transform::Fa(f) => f.factors(),
            Transform::Pca(p) => p.components.nrows(),
            Transform::Lda(l) => l.projection.ncols(),
        }
    }

    fn mean(&self) -> &DVector<f64> {
        match self {
            Transform::Fa(f) => &f.mean,
            Transform::Pca(p) => &p.mean,
            Transform::Lda(l) => &l.mean,
        }
    }

    /// The out×in linear operator.
    pub fn operator(&self) -> DMatrix<f64> {
        match self {
            Transform::Fa(f) => f.posterior_operator(),
            Transform::Pca(p) => p.components.clone(),
            Transform::Lda(l) => l.projection.transpose(),
        }
    }

    /// Applies the transform to every row of `frames`.
    pub fn apply_frames(&self, frames: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if frames.ncols() != self.input_dim() {
            return Err(Error::Argument(format!(
                "frame dimension {} does not match transform input {}",
                frames.ncols(),
                self.input_dim()
            )));
        }
        let op = self.operator();
        let mean = self.mean();
        let (t, n) = frames.dim();
        let k = op.nrows();
        let mut out = Array2::zeros((t, k));
        let mut centered = vec![0.0; n];
        for (r, x) in frames.rows().into_iter().enumerate() {
            for d in 0..n {
                centered[d] = x[d] - mean[d];
            }
            for j in 0..k {
                let mut acc = 0.0;
                for d in 0..n {
                    acc += op[(j, d)] * centered[d];
                }
                out[[r, j]] = acc;
            }
        }
        Ok(out)
    }

    /// Binary layout (u32/f64 little-endian): magic `DRTF`, version, kind tag
    /// (1 FA, 2 PCA, 3 LDA), input dim n, output dim k, mean (n), then
    /// FA: loadings n×k row-major, σ²;
    /// PCA: components k×n row-major, eigenvalues (k);
    /// LDA: projection n×k row-major, eigenvalues (k), class count c,
    /// class counts (c, as f64), class means (c×n).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(TRANSFORM_MAGIC);
        out.extend_from_slice(&TRANSFORM_VERSION.to_le_bytes());
        out.extend_from_slice(&self.kind().tag().to_le_bytes());
        out.extend_from_slice(&(self.input_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.output_dim() as u32).to_le_bytes());
        let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
        for v in self.mean().iter() {
            put(*v);
        }
        match self {
            Transform::Fa(f) => {
                for r in f.loadings.row_iter() {
                    r.iter().for_each(|v| put(*v));
                }
                put(f.noise_var);
            }
            Transform::Pca(p) => {
                for r in p.components.row_iter() {
                    r.iter().for_each(|v| put(*v));
                }
                p.eigenvalues.iter().for_each(|v| put(*v));
            }
            Transform::Lda(l) => {
                for r in l.projection.row_iter() {
                    r.iter().for_each(|v| put(*v));
                }
                l.eigenvalues.iter().for_each(|v| put(*v));
                drop(put);
                out.extend_from_slice(&(l.class_counts.len() as u32).to_le_bytes());
                for c in &l.class_counts {
                    out.extend_from_slice(&(*c as f64).to_le_bytes());
                }
                for m in &l.class_means {
                    for v in m.iter() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Transform> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Format("truncated transform file".into()))?;
        if &magic != TRANSFORM_MAGIC {
            return Err(Error::Format("not a transform file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != TRANSFORM_VERSION {
            return Err(Error::Format(format!("unsupported transform version {version}")));
        }
        let tag = read_u32(&mut r)?;
        let n = read_u32(&mut r)? as usize;
        let k = read_u32(&mut r)? as usize;
        let mean = DVector::from_vec(take_f64(&mut r, n)?);
        let t = match tag {
            1 => {
                let loadings = DMatrix::from_row_slice(n, k, &take_f64(&mut r, n * k)?);
                let noise_var = take_f64(&mut r, 1)?[0];
                Transform::Fa(FaModel { mean, loadings, noise_var })
            }
            2 => {
                let components = DMatrix::from_row_slice(k, n, &take_f64(&mut r, k * n)?);
                let eigenvalues = take_f64(&mut r, k)?;
                Transform::Pca(PcaModel { components, mean, eigenvalues })
            }
            3 => {
                let projection = DMatrix::from_row_slice(n, k, &take_f64(&mut r, n * k)?);
                let eigenvalues = take_f64(&mut r, k)?;
                let c = read_u32(&mut r)? as usize;
                let class_counts = take_f64(&mut r, c)?.into_iter().map(|v| v as usize).collect();
                let class_means = (0..c)
                    .map(|_| take_f64(&mut r, n).map(DVector::from_vec))
                    .collect::<Result<Vec<_>>>()?;
                Transform::Lda(LdaModel {
                    projection,
                    mean,
                    class_means,
                    class_counts,
                    spectrum: eigenvalues.clone(),
                    eigenvalues,
                })
            }
            other => return Err(Error::Format(format!("unknown transform kind tag {other}"))),
        };
        if !r.is_empty() {
            return Err(Error::Format("trailing bytes after transform".into()));
        }
        Ok(t)
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(Error::io_at(path))?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<Transform> {
        Transform::from_bytes(&std::fs::read(path).map_err(Error::io_at(path))?)
    }
}

fn take_f64(r: &mut &[u8], count: usize) -> Result<Vec<f64>> {
    if r.len() < count * 8 {
        return Err(Error::Format("truncated transform payload".into()));
    }
    let (head, tail) = r.split_at(count * 8);
    *r = tail;
    Ok(head.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

const TRANSFORM_MAGIC: &[u8; 4] = b"DRTF";
const TRANSFORM_VERSION: u32 = 1;
