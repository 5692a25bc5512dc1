use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::{ls_estimate, stack_columns, unstack_columns};
use crate::channels::{ChannelDataset, PilotObservation};
use crate::error::{Error, Result};
use crate::io::{read_file, Reader, Writer};
use crate::numerics::{Cholesky, ComplexMatrix};

pub const GMM_MAGIC: &[u8; 4] = b"DMGM";
pub const GMM_VERSION: u16 = 1;

/// Components whose weight falls below this are considered collapsed.
const COLLAPSE_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    /// Stop once the relative change of the mean log-likelihood drops below this.
    pub tolerance: f64,
    /// Diagonal load `reg · tr(C)/n` added to every covariance.
    pub regularization: f64,
    /// Subsample size for k-means++ initialisation.
    pub init_samples: usize,
    pub init_iter: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            components: 16,
            max_iter: 100,
            tolerance: 1e-6,
            regularization: 1e-6,
            init_samples: 2000,
            init_iter: 20,
        }
    }
}

/// Complex Gaussian mixture `Σ_k w_k N_C(μ_k, C_k)` over `vec(H)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<Complex64>>,
    pub covariances: Vec<ComplexMatrix>,
    /// Mean per-sample log-likelihood before each M-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn check(&self) -> Result<()> {
        let k = self.weights.len();
        let n = self.dim();
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return Err(Error::InvalidArgument("inconsistent mixture".into()));
        }
        if self.means.iter().any(|m| m.len() != n)
            || self.covariances.iter().any(|c| c.shape() != (n, n))
        {
            return Err(Error::InvalidArgument(
                "inconsistent mixture dimensions".into(),
            ));
        }
        Ok(())
    }

    /// Mean log-likelihood of the columns of an `n × M` block.
    pub fn mean_log_likelihood(&self, x: &ComplexMatrix) -> Result<f64> {
        let (_, lse) = responsibilities(&self.log_densities(x, 0.0)?);
        Ok(lse.iter().sum::<f64>() / lse.len() as f64)
    }

    /// `ln w_k + ln N_C(x_j; μ_k, C_k + η² I)` for every component and column.
    fn log_densities(&self, x: &ComplexMatrix, noise_variance: f64) -> Result<Vec<Vec<f64>>> {
        self.check()?;
        (0..self.components())
            .map(|k| {
                let mut c = self.covariances[k].clone();
                c.add_diagonal(noise_variance);
                let chol = Cholesky::new(&c)?;
                component_log_density(x, &self.means[k], &chol, self.weights[k])
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.check()?;
        let (k, n) = (self.components(), self.dim());
        let mut w = Writer::new(GMM_MAGIC, GMM_VERSION);
        w.json(&GmmHeader {
            components: k,
            dim: n,
            log_likelihood: self.log_likelihood.clone(),
            converged: self.converged,
        })?;
        w.f64s(&self.weights);
        self.means.iter().for_each(|m| w.complex(m));
        self.covariances
            .iter()
            .for_each(|c| w.complex(c.as_slice()));
        w.write_to(path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        let mut r = Reader::open(&bytes, GMM_MAGIC, GMM_VERSION, "mixture model", path)?;
        let h: GmmHeader = r.json()?;
        let weights = r.f64s(h.components)?;
        let means = (0..h.components)
            .map(|_| r.complex(h.dim))
            .collect::<Result<_>>()?;
        let covariances = (0..h.components)
            .map(|_| r.matrix(h.dim, h.dim))
            .collect::<Result<_>>()?;
        r.finish()?;
        let model = Self {
            weights,
            means,
            covariances,
            log_likelihood: h.log_likelihood,
            converged: h.converged,
        };
        model.check().map_err(|e| r.corrupt(e.to_string()))?;
        Ok(model)
    }
}

/// `DMGM` header: magic "DMGM", version `u16`, then this JSON, then the weights
/// (`K × f64`), means (`K × n` complex) and covariances (`K × n × n` complex, row-major).
#[derive(Serialize, Deserialize)]
struct GmmHeader {
    components: usize,
    dim: usize,
    log_likelihood: Vec<f64>,
    converged: bool,
}

fn centred(x: &ComplexMatrix, mean: &[Complex64]) -> ComplexMatrix {
    let cols = x.cols();
    ComplexMatrix::from_fn(x.rows(), cols, |i, j| x[(i, j)] - mean[i])
}

fn component_log_density(
    x: &ComplexMatrix,
    mean: &[Complex64],
    chol: &Cholesky,
    weight: f64,
) -> Result<Vec<f64>> {
    let n = x.rows();
    let z = chol.lower_inverse().matmul(&centred(x, mean))?;
    let constant = weight.ln() - n as f64 * PI.ln() - chol.log_det();
    let mut quad = vec![0.0; x.cols()];
    for (i, row) in z.as_slice().chunks(x.cols()).enumerate() {
        debug_assert!(i < n);
        for (q, v) in quad.iter_mut().zip(row) {
            *q += v.norm_sqr();
        }
    }
    Ok(quad.into_iter().map(|q| constant - q).collect())
}

/// Normalised responsibilities and the per-column log-sum-exp.
fn responsibilities(log_dens: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = log_dens.first().map_or(0, Vec::len);
    let mut resp = vec![vec![0.0; m]; log_dens.len()];
    let mut lse = vec![0.0; m];
    for j in 0..m {
        let max = log_dens
            .iter()
            .map(|l| l[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = log_dens.iter().map(|l| (l[j] - max).exp()).sum();
        let total = max + sum.ln();
        lse[j] = total;
        for (r, l) in resp.iter_mut().zip(log_dens) {
            r[j] = (l[j] - total).exp();
        }
    }
    (resp, lse)
}

/// Weighted mean and covariance of the columns, plus diagonal loading.
fn weighted_moments(
    x: &ComplexMatrix,
    weights: &[f64],
    reg: f64,
) -> Result<(f64, Vec<Complex64>, ComplexMatrix)> {
    let (n, m) = x.shape();
    let nk: f64 = weights.iter().sum();
    let mut mean = vec![Complex64::new(0.0, 0.0); n];
    for (i, mu) in mean.iter_mut().enumerate() {
        for j in 0..m {
            *mu += x[(i, j)] * weights[j];
        }
        *mu /= nk;
    }
    let mut d = centred(x, &mean);
    for i in 0..n {
        for j in 0..m {
            d[(i, j)] *= weights[j].sqrt();
        }
    }
    let mut cov = d.matmul(&d.adjoint())?;
    cov.scale_mut(1.0 / nk);
    cov.symmetrize();
    let load = reg * cov.trace().re / n as f64;
    cov.add_diagonal(load.max(f64::MIN_POSITIVE));
    Ok((nk, mean, cov))
}

fn squared_distance(x: &ComplexMatrix, j: usize, c: &[Complex64]) -> f64 {
    c.iter()
        .enumerate()
        .map(|(i, ci)| (x[(i, j)] - ci).norm_sqr())
        .sum()
}

/// k-means++ seeding followed by Lloyd iterations on a subsample; returns centres.
fn kmeans_pp<R: Rng + ?Sized>(
    x: &ComplexMatrix,
    k: usize,
    iters: usize,
    rng: &mut R,
) -> Vec<Vec<Complex64>> {
    let (n, m) = x.shape();
    let column = |j: usize| (0..n).map(|i| x[(i, j)]).collect::<Vec<_>>();
    let mut centres = vec![column(rng.random_range(0..m))];
    let mut d2: Vec<f64> = (0..m)
        .map(|j| squared_distance(x, j, &centres[0]))
        .collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            d2.iter()
                .position(|&d| {
                    u -= d;
                    u <= 0.0
                })
                .unwrap_or(m - 1)
        } else {
            rng.random_range(0..m)
        };
        let c = column(pick);
        for (j, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(x, j, &c));
        }
        centres.push(c);
    }
    for _ in 0..iters {
        let assign = nearest(x, &centres);
        let mut sums = vec![vec![Complex64::new(0.0, 0.0); n]; k];
        let mut counts = vec![0usize; k];
        for (j, &a) in assign.iter().enumerate() {
            counts[a] += 1;
            for i in 0..n {
                sums[a][i] += x[(i, j)];
            }
        }
        for ((c, s), &cnt) in centres.iter_mut().zip(sums).zip(&counts) {
            if cnt > 0 {
                *c = s.into_iter().map(|v| v / cnt as f64).collect();
            }
        }
    }
    centres
}

fn nearest(x: &ComplexMatrix, centres: &[Vec<Complex64>]) -> Vec<usize> {
    (0..x.cols())
        .map(|j| {
            centres
                .iter()
                .map(|c| squared_distance(x, j, c))
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |best, (k, d)| if d < best.1 { (k, d) } else { best },
                )
                .0
        })
        .collect()
}

/// EM fit of a `K`-component complex Gaussian mixture to the columns of `x` (`n × M`).
pub fn fit_gmm_columns<R: Rng + ?Sized>(
    x: &ComplexMatrix,
    config: &GmmConfig,
    rng: &mut R,
) -> Result<GmmModel> {
    let (n, m) = x.shape();
    let k = config.components;
    if k == 0 || m < k {
        return Err(Error::InvalidArgument(format!(
            "need at least K = {k} > 0 samples, got {m}"
        )));
    }
    if !(config.regularization > 0.0) || !(config.tolerance >= 0.0) {
        return Err(Error::InvalidArgument(
            "regularisation must be positive".into(),
        ));
    }

    let sub_n = config.init_samples.clamp(k, m);
    let idx = sample(rng, m, sub_n).into_vec();
    let sub = ComplexMatrix::from_fn(n, sub_n, |i, j| x[(i, idx[j])]);
    let centres = kmeans_pp(&sub, k, config.init_iter, rng);
    let global = weighted_moments(x, &vec![1.0; m], config.regularization)?.2;

    let assign = nearest(x, &centres);
    let mut model = GmmModel {
        weights: vec![0.0; k],
        means: Vec::with_capacity(k),
        covariances: Vec::with_capacity(k),
        log_likelihood: Vec::new(),
        converged: false,
    };
    for (c, centre) in centres.iter().enumerate() {
        let w: Vec<f64> = assign
            .iter()
            .map(|&a| if a == c { 1.0 } else { 0.0 })
            .collect();
        let count: f64 = w.iter().sum();
        model.weights[c] = count.max(1.0) / m as f64;
        if count >= n as f64 {
            let (_, mean, cov) = weighted_moments(x, &w, config.regularization)?;
            model.means.push(mean);
            model.covariances.push(cov);
        } else {
            model.means.push(centre.clone());
            model.covariances.push(global.clone());
        }
    }
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);

    let mut reseeded = vec![false; k];
    for _ in 0..config.max_iter {
        let (resp, lse) = responsibilities(&model.log_densities(x, 0.0)?);
        let ll = lse.iter().sum::<f64>() / m as f64;
        let prev = model.log_likelihood.last().copied();
        model.log_likelihood.push(ll);
        if let Some(p) = prev {
            if (ll - p).abs() <= config.tolerance * p.abs().max(1.0) {
                model.converged = true;
                break;
            }
        }
        for c in 0..k {
            let nk: f64 = resp[c].iter().sum();
            if nk / (m as f64) < COLLAPSE_WEIGHT {
                if reseeded[c] {
                    return Err(Error::ComponentCollapse(c));
                }
                reseeded[c] = true;
                let worst = (0..m).fold(0, |b, j| if lse[j] < lse[b] { j } else { b });
                model.means[c] = (0..n).map(|i| x[(i, worst)]).collect();
                model.covariances[c] = global.clone();
                model.weights[c] = 1.0 / k as f64;
                continue;
            }
            let (nk, mean, cov) = weighted_moments(x, &resp[c], config.regularization)?;
            model.weights[c] = nk / m as f64;
            model.means[c] = mean;
            model.covariances[c] = cov;
        }
        let total: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(model)
}

/// EM fit on `vec(H)` of every training channel.
pub fn fit_gmm<R: Rng + ?Sized>(
    dataset: &ChannelDataset,
    config: &GmmConfig,
    rng: &mut R,
) -> Result<GmmModel> {
    let mats: Vec<ComplexMatrix> = dataset.channels().cloned().collect();
    fit_gmm_columns(&stack_columns(&mats)?, config, rng)
}

/// Per-SNR quantities of the mixture estimator: whitening factors, log-determinants
/// and LMMSE filters of `C_k + η² I`.
#[derive(Debug, Clone)]
pub struct GmmFilter {
    model: GmmModel,
    noise_variance: f64,
    whiteners: Vec<ComplexMatrix>,
    log_consts: Vec<f64>,
    filters: Vec<ComplexMatrix>,
}

impl GmmFilter {
    pub fn new(model: &GmmModel, noise_variance: f64) -> Result<Self> {
        model.check()?;
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mixture estimator needs a positive noise variance, got {noise_variance}"
            )));
        }
        let n = model.dim();
        let mut whiteners = Vec::new();
        let mut log_consts = Vec::new();
        let mut filters = Vec::new();
        for (c, w) in model.covariances.iter().zip(&model.weights) {
            let mut loaded = c.clone();
            loaded.add_diagonal(noise_variance);
            let chol = Cholesky::new(&loaded)?;
            let linv = chol.lower_inverse();
            // C (C + η² I)^{-1} = C L^{-H} L^{-1}
            filters.push(c.matmul(&linv.adjoint())?.matmul(&linv)?);
            whiteners.push(linv);
            log_consts.push(w.ln() - n as f64 * PI.ln() - chol.log_det());
        }
        Ok(Self {
            model: model.clone(),
            noise_variance,
            whiteners,
            log_consts,
            filters,
        })
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Responsibilities `p(k | y_j)` for each column of an `n × B` block.
    pub fn responsibilities(&self, y: &ComplexMatrix) -> Result<Vec<Vec<f64>>> {
        Ok(responsibilities(&self.log_densities(y)?).0)
    }

    fn log_densities(&self, y: &ComplexMatrix) -> Result<Vec<Vec<f64>>> {
        if y.rows() != self.model.dim() {
            return Err(Error::shape(self.model.dim(), y.rows()));
        }
        self.whiteners
            .iter()
            .zip(&self.log_consts)
            .zip(&self.model.means)
            .map(|((linv, lc), mu)| {
                let z = linv.matmul(&centred(y, mu))?;
                let mut out = vec![*lc; y.cols()];
                for row in z.as_slice().chunks(y.cols()) {
                    for (o, v) in out.iter_mut().zip(row) {
                        *o -= v.norm_sqr();
                    }
                }
                Ok(out)
            })
            .collect()
    }

    /// `Σ_k p(k|y) [μ_k + C_k (C_k + η² I)^{-1} (y − μ_k)]` for each column.
    pub fn apply(&self, y: &ComplexMatrix) -> Result<ComplexMatrix> {
        let resp = self.responsibilities(y)?;
        let mut out = ComplexMatrix::zeros(y.rows(), y.cols());
        for ((filter, mu), r) in self.filters.iter().zip(&self.model.means).zip(&resp) {
            let est = filter.matmul(&centred(y, mu))?;
            for i in 0..y.rows() {
                for j in 0..y.cols() {
                    out[(i, j)] += (est[(i, j)] + mu[i]) * r[j];
                }
            }
        }
        Ok(out)
    }
}

/// Mixture estimate for a single column vector `y` (`n × 1`).
pub fn gmm_estimate(
    y: &ComplexMatrix,
    model: &GmmModel,
    noise_variance: f64,
) -> Result<ComplexMatrix> {
    GmmFilter::new(model, noise_variance)?.apply(y)
}

/// Mixture estimate of a channel from its pilot observation.
pub fn gmm_estimate_observation(
    obs: &PilotObservation,
    filter: &GmmFilter,
) -> Result<ComplexMatrix> {
    let (r, c) = obs.dims();
    let y = stack_columns(&[ls_estimate(obs)?])?;
    Ok(unstack_columns(&filter.apply(&y)?, r, c)?.remove(0))
}
