//! Bayesian updating and audits of the conservation identities.
//!
//! For a prior `p0`, likelihood `p(D|x)` and posterior `p(x|D)`, the surprisals
//! `S0 = -log p0`, `S = -log p(x|D)` and the information gain
//! `i = log p(D|x) - log p(D)` satisfy `S + i = S0` at every `x`. Averaging
//! under the joint `p(x, D)` gives `H[p] + I = H[p0]`; averaging the Laplacian
//! gives `J[p] - K = J[p0]` with `K = -<Δi>`.
//!
//! Conjugate Gaussian models are audited in closed form. Grid problems draw
//! datasets by ancestral sampling (cell from the prior by inverse CDF, then
//! data given that cell) and average the per-dataset posterior statistics.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::io::{Density, DensityFile};
use crate::density::{discretize, surprisal_field, GaussianComponent, GridDensity, GridSpec};
use crate::error::{Error, Result};
use crate::estimators::{grid_entropy, grid_fisher};
use crate::rng;
use crate::stencil;

/// Gaussian prior with additive Gaussian observation noise, `D_k = x + e_k`.
#[derive(Debug, Clone)]
pub struct ConjugateGaussianModel {
    prior: GaussianComponent,
    noise_covariance: DMatrix<f64>,
    noise_precision: DMatrix<f64>,
    n_obs: usize,
}

impl ConjugateGaussianModel {
    pub fn new(prior: GaussianComponent, noise_covariance: DMatrix<f64>, n_obs: usize) -> Result<Self> {
        let noise = GaussianComponent::new(DVector::zeros(prior.dim()), noise_covariance).map_err(|e| match e {
            Error::DimensionMismatch { .. } => Error::DimensionMismatch {
                expected: prior.dim(),
                got: 0,
            },
            other => other,
        })?;
        Ok(Self {
            noise_precision: noise.precision().clone(),
            noise_covariance: noise.covariance().clone(),
            prior,
            n_obs,
        })
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn prior(&self) -> &GaussianComponent {
        &self.prior
    }

    pub fn noise_covariance(&self) -> &DMatrix<f64> {
        &self.noise_covariance
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// `Sigma0^-1 + n Sigma_noise^-1`.
    pub fn posterior_precision(&self) -> DMatrix<f64> {
        self.prior.precision() + &self.noise_precision * self.n_obs as f64
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite("precision matrix".into()))?;
    Ok(symmetrize(chol.inverse()))
}

fn spd_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let chol = Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite("log-determinant argument".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Closed-form conjugate posterior given `n_obs` observation vectors.
pub fn posterior_conjugate(m: &ConjugateGaussianModel, data: &[Vec<f64>]) -> Result<GaussianComponent> {
    if data.len() != m.n_obs {
        return Err(Error::DimensionMismatch {
            expected: m.n_obs,
            got: data.len(),
        });
    }
    let n = m.dim();
    let mut sum = DVector::zeros(n);
    for d in data {
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: d.len(),
            });
        }
        sum += DVector::from_column_slice(d);
    }
    let cov = spd_inverse(&m.posterior_precision())?;
    let mean = &cov * (m.prior.precision() * m.prior.mean() + &m.noise_precision * sum);
    GaussianComponent::new(mean, cov)
}

/// Which identity a report audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    Pointwise,
    Entropy,
    Fisher,
    /// Projection by `Δ^m` for the given order.
    Projected(u32),
}

/// Outcome of a conservation audit; `residual = lhs - rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    pub identity: Identity,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub mc_std_error: f64,
    pub samples_used: usize,
    /// Named intermediate terms (prior/posterior entropies, information, ...).
    pub terms: BTreeMap<String, f64>,
}

impl ConservationReport {
    pub fn new(identity: Identity, lhs: f64, rhs: f64, mc_std_error: f64, samples_used: usize) -> Self {
        Self {
            identity,
            lhs,
            rhs,
            residual: lhs - rhs,
            mc_std_error,
            samples_used,
            terms: BTreeMap::new(),
        }
    }

    fn term(mut self, name: &str, value: f64) -> Self {
        self.terms.insert(name.to_string(), value);
        self
    }

    /// `|residual| <= k * se + allowance`.
    pub fn within(&self, k_sigma: f64, allowance: f64) -> bool {
        self.residual.abs() <= k_sigma * self.mc_std_error + allowance
    }
}

const LN_2PIE: f64 = 2.837_877_066_409_345_5;

/// Entropy identity for a conjugate model, every term in closed form.
///
/// The posterior entropy comes from the posterior covariance and the mutual
/// information from the channel formula `1/2 log det(I + n Sigma0 Sigma_noise^-1)`.
pub fn entropy_conservation_audit(m: &ConjugateGaussianModel) -> Result<ConservationReport> {
    let n = m.dim() as f64;
    let h0 = m.prior.entropy();
    let post_cov = spd_inverse(&m.posterior_precision())?;
    let h_post = 0.5 * (n * LN_2PIE + spd_log_det(&post_cov)?);
    // Symmetric form of I + n Sigma0 Sigma_noise^-1 via Sigma0 = L L^T.
    let l0 = Cholesky::new(m.prior.covariance().clone())
        .ok_or_else(|| Error::NotPositiveDefinite("prior covariance".into()))?
        .l();
    let channel = DMatrix::identity(m.dim(), m.dim()) + l0.transpose() * &m.noise_precision * &l0 * m.n_obs as f64;
    let info = 0.5 * spd_log_det(&symmetrize(channel))?;
    Ok(ConservationReport::new(Identity::Entropy, h_post + info, h0, 0.0, 0)
        .term("H_prior", h0)
        .term("H_posterior", h_post)
        .term("mutual_information", info))
}

/// Fisher identity for a conjugate model: `J_post - n tr(Sigma_noise^-1) = tr(Sigma0^-1)`.
pub fn fisher_conservation_audit(m: &ConjugateGaussianModel) -> Result<ConservationReport> {
    let j0 = m.prior.fisher_trace();
    let post = GaussianComponent::new(DVector::zeros(m.dim()), spd_inverse(&m.posterior_precision())?)?;
    let j_post = post.fisher_trace();
    let k = m.n_obs as f64 * m.noise_precision.trace();
    Ok(ConservationReport::new(Identity::Fisher, j_post - k, j0, 0.0, 0)
        .term("J_prior", j0)
        .term("J_posterior", j_post)
        .term("K", k))
}

/// Observation models for grid problems.
#[derive(Debug, Clone)]
pub enum Likelihood {
    /// `n_obs` observations `D_k = x + e`, `e ~ N(0, covariance)`.
    GaussianNoise {
        precision: DMatrix<f64>,
        chol: DMatrix<f64>,
        n_obs: usize,
    },
    /// `n_obs` observations `D_k = x + c x^3 + e` per axis, isotropic noise; curvature varies with `x`.
    CubicObservation {
        coefficient: f64,
        noise_variance: f64,
        n_obs: usize,
    },
    /// Constant likelihood; carries no information.
    Uninformative,
}

impl Likelihood {
    pub fn gaussian_noise(covariance: DMatrix<f64>, n_obs: usize) -> Result<Self> {
        let g = GaussianComponent::new(DVector::zeros(covariance.nrows()), covariance)?;
        let chol = Cholesky::new(g.covariance().clone())
            .ok_or_else(|| Error::NotPositiveDefinite("noise covariance".into()))?
            .l();
        Ok(Likelihood::GaussianNoise {
            precision: g.precision().clone(),
            chol,
            n_obs,
        })
    }

    pub fn cubic(coefficient: f64, noise_variance: f64, n_obs: usize) -> Result<Self> {
        if !(noise_variance > 0.0) {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        Ok(Likelihood::CubicObservation {
            coefficient,
            noise_variance,
            n_obs,
        })
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if let Likelihood::GaussianNoise { precision, .. } = self {
            if precision.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: precision.nrows(),
                });
            }
        }
        Ok(())
    }

    /// `log p(D|x)` up to nothing: the normalizing constants are included.
    pub fn log_likelihood(&self, x: &[f64], data: &[Vec<f64>]) -> f64 {
        match self {
            Likelihood::GaussianNoise { precision, chol, .. } => {
                let n = x.len();
                let log_det: f64 = 2.0 * (0..n).map(|i| chol[(i, i)].ln()).sum::<f64>();
                let norm = -0.5 * (n as f64 * (2.0 * PI).ln() + log_det);
                data.iter()
                    .map(|d| {
                        let mut q = 0.0;
                        for a in 0..n {
                            for b in 0..n {
                                q += (d[a] - x[a]) * precision[(a, b)] * (d[b] - x[b]);
                            }
                        }
                        norm - 0.5 * q
                    })
                    .sum()
            }
            Likelihood::CubicObservation {
                coefficient,
                noise_variance,
                ..
            } => {
                let norm = -0.5 * (2.0 * PI * noise_variance).ln();
                data.iter()
                    .map(|d| {
                        x.iter()
                            .zip(d)
                            .map(|(xa, da)| {
                                let r = da - xa - coefficient * xa.powi(3);
                                norm - 0.5 * r * r / noise_variance
                            })
                            .sum::<f64>()
                    })
                    .sum()
            }
            Likelihood::Uninformative => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
        match self {
            Likelihood::GaussianNoise { chol, n_obs, .. } => (0..*n_obs)
                .map(|_| {
                    let z = DVector::from_fn(x.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                    let e = chol * z;
                    x.iter().zip(e.iter()).map(|(a, b)| a + b).collect()
                })
                .collect(),
            Likelihood::CubicObservation {
                coefficient,
                noise_variance,
                n_obs,
            } => (0..*n_obs)
                .map(|_| {
                    x.iter()
                        .map(|xa| {
                            let z: f64 = rng.sample(StandardNormal);
                            xa + coefficient * xa.powi(3) + noise_variance.sqrt() * z
                        })
                        .collect()
                })
                .collect(),
            Likelihood::Uninformative => Vec::new(),
        }
    }
}

/// Prior on a grid plus an observation model.
#[derive(Debug, Clone)]
pub struct GridBayesProblem {
    prior: GridDensity,
    likelihood: Likelihood,
    cdf: Vec<f64>,
}

/// Grid posterior for one dataset.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    pub posterior: GridDensity,
    pub log_likelihood: Vec<f64>,
    pub log_evidence: f64,
}

impl GridPosterior {
    /// Pointwise information gain `i(x) = log p(D|x) - log p(D)`.
    pub fn information(&self) -> Vec<f64> {
        self.log_likelihood.iter().map(|l| l - self.log_evidence).collect()
    }
}

impl GridBayesProblem {
    pub fn new(prior: GridDensity, likelihood: Likelihood) -> Result<Self> {
        likelihood.check_dim(prior.dims())?;
        let prior = prior.normalize()?;
        let dv = prior.spec().cell_volume();
        let mut acc = 0.0;
        let cdf = prior
            .values()
            .iter()
            .map(|p| {
                acc += p * dv;
                acc
            })
            .collect();
        Ok(Self { prior, likelihood, cdf })
    }

    pub fn prior(&self) -> &GridDensity {
        &self.prior
    }

    pub fn likelihood(&self) -> &Likelihood {
        &self.likelihood
    }

    /// Posterior on the grid; the evidence is the Riemann sum of `p(D|x) p0(x)`.
    pub fn posterior(&self, data: &[Vec<f64>]) -> Result<GridPosterior> {
        let spec = self.prior.spec();
        let ll: Vec<f64> = (0..spec.len())
            .map(|i| self.likelihood.log_likelihood(&spec.point(i), data))
            .collect();
        if ll.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::InvariantViolated("likelihood not finite on grid".into()));
        }
        let dv = spec.cell_volume();
        let max = ll
            .iter()
            .zip(self.prior.values())
            .filter(|(_, p)| **p > 0.0)
            .map(|(l, _)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::AllZero);
        }
        let scaled: f64 = ll
            .iter()
            .zip(self.prior.values())
            .map(|(l, p)| (l - max).exp() * p * dv)
            .sum();
        let log_evidence = max + scaled.ln();
        let values = ll
            .iter()
            .zip(self.prior.values())
            .map(|(l, p)| (l - log_evidence).exp() * p)
            .collect();
        let posterior = GridDensity::new(spec.clone(), values)?.with_floor_rel(self.prior.floor_rel());
        Ok(GridPosterior {
            posterior,
            log_likelihood: ll,
            log_evidence,
        })
    }

    /// Ancestral draw: a grid cell from the prior (inverse CDF), then data given that cell.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<Vec<f64>>) {
        let total = *self.cdf.last().expect("non-empty grid");
        let u: f64 = rng.random::<f64>() * total;
        let cell = self.cdf.partition_point(|c| *c <= u).min(self.cdf.len() - 1);
        let x = self.prior.spec().point(cell);
        (cell, self.likelihood.sample(&x, rng))
    }
}

/// Pointwise identity check over selected grid points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseReport {
    pub max_residual: f64,
    pub checked: usize,
    /// Points where the density floor applied to the prior or posterior; excluded.
    pub floored: Vec<usize>,
}

impl PointwiseReport {
    pub fn to_conservation(&self) -> ConservationReport {
        ConservationReport::new(Identity::Pointwise, self.max_residual, 0.0, 0.0, self.checked)
            .term("floored_points", self.floored.len() as f64)
    }
}

/// `max |S(x) + i(x) - S0(x)|` over `indices` (all points when `None`).
///
/// The posterior is recomputed as a density and its surprisal taken from the
/// density values, so the check exercises normalization and the floor rule.
pub fn pointwise_identity_residual(
    prob: &GridBayesProblem,
    data: &[Vec<f64>],
    indices: Option<&[usize]>,
) -> Result<PointwiseReport> {
    let post = prob.posterior(data)?;
    let s = surprisal_field(&post.posterior);
    let s0 = surprisal_field(&prob.prior);
    let info = post.information();
    let mut floored_mask = vec![false; info.len()];
    for &i in s.floored.iter().chain(&s0.floored) {
        floored_mask[i] = true;
    }
    let all: Vec<usize>;
    let idx = match indices {
        Some(v) => v,
        None => {
            all = (0..info.len()).collect();
            &all
        }
    };
    let mut max_residual: f64 = 0.0;
    let mut checked = 0;
    let mut floored = Vec::new();
    for &i in idx {
        if floored_mask[i] {
            floored.push(i);
            continue;
        }
        checked += 1;
        max_residual = max_residual.max((s.field.values[i] + info[i] - s0.field.values[i]).abs());
    }
    Ok(PointwiseReport {
        max_residual,
        checked,
        floored,
    })
}

/// Per-dataset statistics gathered by the grid audits.
pub(crate) fn per_dataset<T: Send>(
    prob: &GridBayesProblem,
    n_datasets: usize,
    seed: u64,
    f: impl Fn(&GridPosterior) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if n_datasets < 2 {
        return Err(Error::BudgetExceeded("need at least two sampled datasets".into()));
    }
    (0..n_datasets)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let (_, data) = prob.sample_dataset(&mut r);
            f(&prob.posterior(&data)?)
        })
        .collect()
}

pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Entropy identity on a grid problem by joint Monte Carlo over datasets.
pub fn entropy_conservation_audit_grid(
    prob: &GridBayesProblem,
    n_datasets: usize,
    seed: u64,
) -> Result<ConservationReport> {
    let h0 = grid_entropy(&prob.prior);
    let rows = per_dataset(prob, n_datasets, seed, |post| {
        let h = grid_entropy(&post.posterior);
        let i = post.posterior.expect(&post.information());
        Ok((h, i))
    })?;
    let sums: Vec<f64> = rows.iter().map(|(h, i)| h + i).collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let is: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (lhs, se) = mean_and_se(&sums);
    let (h_mean, h_se) = mean_and_se(&hs);
    let (i_mean, i_se) = mean_and_se(&is);
    Ok(ConservationReport::new(Identity::Entropy, lhs, h0, se, n_datasets)
        .term("H_prior", h0)
        .term("H_posterior", h_mean)
        .term("H_posterior_se", h_se)
        .term("mutual_information", i_mean)
        .term("mutual_information_se", i_se))
}

/// Fisher identity on a grid problem: `<ΔS> + <Δi>` averaged over datasets against `<ΔS0>`.
///
/// Each posterior is also checked for resolution (gradient vs Laplacian form at `crosscheck_tol`).
pub fn fisher_conservation_audit_grid(
    prob: &GridBayesProblem,
    n_datasets: usize,
    seed: u64,
    crosscheck_tol: f64,
) -> Result<ConservationReport> {
    let j0 = grid_fisher(&prob.prior, crosscheck_tol)?.laplacian_form;
    let spec = prob.prior.spec().clone();
    let rows = per_dataset(prob, n_datasets, seed, |post| {
        let j = grid_fisher(&post.posterior, crosscheck_tol)?.laplacian_form;
        let k = -post.posterior.expect(&stencil::laplacian(&post.information(), &spec));
        Ok((j, k))
    })?;
    let diffs: Vec<f64> = rows.iter().map(|(j, k)| j - k).collect();
    let js: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ks: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (lhs, se) = mean_and_se(&diffs);
    let (j_mean, j_se) = mean_and_se(&js);
    let (k_mean, k_se) = mean_and_se(&ks);
    Ok(ConservationReport::new(Identity::Fisher, lhs, j0, se, n_datasets)
        .term("J_prior", j0)
        .term("J_posterior", j_mean)
        .term("J_posterior_se", j_se)
        .term("K", k_mean)
        .term("K_se", k_se))
}

/// Likelihood families accepted in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LikelihoodFile {
    GaussianNoise {
        covariance: Vec<Vec<f64>>,
        #[serde(default = "one")]
        n_obs: usize,
    },
    CubicObservation {
        coefficient: f64,
        noise_variance: f64,
        #[serde(default = "one")]
        n_obs: usize,
    },
    Uninformative,
}

fn one() -> usize {
    1
}

/// Model file: a conjugate Gaussian model or a grid problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelFile {
    ConjugateGaussian {
        prior_mean: Vec<f64>,
        prior_covariance: Vec<Vec<f64>>,
        noise_covariance: Vec<Vec<f64>>,
        n_obs: usize,
        #[serde(default)]
        data: Option<Vec<Vec<f64>>>,
    },
    Grid {
        prior: DensityFile,
        /// Required when the prior is a mixture.
        #[serde(default)]
        grid: Option<GridSpec>,
        likelihood: LikelihoodFile,
        n_datasets: usize,
    },
}

pub enum Model {
    Conjugate {
        model: ConjugateGaussianModel,
        data: Option<Vec<Vec<f64>>>,
    },
    Grid {
        problem: GridBayesProblem,
        n_datasets: usize,
    },
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("matrix must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl LikelihoodFile {
    pub fn build(&self) -> Result<Likelihood> {
        match self {
            LikelihoodFile::GaussianNoise { covariance, n_obs } => {
                Likelihood::gaussian_noise(matrix(covariance)?, *n_obs)
            }
            LikelihoodFile::CubicObservation {
                coefficient,
                noise_variance,
                n_obs,
            } => Likelihood::cubic(*coefficient, *noise_variance, *n_obs),
            LikelihoodFile::Uninformative => Ok(Likelihood::Uninformative),
        }
    }
}

impl ModelFile {
    pub fn build(&self, base_dir: &std::path::Path) -> Result<Model> {
        match self {
            ModelFile::ConjugateGaussian {
                prior_mean,
                prior_covariance,
                noise_covariance,
                n_obs,
                data,
            } => {
                let prior = GaussianComponent::from_vecs(prior_mean.clone(), prior_covariance.clone())?;
                Ok(Model::Conjugate {
                    model: ConjugateGaussianModel::new(prior, matrix(noise_covariance)?, *n_obs)?,
                    data: data.clone(),
                })
            }
            ModelFile::Grid {
                prior,
                grid,
                likelihood,
                n_datasets,
            } => {
                let prior = match (prior.resolve(base_dir)?, grid) {
                    (Density::Grid(g), _) => g,
                    (Density::Mixture(m), Some(spec)) => discretize(&m, spec)?,
                    (Density::Mixture(_), None) => return Err(Error::Parse("a mixture prior needs a \"grid\"".into())),
                };
                Ok(Model::Grid {
                    problem: GridBayesProblem::new(prior, likelihood.build()?)?,
                    n_datasets: *n_datasets,
                })
            }
        }
    }
}

/// Entropy of an `n`-dimensional Gaussian with covariance determinant `det`.
pub fn gaussian_entropy_from_det(n: usize, det: f64) -> f64 {
    0.5 * (n as f64 * (2.0 * PI * E).ln() + det.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::GaussianMixture;

    fn scalar_model(prior_var: f64, noise_var: f64, n_obs: usize) -> ConjugateGaussianModel {
        ConjugateGaussianModel::new(
            GaussianComponent::isotropic(1, prior_var).unwrap(),
            DMatrix::from_element(1, 1, noise_var),
            n_obs,
        )
        .unwrap()
    }

    #[test]
    fn conjugate_posteriors() {
        let m = scalar_model(1.0, 1.0, 1);
        let p = posterior_conjugate(&m, &[vec![0.0]]).unwrap();
        assert!(p.mean()[0].abs() < 1e-15);
        assert!((p.covariance()[(0, 0)] - 0.5).abs() < 1e-15);
        let p = posterior_conjugate(&m, &[vec![2.0]]).unwrap();
        assert!((p.mean()[0] - 1.0).abs() < 1e-15);
        assert!((p.covariance()[(0, 0)] - 0.5).abs() < 1e-15);
        let m0 = scalar_model(1.0, 1.0, 0);
        let p = posterior_conjugate(&m0, &[]).unwrap();
        assert_eq!(&p, m0.prior());
        assert!(matches!(
            posterior_conjugate(&m, &[vec![1.0], vec![2.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            posterior_conjugate(&m, &[vec![1.0, 2.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn entropy_audit_scalar() {
        let r = entropy_conservation_audit(&scalar_model(1.0, 1.0, 1)).unwrap();
        assert!((r.terms["H_prior"] - 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((r.terms["H_posterior"] - 1.072_364_942_924_7).abs() < 1e-12);
        assert!((r.terms["mutual_information"] - 0.5 * 2f64.ln()).abs() < 1e-14);
        assert!(r.residual.abs() < 1e-10);
        assert_eq!(r.mc_std_error, 0.0);

        let r = entropy_conservation_audit(&scalar_model(1.0, 1e12, 1)).unwrap();
        assert!(r.terms["mutual_information"].abs() < 1e-11);
        assert!((r.terms["H_posterior"] - r.terms["H_prior"]).abs() < 1e-11);
    }

    #[test]
    fn entropy_audit_information_is_additive_over_axes() {
        let prior = GaussianComponent::diagonal(vec![0.0, 0.0], &[2.0, 0.5]).unwrap();
        let noise = DMatrix::from_diagonal(&DVector::from_vec(vec![0.7, 3.0]));
        let r = entropy_conservation_audit(&ConjugateGaussianModel::new(prior, noise, 2).unwrap()).unwrap();
        let per_axis = |s0: f64, sn: f64| 0.5 * (1.0 + 2.0 * s0 / sn).ln();
        let expect = per_axis(2.0, 0.7) + per_axis(0.5, 3.0);
        assert!((r.terms["mutual_information"] - expect).abs() < 1e-13);
        assert!(r.residual.abs() < 1e-10);
    }

    #[test]
    fn fisher_audit_scalar() {
        let r = fisher_conservation_audit(&scalar_model(1.0, 1.0, 1)).unwrap();
        assert_eq!(r.terms["J_prior"], 1.0);
        assert_eq!(r.terms["K"], 1.0);
        assert!((r.terms["J_posterior"] - 2.0).abs() < 1e-14);
        assert!(r.residual.abs() < 1e-10);
        let r = fisher_conservation_audit(&scalar_model(1.0, 1.0, 3)).unwrap();
        assert!((r.terms["J_posterior"] - 4.0).abs() < 1e-14);
        assert_eq!(r.terms["K"], 3.0);
        let r = fisher_conservation_audit(&scalar_model(1.0, 1e12, 1)).unwrap();
        assert!(r.terms["K"] < 1e-11);
        assert!((r.terms["J_posterior"] - 1.0).abs() < 1e-11);
    }

    fn gaussian_grid_problem() -> GridBayesProblem {
        let prior = discretize(
            &GaussianMixture::isotropic(1, 1.0),
            &GridSpec::cube(1, 256, 8.0).unwrap(),
        )
        .unwrap();
        GridBayesProblem::new(
            prior,
            Likelihood::gaussian_noise(DMatrix::from_element(1, 1, 1.0), 1).unwrap(),
        )
        .unwrap()
    }

    fn bimodal_problem() -> GridBayesProblem {
        let m = GaussianMixture::from_parts(
            vec![0.5, 0.5],
            vec![vec![-2.0], vec![2.0]],
            vec![vec![vec![0.5]], vec![vec![0.5]]],
        )
        .unwrap();
        let prior = discretize(&m, &GridSpec::cube(1, 256, 8.0).unwrap()).unwrap();
        GridBayesProblem::new(
            prior,
            Likelihood::gaussian_noise(DMatrix::from_element(1, 1, 1.0), 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn pointwise_identity_holds() {
        let prob = gaussian_grid_problem();
        for d in [-1.5, 0.0, 2.7] {
            let r = pointwise_identity_residual(&prob, &[vec![d]], None).unwrap();
            assert!(r.max_residual <= 1e-8, "{r:?}");
            assert_eq!(r.checked + r.floored.len(), 256);
            assert!(r.checked > 150);
        }
        let r = pointwise_identity_residual(&bimodal_problem(), &[vec![0.0]], Some(&[40, 100, 128, 200])).unwrap();
        assert!(r.max_residual <= 1e-8);
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn pointwise_identity_direct_recomputation() {
        // Oracle: posterior from the analytic prior and likelihood, normalized by an independent sum.
        let prob = bimodal_problem();
        let spec = prob.prior().spec().clone();
        let h = spec.spacing(0);
        let xs = spec.axis_coords(0);
        let prior_pdf = |x: f64| {
            0.5 * ((-(x + 2.0).powi(2) / 1.0).exp() + (-(x - 2.0).powi(2) / 1.0).exp()) / (PI * 0.5f64 * 2.0).sqrt()
        };
        let lik = |x: f64| (-(x * x) / 2.0).exp() / (2.0 * PI).sqrt();
        let z: f64 = xs.iter().map(|&x| prior_pdf(x) * lik(x) * h).sum();
        let p0_mass: f64 = xs.iter().map(|&x| prior_pdf(x) * h).sum();
        let post = prob.posterior(&[vec![0.0]]).unwrap();
        for (i, &x) in xs.iter().enumerate().step_by(17) {
            let expect = prior_pdf(x) * lik(x) / z;
            let got = post.posterior.values()[i];
            assert!((got - expect).abs() <= 1e-10 * expect.max(1e-300) + 1e-300, "x={x}");
            let evidence = z / p0_mass;
            assert!((post.log_evidence - evidence.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn uninformative_data_changes_nothing() {
        let spec = GridSpec::cube(1, 32, 1.0).unwrap();
        let prior = GridDensity::new(spec, vec![1.0; 32]).unwrap().normalize().unwrap();
        let prob = GridBayesProblem::new(prior, Likelihood::Uninformative).unwrap();
        let post = prob.posterior(&[]).unwrap();
        assert!(post.information().iter().all(|i| i.abs() < 1e-15));
        let r = pointwise_identity_residual(&prob, &[], None).unwrap();
        assert!(r.max_residual < 1e-14);
        let e = entropy_conservation_audit_grid(&prob, 50, 1).unwrap();
        assert!(e.terms["mutual_information"].abs() < 1e-14);
        assert!(e.residual.abs() < 1e-12);
    }

    #[test]
    fn grid_entropy_audit_matches_conjugate_oracle() {
        let prob = gaussian_grid_problem();
        let r = entropy_conservation_audit_grid(&prob, 2000, 2024).unwrap();
        assert!(r.within(3.0, 0.0), "{r:?}");
        let exact = entropy_conservation_audit(&scalar_model(1.0, 1.0, 1)).unwrap();
        assert!((r.terms["H_posterior"] - exact.terms["H_posterior"]).abs() < 1e-6);
        let i_se = r.terms["mutual_information_se"];
        assert!((r.terms["mutual_information"] - exact.terms["mutual_information"]).abs() < 3.0 * i_se + 1e-6);
    }

    #[test]
    fn grid_fisher_audit_matches_conjugate_oracle() {
        let prob = gaussian_grid_problem();
        let r = fisher_conservation_audit_grid(&prob, 500, 7, 0.01).unwrap();
        assert!(r.within(3.0, 1e-9), "{r:?}");
        assert!((r.terms["K"] - 1.0).abs() < 1e-8);
        assert!((r.terms["J_posterior"] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn grid_audits_with_x_dependent_curvature() {
        let prior = discretize(
            &GaussianMixture::isotropic(1, 1.0),
            &GridSpec::cube(1, 512, 8.0).unwrap(),
        )
        .unwrap();
        let prob = GridBayesProblem::new(prior, Likelihood::cubic(0.3, 0.5, 1).unwrap()).unwrap();
        let e = entropy_conservation_audit_grid(&prob, 1000, 3).unwrap();
        assert!(e.within(3.0, 0.0), "{e:?}");
        let f = fisher_conservation_audit_grid(&prob, 1000, 4, 0.01).unwrap();
        assert!(f.within(3.0, 1e-9), "{f:?}");
        // K varies with the data here, unlike the Gaussian-noise case.
        assert!(f.terms["K_se"] > 1e-3);
    }

    #[test]
    fn standard_error_halves_when_datasets_quadruple() {
        let prob = bimodal_problem();
        let a = entropy_conservation_audit_grid(&prob, 250, 5).unwrap();
        let b = entropy_conservation_audit_grid(&prob, 1000, 5).unwrap();
        let ratio = b.mc_std_error / a.mc_std_error;
        assert!((0.25..=1.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn model_file_parsing() {
        let text = r#"{"kind": "conjugate_gaussian", "prior_mean": [0.0], "prior_covariance": [[1.0]],
                       "noise_covariance": [[1.0]], "n_obs": 1}"#;
        let f: ModelFile = serde_json::from_str(text).unwrap();
        assert!(matches!(
            f.build(std::path::Path::new(".")).unwrap(),
            Model::Conjugate { .. }
        ));
        let text = r#"{"kind": "grid", "prior": {"kind": "gaussian_mixture", "weights": [1.0],
                       "means": [[0.0]], "covariances": [[[1.0]]]},
                       "grid": {"points": [128], "extent": [8.0]},
                       "likelihood": {"gaussian_noise": {"covariance": [[1.0]]}}, "n_datasets": 10}"#;
        let f: ModelFile = serde_json::from_str(text).unwrap();
        assert!(matches!(
            f.build(std::path::Path::new(".")).unwrap(),
            Model::Grid { .. }
        ));
        let bad = r#"{"kind": "grid", "prior": {"kind": "gaussian_mixture", "weights": [1.0],
                       "means": [[0.0]], "covariances": [[[1.0]]]},
                       "likelihood": "uninformative", "n_datasets": 10}"#;
        let f: ModelFile = serde_json::from_str(bad).unwrap();
        assert!(f.build(std::path::Path::new(".")).is_err());
    }
}
