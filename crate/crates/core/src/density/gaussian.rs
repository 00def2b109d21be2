use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal with a symmetric positive-definite covariance.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    precision: DMatrix<f64>,
    log_det: f64,
}

impl PartialEq for GaussianComponent {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

impl GaussianComponent {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::InvalidMixture("empty mean vector".into()));
        }
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covariance.nrows(),
            });
        }
        check_spd(&covariance)?;
        let chol = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let precision = chol.inverse();
        Ok(Self {
            mean,
            covariance,
            chol,
            precision,
            log_det,
        })
    }

    pub fn from_vecs(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let n = mean.len();
        if covariance.len() != n || covariance.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: covariance.len(),
            });
        }
        let cov = DMatrix::from_fn(n, n, |i, j| covariance[i][j]);
        Self::new(DVector::from_vec(mean), cov)
    }

    /// Zero-mean isotropic Gaussian with variance `var` per axis.
    pub fn isotropic(dim: usize, var: f64) -> Result<Self> {
        Self::new(DVector::zeros(dim), DMatrix::from_diagonal_element(dim, dim, var))
    }

    pub fn diagonal(mean: Vec<f64>, variances: &[f64]) -> Result<Self> {
        let n = mean.len();
        Self::new(
            DVector::from_vec(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(&variances[..n])),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Natural log of the covariance determinant.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = DVector::from_fn(self.dim(), |i, _| x[i] - self.mean[i]);
        let z = self.chol.l().solve_lower_triangular(&d).expect("triangular solve");
        -0.5 * (self.dim() as f64 * LN_2PI + self.log_det + z.norm_squared())
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Gradient of `log p`, i.e. `-P (x - mu)`.
    pub fn grad_log_pdf(&self, x: &[f64]) -> DVector<f64> {
        let d = DVector::from_fn(self.dim(), |i, _| x[i] - self.mean[i]);
        -(&self.precision * d)
    }

    /// Closed-form differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        0.5 * (self.dim() as f64 * (LN_2PI + 1.0) + self.log_det)
    }

    /// Trace of the Fisher information matrix, `tr(Sigma^-1)`.
    pub fn fisher_trace(&self) -> f64 {
        self.precision.trace()
    }

    /// Pushforward under `x -> a x`.
    pub fn rescale(&self, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be positive, got {a}"
            )));
        }
        Self::new(&self.mean * a, &self.covariance * (a * a))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.mean + self.chol.l() * z).iter().copied().collect()
    }
}

/// Symmetry to 1e-12 and a successful Cholesky factorization.
pub(crate) fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::NotPositiveDefinite(format!("asymmetric entry ({i},{j})")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite("non-finite entry".into()));
    }
    let eig = m.clone().symmetric_eigenvalues();
    if eig.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("eigenvalues {:?}", eig.as_slice())));
    }
    Ok(())
}

/// Finite mixture of Gaussian components with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture("at least one component required".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMixture("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture(format!("weights sum to {total}, expected 1")));
        }
        let dim = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: c.dim(),
            });
        }
        Ok(Self { weights, components })
    }

    /// Builds from raw vectors; weights are renormalized if they sum to within 1e-9 of 1.
    pub fn from_parts(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if means.len() != covariances.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                got: covariances.len(),
            });
        }
        let components = means
            .into_iter()
            .zip(covariances)
            .map(|(m, c)| GaussianComponent::from_vecs(m, c))
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = weights.iter().sum();
        let weights = if (total - 1.0).abs() <= 1e-9 {
            weights.iter().map(|w| w / total).collect()
        } else {
            weights
        };
        Self::new(weights, components)
    }

    pub fn single(c: GaussianComponent) -> Self {
        Self {
            weights: vec![1.0],
            components: vec![c],
        }
    }

    /// Zero-mean isotropic Gaussian as a one-component mixture.
    pub fn isotropic(dim: usize, var: f64) -> Self {
        Self::single(GaussianComponent::isotropic(dim, var).expect("positive variance"))
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w.ln() + c.log_pdf(x))
            .collect();
        log_sum_exp(&logs)
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Posterior component responsibilities at `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| {
                if *w > 0.0 {
                    w.ln() + c.log_pdf(x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let lse = log_sum_exp(&logs);
        logs.iter().map(|l| (l - lse).exp()).collect()
    }

    pub fn grad_log_pdf(&self, x: &[f64]) -> DVector<f64> {
        let r = self.responsibilities(x);
        let mut g = DVector::zeros(self.dim());
        for (ri, c) in r.iter().zip(&self.components) {
            if *ri > 0.0 {
                g += c.grad_log_pdf(x) * *ri;
            }
        }
        g
    }

    /// Hessian of `log p`: `sum r_l (g_l g_l^T - P_l) - g g^T`.
    pub fn hessian_log_pdf(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let r = self.responsibilities(x);
        let mut h = DMatrix::zeros(n, n);
        let mut gbar = DVector::zeros(n);
        for (ri, c) in r.iter().zip(&self.components) {
            if *ri > 0.0 {
                let g = c.grad_log_pdf(x);
                h += (&g * g.transpose() - c.precision()) * *ri;
                gbar += g * *ri;
            }
        }
        h - &gbar * gbar.transpose()
    }

    /// Mixture mean and covariance.
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut mu = DVector::zeros(n);
        for (w, c) in self.weights.iter().zip(&self.components) {
            mu += c.mean() * *w;
        }
        let mut cov = DMatrix::zeros(n, n);
        for (w, c) in self.weights.iter().zip(&self.components) {
            let d = c.mean() - &mu;
            cov += (c.covariance() + &d * d.transpose()) * *w;
        }
        (mu, cov)
    }

    pub fn rescale(&self, a: f64) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.rescale(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights: self.weights.clone(),
            components,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = i;
                break;
            }
        }
        self.components[pick].sample(rng)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_covariances() {
        assert!(GaussianComponent::from_vecs(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(GaussianComponent::from_vecs(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(GaussianComponent::from_vecs(vec![0.0], vec![vec![0.0]]).is_err());
    }

    #[test]
    fn rejects_bad_weights() {
        let c = GaussianComponent::isotropic(1, 1.0).unwrap();
        assert!(GaussianMixture::new(vec![0.6, 0.6], vec![c.clone(), c.clone()]).is_err());
        assert!(GaussianMixture::new(vec![], vec![]).is_err());
        let c2 = GaussianComponent::isotropic(2, 1.0).unwrap();
        assert!(GaussianMixture::new(vec![0.5, 0.5], vec![c, c2]).is_err());
    }

    #[test]
    fn closed_forms() {
        let c = GaussianComponent::isotropic(1, 1.0).unwrap();
        assert!((c.entropy() - 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((c.pdf(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
        let d = GaussianComponent::diagonal(vec![0.0, 0.0], &[1.0, 4.0]).unwrap();
        assert!((d.fisher_trace() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn rescale_gaussian() {
        let c = GaussianComponent::isotropic(1, 1.0).unwrap().rescale(2.0).unwrap();
        assert!((c.covariance()[(0, 0)] - 4.0).abs() < 1e-15);
        let m = GaussianMixture::from_parts(
            vec![0.5, 0.5],
            vec![vec![-1.0], vec![1.0]],
            vec![vec![vec![1.0]], vec![vec![1.0]]],
        )
        .unwrap()
        .rescale(3.0)
        .unwrap();
        assert_eq!(m.components()[0].mean()[0], -3.0);
        assert_eq!(m.components()[1].mean()[0], 3.0);
        assert!((m.components()[1].covariance()[(0, 0)] - 9.0).abs() < 1e-15);
        let same = GaussianMixture::isotropic(2, 1.5).rescale(1.0).unwrap();
        assert_eq!(same, GaussianMixture::isotropic(2, 1.5));
    }

    #[test]
    fn mixture_derivatives_match_finite_differences() {
        let m = GaussianMixture::from_parts(
            vec![0.4, 0.6],
            vec![vec![-1.0, 0.2], vec![1.5, -0.3]],
            vec![
                vec![vec![0.8, 0.2], vec![0.2, 0.5]],
                vec![vec![1.1, -0.3], vec![-0.3, 0.9]],
            ],
        )
        .unwrap();
        let x = [0.3, 0.1];
        let h = 1e-5;
        let g = m.grad_log_pdf(&x);
        let hess = m.hessian_log_pdf(&x);
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (m.log_pdf(&xp) - m.log_pdf(&xm)) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-7);
            let gp = m.grad_log_pdf(&xp);
            let gm = m.grad_log_pdf(&xm);
            for b in 0..2 {
                let fd2 = (gp[b] - gm[b]) / (2.0 * h);
                assert!((fd2 - hess[(a, b)]).abs() < 1e-6);
            }
        }
    }
}
