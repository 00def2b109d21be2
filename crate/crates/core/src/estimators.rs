//! Entropy, Fisher trace and the information potential.
//!
//! Gaussians use closed forms. One-dimensional mixtures are integrated by
//! adaptive Gauss–Kronrod quadrature; higher-dimensional mixtures by seeded
//! Monte Carlo with a reported standard error. Grids use Riemann sums of the
//! floored surprisal and central differences, and always compute the Fisher
//! trace twice (gradient form and Laplacian form) as a resolution check.

use std::f64::consts::{E, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::io::Density;
use crate::density::{surprisal_field, GaussianComponent, GaussianMixture, GridDensity};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng;
use crate::stencil;

/// Monte Carlo, quadrature and cross-check settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorBudget {
    pub mc_samples: usize,
    pub mc_seed: u64,
    pub quad_rel_tol: f64,
    pub fisher_crosscheck_tol: f64,
    /// Largest acceptable Monte Carlo standard error, if any.
    pub mc_target_std_error: Option<f64>,
    pub quad_max_panels: usize,
}

impl Default for EstimatorBudget {
    fn default() -> Self {
        Self {
            mc_samples: 1_000_000,
            mc_seed: 0,
            quad_rel_tol: 1e-8,
            fisher_crosscheck_tol: 0.01,
            mc_target_std_error: None,
            quad_max_panels: 20_000,
        }
    }
}

/// A scalar estimate with its standard (MC) or error-bound (quadrature) uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }
}

/// Both grid forms of the Fisher trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridFisher {
    /// `<|∇S|^2>`
    pub gradient_form: f64,
    /// `<ΔS>`
    pub laplacian_form: f64,
}

impl GridFisher {
    pub fn relative_gap(&self) -> f64 {
        let scale = self.gradient_form.abs().max(self.laplacian_form.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.gradient_form - self.laplacian_form).abs() / scale
        }
    }
}

/// Densities for which H and J can be estimated.
pub trait Estimable {
    fn dim(&self) -> usize;
    fn entropy_estimate(&self, budget: &EstimatorBudget) -> Result<Estimate>;
    fn fisher_estimate(&self, budget: &EstimatorBudget) -> Result<Estimate>;

    /// Both estimates at once; Monte Carlo implementations share the sample.
    fn entropy_and_fisher(&self, budget: &EstimatorBudget) -> Result<(Estimate, Estimate)> {
        Ok((self.entropy_estimate(budget)?, self.fisher_estimate(budget)?))
    }
}

impl Estimable for GaussianComponent {
    fn dim(&self) -> usize {
        GaussianComponent::dim(self)
    }

    fn entropy_estimate(&self, _: &EstimatorBudget) -> Result<Estimate> {
        Ok(Estimate::exact(self.entropy()))
    }

    fn fisher_estimate(&self, _: &EstimatorBudget) -> Result<Estimate> {
        Ok(Estimate::exact(self.fisher_trace()))
    }
}

impl Estimable for GaussianMixture {
    fn dim(&self) -> usize {
        GaussianMixture::dim(self)
    }

    fn entropy_estimate(&self, budget: &EstimatorBudget) -> Result<Estimate> {
        Ok(self.entropy_and_fisher(budget)?.0)
    }

    fn fisher_estimate(&self, budget: &EstimatorBudget) -> Result<Estimate> {
        Ok(self.entropy_and_fisher(budget)?.1)
    }

    fn entropy_and_fisher(&self, budget: &EstimatorBudget) -> Result<(Estimate, Estimate)> {
        if self.len() == 1 {
            let c = &self.components()[0];
            return Ok((Estimate::exact(c.entropy()), Estimate::exact(c.fisher_trace())));
        }
        if self.dim() == 1 {
            Ok((
                mixture_quadrature(self, budget, MixtureIntegrand::Entropy)?,
                mixture_quadrature(self, budget, MixtureIntegrand::Fisher)?,
            ))
        } else {
            mixture_monte_carlo(self, budget)
        }
    }
}

impl Estimable for GridDensity {
    fn dim(&self) -> usize {
        self.dims()
    }

    fn entropy_estimate(&self, _: &EstimatorBudget) -> Result<Estimate> {
        Ok(Estimate::exact(grid_entropy(self)))
    }

    fn fisher_estimate(&self, budget: &EstimatorBudget) -> Result<Estimate> {
        let f = grid_fisher(self, budget.fisher_crosscheck_tol)?;
        Ok(Estimate::exact(f.gradient_form))
    }
}

impl Estimable for Density {
    fn dim(&self) -> usize {
        Density::dim(self)
    }

    fn entropy_estimate(&self, budget: &EstimatorBudget) -> Result<Estimate> {
        match self {
            Density::Mixture(m) => m.entropy_estimate(budget),
            Density::Grid(g) => g.entropy_estimate(budget),
        }
    }

    fn fisher_estimate(&self, budget: &EstimatorBudget) -> Result<Estimate> {
        match self {
            Density::Mixture(m) => m.fisher_estimate(budget),
            Density::Grid(g) => g.fisher_estimate(budget),
        }
    }

    fn entropy_and_fisher(&self, budget: &EstimatorBudget) -> Result<(Estimate, Estimate)> {
        match self {
            Density::Mixture(m) => m.entropy_and_fisher(budget),
            Density::Grid(g) => g.entropy_and_fisher(budget),
        }
    }
}

/// Differential entropy in nats.
pub fn entropy<D: Estimable + ?Sized>(d: &D, budget: &EstimatorBudget) -> Result<Estimate> {
    d.entropy_estimate(budget)
}

/// Trace of the Fisher information matrix.
pub fn fisher_trace<D: Estimable + ?Sized>(d: &D, budget: &EstimatorBudget) -> Result<Estimate> {
    d.fisher_estimate(budget)
}

/// `-sum p log p dV` with the floored logarithm.
pub fn grid_entropy(d: &GridDensity) -> f64 {
    d.expect(&surprisal_field(d).field.values)
}

/// Gradient and Laplacian forms of the grid Fisher trace, cross-checked at `tol`.
pub fn grid_fisher(d: &GridDensity, tol: f64) -> Result<GridFisher> {
    let f = grid_fisher_unchecked(d);
    let rel = f.relative_gap();
    if rel > tol {
        return Err(Error::CrossCheckFailed {
            what: "grid Fisher gradient vs Laplacian form".into(),
            a: f.gradient_form,
            b: f.laplacian_form,
            rel,
            tol,
        });
    }
    Ok(f)
}

pub fn grid_fisher_unchecked(d: &GridDensity) -> GridFisher {
    let s = surprisal_field(d).field.values;
    GridFisher {
        gradient_form: d.expect(&stencil::gradient_sq(&s, d.spec())),
        laplacian_form: d.expect(&stencil::laplacian(&s, d.spec())),
    }
}

#[derive(Debug, Clone, Copy)]
enum MixtureIntegrand {
    Entropy,
    Fisher,
    HessianSq,
}

fn mixture_breakpoints(m: &GaussianMixture) -> Vec<f64> {
    let mut pts: Vec<f64> = m
        .components()
        .iter()
        .flat_map(|c| {
            let mu = c.mean()[0];
            let sd = c.covariance()[(0, 0)].sqrt();
            [-14.0, -8.0, -3.0, 0.0, 3.0, 8.0, 14.0].map(|k| mu + k * sd)
        })
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn mixture_quadrature(m: &GaussianMixture, budget: &EstimatorBudget, which: MixtureIntegrand) -> Result<Estimate> {
    let f = |x: f64| {
        let lp = m.log_pdf(&[x]);
        if !lp.is_finite() {
            return 0.0;
        }
        let p = lp.exp();
        match which {
            MixtureIntegrand::Entropy => -p * lp,
            MixtureIntegrand::Fisher => {
                let g = m.grad_log_pdf(&[x])[0];
                p * g * g
            }
            MixtureIntegrand::HessianSq => {
                let h = m.hessian_log_pdf(&[x])[(0, 0)];
                p * h * h
            }
        }
    };
    let q = quadrature::integrate(f, &mixture_breakpoints(m), budget.quad_rel_tol, budget.quad_max_panels)?;
    Ok(Estimate {
        value: q.value,
        std_error: q.error,
    })
}

/// `<(d^2 S/dx^2)^2>` for a one-dimensional mixture by quadrature.
pub fn mixture_hessian_moment_1d(m: &GaussianMixture, budget: &EstimatorBudget) -> Result<Estimate> {
    if m.dim() != 1 {
        return Err(Error::InvalidArgument(
            "quadrature Hessian moment is one-dimensional".into(),
        ));
    }
    mixture_quadrature(m, budget, MixtureIntegrand::HessianSq)
}

const MC_CHUNK: usize = 1 << 15;

fn mixture_monte_carlo(m: &GaussianMixture, budget: &EstimatorBudget) -> Result<(Estimate, Estimate)> {
    let n = budget.mc_samples;
    if n < 2 {
        return Err(Error::BudgetExceeded("need at least two Monte Carlo samples".into()));
    }
    let chunks = n.div_ceil(MC_CHUNK);
    // Per-chunk sums of (s, s^2, g, g^2); combined in chunk order.
    let partial: Vec<[f64; 4]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(budget.mc_seed, c as u64);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut acc = [0.0; 4];
            for _ in 0..len {
                let x = m.sample(&mut r);
                let s = -m.log_pdf(&x);
                let g = m.grad_log_pdf(&x).norm_squared();
                acc[0] += s;
                acc[1] += s * s;
                acc[2] += g;
                acc[3] += g * g;
            }
            acc
        })
        .collect();
    let mut tot = [0.0; 4];
    for p in &partial {
        for k in 0..4 {
            tot[k] += p[k];
        }
    }
    let nf = n as f64;
    let stat = |sum: f64, sq: f64| {
        let mean = sum / nf;
        let var = ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        Estimate {
            value: mean,
            std_error: (var / nf).sqrt(),
        }
    };
    let h = stat(tot[0], tot[1]);
    let j = stat(tot[2], tot[3]);
    if let Some(target) = budget.mc_target_std_error {
        let worst = h.std_error.max(j.std_error);
        if worst > target {
            return Err(Error::BudgetExceeded(format!(
                "Monte Carlo standard error {worst:.3e} above target {target:.3e} with {n} samples"
            )));
        }
    }
    Ok((h, j))
}

/// `H + (N/2) log(J / (2 pi e N))`.
pub fn info_potential(h: f64, j: f64, n: usize) -> Result<f64> {
    if !(j > 0.0) {
        return Err(Error::NonPositiveFisher(j));
    }
    let nf = n as f64;
    Ok(h + 0.5 * nf * (j / (2.0 * PI * E * nf)).ln())
}

/// Entropy power `exp(2H/N) / (2 pi e)`.
pub fn entropy_power(h: f64, n: usize) -> f64 {
    (2.0 * h / n as f64).exp() / (2.0 * PI * E)
}

/// Conjugate resolution scale `dPhi/dJ = N / (2J)`.
pub fn resolution_scale(j: f64, n: usize) -> Result<f64> {
    if !(j > 0.0) {
        return Err(Error::NonPositiveFisher(j));
    }
    Ok(n as f64 / (2.0 * j))
}

/// `N dPhi/dH - 2J dPhi/dJ` for an arbitrary potential, by central differences.
pub fn gauge_pde_residual_with(phi: impl Fn(f64, f64) -> f64, h: f64, j: f64, n: usize, step: f64) -> f64 {
    let d_h = (phi(h + step, j) - phi(h - step, j)) / (2.0 * step);
    let d_j = (phi(h, j + step) - phi(h, j - step)) / (2.0 * step);
    n as f64 * d_h - 2.0 * j * d_j
}

/// Residual of the scale-invariance PDE for the information potential.
pub fn gauge_pde_residual(h: f64, j: f64, n: usize, step: f64) -> Result<f64> {
    if !(j > 0.0) || !(j - step > 0.0) {
        return Err(Error::NonPositiveFisher(j - step));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    Ok(gauge_pde_residual_with(
        |h, j| info_potential(h, j, n).expect("positive J"),
        h,
        j,
        n,
        step,
    ))
}

/// Two-coordinate state of a density plus derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoState {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "Phi")]
    pub phi: f64,
    pub entropy_power: f64,
    pub resolution_scale: f64,
    pub dim: usize,
    pub h_std_error: f64,
    pub j_std_error: f64,
}

pub const STAM_SLACK: f64 = 1e-6;

impl InfoState {
    /// Builds the state from H and J and checks positivity, Stam and `Phi >= 0`.
    pub fn from_estimates(h: Estimate, j: Estimate, dim: usize) -> Result<Self> {
        let phi = info_potential(h.value, j.value, dim)?;
        let state = Self {
            h: h.value,
            j: j.value,
            phi,
            entropy_power: entropy_power(h.value, dim),
            resolution_scale: resolution_scale(j.value, dim)?,
            dim,
            h_std_error: h.std_error,
            j_std_error: j.std_error,
        };
        state.check()?;
        Ok(state)
    }

    /// Propagated standard error of Phi (H and J treated as independent).
    pub fn phi_std_error(&self) -> f64 {
        let dj = 0.5 * self.dim as f64 * self.j_std_error / self.j;
        (self.h_std_error * self.h_std_error + dj * dj).sqrt()
    }

    pub fn check(&self) -> Result<()> {
        if !(self.j > 0.0) {
            return Err(Error::NonPositiveFisher(self.j));
        }
        if !(self.entropy_power > 0.0) {
            return Err(Error::InvariantViolated(format!(
                "entropy power {} not positive",
                self.entropy_power
            )));
        }
        // Monte Carlo noise in Phi widens both checks; VJ/N = exp(2 Phi / N).
        let mc = 3.0 * self.phi_std_error();
        let n = self.dim as f64;
        if self.entropy_power * self.j < n - STAM_SLACK - 2.0 * mc * n {
            return Err(Error::InvariantViolated(format!(
                "Stam inequality: V J = {} < N = {n}",
                self.entropy_power * self.j
            )));
        }
        if self.phi < -(STAM_SLACK + mc) {
            return Err(Error::InvariantViolated(format!(
                "information potential {} is negative",
                self.phi
            )));
        }
        Ok(())
    }
}

/// H, J, Phi, entropy power and resolution scale of a density.
pub fn info_state<D: Estimable + ?Sized>(d: &D, budget: &EstimatorBudget) -> Result<InfoState> {
    let (h, j) = d.entropy_and_fisher(budget)?;
    InfoState::from_estimates(h, j, d.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{discretize, GridSpec};

    const HALF_LOG_2PIE: f64 = 1.418_938_533_204_672_7;

    fn budget() -> EstimatorBudget {
        EstimatorBudget::default()
    }

    fn separated_pair(sep: f64) -> GaussianMixture {
        GaussianMixture::from_parts(
            vec![0.5, 0.5],
            vec![vec![-sep], vec![sep]],
            vec![vec![vec![1.0]], vec![vec![1.0]]],
        )
        .unwrap()
    }

    /// Plain trapezoid sums over a wide fine grid; independent of the adaptive path.
    fn trapezoid_oracle(m: &GaussianMixture, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        let h = (hi - lo) / n as f64;
        let (mut ent, mut fis) = (0.0, 0.0);
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let p: f64 = m
                .weights()
                .iter()
                .zip(m.components())
                .map(|(wt, c)| {
                    let mu = c.mean()[0];
                    let v = c.covariance()[(0, 0)];
                    wt * (-(x - mu).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
                })
                .sum();
            let dp: f64 = m
                .weights()
                .iter()
                .zip(m.components())
                .map(|(wt, c)| {
                    let mu = c.mean()[0];
                    let v = c.covariance()[(0, 0)];
                    -wt * (x - mu) / v * (-(x - mu).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
                })
                .sum();
            if p > 0.0 {
                ent += -w * p * p.ln() * h;
                fis += w * dp * dp / p * h;
            }
        }
        (ent, fis)
    }

    #[test]
    fn gaussian_closed_forms() {
        let c = GaussianComponent::isotropic(1, 1.0).unwrap();
        assert!((entropy(&c, &budget()).unwrap().value - HALF_LOG_2PIE).abs() < 1e-12);
        let c4 = GaussianComponent::isotropic(1, 4.0).unwrap();
        assert!((fisher_trace(&c4, &budget()).unwrap().value - 0.25).abs() < 1e-15);
        let d = GaussianComponent::diagonal(vec![0.0, 0.0], &[1.0, 4.0]).unwrap();
        assert!((fisher_trace(&d, &budget()).unwrap().value - 1.25).abs() < 1e-15);
    }

    #[test]
    fn uniform_grid_entropy() {
        let spec = GridSpec::cube(1, 64, 1.0).unwrap();
        let d = GridDensity::new(spec, vec![1.0; 64]).unwrap().normalize().unwrap();
        assert!((entropy(&d, &budget()).unwrap().value - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn separated_mixture_against_trapezoid_oracle() {
        let m = separated_pair(10.0);
        let (h_oracle, j_oracle) = trapezoid_oracle(&m, -30.0, 30.0, 600_000);
        // Frozen from the oracle: H = 1/2 log(2 pi e) + log 2, J = 1.
        assert!((h_oracle - 2.112_085_713_764_618).abs() < 1e-8);
        assert!((j_oracle - 1.0).abs() < 1e-8);
        let h = entropy(&m, &budget()).unwrap().value;
        let j = fisher_trace(&m, &budget()).unwrap().value;
        assert!((h - h_oracle).abs() < 1e-7, "{h} vs {h_oracle}");
        assert!((j - j_oracle).abs() < 1e-7);
        let phi = info_potential(h, j, 1).unwrap();
        assert!((phi - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn overlapping_mixture_against_trapezoid_oracle() {
        let m = GaussianMixture::from_parts(
            vec![0.3, 0.7],
            vec![vec![-0.5], vec![1.0]],
            vec![vec![vec![0.5]], vec![vec![2.0]]],
        )
        .unwrap();
        let (h_oracle, j_oracle) = trapezoid_oracle(&m, -20.0, 20.0, 400_000);
        let s = info_state(&m, &budget()).unwrap();
        assert!((s.h - h_oracle).abs() < 1e-7);
        assert!((s.j - j_oracle).abs() < 1e-7);
        assert!(s.phi > 0.0);
    }

    #[test]
    fn potential_examples() {
        assert!(info_potential(HALF_LOG_2PIE, 1.0, 1).unwrap().abs() < 1e-15);
        let h = (2.0 * PI * E).ln() + 2f64.ln();
        assert!((info_potential(h, 1.25, 2).unwrap() - 1.25f64.ln()).abs() < 1e-12);
        assert!(matches!(info_potential(1.0, 0.0, 1), Err(Error::NonPositiveFisher(_))));
        assert!(matches!(info_potential(1.0, -1.0, 1), Err(Error::NonPositiveFisher(_))));
    }

    #[test]
    fn entropy_power_examples() {
        assert!((entropy_power(HALF_LOG_2PIE, 1) - 1.0).abs() < 1e-14);
        assert!((entropy_power(0.5 * (2.0 * PI * E * 4.0).ln(), 1) - 4.0).abs() < 1e-13);
        assert!((entropy_power((2.0 * PI * E).ln() + 2f64.ln(), 2) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn resolution_scale_examples() {
        assert_eq!(resolution_scale(1.0, 1).unwrap(), 0.5);
        assert!((resolution_scale(1.25, 2).unwrap() - 0.8).abs() < 1e-15);
        let h = 2.0;
        let step = 1e-6;
        let fd =
            (info_potential(h, 1.25 + step, 2).unwrap() - info_potential(h, 1.25 - step, 2).unwrap()) / (2.0 * step);
        assert!((fd - 0.8).abs() < 1e-6);
        assert!(resolution_scale(0.0, 1).is_err());
    }

    #[test]
    fn gauge_pde() {
        assert!(gauge_pde_residual(1.4189, 1.0, 1, 1e-6).unwrap().abs() < 1e-6);
        assert!(gauge_pde_residual(3.0, 0.1, 2, 1e-6).unwrap().abs() < 1e-6);
        // Negative control: Phi + 0.1 J gives -0.2 J analytically.
        let j = 0.7;
        let r = gauge_pde_residual_with(|h, j| info_potential(h, j, 2).unwrap() + 0.1 * j, 1.0, j, 2, 1e-6);
        assert!((r + 0.2 * j).abs() < 1e-6);
    }

    #[test]
    fn reference_and_rescaled_states() {
        let c = GaussianComponent::isotropic(1, 1.0).unwrap();
        let s = info_state(&c, &budget()).unwrap();
        assert!((s.h - HALF_LOG_2PIE).abs() < 1e-12);
        assert_eq!(s.j, 1.0);
        assert!(s.phi.abs() < 1e-12);
        assert!((s.entropy_power - 1.0).abs() < 1e-12);
        assert_eq!(s.resolution_scale, 0.5);
        let r = info_state(&c.rescale(3.0).unwrap(), &budget()).unwrap();
        assert!((r.h - HALF_LOG_2PIE - 3f64.ln()).abs() < 1e-12);
        assert!((r.j - 1.0 / 9.0).abs() < 1e-15);
        assert!(r.phi.abs() < 1e-12);
        assert!((r.entropy_power - 9.0).abs() < 1e-11);
    }

    #[test]
    fn grid_gaussian_matches_closed_form() {
        let d = discretize(
            &GaussianMixture::isotropic(1, 1.0),
            &GridSpec::cube(1, 256, 8.0).unwrap(),
        )
        .unwrap();
        let f = grid_fisher(&d, 0.01).unwrap();
        assert!((f.gradient_form - 1.0).abs() < 1e-6);
        assert!((f.laplacian_form - 1.0).abs() < 1e-9);
        let s = info_state(&d, &budget()).unwrap();
        assert!(s.phi.abs() < 1e-6);
    }

    #[test]
    fn under_resolved_grid_fails_cross_check() {
        // Narrow components on a coarse grid.
        let m = GaussianMixture::from_parts(
            vec![0.5, 0.5],
            vec![vec![-1.0], vec![1.0]],
            vec![vec![vec![0.04]], vec![vec![0.04]]],
        )
        .unwrap();
        let d = discretize(&m, &GridSpec::cube(1, 16, 3.0).unwrap()).unwrap();
        assert!(matches!(grid_fisher(&d, 0.01), Err(Error::CrossCheckFailed { .. })));
    }

    #[test]
    fn monte_carlo_is_seeded_and_reports_error() {
        let m = GaussianMixture::from_parts(
            vec![0.5, 0.5],
            vec![vec![-4.0, 0.0], vec![4.0, 0.0]],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]; 2],
        )
        .unwrap();
        let b = EstimatorBudget {
            mc_samples: 200_000,
            mc_seed: 11,
            ..Default::default()
        };
        let (h1, j1) = m.entropy_and_fisher(&b).unwrap();
        let (h2, _) = m.entropy_and_fisher(&b).unwrap();
        assert_eq!(h1, h2);
        // Well separated: H ~ log(2 pi e) + log 2, J ~ 2.
        let h_ref = (2.0 * PI * E).ln() + 2f64.ln();
        assert!((h1.value - h_ref).abs() < 5.0 * h1.std_error + 1e-3);
        assert!((j1.value - 2.0).abs() < 5.0 * j1.std_error + 1e-3);
        let tight = EstimatorBudget {
            mc_samples: 1000,
            mc_target_std_error: Some(1e-6),
            ..b
        };
        assert!(matches!(m.entropy_and_fisher(&tight), Err(Error::BudgetExceeded(_))));
    }
}
