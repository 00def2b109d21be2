//! Boltzmann densities `p ∝ exp(-βE)` over energy landscapes, their
//! low-temperature Gaussian-mixture approximation and the count of resolved
//! local minima.
//!
//! Each minimum `x_l` with Hessian `Λ_l` becomes a component
//! `N(x_l, δI + Λ_l^-1 / β)` with weight `∝ exp(-βE_l) |Σ_l|^(1/2)`. Components
//! whose weight ratio to the heaviest one falls below `ε` are dropped; the
//! remaining `N_LM` components give `Φ ≈ H(w) + (N/2)(log λ̄ - mean log λ)`,
//! which tends to `log N_LM` for equal wells.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{interpolate_values, io::read_values, GaussianComponent, GaussianMixture, GridSpec};
use crate::error::{Error, Result};
use crate::estimators::{info_state, EstimatorBudget};

/// Plateau tie tolerance in the minima search.
pub const PLATEAU_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a minimum's Hessian.
pub const HESSIAN_EIG_TOL: f64 = 1e-6;
/// Default finite-difference step for Hessians.
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-4;
/// Pairwise Mahalanobis distance below which modes count as overlapping.
pub const SEPARATION_THRESHOLD: f64 = 6.0;

/// `coefficient * prod x_a^powers[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

/// `amplitude * cos(frequency . x + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineTerm {
    pub amplitude: f64,
    pub frequency: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnergyFamily {
    Polynomial(Vec<Monomial>),
    CosineSum(Vec<CosineTerm>),
    /// Values on a grid, interpolated with cubic convolution between nodes.
    Grid {
        spec: GridSpec,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLandscape {
    dim: usize,
    family: EnergyFamily,
    beta: f64,
}

impl EnergyLandscape {
    pub fn new(dim: usize, family: EnergyFamily, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        let mismatch = |got: usize| Error::DimensionMismatch { expected: dim, got };
        match &family {
            EnergyFamily::Polynomial(terms) => {
                if let Some(t) = terms.iter().find(|t| t.powers.len() != dim) {
                    return Err(mismatch(t.powers.len()));
                }
            }
            EnergyFamily::CosineSum(terms) => {
                if let Some(t) = terms.iter().find(|t| t.frequency.len() != dim) {
                    return Err(mismatch(t.frequency.len()));
                }
            }
            EnergyFamily::Grid { spec, values } => {
                if spec.dims() != dim {
                    return Err(mismatch(spec.dims()));
                }
                if values.len() != spec.len() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidGrid(
                        "energy table must be finite and match the grid".into(),
                    ));
                }
            }
        }
        Ok(Self { dim, family, beta })
    }

    /// `sum_a cos(2 pi x_a)`: unit-spaced wells at half-integer coordinates.
    pub fn cosine_wells(dim: usize, beta: f64) -> Result<Self> {
        let terms = (0..dim)
            .map(|a| CosineTerm {
                amplitude: 1.0,
                frequency: (0..dim).map(|b| if a == b { 2.0 * PI } else { 0.0 }).collect(),
                phase: 0.0,
            })
            .collect();
        Self::new(dim, EnergyFamily::CosineSum(terms), beta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.dim, self.family.clone(), beta)
    }

    pub fn family(&self) -> &EnergyFamily {
        &self.family
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        match &self.family {
            EnergyFamily::Polynomial(terms) => terms
                .iter()
                .map(|t| {
                    t.coefficient
                        * x.iter()
                            .zip(&t.powers)
                            .map(|(xa, p)| xa.powi(*p as i32))
                            .product::<f64>()
                })
                .sum(),
            EnergyFamily::CosineSum(terms) => terms
                .iter()
                .map(|t| t.amplitude * (dot(&t.frequency, x) + t.phase).cos())
                .sum(),
            EnergyFamily::Grid { spec, values } => interpolate_values(spec, values, x),
        }
    }

    /// Closed-form Hessian for the polynomial and cosine families.
    pub fn analytic_hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.dim;
        match &self.family {
            EnergyFamily::Polynomial(terms) => Some(DMatrix::from_fn(n, n, |a, b| {
                terms
                    .iter()
                    .map(|t| {
                        let mut p = t.powers.clone();
                        let mut c = t.coefficient;
                        for axis in [a, b] {
                            c *= p[axis] as f64;
                            p[axis] = p[axis].saturating_sub(1);
                        }
                        if c == 0.0 {
                            return 0.0;
                        }
                        c * x.iter().zip(&p).map(|(xa, q)| xa.powi(*q as i32)).product::<f64>()
                    })
                    .sum()
            })),
            EnergyFamily::CosineSum(terms) => Some(DMatrix::from_fn(n, n, |a, b| {
                terms
                    .iter()
                    .map(|t| -t.amplitude * t.frequency[a] * t.frequency[b] * (dot(&t.frequency, x) + t.phase).cos())
                    .sum()
            })),
            EnergyFamily::Grid { .. } => None,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central-difference gradient.
pub fn gradient_at(e: &EnergyLandscape, x: &[f64], step: f64) -> DVector<f64> {
    DVector::from_fn(e.dim(), |a, _| {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[a] += step;
        m[a] -= step;
        (e.energy(&p) - e.energy(&m)) / (2.0 * step)
    })
}

fn fd_hessian(e: &EnergyLandscape, x: &[f64], step: f64) -> DMatrix<f64> {
    let n = e.dim();
    let shifted = |da: (usize, f64), db: Option<(usize, f64)>| {
        let mut y = x.to_vec();
        y[da.0] += da.1;
        if let Some((b, s)) = db {
            y[b] += s;
        }
        e.energy(&y)
    };
    let e0 = e.energy(x);
    let mut h = DMatrix::zeros(n, n);
    for a in 0..n {
        h[(a, a)] = (shifted((a, step), None) - 2.0 * e0 + shifted((a, -step), None)) / (step * step);
        for b in (a + 1)..n {
            let v = (shifted((a, step), Some((b, step)))
                - shifted((a, step), Some((b, -step)))
                - shifted((a, -step), Some((b, step)))
                + shifted((a, -step), Some((b, -step))))
                / (4.0 * step * step);
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}

/// Central-difference Hessian, required to be positive definite.
pub fn hessian_at(e: &EnergyLandscape, x: &[f64], step: f64) -> Result<DMatrix<f64>> {
    if x.len() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: x.len(),
        });
    }
    let h = fd_hessian(e, x, step);
    let min_eig = SymmetricEigen::new(h.clone()).eigenvalues.min();
    if !(min_eig > HESSIAN_EIG_TOL) {
        return Err(Error::NotPositiveDefinite(format!(
            "energy Hessian at {x:?} has smallest eigenvalue {min_eig:.3e}"
        )));
    }
    Ok(h)
}

/// Grid minimum found by the search, refined by one Newton step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimum {
    pub location: Vec<f64>,
    pub energy: f64,
    /// Grid node the search found.
    pub grid_index: usize,
}

/// Connected set of tied grid points reported as one minimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauWarning {
    pub representative: usize,
    pub points: Vec<usize>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimaSearch {
    pub minima: Vec<Minimum>,
    pub plateau_warnings: Vec<PlateauWarning>,
}

/// Index offsets of the `3^N - 1` axis and diagonal neighbours.
fn neighbour_offsets(dims: usize) -> Vec<Vec<i64>> {
    (0..3usize.pow(dims as u32))
        .map(|c| {
            let mut c = c;
            (0..dims)
                .map(|_| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    o
                })
                .collect::<Vec<i64>>()
        })
        .filter(|o| o.iter().any(|v| *v != 0))
        .collect()
}

/// Exhaustive search for strict local minima over the interior of `spec` (`N <= 2`).
///
/// The box edges are not periodic for this search and edge nodes are never
/// minima. Groups of tied nodes whose outside neighbours are all higher are
/// collapsed to their lexicographically smallest node and reported.
pub fn find_local_minima_bruteforce(e: &EnergyLandscape, spec: &GridSpec) -> Result<MinimaSearch> {
    let n = spec.dims();
    if n != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: n,
        });
    }
    if n > 2 {
        return Err(Error::InvalidArgument(
            "brute-force minima search supports N <= 2".into(),
        ));
    }
    let values: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|i| e.energy(&spec.point(i)))
        .collect();
    let offsets = neighbour_offsets(n);
    let neighbours = |i: usize| -> Vec<usize> {
        let idx = spec.unravel(i);
        offsets
            .iter()
            .filter_map(|o| {
                let j: Option<Vec<usize>> = idx
                    .iter()
                    .zip(o)
                    .zip(spec.points())
                    .map(|((&a, &d), &np)| {
                        let v = a as i64 + d;
                        (v >= 0 && v < np as i64).then_some(v as usize)
                    })
                    .collect();
                j.map(|j| spec.ravel(&j))
            })
            .collect()
    };
    // No neighbour lower beyond the tie tolerance.
    let weak: Vec<bool> = (0..spec.len())
        .map(|i| !spec.on_boundary(i) && neighbours(i).iter().all(|&j| values[j] > values[i] - PLATEAU_TOL))
        .collect();
    let mut seen = vec![false; spec.len()];
    let step: Vec<f64> = (0..n).map(|a| spec.spacing(a)).collect();
    let mut minima = Vec::new();
    let mut plateau_warnings = Vec::new();
    for start in 0..spec.len() {
        if !weak[start] || seen[start] {
            continue;
        }
        // Flood the tied component.
        let mut group = vec![start];
        let mut stack = vec![start];
        seen[start] = true;
        let mut valid = true;
        while let Some(i) = stack.pop() {
            for j in neighbours(i) {
                if (values[j] - values[i]).abs() <= PLATEAU_TOL {
                    if !weak[j] {
                        valid = false;
                    } else if !seen[j] {
                        seen[j] = true;
                        group.push(j);
                        stack.push(j);
                    }
                }
            }
        }
        if !valid {
            continue;
        }
        group.sort_unstable();
        let rep = group[0];
        if group.len() > 1 {
            plateau_warnings.push(PlateauWarning {
                representative: rep,
                points: group.clone(),
                energy: values[rep],
            });
            minima.push(Minimum {
                location: spec.point(rep),
                energy: values[rep],
                grid_index: rep,
            });
            continue;
        }
        minima.push(refine(e, spec.point(rep), values[rep], rep, &step));
    }
    Ok(MinimaSearch {
        minima,
        plateau_warnings,
    })
}

/// One Newton step with finite differences; kept only when it stays within a cell and lowers E.
fn refine(e: &EnergyLandscape, x: Vec<f64>, energy: f64, grid_index: usize, spacing: &[f64]) -> Minimum {
    let h = spacing.iter().cloned().fold(f64::INFINITY, f64::min) * 0.25;
    let g = gradient_at(e, &x, h);
    let hess = fd_hessian(e, &x, h);
    let keep = Minimum {
        location: x.clone(),
        energy,
        grid_index,
    };
    let Some(chol) = hess.cholesky() else {
        return keep;
    };
    let dx = chol.solve(&g);
    if dx.iter().zip(spacing).any(|(d, s)| d.abs() > *s) {
        return keep;
    }
    let y: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - d).collect();
    let ey = e.energy(&y);
    if ey <= energy {
        Minimum {
            location: y,
            energy: ey,
            grid_index,
        }
    } else {
        keep
    }
}

/// Minimum with its Hessian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mode {
    pub location: Vec<f64>,
    pub energy: f64,
    pub hessian: Vec<Vec<f64>>,
}

impl Mode {
    pub fn new(location: Vec<f64>, energy: f64, hessian: &DMatrix<f64>) -> Self {
        let n = hessian.nrows();
        Self {
            location,
            energy,
            hessian: (0..n).map(|a| (0..n).map(|b| hessian[(a, b)]).collect()).collect(),
        }
    }

    fn hessian_matrix(&self) -> DMatrix<f64> {
        let n = self.hessian.len();
        DMatrix::from_fn(n, n, |a, b| self.hessian[a][b])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub delta: f64,
    pub epsilon: f64,
}

/// Modes with their Boltzmann weights and the retained count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSet {
    pub modes: Vec<Mode>,
    pub weights: Vec<f64>,
    pub effective_count: usize,
    pub beta: f64,
    pub resolution: Resolution,
}

fn check_resolution(delta: f64, epsilon: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Components `N(x_l, δI + Λ_l^-1/β)` with weights `∝ exp(-β(E_l - E_min)) |Σ_l|^(1/2)`.
pub fn boltzmann_mixture(modes: &[Mode], beta: f64, delta: f64) -> Result<GaussianMixture> {
    if modes.is_empty() {
        return Err(Error::InvalidMixture("no modes".into()));
    }
    if !(beta > 0.0 && delta > 0.0) {
        return Err(Error::InvalidArgument("beta and delta must be positive".into()));
    }
    let n = modes[0].location.len();
    let e_min = modes.iter().map(|m| m.energy).fold(f64::INFINITY, f64::min);
    let components = modes
        .iter()
        .map(|m| {
            let lambda = m.hessian_matrix();
            let inv = lambda
                .clone()
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite(format!("Hessian at {:?}", m.location)))?
                .inverse();
            let cov = DMatrix::identity(n, n) * delta + inv / beta;
            GaussianComponent::new(DVector::from_column_slice(&m.location), (&cov + cov.transpose()) * 0.5)
        })
        .collect::<Result<Vec<_>>>()?;
    let log_w: Vec<f64> = modes
        .iter()
        .zip(&components)
        .map(|(m, c)| -beta * (m.energy - e_min) + 0.5 * c.log_det())
        .collect();
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    GaussianMixture::new(raw.iter().map(|w| w / total).collect(), components)
}

/// Number of weights with `w / max(w) >= epsilon`.
pub fn effective_mode_count(weights: &[f64], epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let max = weights.iter().cloned().fold(0.0, f64::max);
    Ok(weights.iter().filter(|w| **w / max >= epsilon).count())
}

impl ModeSet {
    pub fn new(modes: Vec<Mode>, beta: f64, delta: f64, epsilon: f64) -> Result<Self> {
        check_resolution(delta, epsilon)?;
        let mixture = boltzmann_mixture(&modes, beta, delta)?;
        let weights = mixture.weights().to_vec();
        Ok(Self {
            effective_count: effective_mode_count(&weights, epsilon)?,
            modes,
            weights,
            beta,
            resolution: Resolution { delta, epsilon },
        })
    }

    pub fn mixture(&self) -> Result<GaussianMixture> {
        boltzmann_mixture(&self.modes, self.beta, self.resolution.delta)
    }

    /// Mixture of the retained components with renormalized weights.
    pub fn retained_mixture(&self) -> Result<GaussianMixture> {
        let full = self.mixture()?;
        let max = full.weights().iter().cloned().fold(0.0, f64::max);
        let (w, c): (Vec<f64>, Vec<GaussianComponent>) = full
            .weights()
            .iter()
            .zip(full.components())
            .filter(|(w, _)| **w / max >= self.resolution.epsilon)
            .map(|(w, c)| (*w, c.clone()))
            .unzip();
        let total: f64 = w.iter().sum();
        GaussianMixture::new(w.iter().map(|x| x / total).collect(), c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationWarning {
    pub min_mahalanobis: f64,
    pub threshold: f64,
}

/// Terms of the mixture route to Φ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureAsymptotics {
    pub weight_entropy: f64,
    /// `tr(sum w_l Σ_l^-1) / N`.
    pub lambda_bar: f64,
    /// `sum w_l log|Σ_l^-1| / N`.
    pub mean_log_lambda: f64,
    pub curvature_correction: f64,
    pub phi_mixture: f64,
    /// Exact `mean log λ` minus its first-order expansion `-log δ - tr(Λ^-1)/(N δβ)`.
    pub series_residual: f64,
    pub min_mahalanobis: f64,
    pub separation_warning: Option<SeparationWarning>,
}

/// `H(w) + (N/2)(log λ̄ - mean log λ)` over the retained modes.
pub fn phi_mixture_asymptotic(modes: &ModeSet) -> Result<MixtureAsymptotics> {
    let mix = modes.retained_mixture()?;
    let n = mix.dim() as f64;
    let w = mix.weights();
    let weight_entropy = -w.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>();
    let lambda_bar = w
        .iter()
        .zip(mix.components())
        .map(|(wi, c)| wi * c.precision().trace())
        .sum::<f64>()
        / n;
    let mean_log_lambda = -w
        .iter()
        .zip(mix.components())
        .map(|(wi, c)| wi * c.log_det())
        .sum::<f64>()
        / n;
    let curvature_correction = 0.5 * n * (lambda_bar.ln() - mean_log_lambda);

    let max = modes.weights.iter().cloned().fold(0.0, f64::max);
    let retained: Vec<&Mode> = modes
        .modes
        .iter()
        .zip(&modes.weights)
        .filter(|(_, wi)| **wi / max >= modes.resolution.epsilon)
        .map(|(m, _)| m)
        .collect();
    let db = modes.resolution.delta * modes.beta;
    let first_order = w
        .iter()
        .zip(&retained)
        .map(|(wi, m)| {
            let inv_trace = m
                .hessian_matrix()
                .cholesky()
                .map(|c| c.inverse().trace())
                .unwrap_or(f64::NAN);
            wi * (-n * modes.resolution.delta.ln() - inv_trace / db)
        })
        .sum::<f64>()
        / n;

    let comps = mix.components();
    let mut min_mahalanobis = f64::INFINITY;
    for i in 0..comps.len() {
        for j in (i + 1)..comps.len() {
            let pooled = (comps[i].covariance() + comps[j].covariance()) * 0.5;
            let d = comps[i].mean() - comps[j].mean();
            if let Some(ch) = pooled.cholesky() {
                let m2 = d.dot(&ch.solve(&d));
                min_mahalanobis = min_mahalanobis.min(m2.sqrt());
            }
        }
    }
    Ok(MixtureAsymptotics {
        weight_entropy,
        lambda_bar,
        mean_log_lambda,
        curvature_correction,
        phi_mixture: weight_entropy + curvature_correction,
        series_residual: mean_log_lambda - first_order,
        min_mahalanobis,
        separation_warning: (min_mahalanobis < SEPARATION_THRESHOLD).then_some(SeparationWarning {
            min_mahalanobis,
            threshold: SEPARATION_THRESHOLD,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBudget {
    /// `|log ε| / (ε N_LM)`.
    pub eps_term: f64,
    /// `N / (δβ)^2`.
    pub beta_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub phi_mixture: f64,
    pub phi_direct: f64,
    pub log_nlm: f64,
    pub effective_count: usize,
    pub minima_found: usize,
    pub weight_entropy: f64,
    pub curvature_correction: f64,
    pub lambda_bar: f64,
    pub mean_log_lambda: f64,
    pub series_residual: f64,
    /// `|phi_mixture - log N_LM|`.
    pub deviation: f64,
    pub error_budget: ErrorBudget,
    pub beta: f64,
    pub resolution: Resolution,
    pub modes: ModeSet,
    pub separation_warning: Option<SeparationWarning>,
    pub plateau_warnings: Vec<PlateauWarning>,
}

/// Minima search, Hessians, mixture, ε-filter and both routes to Φ.
///
/// `phi_direct` is the information potential of the retained mixture from the estimators.
pub fn complexity_report(
    e: &EnergyLandscape,
    spec: &GridSpec,
    delta: f64,
    epsilon: f64,
    hessian_step: f64,
    budget: &EstimatorBudget,
) -> Result<ComplexityReport> {
    check_resolution(delta, epsilon)?;
    let search = find_local_minima_bruteforce(e, spec)?;
    if search.minima.is_empty() {
        return Err(Error::InvariantViolated("no interior local minimum on the grid".into()));
    }
    let modes = search
        .minima
        .par_iter()
        .map(|m| {
            Ok(Mode::new(
                m.location.clone(),
                m.energy,
                &hessian_at(e, &m.location, hessian_step)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let set = ModeSet::new(modes, e.beta(), delta, epsilon)?;
    let asym = phi_mixture_asymptotic(&set)?;
    let direct = info_state(&set.retained_mixture()?, budget)?;
    let nlm = set.effective_count;
    let log_nlm = (nlm as f64).ln();
    Ok(ComplexityReport {
        phi_mixture: asym.phi_mixture,
        phi_direct: direct.phi,
        log_nlm,
        effective_count: nlm,
        minima_found: search.minima.len(),
        weight_entropy: asym.weight_entropy,
        curvature_correction: asym.curvature_correction,
        lambda_bar: asym.lambda_bar,
        mean_log_lambda: asym.mean_log_lambda,
        series_residual: asym.series_residual,
        deviation: (asym.phi_mixture - log_nlm).abs(),
        error_budget: ErrorBudget {
            eps_term: epsilon.ln().abs() / (epsilon * nlm as f64),
            beta_term: e.dim() as f64 / (delta * e.beta()).powi(2),
        },
        beta: e.beta(),
        resolution: Resolution { delta, epsilon },
        modes: set,
        separation_warning: asym.separation_warning,
        plateau_warnings: search.plateau_warnings,
    })
}

/// Energy family in a landscape file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LandscapeFile {
    Polynomial {
        terms: Vec<Monomial>,
        grid: GridSpec,
        beta: f64,
        delta: f64,
        epsilon: f64,
        #[serde(default)]
        hessian_step: Option<f64>,
    },
    CosineSum {
        terms: Vec<CosineTerm>,
        grid: GridSpec,
        beta: f64,
        delta: f64,
        epsilon: f64,
        #[serde(default)]
        hessian_step: Option<f64>,
    },
    /// Energy table on `grid`; binary (`.bin`, little-endian f64) or whitespace/comma text.
    Grid {
        values_file: String,
        grid: GridSpec,
        beta: f64,
        delta: f64,
        epsilon: f64,
        #[serde(default)]
        hessian_step: Option<f64>,
    },
}

/// Landscape and the parameters of a complexity run.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeProblem {
    pub landscape: EnergyLandscape,
    pub grid: GridSpec,
    pub delta: f64,
    pub epsilon: f64,
    pub hessian_step: f64,
}

impl LandscapeProblem {
    pub fn report(&self, budget: &EstimatorBudget) -> Result<ComplexityReport> {
        complexity_report(
            &self.landscape,
            &self.grid,
            self.delta,
            self.epsilon,
            self.hessian_step,
            budget,
        )
    }
}

impl LandscapeFile {
    pub fn build(&self, base_dir: &Path) -> Result<LandscapeProblem> {
        let (family, grid, beta, delta, epsilon, step) = match self {
            LandscapeFile::Polynomial {
                terms,
                grid,
                beta,
                delta,
                epsilon,
                hessian_step,
            } => (
                EnergyFamily::Polynomial(terms.clone()),
                grid,
                beta,
                delta,
                epsilon,
                hessian_step,
            ),
            LandscapeFile::CosineSum {
                terms,
                grid,
                beta,
                delta,
                epsilon,
                hessian_step,
            } => (
                EnergyFamily::CosineSum(terms.clone()),
                grid,
                beta,
                delta,
                epsilon,
                hessian_step,
            ),
            LandscapeFile::Grid {
                values_file,
                grid,
                beta,
                delta,
                epsilon,
                hessian_step,
            } => (
                EnergyFamily::Grid {
                    spec: grid.clone(),
                    values: read_values(&base_dir.join(values_file))?,
                },
                grid,
                beta,
                delta,
                epsilon,
                hessian_step,
            ),
        };
        check_resolution(*delta, *epsilon)?;
        Ok(LandscapeProblem {
            landscape: EnergyLandscape::new(grid.dims(), family, *beta)?,
            grid: grid.clone(),
            delta: *delta,
            epsilon: *epsilon,
            hessian_step: step.unwrap_or(DEFAULT_HESSIAN_STEP),
        })
    }
}
