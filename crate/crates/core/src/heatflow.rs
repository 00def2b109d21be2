//! Gaussian smoothing semigroup `p_t = exp(tΔ/2) p_0` on grid densities and
//! the laws it obeys: `dH/dt = J/2`, `dJ/dt = -<|∇²S|_F^2>` and `dΦ/dt <= 0`.
//!
//! Every state is computed directly from `p_0` with the exact Fourier
//! multiplier `exp(-t|k|^2/2)`, so there is no time-stepping error and the
//! times can be processed in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{surprisal_field, GridDensity};
use crate::error::{Error, Result};
use crate::estimators::{info_state, EstimatorBudget, InfoState};
use crate::fft::{self, Symbol};
use crate::stencil::{self, Neighbors};

/// Default slack on positive steps of Φ.
pub const PHI_SLACK: f64 = 1e-6;
/// Relative slack on the matrix inequality `<|∇²S|_F^2> >= <ΔS>^2 / N`.
pub const MATRIX_INEQUALITY_REL_TOL: f64 = 1e-8;

/// Precomputed spectrum of an initial density.
#[derive(Debug, Clone)]
pub struct HeatFlow {
    d0: GridDensity,
    spectrum: Vec<rustfft::num_complex::Complex64>,
    k2: Vec<f64>,
}

impl HeatFlow {
    pub fn new(d0: &GridDensity) -> Self {
        Self {
            spectrum: fft::forward_real(d0.values(), d0.spec()),
            k2: fft::laplacian_symbol(d0.spec(), Symbol::Exact),
            d0: d0.clone(),
        }
    }

    pub fn initial(&self) -> &GridDensity {
        &self.d0
    }

    /// Density at flow time `t`.
    pub fn at(&self, t: f64) -> Result<GridDensity> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("flow time {t} must be finite and >= 0")));
        }
        if t == 0.0 {
            return Ok(self.d0.clone());
        }
        let mut spectrum = self.spectrum.clone();
        for (c, k2) in spectrum.iter_mut().zip(&self.k2) {
            *c *= (-0.5 * t * k2).exp();
        }
        // Rounding leaves values of order 1e-17 * max where the density vanishes.
        let values = fft::inverse_real(spectrum, self.d0.spec())
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        GridDensity::new(self.d0.spec().clone(), values)?
            .with_floor_rel(self.d0.floor_rel())
            .normalize()
    }
}

/// Convolution with `N(0, t I)`.
pub fn gaussian_smooth(d: &GridDensity, t: f64) -> Result<GridDensity> {
    HeatFlow::new(d).at(t)
}

/// Hessian moment with the cells whose stencil touches the density floor removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianMoment {
    /// `<|∇²S|_F^2>`.
    pub value: f64,
    /// `<ΔS>` over the whole grid.
    pub laplacian_fisher: f64,
    pub excluded_cells: usize,
}

impl HessianMoment {
    /// `<|∇²S|_F^2> - <ΔS>^2 / N`, nonnegative by Cauchy–Schwarz.
    pub fn matrix_gap(&self, dim: usize) -> f64 {
        self.value - self.laplacian_fisher.powi(2) / dim as f64
    }
}

/// Unchecked Hessian moment.
pub fn hessian_moment(d: &GridDensity) -> HessianMoment {
    let s = surprisal_field(d);
    let spec = d.spec();
    let mut floored = vec![false; spec.len()];
    for &i in &s.floored {
        floored[i] = true;
    }
    let excluded = stencil::stencil_touches(&floored, spec);
    let nb = Neighbors::new(spec);
    let dv = spec.cell_volume();
    let value = (0..spec.len())
        .filter(|&i| !excluded[i])
        .map(|i| {
            let h = stencil::hessian_at(&s.field.values, &nb, i);
            d.values()[i] * h.iter().map(|v| v * v).sum::<f64>()
        })
        .sum::<f64>()
        * dv;
    HessianMoment {
        value,
        laplacian_fisher: d.expect(&stencil::laplacian(&s.field.values, spec)),
        excluded_cells: excluded.iter().filter(|e| **e).count(),
    }
}

/// `<|∇²S|_F^2>`, failing when the bound `>= <ΔS>^2 / N` is broken (a sign of under-resolution).
pub fn hessian_frobenius_moment(d: &GridDensity) -> Result<HessianMoment> {
    let m = hessian_moment(d);
    let bound = m.laplacian_fisher.powi(2) / d.dims() as f64;
    let tol = MATRIX_INEQUALITY_REL_TOL * bound;
    if m.value < bound - tol {
        return Err(Error::CrossCheckFailed {
            what: "Hessian moment below <ΔS>^2/N".into(),
            a: m.value,
            b: bound,
            rel: (bound - m.value) / bound,
            tol: MATRIX_INEQUALITY_REL_TOL,
        });
    }
    Ok(m)
}

/// Flow times: explicit, or `0` followed by a geometric sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGrid {
    Explicit(Vec<f64>),
    /// `0, t_min, t_min r, ...` up to the first value `>= t_max`.
    Geometric {
        t_min: f64,
        t_max: f64,
        ratio: f64,
    },
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>> {
        let times = match self {
            TimeGrid::Explicit(t) => t.clone(),
            TimeGrid::Geometric { t_min, t_max, ratio } => {
                if !(*t_min > 0.0 && *ratio > 1.0 && t_max >= t_min) {
                    return Err(Error::InvalidArgument(
                        "geometric grid needs t_min > 0, ratio > 1 and t_max >= t_min".into(),
                    ));
                }
                let mut t = vec![0.0, *t_min];
                while *t.last().unwrap() < *t_max {
                    let next = t.last().unwrap() * ratio;
                    t.push(next.min(*t_max));
                }
                t
            }
        };
        if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "times must start at 0 and increase strictly".into(),
            ));
        }
        Ok(times)
    }
}

/// States along a flow and the finite-difference checks of the flow laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub states: Vec<InfoState>,
    /// Hessian moment at each recorded time.
    pub hessian: Vec<HessianMoment>,
    /// `J` at the midpoint of each step.
    pub mid_fisher: Vec<f64>,
    /// `<|∇²S|_F^2>` at the midpoint of each step.
    pub mid_hessian: Vec<f64>,
    /// `|ΔH/Δt - J_mid/2|` per step.
    pub debruijn_residuals: Vec<f64>,
    /// `|ΔJ/Δt + <|∇²S|_F^2>_mid|` per step.
    pub fisher_dissipation_residuals: Vec<f64>,
    pub phi_deltas: Vec<f64>,
}

impl FlowTrace {
    /// de Bruijn residuals relative to `J_mid / 2`.
    pub fn relative_debruijn(&self) -> Vec<f64> {
        self.debruijn_residuals
            .iter()
            .zip(&self.mid_fisher)
            .map(|(r, j)| r / (0.5 * j))
            .collect()
    }

    /// Dissipation residuals relative to the midpoint Hessian moment.
    pub fn relative_dissipation(&self) -> Vec<f64> {
        self.fisher_dissipation_residuals
            .iter()
            .zip(&self.mid_hessian)
            .map(|(r, m)| r / m)
            .collect()
    }

    pub fn fisher_strictly_decreasing(&self) -> bool {
        self.states.windows(2).all(|w| w[1].j < w[0].j)
    }

    /// Smallest relative margin of `<|∇²S|_F^2> >= <ΔS>^2/N` over recorded times.
    pub fn min_matrix_margin(&self) -> f64 {
        self.hessian
            .iter()
            .zip(&self.states)
            .map(|(h, s)| h.matrix_gap(s.dim) / (h.laplacian_fisher.powi(2) / s.dim as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Info states at `times` and at step midpoints, with the derivative residuals.
pub fn flow_trace(d0: &GridDensity, times: &[f64], budget: &EstimatorBudget) -> Result<FlowTrace> {
    if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "times must start at 0 and increase strictly".into(),
        ));
    }
    let flow = HeatFlow::new(d0);
    let eval = |t: f64| -> Result<(InfoState, HessianMoment)> {
        let d = flow.at(t)?;
        Ok((info_state(&d, budget)?, hessian_frobenius_moment(&d)?))
    };
    let at_times = times.par_iter().map(|&t| eval(t)).collect::<Result<Vec<_>>>()?;
    let at_mid = times
        .par_windows(2)
        .map(|w| eval(0.5 * (w[0] + w[1])))
        .collect::<Result<Vec<_>>>()?;
    let (states, hessian): (Vec<_>, Vec<_>) = at_times.into_iter().unzip();

    let mut trace = FlowTrace {
        times: times.to_vec(),
        mid_fisher: at_mid.iter().map(|(s, _)| s.j).collect(),
        mid_hessian: at_mid.iter().map(|(_, h)| h.value).collect(),
        states,
        hessian,
        debruijn_residuals: Vec::new(),
        fisher_dissipation_residuals: Vec::new(),
        phi_deltas: Vec::new(),
    };
    for i in 0..times.len() - 1 {
        let dt = times[i + 1] - times[i];
        let (a, b) = (&trace.states[i], &trace.states[i + 1]);
        trace
            .debruijn_residuals
            .push(((b.h - a.h) / dt - 0.5 * trace.mid_fisher[i]).abs());
        trace
            .fisher_dissipation_residuals
            .push(((b.j - a.j) / dt + trace.mid_hessian[i]).abs());
        trace.phi_deltas.push(b.phi - a.phi);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub monotone: bool,
    /// Largest positive step of Φ (0 when none).
    pub max_violation: f64,
}

/// Φ nonincreasing along the trace up to `slack`.
pub fn lyapunov_check(trace: &FlowTrace, slack: f64) -> LyapunovReport {
    let max_violation = trace.phi_deltas.iter().cloned().fold(0.0, f64::max);
    LyapunovReport {
        monotone: max_violation <= slack,
        max_violation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{discretize, GaussianMixture, GridSpec};
    use std::f64::consts::{E, PI};

    fn bimodal(spec: &GridSpec) -> GridDensity {
        let m = GaussianMixture::from_parts(
            vec![0.5, 0.5],
            vec![vec![-3.0], vec![3.0]],
            vec![vec![vec![1.0]], vec![vec![1.0]]],
        )
        .unwrap();
        discretize(&m, spec).unwrap()
    }

    #[test]
    fn gaussian_variances_add() {
        let spec = GridSpec::cube(1, 256, 20.0).unwrap();
        let d = discretize(&GaussianMixture::isotropic(1, 1.0), &spec).unwrap();
        let smoothed = gaussian_smooth(&d, 3.0).unwrap();
        let target = discretize(&GaussianMixture::isotropic(1, 4.0), &spec).unwrap();
        let sup = smoothed
            .values()
            .iter()
            .zip(target.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-8, "{sup}");
        assert_eq!(gaussian_smooth(&d, 0.0).unwrap(), d);
        assert!(gaussian_smooth(&d, -1.0).is_err());
    }

    #[test]
    fn semigroup_law() {
        let spec = GridSpec::cube(1, 512, 40.0).unwrap();
        let d = bimodal(&spec);
        let flow = HeatFlow::new(&d);
        for (s, t) in [(0.3, 1.1), (2.0, 0.05), (5.0, 7.5)] {
            let two = gaussian_smooth(&flow.at(s).unwrap(), t).unwrap();
            let one = flow.at(s + t).unwrap();
            let sup = two
                .values()
                .iter()
                .zip(one.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(sup < 1e-10, "s={s} t={t} {sup}");
        }
    }

    #[test]
    fn bimodal_becomes_gaussian() {
        let spec = GridSpec::cube(1, 1024, 80.0).unwrap();
        let d = gaussian_smooth(&bimodal(&spec), 100.0).unwrap();
        let xs = spec.axis_coords(0);
        let m2 = d.expect(&xs.iter().map(|x| x * x).collect::<Vec<_>>());
        let m4 = d.expect(&xs.iter().map(|x| x.powi(4)).collect::<Vec<_>>());
        let excess = m4 / (m2 * m2) - 3.0;
        assert!(excess.abs() < 0.05, "{excess}");
        // Unimodal: values increase up to the centre and decrease after.
        let v = d.values();
        let peak = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(v[..peak].windows(2).all(|w| w[1] >= w[0]));
        assert!(v[peak..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn hessian_moment_of_gaussians() {
        let spec = GridSpec::cube(1, 512, 12.0).unwrap();
        let d = discretize(&GaussianMixture::isotropic(1, 0.25), &spec).unwrap();
        let m = hessian_frobenius_moment(&d).unwrap();
        assert!((m.value - 16.0).abs() < 1e-6, "{m:?}");
        let spec = GridSpec::cube(2, 128, 8.0).unwrap();
        let d = discretize(&GaussianMixture::isotropic(2, 1.0), &spec).unwrap();
        let m = hessian_frobenius_moment(&d).unwrap();
        assert!((m.value - 2.0).abs() < 1e-6, "{m:?}");
        assert!(m.matrix_gap(2).abs() < 1e-6);
    }

    #[test]
    fn hessian_moment_strictly_above_bound_for_mixture() {
        let spec = GridSpec::cube(1, 512, 12.0).unwrap();
        let m = hessian_frobenius_moment(&bimodal(&spec)).unwrap();
        // With N = 1 the bound is Jensen's inequality for ΔS; it is strict unless ΔS is constant.
        assert!(m.matrix_gap(1) > 0.1 * m.value, "{m:?}");
    }

    #[test]
    fn gaussian_flow_closed_form() {
        let spec = GridSpec::cube(1, 1024, 40.0).unwrap();
        let d = discretize(&GaussianMixture::isotropic(1, 1.0), &spec).unwrap();
        let trace = flow_trace(&d, &[0.0, 1.0, 2.0, 3.0], &EstimatorBudget::default()).unwrap();
        for (t, s) in trace.times.iter().zip(&trace.states) {
            assert!((s.h - 0.5 * (2.0 * PI * E * (1.0 + t)).ln()).abs() < 1e-6);
            assert!((s.j - 1.0 / (1.0 + t)).abs() < 1e-4);
            assert!(s.phi.abs() < 1e-4);
        }
        let l = lyapunov_check(&trace, PHI_SLACK);
        assert!(l.monotone, "{l:?}");
        assert!(trace.phi_deltas.iter().all(|d| d.abs() <= 1e-6));
    }

    #[test]
    fn bimodal_flow_decays() {
        let spec = GridSpec::cube(1, 1280, 80.0).unwrap();
        let d = bimodal(&spec);
        let times = TimeGrid::Geometric {
            t_min: 0.05,
            t_max: 64.0,
            ratio: 1.25,
        }
        .times()
        .unwrap();
        let trace = flow_trace(&d, &times, &EstimatorBudget::default()).unwrap();
        assert!(
            (trace.states[0].phi - 2f64.ln()).abs() < 0.05,
            "{}",
            trace.states[0].phi
        );
        assert!(lyapunov_check(&trace, PHI_SLACK).monotone);
        assert!(trace.fisher_strictly_decreasing());
        assert!(trace.states.last().unwrap().phi < 0.02);
        assert!(trace.relative_debruijn().iter().all(|r| *r < 0.02));
        assert!(trace.relative_dissipation().iter().all(|r| *r < 0.05));
        assert!(trace.min_matrix_margin() >= -MATRIX_INEQUALITY_REL_TOL);
    }

    #[test]
    fn flat_top_start() {
        let spec = GridSpec::cube(1, 1280, 80.0).unwrap();
        let d = GridDensity::from_fn(spec, |x| 1.0 - ((x[0].abs() - 4.0) / 0.3).tanh()).unwrap();
        let trace = flow_trace(&d, &[0.0, 0.5, 1.0, 2.0, 4.0], &EstimatorBudget::default()).unwrap();
        assert!(trace.states.iter().all(|s| s.j.is_finite()));
        assert!(trace.fisher_strictly_decreasing());
        assert!(trace.phi_deltas.iter().all(|d| *d < 0.0));
    }

    #[test]
    fn time_grids() {
        let t = TimeGrid::Geometric {
            t_min: 0.1,
            t_max: 1.0,
            ratio: 2.0,
        }
        .times()
        .unwrap();
        assert_eq!(t, vec![0.0, 0.1, 0.2, 0.4, 0.8, 1.0]);
        assert!(TimeGrid::Explicit(vec![0.0, 1.0, 1.0]).times().is_err());
        assert!(TimeGrid::Explicit(vec![0.5, 1.0]).times().is_err());
        let trace = flow_trace(
            &bimodal(&GridSpec::cube(1, 256, 12.0).unwrap()),
            &[0.0],
            &EstimatorBudget::default(),
        )
        .unwrap();
        assert!(lyapunov_check(&trace, PHI_SLACK).monotone);
        assert!(trace.phi_deltas.is_empty());
    }
}
