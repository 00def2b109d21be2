//! Fourier-multiplier projections of the surprisal field and the
//! cutoff-robustness experiment.
//!
//! The order-`m` filter multiplies the spectrum of `S` by `(-λ(k))^m`, where
//! `λ` is the symbol of `-Δ`, so the projected statistic is `<Δ^m S>`. With
//! the default stencil symbol `m = 1` is the Laplacian-form Fisher trace of the
//! grid estimators and `m = 0` is the entropy.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{mean_and_se, per_dataset, ConservationReport, GridBayesProblem, Identity};
use crate::density::{surprisal_field, GridDensity, GridSpec};
use crate::error::{Error, Result};
use crate::fft::{self, Symbol};
use crate::rng;

/// Largest accepted filter order.
pub const MAX_FILTER_ORDER: u32 = 4;

/// Monomial filter of order `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralFilter {
    order: u32,
    symbol: Symbol,
}

impl SpectralFilter {
    pub fn new(order: u32) -> Result<Self> {
        if order > MAX_FILTER_ORDER {
            return Err(Error::FilterOrderRejected(order));
        }
        Ok(Self {
            order,
            symbol: Symbol::default(),
        })
    }

    pub fn with_symbol(mut self, symbol: Symbol) -> Self {
        self.symbol = symbol;
        self
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn symbol(&self) -> Symbol {
        self.symbol
    }

    /// `(-λ(k))^m` at every Fourier index.
    pub fn multiplier(&self, spec: &GridSpec) -> Vec<f64> {
        fft::laplacian_symbol(spec, self.symbol)
            .into_iter()
            .map(|l| (-l).powi(self.order as i32))
            .collect()
    }

    /// `Δ^m f` computed spectrally.
    pub fn apply(&self, field: &[f64], spec: &GridSpec) -> Vec<f64> {
        if self.order == 0 {
            return field.to_vec();
        }
        fft::apply_multiplier(field, spec, &self.multiplier(spec))
    }
}

/// `<Δ^m S>` under `d`.
pub fn projected_statistic(d: &GridDensity, f: &SpectralFilter) -> Result<f64> {
    let s = surprisal_field(d).field.values;
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvariantViolated("surprisal field not finite".into()));
    }
    Ok(d.expect(&f.apply(&s, d.spec())))
}

/// Projected identity `<Δ^m S> + <Δ^m i> = <Δ^m S0>` by joint Monte Carlo; `m` is 0 or 1.
pub fn projected_conservation_audit(
    prob: &GridBayesProblem,
    m: u32,
    n_datasets: usize,
    seed: u64,
) -> Result<ConservationReport> {
    if m > 1 {
        return Err(Error::FilterOrderRejected(m));
    }
    let filter = SpectralFilter::new(m)?;
    let spec = prob.prior().spec().clone();
    let rhs = projected_statistic(prob.prior(), &filter)?;
    let rows = per_dataset(prob, n_datasets, seed, |post| {
        let s = projected_statistic(&post.posterior, &filter)?;
        let i = post.posterior.expect(&filter.apply(&post.information(), &spec));
        Ok(s + i)
    })?;
    let (lhs, se) = mean_and_se(&rows);
    Ok(ConservationReport {
        identity: Identity::Projected(m),
        lhs,
        rhs,
        residual: lhs - rhs,
        mc_std_error: se,
        samples_used: n_datasets,
        terms: [("prior_statistic".to_string(), rhs)].into_iter().collect(),
    })
}

/// Spectral density of the variance lost above `k`, up to a constant factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailVarianceProfile {
    pub alpha: f64,
    pub sigma: f64,
    pub m: u32,
    pub k_samples: Vec<f64>,
    /// Scaled so the largest sample is 1.
    pub rho_values: Vec<f64>,
    /// Sample that maximizes `rho_values`.
    pub peak_k: f64,
    /// Stationary point `sqrt((4m - alpha) / (2 sigma^2))`; `None` when `4m < alpha`.
    pub analytic_peak_k: Option<f64>,
}

/// Evaluates `rho_m(k) ∝ exp(-sigma^2 k^2) k^(4m - alpha)` on `k_grid`.
pub fn tail_variance_profile(alpha: f64, sigma: f64, m: u32, k_grid: &[f64]) -> Result<TailVarianceProfile> {
    if !(0.0..=2.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 2]")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    if k_grid.is_empty() || k_grid[0] <= 0.0 || k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("k grid must be positive and increasing".into()));
    }
    let p = 4.0 * m as f64 - alpha;
    let log_rho: Vec<f64> = k_grid.iter().map(|k| -sigma * sigma * k * k + p * k.ln()).collect();
    let (peak, max) = log_rho.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
    );
    Ok(TailVarianceProfile {
        alpha,
        sigma,
        m,
        k_samples: k_grid.to_vec(),
        rho_values: log_rho.iter().map(|v| (v - max).exp()).collect(),
        peak_k: k_grid[peak],
        analytic_peak_k: (p >= 0.0).then(|| (p / (2.0 * sigma * sigma)).sqrt()),
    })
}

/// Noise model and sweep axes for the robustness experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Spectral exponent of the surprisal noise, `E|S(k)|^2 ∝ |k|^-alpha`.
    pub noise_alpha: f64,
    pub noise_amplitude: f64,
    /// Noise is present only at `|k| >= cutoff`.
    pub cutoffs: Vec<f64>,
    pub orders: Vec<u32>,
    pub ensemble: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            noise_alpha: 2.0,
            noise_amplitude: 0.3,
            cutoffs: vec![0.5, 1.0, 2.0, 4.0],
            orders: vec![0, 1, 2, 3],
            ensemble: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: u32,
    pub cutoff: f64,
    pub seed: u64,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub m: u32,
    pub cutoff: f64,
    pub mean: f64,
    pub variance: f64,
    /// Root mean square of the statistic over the ensemble.
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSensitivity {
    pub m: u32,
    /// `(max - min) / mean` of the ensemble RMS across cutoffs.
    pub sensitivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
    pub sensitivity: Vec<OrderSensitivity>,
}

impl SweepResult {
    pub fn sensitivity_of(&self, m: u32) -> Option<f64> {
        self.sensitivity.iter().find(|s| s.m == m).map(|s| s.sensitivity)
    }

    /// Smallest sensitivity among orders `>= 2` over the largest among orders `<= 1`.
    pub fn robustness_ratio(&self) -> Option<f64> {
        let low = self
            .sensitivity
            .iter()
            .filter(|s| s.m <= 1)
            .map(|s| s.sensitivity)
            .reduce(f64::max)?;
        let high = self
            .sensitivity
            .iter()
            .filter(|s| s.m >= 2)
            .map(|s| s.sensitivity)
            .reduce(f64::min)?;
        Some(high / low)
    }
}

/// Projected statistics of `S + eta` where `eta` is Gaussian noise with
/// spectrum `A^2 |k|^-alpha dk` above each cutoff.
///
/// Each ensemble member draws one white-noise field and reuses it for every
/// cutoff, so differences between cutoffs come from the band alone.
pub fn robustness_sweep(d_base: &GridDensity, cfg: &SweepConfig, seed: u64) -> Result<SweepResult> {
    if cfg.ensemble < 2 {
        return Err(Error::InvalidArgument("ensemble needs at least two members".into()));
    }
    if cfg.cutoffs.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::InvalidArgument("cutoffs must be positive".into()));
    }
    let filters = cfg
        .orders
        .iter()
        .map(|&m| SpectralFilter::new(m))
        .collect::<Result<Vec<_>>>()?;
    let spec = d_base.spec();
    let s = surprisal_field(d_base).field.values;
    let clean: Vec<f64> = filters.iter().map(|f| d_base.expect(&f.apply(&s, spec))).collect();

    let n = spec.len() as f64;
    let dk: f64 = spec.extent().iter().map(|l| std::f64::consts::PI / l).product();
    let kmag = fft::laplacian_symbol(spec, Symbol::Exact)
        .into_iter()
        .map(f64::sqrt)
        .collect::<Vec<_>>();
    let shape: Vec<f64> = kmag
        .iter()
        .map(|&k| {
            if k == 0.0 {
                0.0
            } else {
                (n * cfg.noise_amplitude.powi(2) * k.powf(-cfg.noise_alpha) * dk).sqrt()
            }
        })
        .collect();

    let members: Vec<(u64, Vec<Vec<f64>>)> = (0..cfg.ensemble)
        .into_par_iter()
        .map(|member| {
            let member_seed = rng::derive_seed(seed, member as u64);
            let mut r = rng::stream(seed, member as u64);
            let white: Vec<f64> = (0..spec.len()).map(|_| r.sample(StandardNormal)).collect();
            let spectrum = fft::forward_real(&white, spec);
            let per_cutoff = cfg
                .cutoffs
                .iter()
                .map(|&kc| {
                    let mut band = spectrum.clone();
                    for ((c, &k), &a) in band.iter_mut().zip(&kmag).zip(&shape) {
                        *c *= if k >= kc { a } else { 0.0 };
                    }
                    filters
                        .iter()
                        .zip(&clean)
                        .map(|(f, base)| {
                            let mut b = band.clone();
                            if f.order() > 0 {
                                for (c, m) in b.iter_mut().zip(f.multiplier(spec)) {
                                    *c *= m;
                                }
                            }
                            base + d_base.expect(&fft::inverse_real(b, spec))
                        })
                        .collect()
                })
                .collect();
            (member_seed, per_cutoff)
        })
        .collect();

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut sensitivity = Vec::new();
    for (fi, f) in filters.iter().enumerate() {
        let mut rms_by_cutoff = Vec::new();
        for (ci, &kc) in cfg.cutoffs.iter().enumerate() {
            let stats: Vec<f64> = members.iter().map(|(_, v)| v[ci][fi]).collect();
            for ((member_seed, _), &st) in members.iter().zip(&stats) {
                rows.push(SweepRow {
                    m: f.order(),
                    cutoff: kc,
                    seed: *member_seed,
                    statistic: st,
                });
            }
            let k = stats.len() as f64;
            let mean = stats.iter().sum::<f64>() / k;
            let variance = stats.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let rms = (stats.iter().map(|x| x * x).sum::<f64>() / k).sqrt();
            rms_by_cutoff.push(rms);
            summary.push(SweepSummary {
                m: f.order(),
                cutoff: kc,
                mean,
                variance,
                rms,
            });
        }
        let max = rms_by_cutoff.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = rms_by_cutoff.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = rms_by_cutoff.iter().sum::<f64>() / rms_by_cutoff.len() as f64;
        sensitivity.push(OrderSensitivity {
            m: f.order(),
            sensitivity: if mean > 0.0 { (max - min) / mean } else { 0.0 },
        });
    }
    Ok(SweepResult {
        rows,
        summary,
        sensitivity,
    })
}
