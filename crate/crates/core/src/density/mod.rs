//! Density representations: periodic grids, Gaussian components and mixtures.
//!
//! Grids cover `[-L, L)` on every axis with periodic wrap, so the discrete
//! Fourier machinery in [`crate::fft`] applies without windowing. A density is
//! only accepted on a grid when the mass in the outermost cells is negligible,
//! which makes the torus indistinguishable from the plane at working precision.

mod gaussian;
pub mod io;

pub use gaussian::{GaussianComponent, GaussianMixture};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported grid dimension.
pub const MAX_GRID_DIMS: usize = 3;
/// Default budget on the total number of grid points.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 22;
/// Mass allowed in the outermost layer of cells.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-9;
/// Relative density floor applied before taking logarithms.
pub const DEFAULT_FLOOR_REL: f64 = 1e-14;
/// Number of standard deviations a component must keep from the box edge.
pub const MIN_EXTENT_SDS: f64 = 6.0;

/// Uniform periodic grid on `[-L, L)` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpecFile")]
pub struct GridSpec {
    points: Vec<usize>,
    extent: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpecFile {
    points: Vec<usize>,
    extent: Vec<f64>,
}

impl TryFrom<GridSpecFile> for GridSpec {
    type Error = Error;

    fn try_from(f: GridSpecFile) -> Result<Self> {
        GridSpec::new(f.points, f.extent)
    }
}

impl GridSpec {
    pub fn new(points: Vec<usize>, extent: Vec<f64>) -> Result<Self> {
        Self::with_budget(points, extent, DEFAULT_POINT_BUDGET)
    }

    pub fn with_budget(points: Vec<usize>, extent: Vec<f64>, budget: usize) -> Result<Self> {
        if points.is_empty() || points.len() > MAX_GRID_DIMS {
            return Err(Error::InvalidGrid(format!(
                "grid dimension must be 1..={MAX_GRID_DIMS}, got {}",
                points.len()
            )));
        }
        if points.len() != extent.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: extent.len(),
            });
        }
        for (&n, &l) in points.iter().zip(&extent) {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "points per axis must be even and >= 8, got {n}"
                )));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("extent must be positive, got {l}")));
            }
        }
        let total = points.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match total {
            Some(t) if t <= budget => {}
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "grid of {points:?} points exceeds budget {budget}"
                )))
            }
        }
        Ok(Self { points, extent })
    }

    /// Same number of points and extent `l` on each of `dims` axes.
    pub fn cube(dims: usize, points: usize, l: f64) -> Result<Self> {
        Self::new(vec![points; dims], vec![l; dims])
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.extent[axis] / self.points[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dims()).map(|a| self.spacing(a)).product()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides (last axis fastest).
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims()];
        for a in (0..self.dims().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.points[a + 1];
        }
        s
    }

    pub fn coord(&self, axis: usize, index: usize) -> f64 {
        -self.extent[axis] + index as f64 * self.spacing(axis)
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|i| self.coord(axis, i)).collect()
    }

    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        let strides = self.strides();
        strides
            .iter()
            .zip(&self.points)
            .map(|(&s, &n)| (flat / s) % n)
            .collect()
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        self.strides().iter().zip(index).map(|(s, i)| s * i).sum()
    }

    /// Physical coordinates of a flat grid index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .into_iter()
            .enumerate()
            .map(|(a, i)| self.coord(a, i))
            .collect()
    }

    /// Grid with every extent multiplied by `a`, same point counts.
    pub fn scaled(&self, a: f64) -> Result<Self> {
        Self::new(self.points.clone(), self.extent.iter().map(|l| l * a).collect())
    }

    /// True if the flat index lies in the outermost layer on any axis.
    pub fn on_boundary(&self, flat: usize) -> bool {
        self.unravel(flat)
            .iter()
            .zip(&self.points)
            .any(|(&i, &n)| i == 0 || i + 1 == n)
    }
}

/// Real field sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

/// Surprisal field together with the indices where the density floor applied.
#[derive(Debug, Clone)]
pub struct Surprisal {
    pub field: ScalarField,
    pub floored: Vec<usize>,
}

/// Nonnegative density sampled on a periodic grid (density per unit volume).
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    spec: GridSpec,
    values: Vec<f64>,
    floor_rel: f64,
}

impl GridDensity {
    /// Wraps raw values; they must be finite and nonnegative but need not be normalized.
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "density values must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self {
            spec,
            values,
            floor_rel: DEFAULT_FLOOR_REL,
        })
    }

    /// Builds from a density function evaluated at every grid point, then normalizes.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..spec.len()).map(|i| f(&spec.point(i))).collect();
        Self::new(spec, values)?.normalize()
    }

    pub fn with_floor_rel(mut self, floor_rel: f64) -> Self {
        self.floor_rel = floor_rel;
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dims(&self) -> usize {
        self.spec.dims()
    }

    pub fn floor_rel(&self) -> f64 {
        self.floor_rel
    }

    /// Absolute floor: the largest value times the relative floor.
    pub fn log_floor(&self) -> f64 {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        (max * self.floor_rel).max(f64::MIN_POSITIVE)
    }

    /// Riemann sum of the values.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn normalize(&self) -> Result<Self> {
        let mass = self.mass();
        if !(mass > 0.0) {
            return Err(Error::AllZero);
        }
        let inv = 1.0 / mass;
        Ok(Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|v| v * inv).collect(),
            floor_rel: self.floor_rel,
        })
    }

    /// Fraction of mass in the outermost layer of cells.
    pub fn boundary_mass(&self) -> f64 {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let edge: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.spec.on_boundary(*i))
            .map(|(_, v)| v)
            .sum();
        edge / total
    }

    pub fn check_boundary(&self) -> Result<()> {
        let boundary_mass = self.boundary_mass();
        if boundary_mass >= BOUNDARY_MASS_LIMIT {
            return Err(Error::DomainTooSmall {
                boundary_mass,
                limit: BOUNDARY_MASS_LIMIT,
            });
        }
        Ok(())
    }

    /// Expectation of a field under this density (Riemann sum).
    pub fn expect(&self, field: &[f64]) -> f64 {
        debug_assert_eq!(field.len(), self.values.len());
        self.values.iter().zip(field).map(|(p, f)| p * f).sum::<f64>() * self.spec.cell_volume()
    }

    /// Mean vector of the grid density.
    pub fn mean(&self) -> Vec<f64> {
        let dv = self.spec.cell_volume();
        let mut m = vec![0.0; self.dims()];
        for (i, p) in self.values.iter().enumerate() {
            for (a, x) in self.spec.point(i).into_iter().enumerate() {
                m[a] += p * x * dv;
            }
        }
        m
    }

    /// Covariance matrix (row-major) of the grid density.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let n = self.dims();
        let mu = self.mean();
        let dv = self.spec.cell_volume();
        let mut c = vec![vec![0.0; n]; n];
        for (i, p) in self.values.iter().enumerate() {
            let x = self.spec.point(i);
            for a in 0..n {
                for b in 0..n {
                    c[a][b] += p * (x[a] - mu[a]) * (x[b] - mu[b]) * dv;
                }
            }
        }
        c
    }

    /// Pushforward under `x -> a x` on the correspondingly scaled grid (exact).
    pub fn rescaled(&self, a: f64) -> Result<Self> {
        check_scale(a)?;
        let spec = self.spec.scaled(a)?;
        let jac = a.powi(self.dims() as i32);
        Ok(Self {
            spec,
            values: self.values.iter().map(|v| v / jac).collect(),
            floor_rel: self.floor_rel,
        })
    }

    /// Pushforward under `x -> a x`, resampled onto `target` by cubic interpolation.
    pub fn rescale_onto(&self, a: f64, target: &GridSpec) -> Result<Self> {
        check_scale(a)?;
        if target.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: target.dims(),
            });
        }
        // Source mass that maps outside the target box is lost.
        let dv = self.spec.cell_volume();
        let total = self.mass();
        let outside: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                self.spec
                    .point(*i)
                    .iter()
                    .zip(target.extent())
                    .any(|(x, l)| a * x < -l || a * x >= *l)
            })
            .map(|(_, v)| v * dv)
            .sum();
        if outside / total >= BOUNDARY_MASS_LIMIT {
            return Err(Error::DomainTooSmall {
                boundary_mass: outside / total,
                limit: BOUNDARY_MASS_LIMIT,
            });
        }
        let values = (0..target.len())
            .map(|i| {
                let y: Vec<f64> = target.point(i).iter().map(|x| x / a).collect();
                self.interpolate(&y).max(0.0)
            })
            .collect();
        let out = GridDensity::new(target.clone(), values)?
            .with_floor_rel(self.floor_rel)
            .normalize()?;
        out.check_boundary()?;
        Ok(out)
    }

    /// Tensor-product Catmull-Rom interpolation; zero outside the grid.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        interpolate_values(&self.spec, &self.values, x)
    }
}

/// Tensor-product Catmull-Rom interpolation of grid values; points beyond the grid count as zero.
pub(crate) fn interpolate_values(spec: &GridSpec, values: &[f64], x: &[f64]) -> f64 {
    let n = spec.dims();
    let mut base = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (a, xa) in x.iter().enumerate().take(n) {
        let u = (xa + spec.extent[a]) / spec.spacing(a);
        let i0 = u.floor();
        let t = u - i0;
        base.push(i0 as i64 - 1);
        weights.push(catmull_rom_weights(t));
    }
    let strides = spec.strides();
    let mut acc = 0.0;
    for corner in 0..4usize.pow(n as u32) {
        let mut flat = 0usize;
        let mut w = 1.0;
        let mut inside = true;
        let mut c = corner;
        for a in (0..n).rev() {
            let off = c % 4;
            c /= 4;
            let idx = base[a] + off as i64;
            if idx < 0 || idx >= spec.points[a] as i64 {
                inside = false;
                break;
            }
            flat += idx as usize * strides[a];
            w *= weights[a][off];
        }
        if inside {
            acc += w * values[flat];
        }
    }
    acc
}

fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

fn check_scale(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "scale factor must be positive, got {a}"
        )))
    }
}

/// Normalizes a grid density to unit Riemann mass.
pub fn normalize(d: &GridDensity) -> Result<GridDensity> {
    d.normalize()
}

/// Samples a Gaussian mixture on a grid and normalizes it.
pub fn discretize(mixture: &GaussianMixture, spec: &GridSpec) -> Result<GridDensity> {
    if mixture.dim() != spec.dims() {
        return Err(Error::DimensionMismatch {
            expected: spec.dims(),
            got: mixture.dim(),
        });
    }
    let values = (0..spec.len()).map(|i| mixture.pdf(&spec.point(i))).collect();
    let d = GridDensity::new(spec.clone(), values)?.normalize()?;
    let too_close = mixture.components().iter().any(|c| {
        (0..spec.dims()).any(|a| {
            let sd = c.covariance()[(a, a)].sqrt();
            c.mean()[a].abs() + MIN_EXTENT_SDS * sd > spec.extent()[a]
        })
    });
    if too_close {
        return Err(Error::DomainTooSmall {
            boundary_mass: d.boundary_mass(),
            limit: BOUNDARY_MASS_LIMIT,
        });
    }
    d.check_boundary()?;
    Ok(d)
}

/// Surprisal `-log max(p, floor)` with the floored indices reported.
pub fn surprisal_field(d: &GridDensity) -> Surprisal {
    let floor = d.log_floor();
    let mut floored = Vec::new();
    let values = d
        .values
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if p < floor {
                floored.push(i);
                -floor.ln()
            } else {
                -p.ln()
            }
        })
        .collect();
    Surprisal {
        field: ScalarField {
            spec: d.spec.clone(),
            values,
        },
        floored,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal_grid(points: usize, l: f64) -> GridDensity {
        discretize(
            &GaussianMixture::isotropic(1, 1.0),
            &GridSpec::cube(1, points, l).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(vec![6], vec![1.0]).is_err());
        assert!(GridSpec::new(vec![9], vec![1.0]).is_err());
        assert!(GridSpec::new(vec![8], vec![0.0]).is_err());
        assert!(GridSpec::new(vec![8; 4], vec![1.0; 4]).is_err());
        assert!(GridSpec::with_budget(vec![64, 64], vec![1.0, 1.0], 1000).is_err());
        let g = GridSpec::new(vec![16], vec![1.0]).unwrap();
        assert_eq!(g.spacing(0), 0.125);
        assert_eq!(g.coord(0, 0), -1.0);
    }

    #[test]
    fn uniform_normalizes_to_half() {
        let spec = GridSpec::cube(1, 16, 1.0).unwrap();
        let d = GridDensity::new(spec, vec![2.0; 16]).unwrap().normalize().unwrap();
        for v in d.values() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_idempotent_and_scale_free() {
        let d = std_normal_grid(256, 8.0);
        let again = d.normalize().unwrap();
        for (a, b) in d.values().iter().zip(again.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let scaled = GridDensity::new(d.spec().clone(), d.values().iter().map(|v| v * 7.5).collect())
            .unwrap()
            .normalize()
            .unwrap();
        for (a, b) in d.values().iter().zip(scaled.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_mass_rejected() {
        let spec = GridSpec::cube(1, 8, 1.0).unwrap();
        let d = GridDensity::new(spec, vec![0.0; 8]).unwrap();
        assert_eq!(d.normalize(), Err(Error::AllZero));
    }

    #[test]
    fn discretized_normal_has_unit_mass_and_central_mode() {
        let d = std_normal_grid(256, 8.0);
        // Independent Riemann sum of the analytic pdf.
        let h = 16.0 / 256.0;
        let raw: f64 = (0..256)
            .map(|i| {
                let x = -8.0 + i as f64 * h;
                (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * h
            })
            .sum();
        assert!((raw - 1.0).abs() < 1e-10);
        assert!((d.mass() - 1.0).abs() < 1e-10);
        let argmax = d
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(d.spec().coord(0, argmax), 0.0);
    }

    #[test]
    fn symmetric_bimodal_has_two_equal_maxima() {
        let m = GaussianMixture::from_parts(
            vec![0.5, 0.5],
            vec![vec![-3.0], vec![3.0]],
            vec![vec![vec![1.0]], vec![vec![1.0]]],
        )
        .unwrap();
        let d = discretize(&m, &GridSpec::cube(1, 256, 16.0).unwrap()).unwrap();
        let spec = d.spec();
        let at = |x: f64| d.values()[((x + 16.0) / spec.spacing(0)).round() as usize];
        assert!((at(-3.0) - at(3.0)).abs() < 1e-15);
        assert!(at(-3.0) > at(-3.125) && at(-3.0) > at(-2.875));
    }

    #[test]
    fn discretize_rejects_small_domain() {
        let r = discretize(
            &GaussianMixture::isotropic(1, 1.0),
            &GridSpec::cube(1, 64, 2.0).unwrap(),
        );
        assert!(matches!(r, Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn moments_match_mixture() {
        let m = GaussianMixture::from_parts(
            vec![0.3, 0.7],
            vec![vec![-1.0, 0.5], vec![2.0, -0.5]],
            vec![
                vec![vec![1.0, 0.3], vec![0.3, 0.8]],
                vec![vec![0.6, -0.1], vec![-0.1, 1.2]],
            ],
        )
        .unwrap();
        let d = discretize(&m, &GridSpec::cube(2, 128, 10.0).unwrap()).unwrap();
        let mu = d.mean();
        let c = d.covariance();
        let (mu_a, c_a) = m.moments();
        for a in 0..2 {
            assert!((mu[a] - mu_a[a]).abs() < 1e-6);
            for b in 0..2 {
                assert!((c[a][b] - c_a[(a, b)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn surprisal_of_uniform_and_normal() {
        let spec = GridSpec::cube(1, 16, 1.0).unwrap();
        let d = GridDensity::new(spec, vec![1.0; 16]).unwrap().normalize().unwrap();
        let s = surprisal_field(&d);
        assert!(s.field.values.iter().all(|v| (v - 2f64.ln()).abs() < 1e-15));
        assert!(s.floored.is_empty());

        let d = std_normal_grid(256, 8.0);
        let s = surprisal_field(&d);
        let mid = 128;
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((s.field.values[mid] - half_log_2pi).abs() < 1e-10);
    }

    #[test]
    fn floor_is_applied_and_reported() {
        let spec = GridSpec::cube(1, 8, 1.0).unwrap();
        let mut v = vec![1.0; 8];
        v[3] = 1e-20;
        let d = GridDensity::new(spec, v).unwrap().normalize().unwrap();
        let s = surprisal_field(&d);
        assert_eq!(s.floored, vec![3]);
        assert!((s.field.values[3] + d.log_floor().ln()).abs() < 1e-12);
    }

    #[test]
    fn grid_rescale_preserves_mass() {
        let d = std_normal_grid(128, 8.0);
        for a in [0.1, 0.5, 3.0] {
            let r = d.rescaled(a).unwrap();
            assert!((r.mass() - 1.0).abs() < 1e-10);
        }
        let target = GridSpec::cube(1, 256, 24.0).unwrap();
        let r = d.rescale_onto(2.0, &target).unwrap();
        assert!((r.mass() - 1.0).abs() < 1e-10);
        assert!((r.covariance()[0][0] - 4.0).abs() < 1e-3);
        let small = GridSpec::cube(1, 128, 4.0).unwrap();
        assert!(matches!(d.rescale_onto(3.0, &small), Err(Error::DomainTooSmall { .. })));
    }
}
