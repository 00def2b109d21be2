//! Multi-dimensional FFT and Fourier multipliers on periodic grids.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::density::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// In-place transform along every axis of a row-major array.
/// The inverse is scaled by `1 / len` so that forward then inverse is the identity.
pub fn fft_nd(buf: &mut [Complex64], points: &[usize], dir: Direction) {
    let total: usize = points.iter().product();
    assert_eq!(buf.len(), total);
    let mut planner = FftPlanner::new();
    let mut stride = 1;
    for axis in (0..points.len()).rev() {
        let n = points[axis];
        let fft = match dir {
            Direction::Forward => planner.plan_fft_forward(n),
            Direction::Inverse => planner.plan_fft_inverse(n),
        };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let start = outer + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = buf[start + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    buf[start + j * stride] = *v;
                }
            }
        }
        stride *= n;
    }
    if dir == Direction::Inverse {
        let inv = 1.0 / total as f64;
        for v in buf.iter_mut() {
            *v *= inv;
        }
    }
}

/// Angular wavenumbers `2 pi j / (2L)` in FFT order for one axis.
pub fn wavenumbers(spec: &GridSpec, axis: usize) -> Vec<f64> {
    let n = spec.points()[axis];
    let period = 2.0 * spec.extent()[axis];
    (0..n)
        .map(|j| {
            let signed = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            2.0 * std::f64::consts::PI * signed / period
        })
        .collect()
}

/// Which eigenvalue of `-Δ` a multiplier is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symbol {
    /// `|k|^2` with the exact DFT wavenumbers.
    Exact,
    /// `sum (4/h^2) sin^2(k h / 2)`, the symbol of the three-point Laplacian stencil.
    #[default]
    Stencil,
}

/// Symbol of `-Δ` at every Fourier index (row-major, FFT order).
pub fn laplacian_symbol(spec: &GridSpec, symbol: Symbol) -> Vec<f64> {
    let per_axis: Vec<Vec<f64>> = (0..spec.dims())
        .map(|a| {
            let h = spec.spacing(a);
            wavenumbers(spec, a)
                .into_iter()
                .map(|k| match symbol {
                    Symbol::Exact => k * k,
                    Symbol::Stencil => {
                        let s = (0.5 * k * h).sin();
                        4.0 * s * s / (h * h)
                    }
                })
                .collect()
        })
        .collect();
    let strides = spec.strides();
    (0..spec.len())
        .map(|flat| {
            (0..spec.dims())
                .map(|a| per_axis[a][(flat / strides[a]) % spec.points()[a]])
                .sum()
        })
        .collect()
}

pub fn forward_real(values: &[f64], spec: &GridSpec) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut buf, spec.points(), Direction::Forward);
    buf
}

pub fn inverse_real(mut spectrum: Vec<Complex64>, spec: &GridSpec) -> Vec<f64> {
    fft_nd(&mut spectrum, spec.points(), Direction::Inverse);
    spectrum.into_iter().map(|c| c.re).collect()
}

/// Applies a real, even multiplier (indexed like [`laplacian_symbol`]) to a real field.
pub fn apply_multiplier(values: &[f64], spec: &GridSpec, multiplier: &[f64]) -> Vec<f64> {
    let mut spectrum = forward_real(values, spec);
    for (c, m) in spectrum.iter_mut().zip(multiplier) {
        *c *= *m;
    }
    inverse_real(spectrum, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil;

    #[test]
    fn round_trip_2d() {
        let spec = GridSpec::new(vec![8, 12], vec![1.0, 2.0]).unwrap();
        let values: Vec<f64> = (0..spec.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let back = inverse_real(forward_real(&values, &spec), &spec);
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn single_mode_transform() {
        // cos(k1 x) on [-pi, pi) has energy only at j = +-1.
        let spec = GridSpec::cube(1, 16, std::f64::consts::PI).unwrap();
        let values: Vec<f64> = spec.axis_coords(0).iter().map(|x| x.cos()).collect();
        let s = forward_real(&values, &spec);
        for (j, c) in s.iter().enumerate() {
            let expect = if j == 1 || j == 15 { 8.0 } else { 0.0 };
            assert!((c.norm() - expect).abs() < 1e-12, "j={j}");
        }
    }

    #[test]
    fn stencil_symbol_reproduces_stencil_laplacian() {
        let spec = GridSpec::new(vec![16, 8, 10], vec![1.0, 1.5, 2.0]).unwrap();
        let values: Vec<f64> = (0..spec.len()).map(|i| ((i * 7919) % 101) as f64 / 17.0).collect();
        let neg_lap = apply_multiplier(&values, &spec, &laplacian_symbol(&spec, Symbol::Stencil));
        let lap = stencil::laplacian(&values, &spec);
        for (a, b) in neg_lap.iter().zip(&lap) {
            assert!((a + b).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_symbol_differentiates_trig_polynomials() {
        let spec = GridSpec::cube(1, 32, std::f64::consts::PI).unwrap();
        let values: Vec<f64> = spec.axis_coords(0).iter().map(|x| (3.0 * x).sin()).collect();
        let out = apply_multiplier(&values, &spec, &laplacian_symbol(&spec, Symbol::Exact));
        for (o, v) in out.iter().zip(&values) {
            assert!((o - 9.0 * v).abs() < 1e-12);
        }
    }
}
