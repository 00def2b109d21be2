//! Second-order central differences on periodic grids.

use crate::density::GridSpec;

/// Periodic neighbour lookup for a grid.
#[derive(Debug, Clone)]
pub struct Neighbors {
    points: Vec<usize>,
    strides: Vec<usize>,
    spacing: Vec<f64>,
}

impl Neighbors {
    pub fn new(spec: &GridSpec) -> Self {
        Self {
            points: spec.points().to_vec(),
            strides: spec.strides(),
            spacing: (0..spec.dims()).map(|a| spec.spacing(a)).collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    #[inline]
    pub fn plus(&self, flat: usize, axis: usize) -> usize {
        let n = self.points[axis];
        let s = self.strides[axis];
        if (flat / s) % n == n - 1 {
            flat + s - n * s
        } else {
            flat + s
        }
    }

    #[inline]
    pub fn minus(&self, flat: usize, axis: usize) -> usize {
        let n = self.points[axis];
        let s = self.strides[axis];
        if (flat / s).is_multiple_of(n) {
            flat + (n - 1) * s
        } else {
            flat - s
        }
    }
}

/// Central-difference gradient component along `axis`.
pub fn derivative(f: &[f64], spec: &GridSpec, axis: usize) -> Vec<f64> {
    let nb = Neighbors::new(spec);
    let inv = 0.5 / nb.spacing(axis);
    (0..f.len())
        .map(|i| (f[nb.plus(i, axis)] - f[nb.minus(i, axis)]) * inv)
        .collect()
}

/// Squared norm of the central-difference gradient.
pub fn gradient_sq(f: &[f64], spec: &GridSpec) -> Vec<f64> {
    let nb = Neighbors::new(spec);
    (0..f.len())
        .map(|i| {
            (0..nb.dims())
                .map(|a| {
                    let d = (f[nb.plus(i, a)] - f[nb.minus(i, a)]) * 0.5 / nb.spacing(a);
                    d * d
                })
                .sum()
        })
        .collect()
}

/// Three-point Laplacian.
pub fn laplacian(f: &[f64], spec: &GridSpec) -> Vec<f64> {
    let nb = Neighbors::new(spec);
    (0..f.len())
        .map(|i| {
            (0..nb.dims())
                .map(|a| {
                    let h = nb.spacing(a);
                    (f[nb.plus(i, a)] - 2.0 * f[i] + f[nb.minus(i, a)]) / (h * h)
                })
                .sum()
        })
        .collect()
}

/// Central-difference Hessian at one point (row-major `dims x dims`).
pub fn hessian_at(f: &[f64], nb: &Neighbors, i: usize) -> Vec<f64> {
    let n = nb.dims();
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        let ha = nb.spacing(a);
        out[a * n + a] = (f[nb.plus(i, a)] - 2.0 * f[i] + f[nb.minus(i, a)]) / (ha * ha);
        for b in (a + 1)..n {
            let hb = nb.spacing(b);
            let pp = f[nb.plus(nb.plus(i, a), b)];
            let pm = f[nb.minus(nb.plus(i, a), b)];
            let mp = f[nb.plus(nb.minus(i, a), b)];
            let mm = f[nb.minus(nb.minus(i, a), b)];
            let v = (pp - pm - mp + mm) / (4.0 * ha * hb);
            out[a * n + b] = v;
            out[b * n + a] = v;
        }
    }
    out
}

/// Squared Frobenius norm of the central-difference Hessian.
pub fn hessian_frobenius_sq(f: &[f64], spec: &GridSpec) -> Vec<f64> {
    let nb = Neighbors::new(spec);
    (0..f.len())
        .map(|i| hessian_at(f, &nb, i).iter().map(|v| v * v).sum())
        .collect()
}

/// Indices whose Hessian stencil (including diagonal neighbours) touches a masked point.
pub fn stencil_touches(mask: &[bool], spec: &GridSpec) -> Vec<bool> {
    let nb = Neighbors::new(spec);
    let n = nb.dims();
    (0..mask.len())
        .map(|i| {
            if mask[i] {
                return true;
            }
            for a in 0..n {
                let (p, m) = (nb.plus(i, a), nb.minus(i, a));
                if mask[p] || mask[m] {
                    return true;
                }
                for b in (a + 1)..n {
                    if mask[nb.plus(p, b)] || mask[nb.minus(p, b)] || mask[nb.plus(m, b)] || mask[nb.minus(m, b)] {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratics_are_differentiated_exactly() {
        let spec = GridSpec::new(vec![32, 32], vec![2.0, 3.0]).unwrap();
        let f: Vec<f64> = (0..spec.len())
            .map(|i| {
                let x = spec.point(i);
                1.5 * x[0] * x[0] + 0.5 * x[0] * x[1] + 2.0 * x[1] * x[1]
            })
            .collect();
        let lap = laplacian(&f, &spec);
        let frob = hessian_frobenius_sq(&f, &spec);
        let grad = gradient_sq(&f, &spec);
        for i in 0..spec.len() {
            if spec.on_boundary(i) || {
                let idx = spec.unravel(i);
                idx.iter().zip(spec.points()).any(|(&j, &n)| j == 1 || j + 2 == n)
            } {
                continue;
            }
            assert!((lap[i] - 7.0).abs() < 1e-9);
            assert!((frob[i] - (9.0 + 16.0 + 2.0 * 0.25)).abs() < 1e-8);
            let g = grad[i];
            let x = spec.point(i);
            let gx = 3.0 * x[0] + 0.5 * x[1];
            let gy = 0.5 * x[0] + 4.0 * x[1];
            assert!((g - gx * gx - gy * gy).abs() < 1e-8);
        }
    }

    #[test]
    fn periodic_wrap() {
        let spec = GridSpec::new(vec![8, 10], vec![1.0, 1.0]).unwrap();
        let nb = Neighbors::new(&spec);
        assert_eq!(nb.minus(0, 0), 70);
        assert_eq!(nb.minus(0, 1), 9);
        assert_eq!(nb.plus(79, 1), 70);
        assert_eq!(nb.plus(79, 0), 9);
    }

    #[test]
    fn mask_dilation() {
        let spec = GridSpec::cube(1, 8, 1.0).unwrap();
        let mut mask = vec![false; 8];
        mask[0] = true;
        let t = stencil_touches(&mask, &spec);
        assert_eq!(t, vec![true, true, false, false, false, false, false, true]);
    }
}
