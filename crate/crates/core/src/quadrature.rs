//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    abs_value: f64,
    error: f64,
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs_k = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs_k += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Panel {
        a,
        b,
        value: kronrod * h,
        abs_value: abs_k * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Integrates `f` over the union of consecutive intervals given by sorted `breakpoints`.
///
/// Stops when the summed error estimate is at most `rel_tol` times the integral of `|f|`.
pub fn integrate(f: impl Fn(f64) -> f64, breakpoints: &[f64], rel_tol: f64, max_panels: usize) -> Result<Quadrature> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidArgument("need at least two breakpoints".into()));
    }
    let mut panels: Vec<Panel> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let abs_value: f64 = panels.iter().map(|p| p.abs_value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= rel_tol * abs_value || error == 0.0 {
            return Ok(Quadrature {
                value,
                error,
                panels: panels.len(),
            });
        }
        if panels.len() >= max_panels {
            return Err(Error::BudgetExceeded(format!(
                "quadrature error {error:.3e} above tolerance after {} panels",
                panels.len()
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("non-empty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::BudgetExceeded("interval can no longer be bisected".into()));
        }
        panels.push(gk15(&f, p.a, mid));
        panels.push(gk15(&f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x| x.powi(6) - 2.0 * x, &[0.0, 2.0], 1e-12, 10).unwrap();
        assert!((q.value - (128.0 / 7.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let q = integrate(
            |x: f64| (-0.5 * x * x).exp(),
            &[-12.0, -3.0, 0.0, 3.0, 12.0],
            1e-12,
            500,
        )
        .unwrap();
        assert!((q.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn budget_exhaustion_reported() {
        let r = integrate(|x: f64| (1.0 / x).sin(), &[1e-6, 1.0], 1e-14, 4);
        assert!(matches!(r, Err(Error::BudgetExceeded(_))));
    }
}
