//! Globally adaptive 7/15-point Gauss–Kronrod quadrature for complex-valued
//! integrands on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

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
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    /// Integral of |f|, useful for judging cancellation.
    pub abs_integral: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    abs_integral: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_k = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += (f1 + f2) * WGK[j];
        abs_k += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let value = kronrod * half;
    Panel {
        a,
        b,
        value,
        error: ((kronrod - gauss) * half).norm(),
        abs_integral: abs_k * half.abs(),
    }
}

/// Integrates `f` over the union of the consecutive `breakpoints` panels,
/// bisecting the worst panel until the summed error estimate falls below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    if breakpoints.len() < 2 {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            abs_integral: 0.0,
        });
    }
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(&f, w[0], w[1]));
        }
    }
    loop {
        let (value, error, abs_integral) = heap.iter().fold(
            (Complex64::new(0.0, 0.0), 0.0, 0.0),
            |(v, e, s), p| (v + p.value, e + p.error, s + p.abs_integral),
        );
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::Accuracy("non-finite integrand".into()));
        }
        let tol = abs_tol.max(rel_tol * value.norm());
        if error <= tol {
            return Ok(QuadResult { value, error, abs_integral });
        }
        if heap.len() >= max_panels {
            return Err(Error::Accuracy(format!(
                "error estimate {error:.3e} above tolerance {tol:.3e} after {max_panels} panels"
            )));
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Accuracy("panel width underflow".into()));
        }
        heap.push(gk15(&f, worst.a, mid));
        heap.push(gk15(&f, mid, worst.b));
    }
}

/// Evenly spaced breakpoints from `a` to `b` with panels no wider than `width`.
pub fn panels(a: f64, b: f64, width: f64) -> Vec<f64> {
    let n = (((b - a) / width).ceil() as usize).max(1);
    (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| Complex64::new(x * x, 0.0), &[0.0, 1.0], 1e-14, 0.0, 10).unwrap();
        assert!((r.value.re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_gaussian() {
        // ∫_{-8}^{8} e^{-x²/2} e^{ikx} dx = √(2π) e^{-k²/2}
        let k = 3.0;
        let r = integrate(
            |x: f64| Complex64::new(0.0, k * x).exp() * (-0.5 * x * x).exp(),
            &panels(-9.0, 9.0, 1.0),
            1e-13,
            0.0,
            1000,
        )
        .unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * k * k).exp();
        assert!((r.value.re - exact).abs() < 1e-13, "{:?}", r.value);
        assert!(r.value.im.abs() < 1e-13);
    }

    #[test]
    fn reports_failure() {
        let r = integrate(|x: f64| Complex64::new(1.0 / x.abs().sqrt(), 0.0), &[-1.0, 1.0], 1e-15, 0.0, 8);
        assert!(matches!(r, Err(Error::Accuracy(_))));
    }
}
