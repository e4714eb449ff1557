//! Dormand–Prince 5(4) embedded Runge–Kutta pair with per-component
//! error weights. Small, fixed-size systems only.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order minus embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance<const D: usize> {
    pub rtol: [f64; D],
    pub atol: [f64; D],
}

pub struct DormandPrince<const D: usize, F> {
    rhs: F,
    tol: Tolerance<D>,
    h: f64,
    pub steps: usize,
    pub rejected: usize,
}

fn axpy<const D: usize>(y: &[f64; D], terms: &[(f64, &[f64; D])], h: f64) -> [f64; D] {
    let mut out = *y;
    for (coef, k) in terms {
        for i in 0..D {
            out[i] += h * coef * k[i];
        }
    }
    out
}

impl<const D: usize, F: Fn(f64, &[f64; D]) -> [f64; D]> DormandPrince<D, F> {
    pub fn new(rhs: F, tol: Tolerance<D>, h0: f64) -> Self {
        Self { rhs, tol, h: h0, steps: 0, rejected: 0 }
    }

    /// Advances `y` from `t0` to `t1` (> t0), adapting the step.
    pub fn advance(&mut self, t0: f64, t1: f64, y: &mut [f64; D]) -> Result<()> {
        let mut t = t0;
        let mut k1 = (self.rhs)(t, y);
        while t < t1 {
            let last = t + self.h >= t1;
            let h = if last { t1 - t } else { self.h };
            if h <= 1e-14 * (1.0 + t.abs()) {
                if last && h > 0.0 {
                    // Land on the target exactly; the remainder is rounding.
                    let k = (self.rhs)(t, y);
                    *y = axpy(y, &[(1.0, &k)], h);
                    return Ok(());
                }
                return Err(Error::StepUnderflow { lambda: t });
            }
            let k2 = (self.rhs)(t + C2 * h, &axpy(y, &[(A21, &k1)], h));
            let k3 = (self.rhs)(t + C3 * h, &axpy(y, &[(A31, &k1), (A32, &k2)], h));
            let k4 = (self.rhs)(t + C4 * h, &axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
            let k5 = (self.rhs)(
                t + C5 * h,
                &axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
            );
            let k6 = (self.rhs)(
                t + h,
                &axpy(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h),
            );
            let y_new = axpy(y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
            let k7 = (self.rhs)(t + h, &y_new);

            let mut err_norm = 0.0f64;
            for i in 0..D {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.tol.atol[i] + self.tol.rtol[i] * y[i].abs().max(y_new[i].abs());
                err_norm = err_norm.max((e / scale).abs());
            }
            if !err_norm.is_finite() {
                self.h *= 0.1;
                self.rejected += 1;
                continue;
            }
            let factor = if err_norm == 0.0 { 5.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0) };
            if err_norm <= 1.0 {
                t = if last { t1 } else { t + h };
                *y = y_new;
                k1 = k7;
                self.steps += 1;
                if !last {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor.min(1.0);
                self.rejected += 1;
            }
        }
        Ok(())
    }
}
