//! `D_{-c}(iλ)` along the real `λ` line.
//!
//! Two independent evaluation routes:
//!
//! * contour quadrature of `D_{-c}(z) = e^{-z²/4}/Γ(c) ∫_0^∞ e^{-zx - x²/2} x^{c-1} dx`,
//! * integration of the Weber equation `y'' + (c - 1/2 - λ²/4) y = 0`
//!   for `y(λ) = D_{-c}(iλ)`, in amplitude/phase variables.
//!
//! Orders `c ∈ (-1, 0]` go through the recurrence
//! `D_{-c}(z) = z D_{-c-1}(z) + (c+1) D_{-c-2}(z)`.
//!
//! Since `c` is real, `D_{-c}(-iλ) = conj D_{-c}(iλ)`: every routine
//! evaluates at `|λ|` and flips the phase for negative `λ`, so
//! `|D_{-c}(iλ)|²` is even bit for bit.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::gamma::gamma_ln;
use super::ode::{DormandPrince, Tolerance};
use super::quadrature::{integrate, panels};
use crate::error::{Error, Result};

/// Largest order accepted by [`pcf_quadrature`]; above it the Weber
/// integration is the authoritative route.
pub const C_MAX_QUAD: f64 = 60.0;

/// Relative tolerance of the Weber integration.
pub const ODE_RTOL: f64 = 1e-10;

const QUAD_RTOL: f64 = 1e-13;
const MAX_PANELS: usize = 4000;
// Integrands are truncated once they fall this far (in log) below their peak.
const TAIL_DROP: f64 = 50.0;

/// One evaluation of `D_{-c}(iλ)` in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcfEval {
    pub c: f64,
    pub lambda: f64,
    /// `ln |D_{-c}(iλ)|²`
    pub log_abs2: f64,
    /// `arg D_{-c}(iλ)`; only the quadrature route reports it.
    pub phase: Option<f64>,
}

/// Point on a Weber trajectory. The solution and its derivative are stored
/// scaled: `y = e^{log_scale} (y_re + i y_im)`, `y' = e^{log_scale} (dy_re + i dy_im)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeberState {
    pub lambda: f64,
    pub log_scale: f64,
    pub y_re: f64,
    pub y_im: f64,
    pub dy_re: f64,
    pub dy_im: f64,
    /// `θ' = Im(y'/y)`. Carried separately because forming the Wronskian
    /// from the components cancels badly once `|y'/y| ≫ θ'`.
    pub phase_rate: f64,
}

impl WeberState {
    /// Scaled Wronskian `y2' y1 - y2 y1'` (multiply by `e^{2 log_scale}` for the true value).
    pub fn scaled_wronskian(&self) -> f64 {
        self.phase_rate * (self.y_re * self.y_re + self.y_im * self.y_im)
    }

    /// `ln |W|` of the unscaled Wronskian.
    pub fn ln_abs_wronskian(&self) -> f64 {
        2.0 * self.log_scale + self.scaled_wronskian().abs().ln()
    }

    pub fn log_abs2(&self) -> f64 {
        2.0 * self.log_scale + (self.y_re * self.y_re + self.y_im * self.y_im).ln()
    }
}

#[derive(Debug, Clone, Copy)]
struct LogPolar {
    ln_abs: f64,
    arg: f64,
}

impl LogPolar {
    fn to_complex(self) -> Result<Complex64> {
        if self.ln_abs > 709.0 {
            return Err(Error::Domain(format!(
                "|D| = e^{:.1} overflows a double; use the log-form evaluators",
                self.ln_abs
            )));
        }
        Ok(Complex64::from_polar(self.ln_abs.exp(), self.arg))
    }

    fn add(self, other: LogPolar) -> LogPolar {
        if other.ln_abs == f64::NEG_INFINITY {
            return self;
        }
        if self.ln_abs == f64::NEG_INFINITY {
            return other;
        }
        let m = self.ln_abs.max(other.ln_abs);
        let s = Complex64::from_polar((self.ln_abs - m).exp(), self.arg)
            + Complex64::from_polar((other.ln_abs - m).exp(), other.arg);
        LogPolar { ln_abs: m + s.norm().ln(), arg: s.arg() }
    }
}

/// `a ln x` with the convention `0 · ln 0 = 0`.
fn xlogy(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * x.ln()
    }
}

/// `∫_Γ exp(-iλx - x²/2) x^{c-1} dx` for `λ ≥ 0`, `c > 0`.
///
/// The path runs from 0 straight down to `-iλ/2`, then horizontally to
/// `+∞ - iλ/2`. The vertical leg carries a real integrand; the horizontal
/// leg crosses the saddle of the exponent where its phase is stationary, so
/// neither leg suffers the `e^{λ²/4}`-scale cancellation of the real axis.
fn contour_integral(c: f64, lambda: f64) -> Result<LogPolar> {
    debug_assert!(c > 0.0 && lambda >= 0.0);
    let s_turn = 0.5 * lambda;
    let cm1 = c - 1.0;

    // Exponent along the vertical leg x = -is (without the constant phase).
    let psi = |s: f64| -lambda * s + 0.5 * s * s + xlogy(cm1, s);
    // Real part of the exponent along the horizontal leg x = t - iS.
    let re_h = |t: f64| -lambda * s_turn + 0.5 * (s_turn * s_turn - t * t) + 0.5 * xlogy(cm1, t * t + s_turn * s_turn);

    let t_peak = if cm1 > 0.0 { (cm1 - s_turn * s_turn).max(0.0).sqrt() } else { 0.0 };
    let mut scale = f64::NEG_INFINITY;
    if t_peak > 0.0 || s_turn > 0.0 {
        scale = scale.max(re_h(t_peak));
    }
    if c < 1.0 {
        scale = scale.max(0.0);
    }
    let disc = lambda * lambda - 4.0 * cm1;
    if s_turn > 0.0 && cm1 > 0.0 && disc >= 0.0 {
        let s_minus = 0.5 * (lambda - disc.sqrt());
        if s_minus > 0.0 && s_minus < s_turn {
            scale = scale.max(psi(s_minus));
        }
    }
    if !scale.is_finite() {
        // c = 1, λ = 0: integrand e^{-x²/2}, peak 1 at the origin.
        scale = 0.0;
    }

    // Vertical leg: real, positive integrand.
    let mut vertical = 0.0;
    let mut vertical_abs = 0.0;
    if s_turn > 0.0 {
        let mut lower = 0.0;
        if c < 1.0 {
            // s = u^{1/c} absorbs the s^{c-1} endpoint singularity.
            let s1 = s_turn.min(1.0);
            let inv_c = 1.0 / c;
            let r = integrate(
                |u: f64| {
                    let s = u.powf(inv_c);
                    Complex64::new(inv_c * (-lambda * s + 0.5 * s * s - scale).exp(), 0.0)
                },
                &panels(0.0, s1.powf(c), 0.125),
                QUAD_RTOL,
                0.0,
                MAX_PANELS,
            )?;
            vertical += r.value.re;
            vertical_abs += r.abs_integral;
            lower = s1;
        }
        if s_turn > lower {
            let mut bp = panels(lower, s_turn, (s_turn - lower) / 8.0);
            if cm1 > 0.0 && disc >= 0.0 {
                let s_minus = 0.5 * (lambda - disc.sqrt());
                if s_minus > lower && s_minus < s_turn {
                    bp.push(s_minus);
                    bp.sort_by(f64::total_cmp);
                }
            }
            let r = integrate(
                |s: f64| Complex64::new((psi(s) - scale).exp(), 0.0),
                &bp,
                QUAD_RTOL,
                0.0,
                MAX_PANELS,
            )?;
            vertical += r.value.re;
            vertical_abs += r.abs_integral;
        }
    }
    // dx = -i ds and x^{c-1} = s^{c-1} e^{-iπ(c-1)/2}.
    let vertical = Complex64::from_polar(vertical, -FRAC_PI_2 * c);

    // Horizontal leg.
    let mut t_end = t_peak + 10.0;
    while re_h(t_end) - scale > -TAIL_DROP {
        t_end += 5.0;
    }
    let mut horizontal = Complex64::new(0.0, 0.0);
    let mut t_start = 0.0;
    if s_turn == 0.0 && c < 1.0 {
        let inv_c = 1.0 / c;
        let r = integrate(
            |u: f64| {
                let t = u.powf(inv_c);
                Complex64::new(inv_c * (-0.5 * t * t - scale).exp(), 0.0)
            },
            &panels(0.0, 1.0, 0.125),
            QUAD_RTOL,
            0.0,
            MAX_PANELS,
        )?;
        horizontal += r.value;
        t_start = 1.0;
    }
    let mut bp = panels(t_start, t_end, 0.5);
    if t_peak > t_start && t_peak < t_end {
        bp.push(t_peak);
        bp.sort_by(f64::total_cmp);
        bp.dedup();
    }
    let abs_floor = 1e-14 * (vertical_abs + horizontal.norm());
    let r = integrate(
        |t: f64| {
            let x = Complex64::new(t, -s_turn);
            if x.re == 0.0 && x.im == 0.0 {
                return Complex64::new(if cm1 == 0.0 { (-scale).exp() } else { 0.0 }, 0.0);
            }
            let expo = Complex64::new(0.0, -lambda) * x - 0.5 * x * x + cm1 * x.ln() - scale;
            expo.exp()
        },
        &bp,
        QUAD_RTOL,
        abs_floor,
        MAX_PANELS,
    )?;
    horizontal += r.value;

    let total = vertical + horizontal;
    let mag = total.norm();
    if !(mag > 0.0) || !mag.is_finite() {
        return Err(Error::Accuracy(format!("contour integral vanished for c = {c}, λ = {lambda}")));
    }
    Ok(LogPolar { ln_abs: scale + mag.ln(), arg: total.arg() })
}

/// `ln ∫_0^∞ x^{ν-1} e^{-x²/2} dx`, computed by quadrature with the peak factored out.
fn ln_origin_moment(nu: f64) -> Result<f64> {
    Ok(contour_integral(nu, 0.0)?.ln_abs)
}

fn quadrature_log_polar(c: f64, lambda: f64) -> Result<LogPolar> {
    let l = lambda.abs();
    let j = contour_integral(c, l)?;
    let ln_abs = 0.25 * l * l - gamma_ln(c)? + j.ln_abs;
    let arg = if lambda < 0.0 { -j.arg } else { j.arg };
    Ok(LogPolar { ln_abs, arg })
}

fn check_finite(lambda: f64) -> Result<()> {
    if lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("λ must be finite, got {lambda}")))
    }
}

/// `D_{-c}(iλ)` by quadrature of the integral representation, `0 < c ≤ C_MAX_QUAD`.
pub fn pcf_quadrature(c: f64, lambda: f64) -> Result<Complex64> {
    pcf_quadrature_eval(c, lambda).and_then(|e| {
        LogPolar { ln_abs: 0.5 * e.log_abs2, arg: e.phase.unwrap_or(0.0) }.to_complex()
    })
}

/// Log-form variant of [`pcf_quadrature`], safe from overflow.
pub fn pcf_quadrature_eval(c: f64, lambda: f64) -> Result<PcfEval> {
    if !(c > 0.0) || c > C_MAX_QUAD {
        return Err(Error::Domain(format!("quadrature route needs 0 < c ≤ {C_MAX_QUAD}, got {c}")));
    }
    check_finite(lambda)?;
    let lp = quadrature_log_polar(c, lambda)?;
    Ok(PcfEval { c, lambda, log_abs2: 2.0 * lp.ln_abs, phase: Some(lp.arg) })
}

fn negative_order_log_polar(c: f64, lambda: f64) -> Result<LogPolar> {
    let l = lambda.abs();
    let d1 = quadrature_log_polar(c + 1.0, l)?;
    let d2 = quadrature_log_polar(c + 2.0, l)?;
    let first = if l > 0.0 {
        LogPolar { ln_abs: l.ln() + d1.ln_abs, arg: d1.arg + FRAC_PI_2 }
    } else {
        LogPolar { ln_abs: f64::NEG_INFINITY, arg: 0.0 }
    };
    let second = LogPolar { ln_abs: (c + 1.0).ln() + d2.ln_abs, arg: d2.arg };
    let sum = first.add(second);
    let arg = if lambda < 0.0 { -sum.arg } else { sum.arg };
    Ok(LogPolar { ln_abs: sum.ln_abs, arg })
}

/// `D_{-c}(iλ)` for `c ∈ (-1, 0]` through the three-term recurrence.
pub fn pcf_negative_order(c: f64, lambda: f64) -> Result<Complex64> {
    if !(c > -1.0 && c <= 0.0) {
        return Err(Error::Domain(format!("negative-order route needs -1 < c ≤ 0, got {c}")));
    }
    check_finite(lambda)?;
    negative_order_log_polar(c, lambda)?.to_complex()
}

/// Initial data of the Weber trajectory at λ = 0: `ln y(0)` (y(0) is real
/// and positive) and `κ = Im y'(0) / y(0)` (`Re y'(0) = 0`).
fn weber_start(c: f64) -> Result<(f64, f64)> {
    if c > 0.0 {
        // y(0) = I(c)/Γ(c), y'(0) = -i I(c+1)/Γ(c), I(ν) = ∫ x^{ν-1} e^{-x²/2}.
        let i0 = ln_origin_moment(c)?;
        let i1 = ln_origin_moment(c + 1.0)?;
        Ok((i0 - gamma_ln(c)?, -(i1 - i0).exp()))
    } else if c > -1.0 {
        // y(0) = (c+1) D_{-c-2}(0),  y'(0) = i D_{-c-1}(0) + (c+1) d/dλ D_{-c-2}(iλ)|_0.
        let g2 = gamma_ln(c + 2.0)?;
        let y0 = (c + 1.0).ln() + ln_origin_moment(c + 2.0)? - g2;
        let d1 = (ln_origin_moment(c + 1.0)? - gamma_ln(c + 1.0)?).exp();
        let dd2 = -(c + 1.0) * (ln_origin_moment(c + 3.0)? - g2).exp();
        Ok((y0, (d1 + dd2) / y0.exp()))
    } else {
        Err(Error::Domain(format!("Weber route needs c > -1, got {c}")))
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    match grid.first() {
        Some(&x) if x == 0.0 => {}
        _ => return Err(Error::Domain("λ grid must start at 0".into())),
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("λ grid must be finite and strictly ascending".into()));
    }
    Ok(())
}

/// Integrates the Weber equation along `grid` (ascending, starting at 0).
///
/// With `y = A e^{iθ}` the state is `(ln A, (ln A)', θ, ω/κ)`, `ω = θ'`:
///
/// ```text
/// (ln A)'' = -((ln A)')² + ω² - q(λ),   q = c - 1/2 - λ²/4
/// θ' = ω,   ω' = -2 (ln A)' ω
/// ```
///
/// which is the linear equation rewritten so `|y|² ~ e^{λ²/2}` never
/// overflows. `A² ω` is the Wronskian; nothing in the scheme enforces its
/// constancy, so its drift measures the integration error.
pub fn weber_trajectory(c: f64, grid: &[f64]) -> Result<Vec<WeberState>> {
    if !(c > -1.0) || !c.is_finite() {
        return Err(Error::Domain(format!("Weber route needs c > -1, got {c}")));
    }
    validate_grid(grid)?;
    let (ln_y0, kappa) = weber_start(c)?;
    let rhs = move |lam: f64, s: &[f64; 4]| {
        let q = c - 0.5 - 0.25 * lam * lam;
        let w = kappa * s[3];
        [s[1], -s[1] * s[1] + w * w - q, w, -2.0 * s[1] * s[3]]
    };
    // An absolute error in ln A or θ is a relative error in y.
    let tol = Tolerance {
        rtol: [0.0, 0.0, 0.0, ODE_RTOL],
        atol: [ODE_RTOL, ODE_RTOL, ODE_RTOL, 1e-250],
    };
    let mut solver = DormandPrince::new(rhs, tol, 0.01);
    let mut state = [ln_y0, 0.0, 0.0, 1.0];
    let mut out = Vec::with_capacity(grid.len());
    let mut prev = 0.0;
    for &lam in grid {
        if lam > prev {
            solver.advance(prev, lam, &mut state)?;
            prev = lam;
        }
        let [a, b, theta, w_hat] = state;
        let w = kappa * w_hat;
        let (sin, cos) = theta.sin_cos();
        out.push(WeberState {
            lambda: lam,
            log_scale: a,
            y_re: cos,
            y_im: sin,
            dy_re: b * cos - w * sin,
            dy_im: b * sin + w * cos,
            phase_rate: w,
        });
    }
    Ok(out)
}

/// `ln |D_{-c}(iλ)|²` on an ascending grid starting at 0, by Weber integration.
pub fn pcf_weber_ode(c: f64, grid: &[f64]) -> Result<Vec<PcfEval>> {
    Ok(weber_trajectory(c, grid)?
        .into_iter()
        .map(|s| PcfEval { c, lambda: s.lambda, log_abs2: 2.0 * s.log_scale, phase: None })
        .collect())
}

/// `ln |D_{-c}(iλ)|²` for any `c > -1`, picking the route by order:
/// recurrence for `c ≤ 0`, quadrature up to [`C_MAX_QUAD`], Weber above.
pub fn ln_abs2(c: f64, lambda: f64) -> Result<f64> {
    check_finite(lambda)?;
    if !(c > -1.0) || !c.is_finite() {
        return Err(Error::Domain(format!("order c must exceed -1, got {c}")));
    }
    if c <= 0.0 {
        Ok(2.0 * negative_order_log_polar(c, lambda)?.ln_abs)
    } else if c <= C_MAX_QUAD {
        Ok(2.0 * quadrature_log_polar(c, lambda)?.ln_abs)
    } else {
        let l = lambda.abs();
        let grid: &[f64] = if l > 0.0 { &[0.0, l] } else { &[0.0] };
        Ok(pcf_weber_ode(c, grid)?.last().expect("non-empty grid").log_abs2)
    }
}

/// [`ln_abs2`] over many points; the Weber route integrates once over the sorted `|λ|`.
pub fn ln_abs2_many(c: f64, lambdas: &[f64]) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    if c > C_MAX_QUAD {
        lambdas.iter().try_for_each(|&l| check_finite(l))?;
        let mut grid: Vec<f64> = lambdas.iter().map(|l| l.abs()).collect();
        grid.push(0.0);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let evals = pcf_weber_ode(c, &grid)?;
        Ok(lambdas
            .iter()
            .map(|l| {
                let idx = grid.binary_search_by(|g| g.total_cmp(&l.abs())).expect("grid holds every |λ|");
                evals[idx].log_abs2
            })
            .collect())
    } else {
        lambdas.par_iter().map(|&l| ln_abs2(c, l)).collect()
    }
}

/// `|W| = √(π/2)/Γ(c)` for `c > 0`: the Wronskian fixed by the normalisation of `ρ_c`.
pub fn ln_abs_wronskian_exact(c: f64) -> Result<f64> {
    Ok(0.5 * (0.5 * PI).ln() - gamma_ln(c)?)
}
