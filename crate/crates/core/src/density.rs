//! Closed-form spectral densities and their Stieltjes transforms.
//!
//! * Gaussian of rms `σ` (the `c = 0` endpoint),
//! * Wigner semicircle with edges at `±σ√(2βN)`,
//! * the crossover family `ρ_c(x) = 1 / (√(2π) Γ(1+c) |D_{-c}(ix)|²)`,
//! * the finite-N corrected density `√α ρ_c(√α x)` with `α = 2/(2-β)`,
//!   `c = βN/(2-β)`, rescaled by `σ`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::{gamma_ln, ln_abs2, ln_abs2_many};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Grid points used by [`DensityModel::default_grid`].
pub const DEFAULT_GRID_POINTS: usize = 2001;

pub fn eval_gaussian(sigma: f64, lambda: f64) -> f64 {
    let x = lambda / sigma;
    (-0.5 * x * x).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Semicircle of radius `σ√(2βN)`; zero outside the support.
pub fn eval_semicircle(beta: f64, n_dim: usize, sigma: f64, lambda: f64) -> f64 {
    let r2 = 2.0 * beta * sigma * sigma * n_dim as f64;
    let inside = r2 - lambda * lambda;
    if inside <= 0.0 {
        0.0
    } else {
        inside.sqrt() / (PI * beta * sigma * sigma * n_dim as f64)
    }
}

/// `ln ρ_c(λ)`.
pub fn ln_eval_kerov(c: f64, lambda: f64) -> Result<f64> {
    Ok(-ln_abs2(c, lambda)? - gamma_ln(1.0 + c)? - LN_SQRT_2PI)
}

/// The crossover density `ρ_c(λ)` for `c > -1`.
pub fn eval_kerov(c: f64, lambda: f64) -> Result<f64> {
    ln_eval_kerov(c, lambda).map(f64::exp)
}

/// `α = 2/(2-β)` and `c = βN/(2-β)` of the corrected density.
pub fn corrected_params(beta: f64, n_dim: usize) -> Result<(f64, f64)> {
    if !(0.0..2.0).contains(&beta) || n_dim == 0 {
        return Err(Error::Domain(format!("corrected density needs 0 ≤ β < 2 and N ≥ 1, got β={beta}, N={n_dim}")));
    }
    Ok((2.0 / (2.0 - beta), beta * n_dim as f64 / (2.0 - beta)))
}

pub fn ln_eval_corrected(beta: f64, n_dim: usize, sigma: f64, lambda: f64) -> Result<f64> {
    let (alpha, c) = corrected_params(beta, n_dim)?;
    let x = alpha.sqrt() * lambda / sigma;
    Ok(0.5 * alpha.ln() - sigma.ln() + ln_eval_kerov(c, x)?)
}

/// Finite-N corrected semicircle. `β = 0` reduces to the Gaussian of rms `σ`.
pub fn eval_corrected(beta: f64, n_dim: usize, sigma: f64, lambda: f64) -> Result<f64> {
    ln_eval_corrected(beta, n_dim, sigma, lambda).map(f64::exp)
}

/// Even moments `m_2 = 1 + c`, `m_4 = (1 + c)(2c + 3)` of `ρ_c`.
///
/// Substituting `G = -Σ m_k z^{-k-1}` into `c G² + z G + G' = -1` and matching
/// the coefficient of `z^{-(k+2)}` gives
/// `m_{k+2} = (k+1) m_k + c Σ_{i+j=k} m_i m_j`, which extends this if needed.
pub fn kerov_moment(c: f64, k: u32) -> Result<f64> {
    match k {
        2 => Ok(1.0 + c),
        4 => Ok((1.0 + c) * (2.0 * c + 3.0)),
        _ => Err(Error::Domain(format!("only moments k = 2 and k = 4 are provided, got {k}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityModel {
    Gaussian { sigma: f64 },
    Semicircle { beta: f64, n_dim: usize, sigma: f64 },
    Kerov { c: f64 },
    Corrected { beta: f64, n_dim: usize, sigma: f64 },
}

impl DensityModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        match *self {
            DensityModel::Gaussian { sigma } if !(sigma > 0.0) => bad(format!("σ must be positive, got {sigma}")),
            DensityModel::Semicircle { beta, n_dim, sigma } if !(beta > 0.0 && beta <= 2.0 && n_dim > 0 && sigma > 0.0) => {
                bad(format!("semicircle needs 0 < β ≤ 2, N ≥ 1, σ > 0 (β={beta}, N={n_dim}, σ={sigma})"))
            }
            DensityModel::Kerov { c } if !(c > -1.0 && c.is_finite()) => bad(format!("c must exceed -1, got {c}")),
            DensityModel::Corrected { beta, n_dim, sigma } => {
                if !(sigma > 0.0) {
                    return bad(format!("σ must be positive, got {sigma}"));
                }
                corrected_params(beta, n_dim).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, lambda: f64) -> Result<f64> {
        match *self {
            DensityModel::Gaussian { sigma } => Ok(eval_gaussian(sigma, lambda)),
            DensityModel::Semicircle { beta, n_dim, sigma } => Ok(eval_semicircle(beta, n_dim, sigma, lambda)),
            DensityModel::Kerov { c } => eval_kerov(c, lambda),
            DensityModel::Corrected { beta, n_dim, sigma } => eval_corrected(beta, n_dim, sigma, lambda),
        }
    }

    /// Half-width `L` of the default grid `[-L, L]`.
    pub fn half_width(&self) -> f64 {
        let crossover = |c: f64| 10f64.max(4.0 * (1.0 + c).sqrt());
        match *self {
            DensityModel::Gaussian { sigma } => 10.0 * sigma,
            DensityModel::Semicircle { beta, n_dim, sigma } => sigma * (2.0 * beta * n_dim as f64).sqrt(),
            DensityModel::Kerov { c } => crossover(c),
            DensityModel::Corrected { beta, n_dim, sigma } => {
                let (alpha, c) = corrected_params(beta, n_dim).unwrap_or((1.0, 0.0));
                sigma * crossover(c) / alpha.sqrt()
            }
        }
    }

    pub fn default_grid(&self) -> Vec<f64> {
        let l = self.half_width();
        linspace(-l, l, DEFAULT_GRID_POINTS)
    }

    /// Evaluates the density on `grid`, batching the special-function work.
    pub fn curve(&self, grid: &[f64]) -> Result<DensityCurve> {
        self.validate()?;
        let values = match *self {
            DensityModel::Kerov { c } => {
                let norm = gamma_ln(1.0 + c)? + LN_SQRT_2PI;
                ln_abs2_many(c, grid)?.into_iter().map(|l| (-l - norm).exp()).collect()
            }
            DensityModel::Corrected { beta, n_dim, sigma } => {
                let (alpha, c) = corrected_params(beta, n_dim)?;
                let scaled: Vec<f64> = grid.iter().map(|l| alpha.sqrt() * l / sigma).collect();
                let norm = gamma_ln(1.0 + c)? + LN_SQRT_2PI - 0.5 * alpha.ln() + sigma.ln();
                ln_abs2_many(c, &scaled)?.into_iter().map(|l| (-l - norm).exp()).collect()
            }
            _ => grid.iter().map(|&l| self.eval(l)).collect::<Result<Vec<_>>>()?,
        };
        DensityCurve::new(grid.to_vec(), values)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// A density tabulated on an ascending grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub lambda_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityCurve {
    pub fn new(lambda_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if lambda_grid.len() != values.len() || lambda_grid.len() < 2 {
            return Err(Error::Domain("density curve needs ≥ 2 points and matching lengths".into()));
        }
        if lambda_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("density grid must be strictly ascending".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("density values must be finite and non-negative".into()));
        }
        Ok(Self { lambda_grid, values })
    }

    /// Trapezoid rule for `∫ f(λ) ρ(λ) dλ` over the grid.
    pub fn integrate_with<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.lambda_grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (f(x[0]) * y[0] + f(x[1]) * y[1]))
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.integrate_with(|_| 1.0)
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.integrate_with(|x| x.powi(k))
    }

    /// Cumulative distribution by cumulative trapezoid, normalised to end at 1.
    pub fn cdf(&self) -> CurveCdf {
        let mut cum = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for (x, y) in self.lambda_grid.windows(2).zip(self.values.windows(2)) {
            acc += 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
            cum.push(acc);
        }
        for v in &mut cum {
            *v /= acc;
        }
        CurveCdf { grid: self.lambda_grid.clone(), cum }
    }

    /// Linear interpolation, zero outside the grid.
    pub fn interpolate(&self, lambda: f64) -> f64 {
        let g = &self.lambda_grid;
        if lambda < g[0] || lambda > g[g.len() - 1] {
            return 0.0;
        }
        let i = g.partition_point(|&x| x <= lambda).clamp(1, g.len() - 1);
        let t = (lambda - g[i - 1]) / (g[i] - g[i - 1]);
        self.values[i - 1] + t * (self.values[i] - self.values[i - 1])
    }

    /// Two-column CSV with a `lambda,value` header and LF line endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "lambda,value")?;
        for (x, y) in self.lambda_grid.iter().zip(&self.values) {
            writeln!(out, "{x},{y}")?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", i + 1)))?;
            grid.push(a.trim().parse().map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
            values.push(b.trim().parse().map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
        }
        Self::new(grid, values)
    }
}

/// Piecewise-linear CDF of a [`DensityCurve`].
#[derive(Debug, Clone)]
pub struct CurveCdf {
    grid: Vec<f64>,
    cum: Vec<f64>,
}

impl CurveCdf {
    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return 0.0;
        }
        if x >= g[g.len() - 1] {
            return 1.0;
        }
        let i = g.partition_point(|&v| v <= x).clamp(1, g.len() - 1);
        let t = (x - g[i - 1]) / (g[i] - g[i - 1]);
        self.cum[i - 1] + t * (self.cum[i] - self.cum[i - 1])
    }
}

/// Trapezoid approximation of `∫ ρ(λ) / (λ - z) dλ`.
pub fn stieltjes_numeric(curve: &DensityCurve, z: Complex64) -> Complex64 {
    let g = &curve.lambda_grid;
    let v = &curve.values;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..g.len() - 1 {
        let f0 = v[i] / (g[i] - z);
        let f1 = v[i + 1] / (g[i + 1] - z);
        acc += (f0 + f1) * (0.5 * (g[i + 1] - g[i]));
    }
    acc
}

/// `max |c G² + z G + G' + 1|` over `z_samples`, with `G` from the tabulated
/// curve and `G'` by a centred difference of step `1e-4 |z|`.
pub fn ode_residual(c: f64, curve: &DensityCurve, z_samples: &[Complex64]) -> f64 {
    z_samples
        .iter()
        .map(|&z| {
            let h = 1e-4 * z.norm();
            let g = stieltjes_numeric(curve, z);
            let dg = (stieltjes_numeric(curve, z + h) - stieltjes_numeric(curve, z - h)) / (2.0 * h);
            (c * g * g + z * g + dg + 1.0).norm()
        })
        .fold(0.0, f64::max)
}

/// Tail exponent of `ρ_c`: least-squares fit of
/// `ln[ρ_c(u) e^{u²/2}] = a + k ln u + b / u²` over `u ∈ [8, 12]`, returning `k`.
///
/// The `b/u²` term absorbs the leading correction of
/// `|D_{-c}(iu)|² ~ u^{-2c} e^{u²/2} (1 + c(c+1)/u² + …)`; a bare log-log
/// slope is biased upward by `≈ 2c(c+1)/u²`, i.e. by 0.24 at `c = 3`.
pub fn tail_exponent_check(c: f64) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("tail fit needs c ≥ 0, got {c}")));
    }
    let us = linspace(8.0, 12.0, 33);
    let mut rows = Vec::with_capacity(us.len());
    for &u in &us {
        let y = ln_eval_kerov(c, u)? + 0.5 * u * u;
        rows.push(([1.0, u.ln(), 1.0 / (u * u)], y));
    }
    Ok(least_squares3(&rows)[1])
}

fn least_squares3(rows: &[([f64; 3], f64)]) -> [f64; 3] {
    let mut a = [[0.0; 4]; 3];
    for (x, y) in rows {
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += x[i] * x[j];
            }
            a[i][3] += x[i] * y;
        }
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..4 {
                    a[r][k] -= f * a[col][k];
                }
            }
        }
    }
    [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]]
}
