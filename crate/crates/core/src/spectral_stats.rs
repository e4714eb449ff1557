//! Statistics over recorded spectra: histograms, unfolded nearest-neighbour
//! spacings, the Wigner surmise, Kolmogorov–Smirnov distances and moments.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::density::{linspace, DensityCurve, DensityModel};
use crate::error::{Error, Result};
use crate::special_fn::gamma_ln;

/// One recorded spectrum, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub t: f64,
    pub lambdas: Vec<f64>,
}

impl SpectrumSample {
    pub fn is_sorted(&self) -> bool {
        self.lambdas.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Unfolded spacings rescaled to unit mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingSet {
    pub spacings: Vec<f64>,
    /// Non-positive raw spacings that were discarded.
    pub dropped: usize,
    pub bulk_fraction: f64,
    pub n_samples: usize,
}

/// Bin counts over `[lo, hi)` with left-closed bins (the last bin also takes `hi`).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    /// Values outside the range.
    pub outside: u64,
}

impl Histogram {
    pub fn from_values<'a, I: IntoIterator<Item = &'a f64>>(values: I, bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins < 2 || !(hi > lo) {
            return Err(Error::Domain(format!("histogram needs ≥ 2 bins and lo < hi, got {bins} bins on [{lo}, {hi}]")));
        }
        let mut counts = vec![0u64; bins];
        let mut outside = 0;
        let width = (hi - lo) / bins as f64;
        for &v in values {
            if v < lo || v > hi || v.is_nan() {
                outside += 1;
                continue;
            }
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Self { lo, hi, counts, outside })
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.counts.len()).map(|k| self.lo + (k as f64 + 0.5) * w).collect()
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Densities normalised so that `Σ value · width = 1`.
    pub fn densities(&self) -> Vec<f64> {
        let norm = self.in_range() as f64 * self.bin_width();
        self.counts.iter().map(|&c| if norm > 0.0 { c as f64 / norm } else { 0.0 }).collect()
    }

    pub fn to_curve(&self) -> Result<DensityCurve> {
        DensityCurve::new(self.centers(), self.densities())
    }

    /// Pearson χ² against a reference CDF, pooling only bins with at least
    /// `min_expected` expected counts. Returns `(χ², degrees of freedom)`.
    pub fn chi_square<F: Fn(f64) -> f64>(&self, cdf: F, min_expected: f64) -> (f64, usize) {
        let n = self.in_range() as f64;
        let mass = cdf(self.hi) - cdf(self.lo);
        let w = self.bin_width();
        let mut chi2 = 0.0;
        let mut used: usize = 0;
        for (k, &obs) in self.counts.iter().enumerate() {
            let a = self.lo + k as f64 * w;
            let expected = n * (cdf(a + w) - cdf(a)) / mass;
            if expected >= min_expected {
                chi2 += (obs as f64 - expected).powi(2) / expected;
                used += 1;
            }
        }
        (chi2, used.saturating_sub(1))
    }
}

/// Density-normalised histogram of all eigenvalues in `samples`, as a curve on the bin centres.
pub fn histogram(samples: &[SpectrumSample], bins: usize, range: (f64, f64)) -> Result<DensityCurve> {
    if samples.iter().all(|s| s.lambdas.is_empty()) {
        return Err(Error::EmptySample);
    }
    let h = Histogram::from_values(samples.iter().flat_map(|s| s.lambdas.iter()), bins, range.0, range.1)?;
    if h.in_range() == 0 {
        return Err(Error::EmptySample);
    }
    h.to_curve()
}

pub fn pooled(samples: &[SpectrumSample]) -> Vec<f64> {
    let mut v: Vec<f64> = samples.iter().flat_map(|s| s.lambdas.iter().copied()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Index range `[lo, hi)` of the central `bulk_fraction` of `n` levels.
pub fn bulk_range(n: usize, bulk_fraction: f64) -> (usize, usize) {
    let lo = ((n as f64) * (1.0 - bulk_fraction) / 2.0).round() as usize;
    (lo.min(n / 2), n - lo.min(n / 2))
}

/// Nearest-neighbour spacings of the central `bulk_fraction` of each
/// spectrum, unfolded by the local mean spacing `1/(N ρ(midpoint))` of
/// `unfold` (raw spacings when `None`) and rescaled to unit mean.
pub fn nns(samples: &[SpectrumSample], bulk_fraction: f64, unfold: Option<&DensityModel>) -> Result<SpacingSet> {
    if !(bulk_fraction > 0.0 && bulk_fraction <= 1.0) {
        return Err(Error::Domain(format!("bulk fraction must lie in (0, 1], got {bulk_fraction}")));
    }
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = samples[0].lambdas.len();
    if n < 4 || samples.iter().any(|s| s.lambdas.len() != n) {
        return Err(Error::Domain("spacing statistics need ≥ 4 levels per sample and equal sizes".into()));
    }
    let (lo, hi) = bulk_range(n, bulk_fraction);
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        xmin = xmin.min(s.lambdas[lo]);
        xmax = xmax.max(s.lambdas[hi - 1]);
    }
    let pad = 1e-9 * (1.0 + xmax.abs().max(xmin.abs()));
    let curve = match unfold {
        Some(model) => Some(model.curve(&linspace(xmin - pad, xmax + pad, 4001))?),
        None => None,
    };

    let mut raw = Vec::with_capacity(samples.len() * (hi - lo));
    let mut dropped = 0;
    for s in samples {
        for w in s.lambdas[lo..hi].windows(2) {
            let gap = w[1] - w[0];
            if gap <= 0.0 {
                dropped += 1;
                continue;
            }
            let local = curve.as_ref().map_or(1.0, |c| c.interpolate(0.5 * (w[0] + w[1])) * n as f64);
            raw.push(gap * local);
        }
    }
    if raw.is_empty() {
        return Err(Error::EmptySample);
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let spacings = raw.into_iter().map(|s| s / mean).collect();
    Ok(SpacingSet { spacings, dropped, bulk_fraction, n_samples: samples.len() })
}

/// Constants `(a_β, b_β)` of the surmise `a s^β e^{-b s²}` with unit mass and unit mean.
pub fn surmise_constants(beta: f64) -> Result<(f64, f64)> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("Wigner surmise needs β > 0, got {beta}")));
    }
    let g1 = gamma_ln(0.5 * (beta + 1.0))?;
    let g2 = gamma_ln(0.5 * (beta + 2.0))?;
    let b = (2.0 * (g2 - g1)).exp();
    let a = 2.0 * (0.5 * (beta + 1.0) * b.ln() - g1).exp();
    Ok((a, b))
}

pub fn wigner_surmise(beta: f64, s: f64) -> Result<f64> {
    let (a, b) = surmise_constants(beta)?;
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(a * s.powf(beta) * (-b * s * s).exp())
}

/// CDF of the surmise: the regularised lower incomplete gamma `P((β+1)/2, b s²)`.
pub fn wigner_surmise_cdf(beta: f64, s: f64) -> Result<f64> {
    let (_, b) = surmise_constants(beta)?;
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(statrs::function::gamma::gamma_lr(0.5 * (beta + 1.0), b * s * s))
}

/// One-sample Kolmogorov–Smirnov statistic of sorted `data` against `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> f64 {
    debug_assert!(data.windows(2).all(|w| w[0] <= w[1]), "ks_distance expects sorted data");
    let n = data.len() as f64;
    data.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    /// `|a - b|` in units of the combined standard error.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        (self.value - other.value).abs() / self.std_error.hypot(other.std_error)
    }
}

/// Delete-one-block jackknife of a ratio of sums `Σ num / Σ den`.
fn jackknife_ratio(num: &[f64], den: &[f64], blocks: usize) -> Estimate {
    let m = num.len();
    let blocks = blocks.clamp(1, m.max(1));
    let total_n: f64 = num.iter().sum();
    let total_d: f64 = den.iter().sum();
    let value = total_n / total_d;
    if blocks < 2 {
        return Estimate { value, std_error: f64::NAN };
    }
    let mut leave_out = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let (s, e) = (b * m / blocks, (b + 1) * m / blocks);
        let bn: f64 = num[s..e].iter().sum();
        let bd: f64 = den[s..e].iter().sum();
        leave_out.push((total_n - bn) / (total_d - bd));
    }
    let mean = leave_out.iter().sum::<f64>() / blocks as f64;
    let var = leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (blocks - 1) as f64 / blocks as f64;
    Estimate { value, std_error: var.sqrt() }
}

/// Default number of jackknife blocks: contiguous groups of samples, so
/// correlation between neighbouring samples is absorbed into each block.
pub const JACKKNIFE_BLOCKS: usize = 50;

/// Pooled `k`-th moment of all eigenvalues with a blocked jackknife error.
pub fn moment(samples: &[SpectrumSample], k: i32) -> Result<Estimate> {
    moment_blocked(samples, k, JACKKNIFE_BLOCKS)
}

pub fn moment_blocked(samples: &[SpectrumSample], k: i32, blocks: usize) -> Result<Estimate> {
    if k < 1 {
        return Err(Error::Domain(format!("moment order must be ≥ 1, got {k}")));
    }
    if samples.is_empty() || samples.iter().all(|s| s.lambdas.is_empty()) {
        return Err(Error::EmptySample);
    }
    let num: Vec<f64> = samples.iter().map(|s| s.lambdas.iter().map(|x| x.powi(k)).sum()).collect();
    let den: Vec<f64> = samples.iter().map(|s| s.lambdas.len() as f64).collect();
    Ok(jackknife_ratio(&num, &den, blocks))
}

/// Mean of arbitrary per-sample scalars with a blocked jackknife error.
pub fn mean_estimate(values: &[f64], blocks: usize) -> Estimate {
    let ones = vec![1.0; values.len()];
    jackknife_ratio(values, &ones, blocks)
}

/// Maximum-likelihood exponent `k` of a density `∝ s^k` restricted to
/// `[lo, hi]`, fitted to the spacings falling in that window.
pub fn small_spacing_exponent(spacings: &[f64], lo: f64, hi: f64) -> Result<Estimate> {
    let logs: Vec<f64> = spacings.iter().filter(|&&s| s >= lo && s <= hi).map(|s| s.ln()).collect();
    if logs.len() < 10 {
        return Err(Error::EmptySample);
    }
    let mean_log = logs.iter().sum::<f64>() / logs.len() as f64;
    let (la, lb) = (lo.ln(), hi.ln());
    // Mean of ln s under the truncated power law, increasing in k.
    let expected = |k: f64| {
        let e = k + 1.0;
        if e.abs() < 1e-10 {
            return 0.5 * (la + lb);
        }
        let (ta, tb) = ((e * la).exp(), (e * lb).exp());
        (tb * lb - ta * la) / (tb - ta) - 1.0 / e
    };
    let (mut a, mut b) = (-0.99, 20.0);
    if !(expected(a) < mean_log && expected(b) > mean_log) {
        return Err(Error::Domain("power-law exponent outside (-0.99, 20)".into()));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if expected(m) < mean_log {
            a = m;
        } else {
            b = m;
        }
    }
    let k = 0.5 * (a + b);
    // Fisher information is the variance of ln s under the fitted law.
    let h = 1e-4;
    let var_log = (expected(k + h) - expected(k - h)) / (2.0 * h);
    Ok(Estimate { value: k, std_error: 1.0 / (var_log * logs.len() as f64).sqrt() })
}

/// NNSD table: `s, p_empirical, p_reference` (reference empty when absent).
pub fn write_nnsd_csv<W: Write>(mut out: W, hist: &Histogram, reference: Option<&dyn Fn(f64) -> f64>) -> Result<()> {
    writeln!(out, "s,p_empirical,p_reference")?;
    for (s, p) in hist.centers().iter().zip(hist.densities()) {
        match reference {
            Some(f) => writeln!(out, "{s},{p},{}", f(*s))?,
            None => writeln!(out, "{s},{p},")?,
        }
    }
    Ok(())
}

pub fn write_spacings_csv<W: Write>(mut out: W, set: &SpacingSet) -> Result<()> {
    writeln!(out, "s")?;
    for s in &set.spacings {
        writeln!(out, "{s}")?;
    }
    Ok(())
}
