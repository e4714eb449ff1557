//! The switched matrix diffusion on real symmetric `N×N` matrices.
//!
//! Time is cut into intervals of length `1/n`. On each interval an
//! independent `ε ~ Bernoulli(p)` selects either a free step
//! `dM = -M/2 dt + dH` (symmetric Brownian `dH`) or a commuting step whose
//! noise is diagonal in the eigenbasis of `M` at the start of the interval.

mod eigh;

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::eigen_sde::steps_per_interval;
use crate::rng::{normal, stream, Role, StreamRng};
use crate::spectral_stats::{ks_distance, mean_estimate, Estimate, SpectrumSample};

pub use eigh::{eigh, eigh_dense, EIGH_TOL, MAX_SWEEPS};

/// Dense symmetric matrix, row-major, with its simulation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrixState {
    pub n: usize,
    pub m: Vec<f64>,
    pub t: f64,
}

impl SymMatrixState {
    pub fn zeros(n: usize) -> Self {
        Self { n, m: vec![0.0; n * n], t: 0.0 }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut s = Self::zeros(n);
        for (i, x) in d.iter().enumerate() {
            s.m[i * n + i] = *x;
        }
        s
    }

    /// Builds a state from row-major entries, symmetrising from the upper triangle.
    pub fn from_upper(n: usize, m: &[f64]) -> Result<Self> {
        if m.len() != n * n {
            return Err(Error::Domain(format!("expected {} entries, got {}", n * n, m.len())));
        }
        let mut s = Self { n, m: m.to_vec(), t: 0.0 };
        for i in 0..n {
            for j in i + 1..n {
                s.m[j * n + i] = s.m[i * n + j];
            }
        }
        Ok(s)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }

    #[inline]
    fn set_sym(&mut self, i: usize, j: usize, x: f64) {
        self.m[i * self.n + j] = x;
        self.m[j * self.n + i] = x;
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn trace_sq(&self) -> f64 {
        self.m.iter().map(|x| x * x).sum()
    }

    /// Binary snapshot: `u64` N, `f64` t, then N² row-major `f64`, all little-endian.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&self.t.to_le_bytes())?;
        for x in &self.m {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self> {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        let n = u64::from_le_bytes(b) as usize;
        if n == 0 || n > 1 << 16 {
            return Err(Error::Parse(format!("implausible matrix size {n} in snapshot")));
        }
        input.read_exact(&mut b)?;
        let t = f64::from_le_bytes(b);
        let mut m = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            input.read_exact(&mut b)?;
            m.push(f64::from_le_bytes(b));
        }
        let s = Self { n, m, t };
        if !s.is_symmetric() {
            return Err(Error::Parse("snapshot matrix is not symmetric".into()));
        }
        Ok(s)
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors stored column-wise
/// (row-major `vectors[k * n + i]` is component `k` of vector `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl EigenSystem {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.vectors[k * self.n + i]).collect()
    }

    /// `V diag(d) Vᵀ`, exactly symmetric.
    pub fn compose(&self, d: &[f64]) -> SymMatrixState {
        let n = self.n;
        let mut s = SymMatrixState::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.vectors[i * n + k] * d[k] * self.vectors[j * n + k];
                }
                s.set_sym(i, j, acc);
            }
        }
        s
    }

    /// `max |VᵀV - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.n;
        let mut worst = 0f64;
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| self.vectors[k * n + i] * self.vectors[k * n + j]).sum();
                worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    /// `max |V D Vᵀ - M|`.
    pub fn reconstruction_error(&self, m: &SymMatrixState) -> f64 {
        let r = self.compose(&self.values);
        r.m.iter().zip(&m.m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Symmetric Brownian increment: diagonal variance σ²dt, off-diagonal σ²dt/2.
/// Row `i` draws entries `j ≥ i` from `rows[i]`.
pub fn brownian_increment(n: usize, dt: f64, sigma: f64, rows: &mut [StreamRng]) -> SymMatrixState {
    let mut dh = SymMatrixState::zeros(n);
    let diag = sigma * dt.sqrt();
    let off = diag * std::f64::consts::FRAC_1_SQRT_2;
    for (i, rng) in rows.iter_mut().enumerate().take(n) {
        dh.m[i * n + i] = diag * normal(rng);
        for j in i + 1..n {
            dh.set_sym(i, j, off * normal(rng));
        }
    }
    dh
}

/// `M ← M - M dt/2 + dH` with a given increment.
pub fn step_free_with(state: &mut SymMatrixState, dt: f64, dh: &SymMatrixState) {
    let n = state.n;
    for i in 0..n {
        for j in i..n {
            let x = state.get(i, j) * (1.0 - 0.5 * dt) + dh.get(i, j);
            state.set_sym(i, j, x);
        }
    }
    state.t += dt;
}

pub fn step_free(state: &mut SymMatrixState, dt: f64, sigma: f64, rows: &mut [StreamRng]) {
    let dh = brownian_increment(state.n, dt, sigma, rows);
    step_free_with(state, dt, &dh);
}

/// `M ← M - M dt/2 + V diag(noise) Vᵀ` with the basis held fixed.
pub fn step_commuting_with(state: &mut SymMatrixState, dt: f64, basis: &EigenSystem, noise: &[f64]) {
    let dy = basis.compose(noise);
    step_free_with(state, dt, &dy);
}

pub fn step_commuting(state: &mut SymMatrixState, dt: f64, sigma: f64, rows: &mut [StreamRng], basis: &EigenSystem) {
    let amp = sigma * dt.sqrt();
    let noise: Vec<f64> = rows.iter_mut().take(state.n).map(|r| amp * normal(r)).collect();
    step_commuting_with(state, dt, basis, &noise);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub n_dim: usize,
    pub p: f64,
    pub switch_rate: u32,
    pub sigma: f64,
    pub dt: f64,
    pub burn_in: f64,
    pub sample_stride: f64,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub replica: u64,
    /// Keep the eigensystem of every recorded sample.
    #[serde(default)]
    pub record_vectors: bool,
}

impl MatrixConfig {
    pub fn new(n_dim: usize, p: f64) -> Self {
        Self {
            n_dim,
            p,
            switch_rate: 100,
            sigma: 1.0,
            dt: 1e-3,
            burn_in: 40.0,
            sample_stride: 1.0,
            n_samples: 1000,
            seed: 0,
            replica: 0,
            record_vectors: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_dim == 0 {
            return bad("n_dim must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1], got {}", self.p));
        }
        if self.switch_rate == 0 {
            return bad("switch_rate must be at least 1".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return bad(format!("burn_in must be non-negative, got {}", self.burn_in));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1".into());
        }
        steps_per_interval(self.switch_rate, self.dt)?;
        self.intervals_for(self.sample_stride, "sample_stride")?;
        Ok(())
    }

    fn intervals_for(&self, span: f64, name: &str) -> Result<u64> {
        let ratio = span * self.switch_rate as f64;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 * k {
            return Err(Error::Config(format!("{name} ({span}) must be a positive multiple of 1/{}", self.switch_rate)));
        }
        Ok(k as u64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCounters {
    pub steps: u64,
    pub intervals: u64,
    pub intervals_on: u64,
    pub diagonalizations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRun {
    pub samples: Vec<SpectrumSample>,
    /// Present when `record_vectors` is set; one per sample.
    pub snapshots: Vec<EigenSystem>,
    pub final_state: SymMatrixState,
    pub counters: MatrixCounters,
}

/// A running switched simulation.
pub struct MatrixSimulator {
    cfg: MatrixConfig,
    state: SymMatrixState,
    rows: Vec<StreamRng>,
    schedule: StreamRng,
    steps_per_interval: u64,
    step_index: u64,
    counters: MatrixCounters,
}

impl MatrixSimulator {
    pub fn new(cfg: &MatrixConfig, start: SymMatrixState) -> Result<Self> {
        cfg.validate()?;
        if start.n != cfg.n_dim || !start.is_symmetric() {
            return Err(Error::Config(format!("initial matrix must be symmetric {0}x{0}", cfg.n_dim)));
        }
        Ok(Self {
            cfg: cfg.clone(),
            state: SymMatrixState { t: 0.0, ..start },
            rows: (0..cfg.n_dim as u64).map(|i| stream(cfg.seed, cfg.replica, Role::MatrixRow, i)).collect(),
            schedule: stream(cfg.seed, cfg.replica, Role::Schedule, 0),
            steps_per_interval: steps_per_interval(cfg.switch_rate, cfg.dt)?,
            step_index: 0,
            counters: MatrixCounters::default(),
        })
    }

    pub fn state(&self) -> &SymMatrixState {
        &self.state
    }

    pub fn counters(&self) -> MatrixCounters {
        self.counters
    }

    /// Runs one switching interval.
    pub fn interval(&mut self) -> Result<()> {
        let on = self.schedule.random::<f64>() < self.cfg.p;
        self.counters.intervals += 1;
        self.counters.intervals_on += on as u64;
        let (dt, sigma) = (self.cfg.dt, self.cfg.sigma);
        if on {
            for _ in 0..self.steps_per_interval {
                step_free(&mut self.state, dt, sigma, &mut self.rows);
                self.advance_clock();
            }
        } else {
            // The drift shares the basis, so the interval reduces to OU
            // steps of the eigenvalues; M is rebuilt at the end.
            let basis = eigh(&self.state)?;
            self.counters.diagonalizations += 1;
            let mut d = basis.values.clone();
            let amp = sigma * dt.sqrt();
            for _ in 0..self.steps_per_interval {
                for (x, r) in d.iter_mut().zip(&mut self.rows) {
                    *x = *x * (1.0 - 0.5 * dt) + amp * normal(r);
                }
                self.advance_clock();
            }
            let t = self.state.t;
            self.state = basis.compose(&d);
            self.state.t = t;
        }
        debug_assert!(self.state.is_symmetric());
        Ok(())
    }

    fn advance_clock(&mut self) {
        self.step_index += 1;
        self.counters.steps += 1;
        self.state.t = self.step_index as f64 * self.cfg.dt;
    }

    pub fn run_intervals(&mut self, k: u64) -> Result<()> {
        for _ in 0..k {
            self.interval()?;
        }
        Ok(())
    }
}

/// Burn-in (rounded to whole intervals), then `n_samples` spectra every `sample_stride`.
pub fn simulate_switched(cfg: &MatrixConfig) -> Result<MatrixRun> {
    simulate_switched_from(cfg, SymMatrixState::zeros(cfg.n_dim))
}

pub fn simulate_switched_from(cfg: &MatrixConfig, start: SymMatrixState) -> Result<MatrixRun> {
    let mut sim = MatrixSimulator::new(cfg, start)?;
    sim.run_intervals((cfg.burn_in * cfg.switch_rate as f64).round() as u64)?;
    let stride = cfg.intervals_for(cfg.sample_stride, "sample_stride")?;
    let mut samples = Vec::with_capacity(cfg.n_samples);
    let mut snapshots = Vec::new();
    for _ in 0..cfg.n_samples {
        sim.run_intervals(stride)?;
        let es = eigh(&sim.state)?;
        sim.counters.diagonalizations += 1;
        samples.push(SpectrumSample { t: sim.state.t, lambdas: es.values.clone() });
        if cfg.record_vectors {
            snapshots.push(es);
        }
    }
    Ok(MatrixRun { samples, snapshots, final_state: sim.state, counters: sim.counters })
}

/// Replicas `cfg.replica ..` in parallel, returned in replica order.
pub fn simulate_replicas(cfg: &MatrixConfig, replicas: u64) -> Result<Vec<MatrixRun>> {
    cfg.validate()?;
    (0..replicas)
        .into_par_iter()
        .map(|r| simulate_switched(&MatrixConfig { replica: cfg.replica + r, ..cfg.clone() }))
        .collect()
}

/// Squared overlaps `(vᵢ·e)²` of eigenvector `index` with the unit vector `direction`.
pub fn haar_overlap_samples(snapshots: &[EigenSystem], direction: &[f64], index: usize) -> Result<Vec<f64>> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("direction must be a unit vector, norm is {norm}")));
    }
    snapshots
        .iter()
        .map(|s| {
            if s.n != direction.len() || index >= s.n {
                return Err(Error::Domain("snapshot size does not match direction or index".into()));
            }
            let dot: f64 = (0..s.n).map(|k| s.vectors[k * s.n + index] * direction[k]).sum();
            Ok(dot * dot)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HaarReport {
    pub mean: Estimate,
    pub expected_mean: f64,
    pub ks: f64,
    pub passed: bool,
}

/// Mean `1/N ± 3·SE` and KS against `Beta(1/2, (N-1)/2)` at `ks_max`.
pub fn haar_test(overlaps: &[f64], n: usize, ks_max: f64) -> Result<HaarReport> {
    if overlaps.len() < 2 {
        return Err(Error::EmptySample);
    }
    if n < 2 {
        return Err(Error::Domain("Haar test needs N ≥ 2".into()));
    }
    let beta = Beta::new(0.5, 0.5 * (n as f64 - 1.0)).map_err(|e| Error::Domain(e.to_string()))?;
    let mut sorted = overlaps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ks = ks_distance(&sorted, |x| beta.cdf(x.clamp(0.0, 1.0)));
    let mean = mean_estimate(overlaps, 50.min(overlaps.len()));
    let expected_mean = 1.0 / n as f64;
    let se = if mean.std_error > 0.0 { mean.std_error } else { f64::MIN_POSITIVE };
    let passed = (mean.value - expected_mean).abs() <= 3.0 * se && ks <= ks_max;
    Ok(HaarReport { mean, expected_mean, ks, passed })
}

#[cfg(test)]
mod tests;
