//! Euler–Maruyama integration of the interacting eigenvalue SDE
//!
//! `dλᵢ = -λᵢ/2 dt + g Σ_{j≠i} 1/(λᵢ-λⱼ) dt + σ dbᵢ`
//!
//! with coupling `g = βσ²/2` (fixed β), `g = cσ²/N` (crossover) or
//! `g = εσ²/2` with `ε ∈ {0, 1}` redrawn on every interval of length `1/n`
//! (switched). Particles are re-sorted after each step.
//!
//! The repulsion between nearest neighbours is stiff when two particles come
//! close; it is integrated drift-implicitly (a tridiagonal convex problem
//! solved by Newton's method). The rest of the drift is explicit, with step
//! halving when it would change a gap by more than [`GAP_FRACTION`].

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{normal, stream, Role, StreamRng};
use crate::spectral_stats::SpectrumSample;

/// Maximum number of step halvings within one global step.
pub const MAX_HALVINGS: u32 = 20;
/// A step is halved while the drift would change a gap by more than this fraction.
pub const GAP_FRACTION: f64 = 0.1;
/// Minimum gap, in units of σ, enforced before drift evaluation.
pub const GAP_GUARD: f64 = 1e-9;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_BURN_IN: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SdeMode {
    FixedBeta { beta: f64 },
    Crossover { c: f64 },
    Switched { p: f64, switch_rate: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub n_dim: usize,
    pub mode: SdeMode,
    pub sigma: f64,
    pub dt: f64,
    pub burn_in: f64,
    pub sample_stride: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Replica index; selects an independent family of random streams.
    #[serde(default)]
    pub replica: u64,
}

impl SdeConfig {
    pub fn fixed_beta(n_dim: usize, beta: f64) -> Self {
        Self {
            n_dim,
            mode: SdeMode::FixedBeta { beta },
            sigma: 1.0,
            dt: DEFAULT_DT,
            burn_in: DEFAULT_BURN_IN,
            sample_stride: 1.0,
            n_samples: 1000,
            seed: 0,
            replica: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_dim == 0 {
            return bad("n_dim must be at least 1".into());
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
        if !(self.sample_stride >= self.dt && self.sample_stride.is_finite()) {
            return bad(format!("sample_stride ({}) must be at least dt ({})", self.sample_stride, self.dt));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1".into());
        }
        match self.mode {
            SdeMode::FixedBeta { beta } if !(0.0..=2.0).contains(&beta) => bad(format!("beta must lie in [0, 2], got {beta}")),
            SdeMode::Crossover { c } if !(c >= 0.0 && c.is_finite()) => bad(format!("c must be non-negative, got {c}")),
            SdeMode::Crossover { .. } if self.dt > 0.01 => bad(format!("dt must not exceed 0.01 in crossover mode, got {}", self.dt)),
            SdeMode::Switched { p, .. } if !(0.0..=1.0).contains(&p) => bad(format!("p must lie in [0, 1], got {p}")),
            SdeMode::Switched { switch_rate: 0, .. } => bad("switch_rate must be at least 1".into()),
            SdeMode::Switched { switch_rate, .. } => steps_per_interval(switch_rate, self.dt).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Coupling of the interaction term with the switch on.
    pub fn coupling(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        match self.mode {
            SdeMode::FixedBeta { beta } => 0.5 * beta * s2,
            SdeMode::Crossover { c } => c * s2 / self.n_dim as f64,
            SdeMode::Switched { .. } => 0.5 * s2,
        }
    }

    /// The β of the averaged stationary law.
    pub fn effective_beta(&self) -> f64 {
        match self.mode {
            SdeMode::FixedBeta { beta } => beta,
            SdeMode::Crossover { c } => 2.0 * c / self.n_dim as f64,
            SdeMode::Switched { p, .. } => p,
        }
    }

    fn steps_for(&self, span: f64) -> u64 {
        (span / self.dt).round() as u64
    }
}

/// Number of `dt` steps in one switching interval `1/n`; `dt` must divide it.
pub fn steps_per_interval(switch_rate: u32, dt: f64) -> Result<u64> {
    let ratio = 1.0 / (switch_rate as f64 * dt);
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * k {
        return Err(Error::Config(format!("dt ({dt}) must divide the switching interval 1/{switch_rate}")));
    }
    Ok(k as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub lambdas: Vec<f64>,
    pub t: f64,
}

impl GasState {
    /// Evenly spaced start with unit-σ spacing, centred on zero.
    pub fn lattice(n_dim: usize, sigma: f64) -> Self {
        let mid = 0.5 * (n_dim as f64 - 1.0);
        Self { lambdas: (0..n_dim).map(|i| sigma * (i as f64 - mid)).collect(), t: 0.0 }
    }

    pub fn is_sorted(&self) -> bool {
        self.lambdas.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Per-particle drift `-λᵢ/2 + g Σ_{j≠i} 1/(λᵢ-λⱼ)`.
pub fn drift(state: &GasState, coupling: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; state.lambdas.len()];
    drift_into(&state.lambdas, coupling, &mut out)?;
    Ok(out)
}

fn drift_into(lambdas: &[f64], coupling: f64, out: &mut [f64]) -> Result<()> {
    out.iter_mut().for_each(|v| *v = 0.0);
    if coupling != 0.0 {
        for i in 0..lambdas.len() {
            for j in i + 1..lambdas.len() {
                let d = lambdas[i] - lambdas[j];
                if d == 0.0 {
                    return Err(Error::Singularity { i, j });
                }
                let inv = 1.0 / d;
                out[i] += inv;
                out[j] -= inv;
            }
        }
    }
    for (o, l) in out.iter_mut().zip(lambdas) {
        *o = -0.5 * l + coupling * *o;
    }
    Ok(())
}

/// Drift without the nearest-neighbour repulsion, for sorted `lambdas`.
fn far_drift_into(lambdas: &[f64], coupling: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if coupling != 0.0 {
        for i in 0..lambdas.len() {
            for j in i + 2..lambdas.len() {
                let inv = 1.0 / (lambdas[i] - lambdas[j]);
                out[i] += inv;
                out[j] -= inv;
            }
        }
    }
    for (o, l) in out.iter_mut().zip(lambdas) {
        *o = -0.5 * l + coupling * *o;
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct NewtonWork {
    grad: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    step: Vec<f64>,
    trial: Vec<f64>,
    x: Vec<f64>,
}

impl NewtonWork {
    pub(crate) fn new(n: usize) -> Self {
        let v = vec![0.0; n];
        Self { grad: v.clone(), diag: v.clone(), off: v.clone(), step: v.clone(), trial: v.clone(), x: v }
    }
}

/// Replaces sorted `y` by the minimiser of
/// `½ Σ (yᵢ - xᵢ)² - κ Σ ln(yᵢ₊₁ - yᵢ)` with `x` the input, i.e. one
/// backward-Euler step of the nearest-neighbour repulsion with `κ = g h`.
/// Returns the number of Newton iterations.
pub(crate) fn nearest_neighbour_implicit(y: &mut [f64], kappa: f64, w: &mut NewtonWork) -> u64 {
    let n = y.len();
    w.x.clear();
    w.x.extend_from_slice(y);
    let objective = |y: &[f64], x: &[f64]| -> f64 {
        let mut f = 0.0;
        for i in 0..y.len() {
            f += 0.5 * (y[i] - x[i]).powi(2);
        }
        for i in 1..y.len() {
            f -= kappa * (y[i] - y[i - 1]).ln();
        }
        f
    };
    // Start from isolated-pair solutions G = (g + √(g² + 8κ))/2, keeping the mean.
    let mean_x = w.x.iter().sum::<f64>() / n as f64;
    let mut acc = 0.0;
    y[0] = 0.0;
    for i in 1..n {
        let g = w.x[i] - w.x[i - 1];
        acc += 0.5 * (g + (g * g + 8.0 * kappa).sqrt());
        y[i] = acc;
    }
    let shift = mean_x - y.iter().sum::<f64>() / n as f64;
    y.iter_mut().for_each(|v| *v += shift);
    let mut f = f64::NAN;
    for iter in 1..=100u64 {
        // Gradient and the tridiagonal Hessian I + κ·(graph Laplacian with weights 1/gap²).
        for i in 0..n {
            w.grad[i] = y[i] - w.x[i];
            w.diag[i] = 1.0;
        }
        for i in 1..n {
            let gap = y[i] - y[i - 1];
            let inv = kappa / gap;
            w.grad[i - 1] += inv;
            w.grad[i] -= inv;
            let h = inv / gap;
            w.diag[i - 1] += h;
            w.diag[i] += h;
            w.off[i] = -h;
        }
        // Thomas algorithm for H·step = -grad.
        let mut c_prev = 0.0;
        let mut d_prev = 0.0;
        for i in 0..n {
            let (a, b) = if i > 0 { (w.off[i], w.diag[i] - w.off[i] * c_prev) } else { (0.0, w.diag[0]) };
            let c = if i + 1 < n { w.off[i + 1] / b } else { 0.0 };
            let d = (-w.grad[i] - a * d_prev) / b;
            w.off[i] = c; // reuse as the forward-sweep coefficient
            w.step[i] = d;
            c_prev = c;
            d_prev = d;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            w.step[i] -= w.off[i] * w.step[i + 1];
        }
        // Converged once the step is negligible against every neighbouring gap.
        let converged = (1..n).all(|i| {
            let gap = y[i] - y[i - 1];
            (w.step[i] - w.step[i - 1]).abs() <= 1e-12 * gap && w.step[i].abs() <= 1e-13 * (1.0 + y[i].abs())
        });
        if converged {
            for i in 0..n {
                w.trial[i] = y[i] + w.step[i];
            }
            if w.trial.windows(2).all(|p| p[0] < p[1]) {
                y.copy_from_slice(&w.trial);
                return iter;
            }
        }
        // Small steps are taken in full; otherwise backtrack to keep the
        // order and decrease the objective.
        let small = (1..n).all(|i| (w.step[i] - w.step[i - 1]).abs() <= 0.5 * (y[i] - y[i - 1]));
        if small {
            for i in 0..n {
                y[i] += w.step[i];
            }
            f = f64::NAN;
            continue;
        }
        if f.is_nan() {
            f = objective(y, &w.x);
        }
        let slope: f64 = w.grad.iter().zip(&w.step).map(|(g, s)| g * s).sum();
        let mut t = 1.0;
        loop {
            for i in 0..n {
                w.trial[i] = y[i] + t * w.step[i];
            }
            if w.trial.windows(2).all(|p| p[0] < p[1]) {
                let ft = objective(&w.trial, &w.x);
                if ft <= f + 1e-4 * t * slope || t < 1e-12 {
                    f = ft;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-30 {
                return iter;
            }
        }
        y.copy_from_slice(&w.trial);
    }
    100
}

/// `G = (1/N) Σ 1/(λᵢ - z)`.
pub fn stieltjes_sample(state: &GasState, z: Complex64) -> Complex64 {
    let n = state.lambdas.len() as f64;
    state.lambdas.iter().map(|&l| 1.0 / (l - z)).sum::<Complex64>() / n
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdeCounters {
    pub steps: u64,
    /// Euler sub-steps actually taken (equals `steps` without halving).
    pub substeps: u64,
    /// Pairs pushed apart by the minimum-gap guard.
    pub guard_separations: u64,
    pub newton_iterations: u64,
    /// Switching intervals with the interaction on.
    pub intervals_on: u64,
    pub intervals: u64,
}

/// A running simulation with its own random streams.
pub struct GasSimulator {
    cfg: SdeConfig,
    state: GasState,
    particles: Vec<StreamRng>,
    schedule: StreamRng,
    steps_per_interval: u64,
    interaction_on: bool,
    step_index: u64,
    counters: SdeCounters,
    scratch: Vec<f64>,
    work: NewtonWork,
}

impl GasSimulator {
    pub fn new(cfg: &SdeConfig) -> Result<Self> {
        Self::with_state(cfg, GasState::lattice(cfg.n_dim, cfg.sigma))
    }

    pub fn with_state(cfg: &SdeConfig, mut state: GasState) -> Result<Self> {
        cfg.validate()?;
        if state.lambdas.len() != cfg.n_dim {
            return Err(Error::Config(format!("initial state has {} particles, n_dim is {}", state.lambdas.len(), cfg.n_dim)));
        }
        state.lambdas.sort_by(f64::total_cmp);
        let particles = (0..cfg.n_dim as u64).map(|i| stream(cfg.seed, cfg.replica, Role::Particle, i)).collect();
        let steps_per_interval = match cfg.mode {
            SdeMode::Switched { switch_rate, .. } => steps_per_interval(switch_rate, cfg.dt)?,
            _ => 0,
        };
        Ok(Self {
            cfg: cfg.clone(),
            state,
            particles,
            schedule: stream(cfg.seed, cfg.replica, Role::Schedule, 0),
            steps_per_interval,
            interaction_on: true,
            step_index: 0,
            counters: SdeCounters::default(),
            scratch: vec![0.0; cfg.n_dim],
            work: NewtonWork::new(cfg.n_dim),
        })
    }

    pub fn state(&self) -> &GasState {
        &self.state
    }

    pub fn counters(&self) -> SdeCounters {
        self.counters
    }

    pub fn config(&self) -> &SdeConfig {
        &self.cfg
    }

    /// Advances by one global step `dt`.
    pub fn step(&mut self) {
        if let SdeMode::Switched { p, .. } = self.cfg.mode {
            if self.step_index % self.steps_per_interval == 0 {
                self.interaction_on = self.schedule.random::<f64>() < p;
                self.counters.intervals += 1;
                self.counters.intervals_on += self.interaction_on as u64;
            }
        }
        let coupling = if self.interaction_on { self.cfg.coupling() } else { 0.0 };

        // Time is counted in units of dt / 2^MAX_HALVINGS so sub-steps add up exactly.
        let full: u64 = 1 << MAX_HALVINGS;
        let mut remaining = full;
        while remaining > 0 {
            self.guard_gaps();
            far_drift_into(&self.state.lambdas, coupling, &mut self.scratch);
            let mut ticks = full.min(remaining);
            let mut halvings = 0;
            while halvings < MAX_HALVINGS && self.too_stiff(ticks as f64 / full as f64 * self.cfg.dt) {
                ticks = (ticks / 2).max(1);
                halvings += 1;
            }
            let h = ticks as f64 / full as f64 * self.cfg.dt;
            let amp = self.cfg.sigma * h.sqrt();
            for ((l, d), rng) in self.state.lambdas.iter_mut().zip(&self.scratch).zip(&mut self.particles) {
                *l += d * h + amp * normal(rng);
            }
            self.state.lambdas.sort_by(f64::total_cmp);
            if coupling > 0.0 && self.cfg.n_dim > 1 {
                self.guard_gaps();
                self.counters.newton_iterations += nearest_neighbour_implicit(&mut self.state.lambdas, coupling * h, &mut self.work);
            }
            remaining -= ticks;
            self.counters.substeps += 1;
        }
        self.step_index += 1;
        self.counters.steps += 1;
        self.state.t = self.step_index as f64 * self.cfg.dt;
        debug_assert!(self.state.is_sorted());
    }

    pub fn run_steps(&mut self, k: u64) {
        for _ in 0..k {
            self.step();
        }
    }

    /// True when the drift alone would change some neighbouring gap by more
    /// than `GAP_FRACTION` of its size.
    fn too_stiff(&self, h: f64) -> bool {
        let l = &self.state.lambdas;
        let d = &self.scratch;
        (1..l.len()).any(|i| (d[i] - d[i - 1]).abs() * h > GAP_FRACTION * (l[i] - l[i - 1]))
    }

    fn guard_gaps(&mut self) {
        let g_min = GAP_GUARD * self.cfg.sigma;
        let l = &mut self.state.lambdas;
        for _ in 0..l.len() {
            let mut moved = false;
            for i in 1..l.len() {
                if l[i] - l[i - 1] < g_min {
                    let mid = 0.5 * (l[i] + l[i - 1]);
                    l[i - 1] = mid - 0.5 * g_min;
                    l[i] = mid + 0.5 * g_min;
                    self.counters.guard_separations += 1;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        l.sort_by(f64::total_cmp);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeRun {
    pub samples: Vec<SpectrumSample>,
    pub counters: SdeCounters,
}

/// Burn-in, then `n_samples` spectra every `sample_stride` time units.
pub fn simulate(cfg: &SdeConfig) -> Result<Vec<SpectrumSample>> {
    run(cfg).map(|r| r.samples)
}

pub fn run(cfg: &SdeConfig) -> Result<SdeRun> {
    run_from(cfg, GasState::lattice(cfg.n_dim, cfg.sigma))
}

pub fn run_from(cfg: &SdeConfig, start: GasState) -> Result<SdeRun> {
    let mut sim = GasSimulator::with_state(cfg, start)?;
    sim.run_steps(cfg.steps_for(cfg.burn_in));
    let stride = cfg.steps_for(cfg.sample_stride).max(1);
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        sim.run_steps(stride);
        samples.push(SpectrumSample { t: sim.state.t, lambdas: sim.state.lambdas.clone() });
    }
    Ok(SdeRun { samples, counters: sim.counters })
}

/// Independent replicas `0..replicas` (offset by `cfg.replica`), run in
/// parallel and returned in replica order.
pub fn run_replicas(cfg: &SdeConfig, replicas: u64) -> Result<Vec<SdeRun>> {
    cfg.validate()?;
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.replica = cfg.replica + r;
            run(&c)
        })
        .collect()
}
