//! Acceptance checks, one line per criterion.
//!
//! Run all with `cargo test -p betadyn --test acceptance`; pass criterion
//! numbers after `--` to run a subset.

use std::time::Instant;

use betadyn::density::{
    eval_gaussian, eval_kerov, kerov_moment, linspace, ode_residual, tail_exponent_check, DensityModel,
};
use betadyn::eigen_sde::{run_replicas, simulate, stieltjes_sample, GasState, SdeConfig};
use betadyn::matrix_process::{haar_overlap_samples, haar_test, simulate_switched, simulate_switched_from, MatrixConfig, SymMatrixState};
use betadyn::special_fn::quadrature::integrate;
use betadyn::special_fn::{ln_abs_wronskian_exact, pcf_quadrature_eval, pcf_weber_ode, weber_trajectory};
use betadyn::spectral_stats::{
    ks_distance, mean_estimate, moment, nns, pooled, small_spacing_exponent, wigner_surmise_cdf, Estimate,
};
use betadyn::{ComplexVal, Result, SpectrumSample};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn crossover_density() -> Result<Outcome> {
    let zs = [ComplexVal::new(0.0, 1.5), ComplexVal::new(1.0, 2.0), ComplexVal::new(-2.0, 1.0)];
    let mut pass = true;
    let mut worst = [0f64; 4];
    for c in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let l = 12.0 + 4.0 * (1.0f64 + c).sqrt();
        let curve = DensityModel::Kerov { c }.curve(&linspace(-l, l, 4001))?;
        let mass = (curve.total_mass() - 1.0).abs();
        let m2 = (curve.moment(2) / kerov_moment(c, 2)? - 1.0).abs();
        let m4 = (curve.moment(4) / kerov_moment(c, 4)? - 1.0).abs();
        let res = ode_residual(c, &curve, &zs);
        pass &= mass <= 1e-5 && m2 <= 1e-4 && m4 <= 1e-3 && res <= 5e-3;
        for (w, v) in worst.iter_mut().zip([mass, m2, m4, res]) {
            *w = w.max(v);
        }
    }
    outcome(pass, format!("worst |mass-1|={:.1e} m2 rel={:.1e} m4 rel={:.1e} residual={:.1e}", worst[0], worst[1], worst[2], worst[3]))
}

fn endpoint_limits() -> Result<Outcome> {
    let mut gauss = 0f64;
    for x in linspace(-8.0, 8.0, 321) {
        gauss = gauss.max((eval_kerov(0.0, x)? - eval_gaussian(1.0, x)).abs());
    }
    let c = 100.0f64;
    let peak = 1.0 / (std::f64::consts::PI * c.sqrt());
    let mut semi = 0f64;
    for u in linspace(-1.8 * c.sqrt(), 1.8 * c.sqrt(), 721) {
        let sc = (4.0 * c - u * u).sqrt() / (2.0 * std::f64::consts::PI * c);
        semi = semi.max((eval_kerov(c, u)? - sc).abs());
    }
    outcome(gauss <= 1e-8 && semi <= 0.05 * peak, format!("c=0 vs Gaussian {gauss:.1e}; c=100 vs semicircle {:.4}·peak", semi / peak))
}

fn tail_law() -> Result<Outcome> {
    let mut pass = true;
    let mut ks = Vec::new();
    for c in [1.0, 2.0, 3.0] {
        let k = tail_exponent_check(c)?;
        pass &= (k - 2.0 * c).abs() <= 0.1;
        ks.push(format!("c={c}: {k:.3}"));
    }
    outcome(pass, ks.join(", "))
}

fn corrected_density_fit() -> Result<Outcome> {
    let cfg = SdeConfig { n_samples: 500, seed: 104, ..SdeConfig::fixed_beta(50, 0.5) };
    let samples: Vec<SpectrumSample> = run_replicas(&cfg, 2)?.into_iter().flat_map(|r| r.samples).collect();
    let draws = pooled(&samples);
    let corrected = DensityModel::Corrected { beta: 0.5, n_dim: 50, sigma: 1.0 };
    let cc = corrected.curve(&corrected.default_grid())?.cdf();
    let semi = DensityModel::Semicircle { beta: 0.5, n_dim: 50, sigma: 1.0 };
    let sc = semi.curve(&semi.default_grid())?.cdf();
    let ks_c = ks_distance(&draws, |x| cc.eval(x));
    let ks_s = ks_distance(&draws, |x| sc.eval(x));
    outcome(draws.len() >= 20_000 && ks_c <= 0.02 && ks_c < ks_s, format!("{} draws, KS corrected {ks_c:.4}, KS semicircle {ks_s:.4}", draws.len()))
}

fn spacing_distribution() -> Result<Outcome> {
    let cfg = SdeConfig { n_samples: 225, seed: 105, ..SdeConfig::fixed_beta(100, 0.5) };
    let samples: Vec<SpectrumSample> = run_replicas(&cfg, 2)?.into_iter().flat_map(|r| r.samples).collect();
    let model = DensityModel::Corrected { beta: 0.5, n_dim: 100, sigma: 1.0 };
    let set = nns(&samples, 0.5, Some(&model))?;
    let mut s = set.spacings.clone();
    s.sort_by(f64::total_cmp);
    let ks = ks_distance(&s, |x| wigner_surmise_cdf(0.5, x).unwrap_or(f64::NAN));
    let slope = small_spacing_exponent(&s, 0.05, 0.3)?;
    let pass = s.len() >= 20_000 && ks <= 0.08 && (slope.value - 0.5).abs() <= 0.15;
    outcome(pass, format!("{} spacings, KS surmise {ks:.4}, small-s exponent {:.3} ± {:.3}", s.len(), slope.value, slope.std_error))
}

fn model_equivalence() -> Result<Outcome> {
    let mcfg = MatrixConfig { burn_in: 20.0, n_samples: 3000, seed: 106, ..MatrixConfig::new(8, 0.5) };
    let matrix = simulate_switched(&mcfg)?.samples;
    let scfg = SdeConfig { burn_in: 20.0, n_samples: 3000, seed: 106, ..SdeConfig::fixed_beta(8, 0.5) };
    let sde = simulate(&scfg)?;
    let (a2, a4) = (moment(&matrix, 2)?, moment(&matrix, 4)?);
    let (b2, b4) = (moment(&sde, 2)?, moment(&sde, 4)?);
    let (z2, z4) = (a2.z_score(&b2), a4.z_score(&b4));
    outcome(
        z2 <= 3.0 && z4 <= 3.0,
        format!("m2 {:.3}±{:.3} vs {:.3}±{:.3} (z={z2:.2}); m4 {:.2}±{:.2} vs {:.2}±{:.2} (z={z4:.2})", a2.value, a2.std_error, b2.value, b2.std_error, a4.value, a4.std_error, b4.value, b4.std_error),
    )
}

fn two_particle_moment(beta: f64, k: i32) -> Result<f64> {
    let q = |k: i32| -> Result<f64> {
        let f = |s: f64| ComplexVal::new(s.powi(k) * s.powf(beta) * (-s * s / 4.0).exp(), 0.0);
        Ok(integrate(f, &[0.0, 2.0, 5.0, 10.0, 20.0], 1e-12, 0.0, 1000)?.value.re)
    };
    Ok(q(k)? / q(0)?)
}

fn small_n_laws() -> Result<Outcome> {
    let one = SdeConfig { burn_in: 10.0, n_samples: 20_000, seed: 107, ..SdeConfig::fixed_beta(1, 1.0) };
    let var = moment(&simulate(&one)?, 2)?;
    let mut pass = (var.value - 1.0).abs() <= 3.0 * var.std_error;
    let mut detail = format!("N=1 var {:.4}±{:.4}", var.value, var.std_error);
    let two = SdeConfig { burn_in: 10.0, n_samples: 20_000, seed: 207, ..SdeConfig::fixed_beta(2, 1.0) };
    let s = simulate(&two)?;
    for k in [1, 2] {
        let vals: Vec<f64> = s.iter().map(|x| (x.lambdas[1] - x.lambdas[0]).powi(k)).collect();
        let e = mean_estimate(&vals, 50);
        let exact = two_particle_moment(1.0, k)?;
        pass &= (e.value - exact).abs() <= 3.0 * e.std_error;
        detail += &format!("; N=2 E[s^{k}] {:.4}±{:.4} vs {exact:.4}", e.value, e.std_error);
    }
    outcome(pass, detail)
}

fn fluctuation_scaling() -> Result<Outcome> {
    let mut pts = Vec::new();
    for n in [16usize, 32, 64] {
        let cfg = SdeConfig { n_samples: 500, sample_stride: 2.0, seed: 108, ..SdeConfig::fixed_beta(n, 1.0) };
        let z = ComplexVal::new(0.0, 2.0 * (n as f64).sqrt());
        let g: Vec<ComplexVal> = simulate(&cfg)?.into_iter().map(|s| stieltjes_sample(&GasState { lambdas: s.lambdas, t: s.t }, z)).collect();
        let mean = g.iter().sum::<ComplexVal>() / g.len() as f64;
        let var = g.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (g.len() - 1) as f64;
        pts.push(((n as f64).ln(), var.ln()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let vars: Vec<String> = pts.iter().map(|p| format!("{:.2e}", p.1.exp())).collect();
    outcome((slope + 3.0).abs() <= 0.5, format!("Var G at N=16,32,64: {}; slope {slope:.3}", vars.join(", ")))
}

fn haar_invariance() -> Result<Outcome> {
    let n = 10;
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    let cfg = MatrixConfig { burn_in: 20.0, n_samples: 2000, sample_stride: 2.0, seed: 109, record_vectors: true, ..MatrixConfig::new(n, 0.5) };
    let run = simulate_switched(&cfg)?;
    let rep = haar_test(&haar_overlap_samples(&run.snapshots, &e, n / 2)?, n, 0.05)?;

    let frozen_cfg = MatrixConfig { p: 0.0, n_samples: 500, ..cfg };
    let start = SymMatrixState::diagonal(&(0..n).map(|i| i as f64 - 4.5).collect::<Vec<_>>());
    let frozen = simulate_switched_from(&frozen_cfg, start)?;
    let ctrl = haar_test(&haar_overlap_samples(&frozen.snapshots, &e, n / 2)?, n, 0.05)?;
    let fmt = |m: &Estimate| format!("{:.4}±{:.4}", m.value, m.std_error);
    outcome(
        rep.passed && !ctrl.passed,
        format!("mean {} (1/N={:.2}), KS {:.4}; frozen control mean {}, KS {:.3}, rejected={}", fmt(&rep.mean), rep.expected_mean, rep.ks, fmt(&ctrl.mean), ctrl.ks, !ctrl.passed),
    )
}

fn special_functions() -> Result<Outcome> {
    let lambdas = [0.0, 0.5, 1.0, 2.0, 5.0];
    let mut lattice = 0f64;
    let mut drift = 0f64;
    for c in [0.25, 0.5, 1.0, 2.0, 5.0, 10.0] {
        for e in pcf_weber_ode(c, &lambdas)? {
            lattice = lattice.max((pcf_quadrature_eval(c, e.lambda)?.log_abs2 - e.log_abs2).abs());
        }
        let traj = weber_trajectory(c, &linspace(0.0, 10.0, 101))?;
        let w0 = traj[0].ln_abs_wronskian();
        let _ = ln_abs_wronskian_exact(c)?;
        for s in &traj {
            drift = drift.max(((s.ln_abs_wronskian() - w0).exp() - 1.0).abs());
        }
    }
    outcome(lattice <= 1e-7 && drift <= 1e-8, format!("lattice max |Δ log|D|²| {lattice:.1e}, Wronskian drift {drift:.1e}"))
}

type Check = fn() -> Result<Outcome>;

fn main() {
    let checks: [(&str, Check); 10] = [
        ("crossover density normalisation, moments and ODE residual", crossover_density),
        ("Gaussian and semicircle endpoint limits", endpoint_limits),
        ("tail exponent 2c", tail_law),
        ("N=50 β=1/2 pooled eigenvalues vs corrected density", corrected_density_fit),
        ("N=100 β=1/2 spacing distribution vs surmise", spacing_distribution),
        ("matrix model vs eigenvalue SDE moments", model_equivalence),
        ("exact N=1 and N=2 laws", small_n_laws),
        ("Var G(2i√N) ~ N^-3", fluctuation_scaling),
        ("Haar eigenvectors and frozen-basis control", haar_invariance),
        ("special-function dual routes and Wronskian", special_functions),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !pass as usize;
        println!("[{}] {id:>2}. {name}: {detail} ({:.1}s)", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
