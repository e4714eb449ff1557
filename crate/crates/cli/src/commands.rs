use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use betadyn::density::{linspace, DensityModel};
use betadyn::eigen_sde::{self, SdeConfig, SdeMode};
use betadyn::io::{read_samples_csv, write_samples_csv, Manifest};
use betadyn::matrix_process::{self, MatrixConfig, SymMatrixState};
use betadyn::spectral_stats::{
    ks_distance, moment, nns, pooled, small_spacing_exponent, wigner_surmise, wigner_surmise_cdf, write_nnsd_csv,
    Histogram,
};
use betadyn::SpectrumSample;
use serde_json::{json, Value};

use crate::config::{parse_grid, parse_range, Layered};
use crate::error::CliError;
use crate::{AnalyzeArgs, AnalyzeKind, DensityArgs, DensityKind, Format, MatrixArgs, Reference, SdeArgs};

const MODE_KEYS: [&str; 4] = ["beta", "c-param", "p", "switch-rate"];

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(betadyn::Error::from)?))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::config("out", format!("cannot create {}: {e}", dir.display())))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), CliError> {
    fs::write(path, manifest.to_json()?).map_err(betadyn::Error::from)?;
    Ok(())
}

/// `rho.csv` -> `rho.manifest.json`, in the same directory.
fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_samples(dir: &Path, format: Format, samples: &[SpectrumSample]) -> Result<String, CliError> {
    let name = match format {
        Format::Csv => "samples.csv",
        Format::Json => "samples.json",
    };
    let mut w = create(&dir.join(name))?;
    match format {
        Format::Csv => write_samples_csv(&mut w, samples)?,
        Format::Json => {
            serde_json::to_writer(&mut w, samples).map_err(betadyn::Error::from)?;
            writeln!(w).map_err(betadyn::Error::from)?;
        }
    }
    w.flush().map_err(betadyn::Error::from)?;
    Ok(name.to_string())
}

pub fn simulate_sde(a: SdeArgs) -> Result<(), CliError> {
    let mut l = Layered::load(a.config.as_deref(), "simulate-sde")?;
    if a.beta.is_some() || a.c_param.is_some() || a.p.is_some() {
        l.drop_file_keys(&MODE_KEYS);
    }
    let n_dim = l.require("n-dim", a.n_dim)?;
    let beta = l.opt("beta", a.beta)?;
    let c = l.opt("c-param", a.c_param)?;
    let p = l.opt("p", a.p)?;
    let mode = match (beta, c, p) {
        (Some(beta), None, None) => SdeMode::FixedBeta { beta },
        (None, Some(c), None) => SdeMode::Crossover { c },
        (None, None, Some(p)) => SdeMode::Switched { p, switch_rate: l.get("switch-rate", a.switch_rate, 100)? },
        (None, None, None) => return Err(CliError::config("beta", "one of --beta, --c-param or --p is required")),
        _ => return Err(CliError::config("beta", "--beta, --c-param and --p are mutually exclusive")),
    };
    if !matches!(mode, SdeMode::Switched { .. }) && (a.switch_rate.is_some() || l.in_file("switch-rate")) {
        return Err(CliError::config("switch-rate", "only applies together with --p"));
    }
    let cfg = SdeConfig {
        n_dim,
        mode,
        sigma: l.get("sigma", a.sigma, 1.0)?,
        dt: l.get("dt", a.dt, eigen_sde::DEFAULT_DT)?,
        burn_in: l.get("burn-in", a.burn_in, eigen_sde::DEFAULT_BURN_IN)?,
        sample_stride: l.get("stride", a.stride, 1.0)?,
        n_samples: l.get("samples", a.samples, 1000)?,
        seed: l.get("seed", a.seed, 0)?,
        replica: 0,
    };
    let replicas = l.get("replicas", a.replicas, 1u64)?;
    let format = l.get("format", a.format, Format::Csv)?;
    let resolved = l.finish()?;
    cfg.validate().map_err(CliError::from_validation)?;
    if replicas == 0 {
        return Err(CliError::config("replicas", "must be at least 1"));
    }

    ensure_dir(&a.out)?;
    let runs = eigen_sde::run_replicas(&cfg, replicas)?;
    let counters: Vec<_> = runs.iter().map(|r| r.counters).collect();
    let samples: Vec<SpectrumSample> = runs.into_iter().flat_map(|r| r.samples).collect();
    let data = write_samples(&a.out, format, &samples)?;

    let mut m = Manifest::new("simulate-sde", resolved, Some(cfg.seed));
    m.counters = json!(counters);
    m.outputs = vec![data, "manifest.json".into()];
    write_manifest(&a.out.join("manifest.json"), &m)
}

pub fn simulate_matrix(a: MatrixArgs) -> Result<(), CliError> {
    let mut l = Layered::load(a.config.as_deref(), "simulate-matrix")?;
    let cfg = MatrixConfig {
        n_dim: l.require("n-dim", a.n_dim)?,
        p: l.require("p", a.p)?,
        switch_rate: l.get("switch-rate", a.switch_rate, 100)?,
        sigma: l.get("sigma", a.sigma, 1.0)?,
        dt: l.get("dt", a.dt, 1e-3)?,
        burn_in: l.get("burn-in", a.burn_in, 40.0)?,
        sample_stride: l.get("stride", a.stride, 1.0)?,
        n_samples: l.get("samples", a.samples, 1000)?,
        seed: l.get("seed", a.seed, 0)?,
        replica: 0,
        record_vectors: false,
    };
    let replicas = l.get("replicas", a.replicas, 1u64)?;
    let format = l.get("format", a.format, Format::Csv)?;
    let start_path: Option<String> = l.opt("start", a.start)?;
    let snapshot = l.get("snapshot", a.snapshot.then_some(true), false)?;
    let resolved = l.finish()?;
    cfg.validate().map_err(CliError::from_validation)?;
    if replicas == 0 {
        return Err(CliError::config("replicas", "must be at least 1"));
    }
    let start = match &start_path {
        None => SymMatrixState::zeros(cfg.n_dim),
        Some(p) => {
            let f = File::open(p).map_err(|e| CliError::config("start", format!("cannot open {p}: {e}")))?;
            let s = SymMatrixState::read_snapshot(std::io::BufReader::new(f))
                .map_err(|e| CliError::config("start", e.to_string()))?;
            if s.n != cfg.n_dim {
                return Err(CliError::config("start", format!("snapshot is {}x{}, expected --n-dim {}", s.n, s.n, cfg.n_dim)));
            }
            s
        }
    };

    ensure_dir(&a.out)?;
    let runs = (0..replicas)
        .map(|r| matrix_process::simulate_switched_from(&MatrixConfig { replica: r, ..cfg.clone() }, start.clone()))
        .collect::<betadyn::Result<Vec<_>>>()?;
    let mut outputs = Vec::new();
    if snapshot {
        for (r, run) in runs.iter().enumerate() {
            let name = format!("final_state_{r}.bin");
            let mut w = create(&a.out.join(&name))?;
            run.final_state.write_snapshot(&mut w)?;
            w.flush().map_err(betadyn::Error::from)?;
            outputs.push(name);
        }
    }
    let counters: Vec<_> = runs.iter().map(|r| r.counters).collect();
    let samples: Vec<SpectrumSample> = runs.into_iter().flat_map(|r| r.samples).collect();
    outputs.insert(0, write_samples(&a.out, format, &samples)?);
    outputs.push("manifest.json".into());

    let mut m = Manifest::new("simulate-matrix", resolved, Some(cfg.seed));
    m.counters = json!(counters);
    m.outputs = outputs;
    write_manifest(&a.out.join("manifest.json"), &m)
}

pub fn density(a: DensityArgs) -> Result<(), CliError> {
    let mut l = Layered::load(a.config.as_deref(), "density")?;
    let kind = l.require("kind", a.kind)?;
    let (used, unused): (&[&str], &[&str]) = match kind {
        DensityKind::Gaussian => (&["sigma"], &["c-param", "beta", "n-dim"]),
        DensityKind::Kerov => (&["c-param"], &["beta", "n-dim", "sigma"]),
        DensityKind::Semicircle | DensityKind::Corrected => (&["beta", "n-dim", "sigma"], &["c-param"]),
    };
    for key in unused {
        let given = match *key {
            "c-param" => a.c_param.is_some(),
            "beta" => a.beta.is_some(),
            "n-dim" => a.n_dim.is_some(),
            _ => a.sigma.is_some(),
        };
        if given || l.in_file(key) {
            return Err(CliError::config(key, format!("does not apply to --kind {}", kind_name(kind))));
        }
    }
    let sigma = if used.contains(&"sigma") { l.get("sigma", a.sigma, 1.0)? } else { 1.0 };
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CliError::config("sigma", format!("must be positive, got {sigma}")));
    }
    let model = match kind {
        DensityKind::Gaussian => DensityModel::Gaussian { sigma },
        DensityKind::Kerov => DensityModel::Kerov { c: l.require("c-param", a.c_param)? },
        DensityKind::Semicircle => DensityModel::Semicircle { beta: l.require("beta", a.beta)?, n_dim: l.require("n-dim", a.n_dim)?, sigma },
        DensityKind::Corrected => DensityModel::Corrected { beta: l.require("beta", a.beta)?, n_dim: l.require("n-dim", a.n_dim)?, sigma },
    };
    model.validate().map_err(|e| CliError::config(used[0], e.to_string()))?;
    let grid = match l.opt::<String>("grid", a.grid.clone())? {
        Some(text) => {
            let (lo, hi, n) = parse_grid("grid", &text)?;
            linspace(lo, hi, n)
        }
        None => {
            let g = model.default_grid();
            l.record("grid", &format!("{}:{}:{}", g[0], g[g.len() - 1], g.len()));
            g
        }
    };
    let format = l.get("format", a.format, Format::Csv)?;
    let resolved = l.finish()?;

    let curve = model.curve(&grid)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let mut w = create(&a.out)?;
    match format {
        Format::Csv => curve.write_csv(&mut w)?,
        Format::Json => {
            serde_json::to_writer(&mut w, &json!({"lambda": curve.lambda_grid, "value": curve.values}))
                .map_err(betadyn::Error::from)?;
            writeln!(w).map_err(betadyn::Error::from)?;
        }
    }
    w.flush().map_err(betadyn::Error::from)?;

    let mut m = Manifest::new("density", resolved, None);
    m.counters = json!({"points": grid.len(), "mass": curve.total_mass()});
    m.outputs = vec![file_name(&a.out), file_name(&sidecar(&a.out))];
    write_manifest(&sidecar(&a.out), &m)
}

fn kind_name(kind: DensityKind) -> &'static str {
    match kind {
        DensityKind::Gaussian => "gaussian",
        DensityKind::Semicircle => "semicircle",
        DensityKind::Kerov => "kerov",
        DensityKind::Corrected => "corrected",
    }
}

pub fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let mut l = Layered::load(a.config.as_deref(), "analyze")?;
    let what = l.require("what", a.what)?;
    let input: String = l.require("input", a.input.clone())?;
    let text = fs::read_to_string(&input).map_err(|e| CliError::config("input", format!("cannot read {input}: {e}")))?;
    let samples = read_samples_csv(&text).map_err(|e| CliError::config("input", e.to_string()))?;
    if samples.is_empty() {
        return Err(CliError::config("input", format!("{input} holds no samples")));
    }
    let n_dim = samples[0].lambdas.len();

    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let counters = match what {
        AnalyzeKind::Nnsd => analyze_nnsd(&mut l, &a, &samples, n_dim)?,
        AnalyzeKind::Histogram => analyze_histogram(&mut l, &a, &samples)?,
        AnalyzeKind::Moments => analyze_moments(&mut l, &a, &samples, n_dim)?,
    };
    let resolved = l.finish()?;
    let mut m = Manifest::new("analyze", resolved, None);
    m.counters = counters;
    m.outputs = vec![file_name(&a.out), file_name(&sidecar(&a.out))];
    write_manifest(&sidecar(&a.out), &m)
}

fn check_beta(beta: Option<f64>) -> Result<(), CliError> {
    match beta {
        Some(b) if !(0.0..2.0).contains(&b) => Err(CliError::config("beta", format!("must lie in [0, 2), got {b}"))),
        _ => Ok(()),
    }
}

fn analyze_nnsd(l: &mut Layered, a: &AnalyzeArgs, samples: &[SpectrumSample], n_dim: usize) -> Result<Value, CliError> {
    let beta: Option<f64> = l.opt("beta", a.beta)?;
    check_beta(beta)?;
    let sigma = l.get("sigma", a.sigma, 1.0)?;
    let bulk = l.get("bulk-fraction", a.bulk_fraction, 0.5)?;
    let bins = l.get("bins", a.bins, 50usize)?;
    let range: String = l.get("range", a.range.clone(), "0:4".to_string())?;
    let (lo, hi) = parse_range("range", &range)?;
    let default_ref = if beta.is_some() { Reference::Surmise } else { Reference::None };
    let reference = l.get("ref", a.reference, default_ref)?;
    if reference == Reference::Surmise && beta.is_none() {
        return Err(CliError::config("ref", "the surmise reference needs --beta"));
    }
    if !(bulk > 0.0 && bulk <= 1.0) {
        return Err(CliError::config("bulk-fraction", format!("must lie in (0, 1], got {bulk}")));
    }
    if bins < 2 {
        return Err(CliError::config("bins", "need at least 2 bins"));
    }
    if !(sigma > 0.0) {
        return Err(CliError::config("sigma", format!("must be positive, got {sigma}")));
    }

    let model = beta.map(|beta| DensityModel::Corrected { beta, n_dim, sigma });
    let set = nns(samples, bulk, model.as_ref())?;
    let hist = Histogram::from_values(&set.spacings, bins, lo, hi)?;
    let mut sorted = set.spacings.clone();
    sorted.sort_by(f64::total_cmp);

    let surmise_beta = beta.filter(|_| reference == Reference::Surmise);
    let pdf = |s: f64| match surmise_beta {
        Some(b) if b > 0.0 => wigner_surmise(b, s).unwrap_or(f64::NAN),
        _ => (-s).exp(),
    };
    let mut w = create(&a.out)?;
    match surmise_beta {
        Some(_) => write_nnsd_csv(&mut w, &hist, Some(&pdf))?,
        None => write_nnsd_csv(&mut w, &hist, None)?,
    }
    w.flush().map_err(betadyn::Error::from)?;

    let ks = surmise_beta.map(|b| {
        if b > 0.0 {
            ks_distance(&sorted, |x| wigner_surmise_cdf(b, x).unwrap_or(f64::NAN))
        } else {
            ks_distance(&sorted, |x| 1.0 - (-x).exp())
        }
    });
    let exponent = small_spacing_exponent(&sorted, 0.05, 0.3).ok();
    Ok(json!({
        "n_samples": set.n_samples,
        "n_levels": n_dim,
        "spacings": set.spacings.len(),
        "dropped": set.dropped,
        "bulk_fraction": set.bulk_fraction,
        "outside_range": hist.outside,
        "ks_reference": ks,
        "small_s_exponent": exponent.map(|e| json!({"value": e.value, "std_error": e.std_error})),
    }))
}

fn analyze_histogram(l: &mut Layered, a: &AnalyzeArgs, samples: &[SpectrumSample]) -> Result<Value, CliError> {
    let bins = l.get("bins", a.bins, 100usize)?;
    if bins < 2 {
        return Err(CliError::config("bins", "need at least 2 bins"));
    }
    let draws = pooled(samples);
    let (lo, hi) = match l.opt::<String>("range", a.range.clone())? {
        Some(r) => parse_range("range", &r)?,
        None => {
            let lo = draws.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(lo < hi) {
                return Err(CliError::config("range", "data span is empty; give --range"));
            }
            l.record("range", &format!("{lo}:{hi}"));
            (lo, hi)
        }
    };
    let hist = Histogram::from_values(&draws, bins, lo, hi)?;
    let mut w = create(&a.out)?;
    hist.to_curve()?.write_csv(&mut w)?;
    w.flush().map_err(betadyn::Error::from)?;
    Ok(json!({"n_samples": samples.len(), "values": draws.len(), "outside_range": hist.outside}))
}

fn analyze_moments(l: &mut Layered, a: &AnalyzeArgs, samples: &[SpectrumSample], n_dim: usize) -> Result<Value, CliError> {
    let beta: Option<f64> = l.opt("beta", a.beta)?;
    check_beta(beta)?;
    let sigma = l.get("sigma", a.sigma, 1.0)?;
    let mut w = create(&a.out)?;
    let io = |e: std::io::Error| CliError::Run(e.into());
    writeln!(w, "k,value,std_error").map_err(io)?;
    println!("{:<4}{:>14}{:>12}{:>14}", "k", "measured", "SE", "expected");
    let mut rows = Vec::new();
    for k in 1..=4 {
        let e = moment(samples, k)?;
        writeln!(w, "{k},{},{}", e.value, e.std_error).map_err(io)?;
        // Exact finite-N values exist for the odd moments and for m2.
        let expected = match (k, beta) {
            (1 | 3, _) => Some(0.0),
            (2, Some(b)) => Some(sigma * sigma * (1.0 + b * (n_dim as f64 - 1.0) / 2.0)),
            _ => None,
        };
        let shown = expected.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!("{k:<4}{:>14.6}{:>12.6}{:>14}", e.value, e.std_error, shown);
        rows.push(json!({"k": k, "value": e.value, "std_error": e.std_error, "expected": expected}));
    }
    w.flush().map_err(io)?;
    Ok(json!({"n_samples": samples.len(), "n_levels": n_dim, "moments": rows}))
}
