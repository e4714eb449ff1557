use std::fs;

use betadyn::density::{kerov_moment, linspace, ode_residual, tail_exponent_check, DensityModel};
use betadyn::eigen_sde::{self, SdeConfig, SdeMode};
use betadyn::io::Manifest;
use betadyn::special_fn::{pcf_quadrature_eval, pcf_weber_ode, weber_trajectory};
use betadyn::spectral_stats::moment;
use betadyn::ComplexVal;
use serde_json::{json, Value};

use crate::config::Layered;
use crate::error::CliError;
use crate::{Suite, VerifyArgs};

struct Report {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    failures: usize,
}

impl Report {
    fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new(), failures: 0 }
    }

    fn push(&mut self, mut cells: Vec<String>, status: Option<bool>) {
        cells.push(match status {
            Some(true) => "ok".into(),
            Some(false) => {
                self.failures += 1;
                "FAIL".into()
            }
            None => "info".into(),
        });
        self.rows.push(cells);
    }

    fn print(&self) {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: Vec<&str>| {
            let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
            println!("{}", padded.join("  ").trim_end());
        };
        line(self.header.clone());
        for r in &self.rows {
            line(r.iter().map(String::as_str).collect());
        }
    }

    fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.header.iter().map(|h| h.to_string()).zip(r.iter().map(|c| json!(c))).collect()))
            .collect();
        json!(rows)
    }
}

pub fn verify(a: VerifyArgs) -> Result<(), CliError> {
    let mut l = Layered::load(a.config.as_deref(), "verify")?;
    let suite = l.require("suite", a.suite)?;
    let report = match suite {
        Suite::Moments => moments(&mut l, &a)?,
        Suite::Density => density(&mut l, &a)?,
        Suite::Special => special()?,
    };
    let resolved = l.finish()?;
    report.print();

    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| CliError::config("out", format!("cannot create {}: {e}", dir.display())))?;
        let seed = resolved.get("seed").and_then(Value::as_u64);
        let mut m = Manifest::new("verify", resolved, seed);
        m.counters = json!({"rows": report.to_json(), "failures": report.failures});
        m.outputs = vec!["manifest.json".into()];
        fs::write(dir.join("manifest.json"), m.to_json()?).map_err(betadyn::Error::from)?;
    }
    if report.failures > 0 {
        return Err(CliError::Failed(format!("verification failed: {} check(s) out of tolerance", report.failures)));
    }
    Ok(())
}

/// Crossover gas at `c/N` against the limiting moments `1 + c` and `(1 + c)(2c + 3)`.
fn moments(l: &mut Layered, a: &VerifyArgs) -> Result<Report, CliError> {
    let c = l.get("c-param", a.c_param, 1.0)?;
    let n_dim = l.get("n-dim", a.n_dim, 20usize)?;
    let cfg = SdeConfig {
        n_dim,
        mode: SdeMode::Crossover { c },
        n_samples: l.get("samples", a.samples, 1000)?,
        seed: l.get("seed", a.seed, 0)?,
        ..SdeConfig::fixed_beta(n_dim, 0.0)
    };
    cfg.validate().map_err(CliError::from_validation)?;
    let samples = eigen_sde::simulate(&cfg)?;
    let m2 = moment(&samples, 2)?;
    let m4 = moment(&samples, 4)?;

    println!("suite moments: crossover c={c}, N={n_dim}, {} samples, seed {}", cfg.n_samples, cfg.seed);
    let mut r = Report::new(vec!["quantity", "expected", "finite-N", "measured", "SE", "status"]);
    let limit2 = kerov_moment(c, 2)?;
    let finite2 = 1.0 + c * (n_dim as f64 - 1.0) / n_dim as f64;
    let ok2 = (m2.value - finite2).abs() <= 3.0 * m2.std_error && (m2.value - limit2).abs() <= 0.05 * limit2;
    r.push(
        vec!["m2".into(), format!("{limit2}"), format!("{finite2:.4}"), format!("{:.4}", m2.value), format!("{:.4}", m2.std_error)],
        Some(ok2),
    );
    let limit4 = kerov_moment(c, 4)?;
    r.push(
        vec!["m4".into(), format!("{limit4}"), "-".into(), format!("{:.4}", m4.value), format!("{:.4}", m4.std_error)],
        None,
    );
    Ok(r)
}

fn density(l: &mut Layered, a: &VerifyArgs) -> Result<Report, CliError> {
    let cs = match l.opt("c-param", a.c_param)? {
        Some(c) => vec![c],
        None => vec![0.0, 0.5, 1.0, 2.0, 4.0],
    };
    let zs = [ComplexVal::new(0.0, 1.5), ComplexVal::new(1.0, 2.0), ComplexVal::new(-2.0, 1.0)];
    println!("suite density: crossover densities on 4001-point grids");
    let mut r = Report::new(vec!["c", "|mass-1|", "m2 rel", "m4 rel", "residual", "tail k", "status"]);
    for c in cs {
        let model = DensityModel::Kerov { c };
        model.validate().map_err(|e| CliError::config("c-param", e.to_string()))?;
        let half = 12.0 + 4.0 * (1.0 + c).sqrt();
        let curve = model.curve(&linspace(-half, half, 4001))?;
        let mass = (curve.total_mass() - 1.0).abs();
        let m2 = (curve.moment(2) / kerov_moment(c, 2)? - 1.0).abs();
        let m4 = (curve.moment(4) / kerov_moment(c, 4)? - 1.0).abs();
        let res = ode_residual(c, &curve, &zs);
        let mut ok = mass <= 1e-5 && m2 <= 1e-4 && m4 <= 1e-3 && res <= 5e-3;
        let tail = if c >= 0.0 {
            let k = tail_exponent_check(c)?;
            ok &= (k - 2.0 * c).abs() <= 0.1;
            format!("{k:.3} ({})", 2.0 * c)
        } else {
            "-".into()
        };
        r.push(vec![format!("{c}"), format!("{mass:.1e}"), format!("{m2:.1e}"), format!("{m4:.1e}"), format!("{res:.1e}"), tail], Some(ok));
    }
    Ok(r)
}

/// Quadrature against the Weber ODE on a lattice, and Wronskian conservation along it.
fn special() -> Result<Report, CliError> {
    println!("suite special: D_{{-c}}(i x) by quadrature and by the Weber equation");
    let mut r = Report::new(vec!["c", "max |dlog|D|^2|", "Wronskian drift", "status"]);
    for c in [0.25, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let mut lattice = 0f64;
        for e in pcf_weber_ode(c, &[0.0, 0.5, 1.0, 2.0, 5.0])? {
            lattice = lattice.max((pcf_quadrature_eval(c, e.lambda)?.log_abs2 - e.log_abs2).abs());
        }
        let traj = weber_trajectory(c, &linspace(0.0, 10.0, 101))?;
        let w0 = traj[0].ln_abs_wronskian();
        let drift = traj.iter().map(|s| ((s.ln_abs_wronskian() - w0).exp() - 1.0).abs()).fold(0.0, f64::max);
        r.push(vec![format!("{c}"), format!("{lattice:.1e}"), format!("{drift:.1e}")], Some(lattice <= 1e-7 && drift <= 1e-8));
    }
    Ok(r)
}
