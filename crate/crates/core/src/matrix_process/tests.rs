use super::*;
use crate::density::eval_gaussian;
use crate::spectral_stats::{moment, pooled};
use proptest::prelude::*;

fn rows(n: usize, seed: u64) -> Vec<StreamRng> {
    (0..n as u64).map(|i| stream(seed, 0, Role::MatrixRow, i)).collect()
}

fn check_invariants(m: &SymMatrixState, es: &EigenSystem) {
    let scale = m.m.iter().fold(0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    assert!(es.orthogonality_error() <= 1e-10, "{}", es.orthogonality_error());
    assert!(es.reconstruction_error(m) <= 1e-9 * scale, "{}", es.reconstruction_error(m));
    assert!(es.values.windows(2).all(|w| w[0] <= w[1]));
    for i in 0..es.n {
        let v = es.vector(i);
        let big = v.iter().cloned().fold(0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        assert!(big > 0.0);
    }
}

#[test]
fn eigh_identity() {
    let m = SymMatrixState::diagonal(&[1.0, 1.0, 1.0]);
    let es = eigh(&m).unwrap();
    assert_eq!(es.values, vec![1.0, 1.0, 1.0]);
    check_invariants(&m, &es);
}

#[test]
fn eigh_diagonal_permutes_axes() {
    let m = SymMatrixState::diagonal(&[3.0, 1.0, 2.0]);
    let es = eigh(&m).unwrap();
    assert_eq!(es.values, vec![1.0, 2.0, 3.0]);
    assert_eq!(es.vector(0), vec![0.0, 1.0, 0.0]);
    assert_eq!(es.vector(1), vec![0.0, 0.0, 1.0]);
    assert_eq!(es.vector(2), vec![1.0, 0.0, 0.0]);
}

#[test]
fn eigh_two_by_two() {
    let m = SymMatrixState::from_upper(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
    let es = eigh(&m).unwrap();
    assert!((es.values[0] + 1.0).abs() < 1e-15 && (es.values[1] - 1.0).abs() < 1e-15);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // Equal-magnitude components: the first is the one made positive.
    let v0 = es.vector(0);
    let v1 = es.vector(1);
    assert!((v0[0] - h).abs() < 1e-15 && (v0[1] + h).abs() < 1e-15, "{v0:?}");
    assert!((v1[0] - h).abs() < 1e-15 && (v1[1] - h).abs() < 1e-15, "{v1:?}");
}

#[test]
fn eigh_zero_and_scalar() {
    let es = eigh(&SymMatrixState::zeros(4)).unwrap();
    assert_eq!(es.values, vec![0.0; 4]);
    let es = eigh(&SymMatrixState::diagonal(&[-2.5])).unwrap();
    assert_eq!(es.values, vec![-2.5]);
    assert_eq!(es.vectors, vec![1.0]);
    assert!(eigh_dense(2, &[1.0, f64::NAN, f64::NAN, 0.0]).is_err());
}

#[test]
fn eigh_matches_characteristic_polynomial() {
    // Tridiagonal 2,-1 matrix: eigenvalues 2 - 2cos(kπ/(n+1)).
    let n = 12;
    let mut m = SymMatrixState::zeros(n);
    for i in 0..n {
        m.m[i * n + i] = 2.0;
        if i + 1 < n {
            m.set_sym(i, i + 1, -1.0);
        }
    }
    let es = eigh(&m).unwrap();
    for (k, v) in es.values.iter().enumerate() {
        let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
        assert!((v - exact).abs() < 1e-13, "{k}: {v} vs {exact}");
    }
    check_invariants(&m, &es);
}

#[test]
fn snapshot_round_trip() {
    let mut r = rows(5, 1);
    let mut m = SymMatrixState::zeros(5);
    step_free(&mut m, 0.3, 1.0, &mut r);
    let mut buf = Vec::new();
    m.write_snapshot(&mut buf).unwrap();
    assert_eq!(buf.len(), 16 + 25 * 8);
    assert_eq!(&buf[..8], &5u64.to_le_bytes());
    let back = SymMatrixState::read_snapshot(&buf[..]).unwrap();
    assert_eq!(back, m);
    assert!(SymMatrixState::read_snapshot(&buf[..20]).is_err());
}

#[test]
fn increment_variances() {
    let mut r = rows(3, 2);
    let (dt, sigma) = (0.01, 1.3);
    let draws: Vec<SymMatrixState> = (0..10_000).map(|_| brownian_increment(3, dt, sigma, &mut r)).collect();
    let off: Vec<f64> = draws.iter().map(|d| d.get(0, 2).powi(2)).collect();
    let diag: Vec<f64> = draws.iter().map(|d| d.get(1, 1).powi(2)).collect();
    let tr: Vec<f64> = draws.iter().map(|d| d.trace().powi(2)).collect();
    let s2 = sigma * sigma;
    for (vals, exact) in [(off, s2 * dt / 2.0), (diag, s2 * dt), (tr, 3.0 * s2 * dt)] {
        let e = mean_estimate(&vals, 50);
        assert!((e.value - exact).abs() < 3.0 * e.std_error, "{e:?} vs {exact}");
    }
    assert!(draws.iter().all(|d| d.is_symmetric()));
}

#[test]
fn commuting_trace_increment_variance() {
    let mut r = rows(4, 3);
    let basis = eigh(&SymMatrixState::from_upper(4, &[1.0, 0.3, -0.2, 0.0, 0.0, 2.0, 0.5, 0.1, 0.0, 0.0, -1.0, 0.7, 0.0, 0.0, 0.0, 0.4]).unwrap()).unwrap();
    let dt = 0.01;
    let incs: Vec<f64> = (0..10_000)
        .map(|_| {
            let mut m = SymMatrixState::zeros(4);
            step_commuting(&mut m, dt, 1.0, &mut r, &basis);
            m.trace().powi(2)
        })
        .collect();
    let e = mean_estimate(&incs, 50);
    assert!((e.value - 4.0 * dt).abs() < 3.0 * e.std_error, "{e:?}");
}

#[test]
fn commuting_step_keeps_eigenvectors() {
    let mut m = SymMatrixState::from_upper(4, &[1.0, 0.3, -0.2, 0.0, 0.0, 2.0, 0.5, 0.1, 0.0, 0.0, -1.0, 0.7, 0.0, 0.0, 0.0, 0.4]).unwrap();
    let before = eigh(&m).unwrap();
    let mut r = rows(4, 4);
    for _ in 0..10 {
        step_commuting(&mut m, 1e-3, 1.0, &mut r, &before);
        assert!(m.is_symmetric());
    }
    let after = eigh(&m).unwrap();
    for i in 0..4 {
        let dot: f64 = before.vector(i).iter().zip(after.vector(i)).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-9, "{i}: {dot}");
    }
}

#[test]
fn fast_commuting_interval_matches_literal_steps() {
    let cfg = MatrixConfig { p: 0.0, switch_rate: 10, dt: 0.01, ..MatrixConfig::new(5, 0.0) };
    let mut start = SymMatrixState::zeros(5);
    step_free(&mut start, 1.0, 1.0, &mut rows(5, 9));
    let mut sim = MatrixSimulator::new(&cfg, start.clone()).unwrap();
    sim.interval().unwrap();

    let basis = eigh(&start).unwrap();
    let mut r: Vec<StreamRng> = (0..5u64).map(|i| stream(cfg.seed, 0, Role::MatrixRow, i)).collect();
    let mut m = start;
    for _ in 0..10 {
        step_commuting(&mut m, cfg.dt, cfg.sigma, &mut r, &basis);
    }
    let worst = m.m.iter().zip(&sim.state().m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn config_validation() {
    let base = MatrixConfig::new(4, 0.5);
    assert!(base.validate().is_ok());
    for bad in [
        MatrixConfig { p: 1.5, ..base.clone() },
        MatrixConfig { switch_rate: 0, ..base.clone() },
        MatrixConfig { dt: 3e-3, ..base.clone() },
        MatrixConfig { sample_stride: 0.015, ..base.clone() },
        MatrixConfig { n_dim: 0, ..base.clone() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
    }
}

#[test]
fn deterministic_and_symmetric() {
    let cfg = MatrixConfig { burn_in: 0.5, n_samples: 5, sample_stride: 0.1, seed: 5, ..MatrixConfig::new(4, 0.5) };
    let a = simulate_switched(&cfg).unwrap();
    let b = simulate_switched(&cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.final_state.is_symmetric());
    assert!(a.samples.iter().all(|s| s.is_sorted()));
    assert_eq!(simulate_replicas(&cfg, 2).unwrap()[0], a);
    assert!(a.counters.intervals_on > 0 && a.counters.intervals_on < a.counters.intervals);
}

#[test]
fn scalar_case_is_ou() {
    let cfg = MatrixConfig { burn_in: 10.0, n_samples: 10_000, sample_stride: 1.0, seed: 6, switch_rate: 10, dt: 0.01, ..MatrixConfig::new(1, 0.5) };
    let m2 = moment(&simulate_switched(&cfg).unwrap().samples, 2).unwrap();
    assert!((m2.value - 1.0).abs() < 3.0 * m2.std_error, "{m2:?}");
}

#[test]
fn free_process_trace_of_square() {
    let n = 30;
    let cfg = MatrixConfig { burn_in: 20.0, n_samples: 200, sample_stride: 1.0, seed: 7, ..MatrixConfig::new(n, 1.0) };
    let run = simulate_switched(&cfg).unwrap();
    let m2 = moment(&run.samples, 2).unwrap();
    // E Tr M² = N σ² (N+1)/2, and Tr M² = N·m₂.
    let exact = n as f64 * (n as f64 + 1.0) / 2.0;
    assert!((n as f64 * m2.value - exact).abs() < 0.05 * exact, "{m2:?}");
}

#[test]
fn trace_variance_does_not_depend_on_p() {
    for p in [0.0, 0.5, 1.0] {
        let cfg = MatrixConfig { burn_in: 10.0, n_samples: 20_000, sample_stride: 1.0, seed: 8, switch_rate: 10, dt: 0.01, ..MatrixConfig::new(4, p) };
        let run = simulate_switched(&cfg).unwrap();
        let tr2: Vec<f64> = run.samples.iter().map(|s| s.lambdas.iter().sum::<f64>().powi(2)).collect();
        let e = mean_estimate(&tr2, 50);
        assert!((e.value - 4.0).abs() < 0.05 * 4.0, "p={p}: {e:?}");
    }
}

#[test]
fn commuting_only_gives_gaussian_eigenvalues() {
    let cfg = MatrixConfig { burn_in: 20.0, n_samples: 2000, sample_stride: 2.0, seed: 10, switch_rate: 10, dt: 0.01, ..MatrixConfig::new(10, 0.0) };
    let run = simulate_switched(&cfg).unwrap();
    assert_eq!(run.counters.intervals_on, 0);
    let pool = pooled(&run.samples);
    assert!(pool.len() >= 10_000);
    let ks = ks_distance(&pool, |x| 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2));
    assert!(ks < 0.02, "{ks}");
    let _ = eval_gaussian;
}

#[test]
fn rotated_start_with_rotated_noise_gives_same_spectrum() {
    let n = 5;
    // A rotation built from the eigenvectors of a fixed matrix.
    let r = eigh(&SymMatrixState::from_upper(n, &(0..n * n).map(|k| ((k * 7 % 11) as f64 - 5.0) / 3.0).collect::<Vec<_>>()).unwrap()).unwrap().vectors;
    let rot = |m: &SymMatrixState| -> SymMatrixState {
        let mut out = SymMatrixState::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += r[i * n + a] * m.get(a, b) * r[j * n + b];
                    }
                }
                out.set_sym(i, j, acc);
            }
        }
        out.t = m.t;
        out
    };
    let mut a = SymMatrixState::diagonal(&[0.3, -1.0, 2.0, 0.7, -0.2]);
    a.set_sym(0, 3, 0.4);
    let mut b = rot(&a);
    let mut r_noise = rows(n, 11);
    let mut sched = stream(11, 0, Role::Schedule, 0);
    let dt = 0.01;
    for _ in 0..200 {
        if rand::Rng::random::<f64>(&mut sched) < 0.5 {
            let dh = brownian_increment(n, dt, 1.0, &mut r_noise);
            step_free_with(&mut a, dt, &dh);
            step_free_with(&mut b, dt, &rot(&dh));
        } else {
            let (ba, bb) = (eigh(&a).unwrap(), eigh(&b).unwrap());
            let xi: Vec<f64> = r_noise.iter_mut().map(|g| 0.1 * normal(g)).collect();
            step_commuting_with(&mut a, dt, &ba, &xi);
            step_commuting_with(&mut b, dt, &bb, &xi);
        }
        let (ea, eb) = (eigh(&a).unwrap().values, eigh(&b).unwrap().values);
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x - y).abs() < 1e-9, "{ea:?} {eb:?}");
        }
    }
}

#[test]
fn haar_overlaps_small_n() {
    // N=2 free dynamics: eigenvectors are uniform on the circle.
    let cfg = MatrixConfig { burn_in: 10.0, n_samples: 3000, sample_stride: 2.0, seed: 12, switch_rate: 10, dt: 0.01, record_vectors: true, ..MatrixConfig::new(2, 1.0) };
    let run = simulate_switched(&cfg).unwrap();
    let ov = haar_overlap_samples(&run.snapshots, &[1.0, 0.0], 0).unwrap();
    let rep = haar_test(&ov, 2, 0.05).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn frozen_basis_fails_haar_test() {
    let cfg = MatrixConfig { burn_in: 2.0, n_samples: 500, sample_stride: 2.0, seed: 13, switch_rate: 10, dt: 0.01, record_vectors: true, ..MatrixConfig::new(6, 0.0) };
    let start = SymMatrixState::diagonal(&[-2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    let run = simulate_switched_from(&cfg, start).unwrap();
    let mut e = vec![0.0; 6];
    e[0] = 1.0;
    let ov = haar_overlap_samples(&run.snapshots, &e, 3).unwrap();
    assert!(ov.iter().all(|&x| x == 0.0 || x == 1.0));
    assert!(!haar_test(&ov, 6, 0.05).unwrap().passed);
}

#[test]
fn overlap_input_checks() {
    let es = eigh(&SymMatrixState::diagonal(&[1.0, 2.0])).unwrap();
    assert!(haar_overlap_samples(&[es.clone()], &[1.0, 1.0], 0).is_err());
    assert!(haar_overlap_samples(&[es.clone()], &[1.0, 0.0], 2).is_err());
    assert!((haar_overlap_samples(&[es], &[0.6, 0.8], 1).unwrap()[0] - 0.64).abs() < 1e-15);
}

proptest! {
    #[test]
    fn eigh_invariants_hold(n in 1usize..9, seed in 0u64..10_000, scale in 1e-3f64..1e3) {
        let mut m = SymMatrixState::zeros(n);
        step_free(&mut m, 1.0, scale, &mut rows(n, seed));
        prop_assert!(m.is_symmetric());
        let es = eigh(&m).unwrap();
        check_invariants(&m, &es);
        let tr: f64 = es.values.iter().sum();
        prop_assert!((tr - m.trace()).abs() <= 1e-12 * scale * n as f64);
    }

    #[test]
    fn eigh_handles_degenerate_blocks(k in 1usize..4, x in -5.0f64..5.0, seed in 0u64..1000) {
        // Q diag(x,…,x,x+1,…) Qᵀ with a repeated eigenvalue.
        let n = 2 * k;
        let q = eigh(&{ let mut m = SymMatrixState::zeros(n); step_free(&mut m, 1.0, 1.0, &mut rows(n, seed)); m }).unwrap();
        let d: Vec<f64> = (0..n).map(|i| if i < k { x } else { x + 1.0 }).collect();
        let m = q.compose(&d);
        let es = eigh(&m).unwrap();
        check_invariants(&m, &es);
        for (v, e) in es.values.iter().zip(&d) {
            prop_assert!((v - e).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }
}
