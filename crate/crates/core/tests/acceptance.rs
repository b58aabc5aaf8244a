//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use dronesound::analysis::{
    ap_subset_sweep, default_counts, draw_subset, multi_user_sinr_samples, FrequencyPooling, MultiUserSettings,
    SweepSettings,
};
use dronesound::channel::{average_gain, db_to_linear, rms_gain_error, ChannelRecord, GainProfile, SoundingDataset};
use dronesound::combining::{
    optimum_sinr_bound, optimum_vector, sinr, ue_sinr, uplink_snr, ChannelMatrix, CombiningMethod, LinkBudget,
};
use dronesound::config::RunConfig;
use dronesound::error::Error;
use dronesound::field::{EnvironmentModel, PortSelection, ShadowingField, SyntheticField};
use dronesound::format::{read_dataset, write_dataset, FORMAT_VERSION};
use dronesound::pipeline;
use dronesound::seed::SeedHasher;
use dronesound::sounder::{campaign_with_trials, plan_captures, FlightOptions, FlightPlan, UeSpec};
use dronesound::{Complex64, Point3};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::Path;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("runtime {elapsed:.2?} exceeds {limit:?}"))
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

// ---------------------------------------------------------------- 1

fn capture_geometry() -> Outcome {
    let start = Instant::now();
    let plan = FlightPlan::default();
    check(plan.capture_spacing_m() == 0.2, || {
        format!("spacing {} != 0.2", plan.capture_spacing_m())
    })?;
    check(plan.path_length() == 1200.0, || format!("default loop is {} m", plan.path_length()))?;
    let s = plan_captures(&plan).map_err(|e| e.to_string())?;
    check(s.len() == 6001, || format!("{} captures on the 1200 m loop", s.len()))?;
    check((s.duration_s() - 300.0).abs() < 1e-6, || format!("duration {} s", s.duration_s()))?;
    let worst = s
        .positions
        .windows(2)
        .map(|w| (w[1].distance(w[0]) - 0.2).abs())
        .fold(0.0, f64::max);
    check(worst < 1e-9, || format!("spacing deviation {worst:e} m"))?;

    let straight = FlightPlan {
        waypoints: vec![[0.0, 0.0], [240.0, 0.0]],
        ..FlightPlan::default()
    };
    let s240 = plan_captures(&straight).map_err(|e| e.to_string())?;
    check(s240.len() == 1201, || format!("{} captures on 240 m", s240.len()))?;
    check((s240.duration_s() - 60.0).abs() < 1e-6, || format!("240 m takes {} s", s240.duration_s()))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("6001 captures, {:.6} s, spacing error {worst:.1e} m", s.duration_s()))
}

// ---------------------------------------------------------------- 2, 3

struct Instance {
    h: Vec<Complex64>,
    interferers: Vec<Vec<Complex64>>,
}

fn complex_gaussian(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * (scale / 2f64.sqrt())
}

/// Random instances with per-AP SNR between -5 and 35 dB at default budget.
fn instances() -> Vec<Instance> {
    (0..1000u64)
        .map(|i| {
            let mut rng = SeedHasher::new(0xACCE).word(i).rng();
            let m = rng.random_range(1..=32);
            let k = rng.random_range(1..=8);
            let ap_scale: Vec<f64> = (0..m)
                .map(|_| 10f64.powf(rng.random_range(-95.0..-55.0) / 20.0))
                .collect();
            let column = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
                ap_scale.iter().map(|&s| complex_gaussian(rng, s)).collect()
            };
            let h = column(&mut rng);
            let interferers = (1..k).map(|_| column(&mut rng)).collect();
            Instance { h, interferers }
        })
        .collect()
}

fn to_na(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}

/// `p sum h_i h_i^H + s2 I` built with nalgebra.
fn na_interference_plus_noise(inst: &Instance, budget: &LinkBudget) -> DMatrix<Complex64> {
    let m = inst.h.len();
    let mut b = DMatrix::<Complex64>::identity(m, m) * Complex64::new(budget.noise_mw(), 0.0);
    for g in &inst.interferers {
        let g = to_na(g);
        b += &g * g.adjoint() * Complex64::new(budget.power_mw(), 0.0);
    }
    b
}

/// Largest generalized eigenvalue of `(p h h^H, B)`, via whitening with
/// `B^{-1/2}` from a Hermitian eigendecomposition and a second
/// eigendecomposition of the whitened signal matrix.
fn generalized_eigen_oracle(inst: &Instance, budget: &LinkBudget) -> f64 {
    let b = na_interference_plus_noise(inst, budget);
    let eig = SymmetricEigen::new(b);
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.powf(-0.5), 0.0)));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    let x = &w * to_na(&inst.h);
    let a = &x * x.adjoint() * Complex64::new(budget.power_mw(), 0.0);
    let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(a).eigenvalues.max()
}

fn refs(inst: &Instance) -> Vec<&[Complex64]> {
    inst.interferers.iter().map(Vec::as_slice).collect()
}

fn rayleigh_optimality() -> Outcome {
    let start = Instant::now();
    let budget = LinkBudget::default();
    let mut worst_probe = f64::NEG_INFINITY;
    let mut worst_oracle = 0.0f64;
    let mut probes = 0usize;
    for (i, inst) in instances().iter().enumerate() {
        let ints = refs(inst);
        let v = optimum_vector(&inst.h, &ints, &budget).map_err(|e| e.to_string())?;
        let s_opt = sinr(&v, &inst.h, &ints, &budget).map_err(|e| e.to_string())?.linear;
        let mut rng = SeedHasher::new(0x9807E).word(i as u64).rng();
        for _ in 0..100 {
            let w: Vec<Complex64> = (0..inst.h.len()).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let s_w = sinr(&w, &inst.h, &ints, &budget).map_err(|e| e.to_string())?.linear;
            worst_probe = worst_probe.max((s_w - s_opt) / s_opt);
            probes += 1;
            check(s_w <= s_opt * (1.0 + 1e-9), || {
                format!("instance {i}: probe SINR {s_w:e} beats optimum {s_opt:e}")
            })?;
        }
        let oracle = generalized_eigen_oracle(inst, &budget);
        let err = rel(s_opt, oracle);
        worst_oracle = worst_oracle.max(err);
        check(err <= 1e-9, || {
            format!("instance {i}: optimum {s_opt:e} vs eigen oracle {oracle:e} (rel {err:e})")
        })?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "1000 instances, {probes} probes; max probe excess {worst_probe:.2e}, max oracle rel err {worst_oracle:.2e}"
    ))
}

fn bound_attainment() -> Outcome {
    let budget = LinkBudget::default();
    let mut worst = 0.0f64;
    for (i, inst) in instances().iter().enumerate() {
        let ints = refs(inst);
        let v = optimum_vector(&inst.h, &ints, &budget).map_err(|e| e.to_string())?;
        let s_opt = sinr(&v, &inst.h, &ints, &budget).map_err(|e| e.to_string())?.linear;
        let bound = optimum_sinr_bound(&inst.h, &ints, &budget).map_err(|e| e.to_string())?.linear;
        // independent evaluation of p h^H B^{-1} h
        let b = na_interference_plus_noise(inst, &budget);
        let h = to_na(&inst.h);
        let x = b.lu().solve(&h).ok_or("nalgebra LU failed")?;
        let direct = budget.power_mw() * h.dotc(&x).re;
        for (name, reference) in [("closed form", bound), ("direct solve", direct)] {
            let err = rel(s_opt, reference);
            worst = worst.max(err);
            check(err <= 1e-9, || {
                format!("instance {i}: SINR {s_opt:e} vs {name} {reference:e} (rel {err:e})")
            })?;
        }
    }
    Ok(format!("1000 instances, max rel err {worst:.2e}"))
}

// ---------------------------------------------------------------- 4

fn short_flight(n_freq: usize) -> Result<SoundingDataset, Error> {
    let env = EnvironmentModel {
        n_freq,
        seed: 4,
        ..EnvironmentModel::default()
    };
    let field = SyntheticField::new(env)?;
    let plan = FlightPlan {
        waypoints: vec![[0.0, 0.0], [240.0, 0.0]],
        ..FlightPlan::default()
    };
    let ue = UeSpec {
        ue_id: 1,
        position: Point3::new(320.0, 30.0, 1.5),
    };
    campaign_with_trials(&plan, &field, &[ue], &[1], FlightOptions::default())
}

fn single_user_consistency() -> Outcome {
    let budget = LinkBudget::default();
    let r = uplink_snr(&[db_to_linear(-60.0)], &budget).map_err(|e| e.to_string())?;
    check(r.db == 30.0, || format!("single AP at -60 dB gives {} dB", r.db))?;

    let ds = short_flight(16).map_err(|e| e.to_string())?;
    let flight = ds.flight(1, 1).ok_or("missing flight")?;
    let gains: Vec<f64> = flight.iter().map(|r| average_gain(r).unwrap()).collect();

    // second UE with an all-zero channel on the same trajectory
    let silent: Vec<ChannelRecord> = flight
        .iter()
        .map(|r| ChannelRecord {
            ue_id: 99,
            samples: vec![Complex64::new(0.0, 0.0); r.n_freq()],
            ..r.clone()
        })
        .collect();
    let mut both = ds.clone();
    both.merge(SoundingDataset::from_records(ds.meta.clone(), silent).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;

    let mut worst = 0.0f64;
    let n_subsets = 20;
    let l = 64;
    for method in [CombiningMethod::Mr, CombiningMethod::Optimum] {
        for pooling in [FrequencyPooling::Averaged, FrequencyPooling::PerRealization] {
            let settings = MultiUserSettings {
                ue_ids: vec![1, 99],
                ap_count: l,
                method,
                n_subsets,
                seed: 21,
                pooling,
            };
            let samples = multi_user_sinr_samples(&both, &settings, &budget).map_err(|e| e.to_string())?;
            let n_freq = flight[0].n_freq();
            for s in 0..n_subsets {
                let subset = draw_subset(settings.seed, flight.len(), l, s);
                let expected: Vec<f64> = match pooling {
                    FrequencyPooling::Averaged => {
                        let picked: Vec<f64> = subset.iter().map(|&i| gains[i]).collect();
                        vec![uplink_snr(&picked, &budget).unwrap().linear]
                    }
                    FrequencyPooling::PerRealization => (0..n_freq)
                        .map(|f| {
                            let energy: f64 = subset.iter().map(|&i| flight[i].samples[f].norm_sqr()).sum();
                            budget.snr_scale() * energy
                        })
                        .collect(),
                };
                let got = &samples[0].sinr[s * expected.len()..(s + 1) * expected.len()];
                for (g, e) in got.iter().zip(&expected) {
                    let err = rel(*g, *e);
                    worst = worst.max(err);
                    check(err <= 1e-12, || {
                        format!("{method} {pooling:?} subset {s}: SINR {g:e} vs SNR {e:e} (rel {err:e})")
                    })?;
                }
            }
        }
    }

    // K = 1 channel matrices, frequency mean of per-realization SINR
    for s in 0..n_subsets {
        let subset = draw_subset(5, flight.len(), l, s);
        for method in [CombiningMethod::Mr, CombiningMethod::Optimum] {
            let mean: f64 = (0..flight[0].n_freq())
                .map(|f| {
                    let col: Vec<Complex64> = subset.iter().map(|&i| flight[i].samples[f]).collect();
                    let m = ChannelMatrix::from_columns(&[col]).unwrap();
                    ue_sinr(&m, 0, method, &budget).unwrap().linear
                })
                .sum::<f64>()
                / flight[0].n_freq() as f64;
            let picked: Vec<f64> = subset.iter().map(|&i| gains[i]).collect();
            let snr = uplink_snr(&picked, &budget).unwrap().linear;
            let err = rel(mean, snr);
            worst = worst.max(err);
            check(err <= 1e-12, || format!("K=1 {method} subset {s}: {mean:e} vs {snr:e}"))?;
        }
    }
    Ok(format!("-60 dB -> {} dB exactly; max rel err {worst:.2e}", r.db))
}

// ---------------------------------------------------------------- 5

fn optimum_dominates_mr() -> Outcome {
    let start = Instant::now();
    let mut config = RunConfig::default();
    config.environment.n_freq = 16;
    let field = pipeline::build_field(&config).map_err(|e| e.to_string())?;
    let flight = config.flight("ap35").ok_or("no ap35 flight")?;
    let ds = pipeline::sound_sinr_flight(&config, &field, flight).map_err(|e| e.to_string())?;
    let budget = config.budget;
    let mut compared = 0usize;
    let mut notes = Vec::new();
    for l in [64, 256] {
        let run = |method| {
            let settings = MultiUserSettings {
                ue_ids: config.ue_ids(),
                ap_count: l,
                method,
                n_subsets: 200,
                seed: config.seed,
                pooling: FrequencyPooling::PerRealization,
            };
            multi_user_sinr_samples(&ds, &settings, &budget).map_err(|e| e.to_string())
        };
        let opt = run(CombiningMethod::Optimum)?;
        let mr = run(CombiningMethod::Mr)?;
        for (o, m) in opt.iter().zip(&mr) {
            check(o.sinr.len() == 200 * 16, || format!("UE {} has {} samples", o.ue_id, o.sinr.len()))?;
            for (i, (so, sm)) in o.sinr.iter().zip(&m.sinr).enumerate() {
                compared += 1;
                check(*so >= sm * (1.0 - 1e-9), || {
                    format!("UE {} L={l} sample {i}: optimum {so:e} < MR {sm:e}", o.ue_id)
                })?;
            }
            let p10 = |v: &[f64]| {
                let mut db: Vec<f64> = v.iter().map(|x| 10.0 * x.log10()).collect();
                db.sort_by(f64::total_cmp);
                db[db.len() / 10]
            };
            notes.push(format!("ue{} L{l} gap@p10 {:.1} dB", o.ue_id, p10(&o.sinr) - p10(&m.sinr)));
        }
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("{compared} (UE, subset, realization) triples; {}", notes.join(", ")))
}

// ---------------------------------------------------------------- 6

fn snr_sweep_trends() -> Outcome {
    let start = Instant::now();
    let config = RunConfig::default();
    let field = pipeline::build_field(&config).map_err(|e| e.to_string())?;
    let settings = SweepSettings {
        counts: default_counts(),
        n_subsets: 2000,
        seed: config.seed,
    };
    let mut notes = Vec::new();
    for flight in &config.flights {
        let ds = pipeline::sound_flight(&config, &field, flight).map_err(|e| e.to_string())?;
        for ue in config.ue_ids() {
            let report = ap_subset_sweep(&ds, ue, &settings, &config.budget).map_err(|e| e.to_string())?;
            check(report.entries.len() == 10, || format!("{} rows for UE {ue}", report.entries.len()))?;
            for w in report.entries.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                check(b.stats.median >= a.stats.median, || {
                    format!(
                        "{} UE {ue}: median falls from {:.3} dB ({} APs) to {:.3} dB ({} APs)",
                        flight.name, a.stats.median, a.ap_count, b.stats.median, b.ap_count
                    )
                })?;
                check(b.stats.std <= a.stats.std, || {
                    format!(
                        "{} UE {ue}: std rises from {:.3} dB ({} APs) to {:.3} dB ({} APs)",
                        flight.name, a.stats.std, a.ap_count, b.stats.std, b.ap_count
                    )
                })?;
            }
            let first = &report.entries[0].stats;
            let last = &report.entries[9].stats;
            notes.push(format!("{}/ue{ue} std {:.1}->{:.1} dB", flight.name, first.std, last.std));
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(notes.join(", "))
}

// ---------------------------------------------------------------- 7

fn reproducibility() -> Outcome {
    let start = Instant::now();
    let config = RunConfig::default();
    let field = pipeline::build_field(&config).map_err(|e| e.to_string())?;
    let plan = &config.flight("ap35").ok_or("no ap35 flight")?.plan;
    check(plan.jitter_sigma_m == 0.1, || format!("jitter sigma {}", plan.jitter_sigma_m))?;
    let still = FlightPlan {
        jitter_sigma_m: 0.0,
        ..plan.clone()
    };
    let profiles = |plan: &FlightPlan, ue: UeSpec| -> Result<(GainProfile, GainProfile), String> {
        let ds = campaign_with_trials(plan, &field, &[ue], &[1, 2], FlightOptions::default()).map_err(|e| e.to_string())?;
        let p = |t| GainProfile::from_flight(ds.flight(ue.ue_id, t).unwrap()).map_err(|e| e.to_string());
        Ok((p(1)?, p(2)?))
    };
    let mut notes = Vec::new();
    for ue in &config.ues {
        let (a, b) = profiles(plan, *ue)?;
        let rms = rms_gain_error(&a, &b).map_err(|e| e.to_string())?;
        check((1.0..=5.0).contains(&rms), || format!("UE {} jittered rms {rms:.3} dB", ue.ue_id))?;
        notes.push(format!("ue{} {rms:.2} dB", ue.ue_id));
    }
    let ue2 = *config.ues.iter().find(|u| u.ue_id == 2).ok_or("no UE 2")?;
    let (a, b) = profiles(&still, ue2)?;
    let rms0 = rms_gain_error(&a, &b).map_err(|e| e.to_string())?;
    check(rms0 == 0.0, || format!("zero jitter rms {rms0:e} dB"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("jittered {}; zero jitter {rms0} dB", notes.join(", ")))
}

// ---------------------------------------------------------------- 8

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let mut config = RunConfig::default();
    config.write_datasets = true;
    config.environment.n_freq = 16;
    config.sweep.n_subsets = 300;
    config.sinr.n_subsets = 20;
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |threads: usize, name: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let dir = root.path().join(name);
        pool.install(|| pipeline::run_pipeline(&config, &dir)).map_err(|e| e.to_string())?;
        Ok(snapshot(&dir))
    };
    let a = run(1, "serial-a")?;
    let b = run(1, "serial-b")?;
    let c = run(4, "parallel")?;
    check(a.iter().any(|(n, _)| n.starts_with("dataset_")), || "no dataset files written".into())?;
    check(a.iter().any(|(n, _)| n.starts_with("snr_sweep_")), || "no CSV reports written".into())?;
    for (other, label) in [(&b, "second 1-thread run"), (&c, "4-thread run")] {
        check(other.len() == a.len(), || format!("{label} wrote {} files, expected {}", other.len(), a.len()))?;
        for ((na, da), (nb, db)) in a.iter().zip(other.iter()) {
            check(na == nb && da == db, || format!("{label}: {na} differs"))?;
        }
    }
    let bytes: usize = a.iter().map(|(_, d)| d.len()).sum();
    Ok(format!("{} files ({bytes} bytes) identical over 1-thread x2 and 4-thread runs", a.len()))
}

// ---------------------------------------------------------------- 9

fn field_statistics() -> Outcome {
    let sigma = 6.0;
    let dc = 25.0;
    let mut notes = Vec::new();
    for seed in [1u64, 2, 3] {
        let field = ShadowingField::new(sigma, dc, seed);
        let ue = Point3::new(200.0, 100.0, 1.5);
        let grid: Vec<Point3> = (0..100)
            .flat_map(|i| (0..100).map(move |j| Point3::new(i as f64 * 100.0, j as f64 * 100.0, 35.0)))
            .collect();
        let a: Vec<f64> = grid.iter().map(|p| field.value_db(*p, ue)).collect();
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        check((std - sigma).abs() <= 0.1 * sigma, || format!("seed {seed}: shadowing std {std:.3} dB"))?;

        let b: Vec<f64> = grid
            .iter()
            .map(|p| field.value_db(*p + Point3::new(dc, 0.0, 0.0), ue))
            .collect();
        let mean_b = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - mean) * (y - mean_b)).sum();
        let var_b: f64 = b.iter().map(|y| (y - mean_b).powi(2)).sum();
        let var_a: f64 = a.iter().map(|x| (x - mean).powi(2)).sum();
        let corr = cov / (var_a * var_b).sqrt();
        let target = (-1.0f64).exp();
        check((corr - target).abs() <= 0.1, || format!("seed {seed}: correlation at d_c {corr:.3}"))?;
        notes.push(format!("std {std:.2} corr {corr:.3}"));
    }

    // pure LOS, no shadowing: flat channel with Friis energy
    let env = EnvironmentModel {
        buildings: Vec::new(),
        shadowing_sigma_db: 0.0,
        rician_k_los_db: f64::INFINITY,
        ..EnvironmentModel::default()
    };
    let field = SyntheticField::new(env.clone()).map_err(|e| e.to_string())?;
    let c = 299_792_458.0;
    let friis_1m = 20.0 * (c / (4.0 * std::f64::consts::PI * env.carrier_hz)).log10();
    let mut worst = 0.0f64;
    for (k, ap) in [
        Point3::new(0.0, 0.0, 35.0),
        Point3::new(123.4, 56.7, 70.0),
        Point3::new(400.0, 200.0, 35.0),
    ]
    .into_iter()
    .enumerate()
    {
        let ue = Point3::new(200.0, 100.0, 1.5);
        let geometry = field.geometry(ap, ue).map_err(|e| e.to_string())?;
        check(geometry.is_los, || "open environment reported a blocked link".into())?;
        let d = ap.distance(ue);
        let oracle_db = friis_1m - 20.0 * d.log10();
        let model_db = field.mean_gain_db(&geometry);
        worst = worst.max(rel(model_db, oracle_db));
        check(rel(model_db, oracle_db) <= 1e-9, || format!("mean gain {model_db} vs Friis {oracle_db}"))?;
        for selection in [PortSelection::Omni, PortSelection::Port(3)] {
            let record = field
                .sample_channel(&geometry, k, 1, 1, selection)
                .map_err(|e| e.to_string())?;
            let mags: Vec<f64> = record.samples.iter().map(|s| s.norm()).collect();
            let (lo, hi) = mags.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &m| (lo.min(m), hi.max(m)));
            worst = worst.max(rel(lo, hi));
            check(rel(lo, hi) <= 1e-9, || format!("{selection:?}: magnitude varies {lo:e}..{hi:e}"))?;
            if selection == PortSelection::Omni {
                let g = average_gain(&record).map_err(|e| e.to_string())?;
                let expected = 10f64.powf(oracle_db / 10.0);
                worst = worst.max(rel(g, expected));
                check(rel(g, expected) <= 1e-9, || format!("omni energy {g:e} vs {expected:e}"))?;
            }
        }
    }
    Ok(format!("{}; LOS/Friis max rel err {worst:.1e}", notes.join(", ")))
}

// ---------------------------------------------------------------- 10

fn expect_parse_error(text: &str, line: usize, what: &str) -> Result<(), String> {
    match read_dataset(text.as_bytes()) {
        Err(Error::Parse { line: got, .. }) if got == line => Ok(()),
        other => Err(format!("{what}: expected parse error at line {line}, got {other:?}")),
    }
}

fn format_round_trip() -> Outcome {
    let config = RunConfig::default();
    let field = pipeline::build_field(&config).map_err(|e| e.to_string())?;
    let plan = &config.flight("ap35").ok_or("no ap35 flight")?.plan;
    let ds = campaign_with_trials(plan, &field, &config.ues, &[1], FlightOptions::default()).map_err(|e| e.to_string())?;
    check(ds.len() == 24004, || format!("campaign has {} records", ds.len()))?;
    let mut buf = Vec::new();
    write_dataset(&ds, &mut buf, FORMAT_VERSION).map_err(|e| e.to_string())?;
    let back = read_dataset(buf.as_slice()).map_err(|e| e.to_string())?;
    check(back == ds, || "read(write(dataset)) differs".into())?;

    let text = String::from_utf8(buf).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().take(6).collect();
    let head = lines.join("\n") + "\n";
    let n_lines = lines.len();

    // truncated final line
    let cut = &head[..head.len() - 7];
    expect_parse_error(cut, n_lines, "truncated final line")?;
    // field-count mismatch on line 3
    let mut l = lines.clone();
    let shortened = l[2].rsplit_once(',').unwrap().0.to_string();
    l[2] = &shortened;
    expect_parse_error(&(l.join("\n") + "\n"), 3, "missing field")?;
    // non-finite value on line 4
    let mut fields: Vec<&str> = lines[3].split(',').collect();
    fields[10] = "NaN";
    let bad = fields.join(",");
    let mut l = lines.clone();
    l[3] = &bad;
    expect_parse_error(&(l.join("\n") + "\n"), 4, "non-finite value")?;
    // malformed header
    expect_parse_error(&head.replacen('{', "[", 1), 1, "malformed header")?;
    // unknown version is rejected, not coerced
    match read_dataset(head.replacen("\"format_version\":1", "\"format_version\":2", 1).as_bytes()) {
        Err(Error::UnsupportedVersion(2)) => {}
        other => return Err(format!("version 2 accepted: {other:?}")),
    }
    Ok(format!("24004 records, {} bytes, value-identical; malformed inputs rejected", text.len()))
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("capture geometry", capture_geometry),
        ("Rayleigh-quotient optimality", rayleigh_optimality),
        ("bound attainment", bound_attainment),
        ("K=1 consistency", single_user_consistency),
        ("optimum >= MR", optimum_dominates_mr),
        ("SNR sweep trends", snr_sweep_trends),
        ("reproducibility", reproducibility),
        ("determinism", determinism),
        ("synthetic-field statistics", field_statistics),
        ("format round-trip", format_round_trip),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("acceptance {n:>2} PASS  {name} [{elapsed:.2?}]: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("acceptance {n:>2} FAIL  {name} [{elapsed:.2?}]: {reason}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
