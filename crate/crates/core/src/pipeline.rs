//! End-to-end run: environment, sounding campaigns, analyses and CSV reports.
//!
//! Output files (`<flight>` is the configured flight name):
//!
//! | file | columns |
//! |------|---------|
//! | `environment.toml` | resolved environment model |
//! | `captures_<flight>.csv` | `index,x_m,y_m,z_m,t_s` |
//! | `dataset_<flight>.txt` | native dataset (omni receiver) |
//! | `dataset_<flight>_sinr.txt` | native dataset (multi-user receiver ports) |
//! | `gain_map_<flight>_ue<id>.csv` | `ap_index,x_m,y_m,z_m,ue_id,gain_db` |
//! | `snr_sweep_<flight>.csv` | `ue_id,ap_count,median_db,std_db,p01,...,p99` |
//! | `sinr_eval_<flight>.csv` | `ue_id,L,method,median_db,std_db,p01,...,p99` |
//! | `sinr_cdf_<flight>.csv` | `ue_id,L,method,sinr_db,cdf` |
//! | `repro_<flight>.csv` | `ue_id,rms_error_db` |
//!
//! dB values are written with six decimals; a zero gain is written `-inf`.

use crate::analysis::{ap_subset_sweep, multi_user_sinr_eval, MultiUserSettings, SinrReport, SweepSettings};
use crate::channel::{rms_gain_error, GainProfile, SoundingDataset};
use crate::config::{NamedFlight, RunConfig};
use crate::error::{Error, Result, StageExt};
use crate::field::{PortSelection, SyntheticField};
use crate::format::write_dataset_file;
use crate::sounder::{campaign_with_trials, plan_captures, FlightOptions, UeSpec};
use crate::stats::PERCENTILES;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

fn fmt_db(v: f64) -> String {
    format!("{v:.6}")
}

fn percentile_header() -> Vec<String> {
    PERCENTILES.iter().map(|p| format!("p{:02}", *p as u32)).collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(File::create(path)?)))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Builds the synthetic field for a configuration.
pub fn build_field(config: &RunConfig) -> Result<SyntheticField> {
    SyntheticField::new(config.seeded_environment())
}

fn ue_specs(config: &RunConfig, ids: &[u32]) -> Vec<UeSpec> {
    config.ues.iter().filter(|u| ids.contains(&u.ue_id)).copied().collect()
}

/// Omni-receiver campaign of one flight: trial 1 for every UE, plus the
/// reproducibility trials where configured.
pub fn sound_flight(config: &RunConfig, field: &SyntheticField, flight: &NamedFlight) -> Result<SoundingDataset> {
    let options = FlightOptions {
        jitter: true,
        ports: PortSelection::Omni,
    };
    let mut dataset: Option<SoundingDataset> = None;
    for ue in &config.ues {
        let trials = config.trials_for(&flight.name, ue.ue_id);
        let part = campaign_with_trials(&flight.plan, field, &[*ue], &trials, options)?;
        match dataset.as_mut() {
            None => dataset = Some(part),
            Some(ds) => ds.merge(part)?,
        }
    }
    dataset.ok_or_else(|| Error::Config("no UEs configured".into()))
}

/// Campaign used by the multi-user evaluation: trial 1 of every selected UE
/// with the configured receive port.
pub fn sound_sinr_flight(config: &RunConfig, field: &SyntheticField, flight: &NamedFlight) -> Result<SoundingDataset> {
    let ids = config.select_ues(&config.sinr.ue_ids);
    let options = FlightOptions {
        jitter: true,
        ports: config.sinr.ports,
    };
    campaign_with_trials(&flight.plan, field, &ue_specs(config, &ids), &[1], options)
}

/// Writes the resolved environment and the capture schedule of every flight.
pub fn write_generated(config: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let env_path = out_dir.join("environment.toml");
    let text = toml::to_string_pretty(&config.seeded_environment()).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&env_path, text)?;
    files.push(env_path);
    for flight in &config.flights {
        let schedule = plan_captures(&flight.plan)?;
        let path = out_dir.join(format!("captures_{}.csv", flight.name));
        let mut w = csv_writer(&path)?;
        w.write_record(["index", "x_m", "y_m", "z_m", "t_s"]).map_err(csv_err)?;
        for (i, (p, t)) in schedule.positions.iter().zip(&schedule.times_s).enumerate() {
            w.write_record([i.to_string(), fmt_db(p.x), fmt_db(p.y), fmt_db(p.z), fmt_db(*t)])
                .map_err(csv_err)?;
        }
        finish(w)?;
        files.push(path);
    }
    Ok(files)
}

/// One gain-map CSV per UE of `dataset` (the UE's lowest trial).
pub fn write_gain_maps(dataset: &SoundingDataset, flight: &str, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for ue_id in dataset.ue_ids() {
        let records = dataset.primary_flight(ue_id).expect("UE listed by the dataset");
        let profile = GainProfile::from_flight(records)?;
        let path = out_dir.join(format!("gain_map_{flight}_ue{ue_id}.csv"));
        let mut w = csv_writer(&path)?;
        w.write_record(["ap_index", "x_m", "y_m", "z_m", "ue_id", "gain_db"]).map_err(csv_err)?;
        for (r, g) in records.iter().zip(&profile.gains_db) {
            let p = r.ap_position;
            w.write_record([
                r.ap_index.to_string(),
                fmt_db(p.x),
                fmt_db(p.y),
                fmt_db(p.z),
                ue_id.to_string(),
                fmt_db(*g),
            ])
            .map_err(csv_err)?;
        }
        finish(w)?;
        files.push(path);
    }
    Ok(files)
}

/// Single-user SNR sweep for the configured UEs present in `dataset`.
pub fn snr_sweep(config: &RunConfig, dataset: &SoundingDataset) -> Result<SinrReport> {
    let settings = SweepSettings {
        counts: config.sweep.counts.clone(),
        n_subsets: config.sweep.n_subsets,
        seed: config.seed,
    };
    let mut report = SinrReport::default();
    for ue_id in selected_present(&config.sweep.ue_ids, dataset) {
        report.extend(ap_subset_sweep(dataset, ue_id, &settings, &config.budget)?);
    }
    Ok(report)
}

fn selected_present(filter: &[u32], dataset: &SoundingDataset) -> Vec<u32> {
    let present = dataset.ue_ids();
    if filter.is_empty() {
        present
    } else {
        filter.iter().copied().filter(|id| present.contains(id)).collect()
    }
}

pub fn write_snr_sweep(report: &SinrReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["ue_id".to_string(), "ap_count".into(), "median_db".into(), "std_db".into()];
    header.extend(percentile_header());
    w.write_record(&header).map_err(csv_err)?;
    for e in &report.entries {
        let mut row = vec![
            e.ue_id.to_string(),
            e.ap_count.to_string(),
            fmt_db(e.stats.median),
            fmt_db(e.stats.std),
        ];
        row.extend(e.stats.percentiles.iter().map(|(_, v)| fmt_db(*v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// Multi-user SINR for every configured (L, method).
pub fn sinr_eval(config: &RunConfig, dataset: &SoundingDataset) -> Result<SinrReport> {
    let ue_ids = selected_present(&config.sinr.ue_ids, dataset);
    let mut report = SinrReport::default();
    for &ap_count in &config.sinr.ap_counts {
        for &method in &config.sinr.methods {
            let settings = MultiUserSettings {
                ue_ids: ue_ids.clone(),
                ap_count,
                method,
                n_subsets: config.sinr.n_subsets,
                seed: config.seed,
                pooling: config.sinr.pooling,
            };
            report.extend(multi_user_sinr_eval(dataset, &settings, &config.budget)?);
        }
    }
    Ok(report)
}

fn method_label(e: &crate::analysis::ReportEntry) -> String {
    e.method.map_or_else(String::new, |m| m.to_string())
}

pub fn write_sinr_eval(report: &SinrReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec![
        "ue_id".to_string(),
        "L".into(),
        "method".into(),
        "median_db".into(),
        "std_db".into(),
    ];
    header.extend(percentile_header());
    w.write_record(&header).map_err(csv_err)?;
    for e in &report.entries {
        let mut row = vec![
            e.ue_id.to_string(),
            e.ap_count.to_string(),
            method_label(e),
            fmt_db(e.stats.median),
            fmt_db(e.stats.std),
        ];
        row.extend(e.stats.percentiles.iter().map(|(_, v)| fmt_db(*v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_sinr_cdf(report: &SinrReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["ue_id", "L", "method", "sinr_db", "cdf"]).map_err(csv_err)?;
    for e in &report.entries {
        for (x, f) in &e.stats.cdf {
            w.write_record([
                e.ue_id.to_string(),
                e.ap_count.to_string(),
                method_label(e),
                fmt_db(*x),
                format!("{f:.6}"),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// RMS gain error between the two configured trials, per configured UE.
pub fn repro(config: &RunConfig, dataset: &SoundingDataset) -> Result<Vec<(u32, f64)>> {
    let [ta, tb] = config.repro.trials;
    selected_present(&config.repro.ue_ids, dataset)
        .into_iter()
        .map(|ue_id| {
            let profile = |trial: u32| {
                let flight = dataset.flight(ue_id, trial).ok_or_else(|| {
                    Error::InvalidInput(format!("dataset has no trial {trial} for UE {ue_id}"))
                })?;
                GainProfile::from_flight(flight)
            };
            Ok((ue_id, rms_gain_error(&profile(ta)?, &profile(tb)?)?))
        })
        .collect()
}

pub fn write_repro(rows: &[(u32, f64)], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["ue_id", "rms_error_db"]).map_err(csv_err)?;
    for (ue_id, rms) in rows {
        w.write_record([ue_id.to_string(), fmt_db(*rms)]).map_err(csv_err)?;
    }
    finish(w)
}

fn wants(filter: &[String], flight: &str) -> bool {
    filter.is_empty() || filter.iter().any(|f| f == flight)
}

/// Runs the configured campaign and analyses, writing every output into
/// `out_dir` (created if needed). Returns the written files in order.
pub fn run_pipeline(config: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate().stage("config")?;
    std::fs::create_dir_all(out_dir).stage("output")?;
    let mut files = write_generated(config, out_dir).stage("generate")?;
    let field = build_field(config).stage("generate")?;

    for flight in &config.flights {
        let name = flight.name.as_str();
        log::info!("sounding flight {name}");
        let dataset = sound_flight(config, &field, flight).stage("sound")?;
        if config.write_datasets {
            let path = out_dir.join(format!("dataset_{name}.txt"));
            write_dataset_file(&dataset, &path, config.format_version).stage("write-dataset")?;
            files.push(path);
        }

        if config.gain_map.enabled && wants(&config.gain_map.flights, name) {
            files.extend(write_gain_maps(&dataset, name, out_dir).stage("gain-map")?);
        }

        if config.sweep.enabled && wants(&config.sweep.flights, name) {
            log::info!("snr sweep on {name}");
            let report = snr_sweep(config, &dataset).stage("snr-sweep")?;
            let path = out_dir.join(format!("snr_sweep_{name}.csv"));
            write_snr_sweep(&report, &path).stage("snr-sweep")?;
            files.push(path);
        }

        if config.repro.enabled && wants(&config.repro.flights, name) {
            let rows = repro(config, &dataset).stage("repro")?;
            let path = out_dir.join(format!("repro_{name}.csv"));
            write_repro(&rows, &path).stage("repro")?;
            files.push(path);
        }
        drop(dataset);

        if config.sinr.enabled && wants(&config.sinr.flights, name) {
            log::info!("multi-user evaluation on {name}");
            let dataset = sound_sinr_flight(config, &field, flight).stage("sound")?;
            if config.write_datasets {
                let path = out_dir.join(format!("dataset_{name}_sinr.txt"));
                write_dataset_file(&dataset, &path, config.format_version).stage("write-dataset")?;
                files.push(path);
            }
            let report = sinr_eval(config, &dataset).stage("sinr-eval")?;
            let path = out_dir.join(format!("sinr_eval_{name}.csv"));
            write_sinr_eval(&report, &path).stage("sinr-eval")?;
            files.push(path);
            let path = out_dir.join(format!("sinr_cdf_{name}.csv"));
            write_sinr_cdf(&report, &path).stage("sinr-eval")?;
            files.push(path);
        }
    }
    Ok(files)
}
