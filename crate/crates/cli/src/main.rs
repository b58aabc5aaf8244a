use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dronesound::config::{NamedFlight, RunConfig};
use dronesound::error::Error;
use dronesound::format::{read_dataset_file, write_dataset_file};
use dronesound::import::{import_external_file, MappingSpec};
use dronesound::pipeline;
use dronesound::channel::SoundingDataset;
use std::path::PathBuf;
use std::process::ExitCode;

/// Drone virtual-array channel sounding and cell-free MIMO analysis.
///
/// Thread count follows RAYON_NUM_THREADS; results do not depend on it.
#[derive(Parser)]
#[command(name = "dronesound", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Dataset format version to write.
    #[arg(long, global = true)]
    format_version: Option<u32>,
}

#[derive(Args)]
struct DatasetInput {
    /// Analyse this dataset file instead of sounding the configured flights.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Name used in output file names for --dataset (default: file stem).
    #[arg(long)]
    label: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the resolved environment and capture schedules.
    Generate,
    /// Fly the configured campaigns and write dataset files.
    Sound,
    /// Per-UE gain maps.
    GainMap(DatasetInput),
    /// Single-user SNR over random AP subsets.
    SnrSweep(DatasetInput),
    /// Multi-user SINR under optimum and MR combining.
    SinrEval(DatasetInput),
    /// RMS gain error between two re-flights.
    Repro(DatasetInput),
    /// Convert a foreign channel file into a native dataset.
    Import {
        #[arg(long)]
        input: PathBuf,
        /// Column mapping (TOML).
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Full pipeline: generate, sound and every enabled analysis.
    Run,
    /// Print the built-in default configuration.
    DefaultConfig,
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(version) = common.format_version {
        config.format_version = version;
    }
    config.validate()?;
    Ok(config)
}

fn staged<T>(stage: &'static str, r: dronesound::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow::Error::new(e.in_stage(stage)))
}

/// Datasets to analyse: the given file, or freshly sounded flights.
fn datasets<'a>(
    config: &'a RunConfig,
    input: &DatasetInput,
    flights: impl Fn(&'a RunConfig) -> Vec<&'a NamedFlight>,
    sinr_receiver: bool,
) -> anyhow::Result<Vec<(String, SoundingDataset)>> {
    if let Some(path) = &input.dataset {
        let label = match &input.label {
            Some(l) => l.clone(),
            None => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .context("dataset path has no file name")?,
        };
        let ds = staged("read-dataset", read_dataset_file(path))
            .with_context(|| format!("reading {}", path.display()))?;
        return Ok(vec![(label, ds)]);
    }
    let field = staged("generate", pipeline::build_field(config))?;
    flights(config)
        .into_iter()
        .map(|flight| {
            let ds = if sinr_receiver {
                pipeline::sound_sinr_flight(config, &field, flight)
            } else {
                pipeline::sound_flight(config, &field, flight)
            };
            Ok((flight.name.clone(), staged("sound", ds)?))
        })
        .collect()
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = &cli.common;
    if let Command::DefaultConfig = cli.command {
        print!("{}", staged("config", RunConfig::default().to_toml())?);
        return Ok(());
    }
    let config = staged("config", load_config(common))?;
    let out = common.out_dir.as_path();
    staged("output", std::fs::create_dir_all(out).map_err(Error::from))
        .with_context(|| format!("creating {}", out.display()))?;
    let path = |name: String| out.join(name);

    let mut files = Vec::new();
    match &cli.command {
        Command::Generate => files = staged("generate", pipeline::write_generated(&config, out))?,
        Command::Sound => {
            let field = staged("generate", pipeline::build_field(&config))?;
            for flight in &config.flights {
                let ds = staged("sound", pipeline::sound_flight(&config, &field, flight))?;
                let p = path(format!("dataset_{}.txt", flight.name));
                staged("write-dataset", write_dataset_file(&ds, &p, config.format_version))?;
                files.push(p);
                if config.sinr.enabled && config.select_flights(&config.sinr.flights).iter().any(|f| f.name == flight.name) {
                    let ds = staged("sound", pipeline::sound_sinr_flight(&config, &field, flight))?;
                    let p = path(format!("dataset_{}_sinr.txt", flight.name));
                    staged("write-dataset", write_dataset_file(&ds, &p, config.format_version))?;
                    files.push(p);
                }
            }
        }
        Command::GainMap(input) => {
            for (label, ds) in datasets(&config, input, |c| c.select_flights(&c.gain_map.flights), false)? {
                files.extend(staged("gain-map", pipeline::write_gain_maps(&ds, &label, out))?);
            }
        }
        Command::SnrSweep(input) => {
            for (label, ds) in datasets(&config, input, |c| c.select_flights(&c.sweep.flights), false)? {
                let report = staged("snr-sweep", pipeline::snr_sweep(&config, &ds))?;
                let p = path(format!("snr_sweep_{label}.csv"));
                staged("snr-sweep", pipeline::write_snr_sweep(&report, &p))?;
                files.push(p);
            }
        }
        Command::SinrEval(input) => {
            for (label, ds) in datasets(&config, input, |c| c.select_flights(&c.sinr.flights), true)? {
                let report = staged("sinr-eval", pipeline::sinr_eval(&config, &ds))?;
                let p = path(format!("sinr_eval_{label}.csv"));
                staged("sinr-eval", pipeline::write_sinr_eval(&report, &p))?;
                files.push(p);
                let p = path(format!("sinr_cdf_{label}.csv"));
                staged("sinr-eval", pipeline::write_sinr_cdf(&report, &p))?;
                files.push(p);
            }
        }
        Command::Repro(input) => {
            for (label, ds) in datasets(&config, input, |c| c.select_flights(&c.repro.flights), false)? {
                let rows = staged("repro", pipeline::repro(&config, &ds))?;
                if rows.is_empty() {
                    bail!("[repro] none of the configured UEs {:?} is in the dataset", config.repro.ue_ids);
                }
                let p = path(format!("repro_{label}.csv"));
                staged("repro", pipeline::write_repro(&rows, &p))?;
                files.push(p);
            }
        }
        Command::Import { input, mapping, output } => {
            let text = std::fs::read_to_string(mapping)
                .map_err(Error::from)
                .map_err(|e| e.in_stage("import"))
                .with_context(|| format!("reading {}", mapping.display()))?;
            let spec = staged("import", MappingSpec::from_toml(&text))?;
            let ds = staged("import", import_external_file(input, &spec))
                .with_context(|| format!("importing {}", input.display()))?;
            let target = output.clone();
            staged("write-dataset", write_dataset_file(&ds, &target, config.format_version))?;
            files.push(target);
        }
        Command::Run => files = staged("run", pipeline::run_pipeline(&config, out))?,
        Command::DefaultConfig => unreachable!(),
    }
    report(&files);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dronesound: {e:#}");
            ExitCode::FAILURE
        }
    }
}
