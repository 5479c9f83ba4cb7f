//! `ratbench` command line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand, ValueEnum};
use ratbench_core::sim::compare_policies;
use ratbench_core::{LinkSettings, MeasurementRecord, Policy, Technology, WorkloadSpec};

use crate::files::{builtin_targets, load_models, read_json, write_json, ModelFile, SimulateConfig};
use crate::io::{read_jsonl, write_jsonl, write_records_csv};
use crate::query::{aggregate_table, speed_series, AggregateOptions, FilterExpr};
use crate::report::{render, Format};
use crate::store::RecordStore;

#[derive(Debug, Parser)]
#[command(name = "ratbench", version, about = "LoRaWAN / Sigfox / NB-IoT energy and delivery benchmarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Group {
    Table,
    Speed,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run measurement campaigns and write their records as JSON Lines.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Fitted energy model; the measured tables are used without it.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write the event log.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Fit the energy model to a target table.
    Fit {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Link settings to fit with (JSON); defaults otherwise.
        #[arg(long)]
        link: Option<PathBuf>,
    },
    /// Aggregate records into a delivery/energy table or speed series.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Energy per byte over delivered packets only.
        #[arg(long)]
        delivered_only: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, value_enum, default_value_t = Group::Table)]
        group: Group,
        #[arg(long, default_value_t = ratbench_core::model::DEFAULT_MIN_SAMPLES)]
        min_samples: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flatten records to CSV.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one workload under two policies and print the comparison.
    Compare {
        #[arg(long)]
        workload: PathBuf,
        #[arg(long)]
        policy_a: PathBuf,
        #[arg(long)]
        policy_b: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Keep per-message events in the output.
        #[arg(long)]
        events: bool,
    },
    /// Serve the HTTP API over the records in `<data>/records.jsonl`.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Print the built-in target table.
    Targets {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn read_records(path: &Path) -> anyhow::Result<Vec<MeasurementRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out, model, events } => {
            let cfg: SimulateConfig = read_json(&config)?;
            let models = load_models(model.as_deref())?;
            let runs = cfg.run(seed, &models)?;
            let mut w = output(Some(&out))?;
            let mut ev = events.as_deref().map(|p| output(Some(p))).transpose()?;
            let (mut n, mut overhead) = (0, 0.0);
            for r in &runs {
                write_jsonl(&mut w, &r.records)?;
                if let Some(ev) = &mut ev {
                    write_jsonl(ev, &r.events)?;
                }
                n += r.records.len();
                overhead += r.overhead_energy_uwh;
            }
            w.flush()?;
            eprintln!("{n} records from {} campaign(s); report overhead {overhead:.3} µWh", runs.len());
        }
        Command::Fit { targets, out, link } => {
            let cells: Vec<ratbench_core::AggregateCell> = read_json(&targets)?;
            let link: LinkSettings = match link {
                Some(p) => read_json(&p)?,
                None => LinkSettings::default(),
            };
            let file = ModelFile::fit(&cells, &link)?;
            write_json(&out, &file)?;
            for r in &file.metadata.residual_rms {
                eprintln!("{} {}: base residual RMS {:.4}", r.technology, r.scenario, r.base_residual_rms);
            }
        }
        Command::Report { input, delivered_only, format, group, min_samples, out } => {
            let records = read_records(&input)?;
            let filter = FilterExpr::default();
            let text = match group {
                Group::Table => {
                    let opts = AggregateOptions { delivered_only, min_samples };
                    render(&aggregate_table(&records, &filter, opts), format)
                }
                Group::Speed => {
                    let series: Vec<_> = Technology::ALL
                        .iter()
                        .map(|&t| crate::service::SpeedSeries {
                            technology: t,
                            points: speed_series(&records, t, &filter),
                        })
                        .collect();
                    anyhow::ensure!(format == Format::Json, "speed series are only rendered as json");
                    serde_json::to_string_pretty(&series)? + "\n"
                }
            };
            let mut w = output(out.as_deref())?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        Command::Export { input, out } => {
            let records = read_records(&input)?;
            write_records_csv(output(out.as_deref())?, &records)?;
        }
        Command::Compare { workload, policy_a, policy_b, seed, model, events } => {
            let w: WorkloadSpec = read_json(&workload)?;
            let a: Policy = read_json(&policy_a)?;
            let b: Policy = read_json(&policy_b)?;
            let models = load_models(model.as_deref())?;
            let mut c = compare_policies(&w, &a, &b, &models, seed)?;
            if !events {
                c.summary_a.events.clear();
                c.summary_b.events.clear();
            }
            println!("{}", serde_json::to_string_pretty(&c)?);
        }
        Command::Serve { addr, data, model } => {
            std::fs::create_dir_all(&data).with_context(|| format!("creating {}", data.display()))?;
            let store = RecordStore::open(data.join("records.jsonl"))?;
            let models = load_models(model.as_deref())?;
            eprintln!("{} records loaded", store.len());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::serve(&addr, store, models))?;
        }
        Command::Targets { out } => {
            let mut w = output(out.as_deref())?;
            w.write_all((serde_json::to_string_pretty(&builtin_targets())? + "\n").as_bytes())?;
            w.flush()?;
        }
    }
    Ok(())
}
