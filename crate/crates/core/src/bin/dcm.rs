use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dcm_core::harness::{bench, gen_corpus, read_corpus, replay, write_corpus, GenSpec, Policy};
use dcm_core::{EngineConfig, WeightParams};

#[derive(Parser)]
#[command(name = "dcm", version, about = "Collective memory engine: replay, bench, corpus generation and HTTP service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a corpus over simulated days and write a JSON report.
    Replay {
        #[command(flatten)]
        engine: EngineArgs,
        /// Report path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare retrieval policies on a corpus with probes.
    Bench {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Policies to score; all when omitted.
        #[arg(long = "policy", value_enum)]
        policies: Vec<PolicyArg>,
        /// JSON report path; the table always goes to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a deterministic synthetic corpus.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        /// Generator spec as TOML; defaults otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        turns: Option<usize>,
        #[arg(long)]
        days: Option<u32>,
    },
    /// Serve the HTTP API.
    Serve {
        /// Config TOML; falls back to $DCM_CONFIG, then defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Engine config TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weight parameters TOML, replacing the config's `[params]`.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl EngineArgs {
    fn config(&self) -> Result<EngineConfig> {
        let mut config = match &self.config {
            Some(p) => EngineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => EngineConfig::default(),
        };
        if let Some(p) = &self.params {
            let params: WeightParams = toml::from_str(&fs::read_to_string(p)?)
                .with_context(|| format!("parsing {}", p.display()))?;
            params.validate()?;
            config.params = params;
        }
        config.seed = self.seed;
        config.embedder.seed = self.seed;
        Ok(config)
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PolicyArg {
    Dcm,
    NaiveCosine,
    Recency,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Dcm => Policy::Dcm,
            PolicyArg::NaiveCosine => Policy::NaiveCosine,
            PolicyArg::Recency => Policy::Recency,
        }
    }
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Replay { engine, report } => {
            let config = engine.config()?;
            let records = read_corpus(&engine.corpus)?;
            let file = replay(&records, &config, engine.seed)?;
            write_json(report.as_deref(), &file)?;
            if report.is_some() {
                println!("report_hash {}", file.report_hash);
            }
        }
        Command::Bench {
            engine,
            k,
            policies,
            report,
        } => {
            let config = engine.config()?;
            let records = read_corpus(&engine.corpus)?;
            let policies: Vec<Policy> = if policies.is_empty() {
                Policy::ALL.to_vec()
            } else {
                policies.into_iter().map(Policy::from).collect()
            };
            let result = bench(&records, &config, &policies, k)?;
            print!("{}", result.table());
            if let Some(p) = report {
                write_json(Some(&p), &result)?;
            }
        }
        Command::GenCorpus {
            out,
            spec,
            seed,
            turns,
            days,
        } => {
            let mut gen = match spec {
                Some(p) => toml::from_str(&fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => GenSpec::default(),
            };
            gen.seed = seed.unwrap_or(gen.seed);
            gen.turns = turns.unwrap_or(gen.turns);
            gen.days = days.unwrap_or(gen.days);
            let records = gen_corpus(&gen);
            write_corpus(&out, &records)?;
            println!("{} records written to {}", records.len(), out.display());
        }
        Command::Serve { config, port } => {
            let mut config = EngineConfig::resolve(config.as_deref())?;
            if let Some(port) = port {
                config.port = port;
            }
            tokio::runtime::Runtime::new()?.block_on(dcm_core::service::serve(config))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
