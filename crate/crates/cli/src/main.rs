use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tplab_cli::commands::{self, CensusFlags};
use tplab_cli::manifest::Manifest;
use tplab_cli::suite::{self, SuiteConfig};

#[derive(Parser)]
#[command(name = "tplab", version, about = "Projective planes, tropical minors and residue identities")]
struct Cli {
    /// Worker threads for the parallel scans
    #[arg(long, global = true, env = "TPL_THREADS")]
    threads: Option<usize>,
    /// Seed for every randomized check
    #[arg(long, global = true, default_value_t = SuiteConfig::DEFAULT_SEED)]
    seed: u64,
    /// Also write the JSON report to this file
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Allow full minor scans at q=5
    #[arg(long, global = true)]
    allow_long: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PlaneArgs {
    /// Plane file in the `plane q= v=` text format
    #[arg(long, value_name = "PATH")]
    plane: Option<PathBuf>,
    /// Build PG(2,q) instead of reading a file
    #[arg(long)]
    q: Option<usize>,
}

impl PlaneArgs {
    fn load(&self) -> Result<std::sync::Arc<tplab_core::ProjectivePlane>> {
        commands::load_plane(self.plane.as_deref(), self.q)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build PG(2,q) and write it in the plane text format
    Pg2 {
        #[arg(long)]
        q: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Validate a plane file against the projective-plane axioms
    IngestCheck {
        #[arg(long, value_name = "PATH")]
        plane: PathBuf,
    },
    /// Tropical type census of all 4x4 minors
    Census {
        #[command(flatten)]
        plane: PlaneArgs,
        /// Histogram by (minimum weight, number of minimizers)
        #[arg(long)]
        types: bool,
        /// (0,2) minors by symmetric-difference cycle length
        #[arg(long)]
        cycles: bool,
        /// Degenerate-diamond statistics for (0,3) minors
        #[arg(long)]
        degenerate: bool,
        /// GF(2) span of the (0,2) cycles
        #[arg(long)]
        span: bool,
    },
    /// Orbit classification of (0,3) patterns
    Patterns {
        /// Include the zero-matching histogram over all 2^16 patterns
        #[arg(long)]
        histogram: bool,
    },
    /// Enumerate or sample B* witnesses
    Witnesses {
        #[command(flatten)]
        plane: PlaneArgs,
        /// Sample this many witnesses instead of enumerating
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Constructive identity minors and rectangle multiplicities
    Identity {
        #[command(flatten)]
        plane: PlaneArgs,
        /// Exact count of permutation-pattern minors by full scan (q <= 3)
        #[arg(long)]
        full_scan: bool,
        #[arg(long)]
        multiplicity: bool,
    },
    /// Rank, witness identities and defect census of a residue model
    ResidueCheck {
        #[command(flatten)]
        plane: PlaneArgs,
        /// Residue model file; the canonical model when omitted
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        defects: bool,
    },
    /// Factor a model's nonincidence labels or report a cycle of nontrivial holonomy
    Holonomy {
        #[command(flatten)]
        plane: PlaneArgs,
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Three-chart cycles and bridge holonomy on sampled witnesses
    Atlas {
        #[command(flatten)]
        plane: PlaneArgs,
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Run the full verification suite against the expectations manifest
    VerifyAll {
        /// Largest plane order to include
        #[arg(long, default_value_t = 4)]
        q_max: usize,
    },
    /// Write the canonical rank-3 residue model of a plane
    DumpModel {
        #[command(flatten)]
        plane: PlaneArgs,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn emit(value: &Value, json_path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(p) = json_path {
        std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    let json_path = cli.json.as_deref();
    let value = match &cli.command {
        Command::Pg2 { q, out } => {
            let (v, text) = commands::pg2(*q, out.as_deref())?;
            if out.is_none() {
                print!("{text}");
                if let Some(p) = json_path {
                    std::fs::write(p, serde_json::to_string_pretty(&v)?)?;
                }
                return Ok(ExitCode::SUCCESS);
            }
            v
        }
        Command::IngestCheck { plane } => commands::ingest_check(plane)?,
        Command::Census { plane, types, cycles, degenerate, span } => {
            let flags = CensusFlags { types: *types, cycles: *cycles, degenerate: *degenerate, span: *span, allow_long: cli.allow_long };
            commands::census(&plane.load()?, &flags)?
        }
        Command::Patterns { histogram } => commands::patterns(*histogram)?,
        Command::Witnesses { plane, samples } => commands::witnesses(&plane.load()?, *samples, cli.seed)?,
        Command::Identity { plane, full_scan, multiplicity } => {
            commands::identity(&plane.load()?, *full_scan, *multiplicity, cli.allow_long)?
        }
        Command::ResidueCheck { plane, model, samples, defects } => {
            let m = commands::load_model(&plane.load()?, model.as_deref())?;
            commands::residue_check(&m, *samples, cli.seed, *defects, cli.allow_long)?
        }
        Command::Holonomy { plane, model } => commands::holonomy(&commands::load_model(&plane.load()?, model.as_deref())?)?,
        Command::Atlas { plane, model, samples } => {
            commands::atlas(&commands::load_model(&plane.load()?, model.as_deref())?, *samples, cli.seed)?
        }
        Command::DumpModel { plane, out } => {
            let m = commands::load_model(&plane.load()?, None)?;
            let (v, text) = commands::dump_model(&m, out.as_deref())?;
            if out.is_none() {
                print!("{text}");
                return Ok(ExitCode::SUCCESS);
            }
            v
        }
        Command::VerifyAll { q_max } => {
            let cfg = SuiteConfig { q_max: *q_max, seed: cli.seed, allow_long: cli.allow_long };
            let reports = suite::run_all(&cfg);
            let mut failed = false;
            for r in &reports {
                eprintln!("{:<13} criterion {:>2}: {}", format!("{:?}", r.status).to_uppercase(), r.id, r.title);
                for c in r.failing_checks() {
                    eprintln!("    {} expected {} got {}", c.check_name, c.expected.as_ref().map_or(Value::Null, |e| e.value.clone()), c.actual);
                }
                failed |= r.failed();
            }
            let v = json!({ "manifestVersion": Manifest::builtin().version, "config": cfg, "criteria": reports });
            emit(&v, json_path)?;
            return Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS });
        }
    };
    emit(&value, json_path)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
