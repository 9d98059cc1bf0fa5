mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "tvlab", version, about = "Numerical laboratory for two-valued minimal Lipschitz graphs")]
struct Cli {
    /// Seed for every stochastic step (fit restarts, perturbed fixtures).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON map of named tolerances; overrides $TVLAB_TOLERANCES.
    #[arg(long, global = true)]
    tolerances: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FixtureArgs {
    /// Fixture id, e.g. holo_pair_curved, four_half_planes, perturbed:branched_w32.
    #[arg(long)]
    fixture: String,
    /// Fixture parameter `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GridArgs {
    /// Lattice spacing.
    #[arg(long)]
    h: Option<f64>,
    /// Radius of the sampled domain ball.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Sample a fixture on a lattice and write the two-valued grid JSON.
    Gen {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the sampled varifold as CSV.
        #[arg(long)]
        varifold_csv: Option<PathBuf>,
    },
    /// Excess quantities of a fixture against its natural cone or a cone file.
    Excess {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Cone JSON replacing the fixture's natural cone.
        #[arg(long)]
        cone: Option<PathBuf>,
        /// Cone JSON with a larger axis, for the coarser excess.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Cone field JSON for the radial homogeneity deficit.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, default_value_t = 0.25)]
        tau: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Least-excess cone in the unit ball.
    Fit {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// pair | four_hp; defaults to the class of the initial cone.
        #[arg(long)]
        class: Option<String>,
        #[arg(long)]
        cone: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Excess decay over the scales θ, θ², …, θ^J.
    Decay {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        cone: Option<PathBuf>,
        /// Comma-separated point, or a single number repeated in every coordinate.
        #[arg(long, default_value = "0")]
        center: String,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long = "J", default_value_t = 5)]
        steps: usize,
        /// Also fit the singular-set graph.
        #[arg(long)]
        singular_graph: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scale series CSV; defaults to the report path with a .csv extension.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sheet labelling, conflicts and branch points.
    Decompose {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Labelling seed node (index into the active nodes).
        #[arg(long)]
        start: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the link of a homogeneous fixture (n = 2).
    ClassifyLink {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[arg(long = "M", default_value_t = 256)]
        m: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First-variation defect against a bump family.
    VerifyStationary {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Bump centers separated by ';', each comma-separated.
        #[arg(long, default_value = "0")]
        centers: String,
        #[arg(long, default_value_t = 0.4)]
        bump_radius: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a cone field onto the homogeneous degree-one class.
    Dehomogenize {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = "0")]
        center: String,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Density ratio and dyadic density profile at a point.
    Density {
        #[command(flatten)]
        fixture: FixtureArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "0")]
        center: String,
        #[arg(long, default_value_t = 0.25)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen { .. } => "gen",
            Command::Excess { .. } => "excess",
            Command::Fit { .. } => "fit",
            Command::Decay { .. } => "decay",
            Command::Decompose { .. } => "decompose",
            Command::ClassifyLink { .. } => "classify-link",
            Command::VerifyStationary { .. } => "verify-stationary",
            Command::Dehomogenize { .. } => "dehomogenize",
            Command::Density { .. } => "density",
        }
    }
}

fn error_json(command: &str, err: &anyhow::Error) -> serde_json::Value {
    let kind = err
        .downcast_ref::<tvlab_core::Error>()
        .map(|e| e.kind())
        .unwrap_or("cli");
    serde_json::json!({
        "tool": "tvlab",
        "version": tvlab_core::VERSION,
        "command": command,
        "error": {"kind": kind, "message": format!("{err:#}")},
    })
}

/// Print to stdout, tolerating a closed pipe.
fn print_line(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let result = RunConfig::new(&cli).and_then(|cfg| commands::run(&cli.command, &cfg));
    match result {
        Ok(text) => {
            print_line(&text);
            ExitCode::SUCCESS
        }
        Err(err) => {
            print_line(&serde_json::to_string_pretty(&error_json(name, &err)).expect("error json"));
            ExitCode::from(1)
        }
    }
}
