//! Command-line surface: `run` for one simulation, `experiment` for a
//! named grid, `mesh` for codec tooling.
//!
//! Exit codes: 0 success, 1 configuration error (bad file, bad key, bad
//! value, unknown experiment), 2 runtime error (I/O, malformed mesh
//! input). Human diagnostics go to stderr; stdout carries the summary CSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::mesh::{PmStream, TriangleMesh, LEVEL_COUNT};
use crate::sim::{
    preset, run_cells, run_sim, run_sim_traced, write_experiment, SimConfig, SimOutput,
};

/// What went wrong, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Configuration mistakes: exit 1.
    Config(String),
    /// Everything that failed while doing the work: exit 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "meshwalk",
    about = "Progressive-mesh streaming simulator and codec tools",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write metrics.csv / summary.csv.
    Run(RunArgs),
    /// Run a named experiment grid and write per-cell reports.
    Experiment(ExperimentArgs),
    /// Mesh codec tools.
    Mesh {
        #[command(subcommand)]
        tool: MeshTool,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file (key = value lines under [section] headers).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set clients.count=20 (repeatable).
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed, shorthand for --set run.seed=N.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<SimConfig, CliError> {
        let mut config = SimConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            config
                .apply_file(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        }
        for entry in &self.set {
            config
                .apply_set(entry)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        config
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (default $MESHWALK_OUT, then ./out).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write events.csv with one row per channel event.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Preset name, e.g. exp1_pm_vs_static.
    name: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (default $MESHWALK_OUT, then ./out).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MeshTool {
    /// Build a level stream from an ASCII mesh (v/f lines).
    Simplify {
        /// Input mesh file.
        input: PathBuf,
        /// Output stream file (default: input with .pm extension).
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Rebuild the mesh at a resolution level from a stream file.
    Reconstruct {
        /// Input stream file.
        input: PathBuf,
        /// Resolution level, 1..10.
        #[arg(long, value_name = "L")]
        level: u8,
        /// Output mesh file (default: input with _l<level>.mesh suffix).
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Print per-level vertex counts and record sizes for a stream file.
    Inspect {
        /// Input stream file.
        input: PathBuf,
    },
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("MESHWALK_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

/// Parse argv and execute. Returns the text already printed on success.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Mesh { tool } => cmd_mesh(tool),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = args.config.build()?;
    if args.config.print_config {
        print!("{}", config.print());
        return Ok(());
    }
    let dir = out_dir(&args.out);
    fs::create_dir_all(&dir).map_err(runtime("creating output dir"))?;

    let output = if args.trace {
        let trace = fs::File::create(dir.join("events.csv")).map_err(runtime("events.csv"))?;
        let mut trace = BufWriter::new(trace);
        let output = run_sim_traced(&config, &mut trace)
            .map_err(|e| CliError::Config(e.to_string()))?;
        trace.flush().map_err(runtime("events.csv"))?;
        output
    } else {
        run_sim(&config).map_err(|e| CliError::Config(e.to_string()))?
    };

    write_run_reports(&dir, &output)?;
    let mut stdout = std::io::stdout().lock();
    output
        .metrics
        .write_summary_csv(&mut stdout)
        .map_err(runtime("stdout"))?;
    eprintln!("reports written to {}", dir.display());
    Ok(())
}

fn write_run_reports(dir: &Path, output: &SimOutput) -> Result<(), CliError> {
    let metrics = fs::File::create(dir.join("metrics.csv")).map_err(runtime("metrics.csv"))?;
    let mut metrics = BufWriter::new(metrics);
    output
        .metrics
        .write_metrics_csv(&mut metrics)
        .and_then(|_| metrics.flush())
        .map_err(runtime("metrics.csv"))?;
    let summary = fs::File::create(dir.join("summary.csv")).map_err(runtime("summary.csv"))?;
    let mut summary = BufWriter::new(summary);
    output
        .metrics
        .write_summary_csv(&mut summary)
        .and_then(|_| summary.flush())
        .map_err(runtime("summary.csv"))?;
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let base = args.config.build()?;
    let cells = preset(&args.name, &base).map_err(|e| CliError::Config(e.to_string()))?;
    if args.config.print_config {
        for cell in &cells {
            println!("# cell {}", cell.name);
            print!("{}", cell.config.print());
        }
        return Ok(());
    }
    let outputs = run_cells(&cells).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = out_dir(&args.out).join(&args.name);
    write_experiment(&dir, &cells, &outputs).map_err(runtime("writing experiment reports"))?;
    let comparison =
        fs::read_to_string(dir.join("comparison.csv")).map_err(runtime("comparison.csv"))?;
    print!("{comparison}");
    eprintln!("reports written to {}", dir.display());
    Ok(())
}

fn cmd_mesh(tool: MeshTool) -> Result<(), CliError> {
    match tool {
        MeshTool::Simplify { input, output } => {
            let text = fs::read_to_string(&input)
                .map_err(runtime(&format!("reading {}", input.display())))?;
            let mesh = TriangleMesh::<f64>::parse_ascii(0, &text)
                .map_err(runtime(&format!("{}", input.display())))?;
            let stream = crate::mesh::simplify(&mesh)
                .map_err(runtime(&format!("simplifying {}", input.display())))?;
            let out = output.unwrap_or_else(|| input.with_extension("pm"));
            stream
                .save(&out)
                .map_err(runtime(&format!("writing {}", out.display())))?;
            println!(
                "object,base_vertices,full_vertices,splits,stalled\n{},{},{},{},{}",
                stream.object_id,
                stream.base.vertex_count(),
                stream.original_vertices,
                stream.splits.len(),
                stream.stalled
            );
            eprintln!("stream written to {}", out.display());
            Ok(())
        }
        MeshTool::Reconstruct {
            input,
            level,
            output,
        } => {
            if !(1..=LEVEL_COUNT as u8).contains(&level) {
                return Err(CliError::Config(format!(
                    "level must be 1..{}, got {level}",
                    LEVEL_COUNT
                )));
            }
            let stream = PmStream::<f64>::load(&input)
                .map_err(runtime(&format!("{}", input.display())))?;
            let mesh = stream
                .reconstruct_to_level(level)
                .map_err(runtime("reconstructing"))?;
            let out = output.unwrap_or_else(|| {
                let stem = input.file_stem().unwrap_or_default().to_string_lossy();
                input.with_file_name(format!("{stem}_l{level}.mesh"))
            });
            fs::write(&out, mesh.write_ascii())
                .map_err(runtime(&format!("writing {}", out.display())))?;
            println!(
                "object,level,vertices,faces\n{},{},{},{}",
                mesh.object_id,
                level,
                mesh.vertex_count(),
                mesh.face_count()
            );
            eprintln!("mesh written to {}", out.display());
            Ok(())
        }
        MeshTool::Inspect { input } => {
            let stream = PmStream::<f64>::load(&input)
                .map_err(runtime(&format!("{}", input.display())))?;
            println!("level,vertices,record_bytes");
            for level in 1..=LEVEL_COUNT as u8 {
                let record = stream.level_record(level);
                println!(
                    "{level},{},{}",
                    stream.vertex_count_at_level(level),
                    record.byte_size
                );
            }
            eprintln!(
                "object {} base {} full {} stalled {}",
                stream.object_id,
                stream.base.vertex_count(),
                stream.original_vertices,
                stream.stalled
            );
            Ok(())
        }
    }
}
