//! Command-line driver: configuration, rate scans, simulation, estimation
//! from stored tallies and the Fock-space verification table.

pub mod config;
mod error;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use pmqkd::decoy::{finite_size_estimate, DecoyEstimate, TallyTable};
use pmqkd::montecarlo::{simulate_with_metadata, SimConfig, SimMetadata};
use pmqkd::rates::{pm_rate_from_tallies, scan_distance, write_scan_csv, Crossing, GroupSelection};

pub use config::{parse_config, read_config, ConfigFile, GroupsArg, GroupsName, Preset, RunConfig};
pub use error::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PMQKD_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "pmqkd",
    version,
    about = "Phase-matching QKD rate scans, simulation and estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Key rate against distance for the chosen protocols, as CSV.
    #[command(allow_negative_numbers = true)]
    Scan(Common),
    /// Simulate the protocol and write a tally table plus a JSON sidecar.
    #[command(allow_negative_numbers = true)]
    Simulate(Common),
    /// Finite-size decoy estimate from a stored tally table, as JSON.
    #[command(allow_negative_numbers = true)]
    Estimate(EstimateArgs),
    /// Fock-space checks of the parity and phase-randomization bounds, as CSV.
    #[command(allow_negative_numbers = true)]
    VerifySymmetry(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base parameter set, applied before the file and the flags.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Output path; `-` writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten, next_help_heading = "ChannelParams")]
    pub channel: config::ChannelSection,
    #[command(flatten, next_help_heading = "ProtocolParams")]
    pub protocol: config::ProtocolSection,
    #[command(flatten, next_help_heading = "SimConfig")]
    pub sim: config::SimSection,
    #[command(flatten, next_help_heading = "ScanOptions")]
    pub scan: config::ScanSection,
    #[command(flatten, next_help_heading = "VerifyOptions")]
    pub verify: config::VerifySection,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Tally table CSV.
    #[arg(long)]
    pub tallies: PathBuf,
    /// Simulation sidecar; defaults to the tally path with a `.json` extension, if present.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

impl Common {
    /// File values overlaid with flag values.
    fn layers(&self) -> Result<ConfigFile, CliError> {
        let mut layers = match &self.config {
            Some(path) => read_config(path)?,
            None => ConfigFile::default(),
        };
        let flags = ConfigFile {
            preset: self.preset,
            channel: self.channel.clone(),
            protocol: self.protocol.clone(),
            sim: self.sim.clone(),
            scan: self.scan.clone(),
            verify: self.verify.clone(),
        };
        layers.overlay(&flags);
        Ok(layers)
    }

    fn resolve(&self, base: Option<SimConfig>) -> Result<RunConfig, CliError> {
        RunConfig::resolve(&self.layers()?, base)
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(CliError::Closed) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Scan(c) => scan(c),
        Command::Simulate(c) => simulate(c),
        Command::Estimate(a) => estimate(a),
        Command::VerifySymmetry(c) => verify_symmetry(c),
    }
}

/// Where a command writes: the explicit path, else `name` in the output
/// directory from the environment, else `name` in the working directory.
pub fn output_path(explicit: Option<&Path>, name: &str) -> Output {
    match explicit {
        Some(p) if p == Path::new("-") => Output::Stdout,
        Some(p) => Output::File(p.to_path_buf()),
        None => {
            let dir = std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."));
            Output::File(dir.join(name))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Output {
    Stdout,
    File(PathBuf),
}

/// Writes through a temporary file in the target directory, then renames it
/// into place, so readers never see a partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .map_err(|e| CliError::Failed(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

fn emit<F>(output: &Output, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match output {
        Output::Stdout => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            fill(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
        Output::File(path) => write_atomic(path, fill),
    }
}

fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

/// Sidecar path for a data file: the same name with a `.json` extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Debug, Serialize)]
struct ScanSidecar<'a> {
    version: &'static str,
    config: &'a RunConfig,
    crossings: &'a [Crossing],
    runtime_seconds: f64,
}

fn scan(c: &Common) -> Result<(), CliError> {
    let run = c.resolve(None)?;
    run.validate_scan()?;
    let output = output_path(c.out.as_deref(), "scan.csv");
    let start = Instant::now();
    let result = scan_distance(
        run.channel(),
        run.protocol(),
        &run.scan,
        &run.distances.points(),
    )?;
    let runtime_seconds = start.elapsed().as_secs_f64();
    emit(&output, |w| Ok(write_scan_csv(&result, w)?))?;
    for x in &result.crossings {
        match x.distance_km {
            Some(d) => eprintln!("{} exceeds PLOB from {d:.1} km", x.protocol),
            None => eprintln!("{} stays below PLOB on this grid", x.protocol),
        }
    }
    if let Output::File(path) = &output {
        let sidecar = ScanSidecar {
            version: env!("CARGO_PKG_VERSION"),
            config: &run,
            crossings: &result.crossings,
            runtime_seconds,
        };
        write_atomic(&sidecar_path(path), |w| write_json(w, &sidecar))?;
    }
    Ok(())
}

fn simulate(c: &Common) -> Result<(), CliError> {
    let run = c.resolve(None)?;
    run.validate_simulation()?;
    let path = match output_path(c.out.as_deref(), "tallies.csv") {
        Output::File(p) => p,
        Output::Stdout => {
            return Err(CliError::invalid(
                "out",
                "simulate writes a file and its sidecar, not stdout",
            ))
        }
    };
    let (out, meta) = simulate_with_metadata(&run.sim)?;
    write_atomic(&path, |w| Ok(out.tallies.write_csv(w)?))?;
    let json = meta.to_json()?;
    write_atomic(&sidecar_path(&path), |w| {
        writeln!(w, "{json}")?;
        Ok(())
    })?;
    Ok(())
}

/// Groups the estimate refers to.
pub fn estimate_groups(
    groups: &GroupsArg,
    tallies: &TallyTable,
    run: &RunConfig,
) -> Result<Vec<usize>, CliError> {
    let all: Vec<usize> = (0..tallies.groups()).collect();
    Ok(match groups {
        GroupsArg::Named(GroupsName::All) => all,
        GroupsArg::List(l) => l.clone(),
        GroupsArg::Named(GroupsName::Auto) => {
            let kept =
                pm_rate_from_tallies(tallies, run.protocol(), &GroupSelection::AutoPositive)?
                    .groups_kept();
            if kept.is_empty() {
                all
            } else {
                kept
            }
        }
    })
}

/// Reads a tally table and estimates the phase error for the configured groups.
pub fn estimate_from_file(
    tallies: &Path,
    metadata: Option<&Path>,
    common: &Common,
) -> Result<DecoyEstimate, CliError> {
    let table = TallyTable::read_path(tallies)
        .map_err(|e| CliError::Config(format!("{}: {e}", tallies.display())))?;
    let sidecar = match metadata {
        Some(p) => Some(p.to_path_buf()),
        None => Some(sidecar_path(tallies)).filter(|p| p.exists()),
    };
    let base = match sidecar {
        Some(p) => {
            let text = fs::read_to_string(&p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Some(
                SimMetadata::from_json(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
                    .config,
            )
        }
        None => None,
    };
    let run = common.resolve(base)?;
    run.validate_estimate()?;
    if table.groups() != run.protocol().groups() {
        return Err(CliError::invalid(
            "phase_slices",
            format!(
                "tallies have {} groups but phase_slices gives {}",
                table.groups(),
                run.protocol().groups()
            ),
        ));
    }
    let groups_arg = run
        .groups
        .clone()
        .unwrap_or(GroupsArg::Named(GroupsName::All));
    let groups = estimate_groups(&groups_arg, &table, &run)?;
    Ok(finite_size_estimate(&table, run.protocol(), &groups)?)
}

fn estimate(a: &EstimateArgs) -> Result<(), CliError> {
    let est = estimate_from_file(&a.tallies, a.metadata.as_deref(), &a.common)?;
    let output = match &a.common.out {
        Some(p) => output_path(Some(p), "estimate.json"),
        None => Output::Stdout,
    };
    emit(&output, |w| write_json(w, &est))
}

fn verify_symmetry(c: &Common) -> Result<(), CliError> {
    let run = c.resolve(None)?;
    run.validate_verify()?;
    let report = pmqkd_fock::verify_symmetry(&run.verify)?;
    let output = match &c.out {
        Some(p) => output_path(Some(p), "symmetry.csv"),
        None => Output::Stdout,
    };
    emit(&output, |w| Ok(report.write_csv(w)?))?;
    let failed = report.rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Failed(format!(
            "{failed} of {} checks failed",
            report.rows.len()
        )));
    }
    Ok(())
}
