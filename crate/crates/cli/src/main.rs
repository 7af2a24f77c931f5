//! Command-line front end: fringe simulation and fitting, count synthesis,
//! state reconstruction and the replication report.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use biphoton::fixtures::Reference;
use biphoton::fringe::{
    fit_fringe, phase_grid, read_csv, simulate_fringe, synthesize_counts, write_csv, FringeData,
    FringeScan,
};
use biphoton::replicate::run_all;
use biphoton::source::SourceParams;
use biphoton::tomography::{
    consistency_check_with_mean, linear_inversion, mle_reconstruct, MleSettings, TomographyFile,
    TomographyResult,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

/// Seed used by `replicate-paper` when none is given.
const DEFAULT_REPLICATION_SEED: u64 = 20240917;
const CONSISTENCY_LIMIT: f64 = 0.05;

#[derive(Parser, Debug)]
#[command(
    name = "biphoton",
    version,
    about = "Two-photon interference and spin-1 tomography toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct SourceArgs {
    /// Fraction of pairs generated before the first splitter.
    #[arg(long = "R", default_value_t = 0.0)]
    r: f64,
    /// Pure-state weight against white noise.
    #[arg(long = "V", default_value_t = 1.0)]
    v: f64,
    /// Internal MZI phase.
    #[arg(long, default_value_t = FRAC_PI_2, allow_hyphen_values = true)]
    theta: f64,
}

#[derive(clap::Args, Debug, Clone)]
struct ScanArgs {
    #[arg(long = "phi-start", default_value_t = 0.0, allow_hyphen_values = true)]
    phi_start: f64,
    /// Exclusive end of the phase range.
    #[arg(long = "phi-end", default_value_t = 2.0 * PI, allow_hyphen_values = true)]
    phi_end: f64,
    #[arg(long, default_value_t = 50)]
    steps: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Linear,
    Mle,
    Both,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Outcome probabilities over a phase scan (CSV `phi,p20,p11,p02`).
    SimulateFringe {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Poisson counts (CSV `phi,count20,count11,count02`) from a probability
    /// CSV given with `--in`, or from the source parameters.
    SynthCounts {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        scan: ScanArgs,
        /// Per-outcome normalizations `N20,N11,N02`; defaults to the bundled reference values.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        norms: Option<Vec<f64>>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit V, R, normalizations and phase offset to a count CSV.
    FitFringe {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = FRAC_PI_2, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Density matrix from a tomography JSON file.
    TomoReconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        /// Effective events per direction when the file holds probabilities.
        #[arg(long, default_value_t = 1e4)]
        shots: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Linear-relation consistency residuals of a tomography file.
    TomoVerify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Print each residual against its limit.
        #[arg(long = "tolerance-report")]
        tolerance_report: bool,
    },
    /// Run the replication suite against the bundled reference data.
    ReplicatePaper {
        #[arg(long, default_value_t = DEFAULT_REPLICATION_SEED)]
        seed: u64,
        /// JSON report destination.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print every check with its tolerance, not just one line per criterion.
        #[arg(long = "tolerance-report")]
        tolerance_report: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SimulateFringe { .. } => "simulate-fringe",
            Command::SynthCounts { .. } => "synth-counts",
            Command::FitFringe { .. } => "fit-fringe",
            Command::TomoReconstruct { .. } => "tomo-reconstruct",
            Command::TomoVerify { .. } => "tomo-verify",
            Command::ReplicatePaper { .. } => "replicate-paper",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Validation(_) => "validation",
            Failure::Numerical(_) => "numerical",
            Failure::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<biphoton::Error> for Failure {
    fn from(e: biphoton::Error) -> Self {
        use biphoton::Error as E;
        match e {
            E::Io(_) => Failure::Io(e.to_string()),
            E::NotConverged(_) | E::NoSolution { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

/// Files written by a command plus any failure to report after writing.
struct Written {
    outputs: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
    deferred: Option<Failure>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .to_string();
            return report(&Failure::Validation(
                first.trim_start_matches("error: ").to_string(),
            ));
        }
    };
    let started = Instant::now();
    let name = cli.command.name();
    let result = dispatch(&cli.command).and_then(|w| {
        for out in &w.outputs {
            write_manifest(out, name, &w, started)?;
        }
        Ok(w.deferred)
    });
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(f)) | Err(f) => report(&f),
    }
}

fn report(f: &Failure) -> ExitCode {
    let line = json!({"error": f.kind(), "exit": f.code(), "message": f.message()});
    eprintln!("{line}");
    ExitCode::from(f.code())
}

fn dispatch(command: &Command) -> Outcome<Written> {
    match command {
        Command::SimulateFringe { source, scan, out } => {
            check_output(out)?;
            let params = source_params(source)?;
            let phis = phases(scan)?;
            let probs = simulate_fringe(&params, source.theta, &phis)?;
            let scan = FringeScan::new(source.theta, phis, FringeData::Probabilities(probs))?;
            write_atomic(out, &csv_bytes(&scan)?)?;
            Ok(written(vec![out.clone()], vec![], None))
        }
        Command::SynthCounts {
            input,
            source,
            scan,
            norms,
            seed,
            out,
        } => {
            check_output(out)?;
            let norms = match norms {
                Some(n) => [n[0], n[1], n[2]],
                None => Reference::load()?.fringe.n,
            };
            let (phis, probs) = match input {
                Some(path) => {
                    let scan = read_csv(open(path)?.as_slice(), source.theta)?;
                    match scan.data() {
                        FringeData::Probabilities(p) => (scan.phi().to_vec(), p.clone()),
                        FringeData::Counts(_) => {
                            return Err(Failure::Validation("input must hold probabilities".into()))
                        }
                    }
                }
                None => {
                    let phis = phases(scan)?;
                    let probs = simulate_fringe(&source_params(source)?, source.theta, &phis)?;
                    (phis, probs)
                }
            };
            let counts = synthesize_counts(source.theta, &phis, &probs, norms, *seed)?;
            write_atomic(out, &csv_bytes(&counts)?)?;
            Ok(written(
                vec![out.clone()],
                input.iter().cloned().collect(),
                Some(*seed),
            ))
        }
        Command::FitFringe { input, theta, out } => {
            check_output(out)?;
            let scan = read_csv(open(input)?.as_slice(), *theta)?;
            let fit = fit_fringe(&scan)?;
            write_atomic(out, &json_bytes(&fit)?)?;
            let mut w = written(vec![out.clone()], vec![input.clone()], None);
            if !fit.converged {
                w.deferred = Some(Failure::Numerical(format!(
                    "fit did not converge; best weighted residual {}",
                    fit.residual
                )));
            }
            Ok(w)
        }
        Command::TomoReconstruct {
            input,
            method,
            shots,
            out,
        } => {
            check_output(out)?;
            if *shots <= 0.0 || !shots.is_finite() {
                return Err(Failure::Validation(format!(
                    "--shots must be positive, got {shots}"
                )));
            }
            let file = tomography_file(input)?;
            let data = file.data()?;
            let raw = match method {
                Method::Linear | Method::Both => Some(linear_inversion(&data.table())?),
                Method::Mle => None,
            };
            let ml = match method {
                Method::Mle | Method::Both => Some(mle_reconstruct(
                    &data.counts(*shots)?,
                    &MleSettings::default(),
                )?),
                Method::Linear => None,
            };
            let result = TomographyResult::new(raw.as_ref(), ml.as_ref());
            write_atomic(out, &json_bytes(&result)?)?;
            let mut w = written(vec![out.clone()], vec![input.clone()], None);
            if let Some(ml) = ml.filter(|m| !m.converged) {
                w.deferred = Some(Failure::Numerical(format!(
                    "likelihood iteration stopped after {} steps without converging",
                    ml.iterations
                )));
            }
            Ok(w)
        }
        Command::TomoVerify {
            input,
            out,
            tolerance_report,
        } => {
            check_output(out)?;
            let file = tomography_file(input)?;
            let table = file.data()?.table();
            let r = consistency_check_with_mean(&table, file.lz_mean()?)?;
            let mut checks = vec![("L1", r.residual_l1), ("L2", r.residual_l2)];
            if let Some(z) = r.residual_lz {
                checks.push(("Lz", z));
            }
            let body = json!({
                "residuals": r,
                "limit": CONSISTENCY_LIMIT,
                "within_limit": checks.iter().all(|(_, x)| *x <= CONSISTENCY_LIMIT),
            });
            write_atomic(out, &json_bytes(&body)?)?;
            if *tolerance_report {
                for (name, x) in &checks {
                    let verdict = if *x <= CONSISTENCY_LIMIT {
                        "PASS"
                    } else {
                        "FAIL"
                    };
                    println!("{verdict} {name} residual {x:.6} (limit {CONSISTENCY_LIMIT})");
                }
            }
            Ok(written(vec![out.clone()], vec![input.clone()], None))
        }
        Command::ReplicatePaper {
            seed,
            out,
            tolerance_report,
        } => {
            if let Some(out) = out {
                check_output(out)?;
            }
            let report = run_all(*seed);
            if *tolerance_report {
                print!("{report}");
            } else {
                for c in &report.criteria {
                    println!("{}", c.summary());
                }
            }
            let outputs = match out {
                Some(out) => {
                    write_atomic(out, &json_bytes(&report)?)?;
                    vec![out.clone()]
                }
                None => vec![],
            };
            let mut w = written(outputs, vec![], Some(*seed));
            let failed = report.failed_ids();
            if !failed.is_empty() {
                let names: Vec<String> =
                    failed.iter().map(|id| format!("criterion {id}")).collect();
                w.deferred = Some(Failure::Numerical(format!("failed: {}", names.join(", "))));
            }
            Ok(w)
        }
    }
}

fn written(outputs: Vec<PathBuf>, inputs: Vec<PathBuf>, seed: Option<u64>) -> Written {
    Written {
        outputs,
        inputs,
        seed,
        deferred: None,
    }
}

fn source_params(s: &SourceArgs) -> Outcome<SourceParams> {
    if !s.theta.is_finite() {
        return Err(Failure::Validation("--theta must be finite".into()));
    }
    Ok(SourceParams::new(s.r, s.v)?)
}

fn phases(s: &ScanArgs) -> Outcome<Vec<f64>> {
    if s.steps == 0 {
        return Err(Failure::Validation("--steps must be at least 1".into()));
    }
    if !s.phi_start.is_finite() || !s.phi_end.is_finite() || s.phi_end <= s.phi_start {
        return Err(Failure::Validation(
            "--phi-end must exceed --phi-start".into(),
        ));
    }
    Ok(phase_grid(s.phi_start, s.phi_end, s.steps))
}

fn open(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn tomography_file(path: &Path) -> Outcome<TomographyFile> {
    serde_json::from_slice(&open(path)?)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn check_output(out: &Path) -> Outcome<()> {
    let parent = parent_dir(out);
    if !parent.is_dir() {
        return Err(Failure::Io(format!(
            "output directory {} does not exist",
            parent.display()
        )));
    }
    if out.is_dir() {
        return Err(Failure::Validation(format!(
            "{} is a directory",
            out.display()
        )));
    }
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn csv_bytes(scan: &FringeScan) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(scan, &mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Outcome<Vec<u8>> {
    let mut buf =
        serde_json::to_vec_pretty(value).map_err(|e| Failure::Validation(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

/// Temp file in the destination directory, then rename over `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> Outcome<()> {
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path)).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_manifest(out: &Path, command: &str, w: &Written, started: Instant) -> Outcome<()> {
    let inputs: Vec<_> = w
        .inputs
        .iter()
        .map(|p| json!({"path": p, "bytes": fs::metadata(p).map(|m| m.len()).ok()}))
        .collect();
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "command": command,
        "arguments": std::env::args().skip(1).collect::<Vec<_>>(),
        "inputs": inputs,
        "output": out,
        "seed": w.seed,
        "versions": {"biphoton": env!("CARGO_PKG_VERSION")},
        "elapsed_s": started.elapsed().as_secs_f64(),
        "created_unix": created,
    });
    write_atomic(&manifest_path(out), &json_bytes(&manifest)?)
}
