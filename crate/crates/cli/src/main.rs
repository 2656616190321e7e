//! `seafloor`: build template libraries, simulate seabeds, classify
//! backscatter signals and evaluate the classifier.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 unreadable or
//! malformed data, 3 numerical failure.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seafloor_core::config::{Preset, RunConfig};
use seafloor_core::experiments::{self, Fidelity, SeabedModel, Simulator};
use seafloor_core::library::{LibraryBuilder, LibraryIndex};
use seafloor_core::matcher::{classify_values, ClassifyOptions};
use seafloor_core::microlocal::decompose_at;
use seafloor_core::params::{GeoParams, MaterialType, SeafloorParams};
use seafloor_core::report;
use seafloor_core::solver::solve_template;
use seafloor_core::Error;

#[derive(Parser, Debug)]
#[command(name = "seafloor", version, about = "Seafloor backscatter templates and classification")]
struct Cli {
    /// worker threads (defaults to all cores)
    #[arg(long, global = true, env = "SEAFLOOR_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// preset used when no config file is given
    #[arg(long, default_value = "desk_20khz")]
    preset: String,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Failure> {
        let cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::preset(Preset::from_name(&self.preset)?),
        };
        for w in cfg.warnings() {
            eprintln!("warning: {w}");
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FidelityArg {
    Segmented,
    FullDomain,
}

impl From<FidelityArg> for Fidelity {
    fn from(f: FidelityArg) -> Self {
        match f {
            FidelityArg::Segmented => Fidelity::Segmented,
            FidelityArg::FullDomain => Fidelity::FullDomain,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve every template of the configured grid and write a library file.
    BuildLibrary {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// continue from a partially written library at --out
        #[arg(long)]
        resume: bool,
    },
    /// Simulate the backscatter signal of a synthetic seabed.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// a, b or clay_rock
        #[arg(long, default_value = "a")]
        model: String,
        /// object width in segments (0 for none)
        #[arg(long, default_value_t = 0.0)]
        object_width: f64,
        /// noise level relative to the signal RMS
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        fidelity: Option<FidelityArg>,
        /// signal CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a signal CSV against a library.
    Classify {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        signal: Option<PathBuf>,
        /// grazing angle of the signal; the library's angle when omitted
        #[arg(long)]
        alpha: Option<f64>,
        /// result JSON (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo evaluation of a synthetic seabed.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long, default_value = "a")]
        model: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// object widths in segments, comma separated
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        fidelity: Option<FidelityArg>,
        /// drop transition templates before matching
        #[arg(long)]
        pure_only: bool,
        /// report JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write overlay plots, error tables and a polar table from a report.
    Report {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// Print the resolved configuration as TOML.
    Config {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: 1, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() {
            3
        } else if e.is_data() {
            2
        } else {
            1
        };
        Self { code, msg: e.to_string() }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: 2, msg: format!("{}: {e}", path.display()) }
}

fn require(p: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> Result<PathBuf, Failure> {
    p.or_else(|| fallback.clone()).ok_or_else(|| Failure::usage(format!("{flag} is required")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn load_library(path: &Path) -> Result<LibraryIndex, Failure> {
    let lib = LibraryIndex::load(path).map_err(|e| Failure {
        code: if e.is_data() { 2 } else { 1 },
        msg: format!("{}: {e}", path.display()),
    })?;
    if lib.is_empty() {
        return Err(Error::EmptyLibrary.into());
    }
    Ok(lib)
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut s = serde_json::to_vec_pretty(v).map_err(Error::from)?;
    s.push(b'\n');
    Ok(s)
}

fn build_library(cfg: RunConfig, out: Option<PathBuf>, resume: bool) -> Result<(), Failure> {
    let out = require(out, &cfg.paths.library, "--out")?;
    let mut builder = LibraryBuilder::new(cfg.grid.clone(), cfg.experiment, cfg.domain, cfg.solver);
    builder.profile = cfg.profile;
    builder.validate()?;
    let jobs = cfg.grid.jobs().len();
    println!(
        "grid: {} geometries x {} angles, {} materials, {} transitions; {jobs} solves, {} templates",
        cfg.grid.geometries().len(),
        cfg.grid.alphas().len(),
        cfg.grid.materials.len(),
        cfg.grid.transitions.len(),
        2 * jobs
    );
    let t0 = Instant::now();
    let progress = |done: usize, total: usize| eprintln!("  {done}/{total} solves, {:.1} s", t0.elapsed().as_secs_f64());
    let lib = if resume && out.exists() {
        builder.resume(&out, progress)?
    } else {
        builder.build_from(builder.empty_index(), Some(&out), progress)?
    };
    println!("wrote {} templates to {} in {:.1} s", lib.len(), out.display(), t0.elapsed().as_secs_f64());
    Ok(())
}

fn simulate(
    cfg: RunConfig,
    model: &str,
    width: f64,
    noise: f64,
    seed: Option<u64>,
    fidelity: Option<FidelityArg>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    if !(width >= 0.0) {
        return Err(Failure::usage("--object-width must be non-negative"));
    }
    let out = require(out, &cfg.paths.signal, "--out")?;
    let model = SeabedModel::by_name(model)?.with_object_at(width, cfg.evaluation.object_depth);
    let mut sim = Simulator::new(cfg.experiment, cfg.domain, cfg.solver)
        .with_fidelity(fidelity.map(Fidelity::from).unwrap_or(cfg.fidelity));
    sim.profile = cfg.profile;
    let t0 = Instant::now();
    let clean = sim.simulate(&model)?;
    let signal = if noise > 0.0 {
        experiments::add_noise(&clean.signal, noise, seed.unwrap_or(cfg.evaluation.seed))?
    } else if noise == 0.0 {
        clean.signal
    } else {
        return Err(Failure::usage("--noise must be non-negative"));
    };
    write_file(&out, report::signal_csv_string(&signal)?.as_bytes())?;
    eprintln!(
        "model {}: {} samples, {} solves, {:.1} s",
        model.name,
        signal.len(),
        clean.solves,
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

fn classify(
    args: &ConfigArgs,
    library: Option<PathBuf>,
    signal: Option<PathBuf>,
    alpha: Option<f64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let cfg = args.load()?;
    let lib = load_library(&require(library, &cfg.paths.library, "--library")?)?;
    let path = require(signal, &cfg.paths.signal, "--signal")?;
    let alpha = alpha
        .or(args.config.as_ref().map(|_| cfg.experiment.alpha))
        .unwrap_or(lib.exp.alpha);
    let file = fs::File::open(&path).map_err(|e| io_err(&path, e))?;
    let sig = report::read_signal_csv(BufReader::new(file), alpha, lib.domain.segment_width)?;
    let res = classify_values(&sig.values, alpha, &lib, &cfg.matcher, ClassifyOptions::default())?;
    let bytes = to_json(&res)?;
    match out {
        Some(p) => write_file(&p, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    let labels: Vec<&str> = res.material_map.iter().map(|m| m.label()).collect();
    eprintln!("{}", labels.join(" "));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    mut cfg: RunConfig,
    library: Option<PathBuf>,
    model: &str,
    trials: Option<usize>,
    noise: Option<f64>,
    seed: Option<u64>,
    widths: Option<Vec<f64>>,
    fidelity: Option<FidelityArg>,
    pure_only: bool,
    report_path: Option<PathBuf>,
) -> Result<(), Failure> {
    let ev = &mut cfg.evaluation;
    ev.trials = trials.unwrap_or(ev.trials);
    ev.noise_level = noise.unwrap_or(ev.noise_level);
    ev.seed = seed.unwrap_or(ev.seed);
    if let Some(w) = widths {
        ev.object_widths = w;
    }
    if let Some(f) = fidelity {
        cfg.fidelity = f.into();
    }
    cfg.validate()?;
    let out = require(report_path, &cfg.paths.report, "--report")?;
    let mut lib = load_library(&require(library, &cfg.paths.library, "--library")?)?;
    if pure_only {
        lib = lib.pure_only();
    }
    // seabeds are simulated with the setup the templates were solved with
    let mut sim = Simulator::new(lib.exp, lib.domain, lib.solve).with_fidelity(cfg.fidelity);
    sim.profile = lib.profile;
    let model = SeabedModel::by_name(model)?;
    let t0 = Instant::now();
    let rep = experiments::evaluate(&sim, &model, &lib, &cfg.matcher, &cfg.evaluation)?;
    write_file(&out, &to_json(&rep)?)?;
    for c in &rep.cases {
        let m = &c.metrics;
        eprintln!(
            "width {}: accuracy {:.3}, detection {}, false alarms {:.3}, E = [{:.4}, {:.4}, {:.4}]",
            c.object_width,
            m.material_accuracy,
            m.detection_rate.map_or("-".into(), |d| format!("{d:.3}")),
            m.false_alarm_rate,
            m.geometry_errors[0],
            m.geometry_errors[1],
            m.geometry_errors[2]
        );
    }
    eprintln!("{} cases in {:.1} s", rep.cases.len(), t0.elapsed().as_secs_f64());
    Ok(())
}

fn write_report(cfg: RunConfig, report_path: Option<PathBuf>, out_dir: Option<PathBuf>, bins: usize) -> Result<(), Failure> {
    let path = require(report_path, &cfg.paths.report, "--report")?;
    let dir = require(out_dir, &cfg.paths.out_dir, "--out-dir")?;
    let text = fs::read(&path).map_err(|e| io_err(&path, e))?;
    let rep: experiments::TrialReport = serde_json::from_slice(&text)
        .map_err(|e| Failure { code: 2, msg: format!("{}: {e}", path.display()) })?;
    if rep.cases.is_empty() || rep.cases.iter().any(|c| c.trials.is_empty()) {
        return Err(Error::Format("report holds no trials".into()).into());
    }
    for c in &rep.cases {
        let stem = format!("{}_w{}", c.model, c.object_width);
        let title = format!("model {} object width {}: clean, noisy and predicted backscatter", c.model, c.object_width);
        write_file(&dir.join(format!("{stem}_overlay.svg")), report::overlay_svg(&c.overlay, &title).as_bytes())?;
        write_file(&dir.join(format!("{stem}_errors.csv")), report::errors_csv(c)?.as_bytes())?;
        write_file(&dir.join(format!("{stem}_histogram.csv")), report::histogram_csv(c, bins)?.as_bytes())?;
    }
    // ray decomposition above the first segment of the first seabed
    let first = &rep.cases[0];
    let material = first.truth.labels.first().copied().unwrap_or(MaterialType::Sand);
    let g = first.truth.geometries.first().copied().unwrap_or(GeoParams::new(15.0, 1.0, 26.0));
    let mut params = SeafloorParams::new(material, g);
    if material == MaterialType::Metal {
        params = params.with_object_depth(cfg.grid.object_depth);
    }
    let sol = solve_template(&params, &cfg.experiment, &cfg.domain, &cfg.solver)?;
    let d = &cfg.domain;
    let dec = decompose_at(&sol.scattered, &cfg.experiment, (1.5 * d.segment_width, d.receiver_line_height), &cfg.profile)?;
    write_file(&dir.join("polar.csv"), report::polar_csv(&dec)?.as_bytes())?;
    eprintln!("wrote {} cases to {}", rep.cases.len(), dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::BuildLibrary { cfg, out, resume } => build_library(cfg.load()?, out, resume),
        Command::Simulate {
            cfg,
            model,
            object_width,
            noise,
            seed,
            fidelity,
            out,
        } => simulate(cfg.load()?, &model, object_width, noise, seed, fidelity, out),
        Command::Classify {
            cfg,
            library,
            signal,
            alpha,
            out,
        } => classify(&cfg, library, signal, alpha, out),
        Command::Evaluate {
            cfg,
            library,
            model,
            trials,
            noise,
            seed,
            widths,
            fidelity,
            pure_only,
            report,
        } => evaluate(cfg.load()?, library, &model, trials, noise, seed, widths, fidelity, pure_only, report),
        Command::Report {
            cfg,
            report,
            out_dir,
            bins,
        } => write_report(cfg.load()?, report, out_dir, bins),
        Command::Config { cfg } => {
            print!("{}", cfg.load()?.to_toml_string()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
