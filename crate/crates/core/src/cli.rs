//! Command-line front end. Every subcommand is a thin layer over the library;
//! `run` parses arguments, executes in a thread pool of the requested size and
//! returns the process exit code.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error (bad flags, model
//! file or arguments), 3 a required condition failed, 4 `verify` found a
//! failing property.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    self, dbar_bounds, discrepancy_from, estimate_max_tail, korshunov_item1, mixing_check, rw_exponent, verify_suite,
    write_rows_csv, AnalysisError, BoundRow, MixingConfig, VerifyConfig, SLACK_SE,
};
use crate::assign::{coupled_replicas, sample_replicas, AssignError};
use crate::interaction::{check_conditions, gamma, CheckStatus, InteractionModel, ModelError};
use crate::lattice::{LatticeError, Site, SiteSet};
use crate::sketch::{stop_statistics_from, write_record_jsonl, RecordHeader, DEFAULT_MAX_EVENTS};
use crate::stats::Moments;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONDITIONS: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

const SURVIVAL_GRID: [f64; 3] = [1.0, 2.0, 4.0];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Conditions(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0} propert(y/ies) failed")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Conditions(_) => EXIT_CONDITIONS,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::VerifyFailed(_) => EXIT_VERIFY,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidValue { .. }
            | ModelError::Parse(_)
            | ModelError::Unsupported(_)
            | ModelError::Lattice(_) => CliError::Usage(e.to_string()),
            ModelError::Summability(_) | ModelError::Inconclusive(_) => CliError::Conditions(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::ConditionFailed(_) => CliError::Conditions(e.to_string()),
            AnalysisError::Invalid(_) | AnalysisError::Unsupported(_) | AnalysisError::Refused(_) => {
                CliError::Usage(e.to_string())
            }
            AnalysisError::Model(m) => m.into(),
            AnalysisError::Assign(a) => a.into(),
        }
    }
}

impl From<AssignError> for CliError {
    fn from(e: AssignError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// A `;`-separated list of sites, each a `,`-separated coordinate list: `0;1;2`
/// or `0,0;1,0`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowArg(pub SiteSet);

impl FromStr for WindowArg {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let sites: SiteSet =
            s.split(';').filter(|p| !p.trim().is_empty()).map(Site::from_str).collect::<Result<_, _>>()?;
        if sites.is_empty() {
            return Err(LatticeError::Parse(s.to_string()));
        }
        Ok(WindowArg(sites))
    }
}

fn positive(s: &str) -> Result<u64, String> {
    match s.parse::<u64>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    positive(s).map(|n| n as usize)
}

#[derive(Debug, Parser)]
#[command(name = "perfect-gibbs", version, about = "Perfect sampling of infinite-range Ising-type Gibbs measures")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on this.
    #[arg(long, global = true, value_parser = positive_usize)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Sampling {
    #[arg(long, value_parser = positive)]
    pub replicas: u64,
    #[arg(long)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_EVENTS, value_parser = positive)]
    pub max_events: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summability, termination and uniqueness conditions, gamma and beta_c as JSON.
    Check { model: PathBuf },
    /// Perfect samples of the spins on a window.
    Sample {
        model: PathBuf,
        /// Sites separated by `;`, coordinates by `,`.
        #[arg(long)]
        window: WindowArg,
        #[command(flatten)]
        run: Sampling,
        /// Also write every backward-sketch record.
        #[arg(long)]
        dump_records: bool,
    },
    /// Coupled samples of the measure and its range-L truncations at one site.
    Couple {
        model: PathBuf,
        #[arg(long = "L", value_delimiter = ',', required = true, value_parser = positive_usize)]
        levels: Vec<usize>,
        #[arg(long, default_value = "0")]
        site: Site,
        #[command(flatten)]
        run: Sampling,
        #[arg(long)]
        dump_records: bool,
    },
    /// Table of d-bar bounds, r, delta(L) and gamma.
    Bounds {
        model: PathBuf,
        #[arg(long = "L", value_delimiter = ',', default_value = "1,2,4,8")]
        levels: Vec<usize>,
        /// Also write bounds.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlation decay against the random-walk envelope.
    Mixing {
        model: PathBuf,
        #[arg(long = "R", value_delimiter = ',', default_value = "2,4,6", value_parser = positive_usize)]
        distances: Vec<usize>,
        #[command(flatten)]
        run: Sampling,
        /// Random-walk replicas (default: 10 x replicas).
        #[arg(long, value_parser = positive)]
        walk_replicas: Option<u64>,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Walk stopping ceiling; needed when the Lundberg exponent is 0.
        #[arg(long, value_parser = positive)]
        ceiling: Option<u64>,
    },
    /// Full property suite at reduced replica counts; exit code 4 on any failure.
    Verify {
        model: PathBuf,
        #[arg(long, default_value_t = 2000, value_parser = positive)]
        replicas: u64,
        #[arg(long)]
        seed: u64,
        /// Also write verify.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_EVENTS, value_parser = positive)]
        max_events: u64,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to `stderr`, reports to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| execute(&cli.command, stdout)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match command {
        Command::Check { model } => check(model, stdout),
        Command::Sample { model, window, run, dump_records } => sample(model, &window.0, run, *dump_records, stdout),
        Command::Couple { model, levels, site, run, dump_records } => {
            couple(model, levels, site, run, *dump_records, stdout)
        }
        Command::Bounds { model, levels, out } => bounds(model, levels, out.as_deref(), stdout),
        Command::Mixing { model, distances, run, walk_replicas, eps, ceiling } => {
            let mut config = MixingConfig::new(
                distances.clone(),
                run.replicas,
                walk_replicas.unwrap_or(10 * run.replicas),
                run.seed,
            );
            config.eps = *eps;
            config.ceiling = *ceiling;
            config.max_events = run.max_events;
            mixing(model, &config, &run.out, stdout)
        }
        Command::Verify { model, replicas, seed, out, max_events } => {
            let mut config = VerifyConfig::new(*replicas, *seed);
            config.max_events = *max_events;
            verify(model, &config, out.as_deref(), stdout)
        }
    }
}

fn load(path: &Path) -> Result<InteractionModel, CliError> {
    Ok(InteractionModel::load(path)?)
}

fn check_dim(m: &InteractionModel, sites: &SiteSet) -> Result<(), CliError> {
    match sites.iter().find(|s| s.dim() != m.dim()) {
        Some(s) => Err(CliError::Usage(format!("site {s} is not {}-dimensional", m.dim()))),
        None => Ok(()),
    }
}

/// Refuses to sample when the termination condition is not certified.
fn require_termination(m: &InteractionModel) -> Result<(), CliError> {
    let report = check_conditions(m, &m.reference_sites());
    if report.termination.status != CheckStatus::Pass {
        return Err(CliError::Conditions(format!(
            "termination condition not certified (sum = {})",
            report.termination.value
        )));
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json_line(out: &mut impl Write, value: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    model_hash: String,
    model: String,
    conditions: &'a crate::interaction::ConditionReport,
}

fn check(path: &Path, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let m = load(path)?;
    let report = check_conditions(&m, &m.reference_sites());
    let out = CheckOutput { model_hash: m.model_hash(), model: m.describe(), conditions: &report };
    serde_json::to_writer_pretty(&mut *stdout, &out)?;
    writeln!(stdout)?;
    if !report.all_pass() {
        return Err(CliError::Conditions("one or more conditions failed".into()));
    }
    Ok(())
}

fn ci(mo: &Moments) -> (f64, f64) {
    (mo.mean - SLACK_SE * mo.se(), mo.mean + SLACK_SE * mo.se())
}

fn sample(
    path: &Path,
    window: &SiteSet,
    run: &Sampling,
    dump_records: bool,
    stdout: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let m = load(path)?;
    check_dim(&m, window)?;
    require_termination(&m)?;
    let samples = sample_replicas(&m, window, run.replicas, run.seed, run.max_events)?;

    let mut lines = create(&run.out, "samples.jsonl")?;
    for (s, _) in &samples {
        write_json_line(&mut lines, &s.line())?;
    }
    lines.flush()?;
    if dump_records {
        let mut w = create(&run.out, "records.jsonl")?;
        let hash = m.model_hash();
        for (s, rec) in &samples {
            let header = RecordHeader {
                seed: run.seed,
                replica: s.key.replica,
                model_hash: hash.clone(),
                start: window.clone(),
                level: None,
                process: "full".into(),
            };
            write_record_jsonl(&mut w, &header, rec)?;
        }
        w.flush()?;
    }

    let mut rows = Vec::new();
    let sites: Vec<&Site> = window.iter().collect();
    for s in &sites {
        let mo = Moments::of(samples.iter().map(|(r, _)| r.spins.get(s).unwrap_or(0) as f64));
        rows.push(BoundRow::value("magnetization", s, mo.mean).with_ci(ci(&mo)));
    }
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            let mo = Moments::of(
                samples.iter().map(|(r, _)| (r.spins.get(a).unwrap_or(0) * r.spins.get(b).unwrap_or(0)) as f64),
            );
            rows.push(BoundRow::value("pair_correlation", format!("{a}|{b}"), mo.mean).with_ci(ci(&mo)));
        }
    }
    let n_stop: Vec<f64> = samples.iter().map(|(r, _)| r.n_stop as f64).collect();
    let t_stop: Vec<f64> = samples.iter().map(|(r, _)| r.t_stop).collect();
    let stats = stop_statistics_from(&n_stop, &t_stop, &SURVIVAL_GRID);
    let g = if m.is_translation_invariant() {
        gamma(&m, &SiteSet::singleton(Site::origin(m.dim()))).ok().filter(|g| g.lower > 0.0)
    } else {
        None
    };
    let size = window.len() as f64;
    let mut row = BoundRow::value("mean_n_stop", "", stats.mean_n_stop)
        .with_ci((stats.mean_n_stop - SLACK_SE * stats.se_n_stop, stats.mean_n_stop + SLACK_SE * stats.se_n_stop));
    if let Some(g) = g {
        let bound = size / g.lower;
        row = row.against(bound, stats.mean_n_stop <= bound + SLACK_SE * stats.se_n_stop);
    }
    rows.push(row);
    for (t, p, se) in &stats.survival {
        let mut row =
            BoundRow::value("t_stop_survival", format!("t={t}"), *p).with_ci((p - SLACK_SE * se, p + SLACK_SE * se));
        if let Some(g) = g {
            let bound = (size * (-g.lower * t).exp()).min(1.0);
            row = row.against(bound, *p <= bound + SLACK_SE * se);
        }
        rows.push(row);
    }
    let mut violations = 0;
    for (_, rec) in &samples {
        violations += analysis::supermartingale_violations(rec)?;
    }
    rows.push(BoundRow::value("supermartingale_violations", "", violations as f64).against(0.0, violations == 0));
    write_rows_csv(create(&run.out, "summary.csv")?, &rows)?;
    writeln!(stdout, "{} samples written to {}", samples.len(), run.out.display())?;
    Ok(())
}

fn couple(
    path: &Path,
    levels: &[usize],
    site: &Site,
    run: &Sampling,
    dump_records: bool,
    stdout: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let m = load(path)?;
    let window = SiteSet::singleton(site.clone());
    check_dim(&m, &window)?;
    require_termination(&m)?;
    let mut lines = create(&run.out, "coupled.jsonl")?;
    let mut records = if dump_records { Some(create(&run.out, "records.jsonl")?) } else { None };
    let hash = m.model_hash();
    let mut rows = Vec::new();
    for &level in levels {
        let samples = coupled_replicas(&m, level, &window, run.replicas, run.seed, run.max_events)?;
        for (s, _) in &samples {
            write_json_line(&mut lines, &s.line())?;
        }
        if let Some(w) = records.as_mut() {
            for (s, rec) in &samples {
                for (process, r) in [("full", &rec.full), ("truncated", &rec.truncated)] {
                    let header = RecordHeader {
                        seed: run.seed,
                        replica: s.key.replica,
                        model_hash: hash.clone(),
                        start: window.clone(),
                        level: Some(level),
                        process: process.into(),
                    };
                    write_record_jsonl(w, &header, r)?;
                }
            }
        }
        let est = discrepancy_from(&m, level, site, &samples)?;
        rows.push(
            BoundRow::value("discrepancy", format!("L={level}"), est.estimate())
                .with_ci(est.wilson)
                .against(est.bound, est.pass),
        );
        let rd = est.records_differ;
        let rd_pass = rd.estimate() <= est.bound + SLACK_SE * rd.se();
        rows.push(
            BoundRow::value("records_differ", format!("L={level}"), rd.estimate())
                .with_ci(rd.wilson(SLACK_SE))
                .against(est.bound, rd_pass),
        );
        rows.push(
            BoundRow::value("supermartingale_violations", format!("L={level}"), est.supermartingale_violations as f64)
                .against(0.0, est.supermartingale_violations == 0),
        );
    }
    lines.flush()?;
    if let Some(mut w) = records {
        w.flush()?;
    }
    write_rows_csv(create(&run.out, "discrepancy.csv")?, &rows)?;
    writeln!(stdout, "{} coupled samples per level written to {}", run.replicas, run.out.display())?;
    Ok(())
}

fn bounds(path: &Path, levels: &[usize], out: Option<&Path>, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let m = load(path)?;
    let mut rows = Vec::new();
    for &level in levels {
        let b = dbar_bounds(&m, level)?;
        if rows.is_empty() {
            rows.push(BoundRow::value("r", "", b.r).against(1.0, b.r < 1.0));
            if let Some(g) = b.gamma {
                rows.push(BoundRow::value("gamma", "", g.lower).with_ci((g.lower, g.upper)));
            }
        }
        let p = format!("L={level}");
        rows.push(BoundRow::value("delta", &p, b.delta));
        rows.push(BoundRow::value("bound1", &p, b.bound1.unwrap_or(f64::NAN)));
        rows.push(BoundRow::value("bound2", &p, b.bound2.unwrap_or(f64::NAN)));
    }
    write_rows_csv(&mut *stdout, &rows)?;
    if let Some(dir) = out {
        write_rows_csv(create(dir, "bounds.csv")?, &rows)?;
    }
    Ok(())
}

fn mixing(path: &Path, config: &MixingConfig, out: &Path, stdout: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let m = load(path)?;
    require_termination(&m)?;
    let report = mixing_check(&m, config)?;
    let mut rows = vec![
        BoundRow::value("rho", "", report.rho),
        BoundRow::value("gamma", "", report.gamma),
        BoundRow::value("walk_ceiling", "", report.max_tail.ceiling as f64),
    ];
    if let Some(b) = report.max_tail.bias_bound {
        rows.push(BoundRow::value("walk_bias_bound", "", b));
    }
    for r in &report.rows {
        let p = format!("R={}", r.distance);
        let slack = SLACK_SE * r.covariance_se;
        rows.push(
            BoundRow::value("covariance", &p, r.covariance.abs())
                .with_ci((r.covariance.abs() - slack, r.covariance.abs() + slack))
                .against(r.bound, r.pass),
        );
        let suffix = if r.rounded { " (rounded up)" } else { "" };
        let tail = report.max_tail.estimate_at(r.threshold).expect("threshold was estimated");
        rows.push(
            BoundRow::value("max_tail", format!("m={}{suffix}", r.threshold), r.tail).with_ci(tail.wilson(SLACK_SE)),
        );
    }
    // tail profile of M over 1..=10 and its log-slope against -rho
    let (rw, rho) = rw_exponent(&m)?;
    let thresholds: Vec<i64> = (1..=10).collect();
    let profile = estimate_max_tail(&rw, &thresholds, config.walk_replicas, config.eps, config.seed, config.ceiling)?;
    for (i, t) in thresholds.iter().enumerate() {
        let p = profile.proportion(i);
        rows.push(BoundRow::value("max_tail_profile", format!("m={t}"), p.estimate()).with_ci(p.wilson(SLACK_SE)));
        let k = korshunov_item1(&m, *t as usize)?;
        rows.push(BoundRow::value("korshunov_item1", format!("n={t}"), k));
    }
    if let Some(slope) = profile.log_slope(2, 10) {
        let pass = rho.is_finite() && (slope + rho).abs() <= 0.2 * rho;
        rows.push(BoundRow::value("max_tail_log_slope", "m=2..10", slope).against(-rho, pass));
    }
    write_rows_csv(create(out, "mixing.csv")?, &rows)?;
    writeln!(stdout, "mixing report written to {}", out.join("mixing.csv").display())?;
    Ok(())
}

fn verify(
    path: &Path,
    config: &VerifyConfig,
    out: Option<&Path>,
    stdout: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let m = load(path)?;
    let rows = verify_suite(&m, config)?;
    write_rows_csv(&mut *stdout, &rows)?;
    if let Some(dir) = out {
        write_rows_csv(create(dir, "verify.csv")?, &rows)?;
    }
    let failed = rows.iter().filter(|r| r.pass == Some(false)).count();
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}
