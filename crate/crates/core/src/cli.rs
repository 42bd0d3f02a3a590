//! Command-line front end.
//!
//! Every subcommand resolves its options into a [`RunConfig`], runs the
//! pipeline and writes its artifacts into the output directory together with
//! `config.json` (the resolved configuration) and `manifest.json` (schema tag,
//! input checksum and the checksum of every artifact). Nothing written depends
//! on the clock or the thread count, so reruns are byte-identical.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hrmsm::{trajhrmsm_gform, trajhrmsm_ipw, trajhrmsm_pltmle, HrmsmConfig, HrmsmFamily, HrmsmFit};
use crate::lcga::{fit_lcga, parse_degree, Classifier, LcgaConfig, LcgaModel};
use crate::msm::{trajmsm_gform, trajmsm_ipw, trajmsm_pltmle, GformConfig, IpwConfig, MsmFit, OutcomeFamily, PltmleConfig, Report};
use crate::paneldata::{split_data, Cohort, Layout, PanelData, Roles};
use crate::sim::{gendata, DgpSpec};
use crate::weights::{History, Numerator, WeightConfig};

/// Version tag written into every manifest and report.
pub const SCHEMA: &str = "trajcausal/1";

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "TRAJCAUSAL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "trajcausal", version, about = "Trajectory groups as treatments in marginal structural models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulated cohort.
    Simulate(Options),
    /// Fit the latent-class trajectory model.
    BuildTraj(Options),
    /// Observed treatment means per trajectory group and time.
    PlotTraj(Options),
    /// Split the follow-up into overlapping intervals.
    Split(Options),
    MsmIpw(Options),
    MsmGform(Options),
    MsmPltmle(Options),
    HrmsmIpw(Options),
    HrmsmGform(Options),
    HrmsmPltmle(Options),
}

impl Command {
    fn parts(&self) -> (&'static str, &Options) {
        match self {
            Command::Simulate(o) => ("simulate", o),
            Command::BuildTraj(o) => ("build-traj", o),
            Command::PlotTraj(o) => ("plot-traj", o),
            Command::Split(o) => ("split", o),
            Command::MsmIpw(o) => ("msm-ipw", o),
            Command::MsmGform(o) => ("msm-gform", o),
            Command::MsmPltmle(o) => ("msm-pltmle", o),
            Command::HrmsmIpw(o) => ("hrmsm-ipw", o),
            Command::HrmsmGform(o) => ("hrmsm-gform", o),
            Command::HrmsmPltmle(o) => ("hrmsm-pltmle", o),
        }
    }
}

/// Flags shared by all subcommands. Unset flags fall back to `--config`,
/// then to the defaults of [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// JSON run configuration, e.g. a previous `config.json`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV.
    #[arg(long)]
    pub input: Option<String>,
    /// Roles sidecar file, or inline `key=value;key=value`.
    #[arg(long)]
    pub roles: Option<String>,
    /// Input layout; inferred from the header when omitted.
    #[arg(long)]
    pub layout: Option<String>,
    /// Trajectory model written by build-traj.
    #[arg(long)]
    pub model: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub number_traj: Option<usize>,
    /// linear, quadratic or cubic.
    #[arg(long)]
    pub degree_traj: Option<String>,
    #[arg(long)]
    pub n_starts: Option<usize>,
    /// Number of time points (`--k` for simulate).
    #[arg(long, visible_alias = "k")]
    pub total_followup: Option<usize>,
    #[arg(long)]
    pub ntimes_interval: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long)]
    pub rep: Option<usize>,
    /// stabilized or unstabilized.
    #[arg(long)]
    pub numerator: Option<String>,
    #[arg(long)]
    pub include_censor: bool,
    /// binomial, gaussian, poisson or survival (msm-ipw); poisson or binomial (hrmsm).
    #[arg(long)]
    pub family: Option<String>,
    /// One-based reference trajectory group.
    #[arg(long = "ref")]
    pub reference: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Clip weights at this lower quantile and its complement.
    #[arg(long)]
    pub truncate: Option<f64>,
    /// markov or full.
    #[arg(long)]
    pub history: Option<String>,
    /// Single intercept instead of one per interval (hrmsm).
    #[arg(long)]
    pub pooled_intercept: bool,
    /// Individuals to simulate.
    #[arg(long)]
    pub n: Option<usize>,
    /// Simulated layout: wide or long.
    #[arg(long)]
    pub format: Option<String>,
    /// Simulate an outcome at every time.
    #[arg(long)]
    pub timedep_outcome: bool,
    /// Simulate an event-time column.
    #[arg(long)]
    pub survival: bool,
    /// Worker threads (fallback: TRAJCAUSAL_THREADS).
    #[arg(long)]
    pub threads: Option<usize>,
}

fn default_out() -> String {
    "trajcausal-out".into()
}

fn default_degree() -> String {
    "linear".into()
}

/// Fully resolved options; `config.json` in every artifact directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema: String,
    pub command: String,
    pub input: Option<String>,
    pub roles: Option<String>,
    pub layout: Option<Layout>,
    pub model: Option<String>,
    pub out: String,
    pub number_traj: usize,
    pub degree_traj: String,
    pub n_starts: usize,
    pub total_followup: Option<usize>,
    pub ntimes_interval: Option<usize>,
    pub rep: usize,
    pub numerator: Numerator,
    pub include_censor: bool,
    pub family: Option<String>,
    #[serde(rename = "ref")]
    pub reference: Option<usize>,
    pub seed: u64,
    pub truncate: Option<f64>,
    pub history: History,
    pub pooled_intercept: bool,
    pub n: usize,
    pub format: Layout,
    pub timedep_outcome: bool,
    pub survival: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: SCHEMA.into(),
            command: String::new(),
            input: None,
            roles: None,
            layout: None,
            model: None,
            out: default_out(),
            number_traj: 2,
            degree_traj: default_degree(),
            n_starts: 20,
            total_followup: None,
            ntimes_interval: None,
            rep: 50,
            numerator: Numerator::Stabilized,
            include_censor: false,
            family: None,
            reference: None,
            seed: 1,
            truncate: None,
            history: History::Markov,
            pooled_intercept: false,
            n: 1000,
            format: Layout::Wide,
            timedep_outcome: false,
            survival: false,
        }
    }
}

fn parse_history(s: &str) -> Result<History> {
    match s {
        "markov" => Ok(History::Markov),
        "full" => Ok(History::Full),
        other => Err(Error::Config(format!("history '{other}' must be markov or full"))),
    }
}

impl RunConfig {
    /// Merge flags over an optional config file over the defaults.
    pub fn resolve(command: &str, o: &Options) -> Result<RunConfig> {
        let mut c = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let c: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
                if !c.command.is_empty() && c.command != command {
                    return Err(Error::Config(format!("command: config file is for '{}', not '{command}'", c.command)));
                }
                if c.schema != SCHEMA {
                    return Err(Error::Config(format!("schema: '{}' is not '{SCHEMA}'", c.schema)));
                }
                c
            }
            None => RunConfig::default(),
        };
        c.command = command.into();
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &o.$field {
                    c.$field = v.clone();
                }
            };
            ($field:ident, opt) => {
                if let Some(v) = &o.$field {
                    c.$field = Some(v.clone());
                }
            };
        }
        set!(input, opt);
        set!(roles, opt);
        set!(model, opt);
        set!(out);
        set!(number_traj);
        set!(degree_traj);
        set!(n_starts);
        set!(total_followup, opt);
        set!(ntimes_interval, opt);
        set!(rep);
        set!(family, opt);
        set!(reference, opt);
        set!(seed);
        set!(truncate, opt);
        set!(n);
        if let Some(v) = &o.layout {
            c.layout = Some(v.parse()?);
        }
        if let Some(v) = &o.numerator {
            c.numerator = v.parse()?;
        }
        if let Some(v) = &o.history {
            c.history = parse_history(v)?;
        }
        if let Some(v) = &o.format {
            c.format = v.parse()?;
        }
        c.include_censor |= o.include_censor;
        c.pooled_intercept |= o.pooled_intercept;
        c.timedep_outcome |= o.timedep_outcome;
        c.survival |= o.survival;
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        parse_degree(&self.degree_traj)?;
        if self.number_traj == 0 {
            return Err(Error::Config("number_traj must be at least 1".into()));
        }
        if self.reference == Some(0) {
            return Err(Error::Config("ref is one-based and must be at least 1".into()));
        }
        if let Some(q) = self.truncate {
            if !(0.0..0.5).contains(&q) {
                return Err(Error::Config(format!("truncate {q} must lie in [0, 0.5)")));
            }
        }
        if self.rep == 0 && matches!(self.command.as_str(), "msm-gform" | "hrmsm-gform") {
            return Err(Error::Config("rep must be at least 1".into()));
        }
        Ok(())
    }

    fn lcga(&self) -> Result<LcgaConfig> {
        let mut cfg = LcgaConfig::new(self.number_traj, parse_degree(&self.degree_traj)?, self.seed);
        cfg.n_starts = self.n_starts;
        Ok(cfg)
    }

    fn weights(&self) -> WeightConfig {
        WeightConfig {
            numerator: self.numerator,
            include_censor: self.include_censor,
            truncate: self.truncate,
            history: self.history,
            per_time: false,
        }
    }

    /// Zero-based reference, checked against the number of groups.
    fn reference0(&self, groups: usize) -> Result<Option<usize>> {
        match self.reference {
            Some(r) if r > groups => Err(Error::Config(format!("ref {r} exceeds the {groups} trajectory groups"))),
            Some(r) => Ok(Some(r - 1)),
            None => Ok(None),
        }
    }
}

/// Process exit status for an error: 2 configuration, 3 data, 4 convergence.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Identifiability { .. } | Error::Interval(_) | Error::OracleSize(_) => 2,
        Error::Convergence { .. } | Error::SingularInformation(_) | Error::Fluctuation { .. } | Error::Bootstrap(_) => 4,
        Error::MissingCell { .. }
        | Error::Schema(_)
        | Error::Shape(_)
        | Error::EmptyGroup { .. }
        | Error::DegenerateDesign(_)
        | Error::MismatchedId(_)
        | Error::Io { .. }
        | Error::Csv(_)
        | Error::Json(_) => 3,
    }
}

/// Parse `argv` (program name first), run, and return the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            println!("wrote {}", out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV} '{v}' is not a thread count")))?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    Ok(n)
}

/// Run one subcommand and return the artifact directory.
pub fn execute(command: &Command) -> Result<PathBuf> {
    let (name, opts) = command.parts();
    let cfg = RunConfig::resolve(name, opts)?;
    let work = || dispatch(&cfg);
    let artifacts = match thread_count(opts.threads)? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("threads: {e}")))?
            .install(work)?,
        None => work()?,
    };
    artifacts.write(&cfg)
}

/// Files produced by a run, in write order.
struct Artifacts {
    input_sha256: String,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(input_sha256: String) -> Self {
        Artifacts { input_sha256, files: Vec::new() }
    }

    fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(name, text);
        Ok(())
    }

    fn write(mut self, cfg: &RunConfig) -> Result<PathBuf> {
        let dir = PathBuf::from(&cfg.out);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        self.add_json("config.json", cfg)?;
        let files: serde_json::Map<String, serde_json::Value> =
            self.files.iter().map(|(n, b)| (n.clone(), sha256_hex(b).into())).collect();
        let manifest = serde_json::json!({
            "schema": SCHEMA,
            "version": env!("CARGO_PKG_VERSION"),
            "command": cfg.command,
            "input_sha256": self.input_sha256,
            "artifacts": files,
        });
        self.add_json("manifest.json", &manifest)?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(dir)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Input data plus the checksum of the raw bytes.
struct Input {
    data: PanelData,
    sha256: String,
}

fn load_roles(cfg: &RunConfig, header: &[String]) -> Result<Roles> {
    match &cfg.roles {
        Some(r) if Path::new(r).is_file() => {
            let text = std::fs::read_to_string(r).map_err(|e| Error::io(r, e))?;
            Roles::parse(&text)
        }
        Some(r) if r.contains('=') || r.trim_start().starts_with('{') => Roles::parse(&r.replace(';', "\n")),
        Some(r) => Err(Error::Config(format!("roles: '{r}' is neither a file nor key=value pairs"))),
        None => {
            // the simulated schema, with optional columns when present
            let has = |stem: &str| header.iter().any(|h| h == stem || h.strip_prefix(stem).is_some_and(|rest| rest.parse::<i64>().is_ok()));
            let spec = DgpSpec { include_censor: has("censor"), survival: has("event_time"), ..DgpSpec::default() };
            Ok(spec.roles())
        }
    }
}

fn load_input(cfg: &RunConfig) -> Result<Input> {
    let path = cfg.input.as_ref().ok_or_else(|| Error::Config("input: an input CSV is required".into()))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header: Vec<String> = {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
        rdr.headers()?.iter().map(String::from).collect()
    };
    let roles = load_roles(cfg, &header)?;
    let layout = cfg.layout.unwrap_or(if header.contains(&roles.time) { Layout::Long } else { Layout::Wide });
    let data = PanelData::read_csv(bytes.as_slice(), roles, layout)?;
    if let Some(k) = cfg.total_followup {
        if data.n_times() != k {
            return Err(Error::Config(format!("total_followup {k} but the data have {} time points", data.n_times())));
        }
    }
    Ok(Input { data, sha256: sha256_hex(&bytes) })
}

/// Trajectory model from `--model` or fitted to the cohort.
fn trajectory_model(cfg: &RunConfig, cohort: &Cohort) -> Result<LcgaModel> {
    match &cfg.model {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let model: LcgaModel = serde_json::from_str(&text).map_err(|e| Error::Config(format!("model {path}: {e}")))?;
            if model.k != cohort.k() {
                return Err(Error::Shape(format!("model has {} time points, data have {}", model.k, cohort.k())));
            }
            Ok(model)
        }
        None => fit_lcga(cohort, &cfg.lcga()?),
    }
}

fn dispatch(cfg: &RunConfig) -> Result<Artifacts> {
    match cfg.command.as_str() {
        "simulate" => simulate(cfg),
        "build-traj" => build_traj(cfg),
        "plot-traj" => plot_traj(cfg),
        "split" => split(cfg),
        "msm-ipw" | "msm-gform" | "msm-pltmle" => msm(cfg),
        "hrmsm-ipw" | "hrmsm-gform" | "hrmsm-pltmle" => hrmsm(cfg),
        other => Err(Error::Config(format!("command: unknown subcommand '{other}'"))),
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn simulate(cfg: &RunConfig) -> Result<Artifacts> {
    let spec = DgpSpec {
        n: cfg.n,
        k: cfg.total_followup.unwrap_or(3),
        layout: cfg.format,
        seed: cfg.seed,
        include_censor: cfg.include_censor,
        timedep_outcome: cfg.timedep_outcome,
        survival: cfg.survival,
        ..DgpSpec::default()
    };
    spec.validate()?;
    let data = gendata(&spec)?;
    let spec_json = serde_json::to_vec(&spec)?;
    let mut a = Artifacts::new(sha256_hex(&spec_json));
    a.add("data.csv", csv_bytes(|b| data.write_csv(b))?);
    a.add_json("roles.json", &spec.roles())?;
    a.add_json("spec.json", &spec)?;
    Ok(a)
}

fn build_traj(cfg: &RunConfig) -> Result<Artifacts> {
    let input = load_input(cfg)?;
    let cohort = input.data.cohort()?;
    let model = fit_lcga(&cohort, &cfg.lcga()?)?;
    let mut a = Artifacts::new(input.sha256);
    a.add_json("model.json", &model)?;
    a.add(
        "assignments.csv",
        csv_bytes(|b| {
            let mut w = csv::Writer::from_writer(b);
            let mut head = vec!["id".to_string(), "group".to_string()];
            head.extend((1..=model.groups).map(|j| format!("post{j}")));
            w.write_record(&head)?;
            for (i, id) in cohort.ids.iter().enumerate() {
                let mut rec = vec![id.clone(), (model.assignments[i] + 1).to_string()];
                rec.extend(model.posterior[i].iter().map(|p| p.to_string()));
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io("assignments.csv", e))
        })?,
    );
    let mut t = String::new();
    let _ = writeln!(t, "{:<6} {:>10} {:>8} {:>12}", "group", "pi", "count", "mean.prob");
    for j in 0..model.groups {
        let _ = writeln!(t, "{:<6} {:>10.4} {:>8} {:>12.4}", j + 1, model.pi[j], model.class_counts[j], model.mean_probability(j));
    }
    let _ = writeln!(t, "loglik {:.4}  BIC {:.4}  iterations {}  converged {}", model.loglik, model.bic, model.iterations, model.converged);
    a.add("table.txt", t);
    Ok(a)
}

/// Mean observed treatment per (time, group) over present person-times.
pub fn group_time_means(cohort: &Cohort, classes: &[Option<usize>], groups: usize) -> Vec<(i64, usize, f64)> {
    let mut out = Vec::new();
    for t in 0..cohort.k() {
        for j in 0..groups {
            let (mut s, mut c) = (0.0, 0usize);
            for i in 0..cohort.n() {
                if classes[i] == Some(j) && cohort.present(i, t) {
                    s += cohort.a(i, t);
                    c += 1;
                }
            }
            out.push((cohort.time_labels[t], j + 1, if c > 0 { s / c as f64 } else { f64::NAN }));
        }
    }
    out
}

/// Standalone line chart of group means over time.
pub fn trajectory_svg(rows: &[(i64, usize, f64)], groups: usize) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];
    let times: Vec<i64> = {
        let mut t: Vec<i64> = rows.iter().map(|r| r.0).collect();
        t.dedup();
        t
    };
    let x = |idx: usize| M + if times.len() > 1 { idx as f64 * (W - 2.0 * M) / (times.len() - 1) as f64 } else { (W - 2.0 * M) / 2.0 };
    let y = |v: f64| H - M - v * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<line x1="{M}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#, H - M, W - M, H - M);
    let _ = writeln!(s, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{:.1}" stroke="black"/>"#, H - M);
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{tick:.2}</text>"#, M - 6.0, y(tick) + 4.0);
    }
    for (idx, t) in times.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{t}</text>"#, x(idx), H - M + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">time</text>"#, W / 2.0, H - 10.0);
    let _ = writeln!(s, r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">mean treatment</text>"#, H / 2.0, H / 2.0);
    for g in 1..=groups {
        let color = COLORS[(g - 1) % COLORS.len()];
        let pts: Vec<String> = rows
            .iter()
            .filter(|r| r.1 == g && r.2.is_finite())
            .map(|r| {
                let idx = times.iter().position(|t| *t == r.0).unwrap_or(0);
                format!("{:.2},{:.2}", x(idx), y(r.2))
            })
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">group {g}</text>"#, W - M + 4.0, M + 16.0 * g as f64);
    }
    s.push_str("</svg>\n");
    s
}

fn plot_traj(cfg: &RunConfig) -> Result<Artifacts> {
    let input = load_input(cfg)?;
    let cohort = input.data.cohort()?;
    let model = trajectory_model(cfg, &cohort)?;
    let classes: Vec<Option<usize>> = (0..cohort.n()).map(|i| model.classify_history(cohort.treatment.row(i))).collect();
    let rows = group_time_means(&cohort, &classes, model.groups);
    let mut a = Artifacts::new(input.sha256);
    a.add(
        "trajectories.csv",
        csv_bytes(|b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["time", "group", "mean"])?;
            for (t, g, m) in &rows {
                w.write_record([t.to_string(), g.to_string(), m.to_string()])?;
            }
            w.flush().map_err(|e| Error::io("trajectories.csv", e))
        })?,
    );
    a.add("trajectories.svg", trajectory_svg(&rows, model.groups));
    Ok(a)
}

fn split(cfg: &RunConfig) -> Result<Artifacts> {
    let input = load_input(cfg)?;
    let s = cfg.ntimes_interval.ok_or_else(|| Error::Config("ntimes_interval is required".into()))?;
    let set = split_data(&input.data, s)?;
    let mut a = Artifacts::new(input.sha256);
    a.add("split.csv", csv_bytes(|b| set.pooled()?.write_csv(b))?);
    let mut t = String::new();
    let _ = writeln!(t, "{:<9} {:>6} {:>6} {:>12}", "interval", "start", "end", "individuals");
    let labels = &set.source().time_labels;
    for d in 0..set.n_intervals() {
        let _ = writeln!(t, "{:<9} {:>6} {:>6} {:>12}", d + 1, labels[d], labels[d + s - 1], set.members(d).len());
    }
    a.add("table.txt", t);
    Ok(a)
}

fn report_artifacts(a: &mut Artifacts, report: &Report) -> Result<()> {
    a.add_json("report.json", &serde_json::json!({ "schema": SCHEMA, "report": report }))?;
    a.add("table.txt", report.table());
    a.add("coefficients.csv", csv_bytes(|b| report.write_csv(b))?);
    Ok(())
}

fn msm(cfg: &RunConfig) -> Result<Artifacts> {
    let input = load_input(cfg)?;
    let cohort = input.data.cohort()?;
    let model = trajectory_model(cfg, &cohort)?;
    let reference = cfg.reference0(model.groups)?.unwrap_or(0);
    let fit: MsmFit = match cfg.command.as_str() {
        "msm-ipw" => {
            let family: OutcomeFamily = cfg.family.as_deref().unwrap_or("binomial").parse()?;
            trajmsm_ipw(&cohort, &model, &IpwConfig { family, weights: cfg.weights(), reference })?.0
        }
        "msm-gform" => {
            let g = GformConfig { rep: cfg.rep, history: cfg.history, ..GformConfig::new(reference, cfg.seed) };
            trajmsm_gform(&cohort, &model, &g)?
        }
        _ => {
            let p = PltmleConfig { reference, history: cfg.history, include_censor: cfg.include_censor };
            trajmsm_pltmle(&cohort, &model, &p)?
        }
    };
    let mut a = Artifacts::new(input.sha256);
    report_artifacts(&mut a, &Report::from_fit(&fit))?;
    if let Some(cf) = &fit.counterfactual {
        a.add("counterfactual.csv", csv_bytes(|b| cf.write_csv(b))?);
    }
    Ok(a)
}

fn hrmsm(cfg: &RunConfig) -> Result<Artifacts> {
    if cfg.model.is_some() {
        return Err(Error::Config("model: hrmsm fits its own trajectory model on the pooled intervals".into()));
    }
    let input = load_input(cfg)?;
    let s = cfg.ntimes_interval.ok_or_else(|| Error::Config("ntimes_interval is required".into()))?;
    let family: HrmsmFamily = cfg.family.as_deref().unwrap_or("poisson").parse()?;
    let h = HrmsmConfig {
        family,
        interval_effects: !cfg.pooled_intercept,
        reference: cfg.reference0(cfg.number_traj)?,
        weights: cfg.weights(),
        history: cfg.history,
        include_censor: cfg.include_censor,
        rep: cfg.rep,
        seed: cfg.seed,
        ..HrmsmConfig::new(s, cfg.lcga()?)
    };
    let fit: HrmsmFit = match cfg.command.as_str() {
        "hrmsm-ipw" => trajhrmsm_ipw(&input.data, &h)?,
        "hrmsm-gform" => trajhrmsm_gform(&input.data, &h)?,
        _ => trajhrmsm_pltmle(&input.data, &h)?,
    };
    let mut a = Artifacts::new(input.sha256);
    report_artifacts(&mut a, &fit.report())?;
    a.add("treatment_means.csv", csv_bytes(|b| fit.write_treatment_means(b))?);
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(args: &[&str]) -> Vec<String> {
        std::iter::once("trajcausal").chain(args.iter().copied()).map(String::from).collect()
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Schema("x".into())), 3);
        assert_eq!(exit_code(&Error::convergence("x", 1, &[])), 4);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"number_traj": 2, "bogus": 1}"#).unwrap();
        let opts = Options { config: Some(path), ..Options::default() };
        let err = RunConfig::resolve("build-traj", &opts).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"number_traj": 3, "rep": 7}"#).unwrap();
        let opts = Options { config: Some(path), rep: Some(9), ..Options::default() };
        let c = RunConfig::resolve("msm-gform", &opts).unwrap();
        assert_eq!((c.number_traj, c.rep), (3, 9));
    }

    #[test]
    fn invalid_flags_exit_with_config_code() {
        assert_eq!(run(argv(&["bogus-command"])), 2);
        assert_eq!(run(argv(&["msm-ipw", "--numerator", "half"])), 2);
        assert_eq!(run(argv(&["msm-ipw", "--ref", "0"])), 2);
        assert_eq!(run(argv(&["msm-ipw", "--degree-traj", "quartic"])), 2);
    }

    #[test]
    fn missing_input_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let missing = dir.path().join("none.csv");
        let code = run(argv(&["build-traj", "--input", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]));
        assert_eq!(code, 3);
    }

    #[test]
    fn group_time_means_match_hand_count() {
        let csv = "id,a1,a2\n1,1,0\n2,1,1\n3,0,0\n4,0,1\n";
        let roles = Roles { treatment: "a".into(), ..Roles::default() };
        let c = PanelData::read_csv(csv.as_bytes(), roles, Layout::Wide).unwrap().cohort().unwrap();
        let rows = group_time_means(&c, &[Some(0), Some(0), Some(1), None], 2);
        assert_eq!(rows, vec![(1, 1, 1.0), (1, 2, 0.0), (2, 1, 0.5), (2, 2, 0.0)]);
    }
}
