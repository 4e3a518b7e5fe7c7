//! Command-line entry point.
//!
//! Every option can also come from a flat `key = value` file given with
//! `--config`; keys are the long flag names. Flags given on the command line
//! win over the file, which wins over built-in defaults. The resolved
//! settings are written to `config.txt` in the output directory and can be
//! fed back through `--config` to repeat a run.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::backtest::{
    build_snapshots_with, churn_table, feature_store, run_on_snapshots, BacktestConfig, BacktestReport,
    PeriodDates,
};
use crate::correlate::TauVariant;
use crate::error::{Error, ErrorClass, Result};
use crate::multiplex::{write_features_csv, DuplexSnapshot};
use crate::netbuild::{EdgeBudget, Layer, LayerGraph};
use crate::output::{write_atomic, write_string};
use crate::panel::{
    load_opinion_panel_with_stats, load_price_panel, parse_date, read_tickers, PanelSeries, Window,
    WindowPolicy, WindowSpec,
};
use crate::synth::{
    generate_graph_dynamics, generate_timeseries_raw, synthetic_tickers, write_tickers, SocialMode,
    SynthMode, SynthSpec,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const CONFIG_FILE: &str = "config.txt";
const WINDOWS_FILE: &str = "windows.csv";
const TICKERS_FILE: &str = "tickers.txt";

fn opt(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name(value_name(name)).help(help)
}

fn value_name(name: &str) -> &'static str {
    match name {
        "prices" | "opinions" | "tickers" => "PATH",
        "out" | "graphs" | "dump-corr" | "dump-graphs" | "dump-features" | "dump-models" | "panels" => "DIR",
        "train-start" | "train-end" | "test-end" => "DATE",
        _ => "VALUE",
    }
}

fn with_defaults(arg: Arg, default: Option<&'static str>) -> Arg {
    match default {
        Some(d) => arg.default_value(d),
        None => arg,
    }
}

fn common(cmd: Command) -> Command {
    cmd.arg(opt("config", "Read settings from a key = value file"))
        .arg(opt("out", "Output directory").required(false))
        .arg(opt("threads", "Worker threads (default: all cores)"))
        .arg(
            Arg::new("quiet")
                .long("quiet")
                .short('q')
                .action(ArgAction::SetTrue)
                .help("Log errors only"),
        )
        .arg(
            Arg::new("verbose")
                .long("verbose")
                .short('v')
                .action(ArgAction::SetTrue)
                .help("Log debugging detail"),
        )
}

fn inputs(cmd: Command, with_graphs: bool) -> Command {
    let cmd = cmd
        .arg(opt("prices", "Price CSV (date,ticker,close)"))
        .arg(opt("opinions", "Opinion CSV (date,ticker,bullish_count)"))
        .arg(opt("tickers", "Ticker universe, one per line"));
    if with_graphs {
        cmd.arg(opt("graphs", "Read graphs written by `graphs` or `synth --mode graphs` instead of panels"))
    } else {
        cmd
    }
}

fn network(cmd: Command) -> Command {
    cmd.arg(with_defaults(opt("window", "Window width in trading days"), Some("126")))
        .arg(with_defaults(opt("step", "Window step in trading days"), Some("5")))
        .arg(with_defaults(opt("window-policy", "Network windows: rolling|expanding"), Some("rolling")))
        .arg(with_defaults(opt("tau", "Kendall variant: a|b"), Some("b")))
        .arg(with_defaults(opt("edge-budget", "Edges per layer: quartile|count:K"), Some("quartile")))
        .arg(opt("dump-corr", "Write correlation matrices (relative to --out)"))
}

/// The command tree.
pub fn command() -> Command {
    let ingest = common(inputs(Command::new("ingest").about("Load and align price and opinion panels"), false));
    let graphs = common(network(inputs(
        Command::new("graphs").about("Build financial and social graphs for every window"),
        false,
    )));
    let features = common(network(inputs(
        Command::new("features").about("Compute pair features for every window"),
        true,
    )));
    let backtest = common(network(inputs(
        Command::new("backtest").about("Run the walk-forward link-prediction experiment"),
        true,
    )))
    .arg(with_defaults(opt("target", "Predicted layer: financial|social"), Some("financial")))
    .arg(with_defaults(opt("lags", "Lags in weeks, e.g. 1..20 or 1,5,10"), Some("1..20")))
    .arg(with_defaults(opt("policy", "Training span: rolling|expanding"), Some("rolling")))
    .arg(with_defaults(opt("train-windows", "Source windows per rolling training span"), Some("25")))
    .arg(opt("train-start", "First date whose window may enter training"))
    .arg(opt("train-end", "Last training date = first prediction time"))
    .arg(opt("test-end", "Last date whose graph may serve as a label"))
    .arg(with_defaults(opt("test-stride", "Evaluate every k-th prediction time"), Some("1")))
    .arg(with_defaults(
        opt("split-models", "Fit separate models for new edges and deletions: true|false"),
        Some("true"),
    ))
    .arg(opt("dump-graphs", "Write edge lists (relative to --out)"))
    .arg(opt("dump-features", "Write pair features (relative to --out)"))
    .arg(opt("dump-models", "Write fitted models as JSON (relative to --out)"));
    let churn = common(network(inputs(
        Command::new("churn").about("Edge churn and Jaccard similarity of both layers"),
        true,
    )))
    .arg(with_defaults(opt("max-h", "Largest lag in weeks"), Some("20")));
    let synth = common(
        Command::new("synth")
            .about("Generate a synthetic dataset")
            .arg(with_defaults(opt("mode", "graphs|timeseries"), Some("graphs")))
            .arg(with_defaults(opt("n", "Number of assets"), Some("100")))
            .arg(with_defaults(opt("windows", "Number of windows"), Some("250")))
            .arg(with_defaults(opt("seed", "Random seed"), Some("1")))
            .arg(with_defaults(opt("edge-budget", "Edges per layer: quartile|count:K"), Some("quartile")))
            .arg(with_defaults(opt("persistence", "Edge survival probability per step"), Some("0.9")))
            .arg(with_defaults(opt("closure-strength", "Logit boost per unit triadic closure"), Some("4")))
            .arg(with_defaults(opt("base-logit", "Baseline logit of edge formation"), Some("-2")).allow_negative_numbers(true))
            .arg(with_defaults(opt("social-lead", "Steps by which the social layer leads"), Some("0")))
            .arg(with_defaults(opt("social-noise", "Share of rewired social edges"), Some("0.3")))
            .arg(with_defaults(opt("social-mode", "lead|independent"), Some("lead")))
            .arg(with_defaults(opt("burn-in", "Discarded initial steps"), Some("50")))
            .arg(with_defaults(opt("window", "Window width in trading days"), Some("126")))
            .arg(with_defaults(opt("step", "Window step in trading days"), Some("5")))
            .arg(with_defaults(opt("blocks", "Latent blocks (timeseries)"), Some("5")))
            .arg(with_defaults(opt("switch-prob", "Block switch probability per step"), Some("0.05")))
            .arg(with_defaults(opt("return-noise", "Idiosyncratic return noise"), Some("1")))
            .arg(with_defaults(opt("opinion-noise", "Idiosyncratic opinion noise"), Some("1"))),
    );
    Command::new("duplexnet")
        .version(VERSION)
        .about("Duplex correlation-network link prediction")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommands([ingest, graphs, features, backtest, churn, synth])
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

fn usage(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

/// Parse a flat `key = value` file. `#` starts a comment line.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", k + 1)))?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn resolve(command: &str, m: &ArgMatches) -> Result<RunConfig> {
    let def = self::command();
    let ids: Vec<String> = def
        .find_subcommand(command)
        .ok_or_else(|| usage(format!("unknown command {command}")))?
        .get_arguments()
        .map(|a| a.get_id().as_str().to_string())
        .filter(|id| id != "help" && id != "version")
        .collect();
    let file = match m.get_one::<String>("config") {
        Some(p) => {
            let path = Path::new(p);
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    for key in file.keys() {
        if key == "config" || !ids.contains(key) {
            return Err(usage(format!("unknown config key {key:?} for {command}")));
        }
    }
    let mut values = BTreeMap::new();
    for id in &ids {
        if id == "config" {
            continue;
        }
        let cli = m.value_source(id) == Some(ValueSource::CommandLine);
        let raw = m
            .get_raw(id)
            .and_then(|mut v| v.next())
            .map(|v| v.to_string_lossy().into_owned());
        let value = if cli {
            raw
        } else {
            file.get(id).cloned().or(raw)
        };
        if let Some(v) = value {
            values.insert(id.clone(), v);
        }
    }
    let cfg = RunConfig {
        command: command.to_string(),
        values,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parse arguments (program name first) into a validated configuration.
pub fn parse_and_validate<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command().try_get_matches_from(argv).map_err(|e| usage(e.to_string()))?;
    let (name, sub) = matches.subcommand().ok_or_else(|| usage("missing subcommand"))?;
    resolve(name, sub)
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>().map_err(|e| usage(format!("--{key} {raw:?}: {e}")))
}

/// Parse `1..20`, `1..=20`, `1,5,10` or mixtures such as `1..3,10`.
pub fn parse_lags(raw: &str) -> std::result::Result<Vec<usize>, String> {
    let mut lags = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let a: usize = a.trim().parse().map_err(|e| format!("{part:?}: {e}"))?;
            let b: usize = b.trim().parse().map_err(|e| format!("{part:?}: {e}"))?;
            if a > b {
                return Err(format!("empty range {part:?}"));
            }
            lags.extend(a..=b);
        } else {
            lags.push(part.parse().map_err(|e| format!("{part:?}: {e}"))?);
        }
    }
    if lags.is_empty() {
        return Err("no lags".into());
    }
    Ok(lags)
}

fn parse_bool(raw: &str) -> std::result::Result<bool, String> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {raw:?}")),
    }
}

impl RunConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|raw| parse_value(key, raw)).transpose()
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?.ok_or_else(|| usage(format!("--{key} is required")))
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        self.get(key)
            .map(PathBuf::from)
            .ok_or_else(|| usage(format!("--{key} is required")))
    }

    fn date(&self, key: &str) -> Result<Option<NaiveDate>> {
        self.get(key)
            .map(|raw| parse_date(raw).map_err(|e| usage(format!("--{key}: {e}"))))
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool> {
        self.get(key)
            .map(|raw| parse_bool(raw).map_err(|e| usage(format!("--{key}: {e}"))))
            .transpose()
            .map(|b| b.unwrap_or(false))
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        self.path("out")
    }

    /// A dump directory, resolved below `--out`.
    pub fn dump_dir(&self, key: &str) -> Result<Option<PathBuf>> {
        let Some(raw) = self.get(key) else { return Ok(None) };
        let rel = Path::new(raw);
        if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(usage(format!("--{key} must be a relative path inside --out")));
        }
        Ok(Some(self.out_dir()?.join(rel)))
    }

    pub fn threads(&self) -> Result<Option<usize>> {
        let t: Option<usize> = self.parsed("threads")?;
        if t == Some(0) {
            return Err(usage("--threads must be positive"));
        }
        Ok(t)
    }

    pub fn window_spec(&self) -> Result<WindowSpec> {
        let policy = self.parsed("window-policy")?.unwrap_or(WindowPolicy::Rolling);
        WindowSpec::new(self.required("window")?, self.required("step")?, policy)
            .map_err(|e| usage(format!("--window/--step: {e}")))
    }

    pub fn backtest_config(&self) -> Result<BacktestConfig> {
        let lags = self
            .get("lags")
            .map(|raw| parse_lags(raw).map_err(|e| usage(format!("--lags: {e}"))))
            .transpose()?;
        let cfg = BacktestConfig {
            target: self.parsed::<Layer>("target")?.unwrap_or(Layer::Financial),
            lags: lags.unwrap_or_else(|| (1..=20).collect()),
            train_policy: self.parsed("policy")?.unwrap_or(WindowPolicy::Rolling),
            train_windows: self.parsed("train-windows")?.unwrap_or(25),
            dates: PeriodDates {
                train_start: self.date("train-start")?,
                train_end: self.date("train-end")?,
                test_end: self.date("test-end")?,
            },
            sweep: None,
            window: self.window_spec()?,
            edge_budget: self.parsed("edge-budget")?.unwrap_or_default(),
            tau: self.parsed::<TauVariant>("tau")?.unwrap_or_default(),
            test_stride: self.parsed("test-stride")?.unwrap_or(1),
            split_models: match self.get("split-models") {
                Some(raw) => parse_bool(raw).map_err(|e| usage(format!("--split-models: {e}")))?,
                None => true,
            },
        };
        cfg.validate().map_err(|e| match e {
            Error::Config(m) => usage(m),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let mode = match self.get("mode").unwrap_or("graphs") {
            "graphs" => SynthMode::GraphDynamics,
            "timeseries" => SynthMode::TimeSeries,
            other => return Err(usage(format!("--mode: expected graphs or timeseries, got {other:?}"))),
        };
        let social_mode = match self.get("social-mode").unwrap_or("lead") {
            "lead" => SocialMode::Lead,
            "independent" => SocialMode::Independent,
            other => return Err(usage(format!("--social-mode: expected lead or independent, got {other:?}"))),
        };
        Ok(SynthSpec {
            n: self.required("n")?,
            n_windows: self.required("windows")?,
            edge_budget: self.parsed("edge-budget")?.unwrap_or_default(),
            persistence: self.required("persistence")?,
            closure_strength: self.required("closure-strength")?,
            base_logit: self.required("base-logit")?,
            social_lead: self.required("social-lead")?,
            social_noise: self.required("social-noise")?,
            social_mode,
            seed: self.required("seed")?,
            mode,
            burn_in: self.required("burn-in")?,
            window: WindowSpec::new(self.required("window")?, self.required("step")?, WindowPolicy::Rolling)
                .map_err(|e| usage(format!("--window/--step: {e}")))?,
            n_blocks: self.required("blocks")?,
            switch_prob: self.required("switch-prob")?,
            return_noise: self.required("return-noise")?,
            opinion_noise: self.required("opinion-noise")?,
        })
    }

    /// Check every setting the command will read.
    pub fn validate(&self) -> Result<()> {
        self.out_dir()?;
        self.threads()?;
        self.flag("quiet")?;
        self.flag("verbose")?;
        match self.command.as_str() {
            "synth" => {
                self.synth_spec()?;
            }
            "ingest" => self.check_inputs(false)?,
            cmd => {
                self.window_spec()?;
                self.parsed::<TauVariant>("tau")?;
                self.parsed::<EdgeBudget>("edge-budget")?;
                self.check_inputs(cmd != "graphs")?;
                for key in ["dump-corr", "dump-graphs", "dump-features", "dump-models"] {
                    self.dump_dir(key)?;
                }
                if cmd == "backtest" {
                    self.backtest_config()?;
                }
                if cmd == "churn" {
                    self.required::<usize>("max-h")?;
                }
            }
        }
        Ok(())
    }

    fn check_inputs(&self, graphs_allowed: bool) -> Result<()> {
        if graphs_allowed && self.get("graphs").is_some() {
            return Ok(());
        }
        for key in ["prices", "opinions", "tickers"] {
            self.path(key)?;
        }
        Ok(())
    }

    /// `key = value` lines preceded by the tool version.
    pub fn to_file(&self) -> String {
        let mut s = format!("# duplexnet {VERSION}\n# command: {}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

fn init_logging(cfg: &RunConfig) {
    let level = if cfg.flag("quiet").unwrap_or(false) {
        log::LevelFilter::Error
    } else if cfg.flag("verbose").unwrap_or(false) {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
    log::set_max_level(level);
}

fn init_threads(cfg: &RunConfig) -> Result<()> {
    if let Some(n) = cfg.threads()? {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialised; --threads ignored");
        }
    }
    Ok(())
}

/// Run the binary. Returns the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let outcome = resolve(name, sub).and_then(|cfg| {
        init_logging(&cfg);
        init_threads(&cfg)?;
        execute(&cfg)
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            }
        }
    }
}

/// Execute a resolved configuration.
pub fn execute(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    match cfg.command.as_str() {
        "ingest" => ingest(cfg, &out)?,
        "graphs" => graphs(cfg, &out)?,
        "features" => features(cfg, &out)?,
        "backtest" => backtest(cfg, &out)?,
        "churn" => churn(cfg, &out)?,
        "synth" => synth(cfg, &out)?,
        other => return Err(usage(format!("unknown command {other}"))),
    }
    write_string(&out.join(CONFIG_FILE), &cfg.to_file())
}

/// Aligned return and opinion panels. Opinion days without messages count
/// as zero.
fn load_panels(cfg: &RunConfig) -> Result<(PanelSeries, PanelSeries)> {
    let tickers = read_tickers(&cfg.path("tickers")?)?;
    let returns = load_price_panel(&cfg.path("prices")?, &tickers)?;
    let (opinion, stats) = load_opinion_panel_with_stats(&cfg.path("opinions")?, &tickers)?;
    log::info!(
        "{} assets, {} return days, {} opinion rows ({} for unknown tickers)",
        tickers.len(),
        returns.len(),
        stats.rows,
        stats.unknown_ticker_rows
    );
    let opinion = opinion.reindex_zero_fill(returns.dates())?;
    Ok((returns, opinion))
}

fn ingest(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (returns, opinion) = load_panels(cfg)?;
    returns.write_csv(&out.join("returns.csv"))?;
    opinion.write_csv(&out.join("opinion.csv"))?;
    write_tickers(&out.join(TICKERS_FILE), returns.tickers())
}

/// Snapshots with tickers and, for panel input, the last date of each window.
struct Snapshots {
    tickers: Vec<String>,
    snapshots: Vec<DuplexSnapshot>,
    ends: Option<Vec<NaiveDate>>,
}

fn load_snapshots(cfg: &RunConfig) -> Result<Snapshots> {
    if let Some(dir) = cfg.get("graphs") {
        return read_graph_dir(Path::new(dir));
    }
    let (returns, opinion) = load_panels(cfg)?;
    let corr_dir = cfg.dump_dir("dump-corr")?;
    let dump = |layer: Layer, m: &crate::correlate::WindowedMatrix| -> Result<()> {
        match &corr_dir {
            Some(dir) => m.write_csv(&dir.join(layer.name()).join(format!(
                "corr_{}_{}.csv",
                m.window.start, m.window.end
            ))),
            None => Ok(()),
        }
    };
    let spec = cfg.window_spec()?;
    let snapshots = build_snapshots_with(
        &returns,
        &opinion,
        &spec,
        cfg.parsed("edge-budget")?.unwrap_or_default(),
        cfg.parsed("tau")?.unwrap_or_default(),
        &dump,
    )?;
    let ends = snapshots.iter().map(|s| returns.dates()[s.window().end - 1]).collect();
    log::info!("{} windows", snapshots.len());
    Ok(Snapshots {
        tickers: returns.tickers().to_vec(),
        snapshots,
        ends: Some(ends),
    })
}

fn graph_file(layer: Layer, w: Window) -> String {
    format!("graph_{}_{}_{}.edgelist", layer.name(), w.start, w.end)
}

/// Write edge lists of both layers, `windows.csv` and `tickers.txt`.
pub fn write_graph_dir(dir: &Path, tickers: &[String], snapshots: &[DuplexSnapshot], ends: Option<&[NaiveDate]>) -> Result<()> {
    for s in snapshots {
        for layer in [Layer::Financial, Layer::Social] {
            s.layer(layer).write_edgelist(&dir.join(graph_file(layer, s.window())), tickers)?;
        }
    }
    write_atomic(&dir.join(WINDOWS_FILE), |w| {
        writeln!(w, "index,start,end,end_date")?;
        for (k, s) in snapshots.iter().enumerate() {
            let date = ends.map(|e| e[k].to_string()).unwrap_or_default();
            writeln!(w, "{k},{},{},{date}", s.window().start, s.window().end)?;
        }
        Ok(())
    })?;
    write_tickers(&dir.join(TICKERS_FILE), tickers)
}

fn read_graph_dir(dir: &Path) -> Result<Snapshots> {
    let tickers = read_tickers(&dir.join(TICKERS_FILE))?;
    let path = dir.join(WINDOWS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut snapshots = Vec::new();
    let mut ends = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        let bad = |message: String| Error::Parse {
            path: path.clone(),
            line: k as u64 + 1,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {line:?}")));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
        if num(f[0])? != snapshots.len() {
            return Err(bad("window indices must be consecutive from 0".into()));
        }
        let w = Window {
            start: num(f[1])?,
            end: num(f[2])?,
        };
        if !f[3].is_empty() {
            ends.push(parse_date(f[3]).map_err(bad)?);
        }
        let read = |layer| LayerGraph::read_edgelist(&dir.join(graph_file(layer, w)), layer, w, &tickers);
        snapshots.push(DuplexSnapshot::new(read(Layer::Financial)?, read(Layer::Social)?)?);
    }
    let ends = (ends.len() == snapshots.len() && !ends.is_empty()).then_some(ends);
    Ok(Snapshots {
        tickers,
        snapshots,
        ends,
    })
}

fn graphs(cfg: &RunConfig, out: &Path) -> Result<()> {
    let s = load_snapshots(cfg)?;
    write_graph_dir(out, &s.tickers, &s.snapshots, s.ends.as_deref())
}

fn write_features(dir: &Path, s: &Snapshots) -> Result<()> {
    for (snap, rows) in s.snapshots.iter().zip(feature_store(&s.snapshots)) {
        let w = snap.window();
        write_features_csv(&dir.join(format!("features_{}_{}.csv", w.start, w.end)), &rows)?;
    }
    Ok(())
}

fn features(cfg: &RunConfig, out: &Path) -> Result<()> {
    write_features(out, &load_snapshots(cfg)?)
}

fn write_churn(report: &BacktestReport, out: &Path) -> Result<()> {
    report.write_churn_csv(&out.join("churn.csv"))?;
    report.write_jaccard_csv(&out.join("jaccard.csv"))
}

fn backtest(cfg: &RunConfig, out: &Path) -> Result<()> {
    let config = cfg.backtest_config()?;
    let s = load_snapshots(cfg)?;
    if let Some(dir) = cfg.dump_dir("dump-graphs")? {
        write_graph_dir(&dir, &s.tickers, &s.snapshots, s.ends.as_deref())?;
    }
    if let Some(dir) = cfg.dump_dir("dump-features")? {
        write_features(&dir, &s)?;
    }
    let report = run_on_snapshots(&config, &s.snapshots, s.ends.as_deref())?;
    if !report.failures.is_empty() {
        log::warn!("{} failed cells", report.failures.len());
    }
    report.write_report_csv(&out.join("report.csv"))?;
    report.write_report_json(&out.join("report.json"))?;
    write_churn(&report, out)?;
    if let Some(dir) = cfg.dump_dir("dump-models")? {
        for f in &report.fits {
            let name = format!(
                "model_{}_{}_h{}_t{}.json",
                f.split.name(),
                f.variant.name(),
                f.lag_h,
                f.prediction_window
            );
            let text = serde_json::to_string_pretty(&f.to_json())
                .map_err(|e| Error::Numeric(format!("serializing model: {e}")))?;
            write_string(&dir.join(name), &(text + "\n"))?;
        }
    }
    Ok(())
}

fn churn(cfg: &RunConfig, out: &Path) -> Result<()> {
    let s = load_snapshots(cfg)?;
    let report = BacktestReport {
        churn: churn_table(&s.snapshots, cfg.required("max-h")?)?,
        ..BacktestReport::default()
    };
    write_churn(&report, out)
}

fn synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let spec = cfg.synth_spec()?;
    match spec.mode {
        SynthMode::GraphDynamics => {
            let snaps = generate_graph_dynamics(&spec)?;
            write_graph_dir(out, &synthetic_tickers(spec.n), &snaps, None)
        }
        SynthMode::TimeSeries => generate_timeseries_raw(&spec)?.write(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        parse_and_validate(std::iter::once("duplexnet").chain(args.iter().copied()))
    }

    const INPUTS: [&str; 8] = ["--prices", "p.csv", "--opinions", "o.csv", "--tickers", "t.txt", "--out", "o"];

    #[test]
    fn window_flags() {
        let mut args = vec!["graphs", "--window", "126", "--step", "5"];
        args.extend(INPUTS);
        let cfg = parse(&args).unwrap();
        assert_eq!(
            cfg.window_spec().unwrap(),
            WindowSpec::new(126, 5, WindowPolicy::Rolling).unwrap()
        );
    }

    #[test]
    fn defaults() {
        let mut args = vec!["backtest"];
        args.extend(INPUTS);
        let cfg = parse(&args).unwrap().backtest_config().unwrap();
        assert_eq!(cfg.lags, (1..=20).collect::<Vec<_>>());
        assert_eq!(cfg.window, WindowSpec::default());
        assert_eq!(cfg.edge_budget, EdgeBudget::Quartile);
    }

    #[test]
    fn date_order_is_a_usage_error() {
        let mut args = vec!["backtest", "--train-end", "2014-09-10", "--test-end", "2014-01-01"];
        args.extend(INPUTS);
        let err = parse(&args).unwrap_err();
        assert_eq!(err.class(), ErrorClass::Usage);
    }

    #[test]
    fn bad_values_name_the_flag() {
        let mut args = vec!["backtest", "--train-end", "09/10/2014"];
        args.extend(INPUTS);
        assert!(parse(&args).unwrap_err().to_string().contains("--train-end"));
        let mut args = vec!["backtest", "--lags", "5..1"];
        args.extend(INPUTS);
        assert!(parse(&args).unwrap_err().to_string().contains("--lags"));
        assert!(parse(&["backtest", "--bogus", "1"]).is_err());
    }

    #[test]
    fn lag_syntax() {
        assert_eq!(parse_lags("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_lags("1..=3,10").unwrap(), vec![1, 2, 3, 10]);
        assert_eq!(parse_lags("1, 5,10").unwrap(), vec![1, 5, 10]);
        assert!(parse_lags("").is_err());
        assert!(parse_lags("x").is_err());
    }

    #[test]
    fn config_file_and_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        std::fs::write(
            &path,
            "# comment\nwindow = 60\nstep = 3\nprices = p.csv\nopinions = o.csv\ntickers = t.txt\nout = x\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let cfg = parse(&["graphs", "--config", p]).unwrap();
        assert_eq!(cfg.window_spec().unwrap().width, 60);
        assert_eq!(cfg.window_spec().unwrap().step, 3);
        let cfg = parse(&["graphs", "--config", p, "--window", "80"]).unwrap();
        assert_eq!(cfg.window_spec().unwrap().width, 80);
        assert_eq!(cfg.get("out"), Some("x"));

        std::fs::write(&path, "windw = 60\n").unwrap();
        assert!(parse(&["graphs", "--config", p]).is_err());
    }

    #[test]
    fn echoed_config_resolves_to_itself() {
        let mut args = vec!["backtest", "--lags", "1,5", "--train-end", "2014-09-10"];
        args.extend(INPUTS);
        let cfg = parse(&args).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.txt");
        std::fs::write(&path, cfg.to_file()).unwrap();
        let again = parse(&["backtest", "--config", path.to_str().unwrap()]).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn dump_dirs_stay_inside_out() {
        let mut args = vec!["backtest", "--dump-graphs", "../elsewhere"];
        args.extend(INPUTS);
        assert!(parse(&args).is_err());
        let mut args = vec!["backtest", "--dump-graphs", "g"];
        args.extend(INPUTS);
        let cfg = parse(&args).unwrap();
        assert_eq!(cfg.dump_dir("dump-graphs").unwrap(), Some(PathBuf::from("o/g")));
    }
}
