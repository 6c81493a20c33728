//! Command-line front end. `run` returns the process exit code:
//! 0 success, 1 escalated warnings or oracle failure, 2 input or config error.

pub mod config;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use crate::change::{analyze, ChangeConfig};
use crate::cooccur::GraphConfig;
use crate::diversity::{change_signs, gbe_series, GbeConfig};
use crate::error::{Error, Result};
use crate::ingest::{parse_basket_jsonl, parse_catalog_csv, parse_stopwords, tokenize_text, EventStream, TokenizerConfig};
use crate::keygraph::{assemble_map, KeyGraphConfig};
use crate::oracle::{check_baskets, check_catalog};
use crate::output;
use crate::resi::{detect_precursor, resi_series, ResiConfig};
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "chancekit", version, about = "Chance discovery over event streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key; repeatable, wins over the file.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Write output files into this directory instead of printing to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluate windows in parallel.
    #[arg(long)]
    pub parallel: bool,
    /// Treat warnings as errors (exit 1).
    #[arg(long)]
    pub deny_warnings: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputMode {
    Text,
    Baskets,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleTarget {
    Baskets,
    Catalog,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a KeyGraph map (DOT + JSON).
    Keygraph {
        /// Input file, or `-` for stdin.
        input: PathBuf,
        /// Defaults to baskets for `.jsonl`/`.json` files, text otherwise.
        #[arg(long, value_enum)]
        mode: Option<InputMode>,
        /// Stopword list, one word per line.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Windowed graph-based entropy and structural change signs.
    Gbe {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Market-vector change detection and trend segmentation.
    Change {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Regional entropy of seismic clusters and precursor flags.
    Resi {
        catalog: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute every count and entropy by brute force and diff.
    Oracle {
        #[arg(value_enum)]
        target: OracleTarget,
        input: PathBuf,
        #[arg(long, hide = true)]
        inject_fault: bool,
        #[command(flatten)]
        common: Common,
    },
}

const GRAPH_KEYS: &[&str] = &["top_nodes", "top_edges"];
const KEYGRAPH_KEYS: &[&str] = &["mode", "stopwords", "top_roofs", "columns_per_roof", "lowercase", "min_token_len"];
const GBE_KEYS: &[&str] =
    &["window_len", "step", "membership", "jaccard", "entropy_delta_threshold", "entropy_sign", "parallel"];
const CHANGE_KEYS: &[&str] = &[
    "delta_t",
    "step",
    "q",
    "metric",
    "vocab_size",
    "nms",
    "label_k",
    "explain_tolerance",
    "with_gbe",
    "parallel",
];
const RESI_KEYS: &[&str] = &[
    "lat_min",
    "lat_max",
    "lon_min",
    "lon_max",
    "cell_deg",
    "window",
    "step",
    "neighborhood",
    "min_events",
    "rise_lookback",
    "flat_lookback",
    "theta_up",
    "theta_flat",
    "min_mag",
    "strict",
    "entropy_sign",
    "parallel",
];

fn keys(groups: &[&[&'static str]]) -> Vec<&'static str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

/// Parses a lower-case enum name the same way the JSON output spells it.
fn enum_value<T: DeserializeOwned>(cfg: &RunConfig, key: &str) -> Result<Option<T>> {
    match cfg.raw(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(serde_json::Value::String(v.to_string()))
            .map(Some)
            .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`"))),
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::parse(&read_text(path)?)?,
        None => RunConfig::default(),
    };
    for kv in &common.set {
        cfg.set(kv)?;
    }
    if common.parallel {
        cfg.insert("parallel", "true");
    }
    Ok(cfg)
}

fn graph_config(cfg: &RunConfig) -> Result<GraphConfig> {
    let d = GraphConfig::default();
    Ok(GraphConfig { top_nodes: cfg.get_or("top_nodes", d.top_nodes)?, top_edges: cfg.get("top_edges")? })
}

pub fn keygraph_config(cfg: &RunConfig) -> Result<KeyGraphConfig> {
    let d = KeyGraphConfig::default();
    let out = KeyGraphConfig {
        graph: graph_config(cfg)?,
        top_roofs: cfg.get_or("top_roofs", d.top_roofs)?,
        columns_per_roof: cfg.get_or("columns_per_roof", d.columns_per_roof)?,
    };
    out.validate()?;
    Ok(out)
}

pub fn gbe_config(cfg: &RunConfig) -> Result<GbeConfig> {
    let d = GbeConfig::default();
    Ok(GbeConfig {
        window_len: cfg.get_or("window_len", d.window_len)?,
        step: cfg.get_or("step", d.step)?,
        graph: graph_config(cfg)?,
        membership: enum_value(cfg, "membership")?.unwrap_or(d.membership),
        jaccard: cfg.get_or("jaccard", d.jaccard)?,
        entropy_delta_threshold: cfg.get_or("entropy_delta_threshold", d.entropy_delta_threshold)?,
        sign: enum_value(cfg, "entropy_sign")?.unwrap_or(d.sign),
        parallel: cfg.flag("parallel", d.parallel)?,
    })
}

pub fn change_config(cfg: &RunConfig) -> Result<ChangeConfig> {
    let d = ChangeConfig::default();
    let out = ChangeConfig {
        delta_t: cfg.get_or("delta_t", d.delta_t)?,
        step: cfg.get_or("step", d.step)?,
        q: cfg.get_or("q", d.q)?,
        metric: enum_value(cfg, "metric")?.unwrap_or(d.metric),
        vocab_size: cfg.get_or("vocab_size", d.vocab_size)?,
        nms: cfg.flag("nms", d.nms)?,
        label_k: cfg.get_or("label_k", d.label_k)?,
        explain_tolerance: cfg.get_or("explain_tolerance", d.explain_tolerance)?,
        parallel: cfg.flag("parallel", d.parallel)?,
    };
    out.validate()?;
    Ok(out)
}

pub fn resi_config(cfg: &RunConfig) -> Result<ResiConfig> {
    let d = ResiConfig::default();
    let mut region = d.region;
    region.lat_min = cfg.get_or("lat_min", region.lat_min)?;
    region.lat_max = cfg.get_or("lat_max", region.lat_max)?;
    region.lon_min = cfg.get_or("lon_min", region.lon_min)?;
    region.lon_max = cfg.get_or("lon_max", region.lon_max)?;
    region.cell_deg = cfg.get_or("cell_deg", region.cell_deg)?;
    let min_mag = match cfg.raw("min_mag") {
        None | Some("none") => d.min_mag,
        Some(_) => cfg.get("min_mag")?,
    };
    Ok(ResiConfig {
        region,
        window: cfg.get_or("window", d.window)?,
        step: cfg.get_or("step", d.step)?,
        neighborhood: enum_value(cfg, "neighborhood")?.unwrap_or(d.neighborhood),
        min_events_per_window: cfg.get_or("min_events", d.min_events_per_window)?,
        rise_lookback: cfg.get_or("rise_lookback", d.rise_lookback)?,
        flat_lookback: cfg.get_or("flat_lookback", d.flat_lookback)?,
        theta_up: cfg.get_or("theta_up", d.theta_up)?,
        theta_flat: cfg.get_or("theta_flat", d.theta_flat)?,
        min_mag,
        strict: cfg.flag("strict", d.strict)?,
        sign: enum_value(cfg, "entropy_sign")?.unwrap_or(d.sign),
        parallel: cfg.flag("parallel", d.parallel)?,
    })
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let res = if path.as_os_str() == "-" {
        io::stdin().read_to_end(&mut buf).map(|_| ())
    } else {
        fs::read(path).map(|b| buf = b)
    };
    res.map_err(|source| Error::Read { path: path.display().to_string(), source })?;
    Ok(buf)
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_input(path)?)
        .map_err(|_| Error::Config(format!("{} is not valid UTF-8", path.display())))
}

fn read_baskets(path: &Path) -> Result<EventStream> {
    parse_basket_jsonl(read_input(path)?.as_slice())
}

/// Collects outputs, then writes them to `--out` or prints the primary one.
struct Sink {
    out: Option<PathBuf>,
    files: Vec<(&'static str, String)>,
    stdout: String,
}

impl Sink {
    fn new(out: Option<PathBuf>) -> Self {
        Sink { out, files: Vec::new(), stdout: String::new() }
    }

    fn file(&mut self, name: &'static str, body: String) {
        self.files.push((name, body));
    }

    fn primary(&mut self, body: &str) {
        self.stdout.push_str(body);
    }

    fn flush(self) -> Result<()> {
        match self.out {
            Some(dir) => {
                fs::create_dir_all(&dir)?;
                for (name, body) in self.files {
                    fs::write(dir.join(name), body)?;
                }
            }
            None => {
                let mut stdout = io::stdout().lock();
                stdout.write_all(self.stdout.as_bytes())?;
                stdout.flush()?;
            }
        }
        Ok(())
    }
}

struct Outcome {
    warnings: Vec<String>,
    failed: bool,
}

impl Outcome {
    fn ok(warnings: Vec<String>) -> Self {
        Outcome { warnings, failed: false }
    }
}

fn run_keygraph(input: &Path, mode: Option<InputMode>, stopwords: Option<&Path>, common: &Common) -> Result<Outcome> {
    let mut cfg = load_config(common)?;
    cfg.check_keys(&keys(&[GRAPH_KEYS, KEYGRAPH_KEYS]))?;
    let kg = keygraph_config(&cfg)?;
    let mode = match (mode, cfg.raw("mode")) {
        (Some(m), _) => m,
        (None, Some(raw)) => InputMode::from_str(raw, true)
            .map_err(|_| Error::Config(format!("invalid value `{raw}` for `mode`")))?,
        (None, None) => match input.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => InputMode::Baskets,
            _ => InputMode::Text,
        },
    };
    if let Some(p) = stopwords {
        cfg.insert("stopwords", p.display().to_string());
    }
    let stream = match mode {
        InputMode::Baskets => read_baskets(input)?,
        InputMode::Text => {
            let d = TokenizerConfig::default();
            let mut tok = TokenizerConfig {
                lowercase: cfg.flag("lowercase", d.lowercase)?,
                min_token_len: cfg.get_or("min_token_len", d.min_token_len)?,
                ..d
            };
            if let Some(path) = cfg.raw("stopwords") {
                tok.stopwords = parse_stopwords(&read_text(Path::new(path))?);
            }
            tok.validate()?;
            tokenize_text(&read_text(input)?, &tok)
        }
    };
    let mut warnings = Vec::new();
    if stream.is_empty() {
        warnings.push("input contains no events; the map is empty".to_string());
    }
    let map = assemble_map(&stream, &kg);
    let json = output::keygraph_json(&map)?;
    let mut sink = Sink::new(common.out.clone());
    sink.primary(&json);
    sink.file("keygraph.dot", output::keygraph_dot(&map));
    sink.file("keygraph.json", json);
    sink.flush()?;
    Ok(Outcome::ok(warnings))
}

fn run_gbe(input: &Path, common: &Common) -> Result<Outcome> {
    let cfg = load_config(common)?;
    cfg.check_keys(&keys(&[GRAPH_KEYS, GBE_KEYS]))?;
    let gcfg = gbe_config(&cfg)?;
    let warnings = gcfg.validate()?;
    let stream = read_baskets(input)?;
    let series = gbe_series(&stream, &gcfg);
    let signs = change_signs(&series, &gcfg);
    let json = serde_json::to_string_pretty(&signs)? + "\n";
    let mut sink = Sink::new(common.out.clone());
    sink.primary(&json);
    sink.file("gbe_series.csv", output::gbe_series_csv(&series, &signs));
    sink.file("gbe_signs.json", json);
    sink.flush()?;
    Ok(Outcome::ok(warnings))
}

fn run_change(input: &Path, common: &Common) -> Result<Outcome> {
    let cfg = load_config(common)?;
    cfg.check_keys(&keys(&[GRAPH_KEYS, CHANGE_KEYS]))?;
    let ccfg = change_config(&cfg)?;
    let stream = read_baskets(input)?;
    let signs = if cfg.flag("with_gbe", false)? {
        let gcfg = GbeConfig {
            window_len: ccfg.delta_t,
            step: ccfg.delta_t,
            graph: graph_config(&cfg)?,
            parallel: ccfg.parallel,
            ..GbeConfig::default()
        };
        gcfg.validate()?;
        Some(change_signs(&gbe_series(&stream, &gcfg), &gcfg))
    } else {
        None
    };
    let report = analyze(&stream, &ccfg, signs.as_deref())?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    let mut sink = Sink::new(common.out.clone());
    sink.primary(&json);
    sink.file("change_report.json", json);
    sink.file("change_magnitudes.csv", output::magnitude_csv(&report.magnitudes, &report.change_points));
    sink.flush()?;
    Ok(Outcome::ok(Vec::new()))
}

fn run_resi(catalog: &Path, common: &Common) -> Result<Outcome> {
    let cfg = load_config(common)?;
    cfg.check_keys(RESI_KEYS)?;
    let rcfg = resi_config(&cfg)?;
    let mut warnings = rcfg.validate()?;
    let events = parse_catalog_csv(read_input(catalog)?.as_slice())?;
    let series = resi_series(&events, &rcfg);
    let flags = match detect_precursor(&series, &rcfg) {
        Ok(flags) => flags,
        Err(Error::SeriesTooShort { len, required }) => {
            if !events.is_empty() {
                warnings.push(format!("series has {len} readings, precursor test needs {required}"));
            }
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let flagged = series.iter().filter(|r| r.flagged).count();
    if flagged > 0 {
        warnings.push(format!("{flagged} window(s) below min_events"));
    }
    let series_csv = output::resi_series_csv(&series);
    let flags_csv = output::resi_flags_csv(&flags);
    let mut sink = Sink::new(common.out.clone());
    sink.primary(&series_csv);
    sink.primary("\n");
    sink.primary(&flags_csv);
    sink.file("resi_series.csv", series_csv);
    sink.file("resi_flags.csv", flags_csv);
    sink.flush()?;
    Ok(Outcome::ok(warnings))
}

fn run_oracle(target: OracleTarget, input: &Path, inject_fault: bool, common: &Common) -> Result<Outcome> {
    let cfg = load_config(common)?;
    let report = match target {
        OracleTarget::Baskets => {
            cfg.check_keys(&keys(&[GRAPH_KEYS, GBE_KEYS]))?;
            let gcfg = gbe_config(&cfg)?;
            gcfg.validate()?;
            check_baskets(&read_baskets(input)?, &gcfg, inject_fault)
        }
        OracleTarget::Catalog => {
            cfg.check_keys(RESI_KEYS)?;
            let rcfg = resi_config(&cfg)?;
            rcfg.validate()?;
            check_catalog(&parse_catalog_csv(read_input(input)?.as_slice())?, &rcfg, inject_fault)
        }
    };
    let mut sink = Sink::new(common.out.clone());
    sink.primary(&report.render());
    sink.file("oracle.txt", report.render());
    sink.file("oracle.json", serde_json::to_string_pretty(&report)? + "\n");
    sink.flush()?;
    Ok(Outcome { warnings: Vec::new(), failed: !report.passed() })
}

pub fn run(cli: Cli) -> i32 {
    let (common, result) = match &cli.command {
        Command::Keygraph { input, mode, stopwords, common } => {
            (common, run_keygraph(input, *mode, stopwords.as_deref(), common))
        }
        Command::Gbe { input, common } => (common, run_gbe(input, common)),
        Command::Change { input, common } => (common, run_change(input, common)),
        Command::Resi { catalog, common } => (common, run_resi(catalog, common)),
        Command::Oracle { target, input, inject_fault, common } => {
            (common, run_oracle(*target, input, *inject_fault, common))
        }
    };
    match result {
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if outcome.failed || (common.deny_warnings && !outcome.warnings.is_empty()) {
                1
            } else {
                0
            }
        }
    }
}
