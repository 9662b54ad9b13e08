//! Run configuration: a flat key-value text format with one section per
//! command, parsed strictly — unknown sections, unknown keys, duplicate
//! keys, or a missing version tag are errors, each reported with its line.
//!
//! ```text
//! version = 1
//!
//! [fpca]
//! method = wpu          # wpu | spatial-sign | classical | dm
//! psi = 0.84
//! components = 3        # omit to select by explained variance
//! threshold = 0.9
//! max-iter = 2000
//! tol = 1e-8
//! anchor-eps = 1e-10
//!
//! [simulate]
//! family = network      # network | sphere
//! nodes = 20
//! subjects-per-group = 100
//! t-len = 25
//! tau = 0.3,0.4,0.7
//! amplitude = 1.0,1.4,1.8
//! base-weight = 0.5
//! noise-sd = 0.1
//! contamination-fraction = 0.1
//! scheme = shift-scale  # shift-scale | bimodal | zero-weight
//! shift = 0.5
//! scale = 5
//! seed = 42
//!
//! [breakdown]
//! levels = 0.05,0.1,0.2
//! reps = 10
//! reference-reps = 10
//! methods = wpu,dm
//! component = 1         # 1-based eigenfunction index
//! psi = 0.84
//! seed = 7
//!
//! [median]
//! max-iter = 2000
//!
//! [ingest]
//! nodes = st-01,st-02,st-03
//! bin-minutes = 20
//! start-date = 2024-05-01
//! end-date = 2024-05-07
//! ```
//!
//! Every key is optional (commands fall back to the defaults below) except
//! `ingest.nodes`, which has no sensible default. Command-line flags
//! (`--seed`, `--psi`, `--components`, `--method`) override the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use rfpca::{
    ContaminationScheme, FpcaMethod, FpcaParams, NetworkSimConfig, SolverConfig, SphereSimConfig,
};

use crate::error::{io_at, CliError, CliResult};
use crate::formats::{method_from_str, method_name, FORMAT_VERSION};

// ===== typed sections =====

/// Generator family the `simulate` command draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimFamily {
    Network,
    Sphere,
}

/// `[median]`: solver settings for the pointwise median trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianSection {
    pub solver: SolverConfig,
}

/// `[fpca]`: estimator choice and tuning for the full pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FpcaSection {
    pub method: FpcaMethod,
    pub psi: f64,
    pub components: Option<usize>,
    pub threshold: f64,
    pub solver: SolverConfig,
}

/// `[simulate]`: synthetic-sample generation, optionally contaminated.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSection {
    pub family: SimFamily,
    pub network: NetworkSimConfig,
    pub sphere: SphereSimConfig,
    /// Outlier fraction; 0 disables contamination.
    pub contamination_fraction: f64,
    pub scheme: ContaminationScheme,
    pub seed: u64,
}

/// `[breakdown]`: the contamination-response experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownSection {
    pub network: NetworkSimConfig,
    pub scheme: ContaminationScheme,
    pub levels: Vec<f64>,
    pub reps: usize,
    pub reference_reps: usize,
    pub methods: Vec<FpcaMethod>,
    /// 1-based eigenfunction index under study.
    pub component: usize,
    pub psi: f64,
    pub seed: u64,
    pub solver: SolverConfig,
}

/// `[ingest]`: event-record binning.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestSection {
    /// Fixed node universe; events naming other nodes are skipped.
    pub nodes: Vec<String>,
    /// Bin width; must divide a day evenly.
    pub bin_minutes: u32,
    /// First subject day; defaults to the earliest event's day.
    pub start_date: Option<NaiveDate>,
    /// Last subject day; defaults to the latest event's day.
    pub end_date: Option<NaiveDate>,
}

/// All sections of a configuration file, defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub version: u32,
    pub median: MedianSection,
    pub fpca: FpcaSection,
    pub simulate: SimulateSection,
    pub breakdown: BreakdownSection,
    pub ingest: IngestSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fpca_defaults = FpcaParams::default();
        let breakdown_defaults = rfpca::BreakdownConfig::default();
        RunConfig {
            version: FORMAT_VERSION,
            median: MedianSection {
                solver: SolverConfig::default(),
            },
            fpca: FpcaSection {
                method: fpca_defaults.method,
                psi: fpca_defaults.psi,
                components: fpca_defaults.components,
                threshold: fpca_defaults.threshold,
                solver: fpca_defaults.solver,
            },
            simulate: SimulateSection {
                family: SimFamily::Network,
                network: NetworkSimConfig::default(),
                sphere: SphereSimConfig::default(),
                contamination_fraction: 0.0,
                scheme: default_scheme(),
                seed: 0,
            },
            breakdown: BreakdownSection {
                network: breakdown_defaults.network,
                scheme: breakdown_defaults.scheme,
                levels: breakdown_defaults.levels,
                reps: breakdown_defaults.reps,
                reference_reps: breakdown_defaults.reference_reps,
                methods: breakdown_defaults.methods,
                component: breakdown_defaults.component + 1,
                psi: breakdown_defaults.psi,
                seed: breakdown_defaults.seed,
                solver: breakdown_defaults.solver,
            },
            ingest: IngestSection {
                nodes: Vec::new(),
                bin_minutes: 20,
                start_date: None,
                end_date: None,
            },
        }
    }
}

fn default_scheme() -> ContaminationScheme {
    ContaminationScheme::ShiftScale {
        shift: 0.5,
        scale: 5.0,
    }
}

/// Loads and strictly parses a configuration file; `None` means defaults.
pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_at(path))?;
            parse_config(&text, path)
        }
    }
}

// ===== parser =====

struct Entry {
    key: String,
    value: String,
    line: usize,
}

/// Parses configuration text against every section schema at once, so a typo
/// anywhere in the file fails fast even for commands that never read it.
pub fn parse_config(text: &str, file: &Path) -> CliResult<RunConfig> {
    let mut sections: Vec<(String, usize, Vec<Entry>)> = Vec::new();
    let mut version: Option<(u32, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::parse(file, line_no, "unterminated section header"))?
                .trim();
            if !KNOWN_SECTIONS.contains(&name) {
                return Err(CliError::parse(
                    file,
                    line_no,
                    format!("unknown section [{name}] (expected one of {KNOWN_SECTIONS:?})"),
                ));
            }
            if sections.iter().any(|(existing, _, _)| existing == name) {
                return Err(CliError::parse(
                    file,
                    line_no,
                    format!("section [{name}] appears twice"),
                ));
            }
            sections.push((name.to_string(), line_no, Vec::new()));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| {
                CliError::parse(file, line_no, format!("expected `key = value`, got {line:?}"))
            })?;
        if key.is_empty() || value.is_empty() {
            return Err(CliError::parse(
                file,
                line_no,
                "empty key or value in `key = value` line",
            ));
        }
        match sections.last_mut() {
            None => {
                if key == "version" {
                    if version.is_some() {
                        return Err(CliError::parse(file, line_no, "version appears twice"));
                    }
                    let v = value.parse::<u32>().map_err(|_| {
                        CliError::parse(file, line_no, format!("bad version: {value:?}"))
                    })?;
                    version = Some((v, line_no));
                } else {
                    return Err(CliError::parse(
                        file,
                        line_no,
                        format!("key {key:?} appears before any [section]"),
                    ));
                }
            }
            Some((_, _, entries)) => {
                if entries.iter().any(|e| e.key == key) {
                    return Err(CliError::parse(
                        file,
                        line_no,
                        format!("key {key:?} appears twice in this section"),
                    ));
                }
                entries.push(Entry {
                    key: key.to_string(),
                    value: value.to_string(),
                    line: line_no,
                });
            }
        }
    }

    let (version, version_line) = version.ok_or_else(|| {
        CliError::parse(file, 1, "missing `version = 1` line before any section")
    })?;
    if version != FORMAT_VERSION {
        return Err(CliError::parse(
            file,
            version_line,
            format!("unsupported config version {version} (this build reads {FORMAT_VERSION})"),
        ));
    }

    let mut config = RunConfig::default();
    for (name, _, entries) in &sections {
        for entry in entries {
            apply_entry(&mut config, name, entry, file)?;
        }
    }
    finish_validation(&config)?;
    Ok(config)
}

const KNOWN_SECTIONS: [&str; 5] = ["median", "fpca", "simulate", "breakdown", "ingest"];

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn apply_entry(config: &mut RunConfig, section: &str, e: &Entry, file: &Path) -> CliResult<()> {
    let fail = |reason: String| CliError::parse(file, e.line, reason);
    let unknown = || {
        CliError::parse(
            file,
            e.line,
            format!("unknown key {:?} in section [{section}]", e.key),
        )
    };
    match section {
        "median" => match e.key.as_str() {
            "max-iter" | "tol" | "anchor-eps" => {
                apply_solver_key(&mut config.median.solver, e).map_err(fail)
            }
            _ => Err(unknown()),
        },
        "fpca" => match e.key.as_str() {
            "method" => {
                config.fpca.method = method_from_str(&e.value).map_err(fail)?;
                Ok(())
            }
            "psi" => {
                config.fpca.psi = parse_f64(e).map_err(fail)?;
                Ok(())
            }
            "components" => {
                config.fpca.components = Some(parse_usize(e).map_err(fail)?);
                Ok(())
            }
            "threshold" => {
                config.fpca.threshold = parse_f64(e).map_err(fail)?;
                Ok(())
            }
            "max-iter" | "tol" | "anchor-eps" => {
                apply_solver_key(&mut config.fpca.solver, e).map_err(fail)
            }
            _ => Err(unknown()),
        },
        "simulate" => match e.key.as_str() {
            "family" => {
                config.simulate.family = match e.value.as_str() {
                    "network" => SimFamily::Network,
                    "sphere" => SimFamily::Sphere,
                    other => {
                        return Err(fail(format!(
                            "unknown family {other:?} (expected network or sphere)"
                        )))
                    }
                };
                Ok(())
            }
            "subjects" => {
                config.simulate.sphere.subjects = parse_usize(e).map_err(fail)?;
                Ok(())
            }
            "theta0" => {
                config.simulate.sphere.theta0 = parse_f64(e).map_err(fail)?;
                Ok(())
            }
            "theta1" => {
                config.simulate.sphere.theta1 = parse_f64(e).map_err(fail)?;
                Ok(())
            }
            "t-len" => {
                let v = parse_usize(e).map_err(fail)?;
                config.simulate.network.t_len = v;
                config.simulate.sphere.t_len = v;
                Ok(())
            }
            "noise-sd" => {
                let v = parse_f64(e).map_err(fail)?;
                config.simulate.network.noise_sd = v;
                config.simulate.sphere.noise_sd = v;
                Ok(())
            }
            "contamination-fraction" => {
                config.simulate.contamination_fraction = parse_f64(e).map_err(fail)?;
                Ok(())
            }
            "scheme" | "shift" | "scale" | "offset" => {
                apply_scheme_key(&mut config.simulate.scheme, e).map_err(fail)
            }
            "seed" => {
                config.simulate.seed = parse_u64(e).map_err(fail)?;
                Ok(())
            }
            _ => apply_network_key(&mut config.simulate.network, e)
                .map_err(fail)?
                .then_some(())
                .ok_or_else(unknown),
        },
        "breakdown" => match e.key.as_str() {
            "levels" => {
                config.breakdown.levels = parse_f64_list(e).map_err(fail)?;
                Ok(())
            }
            "reps" => {
                config.breakdown.reps = parse_usize(e).map_err(fail)?;
                Ok(())
            }
            "reference-reps" => {
                config.breakdown.reference_reps = parse_usize(e).map_err(fail)?;
                Ok(())
            }
            "methods" => {
                let mut methods = Vec::new();
                for part in e.value.split(',') {
                    methods.push(method_from_str(part.trim()).map_err(&fail)?);
                }
                config.breakdown.methods = methods;
                Ok(())
            }
            "component" => {
                let v = parse_usize(e).map_err(&fail)?;
                if v == 0 {
                    return Err(fail("component is 1-based; use 1 for the leading one".into()));
                }
                config.breakdown.component = v;
                Ok(())
            }
            "psi" => {
                config.breakdown.psi = parse_f64(e).map_err(fail)?;
                Ok(())
            }
            "seed" => {
                config.breakdown.seed = parse_u64(e).map_err(fail)?;
                Ok(())
            }
            "t-len" => {
                config.breakdown.network.t_len = parse_usize(e).map_err(fail)?;
                Ok(())
            }
            "noise-sd" => {
                config.breakdown.network.noise_sd = parse_f64(e).map_err(fail)?;
                Ok(())
            }
            "scheme" | "shift" | "scale" | "offset" => {
                apply_scheme_key(&mut config.breakdown.scheme, e).map_err(fail)
            }
            "max-iter" | "tol" | "anchor-eps" => {
                apply_solver_key(&mut config.breakdown.solver, e).map_err(fail)
            }
            _ => apply_network_key(&mut config.breakdown.network, e)
                .map_err(fail)?
                .then_some(())
                .ok_or_else(unknown),
        },
        "ingest" => match e.key.as_str() {
            "nodes" => {
                config.ingest.nodes = parse_node_list(e).map_err(fail)?;
                Ok(())
            }
            "bin-minutes" => {
                let v = parse_u64(e).map_err(&fail)? as u32;
                if v == 0 || 24 * 60 % v != 0 || 24 * 60 / v < 2 {
                    return Err(fail(format!(
                        "bin-minutes must divide a day into at least 2 bins, got {v}"
                    )));
                }
                config.ingest.bin_minutes = v;
                Ok(())
            }
            "start-date" => {
                config.ingest.start_date = Some(parse_date(e).map_err(fail)?);
                Ok(())
            }
            "end-date" => {
                config.ingest.end_date = Some(parse_date(e).map_err(fail)?);
                Ok(())
            }
            _ => Err(unknown()),
        },
        _ => unreachable!("section names are validated before dispatch"),
    }
}

/// Keys shared by the network generator; returns false for unknown keys so
/// the caller can report them against its own section.
fn apply_network_key(network: &mut NetworkSimConfig, e: &Entry) -> Result<bool, String> {
    match e.key.as_str() {
        "nodes" => network.nodes = parse_usize(e)?,
        "subjects-per-group" => network.subjects_per_group = parse_usize(e)?,
        "tau" => network.tau = parse_f64_triple(e)?,
        "amplitude" => network.amplitude = parse_f64_triple(e)?,
        "base-weight" => network.base_weight = parse_f64(e)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn apply_solver_key(solver: &mut SolverConfig, e: &Entry) -> Result<(), String> {
    match e.key.as_str() {
        "max-iter" => solver.max_iter = parse_usize(e)?,
        "tol" => solver.tol = parse_f64(e)?,
        "anchor-eps" => solver.anchor_eps = parse_f64(e)?,
        _ => unreachable!("caller matched the key"),
    }
    Ok(())
}

fn apply_scheme_key(scheme: &mut ContaminationScheme, e: &Entry) -> Result<(), String> {
    // `shift`/`scale`/`offset` tune whichever variant is currently selected;
    // `scheme` switches variants, carrying compatible parameters over.
    match e.key.as_str() {
        "scheme" => {
            *scheme = match e.value.as_str() {
                "shift-scale" => match *scheme {
                    ContaminationScheme::ShiftScale { .. } => *scheme,
                    _ => default_scheme(),
                },
                "bimodal" => match *scheme {
                    ContaminationScheme::Bimodal { .. } => *scheme,
                    _ => ContaminationScheme::Bimodal { offset: 0.2 },
                },
                "zero-weight" => ContaminationScheme::ZeroWeight,
                other => {
                    return Err(format!(
                        "unknown scheme {other:?} (expected shift-scale, bimodal, or zero-weight)"
                    ))
                }
            };
            Ok(())
        }
        "shift" => match scheme {
            ContaminationScheme::ShiftScale { shift, .. } => {
                *shift = parse_f64(e)?;
                Ok(())
            }
            _ => Err("shift only applies to scheme = shift-scale".into()),
        },
        "scale" => match scheme {
            ContaminationScheme::ShiftScale { scale, .. } => {
                *scale = parse_f64(e)?;
                Ok(())
            }
            _ => Err("scale only applies to scheme = shift-scale".into()),
        },
        "offset" => match scheme {
            ContaminationScheme::Bimodal { offset } => {
                *offset = parse_f64(e)?;
                Ok(())
            }
            _ => Err("offset only applies to scheme = bimodal".into()),
        },
        _ => unreachable!("caller matched the key"),
    }
}

fn finish_validation(config: &RunConfig) -> CliResult<()> {
    if let (Some(start), Some(end)) = (config.ingest.start_date, config.ingest.end_date) {
        if start > end {
            return Err(CliError::Usage(format!(
                "ingest: start-date {start} is after end-date {end}"
            )));
        }
    }
    Ok(())
}

// ===== value parsers =====

fn parse_f64(e: &Entry) -> Result<f64, String> {
    e.value
        .parse::<f64>()
        .map_err(|_| format!("{} is not a number: {:?}", e.key, e.value))
}

fn parse_usize(e: &Entry) -> Result<usize, String> {
    e.value
        .parse::<usize>()
        .map_err(|_| format!("{} is not a non-negative integer: {:?}", e.key, e.value))
}

fn parse_u64(e: &Entry) -> Result<u64, String> {
    e.value
        .parse::<u64>()
        .map_err(|_| format!("{} is not a non-negative integer: {:?}", e.key, e.value))
}

fn parse_f64_list(e: &Entry) -> Result<Vec<f64>, String> {
    e.value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("{} has a non-numeric entry: {part:?}", e.key))
        })
        .collect()
}

fn parse_f64_triple(e: &Entry) -> Result<[f64; 3], String> {
    let list = parse_f64_list(e)?;
    <[f64; 3]>::try_from(list).map_err(|v| format!("{} needs 3 entries, got {}", e.key, v.len()))
}

fn parse_date(e: &Entry) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(&e.value, "%Y-%m-%d")
        .map_err(|_| format!("{} is not a YYYY-MM-DD date: {:?}", e.key, e.value))
}

fn parse_node_list(e: &Entry) -> Result<Vec<String>, String> {
    let nodes: Vec<String> = e.value.split(',').map(|s| s.trim().to_string()).collect();
    if nodes.len() < 2 {
        return Err(format!("{} needs at least 2 node ids", e.key));
    }
    for (i, id) in nodes.iter().enumerate() {
        if id.is_empty() {
            return Err(format!("{} has an empty id at position {}", e.key, i + 1));
        }
        if id.contains(['"', '\'']) || id.chars().any(char::is_whitespace) {
            return Err(format!(
                "node id {id:?} must not contain quotes or whitespace"
            ));
        }
    }
    let mut seen = nodes.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != nodes.len() {
        return Err(format!("{} has duplicate node ids", e.key));
    }
    Ok(nodes)
}

// ===== report echo =====

/// Flattens the settings a command actually ran with, for the run report.
pub fn echo_solver(map: &mut BTreeMap<String, String>, prefix: &str, solver: &SolverConfig) {
    map.insert(format!("{prefix}.max-iter"), solver.max_iter.to_string());
    map.insert(format!("{prefix}.tol"), solver.tol.to_string());
    map.insert(
        format!("{prefix}.anchor-eps"),
        solver.anchor_eps.to_string(),
    );
}

pub fn echo_network(map: &mut BTreeMap<String, String>, prefix: &str, n: &NetworkSimConfig) {
    map.insert(format!("{prefix}.nodes"), n.nodes.to_string());
    map.insert(
        format!("{prefix}.subjects-per-group"),
        n.subjects_per_group.to_string(),
    );
    map.insert(format!("{prefix}.t-len"), n.t_len.to_string());
    map.insert(format!("{prefix}.tau"), join_f64(&n.tau));
    map.insert(format!("{prefix}.amplitude"), join_f64(&n.amplitude));
    map.insert(format!("{prefix}.base-weight"), n.base_weight.to_string());
    map.insert(format!("{prefix}.noise-sd"), n.noise_sd.to_string());
}

pub fn echo_scheme(map: &mut BTreeMap<String, String>, prefix: &str, scheme: &ContaminationScheme) {
    match scheme {
        ContaminationScheme::ShiftScale { shift, scale } => {
            map.insert(format!("{prefix}.scheme"), "shift-scale".to_string());
            map.insert(format!("{prefix}.shift"), shift.to_string());
            map.insert(format!("{prefix}.scale"), scale.to_string());
        }
        ContaminationScheme::Bimodal { offset } => {
            map.insert(format!("{prefix}.scheme"), "bimodal".to_string());
            map.insert(format!("{prefix}.offset"), offset.to_string());
        }
        ContaminationScheme::ZeroWeight => {
            map.insert(format!("{prefix}.scheme"), "zero-weight".to_string());
        }
    }
}

/// Comma-joins floats with `Display`, which round-trips f64 exactly.
pub fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Comma-joins method names.
pub fn join_methods(methods: &[FpcaMethod]) -> String {
    methods
        .iter()
        .map(|m| method_name(*m))
        .collect::<Vec<_>>()
        .join(",")
}

// ===== tests =====
