//! The five commands behind the binary: median, fpca, simulate, breakdown,
//! and ingest. Each one loads the configuration, applies flag overrides,
//! runs the estimation library, writes its artifacts atomically, and ends
//! with a `report.json` hashing everything it read and wrote.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rfpca::{
    breakdown_experiment, compute_center_trajectory, contaminate, derive_seed, fit_fpca,
    gen_network_sample, gen_sphere_sample, BreakdownConfig, CenterKind, ContaminationSpec,
    FpcaParams, ObjectTrajectorySample,
};

use crate::config::{
    self, load_config, BreakdownSection, FpcaSection, SimFamily, SimulateSection,
};
use crate::error::{io_at, CliError, CliResult};
use crate::formats::{
    method_from_str, method_name, sidecar_path, write_center_trajectory, write_curves,
    write_eigenfunctions, write_scores, write_spectrum, write_trajectory_sample,
    read_trajectory_sample,
};
use crate::ingest::ingest_events;
use crate::report::RunReport;

/// Seed-derivation purpose tag for the simulate command's contamination
/// stream, fixed so reruns reproduce the same outlier draw.
const SIMULATE_CONTAMINATION_PURPOSE: u64 = 0x53494D43;

// ===== flag overrides =====

/// Values of the override flags a command accepts; `None` means "use the
/// configuration file".
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub psi: Option<f64>,
    pub components: Option<usize>,
    pub method: Option<String>,
}

fn resolve_fpca(mut section: FpcaSection, overrides: &Overrides) -> CliResult<FpcaParams> {
    if let Some(name) = &overrides.method {
        section.method = method_from_str(name).map_err(CliError::Usage)?;
    }
    if let Some(psi) = overrides.psi {
        section.psi = psi;
    }
    if let Some(j) = overrides.components {
        section.components = Some(j);
    }
    Ok(FpcaParams {
        method: section.method,
        psi: section.psi,
        components: section.components,
        threshold: section.threshold,
        solver: section.solver,
    })
}

fn resolve_simulate(mut section: SimulateSection, overrides: &Overrides) -> SimulateSection {
    if let Some(seed) = overrides.seed {
        section.seed = seed;
    }
    section
}

fn resolve_breakdown(mut section: BreakdownSection, overrides: &Overrides) -> BreakdownSection {
    if let Some(seed) = overrides.seed {
        section.seed = seed;
    }
    if let Some(psi) = overrides.psi {
        section.psi = psi;
    }
    section
}

// ===== shared plumbing =====

fn start_report(
    command: &str,
    out_dir: &Path,
    config_path: Option<&Path>,
) -> CliResult<RunReport> {
    fs::create_dir_all(out_dir).map_err(io_at(out_dir))?;
    let mut report = RunReport::new(command);
    if let Some(path) = config_path {
        report.add_input(path)?;
    }
    Ok(report)
}

fn read_input_sample(report: &mut RunReport, input: &Path) -> CliResult<ObjectTrajectorySample> {
    report.add_input(input)?;
    report.add_input(&sidecar_path(input))?;
    let t = Instant::now();
    let sample = read_trajectory_sample(input)?;
    report.add_timing("read", t);
    Ok(sample)
}

/// Writes a file through `write`, then hashes it into the report manifest.
fn emit(
    report: &mut RunReport,
    written: &mut Vec<PathBuf>,
    path: PathBuf,
    write: impl FnOnce(&Path) -> CliResult<()>,
) -> CliResult<()> {
    write(&path)?;
    report.add_output(&path)?;
    written.push(path);
    Ok(())
}

fn finish(
    report: RunReport,
    mut written: Vec<PathBuf>,
    out_dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    let report_path = out_dir.join("report.json");
    report.write(&report_path)?;
    written.push(report_path);
    Ok(written)
}

// ===== commands =====

/// `rfpca median`: pointwise Fréchet median trajectory of a sample.
pub fn cmd_median(
    input: &Path,
    out_dir: &Path,
    config_path: Option<&Path>,
) -> CliResult<Vec<PathBuf>> {
    let config = load_config(config_path)?;
    let mut report = start_report("median", out_dir, config_path)?;
    let sample = read_input_sample(&mut report, input)?;

    let t = Instant::now();
    let center = compute_center_trajectory(&sample, CenterKind::Median, &config.median.solver)?;
    report.add_timing("solve", t);
    config::echo_solver(&mut report.config, "median", &config.median.solver);

    let mut written = Vec::new();
    let t = Instant::now();
    emit(&mut report, &mut written, out_dir.join("center.csv"), |p| {
        write_center_trajectory(p, &center)
    })?;
    report.add_output(&sidecar_path(&out_dir.join("center.csv")))?;
    report.add_timing("write", t);
    finish(report, written, out_dir)
}

/// `rfpca fpca`: the full pipeline — center, distance trajectories,
/// covariance, spectrum, scores.
pub fn cmd_fpca(
    input: &Path,
    out_dir: &Path,
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> CliResult<Vec<PathBuf>> {
    let config = load_config(config_path)?;
    let params = resolve_fpca(config.fpca, overrides)?;
    let mut report = start_report("fpca", out_dir, config_path)?;
    let sample = read_input_sample(&mut report, input)?;

    let t = Instant::now();
    let fit = fit_fpca(&sample, &params)?;
    report.add_timing("fit", t);

    for warning in &fit.warnings {
        report.add_warning(warning);
    }
    report
        .config
        .insert("fpca.method".into(), method_name(params.method).into());
    report.config.insert("fpca.psi".into(), params.psi.to_string());
    report.config.insert(
        "fpca.components".into(),
        params
            .components
            .map_or_else(|| "auto".to_string(), |j| j.to_string()),
    );
    report
        .config
        .insert("fpca.threshold".into(), params.threshold.to_string());
    report
        .config
        .insert("fpca.retained".into(), fit.components.to_string());
    if let Some(cutoff) = &fit.cutoff {
        report
            .config
            .insert("fpca.cutoff-q-hat".into(), cutoff.q_hat.to_string());
    }
    config::echo_solver(&mut report.config, "fpca", &params.solver);

    let retained = fit.retained();
    let mut written = Vec::new();
    let t = Instant::now();
    emit(
        &mut report,
        &mut written,
        out_dir.join("eigenfunctions.csv"),
        |p| write_eigenfunctions(p, &retained),
    )?;
    emit(&mut report, &mut written, out_dir.join("scores.csv"), |p| {
        write_scores(p, &fit.scores)
    })?;
    emit(
        &mut report,
        &mut written,
        out_dir.join("spectrum.csv"),
        |p| write_spectrum(p, &fit.eigen),
    )?;
    report.add_timing("write", t);
    finish(report, written, out_dir)
}

/// `rfpca simulate`: draw a synthetic sample, optionally contaminated.
pub fn cmd_simulate(
    out_dir: &Path,
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> CliResult<Vec<PathBuf>> {
    let config = load_config(config_path)?;
    let section = resolve_simulate(config.simulate, overrides);
    let mut report = start_report("simulate", out_dir, config_path)?;

    let t = Instant::now();
    let (sample, outliers) = match section.family {
        SimFamily::Network => {
            let clean = gen_network_sample(&section.network, section.seed)?;
            if section.contamination_fraction > 0.0 {
                let spec = ContaminationSpec {
                    fraction: section.contamination_fraction,
                    scheme: section.scheme,
                };
                let seed = derive_seed(section.seed, SIMULATE_CONTAMINATION_PURPOSE, 0);
                let (contaminated, indices) =
                    contaminate(&section.network, &clean, &spec, seed)?;
                (contaminated, Some(indices))
            } else {
                (clean, None)
            }
        }
        SimFamily::Sphere => {
            if section.contamination_fraction > 0.0 {
                return Err(CliError::Usage(
                    "contamination schemes apply to the network family only".to_string(),
                ));
            }
            (gen_sphere_sample(&section.sphere, section.seed)?, None)
        }
    };
    report.add_timing("generate", t);

    match section.family {
        SimFamily::Network => {
            report
                .config
                .insert("simulate.family".into(), "network".into());
            config::echo_network(&mut report.config, "simulate", &section.network);
            report.config.insert(
                "simulate.contamination-fraction".into(),
                section.contamination_fraction.to_string(),
            );
            if section.contamination_fraction > 0.0 {
                config::echo_scheme(&mut report.config, "simulate", &section.scheme);
            }
        }
        SimFamily::Sphere => {
            report
                .config
                .insert("simulate.family".into(), "sphere".into());
            report.config.insert(
                "simulate.subjects".into(),
                section.sphere.subjects.to_string(),
            );
            report
                .config
                .insert("simulate.t-len".into(), section.sphere.t_len.to_string());
            report
                .config
                .insert("simulate.theta0".into(), section.sphere.theta0.to_string());
            report
                .config
                .insert("simulate.theta1".into(), section.sphere.theta1.to_string());
            report.config.insert(
                "simulate.noise-sd".into(),
                section.sphere.noise_sd.to_string(),
            );
        }
    }
    report
        .config
        .insert("simulate.seed".into(), section.seed.to_string());
    report
        .config
        .insert("simulate.rng-version".into(), rfpca::RNG_VERSION.into());

    let mut written = Vec::new();
    let t = Instant::now();
    emit(&mut report, &mut written, out_dir.join("sample.csv"), |p| {
        write_trajectory_sample(p, &sample)
    })?;
    report.add_output(&sidecar_path(&out_dir.join("sample.csv")))?;
    if let Some(indices) = outliers {
        let mut body = String::from("subject\n");
        for i in &indices {
            body.push_str(&format!("{i}\n"));
        }
        emit(
            &mut report,
            &mut written,
            out_dir.join("outliers.csv"),
            |p| crate::formats::write_atomic(p, body.as_bytes()),
        )?;
    }
    report.add_timing("write", t);
    finish(report, written, out_dir)
}

/// `rfpca breakdown`: contamination-response curves across outlier levels.
pub fn cmd_breakdown(
    out_dir: &Path,
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> CliResult<Vec<PathBuf>> {
    let config = load_config(config_path)?;
    let section = resolve_breakdown(config.breakdown, overrides);
    let mut report = start_report("breakdown", out_dir, config_path)?;

    let experiment = BreakdownConfig {
        network: section.network.clone(),
        scheme: section.scheme,
        levels: section.levels.clone(),
        reps: section.reps,
        reference_reps: section.reference_reps,
        methods: section.methods.clone(),
        component: section.component - 1,
        psi: section.psi,
        solver: section.solver.clone(),
        seed: section.seed,
    };
    let t = Instant::now();
    let curves = breakdown_experiment(&experiment)?;
    report.add_timing("experiment", t);

    for error in &curves.errors {
        let at = match error.level {
            Some(level) => format!("level {level}"),
            None => "reference".to_string(),
        };
        report.add_warning(format!(
            "{} {at} rep {} failed: {}",
            method_name(error.method),
            error.rep,
            error.message
        ));
    }
    config::echo_network(&mut report.config, "breakdown", &section.network);
    config::echo_scheme(&mut report.config, "breakdown", &section.scheme);
    config::echo_solver(&mut report.config, "breakdown", &section.solver);
    report.config.insert(
        "breakdown.levels".into(),
        config::join_f64(&section.levels),
    );
    report
        .config
        .insert("breakdown.reps".into(), section.reps.to_string());
    report.config.insert(
        "breakdown.reference-reps".into(),
        section.reference_reps.to_string(),
    );
    report.config.insert(
        "breakdown.methods".into(),
        config::join_methods(&section.methods),
    );
    report
        .config
        .insert("breakdown.component".into(), section.component.to_string());
    report
        .config
        .insert("breakdown.psi".into(), section.psi.to_string());
    report
        .config
        .insert("breakdown.seed".into(), section.seed.to_string());
    report
        .config
        .insert("breakdown.rng-version".into(), rfpca::RNG_VERSION.into());

    let mut written = Vec::new();
    let t = Instant::now();
    emit(&mut report, &mut written, out_dir.join("curves.csv"), |p| {
        write_curves(p, &curves)
    })?;
    report.add_timing("write", t);
    finish(report, written, out_dir)
}

/// `rfpca ingest`: bin event records into a Laplacian trajectory sample.
pub fn cmd_ingest(
    events: &Path,
    out_dir: &Path,
    config_path: Option<&Path>,
) -> CliResult<Vec<PathBuf>> {
    let config = load_config(config_path)?;
    let mut report = start_report("ingest", out_dir, config_path)?;
    report.add_input(events)?;

    let t = Instant::now();
    let outcome = ingest_events(events, &config.ingest)?;
    report.add_timing("ingest", t);

    for (name, count) in &outcome.unknown_nodes {
        report.add_warning(format!(
            "skipped {count} event(s) naming unknown node {name:?}"
        ));
    }
    if outcome.self_loops > 0 {
        report.add_warning(format!("skipped {} self-loop event(s)", outcome.self_loops));
    }
    if outcome.out_of_range > 0 {
        report.add_warning(format!(
            "skipped {} event(s) outside the configured date range",
            outcome.out_of_range
        ));
    }
    report
        .config
        .insert("ingest.nodes".into(), config.ingest.nodes.join(","));
    report.config.insert(
        "ingest.bin-minutes".into(),
        config.ingest.bin_minutes.to_string(),
    );
    let first = outcome.days.first().expect("panel has at least one day");
    let last = outcome.days.last().expect("panel has at least one day");
    report
        .config
        .insert("ingest.start-date".into(), first.to_string());
    report
        .config
        .insert("ingest.end-date".into(), last.to_string());

    let mut written = Vec::new();
    let t = Instant::now();
    emit(&mut report, &mut written, out_dir.join("sample.csv"), |p| {
        write_trajectory_sample(p, &outcome.sample)
    })?;
    report.add_output(&sidecar_path(&out_dir.join("sample.csv")))?;
    report.add_timing("write", t);
    finish(report, written, out_dir)
}

// ===== tests =====
