//! Robustness quantification: empirical influence functions of the
//! eigenfunction estimates, gross-error sensitivity, breakdown points, and
//! Monte Carlo contamination experiments comparing estimator families.
//!
//! Population expectations are replaced with sample averages throughout (the
//! empirical plug-in); the reference eigenfunction of an experiment is the
//! sign-aligned, re-normalized Monte Carlo average over uncontaminated
//! replications.

use serde::{Deserialize, Serialize};

use crate::covariance::{winsor_radius, CutoffSpec, DEFAULT_PSI};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::metric::{Point, SolverConfig};
use crate::pipeline::{fit_fpca, FpcaMethod, FpcaParams};
use crate::simgen::{contaminate, gen_network_sample, ContaminationScheme, ContaminationSpec,
    NetworkSimConfig};
use crate::spectra::{sign_rule_in_place, EigenSystem};
use crate::trajectory::{distance_trajectories, CenterTrajectory, DistanceTrajectories,
    ObjectTrajectorySample};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Eigenvalues closer than this count as tied, making eigenfunction
/// perturbation ill-conditioned.
pub const EIGEN_TIE_TOL: f64 = 1e-12;

// ===== influence functions =====

/// Empirical influence function of one eigenfunction estimate at a
/// contamination point.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceResult {
    /// Component the influence refers to (0-based among retained).
    pub component_index: usize,
    /// The influence function on the grid.
    pub if_values: Vec<f64>,
    /// Quadrature L2 norm of `if_values`.
    pub if_norm: f64,
}

impl InfluenceResult {
    fn zero(component_index: usize, t_len: usize) -> Self {
        InfluenceResult {
            component_index,
            if_values: vec![0.0; t_len],
            if_norm: 0.0,
        }
    }
}

fn check_tie_free(eigenvalues: &[f64]) -> Result<()> {
    for pair in eigenvalues.windows(2) {
        if (pair[0] - pair[1]).abs() <= EIGEN_TIE_TOL {
            return Err(Error::ill_conditioned(format!(
                "eigenvalue tie within {EIGEN_TIE_TOL:.0e} among retained components \
                 ({} vs {})",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

/// Influence of a contamination point on eigenfunction `k`, computed from
/// distance rows directly.
///
/// The influence function is
/// `2 Σ_{j≠k} (λ_k − λ_j)^{-1} Ê[ζ_j ζ_k] φ_j` with
/// `ζ_j = ⟨V_X − V_z, φ_j⟩ ξ(‖V_X − V_z‖)`, the expectation running over the
/// sample rows and the sum over the first `j_len` components of `es`. A
/// contamination point sitting exactly at the center (`z_row` identically
/// zero) returns the zero function: the influence is stated piecewise, and
/// the off-center formula does not continuously vanish at the center.
pub fn influence_from_rows(
    rows: &DistanceTrajectories,
    es: &EigenSystem,
    cutoff: &CutoffSpec,
    z_row: &[f64],
    k: usize,
    j_len: usize,
) -> Result<InfluenceResult> {
    let grid = es.grid();
    let t_len = grid.len();
    if rows.grid() != grid {
        return Err(Error::invalid(
            "distance rows and eigensystem live on different grids",
        ));
    }
    if j_len == 0 || j_len > es.len() {
        return Err(Error::invalid(format!(
            "retained component count must lie in [1, {}], got {j_len}",
            es.len()
        )));
    }
    if k >= j_len {
        return Err(Error::invalid(format!(
            "component index {k} outside the retained range [0, {j_len})"
        )));
    }
    if z_row.len() != t_len {
        return Err(Error::DimensionMismatch {
            expected: t_len,
            actual: z_row.len(),
            context: "contamination row vs grid",
        });
    }
    if z_row.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(
            "contamination row must be finite and non-negative",
        ));
    }
    let eigenvalues = &es.eigenvalues()[..j_len];
    check_tie_free(eigenvalues)?;
    if z_row.iter().all(|&v| v == 0.0) {
        // The contamination point is the center itself.
        return Ok(InfluenceResult::zero(k, t_len));
    }
    if j_len == 1 {
        // No j ≠ k terms.
        return Ok(InfluenceResult::zero(k, t_len));
    }

    let n = rows.len();
    // moments[j] = empirical E[zeta_j zeta_k].
    let mut moments = vec![0.0; j_len];
    let mut u = vec![0.0; t_len];
    let mut proj = vec![0.0; j_len];
    for i in 0..n {
        let row = rows.row(i);
        for t in 0..t_len {
            u[t] = row[t] - z_row[t];
        }
        let r = grid.l2_norm(&u);
        // A zero radius under the spatial-sign cutoff has no defined weight;
        // the difference is identically zero there, so the pair contributes
        // nothing either way.
        let Some(xi) = winsor_radius(r, cutoff.q_hat) else {
            continue;
        };
        for (j, p) in proj.iter_mut().enumerate() {
            *p = grid.inner(&u, es.eigenfunction(j));
        }
        let weight = xi * xi * proj[k];
        for j in 0..j_len {
            moments[j] += weight * proj[j];
        }
    }
    for m in &mut moments {
        *m /= n as f64;
    }

    let mut if_values = vec![0.0; t_len];
    for j in 0..j_len {
        if j == k {
            continue;
        }
        let coefficient = 2.0 * moments[j] / (eigenvalues[k] - eigenvalues[j]);
        let phi = es.eigenfunction(j);
        for t in 0..t_len {
            if_values[t] += coefficient * phi[t];
        }
    }
    let if_norm = grid.l2_norm(&if_values);
    Ok(InfluenceResult {
        component_index: k,
        if_values,
        if_norm,
    })
}

/// Influence of contaminating the sample with object trajectory `z` on
/// eigenfunction `k`: reduces `z` to its distance row from the center and
/// delegates to [`influence_from_rows`].
pub fn influence_function(
    sample: &ObjectTrajectorySample,
    center: &CenterTrajectory,
    es: &EigenSystem,
    z: &[Point],
    k: usize,
    cutoff: &CutoffSpec,
    j_len: usize,
) -> Result<InfluenceResult> {
    let grid = sample.grid();
    if z.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            actual: z.len(),
            context: "contamination trajectory vs grid",
        });
    }
    let space = sample.space();
    let mut z_row = Vec::with_capacity(z.len());
    for (point, center_point) in z.iter().zip(center.centers()) {
        space.check_point(point)?;
        z_row.push(space.distance(point, center_point)?);
    }
    let rows = distance_trajectories(sample, center)?;
    influence_from_rows(&rows, es, cutoff, &z_row, k, j_len)
}

// ===== sensitivity and breakdown =====

/// Gross-error sensitivity bound for eigenfunction `k`:
/// `{p1 + q (1 − p1)} / c_k` with `c_k = min(λ_k, min_{j≠k} |λ_k − λ_j|)`
/// over the retained components. `p1` is the probability that a contamination
/// difference stays inside the Winsorization radius.
///
/// The bound is stated for distance trajectories normalized to diameter at
/// most 1; at larger scales it is not scale-consistent (the influence norm is
/// scale-free while this bound is not).
pub fn gross_error_sensitivity(es: &EigenSystem, k: usize, q: f64, p1: f64) -> Result<f64> {
    if k >= es.len() {
        return Err(Error::invalid(format!(
            "component index {k} outside the retained range [0, {})",
            es.len()
        )));
    }
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::invalid(format!(
            "probability p1 must lie in [0, 1], got {p1}"
        )));
    }
    if !q.is_finite() || q < 0.0 {
        return Err(Error::invalid(format!(
            "cutoff value must be finite and non-negative, got {q}"
        )));
    }
    let eigenvalues = es.eigenvalues();
    let mut c_k = eigenvalues[k];
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        if j != k {
            c_k = c_k.min((eigenvalues[k] - lambda).abs());
        }
    }
    if c_k <= EIGEN_TIE_TOL {
        return Err(Error::ill_conditioned(format!(
            "sensitivity denominator c_{k} = {c_k:.3e} is numerically zero"
        )));
    }
    Ok((p1 + q * (1.0 - p1)) / c_k)
}

/// Upper breakdown point of the Winsorized estimator at quantile level ψ:
/// `(1 − ψ)^{1/2}`. Strictly decreasing in ψ; accepts the closed interval
/// `[0, 1]` so both endpoints evaluate.
pub fn theoretical_breakdown(psi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&psi) {
        return Err(Error::invalid(format!(
            "quantile level must lie in [0, 1], got {psi}"
        )));
    }
    Ok((1.0 - psi).sqrt())
}

// ===== replication metrics =====

/// Accuracy summary of eigenfunction estimates across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessMetrics {
    /// Mean absolute angle to the reference, in [0, π/2].
    pub mea: f64,
    /// Pointwise bias of the sign-aligned estimates.
    pub bias: Vec<f64>,
    /// Mean integrated squared error of the sign-aligned estimates.
    pub mise: f64,
    /// Replication count the averages ran over.
    pub reps: usize,
}

fn check_estimates(grid: &TimeGrid, estimates: &[Vec<f64>], reference: &[f64]) -> Result<()> {
    let t_len = grid.len();
    if estimates.is_empty() {
        return Err(Error::InsufficientSample {
            required: 1,
            actual: 0,
        });
    }
    if reference.len() != t_len {
        return Err(Error::DimensionMismatch {
            expected: t_len,
            actual: reference.len(),
            context: "reference eigenfunction vs grid",
        });
    }
    for (r, estimate) in estimates.iter().enumerate() {
        if estimate.len() != t_len {
            return Err(Error::DimensionMismatch {
                expected: t_len,
                actual: estimate.len(),
                context: "estimate eigenfunction vs grid",
            });
        }
        if estimate.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("estimate {r} has non-finite values")));
        }
    }
    if reference.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("reference has non-finite values"));
    }
    let norm = grid.l2_norm(reference);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!(
            "reference eigenfunction must be quadrature-normalized (norm {norm})"
        )));
    }
    Ok(())
}

/// Mean absolute angle between estimates and a normalized reference:
/// `(1/R) Σ_r arccos(|⟨φ̂_r, φ̄⟩|)`, inner products by quadrature and clamped
/// into [-1, 1] before the arccos. Sign flips of any estimate or of the
/// reference leave the value unchanged.
pub fn mea(grid: &TimeGrid, estimates: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    check_estimates(grid, estimates, reference)?;
    let total: f64 = estimates
        .iter()
        .map(|estimate| grid.inner(estimate, reference).abs().clamp(0.0, 1.0).acos())
        .sum();
    Ok(total / estimates.len() as f64)
}

/// Pointwise bias and mean integrated squared error of sign-aligned
/// estimates: each estimate is flipped so its inner product with the
/// reference is non-negative, then `bias(t) = mean_r φ̂_r(t) − φ̄(t)` and
/// `MISE = mean_r ‖φ̂_r − φ̄‖²`.
pub fn bias_and_mise(
    grid: &TimeGrid,
    estimates: &[Vec<f64>],
    reference: &[f64],
) -> Result<(Vec<f64>, f64)> {
    check_estimates(grid, estimates, reference)?;
    let t_len = grid.len();
    let r_len = estimates.len() as f64;
    let mut mean = vec![0.0; t_len];
    let mut mise = 0.0;
    let mut aligned = vec![0.0; t_len];
    for estimate in estimates {
        let sign = if grid.inner(estimate, reference) < 0.0 {
            -1.0
        } else {
            1.0
        };
        for t in 0..t_len {
            aligned[t] = sign * estimate[t];
            mean[t] += aligned[t];
        }
        let residual: Vec<f64> = aligned
            .iter()
            .zip(reference.iter())
            .map(|(a, b)| a - b)
            .collect();
        let norm = grid.l2_norm(&residual);
        mise += norm * norm;
    }
    let bias: Vec<f64> = mean
        .iter()
        .zip(reference.iter())
        .map(|(m, r)| m / r_len - r)
        .collect();
    Ok((bias, mise / r_len))
}

/// Monte Carlo reference eigenfunction: sign-aligns every estimate to the
/// first, averages, re-normalizes, and applies the crate's sign convention.
/// Errors when the aligned estimates average out to (numerically) zero.
pub fn monte_carlo_reference(grid: &TimeGrid, estimates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let t_len = grid.len();
    if estimates.is_empty() {
        return Err(Error::InsufficientSample {
            required: 1,
            actual: 0,
        });
    }
    for estimate in estimates {
        if estimate.len() != t_len {
            return Err(Error::DimensionMismatch {
                expected: t_len,
                actual: estimate.len(),
                context: "estimate eigenfunction vs grid",
            });
        }
    }
    let first = &estimates[0];
    let mut mean = vec![0.0; t_len];
    for estimate in estimates {
        let sign = if grid.inner(estimate, first) < 0.0 {
            -1.0
        } else {
            1.0
        };
        for t in 0..t_len {
            mean[t] += sign * estimate[t];
        }
    }
    for m in &mut mean {
        *m /= estimates.len() as f64;
    }
    let norm = grid.l2_norm(&mean);
    if norm <= 1e-8 {
        return Err(Error::ill_conditioned(
            "sign-aligned estimates average to zero; no reference direction",
        ));
    }
    for m in &mut mean {
        *m /= norm;
    }
    sign_rule_in_place(&mut mean, grid.weights());
    Ok(mean)
}

// ===== breakdown experiment =====

/// Configuration of a contamination experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownConfig {
    pub network: NetworkSimConfig,
    pub scheme: ContaminationScheme,
    /// Contamination fractions, each in [0, 1).
    pub levels: Vec<f64>,
    /// Contaminated replications per level.
    pub reps: usize,
    /// Uncontaminated replications building each method's reference.
    pub reference_reps: usize,
    pub methods: Vec<FpcaMethod>,
    /// Eigenfunction under study (0-based).
    pub component: usize,
    /// Winsorization quantile level for the WPU method.
    pub psi: f64,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for BreakdownConfig {
    fn default() -> Self {
        BreakdownConfig {
            network: NetworkSimConfig::default(),
            scheme: ContaminationScheme::ShiftScale {
                shift: 0.5,
                scale: 5.0,
            },
            levels: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
            reps: 10,
            reference_reps: 10,
            methods: vec![
                FpcaMethod::Wpu,
                FpcaMethod::SpatialSign,
                FpcaMethod::Classical,
                FpcaMethod::Dm,
            ],
            component: 0,
            psi: DEFAULT_PSI,
            solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

/// One failed cell of the experiment, recorded instead of aborting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub method: FpcaMethod,
    /// Contamination level, or `None` for a reference replication.
    pub level: Option<f64>,
    pub rep: usize,
    pub message: String,
}

/// Per-method results: the Monte Carlo reference and one metrics entry per
/// contamination level (`None` when every replication of a cell failed or no
/// reference could be built).
#[derive(Debug, Clone, PartialEq)]
pub struct MethodCurve {
    pub method: FpcaMethod,
    pub reference: Option<Vec<f64>>,
    pub metrics: Vec<Option<RobustnessMetrics>>,
}

/// Full experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownCurves {
    pub grid: TimeGrid,
    pub levels: Vec<f64>,
    pub curves: Vec<MethodCurve>,
    pub errors: Vec<CellError>,
}

/// SplitMix64 finalizer (public-domain constant mix by Steele, Lea, Flood).
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Derives an independent stream seed from (master, purpose, index). Each
/// argument passes through a SplitMix64 finalizer, so distinct purposes and
/// indices decorrelate even for small consecutive values.
pub fn derive_seed(master: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(purpose)) ^ splitmix64(index))
}

const SEED_PURPOSE_REFERENCE: u64 = 1;
const SEED_PURPOSE_BASE_SAMPLE: u64 = 2;
const SEED_PURPOSE_CONTAMINATION: u64 = 3;

fn fit_component(
    sample: &ObjectTrajectorySample,
    method: FpcaMethod,
    config: &BreakdownConfig,
) -> std::result::Result<Vec<f64>, String> {
    let params = FpcaParams {
        method,
        psi: config.psi,
        components: Some(config.component + 1),
        threshold: 0.9,
        solver: config.solver,
    };
    match fit_fpca(sample, &params) {
        Ok(fit) => Ok(fit.eigen.eigenfunction(config.component).to_vec()),
        Err(e) => Err(e.to_string()),
    }
}

/// One replication's estimates, one entry per configured method.
type CellOutcome = Vec<std::result::Result<Vec<f64>, String>>;

fn run_reference_rep(config: &BreakdownConfig, rep: usize) -> CellOutcome {
    let seed = derive_seed(config.seed, SEED_PURPOSE_REFERENCE, rep as u64);
    match gen_network_sample(&config.network, seed) {
        Ok(sample) => config
            .methods
            .iter()
            .map(|&m| fit_component(&sample, m, config))
            .collect(),
        Err(e) => vec![Err(e.to_string()); config.methods.len()],
    }
}

fn run_contaminated_cell(config: &BreakdownConfig, level_index: usize, rep: usize) -> CellOutcome {
    let base_seed = derive_seed(config.seed, SEED_PURPOSE_BASE_SAMPLE, rep as u64);
    let cell_index = (level_index * config.reps + rep) as u64;
    let contamination_seed = derive_seed(config.seed, SEED_PURPOSE_CONTAMINATION, cell_index);
    let spec = ContaminationSpec {
        fraction: config.levels[level_index],
        scheme: config.scheme,
    };
    let contaminated = gen_network_sample(&config.network, base_seed)
        .and_then(|base| contaminate(&config.network, &base, &spec, contamination_seed))
        .map(|(sample, _)| sample);
    match contaminated {
        Ok(sample) => config
            .methods
            .iter()
            .map(|&m| fit_component(&sample, m, config))
            .collect(),
        Err(e) => vec![Err(e.to_string()); config.methods.len()],
    }
}

/// Runs the full contamination experiment.
///
/// For every replication one base sample is generated and reused across all
/// contamination levels (a paired design: level effects are not confounded
/// with sampling noise), then contaminated and fit with every configured
/// method. Each method is scored against its own uncontaminated Monte Carlo
/// reference. Replications run in parallel (with the `parallel` feature) but
/// are aggregated in a fixed order, so results are bitwise reproducible
/// either way. Per-cell failures are recorded in `errors` and excluded from
/// the averages rather than aborting the experiment.
pub fn breakdown_experiment(config: &BreakdownConfig) -> Result<BreakdownCurves> {
    if config.reps == 0 || config.reference_reps == 0 {
        return Err(Error::invalid("replication counts must be positive"));
    }
    if config.methods.is_empty() {
        return Err(Error::invalid("at least one method is required"));
    }
    if config.levels.is_empty() {
        return Err(Error::invalid("at least one contamination level is required"));
    }
    for &level in &config.levels {
        if !(0.0..1.0).contains(&level) {
            return Err(Error::invalid(format!(
                "contamination level must lie in [0, 1), got {level}"
            )));
        }
    }
    if config.component >= config.network.t_len {
        return Err(Error::invalid(format!(
            "component index {} outside the grid-limited spectrum [0, {})",
            config.component, config.network.t_len
        )));
    }

    let grid = TimeGrid::uniform(config.network.t_len)?;
    let mut errors = Vec::new();

    // Reference replications, in parallel, collected in rep order.
    let reference_outcomes: Vec<CellOutcome> = {
        let run = |rep: usize| run_reference_rep(config, rep);
        #[cfg(feature = "parallel")]
        {
            (0..config.reference_reps).into_par_iter().map(run).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..config.reference_reps).map(run).collect()
        }
    };
    let mut references: Vec<Option<Vec<f64>>> = Vec::with_capacity(config.methods.len());
    for (mi, &method) in config.methods.iter().enumerate() {
        let mut estimates = Vec::new();
        for (rep, outcome) in reference_outcomes.iter().enumerate() {
            match &outcome[mi] {
                Ok(estimate) => estimates.push(estimate.clone()),
                Err(message) => errors.push(CellError {
                    method,
                    level: None,
                    rep,
                    message: message.clone(),
                }),
            }
        }
        if estimates.is_empty() {
            references.push(None);
        } else {
            match monte_carlo_reference(&grid, &estimates) {
                Ok(reference) => references.push(Some(reference)),
                Err(e) => {
                    errors.push(CellError {
                        method,
                        level: None,
                        rep: 0,
                        message: format!("reference construction failed: {e}"),
                    });
                    references.push(None);
                }
            }
        }
    }

    // Contaminated cells (level-major, rep-minor), in parallel, collected in
    // task order.
    let tasks: Vec<(usize, usize)> = (0..config.levels.len())
        .flat_map(|li| (0..config.reps).map(move |rep| (li, rep)))
        .collect();
    let cell_outcomes: Vec<CellOutcome> = {
        let run = |&(li, rep): &(usize, usize)| run_contaminated_cell(config, li, rep);
        #[cfg(feature = "parallel")]
        {
            tasks.par_iter().map(run).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            tasks.iter().map(run).collect()
        }
    };

    let mut curves: Vec<MethodCurve> = config
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| MethodCurve {
            method,
            reference: references[mi].clone(),
            metrics: Vec::with_capacity(config.levels.len()),
        })
        .collect();
    for (li, &level) in config.levels.iter().enumerate() {
        for (mi, &method) in config.methods.iter().enumerate() {
            let mut estimates = Vec::new();
            for rep in 0..config.reps {
                let outcome = &cell_outcomes[li * config.reps + rep];
                match &outcome[mi] {
                    Ok(estimate) => estimates.push(estimate.clone()),
                    Err(message) => errors.push(CellError {
                        method,
                        level: Some(level),
                        rep,
                        message: message.clone(),
                    }),
                }
            }
            let metrics = match (&references[mi], estimates.is_empty()) {
                (Some(reference), false) => {
                    let mea_value = mea(&grid, &estimates, reference)?;
                    let (bias, mise) = bias_and_mise(&grid, &estimates, reference)?;
                    Some(RobustnessMetrics {
                        mea: mea_value,
                        bias,
                        mise,
                        reps: estimates.len(),
                    })
                }
                _ => None,
            };
            curves[mi].metrics.push(metrics);
        }
    }

    Ok(BreakdownCurves {
        grid,
        levels: config.levels.clone(),
        curves,
        errors,
    })
}
