//! Robust functional principal component analysis for time-varying random
//! objects in metric spaces.
//!
//! The pipeline turns a sample of object-valued trajectories (graph
//! Laplacians, unit-sphere points, or plain vectors) into ordinary
//! functional data and analyzes it robustly:
//!
//! 1. a pointwise Fréchet **median** trajectory centers the sample
//!    ([`trajectory`]),
//! 2. each subject is reduced to its **distance trajectory** from that
//!    center,
//! 3. a **Winsorized pairwise-difference autocovariance** bounds the leverage
//!    of outlying subjects ([`covariance`]),
//! 4. its eigenfunctions, eigenvalues, and scores summarize the sample
//!    ([`spectra`]),
//! 5. influence functions, gross-error sensitivity, breakdown points, and
//!    contamination experiments quantify the robustness gain over non-robust
//!    baselines ([`robustness`], [`simgen`]).
//!
//! The crate is deterministic by construction: random number streams are
//! seeded explicitly, and the `parallel` feature (on by default) changes
//! wall-clock time but never results — reductions are chunked and folded in
//! a fixed order, so parallel and sequential builds agree bitwise.

pub mod covariance;
pub mod error;
pub mod grid;
pub mod metric;
pub mod pipeline;
pub mod robustness;
pub mod simgen;
pub mod spectra;
pub mod trajectory;

pub use covariance::{
    classical_covariance, estimate_cutoff, oracle_wpu_covariance, pairwise_l2_distances,
    winsor_radius, wpu_covariance, CovarianceSurface, CutoffSpec, PairwiseDistanceSet,
    SurfaceKind, DEFAULT_PSI,
};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use pipeline::{fit_fpca, FpcaFit, FpcaMethod, FpcaParams};
pub use robustness::{
    bias_and_mise, breakdown_experiment, derive_seed, gross_error_sensitivity,
    influence_from_rows, influence_function, mea, monte_carlo_reference, theoretical_breakdown,
    BreakdownConfig, BreakdownCurves, CellError, InfluenceResult, MethodCurve, RobustnessMetrics,
};
pub use simgen::{
    contaminate, gen_network_sample, gen_sphere_sample, ContaminationScheme, ContaminationSpec,
    NetworkSimConfig, SphereSimConfig, RNG_VERSION,
};
pub use spectra::{
    eigendecompose, explained_variance, fpc_scores, mercer_reconstruct, select_components,
    EigenSystem, ScoreMatrix,
};
pub use metric::{
    frechet_mean, frechet_median, frechet_median_from, frechet_median_with_trace, validate_point,
    GraphLaplacian,
    MetricSpace, Point, SolverConfig, SpherePoint, ValidityReport,
};
pub use trajectory::{
    compute_center_trajectory, compute_center_trajectory_cold_start, distance_trajectories,
    l2_norm, CenterKind, CenterTrajectory, DistanceKind, DistanceTrajectories,
    ObjectTrajectorySample,
};
