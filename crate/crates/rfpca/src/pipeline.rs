//! One-call estimation pipeline: object sample in, fitted components out.
//!
//! `fit_fpca` chains the stages the library exposes individually — center
//! trajectory, distance trajectories, covariance surface, eigendecomposition,
//! scores — and packages every intermediate so downstream consumers (the CLI,
//! robustness experiments) never re-derive them inconsistently.

use serde::{Deserialize, Serialize};

use crate::covariance::{
    classical_covariance, estimate_cutoff, pairwise_l2_distances, wpu_covariance,
    CovarianceSurface, CutoffSpec, DEFAULT_PSI,
};
use crate::error::{Error, Result};
use crate::metric::SolverConfig;
use crate::spectra::{eigendecompose, fpc_scores, select_components, EigenSystem, ScoreMatrix};
use crate::trajectory::{
    compute_center_trajectory, distance_trajectories, CenterKind, CenterTrajectory,
    DistanceTrajectories, ObjectTrajectorySample,
};

// ===== configuration =====

/// Which estimator family drives the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FpcaMethod {
    /// Median center, Winsorized pairwise-difference covariance (the robust
    /// default).
    Wpu,
    /// Median center, fully down-weighted (spatial-sign) pairwise covariance.
    SpatialSign,
    /// Median center, plain sample covariance of the same distance rows —
    /// isolates what robustifying only the covariance stage buys.
    Classical,
    /// Mean center, squared distances, plain sample covariance — the
    /// non-robust baseline pipeline.
    Dm,
}

impl FpcaMethod {
    /// Pointwise center the method uses.
    pub fn center_kind(self) -> CenterKind {
        match self {
            FpcaMethod::Wpu | FpcaMethod::SpatialSign | FpcaMethod::Classical => {
                CenterKind::Median
            }
            FpcaMethod::Dm => CenterKind::Mean,
        }
    }
}

/// Tuning knobs of [`fit_fpca`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcaParams {
    pub method: FpcaMethod,
    /// Winsorization quantile level (only the `Wpu` method reads it).
    pub psi: f64,
    /// Retained component count; `None` selects by explained variance.
    pub components: Option<usize>,
    /// Cumulative explained-variance threshold used when `components` is
    /// `None`.
    pub threshold: f64,
    /// Pointwise center solver settings.
    pub solver: SolverConfig,
}

impl Default for FpcaParams {
    fn default() -> Self {
        FpcaParams {
            method: FpcaMethod::Wpu,
            psi: DEFAULT_PSI,
            components: None,
            threshold: 0.9,
            solver: SolverConfig::default(),
        }
    }
}

impl FpcaParams {
    /// Default parameters for a given method.
    pub fn for_method(method: FpcaMethod) -> Self {
        FpcaParams {
            method,
            ..FpcaParams::default()
        }
    }
}

// ===== fit =====

/// Everything a fit produces, intermediates included.
#[derive(Debug, Clone)]
pub struct FpcaFit {
    pub center: CenterTrajectory,
    pub rows: DistanceTrajectories,
    /// Winsorization cutoff actually used (`None` for the classical methods).
    pub cutoff: Option<CutoffSpec>,
    pub surface: CovarianceSurface,
    /// Full spectrum (all T components); truncate for presentation.
    pub eigen: EigenSystem,
    /// Retained component count J.
    pub components: usize,
    /// n x J score matrix of the retained components.
    pub scores: ScoreMatrix,
    /// Non-fatal quality notes (degenerate surface, skipped pairs, clipped
    /// negative eigenvalues).
    pub warnings: Vec<String>,
}

impl FpcaFit {
    /// The spectrum truncated to the retained components.
    pub fn retained(&self) -> EigenSystem {
        self.eigen
            .truncate(self.components)
            .expect("components is validated against the spectrum length")
    }
}

/// Runs the full pipeline on an object sample.
pub fn fit_fpca(sample: &ObjectTrajectorySample, params: &FpcaParams) -> Result<FpcaFit> {
    if !(params.threshold > 0.0 && params.threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "explained-variance threshold must lie in (0, 1], got {}",
            params.threshold
        )));
    }
    let t_len = sample.grid().len();
    if let Some(j) = params.components {
        if j == 0 || j > t_len {
            return Err(Error::invalid(format!(
                "requested component count must lie in [1, {t_len}], got {j}"
            )));
        }
    }

    let center = compute_center_trajectory(sample, params.method.center_kind(), &params.solver)?;
    let rows = distance_trajectories(sample, &center)?;

    let (cutoff, surface) = match params.method {
        FpcaMethod::Wpu => {
            let pd = pairwise_l2_distances(&rows)?;
            let cutoff = estimate_cutoff(&pd, params.psi)?;
            let surface = wpu_covariance(&rows, &cutoff)?;
            (Some(cutoff), surface)
        }
        FpcaMethod::SpatialSign => {
            let cutoff = CutoffSpec::spatial_sign();
            let surface = wpu_covariance(&rows, &cutoff)?;
            (Some(cutoff), surface)
        }
        FpcaMethod::Classical | FpcaMethod::Dm => (None, classical_covariance(&rows)?),
    };

    let mut warnings = Vec::new();
    if surface.is_degenerate() {
        warnings.push(
            "covariance surface is degenerate (all distance rows coincide); \
             the spectrum is identically zero"
                .to_string(),
        );
    }
    if surface.skipped_pairs() > 0 {
        warnings.push(format!(
            "{} zero-distance pair(s) were skipped by the spatial-sign weight",
            surface.skipped_pairs()
        ));
    }

    let eigen = eigendecompose(&surface, t_len, Some(&rows))?;
    if eigen.clipped() > 0 {
        warnings.push(format!(
            "{} negative eigenvalue(s) were clipped to zero",
            eigen.clipped()
        ));
    }

    let components = match params.components {
        Some(j) => j,
        None => select_components(&eigen, params.threshold),
    };
    let scores = fpc_scores(&rows, &eigen.truncate(components)?)?;

    Ok(FpcaFit {
        center,
        rows,
        cutoff,
        surface,
        eigen,
        components,
        scores,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::SurfaceKind;
    use crate::simgen::{gen_network_sample, NetworkSimConfig};
    use crate::trajectory::DistanceKind;

    fn small_sample() -> ObjectTrajectorySample {
        let cfg = NetworkSimConfig {
            nodes: 8,
            subjects_per_group: 4,
            t_len: 6,
            ..NetworkSimConfig::default()
        };
        gen_network_sample(&cfg, 51).unwrap()
    }

    #[test]
    fn wpu_fit_produces_consistent_shapes() {
        let sample = small_sample();
        let fit = fit_fpca(&sample, &FpcaParams::default()).unwrap();
        let t_len = sample.grid().len();
        assert_eq!(fit.eigen.len(), t_len);
        assert!(fit.components >= 1 && fit.components <= t_len);
        assert_eq!(fit.scores.len(), sample.len());
        assert_eq!(fit.scores.components(), fit.components);
        assert_eq!(fit.surface.kind(), SurfaceKind::Wpu);
        assert_eq!(fit.rows.kind(), DistanceKind::MedianDistance);
        assert!(fit.cutoff.is_some());
        let retained = fit.retained();
        assert_eq!(retained.len(), fit.components);
        // Explained-variance selection actually reaches the threshold.
        let cum: f64 = retained.explained().iter().sum();
        assert!(cum >= 0.9 - 1e-12, "cumulative explained {cum}");
    }

    #[test]
    fn methods_choose_the_documented_center_and_surface() {
        let sample = small_sample();
        let cases = [
            (FpcaMethod::Wpu, CenterKind::Median, SurfaceKind::Wpu),
            (
                FpcaMethod::SpatialSign,
                CenterKind::Median,
                SurfaceKind::SpatialSign,
            ),
            (
                FpcaMethod::Classical,
                CenterKind::Median,
                SurfaceKind::Classical,
            ),
            (FpcaMethod::Dm, CenterKind::Mean, SurfaceKind::Dm),
        ];
        for (method, center, surface) in cases {
            let fit = fit_fpca(&sample, &FpcaParams::for_method(method)).unwrap();
            assert_eq!(fit.center.kind(), center, "{method:?}");
            assert_eq!(fit.surface.kind(), surface, "{method:?}");
        }
    }

    #[test]
    fn explicit_component_count_is_respected() {
        let sample = small_sample();
        let params = FpcaParams {
            components: Some(3),
            ..FpcaParams::default()
        };
        let fit = fit_fpca(&sample, &params).unwrap();
        assert_eq!(fit.components, 3);
        assert_eq!(fit.scores.components(), 3);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let sample = small_sample();
        let mut params = FpcaParams::default();
        params.threshold = 0.0;
        assert!(fit_fpca(&sample, &params).is_err());
        let mut params = FpcaParams::default();
        params.components = Some(0);
        assert!(fit_fpca(&sample, &params).is_err());
        let mut params = FpcaParams::default();
        params.components = Some(sample.grid().len() + 1);
        assert!(fit_fpca(&sample, &params).is_err());
        let mut params = FpcaParams::default();
        params.psi = 1.5;
        assert!(fit_fpca(&sample, &params).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let sample = small_sample();
        let a = fit_fpca(&sample, &FpcaParams::default()).unwrap();
        let b = fit_fpca(&sample, &FpcaParams::default()).unwrap();
        assert_eq!(a.eigen.eigenvalues(), b.eigen.eigenvalues());
        assert_eq!(a.scores.values(), b.scores.values());
        assert_eq!(a.surface.values(), b.surface.values());
    }

    #[test]
    fn truncate_slices_cleanly() {
        let sample = small_sample();
        let fit = fit_fpca(&sample, &FpcaParams::default()).unwrap();
        let cut = fit.eigen.truncate(2).unwrap();
        assert_eq!(cut.len(), 2);
        assert_eq!(cut.eigenvalues(), &fit.eigen.eigenvalues()[..2]);
        assert_eq!(cut.gaps(), &fit.eigen.gaps()[..2]);
        assert_eq!(cut.explained(), &fit.eigen.explained()[..2]);
        assert_eq!(cut.eigenfunction(1), fit.eigen.eigenfunction(1));
        assert_eq!(cut.trace(), fit.eigen.trace());
        assert!(fit.eigen.truncate(0).is_err());
        assert!(fit.eigen.truncate(fit.eigen.len() + 1).is_err());
    }
}
