//! Autocovariance estimators for distance trajectories: the classical
//! moment estimator and the Winsorized pairwise U-statistic (WPU) family,
//! plus the data-driven Winsorization cutoff.
//!
//! The WPU estimator averages Winsorized outer products of pairwise row
//! differences,
//!
//! ```text
//! C(s,t) = 2/(n(n-1)) * sum_{j<k} xi^2(d_jk) {V_j(s)-V_k(s)}{V_j(t)-V_k(t)}
//! ```
//!
//! where `d_jk` is the L2 distance between rows j and k and `xi` caps the
//! leverage of distant pairs at the cutoff `q`. Setting `q = 0` yields the
//! spatial-sign variant (each difference normalized to unit length); the
//! `+inf` sentinel disables Winsorization entirely.
//!
//! # Determinism
//!
//! Pair sums are accumulated in chunks of [`PAIR_CHUNK`] consecutive pairs in
//! lexicographic (j < k) order. Chunk partial sums are computed independently
//! (in parallel when the `parallel` feature is on) and then folded strictly
//! in ascending chunk order, so parallel and sequential builds produce
//! bitwise-identical surfaces.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::trajectory::{DistanceKind, DistanceTrajectories};

/// Pairs per accumulation chunk. Small enough that a partial surface stays
/// cache-resident, large enough to amortize scheduling.
pub const PAIR_CHUNK: usize = 256;

// ===== pairwise distances =====

/// All n(n-1)/2 pairwise L2 distances between distance-trajectory rows,
/// stored in lexicographic (i < j) order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistanceSet {
    n: usize,
    dist: Vec<f64>,
}

impl PairwiseDistanceSet {
    /// Wraps precomputed distances; `dist` must hold exactly n(n-1)/2
    /// finite, non-negative values in lexicographic pair order.
    pub fn from_distances(n: usize, dist: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientSample {
                required: 2,
                actual: n,
            });
        }
        let expected = n * (n - 1) / 2;
        if dist.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: dist.len(),
                context: "pairwise distance count vs n(n-1)/2",
            });
        }
        if dist.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid(
                "pairwise distances must be finite and non-negative",
            ));
        }
        Ok(PairwiseDistanceSet { n, dist })
    }

    /// Subject count n.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Pair count N = n(n-1)/2.
    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    /// Distances in lexicographic pair order.
    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    /// Distance between subjects `i` and `j` (any order, `i != j`).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.dist[pair_index(a, b, self.n)]
    }
}

/// Lexicographic index of pair (i, j) with i < j among n subjects.
fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Pair (i, j) with i < j at lexicographic position `index`.
fn pair_at(index: usize, n: usize) -> (usize, usize) {
    // Walk rows; the row lengths are n-1, n-2, ... so this is O(n), which is
    // negligible next to the O(T^2) work done per pair.
    let mut rem = index;
    for i in 0..n - 1 {
        let row_len = n - 1 - i;
        if rem < row_len {
            return (i, i + 1 + rem);
        }
        rem -= row_len;
    }
    unreachable!("pair index out of range");
}

fn weighted_l2_distance(grid: &TimeGrid, a: &[f64], b: &[f64]) -> f64 {
    let w = grid.weights();
    let mut acc = 0.0;
    for t in 0..w.len() {
        let d = a[t] - b[t];
        acc += w[t] * d * d;
    }
    acc.sqrt()
}

/// L2 distances between all row pairs. Each distance is an independent
/// computation written to its own slot, so the parallel and sequential paths
/// are trivially bitwise identical.
pub fn pairwise_l2_distances(rows: &DistanceTrajectories) -> Result<PairwiseDistanceSet> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientSample {
            required: 2,
            actual: n,
        });
    }
    let total = n * (n - 1) / 2;
    let grid = rows.grid();
    let compute = |index: usize| {
        let (i, j) = pair_at(index, n);
        weighted_l2_distance(grid, rows.row(i), rows.row(j))
    };
    #[cfg(feature = "parallel")]
    let dist: Vec<f64> = (0..total).into_par_iter().map(compute).collect();
    #[cfg(not(feature = "parallel"))]
    let dist: Vec<f64> = (0..total).map(compute).collect();
    PairwiseDistanceSet::from_distances(n, dist)
}

// ===== cutoff =====

/// Winsorization cutoff: the quantile level it was estimated at and the
/// cutoff value itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    /// Quantile level in (0, 1] for estimated cutoffs; 0.0 for the
    /// spatial-sign variant, where no quantile is involved.
    pub psi: f64,
    /// Cutoff value: a pairwise distance for estimated cutoffs, 0 for
    /// spatial sign, `f64::INFINITY` to disable Winsorization.
    pub q_hat: f64,
}

impl CutoffSpec {
    /// The q = 0 spatial-sign variant: pair differences are normalized to
    /// unit L2 length.
    pub fn spatial_sign() -> Self {
        CutoffSpec {
            psi: 0.0,
            q_hat: 0.0,
        }
    }

    /// Sentinel disabling Winsorization (xi = 1 everywhere); used to compare
    /// against the raw pairwise U-statistic.
    pub fn unbounded() -> Self {
        CutoffSpec {
            psi: 1.0,
            q_hat: f64::INFINITY,
        }
    }
}

/// Default quantile level for the cutoff; gives a theoretical breakdown
/// point of (1 - 0.84)^(1/2) = 0.4.
pub const DEFAULT_PSI: f64 = 0.84;

/// Estimates the cutoff as the m-th smallest pairwise distance with
/// m = ceil(psi * N) clamped to [1, N].
///
/// The product `psi * N` is nudged down by 1e-9 before the ceiling so that
/// values which are integers in exact arithmetic but land epsilon above in
/// floating point (e.g. 0.84 * 300 = 252.00000000000003) do not get bumped
/// to the next order statistic.
pub fn estimate_cutoff(pd: &PairwiseDistanceSet, psi: f64) -> Result<CutoffSpec> {
    if !(psi > 0.0 && psi <= 1.0) {
        return Err(Error::invalid(format!(
            "cutoff quantile level must lie in (0, 1], got {psi}"
        )));
    }
    let total = pd.len();
    let m = ((psi * total as f64) - 1e-9).ceil() as usize;
    let m = m.clamp(1, total);
    let mut sorted = pd.distances().to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(CutoffSpec {
        psi,
        q_hat: sorted[m - 1],
    })
}

/// Winsorized radius xi(r): 1 for r <= q, q/r beyond the cutoff, so that
/// xi(r) * r never exceeds q. In the spatial-sign limit q = 0 the weight is
/// 1/r (normalizing pair differences to unit length); the 0/0 pair is
/// undefined and signalled as `None` so callers can skip it.
pub fn winsor_radius(r: f64, q: f64) -> Option<f64> {
    debug_assert!(r >= 0.0 && q >= 0.0, "radii and cutoffs are non-negative");
    if q == 0.0 {
        if r == 0.0 {
            None
        } else {
            Some(1.0 / r)
        }
    } else if r <= q {
        Some(1.0)
    } else {
        Some(q / r)
    }
}

// ===== covariance surfaces =====

/// Which estimator produced a covariance surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    /// Moment estimator of median-distance rows.
    Classical,
    /// Winsorized pairwise U-statistic with q > 0.
    Wpu,
    /// Pairwise U-statistic with q = 0 (unit-normalized differences).
    SpatialSign,
    /// Moment estimator of squared-distance-from-mean rows (the non-robust
    /// baseline).
    Dm,
}

/// T x T covariance surface on a quadrature grid.
///
/// Symmetric by construction. Positive semidefiniteness holds as a
/// quadrature-weighted operator up to discretization slack; tiny negative
/// eigenvalues are clipped downstream in the spectral module, never here.
#[derive(Debug, Clone)]
pub struct CovarianceSurface {
    grid: TimeGrid,
    values: Array2<f64>,
    kind: SurfaceKind,
    skipped_pairs: usize,
    degenerate: bool,
}

impl CovarianceSurface {
    /// Crate-internal constructor for surfaces assembled elsewhere
    /// (spectral reconstructions, influence-function perturbations).
    pub(crate) fn from_raw(
        grid: TimeGrid,
        values: Array2<f64>,
        kind: SurfaceKind,
        skipped_pairs: usize,
        degenerate: bool,
    ) -> Self {
        CovarianceSurface {
            grid,
            values,
            kind,
            skipped_pairs,
            degenerate,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    /// Pairs excluded from the sum (spatial-sign pairs at zero distance).
    /// The U-statistic divisor still counts them.
    pub fn skipped_pairs(&self) -> usize {
        self.skipped_pairs
    }

    /// True when every pair of rows coincides, i.e. the surface carries no
    /// information and is identically zero.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Packed upper-triangle index for (s, t) with s <= t on a T-point grid.
/// Rows 0..s contribute T, T-1, ... entries: offset = s(2T - s + 1)/2.
fn ut_index(s: usize, t: usize, t_len: usize) -> usize {
    debug_assert!(s <= t && t < t_len);
    s * (2 * t_len - s + 1) / 2 + (t - s)
}

/// Accumulates one chunk of consecutive pairs into a packed upper-triangle
/// partial sum, in lexicographic pair order.
fn wpu_chunk_partial(
    rows: &DistanceTrajectories,
    pd: &PairwiseDistanceSet,
    q: f64,
    chunk: usize,
) -> (Vec<f64>, usize) {
    let t_len = rows.grid().len();
    let n = rows.len();
    let start = chunk * PAIR_CHUNK;
    let end = (start + PAIR_CHUNK).min(pd.len());
    let mut partial = vec![0.0; t_len * (t_len + 1) / 2];
    let mut skipped = 0usize;
    let mut diff = vec![0.0; t_len];
    for index in start..end {
        let (j, k) = pair_at(index, n);
        let Some(xi) = winsor_radius(pd.distances()[index], q) else {
            skipped += 1;
            continue;
        };
        let w = xi * xi;
        let row_j = rows.row(j);
        let row_k = rows.row(k);
        for t in 0..t_len {
            diff[t] = row_j[t] - row_k[t];
        }
        for s in 0..t_len {
            let ws = w * diff[s];
            let base = ut_index(s, s, t_len);
            for t in s..t_len {
                partial[base + (t - s)] += ws * diff[t];
            }
        }
    }
    (partial, skipped)
}

fn wpu_surface(
    rows: &DistanceTrajectories,
    pd: &PairwiseDistanceSet,
    cutoff: &CutoffSpec,
) -> Result<CovarianceSurface> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientSample {
            required: 2,
            actual: n,
        });
    }
    if pd.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: pd.n(),
            context: "pairwise distance set vs row count",
        });
    }
    if !(cutoff.q_hat >= 0.0) {
        return Err(Error::invalid(format!(
            "cutoff must be non-negative, got {}",
            cutoff.q_hat
        )));
    }
    let t_len = rows.grid().len();
    let chunks = pd.len().div_ceil(PAIR_CHUNK);
    let q = cutoff.q_hat;

    #[cfg(feature = "parallel")]
    let partials: Vec<(Vec<f64>, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| wpu_chunk_partial(rows, pd, q, c))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<(Vec<f64>, usize)> = (0..chunks)
        .map(|c| wpu_chunk_partial(rows, pd, q, c))
        .collect();

    // Fold in ascending chunk order: this fixed order is what makes the
    // parallel and sequential builds bitwise identical.
    let mut packed = vec![0.0; t_len * (t_len + 1) / 2];
    let mut skipped = 0usize;
    for (partial, chunk_skipped) in partials {
        for (acc, v) in packed.iter_mut().zip(partial.iter()) {
            *acc += v;
        }
        skipped += chunk_skipped;
    }

    let norm = 2.0 / (n as f64 * (n as f64 - 1.0));
    let mut values = Array2::zeros((t_len, t_len));
    for s in 0..t_len {
        for t in s..t_len {
            let v = packed[ut_index(s, t, t_len)] * norm;
            values[(s, t)] = v;
            values[(t, s)] = v;
        }
    }
    let degenerate = pd.distances().iter().all(|&d| d == 0.0);
    let kind = if q == 0.0 {
        SurfaceKind::SpatialSign
    } else {
        SurfaceKind::Wpu
    };
    Ok(CovarianceSurface {
        grid: rows.grid().clone(),
        values,
        kind,
        skipped_pairs: skipped,
        degenerate,
    })
}

/// Winsorized pairwise U-statistic covariance of estimated-center distance
/// rows. With `q_hat = 0`, zero-distance pairs are skipped while the
/// divisor still counts all pairs; a fully degenerate sample (all rows
/// identical) yields the zero surface with the degenerate flag set.
pub fn wpu_covariance(
    rows: &DistanceTrajectories,
    cutoff: &CutoffSpec,
) -> Result<CovarianceSurface> {
    let pd = pairwise_l2_distances(rows)?;
    wpu_surface(rows, &pd, cutoff)
}

/// Same estimator evaluated on distance rows built from the *true* center
/// trajectory (the oracle variant used to study estimation error). Computed
/// by a deliberately naive direct summation: this function doubles as the
/// independent reference implementation for [`wpu_covariance`].
pub fn oracle_wpu_covariance(
    rows: &DistanceTrajectories,
    cutoff: &CutoffSpec,
) -> Result<CovarianceSurface> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientSample {
            required: 2,
            actual: n,
        });
    }
    if !(cutoff.q_hat >= 0.0) {
        return Err(Error::invalid(format!(
            "cutoff must be non-negative, got {}",
            cutoff.q_hat
        )));
    }
    let t_len = rows.grid().len();
    let mut values = Array2::zeros((t_len, t_len));
    let mut skipped = 0usize;
    let mut all_zero = true;
    for j in 0..n {
        for k in (j + 1)..n {
            let d = weighted_l2_distance(rows.grid(), rows.row(j), rows.row(k));
            if d != 0.0 {
                all_zero = false;
            }
            let Some(xi) = winsor_radius(d, cutoff.q_hat) else {
                skipped += 1;
                continue;
            };
            let w = xi * xi;
            for s in 0..t_len {
                for t in 0..t_len {
                    values[(s, t)] += w
                        * (rows.row(j)[s] - rows.row(k)[s])
                        * (rows.row(j)[t] - rows.row(k)[t]);
                }
            }
        }
    }
    let norm = 2.0 / (n as f64 * (n as f64 - 1.0));
    values.mapv_inplace(|v| v * norm);
    let kind = if cutoff.q_hat == 0.0 {
        SurfaceKind::SpatialSign
    } else {
        SurfaceKind::Wpu
    };
    Ok(CovarianceSurface {
        grid: rows.grid().clone(),
        values,
        kind,
        skipped_pairs: skipped,
        degenerate: all_zero,
    })
}

/// Classical moment autocovariance (1/n normalization):
/// `C(s,t) = (1/n) sum_i V_i(s) V_i(t) - mean(s) mean(t)`.
///
/// With squared-distance-from-mean rows this is the non-robust baseline
/// covariance; the surface kind follows the input kind.
pub fn classical_covariance(rows: &DistanceTrajectories) -> Result<CovarianceSurface> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InsufficientSample {
            required: 2,
            actual: n,
        });
    }
    let t_len = rows.grid().len();
    let nf = n as f64;
    let mut mean = vec![0.0; t_len];
    for i in 0..n {
        let row = rows.row(i);
        for t in 0..t_len {
            mean[t] += row[t];
        }
    }
    for m in mean.iter_mut() {
        *m /= nf;
    }
    let mut values = Array2::zeros((t_len, t_len));
    for s in 0..t_len {
        for t in s..t_len {
            let mut acc = 0.0;
            for i in 0..n {
                let row = rows.row(i);
                acc += row[s] * row[t];
            }
            let v = acc / nf - mean[s] * mean[t];
            values[(s, t)] = v;
            values[(t, s)] = v;
        }
    }
    let kind = match rows.kind() {
        DistanceKind::MedianDistance => SurfaceKind::Classical,
        DistanceKind::DmSquaredDistance => SurfaceKind::Dm,
    };
    let degenerate = values.iter().all(|&v| v == 0.0);
    Ok(CovarianceSurface {
        grid: rows.grid().clone(),
        values,
        kind,
        skipped_pairs: 0,
        degenerate,
    })
}

// ===== tests =====
