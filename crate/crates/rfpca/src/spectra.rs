//! Spectral decomposition of covariance surfaces on the quadrature grid:
//! eigenvalues, orthonormal eigenfunctions, eigen-gaps, explained variance,
//! functional principal component scores, and Mercer reconstruction.
//!
//! The continuous eigenproblem `∫ C(s,t) φ(t) dt = λ φ(s)` is discretized
//! with the grid's trapezoid weights W: symmetrize to
//! `B = W^{1/2} C W^{1/2}`, solve the dense symmetric eigenproblem, and
//! back-transform eigenvectors by `W^{-1/2}`, which makes the eigenfunctions
//! orthonormal under the quadrature inner product.

use ndarray::Array2;

use crate::covariance::{CovarianceSurface, SurfaceKind};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::trajectory::DistanceTrajectories;

/// Tolerance used to reject asymmetric input surfaces.
const SYMMETRY_TOL: f64 = 1e-10;
/// Below this magnitude an eigenfunction integral counts as zero and the
/// sign rule falls back to the first nonzero grid value.
const SIGN_SUM_TOL: f64 = 1e-10;
const SIGN_VALUE_TOL: f64 = 1e-12;

/// Spectrum of a covariance surface: the top-J components plus summary
/// quantities computed from the full clipped spectrum.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    /// J x T grid values, row j = eigenfunction j.
    eigenfunctions: Array2<f64>,
    /// gaps[j] = min over l <= j of (lambda_l - lambda_{l+1}), with a zero
    /// appended past the end of the full spectrum.
    gaps: Vec<f64>,
    /// explained[j] = lambda_j / full clipped trace (zeros if the trace is 0).
    explained: Vec<f64>,
    grid: TimeGrid,
    /// Center used when projecting rows onto eigenfunctions.
    mean_function: Vec<f64>,
    /// How many negative eigenvalues of the full solve were clipped to 0.
    clipped: usize,
    /// Sum of all clipped eigenvalues (the operator trace).
    trace: f64,
    /// Kind of the surface this spectrum came from.
    source_kind: SurfaceKind,
}

/// n x J matrix of functional principal component scores.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    scores: Array2<f64>,
}

impl ScoreMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.scores
    }

    /// Subject count n.
    pub fn len(&self) -> usize {
        self.scores.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.nrows() == 0
    }

    /// Component count J.
    pub fn components(&self) -> usize {
        self.scores.ncols()
    }
}

impl EigenSystem {
    /// Builds a system from known components (synthetic truths, test
    /// fixtures). Eigenvalues must be non-negative and descending;
    /// eigenfunctions must be quadrature-orthonormal. The sign convention is
    /// applied, and explained variance is relative to the supplied
    /// components only.
    pub fn from_parts(
        grid: TimeGrid,
        eigenvalues: Vec<f64>,
        mut eigenfunctions: Array2<f64>,
        mean_function: Vec<f64>,
        source_kind: SurfaceKind,
    ) -> Result<Self> {
        let t_len = grid.len();
        let j_len = eigenvalues.len();
        if eigenfunctions.nrows() != j_len || eigenfunctions.ncols() != t_len {
            return Err(Error::DimensionMismatch {
                expected: j_len * t_len,
                actual: eigenfunctions.nrows() * eigenfunctions.ncols(),
                context: "eigenfunction matrix shape vs (J, T)",
            });
        }
        if mean_function.len() != t_len {
            return Err(Error::DimensionMismatch {
                expected: t_len,
                actual: mean_function.len(),
                context: "mean function length vs grid",
            });
        }
        for pair in eigenvalues.windows(2) {
            if pair[1] > pair[0] {
                return Err(Error::invalid("eigenvalues must be descending"));
            }
        }
        if eigenvalues.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::invalid(
                "eigenvalues must be finite and non-negative",
            ));
        }
        let w = grid.weights();
        for a in 0..j_len {
            for b in a..j_len {
                let mut inner = 0.0;
                for k in 0..t_len {
                    inner += w[k] * eigenfunctions[(a, k)] * eigenfunctions[(b, k)];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                if (inner - target).abs() > 1e-8 {
                    return Err(Error::invalid(format!(
                        "eigenfunctions {a} and {b} are not quadrature-orthonormal \
                         (inner product {inner:.3e})"
                    )));
                }
            }
        }
        for j in 0..j_len {
            apply_sign_rule(&mut eigenfunctions, j, w);
        }
        let trace: f64 = eigenvalues.iter().sum();
        let explained = if trace > 0.0 {
            eigenvalues.iter().map(|l| l / trace).collect()
        } else {
            vec![0.0; j_len]
        };
        let gaps = gaps_from_spectrum(&eigenvalues, j_len);
        Ok(EigenSystem {
            eigenvalues,
            eigenfunctions,
            gaps,
            explained,
            grid,
            mean_function,
            clipped: 0,
            trace,
            source_kind,
        })
    }

    /// Retained eigenvalues, descending, clipped at 0.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// J x T matrix of eigenfunction grid values.
    pub fn eigenfunctions(&self) -> &Array2<f64> {
        &self.eigenfunctions
    }

    /// Eigenfunction j as a slice.
    pub fn eigenfunction(&self, j: usize) -> &[f64] {
        self.eigenfunctions
            .row(j)
            .to_slice()
            .expect("row-major layout")
    }

    /// Running minimum eigen-gaps, one per retained component.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Explained-variance ratios relative to the full clipped trace.
    pub fn explained(&self) -> &[f64] {
        &self.explained
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn mean_function(&self) -> &[f64] {
        &self.mean_function
    }

    /// Count of negative eigenvalues clipped to zero in the full solve.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Full clipped operator trace.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn source_kind(&self) -> SurfaceKind {
        self.source_kind
    }

    /// Number of retained components J.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Keeps only the leading `j_len` components. Gaps and explained-variance
    /// ratios slice cleanly: both were computed against the full spectrum, so
    /// truncation never changes their values.
    pub fn truncate(&self, j_len: usize) -> Result<EigenSystem> {
        if j_len == 0 || j_len > self.len() {
            return Err(Error::invalid(format!(
                "truncation length must lie in [1, {}], got {j_len}",
                self.len()
            )));
        }
        let mut out = self.clone();
        out.eigenvalues.truncate(j_len);
        out.gaps.truncate(j_len);
        out.explained.truncate(j_len);
        out.eigenfunctions = self
            .eigenfunctions
            .slice(ndarray::s![..j_len, ..])
            .to_owned();
        Ok(out)
    }
}

/// Sign convention: quadrature integral non-negative; if the integral is
/// within tolerance of zero, the first grid value of nonzero magnitude is
/// made positive.
pub(crate) fn sign_rule_in_place(values: &mut [f64], weights: &[f64]) {
    let integral: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let flip = if integral.abs() > SIGN_SUM_TOL {
        integral < 0.0
    } else {
        values
            .iter()
            .find(|v| v.abs() > SIGN_VALUE_TOL)
            .map(|v| *v < 0.0)
            .unwrap_or(false)
    };
    if flip {
        for v in values {
            *v = -*v;
        }
    }
}

fn apply_sign_rule(eigenfunctions: &mut Array2<f64>, j: usize, weights: &[f64]) {
    let row = eigenfunctions
        .row_mut(j)
        .into_slice()
        .expect("row-major layout");
    sign_rule_in_place(row, weights);
}

/// gaps[j] = min_{l <= j} (lambda_l - lambda_{l+1}) over the full spectrum,
/// treating the eigenvalue past the end as 0.
fn gaps_from_spectrum(full: &[f64], j_len: usize) -> Vec<f64> {
    let mut gaps = Vec::with_capacity(j_len);
    let mut running = f64::INFINITY;
    for l in 0..j_len {
        let next = if l + 1 < full.len() { full[l + 1] } else { 0.0 };
        running = running.min(full[l] - next);
        gaps.push(running);
    }
    gaps
}

/// Solves the quadrature-weighted eigenproblem of a covariance surface,
/// retaining the top `j_len` components.
///
/// `rows` supplies the mean function ν used later for score projection
/// (sample mean of the rows); omit it for synthetic kernels, where ν = 0.
pub fn eigendecompose(
    surface: &CovarianceSurface,
    j_len: usize,
    rows: Option<&DistanceTrajectories>,
) -> Result<EigenSystem> {
    let grid = surface.grid().clone();
    let t_len = grid.len();
    if j_len == 0 || j_len > t_len {
        return Err(Error::invalid(format!(
            "component count must lie in [1, {t_len}], got {j_len}"
        )));
    }
    let values = surface.values();
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for s in 0..t_len {
        for t in (s + 1)..t_len {
            if (values[(s, t)] - values[(t, s)]).abs() > SYMMETRY_TOL * (1.0 + scale) {
                return Err(Error::invalid(format!(
                    "covariance surface is not symmetric at ({s}, {t})"
                )));
            }
        }
    }
    if let Some(rows) = rows {
        if rows.grid() != &grid {
            return Err(Error::invalid(
                "distance rows and covariance surface live on different grids",
            ));
        }
    }

    let w = grid.weights();
    let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let mut b = nalgebra::DMatrix::<f64>::zeros(t_len, t_len);
    for s in 0..t_len {
        for t in s..t_len {
            // Symmetrize explicitly so the solver sees a bitwise-symmetric
            // matrix even if the input carries sub-tolerance asymmetry.
            let v = 0.5 * (values[(s, t)] + values[(t, s)]);
            let e = sqrt_w[s] * v * sqrt_w[t];
            b[(s, t)] = e;
            b[(t, s)] = e;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..t_len).collect();
    order.sort_by(|&a, &b| f64::total_cmp(&eig.eigenvalues[b], &eig.eigenvalues[a]));

    let mut full: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let clipped = full.iter().filter(|&&l| l < 0.0).count();
    for l in full.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    let trace: f64 = full.iter().sum();

    let mut eigenfunctions = Array2::zeros((j_len, t_len));
    for (j, &src) in order.iter().take(j_len).enumerate() {
        for k in 0..t_len {
            eigenfunctions[(j, k)] = eig.eigenvectors[(k, src)] / sqrt_w[k];
        }
        apply_sign_rule(&mut eigenfunctions, j, w);
    }

    let eigenvalues: Vec<f64> = full[..j_len].to_vec();
    let explained = if trace > 0.0 {
        eigenvalues.iter().map(|l| l / trace).collect()
    } else {
        vec![0.0; j_len]
    };
    let gaps = gaps_from_spectrum(&full, j_len);
    let mean_function = match rows {
        Some(rows) => {
            let n = rows.len() as f64;
            let mut mean = vec![0.0; t_len];
            for i in 0..rows.len() {
                let row = rows.row(i);
                for k in 0..t_len {
                    mean[k] += row[k];
                }
            }
            for m in mean.iter_mut() {
                *m /= n;
            }
            mean
        }
        None => vec![0.0; t_len],
    };

    Ok(EigenSystem {
        eigenvalues,
        eigenfunctions,
        gaps,
        explained,
        grid,
        mean_function,
        clipped,
        trace,
        source_kind: surface.kind(),
    })
}

/// Projects every row onto the eigenfunctions:
/// `scores[i][j] = Σ_k w_k (V_i(t_k) - ν(t_k)) φ_j(t_k)`.
pub fn fpc_scores(rows: &DistanceTrajectories, es: &EigenSystem) -> Result<ScoreMatrix> {
    if rows.grid() != es.grid() {
        return Err(Error::invalid(
            "distance rows and eigensystem live on different grids",
        ));
    }
    let n = rows.len();
    let t_len = es.grid().len();
    let j_len = es.len();
    let w = es.grid().weights();
    let nu = es.mean_function();
    let mut scores = Array2::zeros((n, j_len));
    for i in 0..n {
        let row = rows.row(i);
        for j in 0..j_len {
            let phi = es.eigenfunction(j);
            let mut acc = 0.0;
            for k in 0..t_len {
                acc += w[k] * (row[k] - nu[k]) * phi[k];
            }
            scores[(i, j)] = acc;
        }
    }
    Ok(ScoreMatrix { scores })
}

/// Rank-J Mercer reconstruction `Σ_{j<J} λ_j φ_j(s) φ_j(t)`; `j_len = 0`
/// yields the zero surface.
pub fn mercer_reconstruct(es: &EigenSystem, j_len: usize) -> Result<CovarianceSurface> {
    if j_len > es.len() {
        return Err(Error::invalid(format!(
            "reconstruction rank {j_len} exceeds available components {}",
            es.len()
        )));
    }
    let t_len = es.grid().len();
    let mut values = Array2::zeros((t_len, t_len));
    for j in 0..j_len {
        let lambda = es.eigenvalues()[j];
        let phi = es.eigenfunction(j);
        for s in 0..t_len {
            let ls = lambda * phi[s];
            for t in s..t_len {
                values[(s, t)] += ls * phi[t];
            }
        }
    }
    for s in 0..t_len {
        for t in 0..s {
            values[(s, t)] = values[(t, s)];
        }
    }
    Ok(CovarianceSurface::from_raw(
        es.grid().clone(),
        values,
        es.source_kind(),
        0,
        j_len == 0,
    ))
}

/// Explained-variance ratios of the retained components; errors on an
/// all-zero spectrum where the ratio is undefined.
pub fn explained_variance(es: &EigenSystem) -> Result<Vec<f64>> {
    if es.trace() <= 0.0 {
        return Err(Error::ill_conditioned(
            "degenerate spectrum: all eigenvalues are zero",
        ));
    }
    Ok(es.explained().to_vec())
}

/// Smallest J whose cumulative explained variance reaches `threshold`;
/// falls back to all retained components when the threshold is never met.
pub fn select_components(es: &EigenSystem, threshold: f64) -> usize {
    let mut cumulative = 0.0;
    for (j, ratio) in es.explained().iter().enumerate() {
        cumulative += ratio;
        if cumulative >= threshold {
            return j + 1;
        }
    }
    es.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::classical_covariance;
    use crate::trajectory::DistanceKind;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_surface(t_len: usize, value: f64) -> CovarianceSurface {
        CovarianceSurface::from_raw(
            TimeGrid::uniform(t_len).unwrap(),
            Array2::from_elem((t_len, t_len), value),
            SurfaceKind::Wpu,
            0,
            false,
        )
    }

    /// Quadrature-orthonormalized smooth triple (Gram-Schmidt on
    /// {1, cos(2 pi t), sin(2 pi t)} under the grid weights).
    fn fourier_triple(grid: &TimeGrid) -> Array2<f64> {
        let t_len = grid.len();
        let w = grid.weights();
        let raw: Vec<Vec<f64>> = vec![
            vec![1.0; t_len],
            grid.points()
                .iter()
                .map(|&t| (2.0 * std::f64::consts::PI * t).cos())
                .collect(),
            grid.points()
                .iter()
                .map(|&t| (2.0 * std::f64::consts::PI * t).sin())
                .collect(),
        ];
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for mut v in raw {
            for b in &basis {
                let inner: f64 = (0..t_len).map(|k| w[k] * v[k] * b[k]).sum();
                for k in 0..t_len {
                    v[k] -= inner * b[k];
                }
            }
            let norm: f64 = (0..t_len)
                .map(|k| w[k] * v[k] * v[k])
                .sum::<f64>()
                .sqrt();
            for x in v.iter_mut() {
                *x /= norm;
            }
            basis.push(v);
        }
        let mut out = Array2::zeros((3, t_len));
        for (j, b) in basis.iter().enumerate() {
            for k in 0..t_len {
                out[(j, k)] = b[k];
            }
        }
        out
    }

    fn rank3_surface(grid: &TimeGrid, lambdas: [f64; 3]) -> (CovarianceSurface, Array2<f64>) {
        let basis = fourier_triple(grid);
        let t_len = grid.len();
        let mut values = Array2::zeros((t_len, t_len));
        for j in 0..3 {
            for s in 0..t_len {
                for t in 0..t_len {
                    values[(s, t)] += lambdas[j] * basis[(j, s)] * basis[(j, t)];
                }
            }
        }
        (
            CovarianceSurface::from_raw(grid.clone(), values, SurfaceKind::Wpu, 0, false),
            basis,
        )
    }

    fn weighted_inner(grid: &TimeGrid, a: &[f64], b: &[f64]) -> f64 {
        grid.weights()
            .iter()
            .zip(a.iter().zip(b.iter()))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    #[test]
    fn constant_kernel_is_rank_one_with_unit_eigenvalue() {
        let surface = constant_surface(21, 1.0);
        let es = eigendecompose(&surface, 21, None).unwrap();
        assert_abs_diff_eq!(es.eigenvalues()[0], 1.0, epsilon = 1e-12);
        for &l in &es.eigenvalues()[1..] {
            assert!(l.abs() < 1e-12);
        }
        for &v in es.eigenfunction(0) {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn rank_one_kernel_recovers_factor_and_sign() {
        let grid = TimeGrid::uniform(31).unwrap();
        let basis = fourier_triple(&grid);
        let f: Vec<f64> = (0..31).map(|k| basis[(1, k)]).collect();
        let t_len = grid.len();
        let mut values = Array2::zeros((t_len, t_len));
        for s in 0..t_len {
            for t in 0..t_len {
                values[(s, t)] = 2.0 * f[s] * f[t];
            }
        }
        let surface =
            CovarianceSurface::from_raw(grid.clone(), values, SurfaceKind::Wpu, 0, false);
        let es = eigendecompose(&surface, 3, None).unwrap();
        assert_abs_diff_eq!(es.eigenvalues()[0], 2.0, epsilon = 1e-10);
        let inner = weighted_inner(&grid, es.eigenfunction(0), &f);
        assert_abs_diff_eq!(inner.abs(), 1.0, epsilon = 1e-8);
        // Sign rule: non-negative integral, or first nonzero value positive.
        let integral = weighted_inner(&grid, es.eigenfunction(0), &vec![1.0; t_len]);
        if integral.abs() > 1e-10 {
            assert!(integral > 0.0);
        } else {
            let first = es
                .eigenfunction(0)
                .iter()
                .find(|v| v.abs() > 1e-12)
                .unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn fourier_triple_round_trip() {
        let grid = TimeGrid::uniform(41).unwrap();
        let (surface, basis) = rank3_surface(&grid, [4.0, 2.0, 1.0]);
        let es = eigendecompose(&surface, 3, None).unwrap();
        for (j, &l) in [4.0, 2.0, 1.0].iter().enumerate() {
            assert_abs_diff_eq!(es.eigenvalues()[j], l, epsilon = 1e-6);
            let truth: Vec<f64> = (0..41).map(|k| basis[(j, k)]).collect();
            let inner = weighted_inner(&grid, es.eigenfunction(j), &truth);
            assert!(inner.abs() > 1.0 - 1e-6);
        }
    }

    #[test]
    fn eigenfunctions_are_orthonormal_with_signed_integrals() {
        let rows = random_rows(12, 17, 3);
        let surface = classical_covariance(&rows).unwrap();
        let es = eigendecompose(&surface, 5, Some(&rows)).unwrap();
        let grid = es.grid().clone();
        for a in 0..5 {
            for b in 0..5 {
                let inner = weighted_inner(&grid, es.eigenfunction(a), es.eigenfunction(b));
                let target = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(inner, target, epsilon = 1e-8);
            }
            let ones = vec![1.0; grid.len()];
            assert!(weighted_inner(&grid, es.eigenfunction(a), &ones) >= -1e-10);
        }
    }

    #[test]
    fn eigenvalues_descend_and_clip_count_is_recorded() {
        let rows = random_rows(6, 12, 9);
        let surface = classical_covariance(&rows).unwrap();
        let es = eigendecompose(&surface, 12, Some(&rows)).unwrap();
        for pair in es.eigenvalues().windows(2) {
            assert!(pair[0] >= pair[1]);
        }
        assert!(es.eigenvalues().iter().all(|&l| l >= 0.0));
        // Rank <= n-1 = 5, so the trailing eigenvalues are float noise of
        // either sign; any negative ones must be counted.
        assert!(es.clipped() <= 7);
    }

    #[test]
    fn gaps_are_running_minima_with_zero_tail() {
        let grid = TimeGrid::uniform(9).unwrap();
        let (surface, _) = rank3_surface(&grid, [4.0, 2.0, 1.0]);
        let es = eigendecompose(&surface, 4, None).unwrap();
        assert_abs_diff_eq!(es.gaps()[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(es.gaps()[1], 1.0, epsilon = 1e-8);
        // lambda_3 - lambda_4 = 1 - 0: running minimum stays 1.
        assert_abs_diff_eq!(es.gaps()[2], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(es.gaps()[3], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn scores_examples_and_oracle() {
        let grid = TimeGrid::uniform(25).unwrap();
        let (surface, basis) = rank3_surface(&grid, [4.0, 2.0, 1.0]);
        let es = eigendecompose(&surface, 3, None).unwrap();

        // Row equal to the (zero) mean function: zero scores.
        let zero_rows = DistanceTrajectories::from_values(
            grid.clone(),
            Array2::zeros((1, 25)),
            DistanceKind::MedianDistance,
        )
        .unwrap();
        let scores = fpc_scores(&zero_rows, &es).unwrap();
        for &s in scores.values().iter() {
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        }

        // Row = a * phi_1 (shifted positive to satisfy non-negativity).
        // The shift is constant, and phi_1 here is the orthonormalized
        // cosine with zero integral, so it only pollutes the constant mode.
        let a = 0.75;
        let phi1: Vec<f64> = (0..25).map(|k| basis[(1, k)]).collect();
        let sign = weighted_inner(&grid, es.eigenfunction(1), &phi1).signum();
        let mut row = Array2::zeros((1, 25));
        for k in 0..25 {
            row[(0, k)] = 10.0 + a * sign * phi1[k];
        }
        let rows =
            DistanceTrajectories::from_values(grid.clone(), row, DistanceKind::MedianDistance)
                .unwrap();
        let scores = fpc_scores(&rows, &es).unwrap();
        assert_abs_diff_eq!(scores.values()[(0, 1)], a, epsilon = 1e-8);
        assert_abs_diff_eq!(scores.values()[(0, 2)], 0.0, epsilon = 1e-8);

        // Random rows against a literal quadrature double loop.
        let rows = random_rows(7, 25, 4);
        let es = eigendecompose(&classical_covariance(&rows).unwrap(), 4, Some(&rows)).unwrap();
        let scores = fpc_scores(&rows, &es).unwrap();
        let w = grid.weights();
        for i in 0..7 {
            for j in 0..4 {
                let mut acc = 0.0;
                for k in 0..25 {
                    acc += w[k]
                        * (rows.row(i)[k] - es.mean_function()[k])
                        * es.eigenfunction(j)[k];
                }
                assert_abs_diff_eq!(scores.values()[(i, j)], acc, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn centered_scores_have_zero_sample_mean() {
        let rows = random_rows(30, 15, 11);
        let surface = classical_covariance(&rows).unwrap();
        let es = eigendecompose(&surface, 6, Some(&rows)).unwrap();
        let scores = fpc_scores(&rows, &es).unwrap();
        for j in 0..6 {
            let mean: f64 =
                (0..30).map(|i| scores.values()[(i, j)]).sum::<f64>() / 30.0;
            assert!(mean.abs() <= 1e-8, "component {j} score mean {mean:.3e}");
        }
    }

    #[test]
    fn mercer_reconstruction_round_trips() {
        let rows = random_rows(9, 13, 17);
        let surface = classical_covariance(&rows).unwrap();
        let es = eigendecompose(&surface, 13, Some(&rows)).unwrap();
        let rebuilt = mercer_reconstruct(&es, 13).unwrap();
        for (a, b) in surface.values().iter().zip(rebuilt.values().iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
        let zero = mercer_reconstruct(&es, 0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_two_truncation_leaves_exactly_the_third_component() {
        let grid = TimeGrid::uniform(33).unwrap();
        let (surface, _) = rank3_surface(&grid, [4.0, 2.0, 1.0]);
        let es = eigendecompose(&surface, 3, None).unwrap();
        let truncated = mercer_reconstruct(&es, 2).unwrap();
        let residual: f64 = surface
            .values()
            .iter()
            .zip(truncated.values().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let lambda3 = es.eigenvalues()[2];
        let phi3 = es.eigenfunction(2);
        let mut expected = 0.0_f64;
        for s in 0..33 {
            for t in 0..33 {
                expected = expected.max((lambda3 * phi3[s] * phi3[t]).abs());
            }
        }
        assert_abs_diff_eq!(residual, expected, epsilon = 1e-8);
    }

    #[test]
    fn explained_variance_examples() {
        let grid = TimeGrid::uniform(21).unwrap();
        let (surface, _) = rank3_surface(&grid, [4.0, 2.0, 1.0]);
        let es = eigendecompose(&surface, 3, None).unwrap();
        let ratios = explained_variance(&es).unwrap();
        assert_abs_diff_eq!(ratios[0], 4.0 / 7.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ratios[1], 2.0 / 7.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ratios[2], 1.0 / 7.0, epsilon = 1e-10);

        let rank_one = eigendecompose(&constant_surface(11, 2.5), 1, None).unwrap();
        let ratios = explained_variance(&rank_one).unwrap();
        assert_abs_diff_eq!(ratios[0], 1.0, epsilon = 1e-10);

        // Trace-ratio oracle on a random PSD surface.
        let rows = random_rows(10, 21, 23);
        let surface = classical_covariance(&rows).unwrap();
        let es = eigendecompose(&surface, 5, Some(&rows)).unwrap();
        let w = es.grid().weights();
        let quad_trace: f64 = (0..21).map(|k| w[k] * surface.values()[(k, k)]).sum();
        for (j, r) in explained_variance(&es).unwrap().iter().enumerate() {
            assert_abs_diff_eq!(*r, es.eigenvalues()[j] / quad_trace, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_surface_spectrum_is_degenerate() {
        let zero = constant_surface(7, 0.0);
        let es = eigendecompose(&zero, 3, None).unwrap();
        assert!(matches!(
            explained_variance(&es),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn component_selection_hits_threshold() {
        let grid = TimeGrid::uniform(15).unwrap();
        let (surface, _) = rank3_surface(&grid, [4.0, 2.0, 1.0]);
        let es = eigendecompose(&surface, 5, None).unwrap();
        // Cumulative: 4/7 = 0.571, 6/7 = 0.857, 7/7 = 1.
        assert_eq!(select_components(&es, 0.5), 1);
        assert_eq!(select_components(&es, 0.857), 2);
        assert_eq!(select_components(&es, 0.9), 3);
        assert_eq!(select_components(&es, 2.0), 5);
    }

    #[test]
    fn asymmetric_surfaces_are_rejected() {
        let grid = TimeGrid::uniform(4).unwrap();
        let mut values = Array2::zeros((4, 4));
        values[(0, 1)] = 1.0;
        let surface =
            CovarianceSurface::from_raw(grid, values, SurfaceKind::Classical, 0, false);
        assert!(eigendecompose(&surface, 2, None).is_err());
    }

    #[test]
    fn from_parts_validates_and_applies_sign_rule() {
        let grid = TimeGrid::uniform(19).unwrap();
        let mut basis = fourier_triple(&grid);
        // Flip a row; from_parts must flip it back.
        for k in 0..19 {
            basis[(1, k)] = -basis[(1, k)];
        }
        let es = EigenSystem::from_parts(
            grid.clone(),
            vec![4.0, 2.0, 1.0],
            basis.clone(),
            vec![0.0; 19],
            SurfaceKind::Wpu,
        )
        .unwrap();
        let ones = vec![1.0; 19];
        for j in 0..3 {
            assert!(weighted_inner(&grid, es.eigenfunction(j), &ones) >= -1e-10);
        }
        assert!(EigenSystem::from_parts(
            grid.clone(),
            vec![1.0, 2.0],
            basis.clone().slice_move(ndarray::s![..2, ..]),
            vec![0.0; 19],
            SurfaceKind::Wpu,
        )
        .is_err());
        let not_orthonormal = Array2::from_elem((2, 19), 1.0);
        assert!(EigenSystem::from_parts(
            grid,
            vec![2.0, 1.0],
            not_orthonormal,
            vec![0.0; 19],
            SurfaceKind::Wpu,
        )
        .is_err());
    }

    fn random_rows(n: usize, t_len: usize, seed: u64) -> DistanceTrajectories {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = Array2::from_shape_fn((n, t_len), |_| rng.random::<f64>() * 2.0 + 0.5);
        DistanceTrajectories::from_values(
            TimeGrid::uniform(t_len).unwrap(),
            values,
            DistanceKind::MedianDistance,
        )
        .unwrap()
    }
}
