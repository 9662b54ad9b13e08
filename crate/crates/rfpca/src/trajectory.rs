//! Object trajectories, pointwise center trajectories, and the distance
//! trajectories that turn metric-space data into ordinary functional data.
//!
//! The warm-start center solver walks the grid sequentially, seeding each
//! pointwise solve with the previous solution; smooth trajectories make this
//! the fast path. A cold-start variant solves every time point independently
//! (in parallel when the `parallel` feature is on) and agrees with the warm
//! path within solver tolerance.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::metric::{frechet_mean, frechet_median, frechet_median_from, MetricSpace, Point, SolverConfig};

/// Which pointwise center a trajectory holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterKind {
    Median,
    Mean,
}

/// What a row of [`DistanceTrajectories`] contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    /// d(X_i(t), median(t)): the robust pipeline's functional data.
    MedianDistance,
    /// d^2(X_i(t), mean(t)): the non-robust baseline's functional data.
    DmSquaredDistance,
}

/// n subjects observed at the shared grid, each a trajectory of points in
/// one metric space.
#[derive(Debug, Clone)]
pub struct ObjectTrajectorySample {
    space: MetricSpace,
    grid: TimeGrid,
    subjects: Vec<Vec<Point>>,
}

/// Pointwise Fréchet median or mean trajectory.
#[derive(Debug, Clone)]
pub struct CenterTrajectory {
    space: MetricSpace,
    grid: TimeGrid,
    centers: Vec<Point>,
    kind: CenterKind,
}

/// n x T matrix of (squared) distances from the center trajectory.
#[derive(Debug, Clone)]
pub struct DistanceTrajectories {
    grid: TimeGrid,
    values: Array2<f64>,
    kind: DistanceKind,
}

impl ObjectTrajectorySample {
    /// Validates that every subject covers the grid with points of `space`.
    pub fn new(space: MetricSpace, grid: TimeGrid, subjects: Vec<Vec<Point>>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::InsufficientSample {
                required: 1,
                actual: 0,
            });
        }
        for (i, row) in subjects.iter().enumerate() {
            if row.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    actual: row.len(),
                    context: "subject trajectory length vs grid",
                });
            }
            for p in row {
                space.check_point(p).map_err(|e| {
                    Error::invalid(format!("subject {i}: {e}"))
                })?;
            }
        }
        Ok(ObjectTrajectorySample {
            space,
            grid,
            subjects,
        })
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Subject count n.
    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn subjects(&self) -> &[Vec<Point>] {
        &self.subjects
    }

    /// Points of all subjects at time index `k`.
    fn column(&self, k: usize) -> Vec<Point> {
        self.subjects.iter().map(|row| row[k].clone()).collect()
    }
}

impl CenterTrajectory {
    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn kind(&self) -> CenterKind {
        self.kind
    }
}

impl DistanceTrajectories {
    /// Wraps a precomputed matrix of distance rows (used by generators and
    /// tests that bypass object space entirely).
    pub fn from_values(grid: TimeGrid, values: Array2<f64>, kind: DistanceKind) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.ncols(),
                context: "distance matrix columns vs grid",
            });
        }
        if values.nrows() == 0 {
            return Err(Error::InsufficientSample {
                required: 1,
                actual: 0,
            });
        }
        for &v in values.iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "distance trajectories must be finite and non-negative, got {v}"
                )));
            }
        }
        // Row access hands out contiguous slices, so force row-major layout.
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().to_owned()
        };
        Ok(DistanceTrajectories { grid, values, kind })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// n x T value matrix.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    /// Subject count n.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        self.values
            .row(i)
            .to_slice()
            .expect("row-major layout")
    }
}

fn solve_center(
    space: &MetricSpace,
    points: &[Point],
    kind: CenterKind,
    init: Option<&Point>,
    config: &SolverConfig,
    time_index: usize,
) -> Result<Point> {
    let solved = match (kind, init) {
        (CenterKind::Median, Some(start)) => frechet_median_from(space, points, start, config),
        (CenterKind::Median, None) => frechet_median(space, points, config),
        (CenterKind::Mean, _) => frechet_mean(space, points, config),
    };
    solved.map_err(|e| Error::AtTime {
        index: time_index,
        source: Box::new(e),
    })
}

/// Pointwise center trajectory with warm starts: the solve at t_{k+1} starts
/// from the solution at t_k. The chain is a sequential dependency; see
/// [`compute_center_trajectory_cold_start`] for the independent variant.
pub fn compute_center_trajectory(
    sample: &ObjectTrajectorySample,
    kind: CenterKind,
    config: &SolverConfig,
) -> Result<CenterTrajectory> {
    let t_len = sample.grid.len();
    let mut centers: Vec<Point> = Vec::with_capacity(t_len);
    for k in 0..t_len {
        let points = sample.column(k);
        let init = centers.last();
        centers.push(solve_center(&sample.space, &points, kind, init, config, k)?);
    }
    Ok(CenterTrajectory {
        space: sample.space,
        grid: sample.grid.clone(),
        centers,
        kind,
    })
}

/// Pointwise center trajectory with independent cold starts per time point,
/// data-parallel across the grid. Agrees with the warm-start result within
/// solver tolerance; iteration counts differ.
pub fn compute_center_trajectory_cold_start(
    sample: &ObjectTrajectorySample,
    kind: CenterKind,
    config: &SolverConfig,
) -> Result<CenterTrajectory> {
    let t_len = sample.grid.len();
    #[cfg(feature = "parallel")]
    let centers: Result<Vec<Point>> = (0..t_len)
        .into_par_iter()
        .map(|k| {
            let points = sample.column(k);
            solve_center(&sample.space, &points, kind, None, config, k)
        })
        .collect();
    #[cfg(not(feature = "parallel"))]
    let centers: Result<Vec<Point>> = (0..t_len)
        .map(|k| {
            let points = sample.column(k);
            solve_center(&sample.space, &points, kind, None, config, k)
        })
        .collect();
    Ok(CenterTrajectory {
        space: sample.space,
        grid: sample.grid.clone(),
        centers: centers?,
        kind,
    })
}

/// Distance trajectories of every subject from the center: plain distances
/// for a median center, squared distances for a mean center (the baseline
/// convention).
pub fn distance_trajectories(
    sample: &ObjectTrajectorySample,
    center: &CenterTrajectory,
) -> Result<DistanceTrajectories> {
    if sample.grid != center.grid {
        return Err(Error::invalid(
            "sample and center trajectories live on different grids",
        ));
    }
    if sample.space != center.space {
        return Err(Error::invalid(
            "sample and center trajectories live in different spaces",
        ));
    }
    let n = sample.len();
    let t_len = sample.grid.len();
    let mut values = Array2::zeros((n, t_len));
    for i in 0..n {
        for k in 0..t_len {
            let d = sample.space.distance(&sample.subjects[i][k], &center.centers[k])?;
            values[(i, k)] = match center.kind {
                CenterKind::Median => d,
                CenterKind::Mean => d * d,
            };
        }
    }
    let kind = match center.kind {
        CenterKind::Median => DistanceKind::MedianDistance,
        CenterKind::Mean => DistanceKind::DmSquaredDistance,
    };
    DistanceTrajectories::from_values(sample.grid.clone(), values, kind)
}

/// Quadrature L2 norm of one row (convenience wrapper over the grid).
pub fn l2_norm(values: &[f64], grid: &TimeGrid) -> f64 {
    grid.l2_norm(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn constant_euclidean_sample(values: &[f64]) -> ObjectTrajectorySample {
        let grid = TimeGrid::uniform(4).unwrap();
        let subjects = values
            .iter()
            .map(|&v| (0..4).map(|_| Point::Euclidean(array![v])).collect())
            .collect();
        ObjectTrajectorySample::new(MetricSpace::Euclidean { dim: 1 }, grid, subjects).unwrap()
    }

    #[test]
    fn single_subject_center_is_the_subject() {
        let sample = constant_euclidean_sample(&[7.25]);
        let center =
            compute_center_trajectory(&sample, CenterKind::Median, &SolverConfig::default())
                .unwrap();
        for c in center.centers() {
            let Point::Euclidean(v) = c else { panic!() };
            assert_eq!(v[0], 7.25);
        }
    }

    #[test]
    fn median_and_mean_of_skewed_sample_differ_as_expected() {
        let sample = constant_euclidean_sample(&[0.0, 0.0, 10.0]);
        let config = SolverConfig::default();
        let median = compute_center_trajectory(&sample, CenterKind::Median, &config).unwrap();
        let mean = compute_center_trajectory(&sample, CenterKind::Mean, &config).unwrap();
        for k in 0..4 {
            let Point::Euclidean(m) = &median.centers()[k] else { panic!() };
            let Point::Euclidean(a) = &mean.centers()[k] else { panic!() };
            assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-7);
            assert_abs_diff_eq!(a[0], 10.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn warm_and_cold_starts_agree_within_solver_tolerance() {
        // Smooth drifting sample: warm starts reuse the previous solution,
        // cold starts re-initialize; both must land on the same minimizer.
        let grid = TimeGrid::uniform(6).unwrap();
        let subjects: Vec<Vec<Point>> = (0..5)
            .map(|i| {
                grid.points()
                    .iter()
                    .map(|&t| {
                        Point::Euclidean(array![
                            t + 0.1 * (i as f64 - 2.0),
                            0.5 * t * t + 0.05 * (i as f64)
                        ])
                    })
                    .collect()
            })
            .collect();
        let sample =
            ObjectTrajectorySample::new(MetricSpace::Euclidean { dim: 2 }, grid, subjects)
                .unwrap();
        let config = SolverConfig::default();
        let warm = compute_center_trajectory(&sample, CenterKind::Median, &config).unwrap();
        let cold =
            compute_center_trajectory_cold_start(&sample, CenterKind::Median, &config).unwrap();
        for (a, b) in warm.centers().iter().zip(cold.centers()) {
            let d = sample.space().distance(a, b).unwrap();
            assert!(d < 1e-6, "warm/cold centers differ by {d:.3e}");
        }
    }

    #[test]
    fn median_beats_every_subject_point_as_pointwise_center() {
        let grid = TimeGrid::uniform(3).unwrap();
        let subjects: Vec<Vec<Point>> = (0..6)
            .map(|i| {
                grid.points()
                    .iter()
                    .map(|&t| {
                        let phase = i as f64;
                        Point::Euclidean(array![
                            (t + phase).sin(),
                            (2.0 * t - phase).cos()
                        ])
                    })
                    .collect()
            })
            .collect();
        let sample =
            ObjectTrajectorySample::new(MetricSpace::Euclidean { dim: 2 }, grid, subjects)
                .unwrap();
        let center =
            compute_center_trajectory(&sample, CenterKind::Median, &SolverConfig::default())
                .unwrap();
        for k in 0..3 {
            let median_cost: f64 = (0..6)
                .map(|i| {
                    sample
                        .space()
                        .distance(&sample.subjects()[i][k], &center.centers()[k])
                        .unwrap()
                })
                .sum();
            for candidate in 0..6 {
                let candidate_cost: f64 = (0..6)
                    .map(|i| {
                        sample
                            .space()
                            .distance(
                                &sample.subjects()[i][k],
                                &sample.subjects()[candidate][k],
                            )
                            .unwrap()
                    })
                    .sum();
                assert!(median_cost <= candidate_cost + 1e-9);
            }
        }
    }

    #[test]
    fn distance_rows_follow_the_center_kind() {
        let sample = constant_euclidean_sample(&[1.0, 5.0]);
        let config = SolverConfig::default();
        let mean = compute_center_trajectory(&sample, CenterKind::Mean, &config).unwrap();
        let rows = distance_trajectories(&sample, &mean).unwrap();
        assert_eq!(rows.kind(), DistanceKind::DmSquaredDistance);
        // Mean is 3: distances 2 and 2, squared to 4.
        for i in 0..2 {
            for k in 0..4 {
                assert_abs_diff_eq!(rows.values()[(i, k)], 4.0, epsilon = 1e-12);
            }
        }
        let median = compute_center_trajectory(&sample, CenterKind::Median, &config).unwrap();
        let rows = distance_trajectories(&sample, &median).unwrap();
        assert_eq!(rows.kind(), DistanceKind::MedianDistance);
    }

    #[test]
    fn subject_equal_to_center_gets_a_zero_row() {
        let sample = constant_euclidean_sample(&[2.0, 2.0, 2.0]);
        let center =
            compute_center_trajectory(&sample, CenterKind::Median, &SolverConfig::default())
                .unwrap();
        let rows = distance_trajectories(&sample, &center).unwrap();
        for &v in rows.values().iter() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let sample = constant_euclidean_sample(&[1.0, 2.0]);
        let other = ObjectTrajectorySample::new(
            MetricSpace::Euclidean { dim: 1 },
            TimeGrid::uniform(7).unwrap(),
            vec![(0..7).map(|_| Point::Euclidean(array![0.0])).collect()],
        )
        .unwrap();
        let center =
            compute_center_trajectory(&other, CenterKind::Median, &SolverConfig::default())
                .unwrap();
        assert!(distance_trajectories(&sample, &center).is_err());
    }

    #[test]
    fn l2_norm_examples() {
        let grid = TimeGrid::uniform(5).unwrap();
        assert_abs_diff_eq!(l2_norm(&[3.0; 5], &grid), 3.0, epsilon = 1e-12);
        assert_eq!(l2_norm(&[0.0; 5], &grid), 0.0);
        let fine = TimeGrid::uniform(1001).unwrap();
        let ramp: Vec<f64> = fine.points().to_vec();
        assert_abs_diff_eq!(
            l2_norm(&ramp, &fine),
            1.0 / 3.0_f64.sqrt(),
            epsilon = 1e-4
        );
    }

    #[test]
    fn rejects_negative_distance_values() {
        let grid = TimeGrid::uniform(3).unwrap();
        let values = array![[1.0, -0.5, 0.0]];
        assert!(
            DistanceTrajectories::from_values(grid, values, DistanceKind::MedianDistance)
                .is_err()
        );
    }
}
