//! Pointwise Fréchet medians and means.
//!
//! Flat spaces (Laplacians, Euclidean vectors) use the Weiszfeld iteration
//! with the Vardi–Zhang adjustment for iterates that land on a data point.
//! The sphere uses the Riemannian analogue through log/exp maps, with a
//! step-halving guard that keeps the objective non-increasing. Sphere solves
//! require the sample to sit inside a hemisphere cap (max pairwise distance
//! below pi/2), which guarantees a unique minimizer.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{
    dot3, great_circle_distance, norm3, sphere_exp, sphere_log, GraphLaplacian, MetricSpace,
    Point, SpherePoint,
};

/// Iteration controls shared by the median and mean solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Iteration cap before a convergence error.
    pub max_iter: usize,
    /// Step-length threshold declaring convergence.
    pub tol: f64,
    /// Distance below which the iterate is treated as sitting on a data point.
    pub anchor_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            // Weiszfeld converges linearly and the per-iteration cost is one
            // pass over the sample; nearly-collinear configurations (rate
            // close to 1) need a generous cap to reach a 1e-8 step.
            max_iter: 2000,
            tol: 1e-8,
            anchor_eps: 1e-10,
        }
    }
}

/// Fréchet median: minimizer of the mean distance to the sample.
///
/// Starts from the coordinate-wise median (projected onto the sphere for
/// spherical data); ties between multiple minimizers resolve to whatever the
/// iteration reaches from that start.
pub fn frechet_median(space: &MetricSpace, points: &[Point], config: &SolverConfig) -> Result<Point> {
    let init = default_init(space, points)?;
    frechet_median_from(space, points, &init, config)
}

/// Fréchet median started from a caller-supplied point (used for warm starts
/// along a trajectory).
pub fn frechet_median_from(
    space: &MetricSpace,
    points: &[Point],
    init: &Point,
    config: &SolverConfig,
) -> Result<Point> {
    median_from_traced(space, points, init, config, None)
}

/// Fréchet median along with the objective trace: the summed distance to the
/// sample at the initial point and after every accepted update. The guarded
/// steps make the trace non-increasing; the trace exposes that invariant to
/// callers (diagnostics, solver audits).
pub fn frechet_median_with_trace(
    space: &MetricSpace,
    points: &[Point],
    config: &SolverConfig,
) -> Result<(Point, Vec<f64>)> {
    let init = default_init(space, points)?;
    let mut trace = Vec::new();
    let median = median_from_traced(space, points, &init, config, Some(&mut trace))?;
    Ok((median, trace))
}

fn median_from_traced(
    space: &MetricSpace,
    points: &[Point],
    init: &Point,
    config: &SolverConfig,
    trace: Option<&mut Vec<f64>>,
) -> Result<Point> {
    check_sample(space, points)?;
    space.check_point(init)?;
    match space {
        MetricSpace::Sphere => {
            let data = sphere_coords(points);
            check_concentration(&data)?;
            let start = match init {
                Point::Sphere(p) => *p,
                _ => unreachable!(),
            };
            let median = sphere_weiszfeld(&data, start, config, trace)?;
            Ok(Point::Sphere(median))
        }
        _ => {
            let data = flatten(points);
            let start = flatten_one(init);
            // Extrapolated jumps may leave the convex hull of the sample, so
            // they are only accepted when the candidate is still a valid
            // point of the space (plain averaging steps always are).
            let admissible: Box<dyn Fn(&[f64]) -> bool> = match space {
                MetricSpace::Laplacian { nodes } => {
                    let p = *nodes;
                    Box::new(move |flat: &[f64]| {
                        Array2::from_shape_vec((p, p), flat.to_vec())
                            .map(|m| GraphLaplacian::new(m).is_ok())
                            .unwrap_or(false)
                    })
                }
                _ => Box::new(|_: &[f64]| true),
            };
            let median = weiszfeld(&data, start, config, &admissible, trace)?;
            unflatten(space, median)
        }
    }
}

/// Fréchet mean: minimizer of the mean squared distance to the sample.
///
/// Exact (arithmetic mean) on flat spaces; fixed-point iteration on the
/// sphere under the same concentration precondition as the median.
pub fn frechet_mean(space: &MetricSpace, points: &[Point], config: &SolverConfig) -> Result<Point> {
    check_sample(space, points)?;
    match space {
        MetricSpace::Sphere => {
            let data = sphere_coords(points);
            check_concentration(&data)?;
            let start = sphere_init(&data);
            let mean = sphere_karcher_mean(&data, start, config)?;
            Ok(Point::Sphere(mean))
        }
        _ => {
            let data = flatten(points);
            let n = data.nrows() as f64;
            let mean = data.rows().into_iter().fold(
                Array1::zeros(data.ncols()),
                |acc: Array1<f64>, row| acc + &row,
            ) / n;
            unflatten(space, mean.to_vec())
        }
    }
}

fn check_sample(space: &MetricSpace, points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InsufficientSample {
            required: 1,
            actual: 0,
        });
    }
    for p in points {
        space.check_point(p)?;
    }
    Ok(())
}

fn default_init(space: &MetricSpace, points: &[Point]) -> Result<Point> {
    check_sample(space, points)?;
    match space {
        MetricSpace::Sphere => {
            let data = sphere_coords(points);
            Ok(Point::Sphere(sphere_init(&data)))
        }
        MetricSpace::Laplacian { nodes } => {
            // The entrywise median of Laplacians is generally not a Laplacian
            // (medians are nonlinear, so zero row sums are lost); median the
            // off-diagonal weights instead and rebuild.
            let p = *nodes;
            let mut adjacency = Array2::zeros((p, p));
            let mut column = Vec::with_capacity(points.len());
            for u in 0..p {
                for v in (u + 1)..p {
                    column.clear();
                    for point in points {
                        let Point::Laplacian(l) = point else {
                            unreachable!("check_sample guarantees Laplacian points")
                        };
                        column.push((-l.entries()[(u, v)]).max(0.0));
                    }
                    column.sort_by(f64::total_cmp);
                    let mid = column.len() / 2;
                    let w = if column.len() % 2 == 1 {
                        column[mid]
                    } else {
                        (column[mid - 1] + column[mid]) / 2.0
                    };
                    adjacency[(u, v)] = w;
                    adjacency[(v, u)] = w;
                }
            }
            Ok(Point::Laplacian(GraphLaplacian::from_adjacency(&adjacency)?))
        }
        MetricSpace::Euclidean { .. } => {
            let data = flatten(points);
            unflatten(space, coordinate_median(&data))
        }
    }
}

// ===== flat-space kernel =====

fn flatten(points: &[Point]) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = points.iter().map(flatten_one).collect();
    let dim = rows[0].len();
    let mut data = Array2::zeros((rows.len(), dim));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            data[(i, j)] = v;
        }
    }
    data
}

fn flatten_one(point: &Point) -> Vec<f64> {
    match point {
        Point::Laplacian(l) => l.entries().iter().copied().collect(),
        Point::Euclidean(v) => v.to_vec(),
        Point::Sphere(p) => p.coords().to_vec(),
    }
}

fn unflatten(space: &MetricSpace, flat: Vec<f64>) -> Result<Point> {
    match space {
        MetricSpace::Laplacian { nodes } => {
            let entries = Array2::from_shape_vec((*nodes, *nodes), flat)
                .expect("flat length matches node count");
            Ok(Point::Laplacian(GraphLaplacian::new(entries)?))
        }
        MetricSpace::Euclidean { .. } => Ok(Point::Euclidean(Array1::from_vec(flat))),
        MetricSpace::Sphere => unreachable!("sphere points never take the flat route"),
    }
}

/// Per-coordinate sample median (mean of the two central order statistics
/// for even counts).
fn coordinate_median(data: &Array2<f64>) -> Vec<f64> {
    let n = data.nrows();
    let mut out = Vec::with_capacity(data.ncols());
    let mut column = vec![0.0; n];
    for j in 0..data.ncols() {
        for i in 0..n {
            column[i] = data[(i, j)];
        }
        column.sort_by(f64::total_cmp);
        let mid = n / 2;
        out.push(if n % 2 == 1 {
            column[mid]
        } else {
            (column[mid - 1] + column[mid]) / 2.0
        });
    }
    out
}

fn euclid_dist(row: ndarray::ArrayView1<f64>, y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in row.iter().zip(y.iter()) {
        let d = a - b;
        acc += d * d;
    }
    acc.sqrt()
}

fn total_cost(data: &Array2<f64>, y: &[f64]) -> f64 {
    data.rows().into_iter().map(|row| euclid_dist(row, y)).sum()
}

/// Weiszfeld iteration with the Vardi–Zhang rule for iterates coinciding with
/// data points, plus geometric-series extrapolation for slow linear modes.
///
/// Plain Weiszfeld converges linearly with a rate that approaches 1 on
/// nearly-flat objectives (e.g. two opposing clusters), where a step-length
/// stop badly underestimates the remaining distance to the optimum. When
/// consecutive steps stay aligned with a stable contraction ratio `r`, the
/// remaining travel is approximately `step * r / (1 - r)`, so the solver
/// (a) jumps by that amount when the jump lowers the objective and stays in
/// the space, and (b) refuses to declare convergence until the projected
/// remaining travel is also below tolerance.
fn weiszfeld(
    data: &Array2<f64>,
    init: Vec<f64>,
    config: &SolverConfig,
    admissible: &dyn Fn(&[f64]) -> bool,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<Vec<f64>> {
    let (n, dim) = (data.nrows(), data.ncols());
    let mut y = init;
    let mut cost = total_cost(data, &y);
    if let Some(t) = trace.as_deref_mut() {
        t.push(cost);
    }
    let mut last_step = f64::INFINITY;
    // Previous step vector and its length, for contraction-ratio estimates.
    let mut prev_step: Option<(Vec<f64>, f64)> = None;
    for iteration in 0..config.max_iter {
        let mut numerator = vec![0.0; dim];
        let mut denominator = 0.0;
        let mut anchors = 0usize;
        for i in 0..n {
            let row = data.row(i);
            let d = euclid_dist(row, &y);
            if d <= config.anchor_eps {
                anchors += 1;
                continue;
            }
            let w = 1.0 / d;
            denominator += w;
            for (acc, &x) in numerator.iter_mut().zip(row.iter()) {
                *acc += w * x;
            }
        }
        if denominator == 0.0 {
            // Every data point coincides with the iterate.
            return Ok(y);
        }
        let target: Vec<f64> = numerator.iter().map(|v| v / denominator).collect();
        let next = if anchors == 0 {
            target
        } else {
            // ||sum (x_i - y)/d_i|| = denominator * ||target - y||.
            let pull = denominator
                * target
                    .iter()
                    .zip(y.iter())
                    .map(|(t, c)| (t - c) * (t - c))
                    .sum::<f64>()
                    .sqrt();
            let eta = anchors as f64;
            if pull <= eta {
                // The anchored point is the minimizer.
                return Ok(y);
            }
            let blend = eta / pull;
            target
                .iter()
                .zip(y.iter())
                .map(|(t, c)| (1.0 - blend) * t + blend * c)
                .collect()
        };
        let step_vec: Vec<f64> = next.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
        let step = step_vec.iter().map(|v| v * v).sum::<f64>().sqrt();
        let next_cost = total_cost(data, &next);
        debug_assert!(
            next_cost <= cost + 1e-9 * (1.0 + cost),
            "Weiszfeld objective increased: {cost} -> {next_cost} at iteration {iteration}"
        );
        cost = next_cost;
        y = next;
        last_step = step;
        if let Some(t) = trace.as_deref_mut() {
            t.push(cost);
        }

        // Contraction ratio and alignment of the last two steps.
        let (ratio, alignment) = match &prev_step {
            Some((prev_vec, prev_len)) if *prev_len > 0.0 && step > 0.0 => {
                let dot: f64 = step_vec.iter().zip(prev_vec.iter()).map(|(a, b)| a * b).sum();
                (dot / (prev_len * prev_len), dot / (step * prev_len))
            }
            _ => (0.0, 0.0),
        };
        let projected_tail = if ratio > 0.0 && ratio < 1.0 {
            step * ratio / (1.0 - ratio)
        } else if ratio >= 1.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if step < config.tol && (projected_tail < config.tol || step < config.tol * 1e-3) {
            return Ok(y);
        }

        // Geometric-series jump over the remaining (estimated) travel.
        if alignment > 0.995 && ratio > 0.3 && ratio < 0.99999 && iteration % 4 == 3 {
            let scale = ratio / (1.0 - ratio);
            let candidate: Vec<f64> = y
                .iter()
                .zip(step_vec.iter())
                .map(|(c, s)| c + s * scale)
                .collect();
            if admissible(&candidate) {
                let candidate_cost = total_cost(data, &candidate);
                if candidate_cost < cost {
                    cost = candidate_cost;
                    y = candidate;
                    prev_step = None;
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(cost);
                    }
                    continue;
                }
            }
        }
        prev_step = Some((step_vec, step));
    }
    Err(Error::Convergence {
        iterations: config.max_iter,
        last_step,
        tolerance: config.tol,
        last_iterate: y,
    })
}

// ===== sphere kernels =====

fn sphere_coords(points: &[Point]) -> Vec<[f64; 3]> {
    points
        .iter()
        .map(|p| match p {
            Point::Sphere(s) => *s.coords(),
            _ => unreachable!("check_sample guarantees sphere points"),
        })
        .collect()
}

/// Hard precondition for sphere solves: all pairwise distances below pi/2.
fn check_concentration(data: &[[f64; 3]]) -> Result<()> {
    let mut max_distance: f64 = 0.0;
    for i in 0..data.len() {
        for j in (i + 1)..data.len() {
            let d = dot3(&data[i], &data[j]).clamp(-1.0, 1.0).acos();
            max_distance = max_distance.max(d);
        }
    }
    if max_distance >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::ConcentrationViolation { max_distance });
    }
    Ok(())
}

/// Normalized coordinate-wise median; falls back to the first point when the
/// median vector is numerically zero.
fn sphere_init(data: &[[f64; 3]]) -> SpherePoint {
    let mut median = [0.0; 3];
    let mut column: Vec<f64> = Vec::with_capacity(data.len());
    for k in 0..3 {
        column.clear();
        column.extend(data.iter().map(|p| p[k]));
        column.sort_by(f64::total_cmp);
        let mid = column.len() / 2;
        median[k] = if column.len() % 2 == 1 {
            column[mid]
        } else {
            (column[mid - 1] + column[mid]) / 2.0
        };
    }
    let norm = norm3(&median);
    if norm < 1e-12 {
        return SpherePoint(data[0]);
    }
    SpherePoint([median[0] / norm, median[1] / norm, median[2] / norm])
}

fn sphere_cost(data: &[[f64; 3]], y: &SpherePoint, squared: bool) -> f64 {
    data.iter()
        .map(|p| {
            let d = dot3(y.coords(), p).clamp(-1.0, 1.0).acos();
            if squared {
                d * d
            } else {
                d
            }
        })
        .sum()
}

/// Shared descent loop for the sphere median and mean: proposes a tangent
/// step, halves it until the objective does not increase, and declares
/// convergence on a short accepted step.
fn sphere_descend(
    data: &[[f64; 3]],
    start: SpherePoint,
    config: &SolverConfig,
    squared: bool,
    mut trace: Option<&mut Vec<f64>>,
    propose: impl Fn(&SpherePoint) -> Result<Option<[f64; 3]>>,
) -> Result<SpherePoint> {
    let mut y = start;
    let mut cost = sphere_cost(data, &y, squared);
    if let Some(t) = trace.as_deref_mut() {
        t.push(cost);
    }
    let mut last_step = f64::INFINITY;
    for _ in 0..config.max_iter {
        let Some(mut step_vec) = propose(&y)? else {
            return Ok(y);
        };
        let mut step = norm3(&step_vec);
        if step < config.tol {
            return Ok(y);
        }
        // Guarded descent: the unit step is standard, halving keeps the
        // objective monotone even in edge configurations.
        let mut accepted = None;
        for _ in 0..30 {
            let candidate = sphere_exp(&y, &step_vec)?;
            let candidate_cost = sphere_cost(data, &candidate, squared);
            if candidate_cost <= cost + 1e-12 * (1.0 + cost) {
                accepted = Some((candidate, candidate_cost));
                break;
            }
            for c in &mut step_vec {
                *c /= 2.0;
            }
            step /= 2.0;
        }
        let Some((candidate, candidate_cost)) = accepted else {
            // No decrease at any scale: already at the minimizer.
            return Ok(y);
        };
        debug_assert!(candidate_cost <= cost + 1e-12 * (1.0 + cost));
        y = candidate;
        cost = candidate_cost;
        last_step = step;
        if let Some(t) = trace.as_deref_mut() {
            t.push(cost);
        }
        if step < config.tol {
            return Ok(y);
        }
    }
    Err(Error::Convergence {
        iterations: config.max_iter,
        last_step,
        tolerance: config.tol,
        last_iterate: y.coords().to_vec(),
    })
}

/// Riemannian Weiszfeld step: tangent average of log maps weighted by inverse
/// distance, with the Vardi–Zhang anchor adjustment.
fn sphere_weiszfeld(
    data: &[[f64; 3]],
    start: SpherePoint,
    config: &SolverConfig,
    trace: Option<&mut Vec<f64>>,
) -> Result<SpherePoint> {
    sphere_descend(data, start, config, false, trace, |y| {
        let mut pull = [0.0; 3];
        let mut denominator = 0.0;
        let mut anchors = 0usize;
        for p in data {
            let sp = SpherePoint(*p);
            let d = great_circle_distance(y, &sp);
            if d <= config.anchor_eps {
                anchors += 1;
                continue;
            }
            let v = sphere_log(y, &sp)?;
            let w = 1.0 / d;
            denominator += w;
            for k in 0..3 {
                pull[k] += w * v[k];
            }
        }
        if denominator == 0.0 {
            return Ok(None);
        }
        let pull_norm = norm3(&pull);
        let damping = if anchors == 0 {
            1.0
        } else {
            let eta = anchors as f64;
            if pull_norm <= eta {
                return Ok(None);
            }
            1.0 - eta / pull_norm
        };
        let scale = damping / denominator;
        Ok(Some([pull[0] * scale, pull[1] * scale, pull[2] * scale]))
    })
}

/// Karcher mean fixed-point step: exp of the plain tangent average.
fn sphere_karcher_mean(
    data: &[[f64; 3]],
    start: SpherePoint,
    config: &SolverConfig,
) -> Result<SpherePoint> {
    let n = data.len() as f64;
    sphere_descend(data, start, config, true, None, |y| {
        let mut mean = [0.0; 3];
        for p in data {
            let v = sphere_log(y, &SpherePoint(*p))?;
            for k in 0..3 {
                mean[k] += v[k];
            }
        }
        for k in 0..3 {
            mean[k] /= n;
        }
        Ok(Some(mean))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn euclid(points: &[[f64; 2]]) -> Vec<Point> {
        points
            .iter()
            .map(|p| Point::Euclidean(array![p[0], p[1]]))
            .collect()
    }

    const SPACE_2D: MetricSpace = MetricSpace::Euclidean { dim: 2 };

    /// Dense grid search over [0,1]^2, the independent optimum for planar
    /// fixtures (step 1e-3).
    fn grid_search_2d(points: &[[f64; 2]]) -> [f64; 2] {
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for ix in 0..=1000 {
            let x = ix as f64 / 1000.0;
            for iy in 0..=1000 {
                let y = iy as f64 / 1000.0;
                let cost: f64 = points
                    .iter()
                    .map(|p| ((p[0] - x).powi(2) + (p[1] - y).powi(2)).sqrt())
                    .sum();
                if cost < best.0 {
                    best = (cost, [x, y]);
                }
            }
        }
        best.1
    }

    #[test]
    fn median_of_equilateral_triangle_is_fermat_point() {
        // Equilateral triangle: Fermat point = centroid.
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, 3.0_f64.sqrt() / 2.0]];
        let median = frechet_median(&SPACE_2D, &euclid(&pts), &SolverConfig::default()).unwrap();
        let Point::Euclidean(m) = median else { panic!() };
        assert_abs_diff_eq!(m[0], 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(m[1], 3.0_f64.sqrt() / 6.0, epsilon = 1e-7);
    }

    #[test]
    fn median_matches_dense_grid_search() {
        let pts = [[0.1, 0.2], [0.9, 0.15], [0.4, 0.85], [0.55, 0.5], [0.2, 0.7]];
        let median = frechet_median(&SPACE_2D, &euclid(&pts), &SolverConfig::default()).unwrap();
        let Point::Euclidean(m) = median else { panic!() };
        let oracle = grid_search_2d(&pts);
        assert!((m[0] - oracle[0]).abs() <= 2e-3);
        assert!((m[1] - oracle[1]).abs() <= 2e-3);
    }

    #[test]
    fn majority_anchor_pins_the_median() {
        // Three of five points coincide: the median is that point exactly
        // (Vardi-Zhang stopping rule, not an approximation).
        let pts = [[0.3, 0.3], [0.3, 0.3], [0.3, 0.3], [0.9, 0.1], [0.1, 0.9]];
        let median = frechet_median(&SPACE_2D, &euclid(&pts), &SolverConfig::default()).unwrap();
        let Point::Euclidean(m) = median else { panic!() };
        assert_abs_diff_eq!(m[0], 0.3, epsilon = 1e-9);
        assert_abs_diff_eq!(m[1], 0.3, epsilon = 1e-9);
    }

    #[test]
    fn single_point_sample_returns_that_point() {
        let pts = [[0.42, 0.17]];
        let median = frechet_median(&SPACE_2D, &euclid(&pts), &SolverConfig::default()).unwrap();
        let Point::Euclidean(m) = median else { panic!() };
        assert_eq!(m[0], 0.42);
        assert_eq!(m[1], 0.17);
        assert!(frechet_median(&SPACE_2D, &[], &SolverConfig::default()).is_err());
    }

    #[test]
    fn flat_mean_is_arithmetic_mean() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.6]];
        let mean = frechet_mean(&SPACE_2D, &euclid(&pts), &SolverConfig::default()).unwrap();
        let Point::Euclidean(m) = mean else { panic!() };
        assert_abs_diff_eq!(m[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn laplacian_median_of_identical_matrices_is_exact() {
        let l = GraphLaplacian::new(array![[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        let space = MetricSpace::Laplacian { nodes: 2 };
        let points = vec![Point::Laplacian(l.clone()); 4];
        let median = frechet_median(&space, &points, &SolverConfig::default()).unwrap();
        let Point::Laplacian(m) = median else { panic!() };
        assert_eq!(m.entries(), l.entries());
    }

    #[test]
    fn laplacian_median_stays_a_laplacian() {
        let space = MetricSpace::Laplacian { nodes: 3 };
        let make = |w: f64| {
            Point::Laplacian(
                GraphLaplacian::new(array![
                    [w, -w, 0.0],
                    [-w, 2.0 * w, -w],
                    [0.0, -w, w],
                ])
                .unwrap(),
            )
        };
        let points = vec![make(0.5), make(1.0), make(2.0), make(4.0)];
        // Constructor inside unflatten re-validates every invariant.
        let median = frechet_median(&space, &points, &SolverConfig::default()).unwrap();
        let Point::Laplacian(m) = median else { panic!() };
        assert!(m.entries()[(0, 1)] <= 0.0);
    }

    #[test]
    fn laplacian_median_handles_mismatched_sparsity_patterns() {
        // Entrywise medians of these three Laplacians have nonzero row sums
        // (median degree of node 1 is 2, median incident weights sum to 3),
        // so the solver must not use the raw entrywise median as its start.
        let space = MetricSpace::Laplacian { nodes: 3 };
        let make = |w01: f64, w12: f64| {
            Point::Laplacian(
                GraphLaplacian::new(array![
                    [w01, -w01, 0.0],
                    [-w01, w01 + w12, -w12],
                    [0.0, -w12, w12],
                ])
                .unwrap(),
            )
        };
        let points = vec![make(1.0, 0.0), make(1.0, 2.0), make(0.0, 2.0)];
        let median = frechet_median(&space, &points, &SolverConfig::default()).unwrap();
        let Point::Laplacian(m) = median else { panic!() };
        let row_sum: f64 = m.entries().row(1).sum();
        assert_abs_diff_eq!(row_sum, 0.0, epsilon = 1e-9);
    }

    fn sphere_point(v: [f64; 3]) -> Point {
        let n = norm3(&v);
        Point::Sphere(SpherePoint([v[0] / n, v[1] / n, v[2] / n]))
    }

    /// Dense search over a tangent-plane disc at `center`, the independent
    /// optimum for sphere fixtures (step 1e-3 in tangent coordinates).
    fn sphere_grid_search(data: &[Point], center: [f64; 3], radius: f64) -> SpherePoint {
        let base = SpherePoint(center);
        // Orthonormal tangent frame at center.
        let e1 = {
            let raw = if center[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let along = dot3(&center, &raw);
            let v = [
                raw[0] - along * center[0],
                raw[1] - along * center[1],
                raw[2] - along * center[2],
            ];
            let n = norm3(&v);
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let e2 = [
            center[1] * e1[2] - center[2] * e1[1],
            center[2] * e1[0] - center[0] * e1[2],
            center[0] * e1[1] - center[1] * e1[0],
        ];
        let steps = (radius / 1e-3).ceil() as i64;
        let mut best = (f64::INFINITY, base);
        for ia in -steps..=steps {
            let a = ia as f64 * 1e-3;
            for ib in -steps..=steps {
                let b = ib as f64 * 1e-3;
                let tangent = [
                    a * e1[0] + b * e2[0],
                    a * e1[1] + b * e2[1],
                    a * e1[2] + b * e2[2],
                ];
                let candidate = sphere_exp(&base, &tangent).unwrap();
                let cost: f64 = data
                    .iter()
                    .map(|p| match p {
                        Point::Sphere(s) => great_circle_distance(&candidate, s),
                        _ => unreachable!(),
                    })
                    .sum();
                if cost < best.0 {
                    best = (cost, candidate);
                }
            }
        }
        best.1
    }

    #[test]
    fn sphere_median_of_symmetric_configuration_is_the_pole() {
        // Three points equally spaced on a circle around the north pole.
        let tilt = 0.4_f64;
        let pts: Vec<Point> = (0..3)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                sphere_point([
                    tilt.sin() * phi.cos(),
                    tilt.sin() * phi.sin(),
                    tilt.cos(),
                ])
            })
            .collect();
        let median =
            frechet_median(&MetricSpace::Sphere, &pts, &SolverConfig::default()).unwrap();
        let Point::Sphere(m) = median else { panic!() };
        assert_abs_diff_eq!(m.coords()[2], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn sphere_median_matches_tangent_grid_search() {
        let pts = vec![
            sphere_point([0.9, 0.1, 0.3]),
            sphere_point([0.8, -0.2, 0.4]),
            sphere_point([1.0, 0.25, 0.1]),
            sphere_point([0.85, 0.0, -0.15]),
        ];
        let median =
            frechet_median(&MetricSpace::Sphere, &pts, &SolverConfig::default()).unwrap();
        let Point::Sphere(m) = median else { panic!() };
        let oracle = sphere_grid_search(&pts, [1.0, 0.0, 0.0], 0.5);
        assert!(
            great_circle_distance(&m, &oracle) <= 2e-3,
            "median {:?} vs grid optimum {:?}",
            m.coords(),
            oracle.coords()
        );
    }

    #[test]
    fn sphere_mean_of_two_points_is_the_geodesic_midpoint() {
        let a = sphere_point([1.0, 0.0, 0.0]);
        let b = sphere_point([0.8, 0.6, 0.0]);
        let mean = frechet_mean(&MetricSpace::Sphere, &[a.clone(), b.clone()], &SolverConfig::default())
            .unwrap();
        let (Point::Sphere(pa), Point::Sphere(pb), Point::Sphere(m)) = (&a, &b, &mean) else {
            panic!()
        };
        assert_abs_diff_eq!(
            great_circle_distance(pa, m),
            great_circle_distance(pb, m),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            great_circle_distance(pa, m) + great_circle_distance(m, pb),
            great_circle_distance(pa, pb),
            epsilon = 1e-9
        );
    }

    #[test]
    fn sphere_mean_matches_tangent_grid_search() {
        // Squared-distance objective on the same fixture style.
        let pts = vec![
            sphere_point([0.9, 0.2, 0.2]),
            sphere_point([0.95, -0.1, 0.3]),
            sphere_point([0.8, 0.15, -0.1]),
        ];
        let mean = frechet_mean(&MetricSpace::Sphere, &pts, &SolverConfig::default()).unwrap();
        let Point::Sphere(m) = mean else { panic!() };
        let base = SpherePoint([1.0, 0.0, 0.0]);
        let mut best = (f64::INFINITY, base);
        for ia in -400..=400 {
            for ib in -400..=400 {
                let tangent_a = ia as f64 * 1e-3;
                let tangent_b = ib as f64 * 1e-3;
                let candidate =
                    sphere_exp(&base, &[0.0, tangent_a, tangent_b]).unwrap();
                let cost: f64 = pts
                    .iter()
                    .map(|p| match p {
                        Point::Sphere(s) => great_circle_distance(&candidate, s).powi(2),
                        _ => unreachable!(),
                    })
                    .sum();
                if cost < best.0 {
                    best = (cost, candidate);
                }
            }
        }
        assert!(great_circle_distance(&m, &best.1) <= 2e-3);
    }

    #[test]
    fn dispersed_sphere_sample_is_rejected() {
        let pts = vec![
            sphere_point([1.0, 0.0, 0.0]),
            sphere_point([-1.0, 0.1, 0.0]),
            sphere_point([0.0, 0.0, 1.0]),
        ];
        let err = frechet_median(&MetricSpace::Sphere, &pts, &SolverConfig::default());
        assert!(matches!(err, Err(Error::ConcentrationViolation { .. })));
        let err = frechet_mean(&MetricSpace::Sphere, &pts, &SolverConfig::default());
        assert!(matches!(err, Err(Error::ConcentrationViolation { .. })));
    }

    #[test]
    fn convergence_error_carries_diagnostics() {
        let pts = euclid(&[[0.0, 0.0], [1.0, 0.0], [0.3, 0.9]]);
        let config = SolverConfig {
            max_iter: 1,
            tol: 1e-15,
            anchor_eps: 1e-10,
        };
        match frechet_median(&SPACE_2D, &pts, &config) {
            Err(Error::Convergence {
                iterations,
                last_step,
                tolerance,
                last_iterate,
            }) => {
                assert_eq!(iterations, 1);
                assert!(last_step > tolerance);
                assert_eq!(last_iterate.len(), 2);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
