//! Metric spaces the pipeline operates on: graph Laplacians under the
//! Frobenius metric, the unit sphere S^2 under the great-circle metric, and
//! plain Euclidean vectors.
//!
//! Laplacians are treated extrinsically: the Frobenius distance between two
//! symmetric matrices equals the Euclidean distance between their flattened
//! entries, so medians and means reduce to vector problems. The sphere is
//! treated intrinsically through its log/exp maps.

mod median;

pub use median::{frechet_mean, frechet_median, frechet_median_from, frechet_median_with_trace, SolverConfig};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ===== spaces and points =====

/// A metric space a trajectory sample can live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricSpace {
    /// Graph Laplacians of networks on `nodes` vertices, Frobenius metric.
    Laplacian { nodes: usize },
    /// Unit sphere in R^3, great-circle metric.
    Sphere,
    /// R^dim with the Euclidean metric.
    Euclidean { dim: usize },
}

/// One observed object in a metric space.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Laplacian(GraphLaplacian),
    Sphere(SpherePoint),
    Euclidean(Array1<f64>),
}

/// A graph Laplacian `L = D - A`: symmetric, zero row sums, non-positive
/// off-diagonal entries, non-negative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLaplacian {
    entries: Array2<f64>,
}

/// A point on the unit sphere in R^3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(pub [f64; 3]);

/// Outcome of a report-only membership check; never an error.
#[derive(Debug, Clone, Default)]
pub struct ValidityReport {
    pub ok: bool,
    pub violations: Vec<String>,
}

/// Row-sum slack tolerated when validating a Laplacian.
pub const LAPLACIAN_ROW_SUM_TOL: f64 = 1e-9;
/// Largest positive off-diagonal entry tolerated in a Laplacian.
pub const LAPLACIAN_OFF_DIAG_TOL: f64 = 1e-12;
/// Unit-norm slack tolerated for sphere points.
pub const SPHERE_NORM_TOL: f64 = 1e-9;

impl GraphLaplacian {
    /// Validates and wraps a Laplacian matrix.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let violations = laplacian_violations(&entries);
        if let Some(first) = violations.first() {
            return Err(Error::invalid(format!("not a graph Laplacian: {first}")));
        }
        Ok(GraphLaplacian { entries })
    }

    /// Builds `L = D - A` from a symmetric non-negative adjacency matrix with
    /// zero diagonal.
    pub fn from_adjacency(adjacency: &Array2<f64>) -> Result<Self> {
        let p = adjacency.nrows();
        if adjacency.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: adjacency.ncols(),
                context: "adjacency matrix must be square",
            });
        }
        let mut entries = Array2::zeros((p, p));
        for i in 0..p {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::invalid(format!(
                    "adjacency has a self-loop at node {i}"
                )));
            }
            let mut degree = 0.0;
            for j in 0..p {
                let a = adjacency[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::invalid(format!(
                        "adjacency entry ({i}, {j}) = {a} is not a finite non-negative weight"
                    )));
                }
                if a != adjacency[(j, i)] {
                    return Err(Error::invalid(format!(
                        "adjacency not symmetric at ({i}, {j})"
                    )));
                }
                degree += a;
                if i != j {
                    entries[(i, j)] = -a;
                }
            }
            entries[(i, i)] = degree;
        }
        Ok(GraphLaplacian { entries })
    }

    /// Number of nodes.
    pub fn nodes(&self) -> usize {
        self.entries.nrows()
    }

    /// The validated matrix.
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }
}

impl SpherePoint {
    /// Validates unit norm (within [`SPHERE_NORM_TOL`]) and wraps.
    pub fn new(coords: [f64; 3]) -> Result<Self> {
        let norm = norm3(&coords);
        if !norm.is_finite() || (norm - 1.0).abs() > SPHERE_NORM_TOL {
            return Err(Error::invalid(format!(
                "sphere point has norm {norm}, expected 1 within {SPHERE_NORM_TOL:e}"
            )));
        }
        Ok(SpherePoint(coords))
    }

    /// Coordinates in R^3.
    pub fn coords(&self) -> &[f64; 3] {
        &self.0
    }
}

impl MetricSpace {
    /// Distance between two points of this space.
    ///
    /// Errors when either point does not belong to the space.
    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        self.check_point(a)?;
        self.check_point(b)?;
        Ok(match (a, b) {
            (Point::Laplacian(x), Point::Laplacian(y)) => {
                frobenius_distance(x.entries(), y.entries())
            }
            (Point::Sphere(x), Point::Sphere(y)) => great_circle_distance(x, y),
            (Point::Euclidean(x), Point::Euclidean(y)) => {
                let mut acc = 0.0;
                for (u, v) in x.iter().zip(y.iter()) {
                    let d = u - v;
                    acc += d * d;
                }
                acc.sqrt()
            }
            _ => unreachable!("check_point guarantees matching kinds"),
        })
    }

    /// Errors unless `p` is a member of this space.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        match (self, p) {
            (MetricSpace::Laplacian { nodes }, Point::Laplacian(l)) => {
                if l.nodes() != *nodes {
                    return Err(Error::DimensionMismatch {
                        expected: *nodes,
                        actual: l.nodes(),
                        context: "Laplacian node count",
                    });
                }
                Ok(())
            }
            (MetricSpace::Sphere, Point::Sphere(_)) => Ok(()),
            (MetricSpace::Euclidean { dim }, Point::Euclidean(v)) => {
                if v.len() != *dim {
                    return Err(Error::DimensionMismatch {
                        expected: *dim,
                        actual: v.len(),
                        context: "Euclidean dimension",
                    });
                }
                Ok(())
            }
            _ => Err(Error::invalid(format!(
                "point kind does not match space {self:?}"
            ))),
        }
    }
}

/// Report-only membership check: collects every violated space invariant.
pub fn validate_point(space: &MetricSpace, point: &Point) -> ValidityReport {
    let mut violations = Vec::new();
    match (space, point) {
        (MetricSpace::Laplacian { nodes }, Point::Laplacian(l)) => {
            if l.nodes() != *nodes {
                violations.push(format!("node count {} != {}", l.nodes(), nodes));
            }
            violations.extend(laplacian_violations(l.entries()));
        }
        (MetricSpace::Sphere, Point::Sphere(p)) => {
            let norm = norm3(p.coords());
            if !norm.is_finite() || (norm - 1.0).abs() > SPHERE_NORM_TOL {
                violations.push(format!("norm {norm} not within {SPHERE_NORM_TOL:e} of 1"));
            }
        }
        (MetricSpace::Euclidean { dim }, Point::Euclidean(v)) => {
            if v.len() != *dim {
                violations.push(format!("dimension {} != {}", v.len(), dim));
            }
            if v.iter().any(|x| !x.is_finite()) {
                violations.push("non-finite coordinate".to_string());
            }
        }
        _ => violations.push(format!("point kind does not match space {space:?}")),
    }
    ValidityReport {
        ok: violations.is_empty(),
        violations,
    }
}

fn laplacian_violations(entries: &Array2<f64>) -> Vec<String> {
    let mut violations = Vec::new();
    let p = entries.nrows();
    if entries.ncols() != p {
        violations.push(format!("matrix is {}x{}, not square", p, entries.ncols()));
        return violations;
    }
    if p == 0 {
        violations.push("empty matrix".to_string());
        return violations;
    }
    for i in 0..p {
        if !entries[(i, i)].is_finite() || entries[(i, i)] < 0.0 {
            violations.push(format!("diagonal entry {i} = {} < 0", entries[(i, i)]));
        }
        let mut row_sum = 0.0;
        for j in 0..p {
            let e = entries[(i, j)];
            if !e.is_finite() {
                violations.push(format!("entry ({i}, {j}) not finite"));
                return violations;
            }
            row_sum += e;
            if i != j {
                if e > LAPLACIAN_OFF_DIAG_TOL {
                    violations.push(format!("off-diagonal entry ({i}, {j}) = {e} > 0"));
                }
                if e != entries[(j, i)] {
                    violations.push(format!("asymmetric at ({i}, {j})"));
                }
            }
        }
        if row_sum.abs() > LAPLACIAN_ROW_SUM_TOL {
            violations.push(format!("row {i} sums to {row_sum:e}"));
        }
    }
    violations
}

// ===== sphere geometry =====

/// Great-circle distance `arccos(<a, b>)` with the inner product clamped to
/// [-1, 1] against rounding.
pub fn great_circle_distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
    dot3(a.coords(), b.coords()).clamp(-1.0, 1.0).acos()
}

/// Riemannian log map at `base`: the tangent vector pointing to `target`
/// with length equal to the great-circle distance.
///
/// Errors for (numerically) antipodal pairs, where the map is singular.
pub fn sphere_log(base: &SpherePoint, target: &SpherePoint) -> Result<[f64; 3]> {
    let p = base.coords();
    let q = target.coords();
    let dot = dot3(p, q).clamp(-1.0, 1.0);
    // Component of q orthogonal to p.
    let u = [q[0] - dot * p[0], q[1] - dot * p[1], q[2] - dot * p[2]];
    let u_norm = norm3(&u);
    if u_norm < 1e-12 {
        if dot > 0.0 {
            return Ok([0.0, 0.0, 0.0]);
        }
        return Err(Error::AntipodalPoints { inner: dot });
    }
    let theta = dot.acos();
    let scale = theta / u_norm;
    Ok([u[0] * scale, u[1] * scale, u[2] * scale])
}

/// Riemannian exp map at `base`. A component of `tangent` along `base`
/// (which cannot occur for true tangent vectors) is projected away; the
/// result is renormalized to unit length.
pub fn sphere_exp(base: &SpherePoint, tangent: &[f64; 3]) -> Result<SpherePoint> {
    let p = base.coords();
    let along = dot3(p, tangent);
    let v = [
        tangent[0] - along * p[0],
        tangent[1] - along * p[1],
        tangent[2] - along * p[2],
    ];
    let theta = norm3(&v);
    if theta == 0.0 {
        return Ok(*base);
    }
    let (sin_t, cos_t) = theta.sin_cos();
    let scale = sin_t / theta;
    let mut out = [
        cos_t * p[0] + scale * v[0],
        cos_t * p[1] + scale * v[1],
        cos_t * p[2] + scale * v[2],
    ];
    let norm = norm3(&out);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::invalid("exp map produced a degenerate point"));
    }
    for c in &mut out {
        *c /= norm;
    }
    Ok(SpherePoint(out))
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn path_laplacian(w: f64) -> GraphLaplacian {
        // Path graph on 3 nodes with both edges weighted w.
        GraphLaplacian::new(array![
            [w, -w, 0.0],
            [-w, 2.0 * w, -w],
            [0.0, -w, w],
        ])
        .unwrap()
    }

    #[test]
    fn laplacian_from_adjacency_matches_degree_minus_adjacency() {
        let a = array![[0.0, 2.0, 0.5], [2.0, 0.0, 0.0], [0.5, 0.0, 0.0]];
        let l = GraphLaplacian::from_adjacency(&a).unwrap();
        assert_abs_diff_eq!(l.entries()[(0, 0)], 2.5);
        assert_abs_diff_eq!(l.entries()[(0, 1)], -2.0);
        assert_abs_diff_eq!(l.entries()[(1, 1)], 2.0);
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| l.entries()[(i, j)]).sum();
            assert_abs_diff_eq!(row, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_non_laplacians() {
        assert!(GraphLaplacian::new(array![[1.0, 0.5], [0.5, 1.0]]).is_err());
        assert!(GraphLaplacian::new(array![[1.0, -1.0], [-1.0, 0.5]]).is_err());
        let asym = array![[0.0, 1.0], [2.0, 0.0]];
        assert!(GraphLaplacian::from_adjacency(&asym).is_err());
        let self_loop = array![[1.0, 0.0], [0.0, 0.0]];
        assert!(GraphLaplacian::from_adjacency(&self_loop).is_err());
    }

    #[test]
    fn frobenius_distance_on_laplacians() {
        let space = MetricSpace::Laplacian { nodes: 3 };
        let a = Point::Laplacian(path_laplacian(1.0));
        let b = Point::Laplacian(path_laplacian(2.0));
        // Difference is the w=1 path Laplacian: six +/-1 entries plus a
        // center diagonal of 2, so squared entries sum to 10.
        assert_abs_diff_eq!(
            space.distance(&a, &b).unwrap(),
            10.0_f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(space.distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn great_circle_distance_quarter_turn() {
        let space = MetricSpace::Sphere;
        let x = Point::Sphere(SpherePoint::new([1.0, 0.0, 0.0]).unwrap());
        let z = Point::Sphere(SpherePoint::new([0.0, 0.0, 1.0]).unwrap());
        assert_abs_diff_eq!(
            space.distance(&x, &z).unwrap(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn clamping_guards_acos_domain() {
        // Numerically identical unit vectors can have inner product > 1.
        let p = SpherePoint::new([1.0 / 3.0_f64.sqrt(); 3]).unwrap();
        assert_eq!(great_circle_distance(&p, &p), 0.0);
    }

    #[test]
    fn log_exp_round_trip() {
        let p = SpherePoint::new([1.0, 0.0, 0.0]).unwrap();
        let q = SpherePoint::new([0.0, 0.6, 0.8]).unwrap();
        let v = sphere_log(&p, &q).unwrap();
        let back = sphere_exp(&p, &v).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(back.coords()[k], q.coords()[k], epsilon = 1e-12);
        }
        // Tangent length equals the distance.
        assert_abs_diff_eq!(
            norm3(&v),
            great_circle_distance(&p, &q),
            epsilon = 1e-12
        );
    }

    #[test]
    fn log_of_antipodal_points_errors() {
        let p = SpherePoint::new([1.0, 0.0, 0.0]).unwrap();
        let q = SpherePoint::new([-1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            sphere_log(&p, &q),
            Err(Error::AntipodalPoints { .. })
        ));
    }

    #[test]
    fn mismatched_point_and_space_error() {
        let space = MetricSpace::Euclidean { dim: 2 };
        let a = Point::Euclidean(array![1.0, 2.0]);
        let b = Point::Euclidean(array![1.0, 2.0, 3.0]);
        assert!(space.distance(&a, &b).is_err());
        let s = Point::Sphere(SpherePoint::new([0.0, 1.0, 0.0]).unwrap());
        assert!(space.distance(&a, &s).is_err());
    }

    #[test]
    fn validate_point_reports_instead_of_erroring() {
        let space = MetricSpace::Sphere;
        let bad = Point::Sphere(SpherePoint([0.5, 0.0, 0.0]));
        let report = validate_point(&space, &bad);
        assert!(!report.ok);
        assert_eq!(report.violations.len(), 1);
        let good = Point::Sphere(SpherePoint::new([0.0, 0.0, 1.0]).unwrap());
        assert!(validate_point(&space, &good).ok);
    }
}
