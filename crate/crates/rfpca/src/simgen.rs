//! Seeded synthetic-data generators: time-varying community networks
//! (graph-Laplacian trajectories), spherical trajectories, and contamination
//! operators for robustness experiments.
//!
//! # Random number streams
//!
//! All generation uses the ChaCha8 counter-based generator with a documented
//! stream layout (version tag [`RNG_VERSION`], recorded in run metadata):
//!
//! - stream 0: global draws (outlier subject selection),
//! - stream 1 + i: subject `i`'s own draws, consumed in a fixed order
//!   (time-major, then pair `(u, v)` with `u < v`),
//! - stream 2^32 + i: contamination draws for subject `i` (fresh noise for
//!   regenerated outliers).
//!
//! Per-subject streams make generation embarrassingly parallel without any
//! cross-subject draw-order coupling: the same (config, seed) pair yields
//! bitwise-identical samples in parallel and sequential builds.

use ndarray::Array2;
use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::metric::{sphere_exp, GraphLaplacian, MetricSpace, Point, SpherePoint};
use crate::trajectory::ObjectTrajectorySample;

/// Version tag of the generator's RNG discipline, recorded in run metadata.
pub const RNG_VERSION: &str = "chacha8/1";

const CONTAMINATION_STREAM_BASE: u64 = 1 << 32;

// ===== network generator =====

/// Three-group dynamic community network generator.
///
/// Nodes split into three fixed, contiguous communities. For a subject in
/// group `g`, within-community edges at time `t` carry weight
/// `w0 + amplitude[g] * exp(-(t - tau[g])^2 / (2 * 0.02)) + noise` and
/// between-community edges carry `w0 / 4 + noise`, with iid Gaussian noise
/// truncated at 0. Group memberships of nodes stay fixed over time; the
/// trajectory of each subject is the sequence of graph Laplacians built from
/// these weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSimConfig {
    /// Node count p (communities are three contiguous blocks of sizes as
    /// equal as possible).
    pub nodes: usize,
    /// Subjects per group (three groups, n = 3m).
    pub subjects_per_group: usize,
    /// Grid size T on [0, 1].
    pub t_len: usize,
    /// Per-group bump peak times in (0, 1).
    pub tau: [f64; 3],
    /// Per-group bump amplitudes.
    pub amplitude: [f64; 3],
    /// Base within-community weight; between-community base is a quarter.
    pub base_weight: f64,
    /// Edge-noise standard deviation.
    pub noise_sd: f64,
}

impl Default for NetworkSimConfig {
    fn default() -> Self {
        NetworkSimConfig {
            nodes: 20,
            subjects_per_group: 100,
            t_len: 25,
            tau: [0.3, 0.4, 0.7],
            amplitude: [1.0, 1.4, 1.8],
            base_weight: 0.5,
            noise_sd: 0.1,
        }
    }
}

impl NetworkSimConfig {
    fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::invalid("network generator needs at least 2 nodes"));
        }
        if self.subjects_per_group == 0 {
            return Err(Error::invalid("subjects per group must be positive"));
        }
        if self.t_len < 2 {
            return Err(Error::invalid("grid needs at least 2 time points"));
        }
        if self.tau.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::invalid("bump peak times must lie in (0, 1)"));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::invalid("noise sd must be finite and non-negative"));
        }
        if self.amplitude.iter().any(|a| !a.is_finite()) || !self.base_weight.is_finite() {
            return Err(Error::invalid("weights must be finite"));
        }
        Ok(())
    }

    /// Total subject count n = 3m.
    pub fn n(&self) -> usize {
        3 * self.subjects_per_group
    }

    /// Community label of each node: three contiguous blocks.
    pub fn node_communities(&self) -> Vec<usize> {
        let p = self.nodes;
        let base = p / 3;
        let rem = p % 3;
        // First `rem` communities get one extra node.
        let sizes = [
            base + usize::from(rem > 0),
            base + usize::from(rem > 1),
            base,
        ];
        let mut labels = Vec::with_capacity(p);
        for (c, &s) in sizes.iter().enumerate() {
            labels.extend(std::iter::repeat_n(c, s));
        }
        labels
    }

    /// Group label of each subject: contiguous blocks of m.
    pub fn group_labels(&self) -> Vec<usize> {
        (0..self.n()).map(|i| i / self.subjects_per_group).collect()
    }
}

fn bump(t: f64, tau: f64) -> f64 {
    (-(t - tau) * (t - tau) / (2.0 * 0.02)).exp()
}

/// Weight profile hook so outlier schemes can reshape the clean curves.
#[derive(Debug, Clone, Copy, PartialEq)]
enum WeightProfile {
    Clean,
    /// Two bumps at tau +/- offset instead of one at tau.
    Bimodal { offset: f64 },
    /// Between-community weights forced to exactly zero.
    ZeroBetween,
}

fn subject_laplacians(
    cfg: &NetworkSimConfig,
    group: usize,
    grid: &TimeGrid,
    communities: &[usize],
    rng: &mut ChaCha8Rng,
    profile: WeightProfile,
) -> Result<Vec<Point>> {
    let p = cfg.nodes;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let tau = cfg.tau[group];
    let amp = cfg.amplitude[group];
    // Edge noise is a per-subject connectivity trait: one draw per edge,
    // held constant over time, so subjects keep an individual offset from
    // the group's deterministic weight curves.
    let mut edge_noise = Array2::zeros((p, p));
    for u in 0..p {
        for v in (u + 1)..p {
            let noise = cfg.noise_sd * normal.sample(rng);
            edge_noise[(u, v)] = noise;
        }
    }
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let mut adjacency = Array2::zeros((p, p));
        for u in 0..p {
            for v in (u + 1)..p {
                let within = communities[u] == communities[v];
                let noise = edge_noise[(u, v)];
                let weight = if within {
                    let shape = match profile {
                        WeightProfile::Clean | WeightProfile::ZeroBetween => bump(t, tau),
                        WeightProfile::Bimodal { offset } => {
                            bump(t, tau - offset) + bump(t, tau + offset)
                        }
                    };
                    (cfg.base_weight + amp * shape + noise).max(0.0)
                } else {
                    match profile {
                        WeightProfile::ZeroBetween => 0.0,
                        _ => (cfg.base_weight / 4.0 + noise).max(0.0),
                    }
                };
                adjacency[(u, v)] = weight;
                adjacency[(v, u)] = weight;
            }
        }
        out.push(Point::Laplacian(GraphLaplacian::from_adjacency(&adjacency)?));
    }
    Ok(out)
}

fn subject_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates the three-group network sample: subjects 0..m are group 0, the
/// next m group 1, the last m group 2. Deterministic per (config, seed).
pub fn gen_network_sample(cfg: &NetworkSimConfig, seed: u64) -> Result<ObjectTrajectorySample> {
    cfg.validate()?;
    let grid = TimeGrid::uniform(cfg.t_len)?;
    let communities = cfg.node_communities();
    let groups = cfg.group_labels();
    let gen_one = |i: usize| -> Result<Vec<Point>> {
        let mut rng = subject_rng(seed, 1 + i as u64);
        subject_laplacians(cfg, groups[i], &grid, &communities, &mut rng, WeightProfile::Clean)
    };
    #[cfg(feature = "parallel")]
    let subjects: Result<Vec<Vec<Point>>> = (0..cfg.n()).into_par_iter().map(gen_one).collect();
    #[cfg(not(feature = "parallel"))]
    let subjects: Result<Vec<Vec<Point>>> = (0..cfg.n()).map(gen_one).collect();
    ObjectTrajectorySample::new(MetricSpace::Laplacian { nodes: cfg.nodes }, grid, subjects?)
}

// ===== contamination =====

/// How outlying subjects are manufactured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum ContaminationScheme {
    /// Every edge weight becomes `scale * (weight + shift)` (shift applied
    /// before scaling).
    ShiftScale { shift: f64, scale: f64 },
    /// Outliers are regenerated with two bumps at tau +/- offset.
    Bimodal { offset: f64 },
    /// Outliers are regenerated with between-community weights zeroed.
    ZeroWeight,
}

/// Contamination: which fraction of subjects to replace and how.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    /// Outlier fraction in [0, 1); exactly round(fraction * n) subjects are
    /// replaced.
    pub fraction: f64,
    pub scheme: ContaminationScheme,
}

impl ContaminationSpec {
    /// The shift-then-scale outlier scheme with its standard parameters
    /// (shift 0.5, scale 5).
    pub fn shift_scale(fraction: f64) -> Self {
        ContaminationSpec {
            fraction,
            scheme: ContaminationScheme::ShiftScale {
                shift: 0.5,
                scale: 5.0,
            },
        }
    }
}

/// Rebuilds a subject's adjacency weights from a Laplacian trajectory,
/// applies shift-then-scale, and reassembles Laplacians.
fn shift_scale_subject(row: &[Point], shift: f64, scale: f64) -> Result<Vec<Point>> {
    let mut out = Vec::with_capacity(row.len());
    for point in row {
        let Point::Laplacian(l) = point else {
            return Err(Error::invalid(
                "shift-scale contamination applies to Laplacian trajectories",
            ));
        };
        let p = l.nodes();
        let entries = l.entries();
        let mut adjacency = Array2::zeros((p, p));
        for u in 0..p {
            for v in 0..p {
                if u != v {
                    // Off-diagonal Laplacian entries are minus the weights.
                    let weight = -entries[(u, v)];
                    adjacency[(u, v)] = scale * (weight.max(0.0) + shift);
                }
            }
        }
        out.push(Point::Laplacian(GraphLaplacian::from_adjacency(&adjacency)?));
    }
    Ok(out)
}

/// Replaces `round(fraction * n)` uniformly chosen subjects with outliers.
///
/// The generator config must be the one the sample came from: the bimodal
/// and zero-weight schemes regenerate the chosen subjects' weight curves
/// from scratch (fresh noise from the contamination streams), which requires
/// the group structure and weight parameters.
pub fn contaminate(
    cfg: &NetworkSimConfig,
    sample: &ObjectTrajectorySample,
    spec: &ContaminationSpec,
    seed: u64,
) -> Result<(ObjectTrajectorySample, Vec<usize>)> {
    if !(spec.fraction >= 0.0 && spec.fraction < 1.0) {
        return Err(Error::invalid(format!(
            "contamination fraction must lie in [0, 1), got {}",
            spec.fraction
        )));
    }
    let n = sample.len();
    if n != cfg.n() {
        return Err(Error::DimensionMismatch {
            expected: cfg.n(),
            actual: n,
            context: "sample size vs generator config",
        });
    }
    let count = (spec.fraction * n as f64).round() as usize;
    let mut selection_rng = subject_rng(seed, 0);
    let mut indices: Vec<usize> = index_sample(&mut selection_rng, n, count).into_vec();
    indices.sort_unstable();

    let groups = cfg.group_labels();
    let communities = cfg.node_communities();
    let mut subjects = sample.subjects().to_vec();
    for &i in &indices {
        let replacement = match spec.scheme {
            ContaminationScheme::ShiftScale { shift, scale } => {
                shift_scale_subject(&subjects[i], shift, scale)?
            }
            ContaminationScheme::Bimodal { offset } => {
                let mut rng = subject_rng(seed, CONTAMINATION_STREAM_BASE + i as u64);
                subject_laplacians(
                    cfg,
                    groups[i],
                    sample.grid(),
                    &communities,
                    &mut rng,
                    WeightProfile::Bimodal { offset },
                )?
            }
            ContaminationScheme::ZeroWeight => {
                let mut rng = subject_rng(seed, CONTAMINATION_STREAM_BASE + i as u64);
                subject_laplacians(
                    cfg,
                    groups[i],
                    sample.grid(),
                    &communities,
                    &mut rng,
                    WeightProfile::ZeroBetween,
                )?
            }
        };
        subjects[i] = replacement;
    }
    let contaminated =
        ObjectTrajectorySample::new(*sample.space(), sample.grid().clone(), subjects)?;
    Ok((contaminated, indices))
}

// ===== sphere generator =====

/// Unit-sphere trajectory generator: a great-circle base curve plus iid
/// tangent-space noise per (subject, time).
///
/// The base curve is `p(t) = (cos θ(t), sin θ(t), 0)` with
/// `θ(t) = theta0 + theta1 * t`; noise is drawn in the tangent frame
/// `e1 = (-sin θ, cos θ, 0)`, `e2 = (0, 0, 1)` and rejection-sampled to
/// geodesic norm ≤ π/8, which keeps every sample inside the π/2 pairwise
/// concentration bound (two points within π/8 of the base point are within
/// π/4 of each other) with margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereSimConfig {
    pub subjects: usize,
    pub t_len: usize,
    /// Base-curve angle at t = 0.
    pub theta0: f64,
    /// Base-curve angular speed.
    pub theta1: f64,
    /// Tangent noise standard deviation (per coordinate).
    pub noise_sd: f64,
}

impl Default for SphereSimConfig {
    fn default() -> Self {
        SphereSimConfig {
            subjects: 50,
            t_len: 10,
            theta0: 0.3,
            theta1: 1.0,
            noise_sd: 0.05,
        }
    }
}

/// Maximum tangent-noise norm; rejection sampling retries up to 1000 times.
const SPHERE_NOISE_CAP: f64 = std::f64::consts::PI / 8.0;

/// The noiseless base curve point at time t.
pub fn sphere_base_point(cfg: &SphereSimConfig, t: f64) -> SpherePoint {
    let theta = cfg.theta0 + cfg.theta1 * t;
    SpherePoint::new([theta.cos(), theta.sin(), 0.0]).expect("unit vector")
}

/// Generates the sphere sample; subjects are iid noisy versions of the base
/// curve. By the symmetry of the tangent noise, the population pointwise
/// median is the base curve itself.
pub fn gen_sphere_sample(cfg: &SphereSimConfig, seed: u64) -> Result<ObjectTrajectorySample> {
    if cfg.subjects == 0 {
        return Err(Error::invalid("sphere generator needs at least 1 subject"));
    }
    if cfg.t_len < 2 {
        return Err(Error::invalid("grid needs at least 2 time points"));
    }
    if !(cfg.noise_sd >= 0.0) || !cfg.noise_sd.is_finite() {
        return Err(Error::invalid("noise sd must be finite and non-negative"));
    }
    let grid = TimeGrid::uniform(cfg.t_len)?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let gen_one = |i: usize| -> Result<Vec<Point>> {
        let mut rng = subject_rng(seed, 1 + i as u64);
        let mut row = Vec::with_capacity(cfg.t_len);
        for &t in grid.points() {
            let theta = cfg.theta0 + cfg.theta1 * t;
            let base = [theta.cos(), theta.sin(), 0.0];
            let e1 = [-theta.sin(), theta.cos(), 0.0];
            let e2 = [0.0, 0.0, 1.0];
            let (a, b) = {
                let mut tries = 0;
                loop {
                    let a = cfg.noise_sd * normal.sample(&mut rng);
                    let b = cfg.noise_sd * normal.sample(&mut rng);
                    if (a * a + b * b).sqrt() <= SPHERE_NOISE_CAP {
                        break (a, b);
                    }
                    tries += 1;
                    if tries >= 1000 {
                        return Err(Error::invalid(
                            "tangent noise rejection sampling failed 1000 times; \
                             noise sd is too large for the concentration bound",
                        ));
                    }
                }
            };
            let tangent = [
                a * e1[0] + b * e2[0],
                a * e1[1] + b * e2[1],
                a * e1[2] + b * e2[2],
            ];
            row.push(Point::Sphere(sphere_exp(
                &SpherePoint::new(base)?,
                &tangent,
            )?));
        }
        Ok(row)
    };
    #[cfg(feature = "parallel")]
    let subjects: Result<Vec<Vec<Point>>> =
        (0..cfg.subjects).into_par_iter().map(gen_one).collect();
    #[cfg(not(feature = "parallel"))]
    let subjects: Result<Vec<Vec<Point>>> = (0..cfg.subjects).map(gen_one).collect();
    ObjectTrajectorySample::new(MetricSpace::Sphere, grid, subjects?)
}
