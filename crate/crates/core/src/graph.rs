//! Correspondence compatibility graphs.
//!
//! The first-order graph scores every correspondence pair by how well it
//! preserves the pairwise distance between its source and target points.
//! The second-order graph reweights each first-order edge by the weighted
//! count of neighbors the two endpoints share, which prunes edges that are
//! compatible only by accident.

use std::num::NonZero;

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, Point3, UnitVec3};

/// Dense weight storage refuses graphs above this many nodes.
pub const MAX_DENSE_NODES: usize = 8000;

/// Inputs above this size switch to [`LARGE_INPUT_T_CMP`] when adaptive
/// thresholding is enabled.
pub const LARGE_INPUT_SIZE: usize = 5000;
pub const LARGE_INPUT_T_CMP: f64 = 0.999;

type Tree = ImmutableKdTree<f64, u64, 3, 32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphOrder {
    FirstOrder,
    SecondOrder,
}

/// Compatibility scoring parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Gaussian width, in multiples of `pr`.
    pub d_cmp: f64,
    /// Scores at or below this are dropped.
    pub t_cmp: f64,
    /// Normal consistency threshold on `|sin αˢ − sin αᵗ|`.
    pub t_alpha: f64,
    /// Point cloud resolution in length units.
    pub pr: f64,
    /// Raise `t_cmp` to [`LARGE_INPUT_T_CMP`] for inputs above [`LARGE_INPUT_SIZE`].
    pub adaptive_t_cmp: bool,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            d_cmp: 10.0,
            t_cmp: 0.99,
            t_alpha: 0.1,
            pr: 1.0,
            adaptive_t_cmp: true,
        }
    }
}

impl GraphParams {
    pub fn with_resolution(pr: f64) -> Self {
        Self {
            pr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.d_cmp > 0.0
            && self.t_cmp > 0.0
            && self.t_cmp < 1.0
            && self.t_alpha > 0.0
            && self.pr > 0.0
            && self.pr.is_finite()
            && self.d_cmp.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid graph parameters {self:?}")))
        }
    }

    /// Parameters to use for an input of `n` correspondences.
    pub fn for_input_size(&self, n: usize) -> Self {
        let mut out = *self;
        if self.adaptive_t_cmp && n > LARGE_INPUT_SIZE {
            out.t_cmp = out.t_cmp.max(LARGE_INPUT_T_CMP);
        }
        out
    }

    /// `d_cmp` in length units.
    pub fn d_cmp_abs(&self) -> f64 {
        self.d_cmp * self.pr
    }
}

/// Symmetric weighted graph over correspondences.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatGraph {
    n: usize,
    weights: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
    order: GraphOrder,
}

impl CompatGraph {
    /// Builds a graph from a dense row-major weight matrix. The matrix must
    /// be symmetric, nonnegative and zero on the diagonal.
    pub fn from_dense(n: usize, weights: Vec<f64>, order: GraphOrder) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "expected {} weights, got {}",
                n * n,
                weights.len()
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let w = weights[i * n + j];
                if w != weights[j * n + i] || !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "weight ({i}, {j}) is asymmetric, negative or non-finite"
                    )));
                }
            }
        }
        Ok(Self::from_parts(n, weights, order))
    }

    /// Unweighted graph with unit weights on the given edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut weights = vec![0.0; n * n];
        for &(a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range");
            if a != b {
                weights[a * n + b] = 1.0;
                weights[b * n + a] = 1.0;
            }
        }
        Self::from_parts(n, weights, GraphOrder::FirstOrder)
    }

    fn from_parts(n: usize, weights: Vec<f64>, order: GraphOrder) -> Self {
        let adjacency = (0..n)
            .map(|i| (0..n).filter(|&j| weights[i * n + j] > 0.0).collect())
            .collect();
        Self {
            n,
            weights,
            adjacency,
            order,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn order(&self) -> GraphOrder {
        self.order
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// Sorted neighbor list of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weight(i, j) > 0.0
    }

    /// Row-major weight matrix.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sum of edge weights inside `nodes`.
    pub fn subset_weight(&self, nodes: &[usize]) -> f64 {
        let mut sum = 0.0;
        for (a, &i) in nodes.iter().enumerate() {
            let row = self.row(i);
            for &j in &nodes[a + 1..] {
                sum += row[j];
            }
        }
        sum
    }
}

fn build_tree(cloud: &[Point3]) -> Tree {
    let coords: Vec<[f64; 3]> = cloud.iter().map(|p| [p.x, p.y, p.z]).collect();
    Tree::new_from_slice(&coords)
}

/// Mean distance from each point to its nearest other point.
pub fn estimate_resolution(cloud: &[Point3]) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "resolution needs at least 2 points, got {}",
            cloud.len()
        )));
    }
    if cloud.iter().any(|p| !p.coords.iter().all(|v| v.is_finite())) {
        return Err(Error::InvalidParameter("cloud has non-finite points".into()));
    }
    let tree = build_tree(cloud);
    let two = NonZero::new(2).unwrap();
    let nearest: Vec<f64> = cloud
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let hits = tree.nearest_n::<SquaredEuclidean>(&[p.x, p.y, p.z], two);
            // the query point itself usually comes back first, but not when
            // a duplicate shares its coordinates
            hits.iter()
                .find(|h| h.item as usize != i)
                .map_or(0.0, |h| h.distance.sqrt())
        })
        .collect();
    // sequential sum keeps the result independent of thread scheduling
    let total: f64 = nearest.iter().sum();
    let mean = total / cloud.len() as f64;
    if mean > 0.0 {
        Ok(mean)
    } else {
        Err(Error::DegenerateCloud)
    }
}

/// Index of the nearest cloud point for every query.
pub fn nearest_indices(cloud: &[Point3], queries: &[Point3]) -> Result<Vec<usize>> {
    if cloud.is_empty() {
        return Err(Error::InvalidParameter("nearest-neighbor search in an empty cloud".into()));
    }
    let tree = build_tree(cloud);
    Ok(queries
        .par_iter()
        .map(|q| tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z]).item as usize)
        .collect())
}

/// Mean of the two clouds' resolutions.
pub fn estimate_pair_resolution(source: &[Point3], target: &[Point3]) -> Result<f64> {
    Ok(0.5 * (estimate_resolution(source)? + estimate_resolution(target)?))
}

/// Per-point normals from the smallest principal axis of each point's
/// neighborhood (the point and its `k` nearest neighbors).
///
/// Normals point away from the cloud centroid. When that is ambiguous the
/// normal is oriented so its last significant component is positive.
pub fn estimate_normals(cloud: &[Point3], k: usize) -> Result<Vec<UnitVec3>> {
    if k < 2 || cloud.len() < k + 1 {
        return Err(Error::InvalidParameter(format!(
            "normal estimation with k = {k} needs at least {} points, got {}",
            k + 1,
            cloud.len()
        )));
    }
    let tree = build_tree(cloud);
    let qty = NonZero::new(k + 1).unwrap();
    let centroid = cloud.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / cloud.len() as f64;

    let normals = cloud
        .par_iter()
        .map(|p| {
            let hits = tree.nearest_n::<SquaredEuclidean>(&[p.x, p.y, p.z], qty);
            let pts: Vec<Vector3<f64>> = hits.iter().map(|h| cloud[h.item as usize].coords).collect();
            let mean = pts.iter().fold(Vector3::zeros(), |acc, v| acc + v) / pts.len() as f64;
            let mut scatter = Matrix3::zeros();
            for v in &pts {
                let d = v - mean;
                scatter += d * d.transpose();
            }
            let scale = pts.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
            let eig = SymmetricEigen::new(scatter);
            let smallest = (0..3)
                .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
                .unwrap_or(0);
            let mut n: Vector3<f64> = eig.eigenvectors.column(smallest).into_owned();
            let outward = p.coords - centroid;
            let dot = n.dot(&outward);
            let tol = 1e-9 * outward.norm().max(scale).max(f64::MIN_POSITIVE);
            if dot < -tol {
                n = -n;
            } else if dot.abs() <= tol {
                let last = (0..3).rev().find(|&c| n[c].abs() > 1e-9).unwrap_or(2);
                if n[last] < 0.0 {
                    n = -n;
                }
            }
            UnitVec3::new_normalize(n)
        })
        .collect();
    Ok(normals)
}

/// Rigid distance between two correspondences: the mismatch between their
/// source-side and target-side separations.
pub fn s_dist(ci: &Correspondence, cj: &Correspondence) -> f64 {
    ((ci.source - cj.source).norm() - (ci.target - cj.target).norm()).abs()
}

/// Thresholded Gaussian compatibility score.
pub fn s_cmp(ci: &Correspondence, cj: &Correspondence, params: &GraphParams) -> f64 {
    score_from_distance(s_dist(ci, cj), params)
}

/// `exp(−d²/(2·d_cmp²))` if it exceeds `t_cmp`, otherwise 0.
pub fn score_from_distance(dist: f64, params: &GraphParams) -> f64 {
    let d = params.d_cmp_abs();
    let raw = (-(dist * dist) / (2.0 * d * d)).exp();
    if raw > params.t_cmp {
        raw
    } else {
        0.0
    }
}

fn check_capacity(n: usize) -> Result<()> {
    if n > MAX_DENSE_NODES {
        Err(Error::CapacityExceeded {
            n,
            max: MAX_DENSE_NODES,
        })
    } else {
        Ok(())
    }
}

/// First-order compatibility graph.
pub fn build_fog(corrs: &[Correspondence], params: &GraphParams) -> Result<CompatGraph> {
    params.validate()?;
    let n = corrs.len();
    check_capacity(n)?;
    let mut weights = vec![0.0; n * n];
    weights.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, w) in row.iter_mut().enumerate() {
            if j != i {
                *w = s_cmp(&corrs[i], &corrs[j], params);
            }
        }
    });
    Ok(CompatGraph::from_parts(n, weights, GraphOrder::FirstOrder))
}

/// Second-order graph: `W_FOG ⊙ (W_FOG × W_FOG)`.
///
/// Only entries where `W_FOG` is nonzero can survive the Hadamard product,
/// so the matrix product is evaluated on the first-order support alone.
pub fn build_sog(fog: &CompatGraph) -> Result<CompatGraph> {
    if fog.order != GraphOrder::FirstOrder {
        return Err(Error::InvalidParameter(
            "second-order graph must be built from a first-order graph".into(),
        ));
    }
    let n = fog.n;
    let upper: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row_i = fog.row(i);
            fog.adjacency[i]
                .iter()
                .filter(|&&j| j > i)
                .map(|&j| {
                    let row_j = fog.row(j);
                    let mut common = 0.0;
                    for &k in &fog.adjacency[i] {
                        common += row_i[k] * row_j[k];
                    }
                    (j, row_i[j] * common)
                })
                .collect()
        })
        .collect();
    let mut weights = vec![0.0; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (j, w) in row {
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }
    Ok(CompatGraph::from_parts(n, weights, GraphOrder::SecondOrder))
}

/// Geometric-consistency prefilter: keeps the largest set of
/// correspondences compatible with a single seed (the seed included).
/// Ties go to the lowest seed. Input order is preserved.
pub fn gc_prefilter(corrs: &[Correspondence], params: &GraphParams) -> Result<Vec<Correspondence>> {
    params.validate()?;
    let n = corrs.len();
    let degrees: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && s_cmp(&corrs[i], &corrs[j], params) > 0.0)
                .count()
        })
        .collect();
    let Some(seed) = (0..n).max_by(|&a, &b| degrees[a].cmp(&degrees[b]).then(b.cmp(&a))) else {
        return Ok(Vec::new());
    };
    Ok(corrs
        .iter()
        .enumerate()
        .filter(|&(j, _)| j == seed || s_cmp(&corrs[seed], &corrs[j], params) > 0.0)
        .map(|(_, c)| c.clone())
        .collect())
}
