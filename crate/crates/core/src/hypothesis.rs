//! Pose hypotheses from cliques, their evaluation against the full
//! correspondence set, and a RANSAC baseline for comparison.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clique::Clique;
use crate::error::{Error, Result};
use crate::geometry::{kabsch_svd, rotation_error, translation_error, Correspondence, RigidTransform};
use crate::graph::CompatGraph;

pub const POWER_ITERATION_TOLERANCE: f64 = 1e-6;
pub const POWER_ITERATION_MAX_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreMetric {
    InlierCount,
    Mae,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvdMode {
    InstanceEqual,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    /// Residual radius τ, in length units.
    pub inlier_threshold: f64,
    pub metric: ScoreMetric,
    pub svd_mode: SvdMode,
}

impl EvalParams {
    /// Defaults with τ = 10·pr.
    pub fn for_resolution(pr: f64) -> Self {
        Self {
            inlier_threshold: 10.0 * pr,
            metric: ScoreMetric::Mae,
            svd_mode: SvdMode::InstanceEqual,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "inlier threshold must be positive, got {}",
                self.inlier_threshold
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub transform: RigidTransform,
    pub score: f64,
    /// Mean residual over the correspondences counted as inliers.
    pub mean_inlier_residual: f64,
    /// Node ids of the generating clique or sample.
    pub source_clique: Vec<usize>,
    pub metric: ScoreMetric,
}

impl Hypothesis {
    /// Unscored hypothesis.
    pub fn new(transform: RigidTransform, source_clique: Vec<usize>, metric: ScoreMetric) -> Self {
        Self {
            transform,
            score: 0.0,
            mean_inlier_residual: 0.0,
            source_clique,
            metric,
        }
    }

    pub fn evaluate(&mut self, corrs: &[Correspondence], params: &EvalParams) {
        let eval = evaluate_transform(&self.transform, corrs, params);
        self.score = eval.score;
        self.mean_inlier_residual = eval.mean_inlier_residual;
        self.metric = params.metric;
    }
}

/// Per-correspondence weights used when fitting a clique.
#[derive(Debug, Clone, PartialEq)]
pub enum SvdWeighting {
    InstanceEqual,
    /// Entries of the dominant eigenvector of the graph weight matrix.
    Eigenvector(Vec<f64>),
}

impl SvdWeighting {
    pub fn new(mode: SvdMode, graph: &CompatGraph) -> Self {
        match mode {
            SvdMode::InstanceEqual => SvdWeighting::InstanceEqual,
            SvdMode::Weighted => SvdWeighting::Eigenvector(dominant_eigenvector(
                graph,
                POWER_ITERATION_TOLERANCE,
                POWER_ITERATION_MAX_STEPS,
            )),
        }
    }
}

/// Unit-norm dominant eigenvector of the graph's weight matrix, with
/// nonnegative entries, by power iteration from the uniform vector.
pub fn dominant_eigenvector(graph: &CompatGraph, tolerance: f64, max_steps: usize) -> Vec<f64> {
    let n = graph.node_count();
    if n == 0 {
        return Vec::new();
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..max_steps {
        let mut next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = graph.row(i);
                graph.neighbors(i).iter().map(|&j| row[j] * v[j]).sum()
            })
            .collect();
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            // edgeless graph: every vector is an eigenvector, keep uniform weights
            return v;
        }
        next.iter_mut().for_each(|x| *x /= norm);
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        if delta < tolerance {
            break;
        }
    }
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Rigid transform fitted to a clique's correspondences. `corrs` is
/// indexed by the clique's node ids.
pub fn clique_to_hypothesis(
    clique: &Clique,
    corrs: &[Correspondence],
    weighting: &SvdWeighting,
    metric: ScoreMetric,
) -> Result<Hypothesis> {
    let pairs = clique.nodes.iter().map(|&i| &corrs[i]);
    let transform = match weighting {
        SvdWeighting::InstanceEqual => kabsch_svd(pairs, None)?,
        SvdWeighting::Eigenvector(v) => {
            let w: Vec<f64> = clique.nodes.iter().map(|&i| v[i].max(0.0)).collect();
            kabsch_svd(pairs, Some(&w))?
        }
    };
    Ok(Hypothesis::new(transform, clique.nodes.clone(), metric))
}

/// `‖T(pˢ) − pᵗ‖`.
pub fn residual(transform: &RigidTransform, c: &Correspondence) -> f64 {
    (transform.apply(&c.source) - c.target).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub score: f64,
    pub inliers: usize,
    pub mean_inlier_residual: f64,
}

/// Scores a transform against every correspondence. Only residuals below
/// τ contribute: 1 each for inlier count, `(τ − r)/τ` for MAE and
/// `((τ − r)/τ)²` for MSE.
pub fn evaluate_transform(transform: &RigidTransform, corrs: &[Correspondence], params: &EvalParams) -> Evaluation {
    let tau = params.inlier_threshold;
    let mut score = 0.0;
    let mut inliers = 0;
    let mut residual_sum = 0.0;
    for c in corrs {
        let r = residual(transform, c);
        if r < tau {
            inliers += 1;
            residual_sum += r;
            let slack = (tau - r) / tau;
            score += match params.metric {
                ScoreMetric::InlierCount => 1.0,
                ScoreMetric::Mae => slack,
                ScoreMetric::Mse => slack * slack,
            };
        }
    }
    Evaluation {
        score,
        inliers,
        mean_inlier_residual: if inliers > 0 {
            residual_sum / inliers as f64
        } else {
            f64::INFINITY
        },
    }
}

pub fn score_hypothesis(transform: &RigidTransform, corrs: &[Correspondence], params: &EvalParams) -> f64 {
    evaluate_transform(transform, corrs, params).score
}

/// Index of the highest-scoring hypothesis. Ties go to the smaller mean
/// inlier residual, then to the earlier hypothesis.
pub fn select_best_index(hypotheses: &[Hypothesis]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, h) in hypotheses.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &hypotheses[b];
                match h.score.total_cmp(&cur.score) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => h.mean_inlier_residual < cur.mean_inlier_residual,
                }
            }
        };
        if better {
            best = Some(i);
        }
    }
    best.ok_or(Error::NoHypotheses)
}

pub fn select_best(hypotheses: &[Hypothesis]) -> Result<&Hypothesis> {
    select_best_index(hypotheses).map(|i| &hypotheses[i])
}

/// Uniformly sampled minimal-set hypotheses. Degenerate samples still use
/// up their iteration but produce no hypothesis.
pub fn ransac_baseline(
    corrs: &[Correspondence],
    iterations: usize,
    sample_size: usize,
    params: &EvalParams,
    seed: u64,
) -> Result<(Hypothesis, Vec<Hypothesis>)> {
    if sample_size < 3 || corrs.len() < sample_size {
        return Err(Error::InvalidParameter(format!(
            "RANSAC needs sample size >= 3 and at least that many correspondences (sample {sample_size}, have {})",
            corrs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<usize>> = (0..iterations)
        .map(|_| {
            let mut s = sample(&mut rng, corrs.len(), sample_size).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    let hypotheses: Vec<Hypothesis> = samples
        .into_par_iter()
        .filter_map(|s| {
            let transform = kabsch_svd(s.iter().map(|&i| &corrs[i]), None).ok()?;
            let mut h = Hypothesis::new(transform, s, params.metric);
            h.evaluate(corrs, params);
            Some(h)
        })
        .collect();
    let best = select_best(&hypotheses)?.clone();
    Ok((best, hypotheses))
}

/// Whether a transform is within the rotation (degrees) and translation
/// thresholds of the ground truth.
pub fn is_correct(transform: &RigidTransform, gt: &RigidTransform, re_thresh: f64, te_thresh: f64) -> bool {
    rotation_error(transform.rotation(), gt.rotation()) <= re_thresh
        && translation_error(transform.translation(), gt.translation()) <= te_thresh
}

pub fn count_correct_hypotheses(hypotheses: &[Hypothesis], gt: &RigidTransform, re_thresh: f64, te_thresh: f64) -> usize {
    hypotheses
        .iter()
        .filter(|h| is_correct(&h.transform, gt, re_thresh, te_thresh))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::graph::GraphOrder;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::Rng;

    fn gt() -> RigidTransform {
        RigidTransform::from_axis_angle(Vector3::new(0.4, -1.0, 0.3), 0.8, Vector3::new(0.5, -0.2, 1.0))
    }

    fn exact_corrs(n: usize, t: &RigidTransform, seed: u64) -> Vec<Correspondence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let p = Point3::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
                Correspondence::new(i, p, t.apply(&p))
            })
            .collect()
    }

    fn params(metric: ScoreMetric, tau: f64) -> EvalParams {
        EvalParams {
            inlier_threshold: tau,
            metric,
            svd_mode: SvdMode::InstanceEqual,
        }
    }

    fn complete_graph(n: usize, w: f64) -> CompatGraph {
        let mut m = vec![w; n * n];
        for i in 0..n {
            m[i * n + i] = 0.0;
        }
        CompatGraph::from_dense(n, m, GraphOrder::SecondOrder).unwrap()
    }

    #[test]
    fn exact_clique_gives_ground_truth() {
        let t = gt();
        let corrs = exact_corrs(6, &t, 1);
        let graph = complete_graph(6, 1.0);
        let clique = Clique::from_nodes(&graph, (0..6).collect());
        for mode in [SvdMode::InstanceEqual, SvdMode::Weighted] {
            let h = clique_to_hypothesis(&clique, &corrs, &SvdWeighting::new(mode, &graph), ScoreMetric::Mae).unwrap();
            assert!((h.transform.rotation() - t.rotation()).norm() < 1e-9);
            assert!((h.transform.translation() - t.translation()).norm() < 1e-9);
        }
    }

    #[test]
    fn regular_graph_weighting_matches_equal_weights() {
        let t = gt();
        let mut corrs = exact_corrs(5, &t, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in &mut corrs {
            c.target.x += rng.random_range(-0.05..0.05);
        }
        let graph = complete_graph(5, 0.7);
        let v = dominant_eigenvector(&graph, 1e-12, 1000);
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-12));
        let clique = Clique::from_nodes(&graph, vec![0, 1, 2, 3, 4]);
        let a = clique_to_hypothesis(&clique, &corrs, &SvdWeighting::InstanceEqual, ScoreMetric::Mae).unwrap();
        let b = clique_to_hypothesis(&clique, &corrs, &SvdWeighting::new(SvdMode::Weighted, &graph), ScoreMetric::Mae)
            .unwrap();
        assert!((a.transform.rotation() - b.transform.rotation()).norm() < 1e-9);
        assert!((a.transform.translation() - b.transform.translation()).norm() < 1e-9);
    }

    #[test]
    fn eigenvector_down_weighting_reduces_error() {
        let t = gt();
        let src = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let mut corrs: Vec<Correspondence> = src
            .iter()
            .enumerate()
            .map(|(i, p)| Correspondence::new(i, *p, t.apply(p)))
            .collect();
        corrs[2].target += Vector3::new(0.0, 0.0, 0.2);
        // nodes 0 and 1 are strongly tied; node 2 hangs on weakly, plus a
        // fourth node that only supports 0 and 1
        let n = 4;
        let mut w = vec![0.0; n * n];
        for (a, b, x) in [(0, 1, 1.0), (0, 2, 0.05), (1, 2, 0.05), (0, 3, 1.0), (1, 3, 1.0)] {
            w[a * n + b] = x;
            w[b * n + a] = x;
        }
        let graph = CompatGraph::from_dense(n, w, GraphOrder::SecondOrder).unwrap();
        let weighting = SvdWeighting::new(SvdMode::Weighted, &graph);
        let SvdWeighting::Eigenvector(v) = &weighting else { unreachable!() };
        assert!(v[2] < 0.5 * v[0]);
        let clique = Clique::from_nodes(&graph, vec![0, 1, 2]);
        let equal = clique_to_hypothesis(&clique, &corrs, &SvdWeighting::InstanceEqual, ScoreMetric::Mae).unwrap();
        let weighted = clique_to_hypothesis(&clique, &corrs, &weighting, ScoreMetric::Mae).unwrap();
        let re_equal = rotation_error(equal.transform.rotation(), t.rotation());
        let re_weighted = rotation_error(weighted.transform.rotation(), t.rotation());
        assert!(re_weighted < re_equal, "{re_weighted} vs {re_equal}");
    }

    #[test]
    fn power_iteration_matches_symmetric_eigen() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 12;
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.6) {
                    let x = rng.random_range(0.1..1.0);
                    w[i * n + j] = x;
                    w[j * n + i] = x;
                }
            }
        }
        let graph = CompatGraph::from_dense(n, w.clone(), GraphOrder::SecondOrder).unwrap();
        let v = dominant_eigenvector(&graph, 1e-12, 10_000);
        let m = nalgebra::DMatrix::from_row_slice(n, n, &w);
        let eig = m.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let mut e: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        if e.iter().sum::<f64>() < 0.0 {
            e.iter_mut().for_each(|x| *x = -*x);
        }
        for (a, b) in v.iter().zip(&e) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn edgeless_graph_gives_uniform_weights() {
        let graph = CompatGraph::from_edges(4, &[]);
        let v = dominant_eigenvector(&graph, 1e-6, 1000);
        assert!(v.iter().all(|x| (x - 0.5).abs() < 1e-12));
    }

    #[test]
    fn residual_examples() {
        let t = gt();
        let c = exact_corrs(1, &t, 5).remove(0);
        assert!(residual(&t, &c) < 1e-12);
        let c = Correspondence::new(0, Point3::origin(), Point3::new(0.0, 0.0, 2.0));
        assert_eq!(residual(&RigidTransform::identity(), &c), 2.0);

        let m = RigidTransform::from_axis_angle(Vector3::new(1.0, 1.0, 1.0), 1.3, Vector3::new(3.0, 0.0, -1.0));
        let c = Correspondence::new(0, Point3::new(0.2, 0.4, 0.1), Point3::new(1.0, 0.5, 0.2));
        let moved = Correspondence::new(0, m.apply(&c.source), m.apply(&c.target));
        let conj = m.compose(&t).compose(&m.inverse());
        assert!((residual(&t, &c) - residual(&conj, &moved)).abs() < 1e-12);
    }

    #[test]
    fn score_examples() {
        let t = gt();
        let corrs = exact_corrs(7, &t, 6);
        for metric in [ScoreMetric::InlierCount, ScoreMetric::Mae, ScoreMetric::Mse] {
            assert!((score_hypothesis(&t, &corrs, &params(metric, 0.1)) - 7.0).abs() < 1e-9);
            let far = RigidTransform::from_translation(Vector3::new(100.0, 0.0, 0.0));
            assert_eq!(score_hypothesis(&far, &corrs, &params(metric, 0.1)), 0.0);
        }

        let tau = 0.4;
        let corrs = vec![
            Correspondence::new(0, Point3::origin(), Point3::origin()),
            Correspondence::new(1, Point3::origin(), Point3::new(0.0, tau / 2.0, 0.0)),
        ];
        let id = RigidTransform::identity();
        assert_eq!(score_hypothesis(&id, &corrs, &params(ScoreMetric::InlierCount, tau)), 2.0);
        assert!((score_hypothesis(&id, &corrs, &params(ScoreMetric::Mae, tau)) - 1.5).abs() < 1e-12);
        assert!((score_hypothesis(&id, &corrs, &params(ScoreMetric::Mse, tau)) - 1.25).abs() < 1e-12);
    }

    fn scored(score: f64, mean: f64, tx: f64) -> Hypothesis {
        Hypothesis {
            transform: RigidTransform::from_translation(Vector3::new(tx, 0.0, 0.0)),
            score,
            mean_inlier_residual: mean,
            source_clique: vec![],
            metric: ScoreMetric::Mae,
        }
    }

    #[test]
    fn select_best_examples() {
        let one = vec![scored(1.0, 0.1, 0.0)];
        assert_eq!(select_best(&one).unwrap(), &one[0]);

        let tie = vec![scored(3.0, 0.1, 1.0), scored(7.0, 0.3, 2.0), scored(7.0, 0.2, 3.0)];
        assert_eq!(select_best(&tie).unwrap().transform.translation().x, 3.0);
        let mut rev = tie.clone();
        rev.reverse();
        assert_eq!(select_best(&rev).unwrap().transform.translation().x, 3.0);
        rev.swap(0, 1);
        assert_eq!(select_best(&rev).unwrap().transform.translation().x, 3.0);

        let exact_tie = vec![scored(2.0, 0.1, 1.0), scored(2.0, 0.1, 2.0)];
        assert_eq!(select_best_index(&exact_tie).unwrap(), 0);
        assert!(matches!(select_best(&[]), Err(Error::NoHypotheses)));
    }

    #[test]
    fn ransac_examples() {
        let t = gt();
        let corrs = exact_corrs(30, &t, 7);
        let p = params(ScoreMetric::Mae, 0.05);
        let (best, all) = ransac_baseline(&corrs, 100, 3, &p, 11).unwrap();
        assert!((best.transform.rotation() - t.rotation()).norm() < 1e-6);
        assert!((best.transform.translation() - t.translation()).norm() < 1e-6);
        assert_eq!(all.len(), 100);

        let (_, again) = ransac_baseline(&corrs, 100, 3, &p, 11).unwrap();
        assert_eq!(all, again);
        let (_, other) = ransac_baseline(&corrs, 100, 3, &p, 12).unwrap();
        assert_ne!(
            all.iter().map(|h| h.source_clique.clone()).collect::<Vec<_>>(),
            other.iter().map(|h| h.source_clique.clone()).collect::<Vec<_>>()
        );
        assert!(ransac_baseline(&corrs[..2], 10, 3, &p, 0).is_err());
    }

    #[test]
    fn ransac_correct_count_grows_with_iterations() {
        let t = gt();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut corrs = exact_corrs(100, &t, 9);
        for c in corrs.iter_mut().skip(10) {
            c.target = Point3::new(rng.random_range(0.0..3.0), rng.random_range(-1.0..2.0), rng.random_range(0.0..3.0));
        }
        let p = params(ScoreMetric::Mae, 0.05);
        let (mut low, mut high) = (0usize, 0usize);
        for seed in 0..20 {
            let (_, few) = ransac_baseline(&corrs, 100, 3, &p, seed).unwrap();
            let (_, many) = ransac_baseline(&corrs, 10_000, 3, &p, seed).unwrap();
            low += count_correct_hypotheses(&few, &t, 15.0, 0.3);
            high += count_correct_hypotheses(&many, &t, 15.0, 0.3);
        }
        assert!(high >= low);
        assert!(high > 0);
    }

    #[test]
    fn count_correct_examples() {
        let t = gt();
        let same = vec![scored(1.0, 0.0, 0.0); 4]
            .into_iter()
            .map(|mut h| {
                h.transform = t;
                h
            })
            .collect::<Vec<_>>();
        assert_eq!(count_correct_hypotheses(&same, &t, 15.0, 0.3), 4);
        assert_eq!(count_correct_hypotheses(&[], &t, 15.0, 0.3), 0);

        // perturbations with known RE (deg) / TE
        let cases = [(5.0, 0.1), (14.0, 0.29), (16.0, 0.0), (0.0, 0.31), (10.0, 0.2), (30.0, 1.0)];
        let mixed: Vec<Hypothesis> = cases
            .iter()
            .map(|&(deg, dt)| {
                let delta = RigidTransform::from_axis_angle(Vector3::new(0.3, 0.9, -0.2), f64::to_radians(deg), Vector3::zeros());
                let rot = delta.compose(&t);
                let moved = RigidTransform::new(*rot.rotation(), t.translation() + Vector3::new(0.0, dt, 0.0)).unwrap();
                let mut h = scored(1.0, 0.0, 0.0);
                h.transform = moved;
                h
            })
            .collect();
        assert_eq!(count_correct_hypotheses(&mixed, &t, 15.0, 0.3), 3);
    }

    proptest! {
        #[test]
        fn scores_are_monotone_in_residuals(seed in any::<u64>(), shrink in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = gt();
            let mut corrs = exact_corrs(15, &t, seed);
            for c in &mut corrs {
                c.target += Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            }
            let k = rng.random_range(0..corrs.len());
            let mut better = corrs.clone();
            let predicted = t.apply(&better[k].source);
            better[k].target = predicted + (better[k].target - predicted) * shrink;
            for metric in [ScoreMetric::InlierCount, ScoreMetric::Mae, ScoreMetric::Mse] {
                let p = params(metric, 0.15);
                let before = score_hypothesis(&t, &corrs, &p);
                let after = score_hypothesis(&t, &better, &p);
                prop_assert!(after >= before - 1e-12);
                prop_assert!((0.0..=corrs.len() as f64).contains(&before));
            }
        }

        #[test]
        fn relative_metrics_are_scale_free(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = gt();
            let mut corrs = exact_corrs(10, &t, seed);
            for c in &mut corrs {
                c.target += Vector3::new(rng.random_range(-0.1..0.1), 0.0, rng.random_range(-0.1..0.1));
            }
            let scaled: Vec<Correspondence> = corrs
                .iter()
                .map(|c| Correspondence::new(c.index, c.source * scale, c.target * scale))
                .collect();
            let ts = RigidTransform::new(*t.rotation(), t.translation() * scale).unwrap();
            for metric in [ScoreMetric::Mae, ScoreMetric::Mse] {
                let a = score_hypothesis(&t, &corrs, &params(metric, 0.12));
                let b = score_hypothesis(&ts, &scaled, &params(metric, 0.12 * scale));
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn argmax_ignores_weaker_additions(scores in proptest::collection::vec(0.0f64..10.0, 1..20), extra in proptest::collection::vec(0.0f64..1.0, 0..10)) {
            let hyps: Vec<Hypothesis> = scores.iter().enumerate().map(|(i, &s)| scored(s, 0.1, i as f64)).collect();
            let best = select_best(&hyps).unwrap().clone();
            let mut more = hyps.clone();
            for (k, e) in extra.iter().enumerate() {
                more.push(scored(best.score - 0.01 - e, 0.0, 1000.0 + k as f64));
            }
            prop_assert_eq!(select_best(&more).unwrap(), &best);
        }
    }
}
