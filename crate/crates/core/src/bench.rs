//! End-to-end registration pipeline, synthetic scenes and benchmark
//! bookkeeping (recall, RE/TE, RMSE protocol, MAC-n curve).

use std::time::Instant;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clique::{
    enumerate_maximal_cliques, maximum_clique, node_guided_select, normal_consistency_filter, rank_top_k, Clique,
    CliqueFilterParams,
};
use crate::error::{Error, Result};
use crate::geometry::{rmse_alignment, rotation_error, translation_error, Correspondence, Point3, RigidTransform};
use crate::graph::{build_fog, build_sog, estimate_resolution, gc_prefilter, GraphOrder, GraphParams};
use crate::hypothesis::{
    clique_to_hypothesis, count_correct_hypotheses, select_best_index, EvalParams, Hypothesis, ScoreMetric, SvdMode,
    SvdWeighting,
};

/// Hypothesis-count thresholds of the MAC-n curve.
pub const MAC_N_LEVELS: [usize; 5] = [1, 5, 10, 20, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CliqueMode {
    Maximal,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationConfig {
    pub graph: GraphParams,
    pub filter: CliqueFilterParams,
    pub eval: EvalParams,
    pub graph_order: GraphOrder,
    pub use_gc_prefilter: bool,
    pub clique_mode: CliqueMode,
    pub use_node_guided: bool,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self::for_resolution(1.0)
    }
}

impl RegistrationConfig {
    pub fn for_resolution(pr: f64) -> Self {
        Self {
            graph: GraphParams::with_resolution(pr),
            filter: CliqueFilterParams::default(),
            eval: EvalParams::for_resolution(pr),
            graph_order: GraphOrder::SecondOrder,
            use_gc_prefilter: false,
            clique_mode: CliqueMode::Maximal,
            use_node_guided: true,
        }
    }

    /// Same settings re-expressed for a scene of resolution `pr`; the
    /// inlier threshold keeps its ratio to the resolution.
    pub fn rescaled(&self, pr: f64) -> Self {
        let mut out = *self;
        out.eval.inlier_threshold *= pr / self.graph.pr;
        out.graph.pr = pr;
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.filter.validate()?;
        self.eval.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub re_thresh_deg: f64,
    pub te_thresh: f64,
}

impl Criteria {
    /// Indoor scans: RE ≤ 15°, TE ≤ 30 cm.
    pub fn indoor() -> Self {
        Self {
            re_thresh_deg: 15.0,
            te_thresh: 0.3,
        }
    }

    /// Outdoor LiDAR: RE ≤ 5°, TE ≤ 60 cm.
    pub fn kitti() -> Self {
        Self {
            re_thresh_deg: 5.0,
            te_thresh: 0.6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.re_thresh_deg > 0.0 && self.te_thresh > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("success thresholds must be positive: {self:?}")))
        }
    }

    pub fn accepts(&self, re_deg: f64, te: f64) -> bool {
        re_deg <= self.re_thresh_deg && te <= self.te_thresh
    }

    /// Human-readable form, translation in centimetres.
    pub fn describe(&self) -> String {
        format!(
            "RE <= {}°, TE <= {} cm",
            trim_float(self.re_thresh_deg),
            trim_float(self.te_thresh * 100.0)
        )
    }
}

fn trim_float(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Wall-clock milliseconds per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub graph_construction: f64,
    pub clique_search: f64,
    pub node_guided_selection: f64,
    pub pose_estimation: f64,
}

impl StageTimes {
    pub fn sum(&self) -> f64 {
        self.graph_construction + self.clique_search + self.node_guided_selection + self.pose_estimation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationReport {
    pub best: Hypothesis,
    /// Whether any hypothesis was produced.
    pub found: bool,
    /// `found`, and within the criteria once ground truth is applied.
    pub success: bool,
    pub re_deg: Option<f64>,
    pub te: Option<f64>,
    pub correct_hypothesis_count: Option<usize>,
    pub stage_times: StageTimes,
    pub total_ms: f64,
    pub correspondence_count: usize,
    /// Correspondences left after the optional prefilter.
    pub graph_node_count: usize,
    pub graph_edge_count: usize,
    pub clique_count: usize,
    pub selected_clique_count: usize,
    pub hypotheses: Vec<Hypothesis>,
}

impl RegistrationReport {
    pub fn with_ground_truth(mut self, gt: &RigidTransform, criteria: &Criteria) -> Self {
        let re = rotation_error(self.best.transform.rotation(), gt.rotation());
        let te = translation_error(self.best.transform.translation(), gt.translation());
        self.success = self.found && criteria.accepts(re, te);
        self.re_deg = Some(re);
        self.te = Some(te);
        self.correct_hypothesis_count = Some(count_correct_hypotheses(
            &self.hypotheses,
            gt,
            criteria.re_thresh_deg,
            criteria.te_thresh,
        ));
        self
    }
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Runs the full pipeline on one correspondence set: optional prefilter,
/// compatibility graph, clique search, clique selection, one hypothesis
/// per clique, scoring against the full input, best-hypothesis selection.
/// Producing no hypothesis is not an error: the report then carries the
/// identity with `found = false`.
pub fn register(corrs: &[Correspondence], config: &RegistrationConfig) -> Result<RegistrationReport> {
    config.validate()?;
    if corrs.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "registration needs at least 3 correspondences, got {}",
            corrs.len()
        )));
    }
    let start = Instant::now();
    let mut times = StageTimes::default();

    // node ids index `working`; `positions` maps them back to the input
    let indexed: Vec<Correspondence> = corrs
        .iter()
        .enumerate()
        .map(|(i, c)| Correspondence { index: i, ..c.clone() })
        .collect();
    let working = if config.use_gc_prefilter {
        gc_prefilter(&indexed, &config.graph.for_input_size(indexed.len()))?
    } else {
        indexed
    };
    let positions: Vec<usize> = working.iter().map(|c| c.index).collect();
    let graph_params = config.graph.for_input_size(working.len());
    let fog = build_fog(&working, &graph_params)?;
    let graph = match config.graph_order {
        GraphOrder::FirstOrder => fog,
        GraphOrder::SecondOrder => build_sog(&fog)?,
    };
    times.graph_construction = elapsed_ms(start);

    let t = Instant::now();
    let cliques = match config.clique_mode {
        CliqueMode::Maximal => enumerate_maximal_cliques(&graph, config.filter.min_size, config.filter.budget)?,
        CliqueMode::Maximum => match maximum_clique(&graph, config.filter.min_size) {
            Ok(c) => vec![c],
            Err(Error::NoClique { .. }) => Vec::new(),
            Err(e) => return Err(e),
        },
    };
    times.clique_search = elapsed_ms(t);

    let t = Instant::now();
    let clique_count = cliques.len();
    let mut selected = if config.use_node_guided {
        node_guided_select(&cliques, graph.node_count())
    } else {
        cliques
    };
    if config.filter.use_normal_consistency {
        let mut kept = Vec::with_capacity(selected.len());
        for c in selected {
            if normal_consistency_filter(&c, &working, config.filter.t_alpha)? {
                kept.push(c);
            }
        }
        selected = kept;
    }
    if let Some(k) = config.filter.top_k {
        selected = rank_top_k(&selected, k);
    }
    times.node_guided_selection = elapsed_ms(t);

    let t = Instant::now();
    let weighting = SvdWeighting::new(config.eval.svd_mode, &graph);
    let hypotheses: Vec<Hypothesis> = selected
        .par_iter()
        .filter_map(|c: &Clique| {
            // degenerate cliques (e.g. collinear points) yield no hypothesis
            let mut h = clique_to_hypothesis(c, &working, &weighting, config.eval.metric).ok()?;
            h.source_clique = c.nodes.iter().map(|&i| positions[i]).collect();
            h.evaluate(corrs, &config.eval);
            Some(h)
        })
        .collect();
    let (best, found) = match select_best_index(&hypotheses) {
        Ok(i) => (hypotheses[i].clone(), true),
        Err(_) => (
            Hypothesis::new(RigidTransform::identity(), Vec::new(), config.eval.metric),
            false,
        ),
    };
    times.pose_estimation = elapsed_ms(t);

    Ok(RegistrationReport {
        best,
        found,
        success: found,
        re_deg: None,
        te: None,
        correct_hypothesis_count: None,
        stage_times: times,
        total_ms: elapsed_ms(start),
        correspondence_count: corrs.len(),
        graph_node_count: graph.node_count(),
        graph_edge_count: graph.edge_count(),
        clique_count,
        selected_clique_count: selected.len(),
        hypotheses,
    })
}

/// Dense enough that 10·pr stays small next to a unit cube (pr ≈ 0.012);
/// with sparser clouds the inlier threshold covers a quarter of the scene
/// and inlier counting stops telling good poses from rough ones.
pub const DEFAULT_CLOUD_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_inliers: usize,
    pub n_outliers: usize,
    /// Inlier noise standard deviation, in units of the cloud resolution.
    pub noise_sigma: f64,
    /// Side of the cube the source cloud is sampled in.
    pub extent: f64,
    pub seed: u64,
    /// Size of the dense source cloud the keypoints are drawn from; it sets
    /// the resolution.
    pub cloud_points: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_inliers: 20,
            n_outliers: 80,
            noise_sigma: 0.5,
            extent: 1.0,
            seed: 0,
            cloud_points: DEFAULT_CLOUD_POINTS,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_inliers + self.n_outliers;
        if n < 3 {
            return Err(Error::InvalidParameter("need at least 3 correspondences".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParameter("noise sigma must be nonnegative".into()));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::InvalidParameter("extent must be positive".into()));
        }
        if self.cloud_points < n.max(2) {
            return Err(Error::InvalidParameter(format!(
                "cloud of {} points cannot host {n} keypoints",
                self.cloud_points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub corrs: Vec<Correspondence>,
    pub gt: RigidTransform,
    pub source_cloud: Vec<Point3>,
    pub target_cloud: Vec<Point3>,
    /// Resolution of the source cloud (the target is a rigid copy).
    pub resolution: f64,
    /// Whether each correspondence was generated as an inlier.
    pub is_inlier: Vec<bool>,
}

pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let q = Quaternion::new(
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
        );
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

/// Random scene: a dense source cloud uniform in the cube, its rigid copy
/// as target, keypoint correspondences drawn from the cloud. Inlier
/// targets get Gaussian noise; outliers pair unrelated cloud points.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticPair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let e = spec.extent;
    let source_cloud: Vec<Point3> = (0..spec.cloud_points)
        .map(|_| Point3::new(rng.random_range(0.0..e), rng.random_range(0.0..e), rng.random_range(0.0..e)))
        .collect();
    let rotation = random_rotation(&mut rng).to_rotation_matrix();
    let translation = Vector3::new(rng.random_range(0.0..e), rng.random_range(0.0..e), rng.random_range(0.0..e));
    let gt = RigidTransform::from_rotation(&rotation, translation);
    let target_cloud: Vec<Point3> = source_cloud.iter().map(|p| gt.apply(p)).collect();
    let resolution = estimate_resolution(&source_cloud)?;

    let sigma = spec.noise_sigma * resolution;
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let n = spec.n_inliers + spec.n_outliers;
    let keypoints = sample(&mut rng, spec.cloud_points, n).into_vec();
    let mut items: Vec<(Point3, Point3, bool)> = Vec::with_capacity(n);
    for &k in &keypoints[..spec.n_inliers] {
        let s = source_cloud[k];
        let jitter = Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        items.push((s, gt.apply(&s) + jitter, true));
    }
    for &k in &keypoints[spec.n_inliers..] {
        let t = target_cloud[rng.random_range(0..spec.cloud_points)];
        items.push((source_cloud[k], t, false));
    }
    items.shuffle(&mut rng);
    let is_inlier = items.iter().map(|x| x.2).collect();
    let corrs = items
        .into_iter()
        .enumerate()
        .map(|(i, (s, t, _))| Correspondence::new(i, s, t))
        .collect();
    Ok(SyntheticPair {
        corrs,
        gt,
        source_cloud,
        target_cloud,
        resolution,
        is_inlier,
    })
}

/// One benchmark pair ready for registration.
#[derive(Debug, Clone, PartialEq)]
pub struct PairData {
    pub name: String,
    pub corrs: Vec<Correspondence>,
    pub gt: RigidTransform,
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairInput {
    Loaded(PairData),
    /// The pair's files could not be read.
    Failed { name: String, message: String },
}

impl PairInput {
    pub fn name(&self) -> &str {
        match self {
            PairInput::Loaded(p) => &p.name,
            PairInput::Failed { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOutcome {
    pub name: String,
    pub success: bool,
    pub re_deg: Option<f64>,
    pub te: Option<f64>,
    pub correct_hypotheses: usize,
    pub hypotheses: usize,
    pub score: f64,
    pub transform: [[f64; 4]; 4],
    pub stage_times: Option<StageTimes>,
    pub error: Option<String>,
}

impl PairOutcome {
    fn failed(name: &str, message: String) -> Self {
        Self {
            name: name.to_string(),
            success: false,
            re_deg: None,
            te: None,
            correct_hypotheses: 0,
            hypotheses: 0,
            score: 0.0,
            transform: RigidTransform::identity().to_rows(),
            stage_times: None,
            error: Some(message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacNPoint {
    pub n: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub criteria: Criteria,
    pub criteria_label: String,
    pub pair_count: usize,
    /// Pairs counted in the recall denominator.
    pub evaluated_count: usize,
    pub success_count: usize,
    /// Percent.
    pub recall: f64,
    pub mean_re_successful: Option<f64>,
    pub mean_te_successful: Option<f64>,
    pub mean_re_all: Option<f64>,
    pub mean_te_all: Option<f64>,
    pub mac_n: Vec<MacNPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetReport {
    pub summary: DatasetSummary,
    pub pairs: Vec<PairOutcome>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DatasetOptions {
    /// Leave pairs that failed to load out of the recall denominator
    /// instead of counting them as failures.
    pub exclude_load_failures: bool,
}

/// Registers one pair with `config` rescaled to the pair's resolution.
pub fn evaluate_pair(pair: &PairData, config: &RegistrationConfig, criteria: &Criteria) -> Result<RegistrationReport> {
    let cfg = config.rescaled(pair.resolution);
    Ok(register(&pair.corrs, &cfg)?.with_ground_truth(&pair.gt, criteria))
}

pub fn evaluate_dataset(
    pairs: &[PairInput],
    config: &RegistrationConfig,
    criteria: &Criteria,
    options: &DatasetOptions,
) -> Result<DatasetReport> {
    criteria.validate()?;
    config.validate()?;
    let outcomes: Vec<PairOutcome> = pairs
        .par_iter()
        .map(|input| match input {
            PairInput::Failed { name, message } => PairOutcome::failed(name, message.clone()),
            PairInput::Loaded(pair) => match evaluate_pair(pair, config, criteria) {
                Ok(r) => PairOutcome {
                    name: pair.name.clone(),
                    success: r.success,
                    re_deg: r.re_deg,
                    te: r.te,
                    correct_hypotheses: r.correct_hypothesis_count.unwrap_or(0),
                    hypotheses: r.hypotheses.len(),
                    score: r.best.score,
                    transform: r.best.transform.to_rows(),
                    stage_times: Some(r.stage_times),
                    error: None,
                },
                Err(e) => PairOutcome::failed(&pair.name, e.to_string()),
            },
        })
        .collect();
    let counted: Vec<&PairOutcome> = pairs
        .iter()
        .zip(&outcomes)
        .filter(|(input, _)| !(options.exclude_load_failures && matches!(input, PairInput::Failed { .. })))
        .map(|(_, o)| o)
        .collect();
    let summary = summarize(&counted, pairs.len(), criteria);
    Ok(DatasetReport {
        summary,
        pairs: outcomes,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

pub fn summarize(counted: &[&PairOutcome], pair_count: usize, criteria: &Criteria) -> DatasetSummary {
    let success_count = counted.iter().filter(|o| o.success).count();
    let successful = || counted.iter().filter(|o| o.success);
    DatasetSummary {
        criteria: *criteria,
        criteria_label: criteria.describe(),
        pair_count,
        evaluated_count: counted.len(),
        success_count,
        recall: percent(success_count, counted.len()),
        mean_re_successful: mean(successful().filter_map(|o| o.re_deg)),
        mean_te_successful: mean(successful().filter_map(|o| o.te)),
        mean_re_all: mean(counted.iter().filter_map(|o| o.re_deg)),
        mean_te_all: mean(counted.iter().filter_map(|o| o.te)),
        mac_n: MAC_N_LEVELS
            .iter()
            .map(|&n| MacNPoint {
                n,
                recall: percent(counted.iter().filter(|o| o.correct_hypotheses >= n).count(), counted.len()),
            })
            .collect(),
    }
}

/// RMSE thresholds from 0.5 to 5 in steps of 0.5, in resolution units.
pub fn default_rmse_thresholds() -> Vec<f64> {
    (1..=10).map(|k| 0.5 * k as f64).collect()
}

/// Success per threshold (in units of `pr`) of the alignment RMSE.
pub fn rmse_success_flags(
    points: &[Point3],
    est: &RigidTransform,
    gt: &RigidTransform,
    pr: f64,
    thresholds: &[f64],
) -> Vec<bool> {
    let rmse = rmse_alignment(points, est, gt) / pr;
    thresholds.iter().map(|&t| rmse <= t).collect()
}

/// Registers the pair and checks its RMSE over `points` (normally the
/// source cloud) against each threshold.
pub fn rmse_evaluate(
    pair: &PairData,
    points: &[Point3],
    config: &RegistrationConfig,
    thresholds: &[f64],
) -> Result<Vec<bool>> {
    let report = register(&pair.corrs, &config.rescaled(pair.resolution))?;
    Ok(rmse_success_flags(
        points,
        &report.best.transform,
        &pair.gt,
        pair.resolution,
        thresholds,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub row: usize,
    pub label: &'static str,
    pub config: RegistrationConfig,
}

pub const ABLATION_ROW_COUNT: usize = 14;

/// The ablation grid: row 1 is SOG + node-guided + SVD + inlier count;
/// every other row toggles one component (rows 10–14 rank the top K).
pub fn ablation_row(row: usize, base: &RegistrationConfig) -> Option<AblationRow> {
    let mut c = *base;
    c.graph_order = GraphOrder::SecondOrder;
    c.use_gc_prefilter = false;
    c.clique_mode = CliqueMode::Maximal;
    c.use_node_guided = true;
    c.filter.use_normal_consistency = false;
    c.filter.top_k = None;
    c.eval.svd_mode = SvdMode::InstanceEqual;
    c.eval.metric = ScoreMetric::InlierCount;
    let label = match row {
        1 => "SOG+NG+SVD+#inlier",
        2 => {
            c.use_gc_prefilter = true;
            "SOG+GC+NG+SVD+#inlier"
        }
        3 => {
            c.graph_order = GraphOrder::FirstOrder;
            "FOG+NG+SVD+#inlier"
        }
        4 => {
            c.use_node_guided = false;
            "SOG+SVD+#inlier"
        }
        5 => {
            c.eval.svd_mode = SvdMode::Weighted;
            "SOG+NG+W-SVD+#inlier"
        }
        6 => {
            c.eval.metric = ScoreMetric::Mae;
            "SOG+NG+SVD+MAE"
        }
        7 => {
            c.eval.metric = ScoreMetric::Mse;
            "SOG+NG+SVD+MSE"
        }
        8 => {
            c.filter.use_normal_consistency = true;
            "SOG+NG+NC+SVD+#inlier"
        }
        9 => {
            c.clique_mode = CliqueMode::Maximum;
            "SOG+MC+NG+SVD+#inlier"
        }
        10..=14 => {
            let k = [100, 200, 500, 1000, 2000][row - 10];
            c.filter.top_k = Some(k);
            ["Top100", "Top200", "Top500", "Top1000", "Top2000"][row - 10]
        }
        _ => return None,
    };
    Some(AblationRow { row, label, config: c })
}
