//! The `mac` command line: `register`, `benchmark`, `synth` and `ablate`.
//!
//! Exit codes: 0 on success (or when no ground truth is given), 2 when a
//! registration with ground truth fails the success criteria, 1 on any
//! input, output or configuration error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use mac_core::bench::{
    ablation_row, evaluate_dataset, generate_synthetic, register, Criteria, CliqueMode, DatasetOptions,
    DatasetReport, RegistrationConfig, SyntheticSpec, ABLATION_ROW_COUNT, DEFAULT_CLOUD_POINTS,
};
use mac_core::geometry::Point3;
use mac_core::graph::{estimate_pair_resolution, GraphOrder};
use mac_core::hypothesis::{ScoreMetric, SvdMode};
use mac_core::io::{
    assign_normals, load_pairs, read_correspondences, read_ground_truth, read_key_values, read_manifest, read_ply,
    write_correspondences, write_ground_truth, write_ply, write_text, PointCloud,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MAC_THREADS";

#[derive(Debug)]
pub struct CliError(String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<mac_core::Error> for CliError {
    fn from(e: mac_core::Error) -> Self {
        CliError(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn fail<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError(msg.into()))
}

#[derive(Parser, Debug)]
#[command(name = "mac", version, about = "Point cloud registration with maximal cliques")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Register one correspondence set.
    Register(RegisterArgs),
    /// Evaluate every pair of a manifest.
    Benchmark(BenchmarkArgs),
    /// Write a synthetic pair (correspondences, ground truth, clouds).
    Synth(SynthArgs),
    /// Evaluate a manifest under several ablation presets.
    Ablate(AblateArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn on(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphOrderArg {
    Fog,
    Sog,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Mae,
    Mse,
    Inlier,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SvdArg {
    Equal,
    Weighted,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CliqueModeArg {
    Maximal,
    Maximum,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CriteriaArg {
    Indoor,
    Kitti,
    Custom,
}

/// Pipeline settings shared by every command. Each can also be given in a
/// `--config` file as `name = value`, using the flag's long name; flags
/// win over the file.
#[derive(Args, Debug, Clone, Default)]
pub struct PipelineArgs {
    /// Flat key=value settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub graph_order: Option<GraphOrderArg>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long, value_enum)]
    pub svd: Option<SvdArg>,
    /// Keep only the K heaviest cliques.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Normal consistency filter.
    #[arg(long, value_enum)]
    pub nc: Option<Toggle>,
    /// Geometric-consistency prefilter.
    #[arg(long, value_enum)]
    pub gc: Option<Toggle>,
    /// Node-guided clique selection.
    #[arg(long, value_enum)]
    pub ng: Option<Toggle>,
    #[arg(long, value_enum)]
    pub clique_mode: Option<CliqueModeArg>,
    /// Compatibility kernel width, in resolution units.
    #[arg(long)]
    pub d_cmp: Option<f64>,
    /// Compatibility score cut-off.
    #[arg(long)]
    pub t_cmp: Option<f64>,
    /// Normal consistency threshold.
    #[arg(long)]
    pub t_alpha: Option<f64>,
    /// Inlier threshold for hypothesis scoring, in resolution units.
    #[arg(long)]
    pub inlier_threshold: Option<f64>,
    #[arg(long)]
    pub min_clique_size: Option<usize>,
    /// Maximum number of maximal cliques before giving up.
    #[arg(long)]
    pub clique_budget: Option<usize>,
    /// Point cloud resolution in length units (overrides estimation).
    #[arg(long)]
    pub pr: Option<f64>,
    #[arg(long, value_enum)]
    pub criteria: Option<CriteriaArg>,
    /// Rotation threshold in degrees for `--criteria custom`.
    #[arg(long)]
    pub re: Option<f64>,
    /// Translation threshold for `--criteria custom`.
    #[arg(long)]
    pub te: Option<f64>,
}

fn fill_parsed<T: FromStr>(slot: &mut Option<T>, value: &str) -> Result<(), String> {
    if slot.is_none() {
        *slot = Some(value.parse().map_err(|_| format!("invalid value '{value}'"))?);
    }
    Ok(())
}

fn fill_enum<T: ValueEnum>(slot: &mut Option<T>, value: &str) -> Result<(), String> {
    if slot.is_none() {
        *slot = Some(T::from_str(value, true)?);
    }
    Ok(())
}

impl PipelineArgs {
    /// Fills unset options from the `--config` file, if any.
    pub fn merge_config_file(&mut self) -> CliResult<()> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        for (key, value, line) in read_key_values(&path)? {
            self.apply_setting(&key, &value)
                .map_err(|msg| CliError(format!("{}:{line}: {key}: {msg}", path.display())))?;
        }
        Ok(())
    }

    fn apply_setting(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "graph-order" => fill_enum(&mut self.graph_order, value),
            "metric" => fill_enum(&mut self.metric, value),
            "svd" => fill_enum(&mut self.svd, value),
            "top-k" => fill_parsed(&mut self.top_k, value),
            "nc" => fill_enum(&mut self.nc, value),
            "gc" => fill_enum(&mut self.gc, value),
            "ng" => fill_enum(&mut self.ng, value),
            "clique-mode" => fill_enum(&mut self.clique_mode, value),
            "d-cmp" => fill_parsed(&mut self.d_cmp, value),
            "t-cmp" => fill_parsed(&mut self.t_cmp, value),
            "t-alpha" => fill_parsed(&mut self.t_alpha, value),
            "inlier-threshold" => fill_parsed(&mut self.inlier_threshold, value),
            "min-clique-size" => fill_parsed(&mut self.min_clique_size, value),
            "clique-budget" => fill_parsed(&mut self.clique_budget, value),
            "pr" => fill_parsed(&mut self.pr, value),
            "criteria" => fill_enum(&mut self.criteria, value),
            "re" => fill_parsed(&mut self.re, value),
            "te" => fill_parsed(&mut self.te, value),
            _ => Err("unknown setting".into()),
        }
    }

    /// Pipeline configuration at unit resolution; rescale per input.
    pub fn registration_config(&self) -> CliResult<RegistrationConfig> {
        let mut c = RegistrationConfig::default();
        if let Some(g) = self.graph_order {
            c.graph_order = match g {
                GraphOrderArg::Fog => GraphOrder::FirstOrder,
                GraphOrderArg::Sog => GraphOrder::SecondOrder,
            };
        }
        if let Some(m) = self.metric {
            c.eval.metric = match m {
                MetricArg::Mae => ScoreMetric::Mae,
                MetricArg::Mse => ScoreMetric::Mse,
                MetricArg::Inlier => ScoreMetric::InlierCount,
            };
        }
        if let Some(s) = self.svd {
            c.eval.svd_mode = match s {
                SvdArg::Equal => SvdMode::InstanceEqual,
                SvdArg::Weighted => SvdMode::Weighted,
            };
        }
        if let Some(m) = self.clique_mode {
            c.clique_mode = match m {
                CliqueModeArg::Maximal => CliqueMode::Maximal,
                CliqueModeArg::Maximum => CliqueMode::Maximum,
            };
        }
        if self.top_k.is_some() {
            c.filter.top_k = self.top_k;
        }
        if let Some(t) = self.nc {
            c.filter.use_normal_consistency = t.on();
        }
        if let Some(t) = self.gc {
            c.use_gc_prefilter = t.on();
        }
        if let Some(t) = self.ng {
            c.use_node_guided = t.on();
        }
        if let Some(v) = self.d_cmp {
            c.graph.d_cmp = v;
        }
        if let Some(v) = self.t_cmp {
            c.graph.t_cmp = v;
            c.graph.adaptive_t_cmp = false;
        }
        if let Some(v) = self.t_alpha {
            c.graph.t_alpha = v;
            c.filter.t_alpha = v;
        }
        if let Some(v) = self.inlier_threshold {
            c.eval.inlier_threshold = v;
        }
        if let Some(v) = self.min_clique_size {
            c.filter.min_size = v;
        }
        if let Some(v) = self.clique_budget {
            c.filter.budget = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn success_criteria(&self) -> CliResult<(&'static str, Criteria)> {
        let preset = self.criteria.unwrap_or(if self.re.is_some() || self.te.is_some() {
            CriteriaArg::Custom
        } else {
            CriteriaArg::Indoor
        });
        let out = match preset {
            CriteriaArg::Indoor => ("indoor", Criteria::indoor()),
            CriteriaArg::Kitti => ("kitti", Criteria::kitti()),
            CriteriaArg::Custom => match (self.re, self.te) {
                (Some(re), Some(te)) => (
                    "custom",
                    Criteria {
                        re_thresh_deg: re,
                        te_thresh: te,
                    },
                ),
                _ => return fail("custom criteria need both --re and --te"),
            },
        };
        out.1.validate()?;
        Ok(out)
    }
}

#[derive(Args, Debug)]
pub struct RegisterArgs {
    /// Correspondence file (6 or 12 columns per line).
    #[arg(long)]
    pub corr: PathBuf,
    /// Ground-truth 4×4 transform.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Recorded in the report; the pipeline itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Source cloud (ASCII PLY), for resolution and normals.
    #[arg(long, requires = "target_cloud")]
    pub source_cloud: Option<PathBuf>,
    #[arg(long, requires = "source_cloud")]
    pub target_cloud: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Lines of `corr gt [source.ply target.ply] [pr=VALUE]`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSON summary path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-pair CSV; defaults to the summary path with a .csv extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Leave unreadable pairs out of the recall denominator.
    #[arg(long)]
    pub exclude_load_failures: bool,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub n_inliers: usize,
    #[arg(long, default_value_t = 80)]
    pub n_outliers: usize,
    /// Inlier noise in resolution units.
    #[arg(long, default_value_t = 0.5)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side of the sampling cube.
    #[arg(long, default_value_t = 1.0)]
    pub extent: f64,
    /// Points in each dense cloud.
    #[arg(long, default_value_t = DEFAULT_CLOUD_POINTS)]
    pub cloud_points: usize,
    /// Number of pairs; pair i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub pairs: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated preset numbers, or `all`.
    #[arg(long, default_value = "all")]
    pub rows: String,
    /// CSV table path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    let result = match cli.command {
        Command::Register(a) => cmd_register(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Ablate(a) => cmd_ablate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = match raw.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => return fail(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")),
    };
    // the global pool can only be set once per process; later calls keep it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => Ok(write_text(p, text)?),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn metric_name(m: ScoreMetric) -> &'static str {
    match m {
        ScoreMetric::InlierCount => "inlier",
        ScoreMetric::Mae => "mae",
        ScoreMetric::Mse => "mse",
    }
}

fn criteria_json(name: &str, c: &Criteria) -> Value {
    json!({
        "name": name,
        "re_thresh_deg": c.re_thresh_deg,
        "te_thresh": c.te_thresh,
        "label": c.describe(),
    })
}

pub fn cmd_register(mut args: RegisterArgs) -> CliResult<i32> {
    args.pipeline.merge_config_file()?;
    let base = args.pipeline.registration_config()?;
    let mut corrs = read_correspondences(&args.corr)?;
    let clouds = match (&args.source_cloud, &args.target_cloud) {
        (Some(s), Some(t)) => Some((read_ply(s)?, read_ply(t)?)),
        _ => None,
    };
    let (pr, pr_source) = match (args.pipeline.pr, &clouds) {
        (Some(pr), _) => (pr, "given"),
        (None, Some((s, t))) => (estimate_pair_resolution(&s.points, &t.points)?, "clouds"),
        (None, None) => {
            let s: Vec<Point3> = corrs.iter().map(|c| c.source).collect();
            let t: Vec<Point3> = corrs.iter().map(|c| c.target).collect();
            (estimate_pair_resolution(&s, &t)?, "keypoints")
        }
    };
    if base.filter.use_normal_consistency && !corrs.iter().all(|c| c.has_normals()) {
        if let Some((s, t)) = &clouds {
            assign_normals(&mut corrs, s, t)?;
        }
    }
    let config = base.rescaled(pr);
    let mut report = register(&corrs, &config)?;
    let gt = match &args.gt {
        Some(p) => Some(read_ground_truth(p)?),
        None => None,
    };
    let mut json = json!({
        "transform": report.best.transform.to_rows(),
        "score": report.best.score,
        "metric": metric_name(report.best.metric),
        "found": report.found,
        "source_clique": report.best.source_clique,
        "resolution": pr,
        "resolution_source": pr_source,
        "seed": args.seed,
        "correspondences": report.correspondence_count,
        "graph_nodes": report.graph_node_count,
        "graph_edges": report.graph_edge_count,
        "cliques": report.clique_count,
        "selected_cliques": report.selected_clique_count,
        "hypotheses": report.hypotheses.len(),
        "config": config,
        "stage_times_ms": report.stage_times,
        "total_ms": report.total_ms,
    });
    let mut code = EXIT_OK;
    if let Some(gt) = gt {
        let (name, criteria) = args.pipeline.success_criteria()?;
        report = report.with_ground_truth(&gt, &criteria);
        let obj = json.as_object_mut().expect("report is an object");
        obj.insert("success".into(), json!(report.success));
        obj.insert("re_deg".into(), json!(report.re_deg));
        obj.insert("te".into(), json!(report.te));
        obj.insert("correct_hypotheses".into(), json!(report.correct_hypothesis_count));
        obj.insert("criteria".into(), criteria_json(name, &criteria));
        if !report.success {
            code = EXIT_FAILED;
        }
    }
    let text = serde_json::to_string_pretty(&json).map_err(|e| CliError(e.to_string()))?;
    emit(args.out.as_deref(), &text)?;
    Ok(code)
}

#[derive(Serialize)]
struct PairRow<'a> {
    name: &'a str,
    success: bool,
    re_deg: Option<f64>,
    te: Option<f64>,
    correct_hypotheses: usize,
    hypotheses: usize,
    score: f64,
    graph_construction_ms: Option<f64>,
    clique_search_ms: Option<f64>,
    node_guided_selection_ms: Option<f64>,
    pose_estimation_ms: Option<f64>,
    error: Option<&'a str>,
}

fn pairs_csv(report: &DatasetReport) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &report.pairs {
        let t = p.stage_times;
        w.serialize(PairRow {
            name: &p.name,
            success: p.success,
            re_deg: p.re_deg,
            te: p.te,
            correct_hypotheses: p.correct_hypotheses,
            hypotheses: p.hypotheses,
            score: p.score,
            graph_construction_ms: t.map(|t| t.graph_construction),
            clique_search_ms: t.map(|t| t.clique_search),
            node_guided_selection_ms: t.map(|t| t.node_guided_selection),
            pose_estimation_ms: t.map(|t| t.pose_estimation),
            error: p.error.as_deref(),
        })
        .map_err(|e| CliError(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError(e.to_string()))
}

fn load_manifest_pairs(
    manifest: &Path,
    pipeline: &PipelineArgs,
    need_normals: bool,
) -> CliResult<Vec<mac_core::bench::PairInput>> {
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        return fail(format!("{}: no pairs", manifest.display()));
    }
    let mut pairs = load_pairs(&entries, need_normals);
    if let Some(pr) = pipeline.pr {
        for p in &mut pairs {
            if let mac_core::bench::PairInput::Loaded(d) = p {
                d.resolution = pr;
            }
        }
    }
    Ok(pairs)
}

pub fn cmd_benchmark(mut args: BenchmarkArgs) -> CliResult<i32> {
    args.pipeline.merge_config_file()?;
    let config = args.pipeline.registration_config()?;
    let (name, criteria) = args.pipeline.success_criteria()?;
    let pairs = load_manifest_pairs(&args.manifest, &args.pipeline, config.filter.use_normal_consistency)?;
    let options = DatasetOptions {
        exclude_load_failures: args.exclude_load_failures,
    };
    let report = evaluate_dataset(&pairs, &config, &criteria, &options)?;
    let summary = json!({
        "criteria": criteria_json(name, &criteria),
        "summary": report.summary,
        "config": config,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError(e.to_string()))?;
    emit(args.out.as_deref(), &text)?;
    let csv_path = args.csv.clone().or_else(|| args.out.as_ref().map(|p| p.with_extension("csv")));
    if let Some(p) = csv_path {
        write_text(&p, &pairs_csv(&report)?)?;
    }
    eprintln!(
        "recall {:.2}% ({}/{} pairs, {})",
        report.summary.recall,
        report.summary.success_count,
        report.summary.evaluated_count,
        report.summary.criteria_label
    );
    Ok(EXIT_OK)
}

pub fn cmd_synth(args: SynthArgs) -> CliResult<i32> {
    if args.pairs == 0 {
        return fail("--pairs must be at least 1");
    }
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError(format!("{}: cannot create output directory: {e}", args.out_dir.display())))?;
    let mut manifest = String::new();
    for i in 0..args.pairs {
        let spec = SyntheticSpec {
            n_inliers: args.n_inliers,
            n_outliers: args.n_outliers,
            noise_sigma: args.noise_sigma,
            extent: args.extent,
            seed: args.seed.wrapping_add(i as u64),
            cloud_points: args.cloud_points,
        };
        let pair = generate_synthetic(&spec)?;
        let prefix = if args.pairs == 1 {
            String::new()
        } else {
            format!("pair{i:04}_")
        };
        let file = |name: &str| format!("{prefix}{name}");
        let dir = &args.out_dir;
        write_correspondences(&dir.join(file("corr.txt")), &pair.corrs)?;
        write_ground_truth(&dir.join(file("gt.txt")), &pair.gt)?;
        write_ply(
            &dir.join(file("source.ply")),
            &PointCloud {
                points: pair.source_cloud,
                normals: None,
            },
        )?;
        write_ply(
            &dir.join(file("target.ply")),
            &PointCloud {
                points: pair.target_cloud,
                normals: None,
            },
        )?;
        manifest.push_str(&format!(
            "{} {} {} {} pr={:.16e}\n",
            file("corr.txt"),
            file("gt.txt"),
            file("source.ply"),
            file("target.ply"),
            pair.resolution
        ));
    }
    write_text(&args.out_dir.join("manifest.txt"), &manifest)?;
    Ok(EXIT_OK)
}

/// Parses `all` or a comma-separated list of preset numbers.
pub fn parse_rows(spec: &str) -> CliResult<Vec<usize>> {
    let valid = || format!("valid presets: all, or a comma-separated list of 1..={ABLATION_ROW_COUNT}");
    if spec.trim() == "all" {
        return Ok((1..=ABLATION_ROW_COUNT).collect());
    }
    let mut rows = Vec::new();
    for tok in spec.split(',').map(str::trim) {
        match tok.parse::<usize>() {
            Ok(r) if (1..=ABLATION_ROW_COUNT).contains(&r) => rows.push(r),
            _ => return fail(format!("unknown row preset '{tok}'; {}", valid())),
        }
    }
    if rows.is_empty() {
        return fail(valid());
    }
    Ok(rows)
}

#[derive(Serialize)]
struct AblationCsvRow {
    row: usize,
    label: &'static str,
    #[serde(rename = "FOG")]
    fog: &'static str,
    #[serde(rename = "SOG")]
    sog: &'static str,
    #[serde(rename = "GC")]
    gc: &'static str,
    #[serde(rename = "MC")]
    mc: &'static str,
    #[serde(rename = "NG")]
    ng: &'static str,
    #[serde(rename = "NC")]
    nc: &'static str,
    #[serde(rename = "CR")]
    cr: String,
    #[serde(rename = "SVD")]
    svd: &'static str,
    #[serde(rename = "W-SVD")]
    wsvd: &'static str,
    #[serde(rename = "MAE")]
    mae: &'static str,
    #[serde(rename = "MSE")]
    mse: &'static str,
    #[serde(rename = "#inlier")]
    inlier: &'static str,
    pairs: usize,
    recall: f64,
    mean_re_deg: Option<f64>,
    mean_te: Option<f64>,
    mean_re_deg_all: Option<f64>,
    mean_te_all: Option<f64>,
}

fn mark(on: bool) -> &'static str {
    if on {
        "x"
    } else {
        ""
    }
}

pub fn cmd_ablate(mut args: AblateArgs) -> CliResult<i32> {
    let rows = parse_rows(&args.rows)?;
    args.pipeline.merge_config_file()?;
    let base = args.pipeline.registration_config()?;
    let (_, criteria) = args.pipeline.success_criteria()?;
    let presets: Vec<_> = rows
        .iter()
        .map(|&r| ablation_row(r, &base).expect("row numbers were validated"))
        .collect();
    let need_normals = presets.iter().any(|p| p.config.filter.use_normal_consistency);
    let pairs = load_manifest_pairs(&args.manifest, &args.pipeline, need_normals)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for preset in &presets {
        let report = evaluate_dataset(&pairs, &preset.config, &criteria, &DatasetOptions::default())?;
        let c = &preset.config;
        let s = &report.summary;
        w.serialize(AblationCsvRow {
            row: preset.row,
            label: preset.label,
            fog: mark(c.graph_order == GraphOrder::FirstOrder),
            sog: mark(c.graph_order == GraphOrder::SecondOrder),
            gc: mark(c.use_gc_prefilter),
            mc: mark(c.clique_mode == CliqueMode::Maximum),
            ng: mark(c.use_node_guided),
            nc: mark(c.filter.use_normal_consistency),
            cr: c.filter.top_k.map_or_else(String::new, |k| format!("top{k}")),
            svd: mark(c.eval.svd_mode == SvdMode::InstanceEqual),
            wsvd: mark(c.eval.svd_mode == SvdMode::Weighted),
            mae: mark(c.eval.metric == ScoreMetric::Mae),
            mse: mark(c.eval.metric == ScoreMetric::Mse),
            inlier: mark(c.eval.metric == ScoreMetric::InlierCount),
            pairs: s.evaluated_count,
            recall: s.recall,
            mean_re_deg: s.mean_re_successful,
            mean_te: s.mean_te_successful,
            mean_re_deg_all: s.mean_re_all,
            mean_te_all: s.mean_te_all,
        })
        .map_err(|e| CliError(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|e| CliError(e.to_string()))?;
    emit(args.out.as_deref(), text.trim_end())?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_presets() {
        assert_eq!(parse_rows("all").unwrap().len(), ABLATION_ROW_COUNT);
        assert_eq!(parse_rows("1, 3,9").unwrap(), vec![1, 3, 9]);
        let err = parse_rows("1,15").unwrap_err().to_string();
        assert!(err.contains("'15'") && err.contains("valid presets"), "{err}");
        assert!(parse_rows("fog").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.cfg");
        std::fs::write(&cfg, "metric = mse\ntop-k = 7\n# comment\nng = off\n").unwrap();
        let mut p = PipelineArgs {
            config: Some(cfg.clone()),
            metric: Some(MetricArg::Inlier),
            ..PipelineArgs::default()
        };
        p.merge_config_file().unwrap();
        let c = p.registration_config().unwrap();
        assert_eq!(c.eval.metric, ScoreMetric::InlierCount);
        assert_eq!(c.filter.top_k, Some(7));
        assert!(!c.use_node_guided);

        std::fs::write(&cfg, "metric = mae\nbogus = 1\n").unwrap();
        let mut p = PipelineArgs {
            config: Some(cfg.clone()),
            ..PipelineArgs::default()
        };
        let err = p.merge_config_file().unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn criteria_presets() {
        let p = PipelineArgs::default();
        assert_eq!(p.success_criteria().unwrap().1, Criteria::indoor());
        let p = PipelineArgs {
            criteria: Some(CriteriaArg::Kitti),
            ..PipelineArgs::default()
        };
        assert_eq!(p.success_criteria().unwrap().1, Criteria::kitti());
        let p = PipelineArgs {
            re: Some(3.0),
            ..PipelineArgs::default()
        };
        assert!(p.success_criteria().is_err());
    }
}
