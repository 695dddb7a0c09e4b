use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Args, ValueEnum};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use graphmean::dimselect::{self, select_dimension, select_from_spectrum, usvt_dim, zg_elbow};
use graphmean::efficiency::{self, CvConfig, SbmExperimentConfig};
use graphmean::estimator::{self, diag_augment_rowmean};
use graphmean::graph::{log1p_transform, sample_mean, weighted_mean, AdjacencyMatrix, GraphBatch};
use graphmean::io::{self, Binarization, Format, LoadOptions};
use graphmean::models::{sample_iem_graph, sample_memberships, sbm_probability_matrix, SbmParams};
use graphmean::permtest::{self, FlipOptions, LabelAssignment, PermTestConfig, SpatialAdjacency};
use graphmean::rng::{self, tag};
use graphmean::{fixtures, spectral, DimSelectMethod, LatentPositions};

use crate::manifest::RunRecord;

/// `zg`, `zg:S`, `usvt`, `usvt:C`, `fixed:D`, or a bare dimension `D`.
fn parse_dim(s: &str) -> std::result::Result<DimSelectMethod, String> {
    if let Ok(d) = s.trim().parse::<usize>() {
        let method = DimSelectMethod::Fixed(d);
        return method.validate().map(|_| method).map_err(|e| e.to_string());
    }
    s.parse().map_err(|e: graphmean::Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: graphmean::Error| e.to_string())
}

/// `<dir>/<stem>.<suffix>` for an output `<dir>/<stem>.<ext>`.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    io::write_text(path, text).with_context(|| format!("writing {}", path.display()))
}

fn column_csv(header: &str, values: &[f64]) -> String {
    let mut out = format!("{header}\n");
    for v in values {
        writeln!(out, "{v}").unwrap();
    }
    out
}

fn log_warnings(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

#[derive(Args, Debug, Serialize)]
pub struct InputArgs {
    /// Directory of graph files, a `.manifest` list, or a single graph file.
    #[arg(long)]
    pub input: PathBuf,

    /// `dense-csv` or `edge-list`.
    #[arg(long, default_value = "dense-csv", value_parser = parse_format)]
    pub format: Format,

    /// Vertex count for edge lists (default: largest index + 1).
    #[arg(long)]
    pub vertices: Option<usize>,

    /// Treat any positive entry as an edge.
    #[arg(long, conflicts_with = "weighted")]
    pub binarize: bool,

    /// Accept nonnegative edge weights.
    #[arg(long)]
    pub weighted: bool,

    /// Replace weights w by ln(w + 1) (with --weighted).
    #[arg(long, requires = "weighted")]
    pub log1p: bool,
}

impl InputArgs {
    fn load(&self) -> Result<GraphBatch> {
        let binarization = if self.weighted {
            Binarization::Weighted
        } else if self.binarize {
            Binarization::PositiveAsEdge
        } else {
            Binarization::Require
        };
        let opts = LoadOptions { format: self.format, directed: false, binarization, n: self.vertices };
        let batch = io::load_batch(&self.input, &opts)?;
        log::info!("loaded {} graphs on {} vertices", batch.len(), batch.n().unwrap_or(0));
        if !self.log1p {
            return Ok(batch);
        }
        let graphs = batch.graphs().iter().map(log1p_transform).collect::<graphmean::Result<Vec<_>>>()?;
        Ok(GraphBatch::with_sources(graphs, batch.sources().to_vec())?)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMethod {
    /// Entry-wise sample mean.
    Abar,
    /// Low-rank estimate.
    Phat,
}

#[derive(Args, Debug, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, value_enum, default_value_t = EstimateMethod::Phat)]
    pub method: EstimateMethod,

    /// Dimension selection for the low-rank estimate.
    #[arg(long, default_value = "zg:3", value_parser = parse_dim)]
    pub dim: DimSelectMethod,

    /// Estimated matrix, dense CSV.
    #[arg(long)]
    pub out: PathBuf,

    /// Diagnostics JSON (selected dimension, eigenvalues, warnings).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

pub fn estimate(args: &EstimateArgs) -> Result<Option<RunRecord>> {
    let batch = args.input.load()?;
    let (matrix, diagnostics) = match (args.method, args.input.weighted) {
        (EstimateMethod::Abar, false) => (sample_mean(&batch)?.into_data(), None),
        (EstimateMethod::Abar, true) => (weighted_mean(&batch)?, None),
        (EstimateMethod::Phat, false) => {
            let r = estimator::estimate_phat(&batch, args.dim)?;
            (r.phat.into_data(), Some(r.diagnostics))
        }
        (EstimateMethod::Phat, true) => {
            let r = estimator::estimate_weighted(&batch, args.dim)?;
            (r.estimate, Some(r.diagnostics))
        }
    };
    if let Some(d) = &diagnostics {
        log::info!("selected dimension {}", d.d_selected);
    }
    write(&args.out, &io::dense_csv_string(&matrix))?;
    let mut record = RunRecord::new(&args.out, args)?;
    if let Some(path) = &args.diagnostics {
        let json = serde_json::json!({
            "method": args.method,
            "graphs": batch.len(),
            "n": matrix.nrows(),
            "diagnostics": diagnostics,
        });
        write(path, &(serde_json::to_string_pretty(&json)? + "\n"))?;
        record = record.output(path.clone());
    }
    Ok(Some(record))
}

#[derive(Args, Debug, Serialize)]
pub struct EmbedArgs {
    /// Matrix to embed.
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, default_value = "dense-csv", value_parser = parse_format)]
    pub format: Format,

    /// Vertex count for edge lists.
    #[arg(long)]
    pub vertices: Option<usize>,

    /// Embedding dimension: `D`, `fixed:D`, `zg:S` or `usvt:C`.
    #[arg(long, value_parser = parse_dim)]
    pub dim: DimSelectMethod,

    /// Number of graphs averaged into the input (USVT threshold).
    #[arg(long, default_value_t = 1)]
    pub m: usize,

    /// Scaled singular vectors, for asymmetric (directed) input.
    #[arg(long)]
    pub svd: bool,

    /// Replace weights w by ln(w + 1) first.
    #[arg(long)]
    pub log1p: bool,

    /// Set the diagonal to row means over the other vertices first.
    #[arg(long)]
    pub augment: bool,

    /// Latent positions CSV (N rows, d columns); sidecars share its stem.
    #[arg(long)]
    pub out: PathBuf,
}

fn load_matrix(path: &Path, format: Format, n: Option<usize>, directed: bool) -> Result<Array2<f64>> {
    Ok(match format {
        Format::DenseCsv => io::load_dense(path)?,
        Format::EdgeList => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            io::parse_edge_list(path, &text, n, directed)?
        }
    })
}

pub fn embed(args: &EmbedArgs) -> Result<Option<RunRecord>> {
    let mut w = load_matrix(&args.input, args.format, args.vertices, args.svd)?;
    if args.log1p {
        let directed = args.svd;
        w = log1p_transform(&AdjacencyMatrix::new(w, directed)?)?.into_data();
    }
    if args.augment {
        let d0 = diag_augment_rowmean(&w)?;
        w.diag_mut().assign(&d0);
    }
    let mut record = RunRecord::new(&args.out, args)?;
    if args.svd {
        let d = match args.dim {
            DimSelectMethod::Fixed(d) => d,
            method => {
                let full = spectral::svd_embed(&w, w.nrows().min(w.ncols()))?;
                let sv = full.singular_values.to_vec();
                let sel = match method {
                    DimSelectMethod::Zg(s) => zg_elbow(&sv, s)?,
                    DimSelectMethod::Usvt(c) => usvt_dim(&sv, w.nrows(), args.m, c)?,
                    DimSelectMethod::Fixed(_) => unreachable!(),
                };
                log_warnings(&sel.warnings);
                sel.d
            }
        };
        let emb = spectral::svd_embed(&w, d)?;
        let (right, values) = (sidecar(&args.out, "right.csv"), sidecar(&args.out, "singular-values.csv"));
        write(&args.out, &io::dense_csv_string(&emb.left))?;
        write(&right, &io::dense_csv_string(&emb.right))?;
        write(&values, &column_csv("singular_value", &emb.singular_values.to_vec()))?;
        record = record.output(right).output(values);
    } else {
        let sel = select_dimension(&w, args.dim, args.m)?;
        log_warnings(&sel.warnings);
        let pairs = spectral::top_eigenpairs(&w, sel.d)?;
        if let Some(v) = pairs.values.iter().find(|&&v| v < 0.0) {
            log::warn!("negative eigenvalue {v} among the leading {}; its column is zero", sel.d);
        }
        let latent = LatentPositions::estimate(spectral::scaled_columns(&pairs));
        let values = sidecar(&args.out, "eigenvalues.csv");
        write(&args.out, &io::dense_csv_string(latent.x()))?;
        write(&values, &column_csv("eigenvalue", &pairs.values.to_vec()))?;
        record = record.output(values);
    }
    Ok(Some(record))
}

#[derive(Args, Debug, Serialize)]
pub struct DimselectArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value = "zg:3", value_parser = parse_dim)]
    pub dim: DimSelectMethod,

    /// JSON result; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn dimselect(args: &DimselectArgs) -> Result<Option<RunRecord>> {
    let batch = args.input.load()?;
    let mut mean = if args.input.weighted { weighted_mean(&batch)? } else { sample_mean(&batch)?.into_data() };
    let d0 = diag_augment_rowmean(&mean)?;
    mean.diag_mut().assign(&d0);
    let pairs = spectral::eig_sym(&mean)?;
    let sel = select_from_spectrum(&pairs, args.dim, batch.len())?;
    log_warnings(&sel.warnings);
    let mut json = serde_json::json!({
        "method": args.dim,
        "n": mean.nrows(),
        "m": batch.len(),
        "d": sel.d,
        "warnings": sel.warnings,
        "eigenvalues": pairs.values.to_vec(),
    });
    if let DimSelectMethod::Usvt(c) = args.dim {
        json["threshold"] = dimselect::usvt_threshold(mean.nrows(), batch.len(), c).into();
    }
    let text = serde_json::to_string_pretty(&json)? + "\n";
    match &args.out {
        Some(out) => {
            write(out, &text)?;
            Ok(Some(RunRecord::new(out, args)?))
        }
        None => {
            print!("{text}");
            Ok(None)
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[command(group(ArgGroup::new("model").args(["fixture", "params"])))]
pub struct ModelArgs {
    /// Built-in blockmodel: two-block-4.2 or five-block-E.
    #[arg(long)]
    pub fixture: Option<String>,

    /// Blockmodel JSON: {"B": [[...]], "rho": [...]}.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<Option<SbmParams>> {
        if let Some(name) = &self.fixture {
            return fixture(name).map(Some);
        }
        if let Some(path) = &self.params {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(Some(SbmParams::from_json(&text).with_context(|| format!("parsing {}", path.display()))?));
        }
        Ok(None)
    }
}

fn fixture(name: &str) -> Result<SbmParams> {
    fixtures::by_name(name).ok_or_else(|| {
        anyhow!(graphmean::Error::InvalidParameter(format!(
            "unknown fixture '{name}' (expected one of {})",
            fixtures::SBM_FIXTURES.join(", ")
        )))
    })
}

/// Configuration errors that are not core errors still exit with status 1.
fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(graphmean::Error::InvalidParameter(msg.into()))
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Vertices.
    #[arg(long)]
    pub n: usize,

    /// Graphs to sample.
    #[arg(long)]
    pub m: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Format of the graph files.
    #[arg(long, default_value = "dense-csv", value_parser = parse_format)]
    pub format: Format,

    /// Output directory: graphs/, probability.csv, memberships.csv.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn simulate_sbm(args: &SimulateArgs) -> Result<Option<RunRecord>> {
    let params = args.model.resolve()?.ok_or_else(|| invalid("one of --fixture or --params is required"))?;
    if args.m == 0 || args.n < 2 {
        bail!(invalid("need --n >= 2 and --m >= 1"));
    }
    let mut g = rng::stream(args.seed, &[tag::SIMULATE]);
    let tau = sample_memberships(params.rho(), args.n, &mut g)?;
    let p = sbm_probability_matrix(&params, &tau)?;
    let width = (args.m - 1).to_string().len().max(3);
    let ext = match args.format {
        Format::DenseCsv => "csv",
        Format::EdgeList => "edges",
    };
    for k in 0..args.m {
        let graph = sample_iem_graph(&p, &mut g);
        let path = args.out.join("graphs").join(format!("graph_{k:0width$}.{ext}"));
        io::save_matrix(graph.data(), &path, args.format).with_context(|| format!("writing {}", path.display()))?;
    }
    let prob = args.out.join("probability.csv");
    write(&prob, &io::dense_csv_string(p.data()))?;
    let memberships = args.out.join("memberships.csv");
    let mut text = String::from("vertex,block\n");
    for (i, b) in tau.labels().iter().enumerate() {
        writeln!(text, "{i},{b}").unwrap();
    }
    write(&memberships, &text)?;
    let record = RunRecord::new(&args.out, args)?.seed(args.seed).output(prob).output(memberships);
    Ok(Some(RunRecord {
        config: serde_json::json!({ "args": record.config, "model": params }),
        ..record
    }))
}

/// `re-sweep --config` file; command-line flags take precedence.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub fixture: Option<String>,
    pub sbm: Option<SbmParams>,
    pub n: Option<Vec<usize>>,
    pub m: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub dim: Option<DimSelectMethod>,
    pub bootstrap: Option<usize>,
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", p.display())))
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ReSweepArgs {
    /// JSON config with any of: fixture, sbm, n, m, replicates, seed, dim, bootstrap.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Comma-separated vertex counts.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,

    /// Graphs per replicate.
    #[arg(long)]
    pub m: Option<usize>,

    /// Monte Carlo replicates per N (default 200).
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Default 0.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Dimension method (default: fixed at the rank of B).
    #[arg(long, value_parser = parse_dim)]
    pub dim: Option<DimSelectMethod>,

    /// Bootstrap resamples for the confidence half-widths (default 500).
    #[arg(long)]
    pub bootstrap: Option<usize>,

    /// CSV report.
    #[arg(long)]
    pub out: PathBuf,

    /// Full JSON report including per-replicate block sums.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn re_sweep(args: &ReSweepArgs) -> Result<Option<RunRecord>> {
    let file: SweepFile = read_config(args.config.as_deref())?;
    let params = match args.model.resolve()? {
        Some(p) => p,
        None => match (&file.sbm, &file.fixture) {
            (Some(p), _) => p.clone(),
            (None, Some(name)) => fixture(name)?,
            (None, None) => bail!(invalid("no blockmodel: use --fixture, --params, or a config file")),
        },
    };
    let n_values = args.n.clone().or(file.n).ok_or_else(|| invalid("no N grid: use --n or a config file"))?;
    let m = args.m.or(file.m).ok_or_else(|| invalid("no M: use --m or a config file"))?;
    let mut config = SbmExperimentConfig::new(
        params,
        n_values,
        m,
        args.replicates.or(file.replicates).unwrap_or(200),
        args.seed.or(file.seed).unwrap_or(0),
    );
    config.method = Some(args.dim.or(file.dim).unwrap_or_else(|| config.method()));
    config.bootstrap = args.bootstrap.or(file.bootstrap).unwrap_or(efficiency::DEFAULT_BOOTSTRAP);

    let report = efficiency::run_sbm_experiment(&config)?;
    write(&args.out, &report.to_csv())?;
    let mut record = RunRecord::new(&args.out, &config)?.seed(config.seed);
    if let Some(path) = &args.report {
        write(path, &(report.to_json() + "\n"))?;
        record = record.output(path.clone());
    }
    Ok(Some(record))
}

/// `cross-validate --config` file; command-line flags take precedence.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CvFile {
    pub m: Option<usize>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub dim: Option<DimSelectMethod>,
    pub bootstrap: Option<usize>,
    pub include_sample: Option<bool>,
}

#[derive(Args, Debug, Serialize)]
pub struct CrossValidateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// JSON config with any of: m, replicates, seed, dim, bootstrap, include_sample.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Sample size; m = 1 enumerates every graph.
    #[arg(long)]
    pub m: Option<usize>,

    /// Random subsets for m > 1 (default 100).
    #[arg(long)]
    pub replicates: Option<usize>,

    /// Default 0.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Default zg:3.
    #[arg(long, value_parser = parse_dim)]
    pub dim: Option<DimSelectMethod>,

    /// Default 500.
    #[arg(long)]
    pub bootstrap: Option<usize>,

    /// Compare against the mean of the whole batch, sample included.
    #[arg(long)]
    pub include_sample: bool,

    /// CSV summary in the re-sweep column layout.
    #[arg(long)]
    pub out: PathBuf,

    /// Per-replicate CSV (subset, selected dimension, both errors).
    #[arg(long)]
    pub replicates_out: Option<PathBuf>,
}

pub fn cross_validate(args: &CrossValidateArgs) -> Result<Option<RunRecord>> {
    let file: CvFile = read_config(args.config.as_deref())?;
    let m = args.m.or(file.m).ok_or_else(|| invalid("no m: use --m or a config file"))?;
    let mut config = CvConfig::new(
        m,
        args.replicates.or(file.replicates).unwrap_or(100),
        args.dim.or(file.dim).unwrap_or_default(),
        args.seed.or(file.seed).unwrap_or(0),
    );
    config.bootstrap = args.bootstrap.or(file.bootstrap).unwrap_or(efficiency::DEFAULT_BOOTSTRAP);
    config.include_sample_in_truth = args.include_sample || file.include_sample.unwrap_or(false);

    let batch = args.input.load()?;
    let report = efficiency::cross_validate(&batch, &config)?;
    write(&args.out, &report.to_csv())?;
    let mut record = RunRecord::new(&args.out, &serde_json::json!({ "input": args.input, "cv": config }))?.seed(config.seed);
    if let Some(path) = &args.replicates_out {
        write(path, &report.replicates_csv())?;
        record = record.output(path.clone());
    }
    Ok(Some(record))
}

#[derive(Args, Debug, Serialize)]
#[command(group(ArgGroup::new("positions").args(["latent", "graphs"]).required(true)))]
pub struct PermTestArgs {
    /// Latent positions CSV (N rows).
    #[arg(long)]
    pub latent: Option<PathBuf>,

    /// Graph batch to estimate and embed first (dense CSV graphs).
    #[arg(long)]
    pub graphs: Option<PathBuf>,

    /// Dimension method for --graphs.
    #[arg(long, default_value = "zg:3", value_parser = parse_dim)]
    pub dim: DimSelectMethod,

    /// `vertex,label` CSV.
    #[arg(long)]
    pub labels: PathBuf,

    /// Spatial adjacency between vertices.
    #[arg(long)]
    pub spatial: PathBuf,

    #[arg(long, default_value = "dense-csv", value_parser = parse_format)]
    pub spatial_format: Format,

    /// Comma-separated flip counts k.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub flips: Vec<usize>,

    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Allow flips that split a label into more spatial components.
    #[arg(long)]
    pub no_contiguity: bool,

    /// Report (count + 1) / (R + 1) instead of count / R.
    #[arg(long)]
    pub smoothed: bool,

    /// First-pair draws allowed per flip.
    #[arg(long, default_value_t = permtest::DEFAULT_RETRY_BUDGET)]
    pub retry_budget: usize,

    /// Result JSON; null samples go to `<stem>.null.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct FlipResult {
    k: usize,
    p_value: f64,
    count_below: usize,
    replicates: usize,
}

pub fn perm_test(args: &PermTestArgs) -> Result<Option<RunRecord>> {
    if args.flips.is_empty() {
        bail!(invalid("--flips needs at least one value"));
    }
    let x = match (&args.latent, &args.graphs) {
        (Some(path), _) => io::load_dense(path)?,
        (None, Some(path)) => {
            let batch = io::load_batch(path, &LoadOptions::default())?;
            let est = estimator::estimate_phat(&batch, args.dim)?;
            log::info!("embedded in {} dimensions", est.d_selected);
            est.latent.x().clone()
        }
        (None, None) => unreachable!("clap requires one of --latent, --graphs"),
    };
    let n = x.nrows();
    let labels = LabelAssignment::from_names(&io::load_labels(&args.labels)?)?;
    if labels.n() != n {
        bail!(invalid(format!("{} labels for {n} vertices", labels.n())));
    }
    let s = load_matrix(&args.spatial, args.spatial_format, Some(n), false)?;
    let spatial = SpatialAdjacency::new(&s)?;
    let disconnected: Vec<&str> =
        spatial.disconnected_labels(&labels).iter().map(|&l| labels.names()[l].as_str()).collect();
    if !disconnected.is_empty() {
        log::warn!("labels not spatially connected: {}", disconnected.join(", "));
    }

    let flip = FlipOptions { contiguity: !args.no_contiguity, retry_budget: args.retry_budget };
    let mut results = Vec::new();
    let mut null_csv = String::from("k,replicate,t\n");
    let mut t_observed = f64::NAN;
    for &k in &args.flips {
        let config = PermTestConfig { k, replicates: args.replicates, seed: args.seed, flip, smoothed: args.smoothed };
        let r = permtest::perm_test(&x, &labels, &spatial, &config)?;
        for (i, t) in r.null_samples.iter().enumerate() {
            writeln!(null_csv, "{k},{i},{t}").unwrap();
        }
        t_observed = r.t_observed;
        results.push(FlipResult { k, p_value: r.p_value, count_below: r.count_below, replicates: r.replicates });
    }
    let json = serde_json::json!({
        "t_observed": t_observed,
        "contiguity": flip.contiguity,
        "smoothed": args.smoothed,
        "disconnected_labels": disconnected,
        "results": results,
    });
    let null_path = sidecar(&args.out, "null.csv");
    write(&args.out, &(serde_json::to_string_pretty(&json)? + "\n"))?;
    write(&null_path, &null_csv)?;
    Ok(Some(RunRecord::new(&args.out, args)?.seed(args.seed).output(null_path)))
}
