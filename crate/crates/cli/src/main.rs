use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cepclust::clustering::{
    compute_matrix, cut, hierarchical_cluster, DistanceMatrix, Linkage, Measure, MeasureConfig,
};
use cepclust::distances::DtwConfig;
use cepclust::evaluation::{adjusted_rand_index, run_experiment, ExperimentConfig, ExperimentReport};
use cepclust::io as cio;
use cepclust::lti::{paper_circuits, simulate, Discretization, StateSpace, DEFAULT_CIRCUIT_DT};
use cepclust::signal::{build_dataset, GeneratorConfig, InputCounts, LabeledDataset};
use cepclust::spectral::{power_cepstrum, WelchConfig, Window};
use cepclust::Execution;
use clap::{Args, Parser, Subcommand, ValueEnum};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::Serialize;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CHECK: u8 = 3;

/// Cluster input/output time series by the linear dynamics that generated them.
#[derive(Debug, Parser)]
#[command(name = "cepclust", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Master seed for generation and experiments [default: 1; benchmark presets keep their own seed]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sampling period of the series and the circuit discretisation step [default: 100, or the manifest value when one is read]
    #[arg(long, global = true)]
    sample_period: Option<f64>,
    /// Welch segment length, a power of two [default: min(128, largest power of two <= n/4)]
    #[arg(long, global = true)]
    welch_segment: Option<usize>,
    /// Fraction of overlap between Welch segments
    #[arg(long, global = true, default_value_t = 0.5)]
    welch_overlap: f64,
    /// Welch window
    #[arg(long, global = true, value_enum, default_value_t = WindowArg::Hann)]
    window: WindowArg,
    /// Sakoe-Chiba band radius as a fraction of the series length
    #[arg(long, global = true, default_value_t = 0.1)]
    dtw_band: f64,
    /// Linkage for hierarchical clustering
    #[arg(long, global = true, value_enum, default_value_t = LinkageArg::Average)]
    linkage: LinkageArg,
    /// Worker threads [default: one per core]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file, or directory for generate and benchmark [default: stdout, or the current directory]
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Format of matrix and partition output
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Gzip written files (a `.gz` suffix is added to generated file names)
    #[arg(long, global = true)]
    gzip: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WindowArg {
    Hann,
    Hamming,
    Rectangular,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LinkageArg {
    Average,
    Complete,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DiscretizationArg {
    Bilinear,
    Zoh,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
    WhiteNoise,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled I/O dataset (series CSV plus manifest JSON)
    Generate(GenerateArgs),
    /// Distance matrix of a dataset, or one distance with --pair
    Distance(DistanceArgs),
    /// Cut the average-linkage dendrogram of a distance matrix
    Cluster(ClusterArgs),
    /// Run the clustering experiment over lengths and repetitions
    Benchmark(BenchmarkArgs),
    /// Drive a discrete-time system with an input series
    Simulate(SimulateArgs),
    /// Write the output and input cepstra of every pair
    Cepstra(CepstraArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// `paper-circuits` or a JSON file holding an array of state-space models
    #[arg(long, default_value = "paper-circuits")]
    systems: String,
    /// Inputs per system as lti,multisine,noise
    #[arg(long, default_value = "100,50,50", value_parser = parse_counts)]
    counts: InputCounts,
    /// Samples per series
    #[arg(long, default_value_t = 1024)]
    length: usize,
    /// Order of the random all-pole filters behind the LTI inputs
    #[arg(long, default_value_t = 15)]
    lti_order: usize,
    /// Continuous-to-discrete method for the built-in circuits
    #[arg(long, value_enum, default_value_t = DiscretizationArg::Bilinear)]
    discretization: DiscretizationArg,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Series CSV written by `generate`
    #[arg(long)]
    series: PathBuf,
    /// Manifest JSON written by `generate` (labels and models)
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DistanceArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, default_value = "extended-cepstral")]
    measure: Measure,
    /// Positions of two pairs in the series file; prints one scalar
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pair: Option<Vec<usize>>,
    /// Frequency grid for the H-infinity norm
    #[arg(long, default_value_t = cepclust::lti::DEFAULT_HINF_GRID)]
    hinf_grid: usize,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// Distance matrix (CSV rows or JSON)
    #[arg(long)]
    matrix: PathBuf,
    /// Number of clusters
    #[arg(short, long = "clusters", default_value_t = 2)]
    k: usize,
    /// Manifest with ground-truth labels; the ARI is printed when given
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Experiment configuration JSON, replaces the preset
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated measures [default: those of the preset]
    #[arg(long, value_delimiter = ',')]
    measures: Option<Vec<Measure>>,
    /// Comma-separated series lengths [default: those of the preset]
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
    /// Repetitions per length [default: that of the preset]
    #[arg(long)]
    repetitions: Option<usize>,
    /// Exit with status 3 unless the acceptance thresholds hold
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Input series CSV (`k,value`)
    #[arg(long)]
    input: PathBuf,
    /// `s1`, `s2` or a state-space JSON file
    #[arg(long, default_value = "s1")]
    system: String,
    #[arg(long, value_enum, default_value_t = DiscretizationArg::Bilinear)]
    discretization: DiscretizationArg,
}

#[derive(Debug, Args)]
struct CepstraArgs {
    #[command(flatten)]
    data: DatasetArgs,
}

/// Errors the user can fix by changing flags.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_counts(s: &str) -> std::result::Result<InputCounts, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("counts must be three integers lti,multisine,noise: {e}"))?;
    match parts[..] {
        [lti, multisine, noise] => Ok(InputCounts::new(lti, multisine, noise)),
        _ => Err(format!("expected three counts, got {}", parts.len())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(err) = cause.downcast_ref::<cepclust::Error>() {
            return match err {
                cepclust::Error::Config(_) | cepclust::Error::Parameter(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn run(cli: Cli) -> Result<ExitCode> {
    let pool = match cli.global.threads {
        Some(0) => return Err(usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?,
        None => rayon::ThreadPoolBuilder::new().build()?,
    };
    let g = &cli.global;
    pool.install(|| match &cli.command {
        Command::Generate(a) => cmd_generate(g, a),
        Command::Distance(a) => cmd_distance(g, a),
        Command::Cluster(a) => cmd_cluster(g, a),
        Command::Benchmark(a) => cmd_benchmark(g, a),
        Command::Simulate(a) => cmd_simulate(g, a),
        Command::Cepstra(a) => cmd_cepstra(g, a),
    })
}

impl Global {
    fn window(&self) -> Window {
        match self.window {
            WindowArg::Hann => Window::Hann,
            WindowArg::Hamming => Window::Hamming,
            WindowArg::Rectangular => Window::Rectangular,
        }
    }

    fn linkage(&self) -> Linkage {
        match self.linkage {
            LinkageArg::Average => Linkage::Average,
            LinkageArg::Complete => Linkage::Complete,
            LinkageArg::Single => Linkage::Single,
        }
    }

    fn dtw(&self) -> Result<DtwConfig> {
        let cfg = DtwConfig {
            band_radius_fraction: self.dtw_band,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn welch_tweaked(&self) -> bool {
        self.welch_overlap != 0.5 || !matches!(self.window, WindowArg::Hann)
    }

    /// Welch settings for series of at least `shortest` samples.
    fn welch(&self, shortest: usize) -> Result<WelchConfig> {
        let mut cfg = match self.welch_segment {
            Some(l) => WelchConfig::with_segment(l),
            None => WelchConfig::for_length(shortest),
        };
        cfg.overlap_fraction = self.welch_overlap;
        cfg.window = self.window();
        cfg.validate()?;
        cfg.check_series_length(shortest)?;
        Ok(cfg)
    }

    fn sample_period(&self) -> f64 {
        self.sample_period.unwrap_or(DEFAULT_CIRCUIT_DT)
    }

    fn gzip_name(&self, name: &str) -> String {
        if self.gzip {
            format!("{name}.gz")
        } else {
            name.to_string()
        }
    }
}

fn discretization(d: DiscretizationArg) -> Discretization {
    match d {
        DiscretizationArg::Bilinear => Discretization::Bilinear,
        DiscretizationArg::Zoh => Discretization::ZeroOrderHold,
    }
}

/// Reads a file, transparently gunzipping it when it starts with the gzip magic.
fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut raw))
        .with_context(|| format!("cannot read {}", path.display()))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .with_context(|| format!("cannot decompress {}", path.display()))?;
        return Ok(out);
    }
    Ok(raw)
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?).with_context(|| format!("{} is not UTF-8", path.display()))
}

/// Writes `bytes` to `path` (gzipped on request or for a `.gz` suffix), or to stdout.
fn write_output(path: Option<&Path>, gzip: bool, bytes: &[u8]) -> Result<()> {
    let Some(path) = path else {
        io::stdout().write_all(bytes)?;
        return Ok(());
    };
    let ctx = || format!("cannot write {}", path.display());
    let file = BufWriter::new(File::create(path).with_context(ctx)?);
    let gzip = gzip || path.extension().is_some_and(|e| e == "gz");
    if gzip {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(bytes).with_context(ctx)?;
        enc.finish().with_context(ctx)?.flush().with_context(ctx)?;
    } else {
        let mut file = file;
        file.write_all(bytes).with_context(ctx)?;
        file.flush().with_context(ctx)?;
    }
    Ok(())
}

fn output_dir(g: &Global) -> Result<PathBuf> {
    let dir = g.output.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn load_systems(spec: &str, dt: f64, method: Discretization) -> Result<Vec<StateSpace>> {
    match spec {
        "paper-circuits" => Ok(paper_circuits(dt, method)?),
        path => {
            let text = read_text(Path::new(path))?;
            serde_json::from_str(&text).with_context(|| format!("cannot parse models in {path}"))
        }
    }
}

fn cmd_generate(g: &Global, a: &GenerateArgs) -> Result<ExitCode> {
    if let Some(l) = g.welch_segment {
        if a.length < l {
            return Err(usage(format!(
                "--length {} is shorter than --welch-segment {l}",
                a.length
            )));
        }
    }
    if a.counts.total() == 0 {
        return Err(usage("--counts are all zero"));
    }
    let seed = g.seed.unwrap_or(1);
    let dt = g.sample_period();
    let systems = load_systems(&a.systems, dt, discretization(a.discretization))?;
    let generator = GeneratorConfig {
        lti_order: a.lti_order,
        ..GeneratorConfig::new(a.counts)
    };
    let dataset = build_dataset(a.length, &generator, &systems, seed)?;

    let dir = output_dir(g)?;
    let mut series = Vec::new();
    cio::write_series_csv(dataset.pairs(), &mut series)?;
    let series_path = dir.join(g.gzip_name("series.csv"));
    write_output(Some(&series_path), g.gzip, &series)?;
    let manifest = cio::Manifest::for_dataset(&dataset, dt, seed, serde_json::to_value(generator)?);
    let manifest_path = dir.join("manifest.json");
    write_output(Some(&manifest_path), false, manifest.to_json()?.as_bytes())?;

    println!(
        "generated {} pairs ({} systems x {} inputs: {} lti, {} multisine, {} noise), length {}, seed {}",
        dataset.len(),
        systems.len(),
        a.counts.total(),
        a.counts.lti,
        a.counts.multisine,
        a.counts.noise,
        a.length,
        seed
    );
    println!("series: {}", series_path.display());
    println!("manifest: {}", manifest_path.display());
    Ok(ExitCode::SUCCESS)
}

fn load_manifest(path: &Path) -> Result<cio::Manifest> {
    cio::Manifest::from_json(&read_text(path)?)
        .with_context(|| format!("cannot parse manifest {}", path.display()))
}

fn load_dataset(g: &Global, d: &DatasetArgs) -> Result<LabeledDataset> {
    let manifest = d.manifest.as_deref().map(load_manifest).transpose()?;
    let dt = g
        .sample_period
        .or(manifest.as_ref().map(|m| m.sample_period))
        .unwrap_or(DEFAULT_CIRCUIT_DT);
    let bytes = read_file(&d.series)?;
    let pairs = cio::read_series_csv(bytes.as_slice(), dt)
        .with_context(|| format!("cannot parse series {}", d.series.display()))?;
    match manifest {
        Some(m) => Ok(m.attach(pairs)?),
        None => {
            let labels = vec![0; pairs.len()];
            Ok(LabeledDataset::new(pairs, labels)?)
        }
    }
}

fn shortest(ds: &LabeledDataset) -> usize {
    ds.pairs().iter().map(|p| p.len()).min().unwrap_or(0)
}

#[derive(Serialize)]
struct MatrixJson<'a> {
    n: usize,
    rows: Vec<&'a [f64]>,
}

fn matrix_bytes(m: &DistanceMatrix, format: Format) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        Format::Csv => cio::write_matrix_csv(m, &mut out)?,
        Format::Json => {
            let rows = (0..m.len()).map(|i| m.row(i)).collect();
            serde_json::to_writer_pretty(&mut out, &MatrixJson { n: m.len(), rows })?;
            out.push(b'\n');
        }
    }
    Ok(out)
}

fn read_matrix(path: &Path) -> Result<DistanceMatrix> {
    let bytes = read_file(path)?;
    let ctx = || format!("invalid matrix file {}", path.display());
    if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        #[derive(serde::Deserialize)]
        struct Owned {
            rows: Vec<Vec<f64>>,
        }
        let parsed: Owned = serde_json::from_slice(&bytes).with_context(ctx)?;
        return DistanceMatrix::from_rows(parsed.rows).with_context(ctx);
    }
    cio::read_matrix_csv(bytes.as_slice()).with_context(ctx)
}

fn cmd_distance(g: &Global, a: &DistanceArgs) -> Result<ExitCode> {
    let ds = load_dataset(g, &a.data)?;
    if ds.is_empty() {
        bail!("{} holds no pairs", a.data.series.display());
    }
    let welch = match a.measure {
        Measure::Cepstral | Measure::ExtendedCepstral => g.welch(shortest(&ds))?,
        _ => WelchConfig::for_length(shortest(&ds)),
    };
    let cfg = MeasureConfig {
        welch: Some(welch),
        dtw: g.dtw()?,
        hinf_grid: a.hinf_grid,
    };
    let exec = Execution::Parallel;

    if let Some(pair) = &a.pair {
        let (i, j) = (pair[0], pair[1]);
        if i >= ds.len() || j >= ds.len() {
            return Err(usage(format!(
                "--pair {i} {j} is out of range for {} pairs",
                ds.len()
            )));
        }
        let sub = LabeledDataset::with_systems(
            vec![ds.pairs()[i].clone(), ds.pairs()[j].clone()],
            vec![ds.labels()[i], ds.labels()[j]],
            ds.systems().to_vec(),
        )?;
        let m = compute_matrix(a.measure, &sub, &cfg, exec)
            .map_err(|e| remap_pair(e, [i, j]))?;
        let line = format!("{}\n", m.get(0, 1));
        write_output(g.output.as_deref(), g.gzip, line.as_bytes())?;
        return Ok(ExitCode::SUCCESS);
    }

    let m = compute_matrix(a.measure, &ds, &cfg, exec)?;
    write_output(g.output.as_deref(), g.gzip, &matrix_bytes(&m, g.format)?)?;
    Ok(ExitCode::SUCCESS)
}

/// Translates indices of a two-pair sub-dataset back to the full dataset.
fn remap_pair(e: cepclust::Error, ids: [usize; 2]) -> cepclust::Error {
    match e {
        cepclust::Error::Pair { i, j, source } => cepclust::Error::Pair {
            i: ids[i],
            j: ids[j],
            source,
        },
        cepclust::Error::Prepare { index, source } => cepclust::Error::Prepare {
            index: ids[index],
            source,
        },
        other => other,
    }
}

#[derive(Serialize)]
struct PartitionJson<'a> {
    k: usize,
    pair_ids: &'a [usize],
    labels: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    ari: Option<f64>,
}

fn cmd_cluster(g: &Global, a: &ClusterArgs) -> Result<ExitCode> {
    let m = read_matrix(&a.matrix)?;
    let dendrogram = hierarchical_cluster(&m, g.linkage());
    let partition = cut(&dendrogram, a.k)?;
    let manifest = a.manifest.as_deref().map(load_manifest).transpose()?;
    let (ids, ari) = match &manifest {
        Some(man) => {
            if man.pairs.len() != m.len() {
                return Err(usage(format!(
                    "manifest lists {} pairs but the matrix is {}x{}",
                    man.pairs.len(),
                    m.len(),
                    m.len()
                )));
            }
            let truth: Vec<usize> = man.pairs.iter().map(|e| e.label).collect();
            let ids: Vec<usize> = man.pairs.iter().map(|e| e.pair_id).collect();
            (ids, Some(adjusted_rand_index(partition.labels(), &truth)?))
        }
        None => ((0..m.len()).collect(), None),
    };
    let mut out = Vec::new();
    match g.format {
        Format::Csv => cio::write_partition_csv(&ids, &partition, &mut out)?,
        Format::Json => {
            let doc = PartitionJson {
                k: partition.k(),
                pair_ids: &ids,
                labels: partition.labels(),
                ari,
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            out.push(b'\n');
        }
    }
    match &g.output {
        Some(path) => {
            write_output(Some(path), g.gzip, &out)?;
            if let Some(ari) = ari {
                println!("ARI: {ari}");
            }
        }
        None => {
            io::stdout().write_all(&out)?;
            if let Some(ari) = ari {
                eprintln!("ARI: {ari}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment_config(g: &Global, a: &BenchmarkArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => serde_json::from_str(&read_text(path)?)
            .with_context(|| format!("cannot parse experiment config {}", path.display()))?,
        None => match a.preset {
            Preset::Desk => ExperimentConfig::desk(),
            Preset::Paper => ExperimentConfig::paper(),
            Preset::WhiteNoise => ExperimentConfig::white_noise(),
        },
    };
    if let Some(m) = &a.measures {
        cfg.measures = m.clone();
    }
    if let Some(l) = &a.lengths {
        cfg.series_lengths = l.clone();
    }
    if let Some(r) = a.repetitions {
        cfg.repetitions = r;
    }
    if let Some(s) = g.seed {
        cfg.master_seed = s;
    }
    if let Some(dt) = g.sample_period {
        cfg.sample_period = dt;
    }
    match g.welch_segment {
        Some(l) => {
            cfg.welch = Some(WelchConfig {
                overlap_fraction: g.welch_overlap,
                window: g.window(),
                ..WelchConfig::with_segment(l)
            })
        }
        None if g.welch_tweaked() => {
            return Err(usage(
                "--welch-overlap and --window need --welch-segment for benchmark",
            ))
        }
        None => {}
    }
    cfg.dtw = g.dtw()?;
    cfg.linkage = g.linkage();
    cfg.validate()?;
    Ok(cfg)
}

/// One acceptance line per measure; `None` when the measure has no threshold.
fn check_cell_rules(report: &ExperimentReport) -> Vec<(String, bool)> {
    let counts = report.config.generator.counts;
    let white_only = counts.lti == 0 && counts.multisine == 0;
    let mut lines = Vec::new();
    for &measure in &report.config.measures {
        let cells: Vec<_> = report.cells.iter().filter(|c| c.measure == measure).collect();
        let failures: usize = cells.iter().map(|c| c.failures).sum();
        let means: Vec<f64> = cells.iter().filter_map(|c| c.ari_mean).collect();
        let stds: Vec<f64> = cells.iter().filter_map(|c| c.ari_std).collect();
        let complete = failures == 0 && means.len() == cells.len();
        let all = |f: &dyn Fn(f64) -> bool| complete && means.iter().all(|&m| f(m));
        let (rule, ok) = match measure {
            Measure::ExtendedCepstral => (
                "ARI mean == 1 and std == 0",
                all(&|m| m == 1.0) && stds.iter().all(|&s| s == 0.0),
            ),
            Measure::Cepstral if white_only => ("ARI mean == 1", all(&|m| m == 1.0)),
            Measure::Cepstral => ("|ARI mean| <= 0.05", all(&|m| m.abs() <= 0.05)),
            Measure::Euclidean | Measure::KeoghLb if white_only => {
                ("|ARI mean| <= 0.1", all(&|m| m.abs() <= 0.1))
            }
            Measure::Euclidean | Measure::KeoghLb => {
                ("|ARI mean| <= 0.05", all(&|m| m.abs() <= 0.05))
            }
            Measure::H2 => ("ARI mean == 1", all(&|m| m == 1.0)),
            Measure::Hinf => ("ARI mean >= 0.9", all(&|m| m >= 0.9)),
            Measure::Dtw => ("no failed runs", complete),
        };
        let detail = means
            .iter()
            .map(|m| format!("{m:.4}"))
            .collect::<Vec<_>>()
            .join(" ");
        lines.push((format!("{measure}: {rule} [{detail}] failures {failures}"), ok));
    }
    lines
}

fn cmd_benchmark(g: &Global, a: &BenchmarkArgs) -> Result<ExitCode> {
    let cfg = experiment_config(g, a)?;
    let report = run_experiment(&cfg, Execution::Parallel)?;

    let dir = output_dir(g)?;
    let json_path = dir.join(g.gzip_name("report.json"));
    let csv_path = dir.join(g.gzip_name("report.csv"));
    write_output(Some(&json_path), g.gzip, report.to_json()?.as_bytes())?;
    write_output(Some(&csv_path), g.gzip, report.to_long_csv()?.as_bytes())?;

    println!("{:<20} {:>7} {:>22} {:>12} {:>5}", "measure", "length", "ARI mean +- std", "seconds", "fail");
    for c in &report.cells {
        let ari = match (c.ari_mean, c.ari_std) {
            (Some(m), Some(s)) => format!("{m:.4} +- {s:.4}"),
            _ => "-".into(),
        };
        let secs = c.seconds_mean.map_or("-".into(), |s| format!("{s:.4}"));
        println!("{:<20} {:>7} {:>22} {:>12} {:>5}", c.measure.name(), c.length, ari, secs, c.failures);
        for run in c.runs.iter().filter(|r| r.error.is_some()) {
            eprintln!(
                "  {} length {} repetition {}: {}",
                c.measure,
                c.length,
                run.repetition,
                run.error.as_deref().unwrap_or_default()
            );
        }
    }
    println!("report: {}", json_path.display());
    println!("table: {}", csv_path.display());

    if a.check {
        let lines = check_cell_rules(&report);
        let mut passed = true;
        for (text, ok) in &lines {
            println!("[{}] {text}", if *ok { "PASS" } else { "FAIL" });
            passed &= ok;
        }
        if !passed {
            return Ok(ExitCode::from(EXIT_CHECK));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(g: &Global, a: &SimulateArgs) -> Result<ExitCode> {
    let dt = g.sample_period();
    let system = match a.system.as_str() {
        "s1" | "s2" => {
            let circuits = paper_circuits(dt, discretization(a.discretization))?;
            circuits[usize::from(a.system == "s2")].clone()
        }
        path => serde_json::from_str::<StateSpace>(&read_text(Path::new(path))?)
            .with_context(|| format!("cannot parse model {path}"))?,
    };
    let bytes = read_file(&a.input)?;
    let u = cio::read_single_series_csv(bytes.as_slice(), system.sample_period())
        .with_context(|| format!("cannot parse input {}", a.input.display()))?;
    let y = simulate(&system, &u)?;
    let mut out = Vec::new();
    cio::write_single_series_csv(&y, &mut out)?;
    write_output(g.output.as_deref(), g.gzip, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_cepstra(g: &Global, a: &CepstraArgs) -> Result<ExitCode> {
    let ds = load_dataset(g, &a.data)?;
    let welch = g.welch(shortest(&ds))?;
    let rows = ds
        .pairs()
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            let wrap = |e| cepclust::Error::Prepare {
                index: idx,
                source: Box::new(e),
            };
            let cy = power_cepstrum(p.output(), &welch).map_err(wrap)?;
            let cu = power_cepstrum(p.input(), &welch).map_err(wrap)?;
            Ok((p.pair_id, cy, cu))
        })
        .collect::<cepclust::Result<Vec<_>>>()?;
    let mut out = Vec::new();
    cio::write_cepstra_csv(&rows, &mut out)?;
    write_output(g.output.as_deref(), g.gzip, &out)?;
    Ok(ExitCode::SUCCESS)
}
