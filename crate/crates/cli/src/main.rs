//! Command-line front end for the tail-topology pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tailtopo::cluster::{assign_labels, fuzzy_cmeans, ConfusionMatrix, FcmOptions};
use tailtopo::ctd::{numeric_ctd_oracle, solve_ctd};
use tailtopo::ingest::{
    load_feature_panel, load_manifest, load_signal_panel, read_table, write_feature_panel, write_file, write_manifest,
    ChannelPartition, ManifestEntry,
};
use tailtopo::margins::{rank_standardize, MarginFamily, MarginSpec};
use tailtopo::pipeline::{membership_csv, read_stack, run_pipeline, run_report_export, Method, PipelineConfig};
use tailtopo::simgen::{default_cluster_deltas, simulate_panel, SimulationSpec, TruthConvention};
use tailtopo::spectral::{band_periodogram, block_length_for, BandPeriodogramPanel, BandSpec};
use tailtopo::tpdm::{estimate_tpdm, load_tpdm, write_tpdm, DEFAULT_TAIL_QUANTILE};
use tailtopo::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "tailtopo", version, about = "Canonical tail dependence and fuzzy extremal clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate two-cluster regularly-varying panels with known topology.
    Simulate(SimulateArgs),
    /// Band periodograms of a signal CSV.
    Features(FeaturesArgs),
    /// Rank-transform a feature panel to heavy-tailed margins.
    Standardize(StandardizeArgs),
    /// Estimate the tail pairwise dependence matrix.
    Tpdm(TpdmArgs),
    /// Solve the canonical tail dependence of a TPDM.
    Ctd(CtdArgs),
    /// Fuzzy C-means over a topology table.
    Cluster(ClusterArgs),
    /// Manifest in, clustering report out.
    Pipeline(PipelineArgs),
    /// Accuracy of a membership table against manifest labels.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 2000)]
    blocks: usize,
    #[arg(long, default_value_t = 0.0)]
    fuzzy_frac: f64,
    #[arg(long, default_value_t = 6)]
    p: usize,
    #[arg(long, default_value_t = 6)]
    q: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// D×D CSV (header row of labels); defaults to the built-in construction.
    #[arg(long)]
    delta1: Option<PathBuf>,
    #[arg(long)]
    delta2: Option<PathBuf>,
    #[arg(long, default_value = "tpdm")]
    truth_convention: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    sampling_rate: f64,
    /// Band name (delta..gamma) or "lo-hi" in Hz.
    #[arg(long, default_value = "gamma")]
    band: String,
    #[arg(long, default_value_t = 2.0)]
    block_seconds: f64,
    /// Samples per block; overrides --block-seconds.
    #[arg(long)]
    block_length: Option<usize>,
    #[arg(long)]
    subject: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StandardizeArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value = "frechet2")]
    margin: String,
    #[arg(long, default_value_t = 0.0)]
    rank_offset: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TpdmArgs {
    /// Standardized feature panel.
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TAIL_QUANTILE)]
    tail_quantile: f64,
    /// Comma-separated q values; writes one matrix per q next to --out.
    #[arg(long, value_delimiter = ',')]
    tail_quantile_grid: Option<Vec<f64>>,
    /// "X1,X2:Y1,Y2"; recorded for later stages, checked against the channels.
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CtdArgs {
    #[arg(long)]
    tpdm: PathBuf,
    /// Defaults to splitting the channels into halves.
    #[arg(long)]
    partition: Option<String>,
    #[arg(long, default_value_t = 0)]
    oracle_restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// Table with header subject_id,<feature>... (e.g. topologies.csv).
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 2)]
    clusters: usize,
    #[arg(long, default_value_t = 2.0)]
    fuzziness: f64,
    #[arg(long, default_value_t = 0.7)]
    cutoff: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Manifest whose label column gives the truth.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "ctd")]
    method: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    sampling_rate: Option<f64>,
    #[arg(long)]
    block_seconds: Option<f64>,
    #[arg(long)]
    margin: Option<String>,
    #[arg(long)]
    tail_quantile: Option<f64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    fuzziness_grid: Option<Vec<f64>>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    method: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    memberships: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    cutoff: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Features(a) => features(a),
        Command::Standardize(a) => standardize(a),
        Command::Tpdm(a) => tpdm(a),
        Command::Ctd(a) => ctd(a),
        Command::Cluster(a) => cluster(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn to_json(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values always serialize") + "\n"
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn read_square(path: &Path, d: usize) -> Result<nalgebra::DMatrix<f64>> {
    let t = read_table(path)?;
    if t.values.shape() != (d, d) {
        return Err(Error::Validation(format!(
            "{}: expected a {d}x{d} matrix, got {}x{}",
            path.display(),
            t.values.nrows(),
            t.values.ncols()
        )));
    }
    Ok(t.values)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut spec = SimulationSpec::new(a.n, a.p, a.q, a.fuzzy_frac, a.seed)?;
    spec.n_blocks = a.blocks;
    spec.convention = a.truth_convention.parse::<TruthConvention>()?;
    let d = a.p + a.q;
    let (d1, d2) = default_cluster_deltas(a.p, a.q)?;
    spec.delta1 = match &a.delta1 {
        Some(p) => read_square(p, d)?,
        None => d1,
    };
    spec.delta2 = match &a.delta2 {
        Some(p) => read_square(p, d)?,
        None => d2,
    };
    let sim = simulate_panel(&spec)?;
    create_dir(&a.out)?;
    let mut entries = Vec::new();
    for s in &sim.subjects {
        let file = format!("{}.csv", s.id);
        let panel = BandPeriodogramPanel::from_matrix(s.id.clone(), sim.channels.clone(), s.raw.clone());
        write_feature_panel(&a.out.join(&file), &panel)?;
        entries.push(ManifestEntry {
            subject_id: s.id.clone(),
            path: PathBuf::from(file),
            label: Some(s.label as u32),
        });
    }
    write_manifest(&a.out.join("manifest.csv"), &entries)?;
    sim.truth.write_json(&a.out.join("truth.json"))?;
    println!("wrote {} subjects to {}", sim.subjects.len(), a.out.display());
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let mut signal = load_signal_panel(&a.signals, a.sampling_rate)?;
    if let Some(id) = a.subject {
        signal.subject_id = id;
    }
    signal.detrend_mean();
    let band: BandSpec = a.band.parse()?;
    let block = match a.block_length {
        Some(n) => n,
        None => block_length_for(a.sampling_rate, a.block_seconds)?,
    };
    let panel = band_periodogram(&signal, &band, block)?;
    write_feature_panel(&a.out, &panel)
}

fn standardize(a: StandardizeArgs) -> Result<()> {
    let mut panel = load_feature_panel(&a.features)?;
    let spec = MarginSpec::new(a.margin.parse::<MarginFamily>()?).with_rank_offset(a.rank_offset)?;
    panel.values = rank_standardize(&panel.values, &spec, &panel.channels)?;
    panel.margin = Some(spec.family.as_str().to_string());
    write_feature_panel(&a.out, &panel)
}

fn grid_path(out: &Path, q: f64) -> PathBuf {
    let stem = out.file_stem().map_or("tpdm".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_q{q}.csv"))
}

fn tpdm(a: TpdmArgs) -> Result<()> {
    let panel = load_feature_panel(&a.features)?;
    let partition = a.partition.as_deref().map(ChannelPartition::parse).transpose()?;
    let estimate = |q: f64| -> Result<tailtopo::tpdm::Tpdm> {
        let t = estimate_tpdm(&panel.values, q)?.with_channels(panel.channels.clone())?;
        if t.is_rank_deficient() {
            eprintln!(
                "warning: q = {q} leaves {} exceedances for {} channels; the TPDM is rank-deficient",
                t.exceedance_count,
                t.dim()
            );
        }
        match &partition {
            Some(p) => t.with_partition(p),
            None => Ok(t),
        }
    };
    match &a.tail_quantile_grid {
        Some(grid) if !grid.is_empty() => {
            for &q in grid {
                write_tpdm(&grid_path(&a.out, q), &estimate(q)?)?;
            }
            Ok(())
        }
        Some(_) => Err(Error::InvalidArgument("empty tail-quantile grid".into())),
        None => write_tpdm(&a.out, &estimate(a.tail_quantile)?),
    }
}

fn ctd(a: CtdArgs) -> Result<()> {
    let mut t = load_tpdm(&a.tpdm)?;
    if let Some(p) = &a.partition {
        t = t.with_partition(&ChannelPartition::parse(p)?)?;
    }
    let t0 = Instant::now();
    let sol = solve_ctd(&t)?;
    let eigen_secs = t0.elapsed().as_secs_f64();
    let mut record = json!({
        "tau": sol.tau,
        "gamma_star": sol.gamma_star,
        "beta_star": sol.beta_star,
        "lambda1": sol.lambda1,
        "lambda2": sol.lambda2,
        "spectrum": sol.spectrum,
        "condition_report": sol.condition_report,
        "degenerate": sol.degenerate,
        "x_channels": t.partition.x.iter().map(|&j| t.channels[j].clone()).collect::<Vec<_>>(),
        "y_channels": t.partition.y.iter().map(|&j| t.channels[j].clone()).collect::<Vec<_>>(),
        "timings": { "eigen_seconds": eigen_secs },
    });
    if a.oracle_restarts > 0 {
        let o = numeric_ctd_oracle(&t, a.oracle_restarts, a.seed)?;
        record["oracle_tau"] = json!(o.tau);
        record["timings"]["oracle_seconds"] = json!(o.elapsed.as_secs_f64());
    }
    let text = to_json(&record);
    match &a.out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Truth labels in stack order, if every subject has one.
fn labels_for(ids: &[String], manifest: &Path) -> Result<Vec<usize>> {
    let entries = load_manifest(manifest)?;
    ids.iter()
        .map(|id| {
            entries
                .iter()
                .find(|e| &e.subject_id == id)
                .and_then(|e| e.label)
                .map(|l| l as usize)
                .ok_or_else(|| Error::Validation(format!("no label for subject {id} in {}", manifest.display())))
        })
        .collect()
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let method: Method = a.method.parse()?;
    let (stack, _) = read_stack(&a.features)?;
    let opts = FcmOptions {
        restarts: a.restarts,
        cutoff: a.cutoff,
        ..FcmOptions::new(a.clusters, a.fuzziness, a.seed)
    };
    let u = fuzzy_cmeans(&stack, &opts)?;
    create_dir(&a.out)?;
    write_file(&a.out.join("memberships.csv"), membership_csv(&stack.subjects, &u).as_bytes())?;
    let confusion = match &a.labels {
        Some(p) if a.clusters == 2 => Some(ConfusionMatrix::new(&u.hard_labels, &labels_for(&stack.subjects, p)?)?),
        _ => None,
    };
    let summary = json!({
        "accuracy": confusion.map(|c| c.accuracy()),
        "confusion": confusion.map(|c| c.m),
        "m": a.fuzziness,
        "method": method.as_str(),
        "objective": u.objective(),
        "converged": u.converged,
    });
    write_file(&a.out.join("summary.json"), to_json(&summary).as_bytes())?;
    print!("{}", to_json(&summary));
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(b) = &a.band {
        cfg.band = b.parse()?;
    }
    if let Some(m) = &a.margin {
        cfg.margin = MarginSpec::new(m.parse::<MarginFamily>()?).with_rank_offset(cfg.margin.rank_offset)?;
    }
    if let Some(p) = &a.partition {
        cfg.partition = Some(ChannelPartition::parse(p)?);
    }
    if let Some(m) = &a.method {
        cfg.method = m.parse()?;
    }
    if a.sampling_rate.is_some() {
        cfg.sampling_rate_hz = a.sampling_rate;
    }
    cfg.block_seconds = a.block_seconds.unwrap_or(cfg.block_seconds);
    cfg.tail_quantile = a.tail_quantile.unwrap_or(cfg.tail_quantile);
    cfg.clusters = a.clusters.unwrap_or(cfg.clusters);
    cfg.fuzziness_grid = a.fuzziness_grid.unwrap_or(cfg.fuzziness_grid);
    cfg.cutoff = a.cutoff.unwrap_or(cfg.cutoff);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.restarts = a.restarts.unwrap_or(cfg.restarts);
    cfg.validate()?;
    let report = run_pipeline(&cfg, &a.manifest)?;
    run_report_export(&report, &a.out)?;
    for (m, acc) in report.accuracy_by_m() {
        match acc {
            Some(acc) => println!("m = {m:?}: accuracy {acc:.3}"),
            None => println!("m = {m:?}: done"),
        }
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.memberships).map_err(|e| Error::Io {
        path: a.memberships.clone(),
        source: e,
    })?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let ucols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with("u_")).collect();
    if header.first() != Some(&"subject_id") || ucols.is_empty() {
        return Err(Error::Parse {
            path: a.memberships.clone(),
            line: 1,
            msg: "expected header subject_id,u_1..u_S,...".into(),
        });
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let parse_err = || Error::Parse {
            path: a.memberships.clone(),
            line: i as u64 + 2,
            msg: format!("bad membership row {line:?}"),
        };
        ids.push(f.first().ok_or_else(parse_err)?.to_string());
        for &c in &ucols {
            rows.push(f.get(c).and_then(|v| v.parse::<f64>().ok()).ok_or_else(parse_err)?);
        }
    }
    let u = nalgebra::DMatrix::from_row_slice(ids.len(), ucols.len(), &rows);
    let (pred, flags) = assign_labels(&u, a.cutoff)?;
    let truth = labels_for(&ids, &a.labels)?;
    let c = ConfusionMatrix::new(&pred, &truth)?;
    print!(
        "{}",
        to_json(&json!({
            "accuracy": c.accuracy(),
            "confusion": c.m,
            "n_total": c.n_total,
            "n_fuzzy": flags.iter().filter(|&&f| f).count(),
        }))
    );
    Ok(())
}
