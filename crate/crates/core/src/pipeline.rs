//! End-to-end runs: per-subject features → margins → TPDM → CTD, then FCM
//! over a fuzziness grid, with a report that exports the files the plotting
//! scripts read.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    cca_canonical_vectors, fuzzy_cmeans, ConfusionMatrix, FcmOptions, FeatureStack, MembershipMatrix, DEFAULT_CUTOFF,
    DEFAULT_M_GRID,
};
use crate::ctd::solve_ctd;
use crate::error::{ConditionReport, Error, Result};
use crate::ingest::{load_feature_panel, load_manifest, load_signal_panel, write_file, BlockSplit, ChannelPartition};
use crate::margins::{rank_standardize, MarginFamily, MarginSpec};
use crate::spectral::{band_periodogram, block_length_for, BandName, BandPeriodogramPanel, BandSpec};
use crate::tpdm::{estimate_tpdm, DEFAULT_TAIL_QUANTILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Tail-topology from the canonical tail dependence.
    Ctd,
    /// Canonical directions of classical CCA on the unstandardized features.
    Cca,
    /// FCM directly on each subject's flattened standardized panel.
    Raw,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ctd => "ctd",
            Method::Cca => "cca",
            Method::Raw => "raw",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ctd" => Ok(Method::Ctd),
            "cca" => Ok(Method::Cca),
            "raw" => Ok(Method::Raw),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?} (expected ctd, cca or raw)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub band: BandSpec,
    pub block_seconds: f64,
    /// Set when the manifest points at raw signals rather than feature panels.
    pub sampling_rate_hz: Option<f64>,
    pub margin: MarginSpec,
    pub tail_quantile: f64,
    pub clusters: usize,
    pub fuzziness_grid: Vec<f64>,
    pub cutoff: f64,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// `None` splits the channels into halves.
    pub partition: Option<ChannelPartition>,
    pub method: Method,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            band: BandSpec::standard(BandName::Gamma).expect("gamma is a standard band"),
            block_seconds: 2.0,
            sampling_rate_hz: None,
            margin: MarginSpec::default(),
            tail_quantile: DEFAULT_TAIL_QUANTILE,
            clusters: 2,
            fuzziness_grid: DEFAULT_M_GRID.to_vec(),
            cutoff: DEFAULT_CUTOFF,
            seed: 0,
            restarts: 10,
            max_iter: 300,
            tol: 1e-6,
            partition: None,
            method: Method::Ctd,
        }
    }
}

/// On-disk TOML form; every key is optional and overrides the default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub band: Option<String>,
    pub block_seconds: Option<f64>,
    pub sampling_rate_hz: Option<f64>,
    pub margin: Option<String>,
    pub rank_offset: Option<f64>,
    pub tail_quantile: Option<f64>,
    pub clusters: Option<usize>,
    pub fuzziness_grid: Option<Vec<f64>>,
    pub cutoff: Option<f64>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub partition: Option<String>,
    pub method: Option<String>,
}

impl ConfigFile {
    pub fn apply(self, cfg: &mut PipelineConfig) -> Result<()> {
        if let Some(b) = self.band {
            cfg.band = b.parse()?;
        }
        if let Some(m) = self.margin {
            cfg.margin = MarginSpec::new(m.parse::<MarginFamily>()?).with_rank_offset(cfg.margin.rank_offset)?;
        }
        if let Some(c) = self.rank_offset {
            cfg.margin = cfg.margin.with_rank_offset(c)?;
        }
        if let Some(p) = self.partition {
            cfg.partition = Some(ChannelPartition::parse(&p)?);
        }
        if let Some(m) = self.method {
            cfg.method = m.parse()?;
        }
        macro_rules! copy {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        copy!(block_seconds, tail_quantile, clusters, fuzziness_grid, cutoff, seed, restarts, max_iter, tol);
        if self.sampling_rate_hz.is_some() {
            cfg.sampling_rate_hz = self.sampling_rate_hz;
        }
        Ok(())
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        let mut cfg = PipelineConfig::default();
        file.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fuzziness_grid.is_empty() {
            return Err(Error::Validation("fuzziness grid must not be empty".into()));
        }
        if let Some(m) = self.fuzziness_grid.iter().find(|m| !(**m > 1.0 && **m < 3.0)) {
            return Err(Error::Validation(format!("fuzziness {m} outside (1, 3)")));
        }
        if !(self.tail_quantile > 0.5 && self.tail_quantile < 1.0) {
            return Err(Error::Validation(format!("tail quantile {} outside (0.5, 1)", self.tail_quantile)));
        }
        if self.clusters < 2 {
            return Err(Error::Validation("need at least 2 clusters".into()));
        }
        if !(self.cutoff > 1.0 / self.clusters as f64 && self.cutoff <= 1.0) {
            return Err(Error::Validation(format!("cutoff {} outside (1/S, 1]", self.cutoff)));
        }
        if !(self.block_seconds > 0.0 && self.block_seconds.is_finite()) {
            return Err(Error::Validation("block_seconds must be positive".into()));
        }
        if let Some(sr) = self.sampling_rate_hz {
            if !(sr > 0.0 && sr.is_finite()) {
                return Err(Error::Validation("sampling_rate_hz must be positive".into()));
            }
        }
        if self.restarts == 0 || self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::Validation("restarts and max_iter must be >= 1 and tol > 0".into()));
        }
        Ok(())
    }

    fn fcm_options(&self, m: f64) -> FcmOptions {
        FcmOptions {
            clusters: self.clusters,
            fuzziness: m,
            seed: self.seed,
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.restarts,
            cutoff: self.cutoff,
        }
    }

    pub fn record(&self) -> serde_json::Value {
        serde_json::json!({
            "band": self.band.name.as_str(),
            "band_lo_hz": finite_or_null(self.band.lo_hz),
            "band_hi_hz": finite_or_null(self.band.hi_hz),
            "block_seconds": self.block_seconds,
            "sampling_rate_hz": self.sampling_rate_hz,
            "margin": self.margin.family.as_str(),
            "rank_offset": self.margin.rank_offset,
            "tail_quantile": self.tail_quantile,
            "clusters": self.clusters,
            "fuzziness_grid": self.fuzziness_grid,
            "cutoff": self.cutoff,
            "seed": self.seed,
            "restarts": self.restarts,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "partition": self.partition.as_ref().map_or("halves".to_string(), |p| p.to_string()),
            "method": self.method.as_str(),
        })
    }
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}

#[derive(Debug, Clone)]
pub struct SubjectInput {
    pub id: String,
    pub label: Option<usize>,
    pub panel: BandPeriodogramPanel,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubjectResult {
    pub subject_id: String,
    pub label: Option<usize>,
    pub tau: Option<f64>,
    /// |λ₁|, |λ₂| (or |Λ₀| for CCA); empty for the raw baseline.
    pub topology: Vec<f64>,
    pub condition_report: Option<ConditionReport>,
    pub degenerate: bool,
    pub exceedance_count: Option<usize>,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub subject_id: String,
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct FitAtM {
    pub m: f64,
    pub membership: Option<MembershipMatrix>,
    pub confusion: Option<ConfusionMatrix>,
    pub error: Option<String>,
}

impl FitAtM {
    pub fn accuracy(&self) -> Option<f64> {
        self.confusion.map(|c| c.accuracy())
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: PipelineConfig,
    /// Column labels of the topology vectors.
    pub topology_channels: Vec<String>,
    pub subjects: Vec<SubjectResult>,
    pub fits: Vec<FitAtM>,
    pub timings: Vec<Timing>,
}

impl RunReport {
    pub fn accuracy_by_m(&self) -> Vec<(f64, Option<f64>)> {
        self.fits.iter().map(|f| (f.m, f.accuracy())).collect()
    }

    /// Everything but timings, in a fixed key order.
    pub fn summary_json(&self) -> serde_json::Value {
        let fits: Vec<serde_json::Value> = self
            .fits
            .iter()
            .map(|f| {
                serde_json::json!({
                    "m": f.m,
                    "accuracy": f.accuracy(),
                    "confusion": f.confusion.map(|c| c.m),
                    "objective": f.membership.as_ref().map(|u| u.objective()),
                    "iterations": f.membership.as_ref().map(|u| u.objective_trace.len() - 1),
                    "converged": f.membership.as_ref().map(|u| u.converged),
                    "n_fuzzy": f.membership.as_ref().map(|u| u.fuzzy_flags.iter().filter(|&&x| x).count()),
                    "error": f.error,
                })
            })
            .collect();
        serde_json::json!({
            "config": self.config.record(),
            "method": self.config.method.as_str(),
            "cca_topology": if self.config.method == Method::Cca { Some("covariance square-root images of the canonical directions") } else { None },
            "n_subjects": self.subjects.len(),
            "topology_channels": self.topology_channels,
            "fits": fits,
            "subjects": self.subjects,
        })
    }
}

fn timed<T>(timings: &mut Vec<Timing>, id: &str, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let out = f().map_err(|e| e.at_stage(id, stage))?;
    timings.push(Timing {
        subject_id: id.to_string(),
        stage,
        seconds: t0.elapsed().as_secs_f64(),
    });
    Ok(out)
}

fn split_for(config: &PipelineConfig, channels: &[String]) -> Result<BlockSplit> {
    match &config.partition {
        Some(p) => p.resolve(channels),
        None => Ok(BlockSplit::halves(channels.len())),
    }
}

struct SubjectOutcome {
    result: SubjectResult,
    features: Vec<f64>,
    topology_channels: Vec<String>,
    timings: Vec<Timing>,
}

fn process_subject(config: &PipelineConfig, input: &SubjectInput) -> Result<SubjectOutcome> {
    let id = input.id.as_str();
    let mut timings = Vec::new();
    let panel = &input.panel;
    let split = split_for(config, &panel.channels).map_err(|e| e.at_stage(id, "partition"))?;
    let topology_channels: Vec<String> = split
        .x
        .iter()
        .chain(split.y.iter())
        .map(|&j| panel.channels[j].clone())
        .collect();
    let standardized = || -> Result<DMatrix<f64>> {
        if panel.margin.is_some() {
            Ok(panel.values.clone())
        } else {
            rank_standardize(&panel.values, &config.margin, &panel.channels)
        }
    };
    let mut result = SubjectResult {
        subject_id: id.to_string(),
        label: input.label,
        tau: None,
        topology: Vec::new(),
        condition_report: None,
        degenerate: false,
        exceedance_count: None,
        rank_deficient: false,
    };
    let features = match config.method {
        Method::Ctd => {
            let z = timed(&mut timings, id, "standardize", standardized)?;
            let tpdm = timed(&mut timings, id, "tpdm", || {
                estimate_tpdm(&z, config.tail_quantile)?
                    .with_channels(panel.channels.clone())?
                    .with_split(split.clone())
            })?;
            let sol = timed(&mut timings, id, "ctd", || solve_ctd(&tpdm))?;
            result.tau = Some(sol.tau);
            result.condition_report = Some(sol.condition_report.clone());
            result.degenerate = sol.degenerate;
            result.exceedance_count = Some(tpdm.exceedance_count);
            result.rank_deficient = tpdm.is_rank_deficient();
            result.topology = sol.abs_topology();
            result.topology.clone()
        }
        Method::Cca => {
            let cca = timed(&mut timings, id, "cca", || cca_canonical_vectors(&panel.values, &split))?;
            result.tau = Some(cca.rho);
            result.condition_report = Some(cca.solution.condition_report.clone());
            result.degenerate = cca.solution.degenerate;
            result.topology = cca.lambda0.iter().map(|v| v.abs()).collect();
            result.topology.clone()
        }
        Method::Raw => {
            let z = timed(&mut timings, id, "standardize", standardized)?;
            z.transpose().iter().copied().collect()
        }
    };
    Ok(SubjectOutcome {
        result,
        features,
        topology_channels,
        timings,
    })
}

/// Load every manifest subject: signals when a sampling rate is configured,
/// feature panels otherwise.
pub fn load_subjects(config: &PipelineConfig, manifest: &Path) -> Result<Vec<SubjectInput>> {
    let entries = load_manifest(manifest)?;
    entries
        .par_iter()
        .map(|e| {
            let panel = match config.sampling_rate_hz {
                Some(sr) => {
                    let mut sig = load_signal_panel(&e.path, sr).map_err(|err| err.at_stage(&e.subject_id, "load"))?;
                    sig.subject_id = e.subject_id.clone();
                    sig.detrend_mean();
                    let a = block_length_for(sr, config.block_seconds)?;
                    band_periodogram(&sig, &config.band, a).map_err(|err| err.at_stage(&e.subject_id, "features"))?
                }
                None => load_feature_panel(&e.path).map_err(|err| err.at_stage(&e.subject_id, "load"))?,
            };
            Ok(SubjectInput {
                id: e.subject_id.clone(),
                label: e.label.map(|l| l as usize),
                panel,
            })
        })
        .collect()
}

pub fn run_pipeline(config: &PipelineConfig, manifest: &Path) -> Result<RunReport> {
    config.validate()?;
    let subjects = load_subjects(config, manifest)?;
    run_pipeline_on(config, &subjects)
}

pub fn run_pipeline_on(config: &PipelineConfig, subjects: &[SubjectInput]) -> Result<RunReport> {
    config.validate()?;
    if subjects.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "the pipeline needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    let outcomes = subjects
        .par_iter()
        .map(|s| process_subject(config, s))
        .collect::<Result<Vec<_>>>()?;
    let topology_channels = outcomes[0].topology_channels.clone();
    let width = outcomes[0].features.len();
    for o in &outcomes {
        if o.features.len() != width || o.topology_channels != topology_channels {
            return Err(Error::Validation(format!(
                "subject {} has channels {:?}, expected {:?}",
                o.result.subject_id, o.topology_channels, topology_channels
            )));
        }
    }
    let ids: Vec<String> = outcomes.iter().map(|o| o.result.subject_id.clone()).collect();
    let mut data = Vec::with_capacity(outcomes.len() * width);
    for o in &outcomes {
        data.extend_from_slice(&o.features);
    }
    let stack = FeatureStack::new(ids, DMatrix::from_row_slice(outcomes.len(), width, &data))?;
    let truth: Option<Vec<usize>> = subjects
        .iter()
        .map(|s| s.label.filter(|l| (1..=2).contains(l)))
        .collect::<Option<Vec<_>>>()
        .filter(|_| config.clusters == 2);
    let fits: Vec<FitAtM> = config
        .fuzziness_grid
        .par_iter()
        .map(|&m| match fuzzy_cmeans(&stack, &config.fcm_options(m)) {
            Ok(u) => {
                let confusion = truth.as_ref().and_then(|t| ConfusionMatrix::new(&u.hard_labels, t).ok());
                FitAtM {
                    m,
                    membership: Some(u),
                    confusion,
                    error: None,
                }
            }
            Err(e) => FitAtM {
                m,
                membership: None,
                confusion: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut timings = Vec::new();
    let mut results = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        timings.extend(o.timings);
        results.push(o.result);
    }
    Ok(RunReport {
        config: config.clone(),
        topology_channels,
        subjects: results,
        fits,
        timings,
    })
}

/// `memberships_m1.1.csv` etc.
pub fn membership_file_name(m: f64) -> String {
    format!("memberships_m{m:?}.csv")
}

pub fn membership_csv(subjects: &[String], u: &MembershipMatrix) -> String {
    let s = u.u.ncols();
    let mut out = String::from("subject_id");
    for k in 1..=s {
        let _ = write!(out, ",u_{k}");
    }
    out.push_str(",hard_label,fuzzy_flag\n");
    for (n, id) in subjects.iter().enumerate() {
        out.push_str(id);
        for k in 0..s {
            let _ = write!(out, ",{}", u.u[(n, k)]);
        }
        let _ = writeln!(out, ",{},{}", u.hard_labels[n], u.fuzzy_flags[n]);
    }
    out
}

pub fn stack_csv(stack: &FeatureStack, channels: &[String]) -> String {
    let mut out = String::from("subject_id");
    for c in channels {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (n, id) in stack.subjects.iter().enumerate() {
        out.push_str(id);
        for v in stack.features.row(n).iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Read a `subject_id,<channel>...` table back into a stack and its labels.
pub fn read_stack(path: &Path) -> Result<(FeatureStack, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("subject_id") || header.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "expected header subject_id,<feature>...".into(),
        });
    }
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        ids.push(rec[0].to_string());
        for field in rec.iter().skip(1) {
            data.push(field.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("non-numeric value {field:?}"),
            })?);
        }
    }
    let n = ids.len();
    let stack = FeatureStack::new(ids, DMatrix::from_row_slice(n, header.len() - 1, &data))?;
    Ok((stack, header[1..].to_vec()))
}

pub fn run_report_export(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ids: Vec<String> = report.subjects.iter().map(|s| s.subject_id.clone()).collect();
    for fit in &report.fits {
        if let Some(u) = &fit.membership {
            write_file(&dir.join(membership_file_name(fit.m)), membership_csv(&ids, u).as_bytes())?;
        }
    }
    if report.config.method != Method::Raw {
        let d = report.topology_channels.len();
        let rows: Vec<f64> = report.subjects.iter().flat_map(|s| s.topology.iter().copied()).collect();
        let stack = FeatureStack::new(ids.clone(), DMatrix::from_row_slice(ids.len(), d, &rows))?;
        write_file(&dir.join("topologies.csv"), stack_csv(&stack, &report.topology_channels).as_bytes())?;
    }
    let summary = serde_json::to_string_pretty(&report.summary_json()).map_err(|e| Error::Validation(e.to_string()))?;
    write_file(&dir.join("summary.json"), (summary + "\n").as_bytes())?;
    let mut t = String::from("subject_id,stage,seconds\n");
    for r in &report.timings {
        let _ = writeln!(t, "{},{},{}", r.subject_id, r.stage, r.seconds);
    }
    write_file(&dir.join("timings.csv"), t.as_bytes())
}

/// Standardized in-memory subjects, e.g. from the simulator.
pub fn subjects_from_matrices(items: Vec<(String, Option<usize>, DMatrix<f64>)>, channels: &[String], margin: MarginFamily) -> Vec<SubjectInput> {
    items
        .into_iter()
        .map(|(id, label, values)| {
            let mut panel = BandPeriodogramPanel::from_matrix(id.clone(), channels.to_vec(), values);
            panel.margin = Some(margin.as_str().to_string());
            SubjectInput { id, label, panel }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_defaults() {
        let cfg = PipelineConfig::from_toml_str(
            "band = \"theta\"\ntail_quantile = 0.9\nfuzziness_grid = [1.5, 2.0]\nmethod = \"cca\"\npartition = \"a,b:c,d\"\n",
            Path::new("c.toml"),
        )
        .unwrap();
        assert_eq!(cfg.band.name, BandName::Theta);
        assert_eq!(cfg.tail_quantile, 0.9);
        assert_eq!(cfg.fuzziness_grid, vec![1.5, 2.0]);
        assert_eq!(cfg.method, Method::Cca);
        assert_eq!(cfg.partition.unwrap().p(), 2);
        assert_eq!(cfg.clusters, 2);
    }

    #[test]
    fn empty_grid_rejected() {
        let err = PipelineConfig::from_toml_str("fuzziness_grid = []\n", Path::new("c.toml")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_key_is_parse_error() {
        let err = PipelineConfig::from_toml_str("seed = 1\nbogus = 2\n", Path::new("c.toml")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_subject_rejected() {
        let chans: Vec<String> = vec!["a".into(), "b".into(), "c".into(), "d".into()];
        let subj = subjects_from_matrices(vec![("s".into(), Some(1), DMatrix::from_element(60, 4, 1.0))], &chans, MarginFamily::Frechet2);
        let err = run_pipeline_on(&PipelineConfig::default(), &subj).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn membership_file_names() {
        assert_eq!(membership_file_name(1.1), "memberships_m1.1.csv");
        assert_eq!(membership_file_name(2.0), "memberships_m2.0.csv");
    }
}
