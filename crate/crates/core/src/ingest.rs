//! Loading and writing of signal panels, feature panels and subject manifests.
//!
//! All panels are CSV with one header row of channel labels. Feature files may
//! carry leading `# key=value` metadata lines; the first is conventionally
//! `# band=<name>`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{BandPeriodogramPanel, BandSpec};

/// A multichannel recording, channels × samples.
#[derive(Debug, Clone)]
pub struct SignalPanel {
    pub subject_id: String,
    pub channels: Vec<String>,
    /// D × T amplitudes.
    pub samples: DMatrix<f64>,
    pub sampling_rate_hz: f64,
}

impl SignalPanel {
    pub fn new(
        subject_id: impl Into<String>,
        channels: Vec<String>,
        samples: DMatrix<f64>,
        sampling_rate_hz: f64,
    ) -> Result<Self> {
        if !(sampling_rate_hz > 0.0 && sampling_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        if channels.len() != samples.nrows() {
            return Err(Error::Validation(format!(
                "{} channel labels for {} rows of samples",
                channels.len(),
                samples.nrows()
            )));
        }
        check_unique(&channels)?;
        for j in 0..samples.nrows() {
            for t in 0..samples.ncols() {
                if !samples[(j, t)].is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite value in channel {} at row {}",
                        channels[j],
                        t + 1
                    )));
                }
            }
        }
        Ok(SignalPanel {
            subject_id: subject_id.into(),
            channels,
            samples,
            sampling_rate_hz,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    /// Subtract each channel's mean over the whole recording.
    pub fn detrend_mean(&mut self) {
        for mut row in self.samples.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
    }
}

fn check_unique(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Validation(format!("duplicate channel label {l:?}")));
        }
    }
    Ok(())
}

/// Two disjoint channel groups (X, Y) named by label.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChannelPartition {
    pub x_channels: Vec<String>,
    pub y_channels: Vec<String>,
}

/// A partition resolved to column indices of a concrete panel.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BlockSplit {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

impl BlockSplit {
    /// First `p` columns form X, the following `q` form Y.
    pub fn leading(p: usize, q: usize) -> Self {
        BlockSplit {
            x: (0..p).collect(),
            y: (p..p + q).collect(),
        }
    }

    /// X = first ⌊D/2⌋ columns, Y = the rest.
    pub fn halves(d: usize) -> Self {
        Self::leading(d / 2, d - d / 2)
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }

    pub fn q(&self) -> usize {
        self.y.len()
    }

    pub fn swapped(&self) -> Self {
        BlockSplit {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.x.is_empty() || self.y.is_empty() {
            return Err(Error::InvalidArgument("both channel groups must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        for &i in self.x.iter().chain(self.y.iter()) {
            if i >= d {
                return Err(Error::InvalidArgument(format!(
                    "channel index {i} out of range for {d} channels"
                )));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidArgument(format!(
                    "channel index {i} appears twice in the partition"
                )));
            }
        }
        Ok(())
    }
}

impl ChannelPartition {
    pub fn new(x_channels: Vec<String>, y_channels: Vec<String>) -> Result<Self> {
        if x_channels.is_empty() || y_channels.is_empty() {
            return Err(Error::InvalidArgument(
                "partition needs at least one channel on each side".into(),
            ));
        }
        let all: Vec<String> = x_channels.iter().chain(y_channels.iter()).cloned().collect();
        check_unique(&all).map_err(|_| {
            Error::InvalidArgument("partition groups must be disjoint and without repeats".into())
        })?;
        Ok(ChannelPartition {
            x_channels,
            y_channels,
        })
    }

    /// Parse `"F3,F7:P3,P4"`; the colon separates X from Y.
    pub fn parse(spec: &str) -> Result<Self> {
        let (x, y) = spec.split_once(':').ok_or_else(|| {
            Error::InvalidArgument(format!("partition {spec:?} lacks the ':' separator"))
        })?;
        let list = |s: &str| -> Vec<String> {
            s.split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect()
        };
        Self::new(list(x), list(y))
    }

    pub fn p(&self) -> usize {
        self.x_channels.len()
    }

    pub fn q(&self) -> usize {
        self.y_channels.len()
    }

    /// Map labels to column indices of `channels`, keeping the partition's order.
    pub fn resolve(&self, channels: &[String]) -> Result<BlockSplit> {
        let find = |label: &String| -> Result<usize> {
            channels.iter().position(|c| c == label).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "partition channel {label:?} not found among {channels:?}"
                ))
            })
        };
        let x = self.x_channels.iter().map(find).collect::<Result<Vec<_>>>()?;
        let y = self.y_channels.iter().map(find).collect::<Result<Vec<_>>>()?;
        Ok(BlockSplit { x, y })
    }
}

impl std::fmt::Display for ChannelPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.x_channels.join(","), self.y_channels.join(","))
    }
}

/// Metadata lines plus a numeric table.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    /// Rows × columns.
    pub values: DMatrix<f64>,
}

/// Read a CSV with optional leading `# key=value` lines and a label header.
pub fn read_table(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, path)
}

pub(crate) fn parse_table(text: &str, path: &Path) -> Result<CsvTable> {
    let mut meta = BTreeMap::new();
    let mut offset = 0u64;
    let mut rest = text;
    while let Some(line) = rest.lines().next() {
        let trimmed = line.trim();
        if !trimmed.starts_with('#') {
            break;
        }
        if let Some((k, v)) = trimmed.trim_start_matches('#').trim().split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
        offset += 1;
        rest = rest.get(line.len()..).unwrap_or("");
        rest = rest.strip_prefix("\r\n").or_else(|| rest.strip_prefix('\n')).unwrap_or(rest);
    }
    if rest.trim().is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: offset + 1,
            msg: "no header row".into(),
        });
    }
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(rest.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(offset + 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let width = header.len();
    let mut data = Vec::new();
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0) + offset;
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0) + offset;
        if rec.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(line, format!("column {:?}: cannot parse {field:?} as a number", header[j]))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(offset + 2, "no data rows".into()));
    }
    Ok(CsvTable {
        meta,
        header,
        values: DMatrix::from_row_slice(rows, width, &data),
    })
}

/// Shortest decimal with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_table(path: &Path, meta: &[(String, String)], header: &[String], values: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for row in values.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "subject".to_string())
}

/// Load a T-row × D-column signal CSV into a D × T panel.
pub fn load_signal_panel(path: &Path, sampling_rate_hz: f64) -> Result<SignalPanel> {
    let table = read_table(path)?;
    check_unique(&table.header)?;
    let v = &table.values;
    for t in 0..v.nrows() {
        for j in 0..v.ncols() {
            if !v[(t, j)].is_finite() {
                return Err(Error::Validation(format!(
                    "{}: non-finite value in channel {} at row {}",
                    path.display(),
                    table.header[j],
                    t + 1
                )));
            }
        }
    }
    SignalPanel::new(stem(path), table.header, v.transpose(), sampling_rate_hz)
}

/// Load a B-row × D-column feature CSV.
///
/// Unstandardized panels (no `margin` metadata) must be strictly positive;
/// standardized ones only need finite entries.
pub fn load_feature_panel(path: &Path) -> Result<BandPeriodogramPanel> {
    let table = read_table(path)?;
    check_unique(&table.header)?;
    let standardized = table.meta.contains_key("margin");
    let v = &table.values;
    for t in 0..v.nrows() {
        for j in 0..v.ncols() {
            let x = v[(t, j)];
            if !x.is_finite() || (!standardized && x <= 0.0) {
                return Err(Error::Validation(format!(
                    "{}: entry {x} in channel {} at row {} must be finite and strictly positive",
                    path.display(),
                    table.header[j],
                    t + 1
                )));
            }
        }
    }
    let band = match table.meta.get("band") {
        Some(name) => {
            let lo = table.meta.get("lo_hz").and_then(|s| s.parse().ok());
            let hi = table.meta.get("hi_hz").and_then(|s| s.parse().ok());
            BandSpec::from_name(name, lo, hi)?
        }
        None => BandSpec::none(),
    };
    let meta_num = |k: &str| table.meta.get(k).and_then(|s| s.parse::<f64>().ok());
    Ok(BandPeriodogramPanel {
        subject_id: table.meta.get("subject").cloned().unwrap_or_else(|| stem(path)),
        band,
        channels: table.header,
        values: table.values,
        block_length: meta_num("block_length").map(|x| x as usize).unwrap_or(0),
        sampling_rate_hz: meta_num("sampling_rate_hz").unwrap_or(0.0),
        margin: table.meta.get("margin").cloned(),
    })
}

pub fn write_feature_panel(path: &Path, panel: &BandPeriodogramPanel) -> Result<()> {
    let mut meta = vec![("band".to_string(), panel.band.name.as_str().to_string())];
    if panel.band.name == crate::spectral::BandName::Custom {
        meta.push(("lo_hz".into(), panel.band.lo_hz.to_string()));
        meta.push(("hi_hz".into(), panel.band.hi_hz.to_string()));
    }
    meta.push(("subject".into(), panel.subject_id.clone()));
    if panel.block_length > 0 {
        meta.push(("block_length".into(), panel.block_length.to_string()));
    }
    if panel.sampling_rate_hz > 0.0 {
        meta.push(("sampling_rate_hz".into(), panel.sampling_rate_hz.to_string()));
    }
    if let Some(m) = &panel.margin {
        meta.push(("margin".into(), m.clone()));
    }
    write_table(path, &meta, &panel.channels, &panel.values)
}

/// One row of a subject manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub path: PathBuf,
    pub label: Option<u32>,
}

/// Read `subject_id,path,label`; relative paths resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
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
    let col = |name: &str| header.iter().position(|h| h == name);
    let (id_col, path_col) = match (col("subject_id"), col("path")) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "manifest header must contain subject_id and path".into(),
            })
        }
    };
    let label_col = col("label");
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let label = match label_col.map(field).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => match s.parse::<u32>() {
                Ok(l) if l >= 1 => Some(l),
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        msg: format!("label {s:?} must be an integer >= 1"),
                    })
                }
            },
        };
        let p = PathBuf::from(field(path_col));
        out.push(ManifestEntry {
            subject_id: field(id_col),
            path: if p.is_relative() { base.join(p) } else { p },
            label,
        });
    }
    let ids: Vec<String> = out.iter().map(|e| e.subject_id.clone()).collect();
    check_unique(&ids).map_err(|_| Error::Validation("duplicate subject_id in manifest".into()))?;
    Ok(out)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::from("subject_id,path,label\n");
    for e in entries {
        let label = e.label.map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", e.subject_id, e.path.display(), label));
    }
    write_file(path, out.as_bytes())
}
