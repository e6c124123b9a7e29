//! Block-wise local DFTs, local periodograms and band-aggregated features.
//!
//! A recording of length T is cut into B = ⌊T/A⌋ disjoint consecutive blocks of
//! A samples (the trailing partial block is dropped). For block b and channel j
//! the local periodogram at bin a is |d_{j,b}(a/A)|², where
//!
//! ```text
//! d(a/A) = A^{-1/2} Σ_{t=1..A} x_t exp(-i 2π a t / A)
//! ```
//!
//! and the band value is the mean of those periodograms over the bins
//! a ∈ {1, …, ⌊A/2⌋} whose frequency SR·a/A lies in the half-open band (lo, hi].
//! The DC bin never belongs to a band and retained bins are not doubled.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::ingest::SignalPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
    Custom,
    /// Features that did not come from a band periodogram (e.g. simulated).
    None,
}

impl BandName {
    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
            BandName::Gamma => "gamma",
            BandName::Custom => "custom",
            BandName::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BandSpec {
    pub name: BandName,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandSpec {
    pub fn standard(name: BandName) -> Result<Self> {
        let (lo, hi) = match name {
            BandName::Delta => (0.0, 4.0),
            BandName::Theta => (4.0, 8.0),
            BandName::Alpha => (8.0, 12.0),
            BandName::Beta => (12.0, 30.0),
            BandName::Gamma => (30.0, 50.0),
            BandName::None => return Ok(Self::none()),
            BandName::Custom => {
                return Err(Error::InvalidArgument(
                    "custom band needs explicit limits".into(),
                ))
            }
        };
        Ok(BandSpec {
            name,
            lo_hz: lo,
            hi_hz: hi,
        })
    }

    pub fn custom(lo_hz: f64, hi_hz: f64) -> Result<Self> {
        if !(lo_hz >= 0.0 && hi_hz > lo_hz && hi_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "band limits must satisfy 0 <= lo < hi, got ({lo_hz}, {hi_hz}]"
            )));
        }
        Ok(BandSpec {
            name: BandName::Custom,
            lo_hz,
            hi_hz,
        })
    }

    pub fn none() -> Self {
        BandSpec {
            name: BandName::None,
            lo_hz: 0.0,
            hi_hz: f64::INFINITY,
        }
    }

    pub fn from_name(name: &str, lo: Option<f64>, hi: Option<f64>) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "delta" => Self::standard(BandName::Delta),
            "theta" => Self::standard(BandName::Theta),
            "alpha" => Self::standard(BandName::Alpha),
            "beta" => Self::standard(BandName::Beta),
            "gamma" => Self::standard(BandName::Gamma),
            "none" => Ok(Self::none()),
            "custom" => match (lo, hi) {
                (Some(lo), Some(hi)) => Self::custom(lo, hi),
                _ => Err(Error::InvalidArgument("custom band needs lo_hz and hi_hz".into())),
            },
            other => Err(Error::InvalidArgument(format!("unknown band {other:?}"))),
        }
    }

    fn contains(&self, hz: f64) -> bool {
        hz > self.lo_hz && hz <= self.hi_hz
    }
}

impl FromStr for BandSpec {
    type Err = Error;

    /// Accepts a standard band name or `lo-hi` in Hz for a custom band.
    fn from_str(s: &str) -> Result<Self> {
        if let Some((lo, hi)) = s.split_once('-') {
            if let (Ok(lo), Ok(hi)) = (lo.trim().parse(), hi.trim().parse()) {
                return Self::custom(lo, hi);
            }
        }
        Self::from_name(s, None, None)
    }
}

/// Band-aggregated local periodograms of one subject: blocks × channels.
#[derive(Debug, Clone)]
pub struct BandPeriodogramPanel {
    pub subject_id: String,
    pub band: BandSpec,
    pub channels: Vec<String>,
    /// B × D.
    pub values: DMatrix<f64>,
    /// Samples per block (0 when unknown).
    pub block_length: usize,
    /// 0 when unknown.
    pub sampling_rate_hz: f64,
    /// Margin family when `values` have been rank-standardized.
    pub margin: Option<String>,
}

impl BandPeriodogramPanel {
    /// Wrap a raw blocks × channels matrix, e.g. simulated features.
    pub fn from_matrix(subject_id: impl Into<String>, channels: Vec<String>, values: DMatrix<f64>) -> Self {
        BandPeriodogramPanel {
            subject_id: subject_id.into(),
            band: BandSpec::none(),
            channels,
            values,
            block_length: 0,
            sampling_rate_hz: 0.0,
            margin: None,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.values.ncols()
    }
}

/// Local DFT of one block with the 1/√A normalization and t = 1..A phase origin.
pub fn local_dft(block: &[f64]) -> Result<Vec<Complex64>> {
    let a = block.len();
    if a < 2 {
        return Err(Error::InvalidArgument(format!(
            "local DFT needs at least 2 samples, got {a}"
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(a);
    let mut buf: Vec<Complex64> = block.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft.process(&mut buf);
    let norm = 1.0 / (a as f64).sqrt();
    // FFT sums over t = 0..A-1; shifting to t = 1..A multiplies bin k by exp(-i2πk/A).
    for (k, z) in buf.iter_mut().enumerate() {
        let phase = -2.0 * PI * k as f64 / a as f64;
        *z *= Complex64::from_polar(norm, phase);
    }
    Ok(buf)
}

/// Local periodogram |d(a/A)|² for every bin a = 0..A-1.
pub fn local_periodogram(block: &[f64]) -> Result<Vec<f64>> {
    Ok(local_dft(block)?.iter().map(|z| z.norm_sqr()).collect())
}

/// Bins a ∈ {1, …, ⌊A/2⌋} with SR·a/A in the band.
pub fn band_bins(sampling_rate_hz: f64, block_length: usize, band: &BandSpec) -> Vec<usize> {
    (1..=block_length / 2)
        .filter(|&a| band.contains(sampling_rate_hz * a as f64 / block_length as f64))
        .collect()
}

/// Default block length: `block_seconds` × SR, rounded to the nearest sample.
pub fn block_length_for(sampling_rate_hz: f64, block_seconds: f64) -> Result<usize> {
    let a = (sampling_rate_hz * block_seconds).round();
    if !(a >= 2.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "block of {block_seconds} s at {sampling_rate_hz} Hz has fewer than 2 samples"
        )));
    }
    Ok(a as usize)
}

pub fn band_periodogram(
    panel: &SignalPanel,
    band: &BandSpec,
    block_length: usize,
) -> Result<BandPeriodogramPanel> {
    let a = block_length;
    if a < 2 {
        return Err(Error::InvalidArgument(format!(
            "block length must be at least 2, got {a}"
        )));
    }
    let sr = panel.sampling_rate_hz;
    if band.name == BandName::None {
        return Err(Error::InvalidArgument("cannot aggregate over band 'none'".into()));
    }
    if band.hi_hz > sr / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "band {} upper limit {} Hz exceeds Nyquist {} Hz",
            band.name.as_str(),
            band.hi_hz,
            sr / 2.0
        )));
    }
    let bins = band_bins(sr, a, band);
    if bins.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "band {} ({}, {}] Hz holds no Fourier bin for A = {a} at {sr} Hz",
            band.name.as_str(),
            band.lo_hz,
            band.hi_hz
        )));
    }
    let n_blocks = panel.n_samples() / a;
    if n_blocks == 0 {
        return Err(Error::InvalidArgument(format!(
            "recording of {} samples is shorter than one block of {a}",
            panel.n_samples()
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(a);
    let d = panel.n_channels();
    let inv_count = 1.0 / bins.len() as f64;

    let per_channel: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let row = panel.samples.row(j);
            let mut buf = vec![Complex64::new(0.0, 0.0); a];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            (0..n_blocks)
                .map(|b| {
                    for (t, z) in buf.iter_mut().enumerate() {
                        *z = Complex64::new(row[b * a + t], 0.0);
                    }
                    fft.process_with_scratch(&mut buf, &mut scratch);
                    // |d|² is phase-free, so only the 1/A normalization applies here.
                    let sum: f64 = bins.iter().map(|&k| buf[k].norm_sqr()).sum();
                    sum * inv_count / a as f64
                })
                .collect()
        })
        .collect();

    let values = DMatrix::from_fn(n_blocks, d, |b, j| per_channel[j][b]);
    Ok(BandPeriodogramPanel {
        subject_id: panel.subject_id.clone(),
        band: *band,
        channels: panel.channels.clone(),
        values,
        block_length: a,
        sampling_rate_hz: sr,
        margin: None,
    })
}
