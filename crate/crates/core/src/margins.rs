//! Rank transforms onto common regularly-varying margins of index 2.

use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginFamily {
    /// Unit Fréchet with shape 2: F(z) = exp(-z^{-2}), z > 0.
    Frechet2,
    /// Unit symmetric Pareto with shape 2: P(|Z| > z) = z^{-2}, z ≥ 1.
    SymmetricPareto2,
}

impl MarginFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            MarginFamily::Frechet2 => "frechet2",
            MarginFamily::SymmetricPareto2 => "symmetric_pareto2",
        }
    }

    pub fn quantile(self, u: f64) -> f64 {
        match self {
            MarginFamily::Frechet2 => (-u.ln()).powf(-0.5),
            // left-continuous at the median
            MarginFamily::SymmetricPareto2 if u <= 0.5 => -(2.0 * u).powf(-0.5),
            MarginFamily::SymmetricPareto2 => (2.0 * (1.0 - u)).powf(-0.5),
        }
    }
}

impl FromStr for MarginFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "frechet2" | "frechet" => Ok(MarginFamily::Frechet2),
            "symmetric_pareto2" | "symmetric_pareto" => Ok(MarginFamily::SymmetricPareto2),
            other => Err(Error::InvalidArgument(format!("unknown margin family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarginSpec {
    pub family: MarginFamily,
    /// Plotting-position constant in [0, 1): u = (r - c) / (B - 2c + 1).
    pub rank_offset: f64,
}

impl MarginSpec {
    pub fn new(family: MarginFamily) -> Self {
        MarginSpec {
            family,
            rank_offset: 0.0,
        }
    }

    pub fn with_rank_offset(mut self, c: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::InvalidArgument(format!(
                "rank offset must lie in [0, 1), got {c}"
            )));
        }
        self.rank_offset = c;
        Ok(self)
    }
}

impl Default for MarginSpec {
    fn default() -> Self {
        Self::new(MarginFamily::Frechet2)
    }
}

/// Ranks 1..n of `x`, ties receiving their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j share ranks i+1..=j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Standardize one column; `label` names it in errors.
pub fn standardize_column(x: &[f64], spec: &MarginSpec, label: &str) -> Result<Vec<f64>> {
    let n = x.len();
    if n < MIN_ROWS {
        return Err(Error::InvalidArgument(format!(
            "channel {label}: rank standardization needs at least {MIN_ROWS} values, got {n}"
        )));
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("channel {label}: non-finite value {bad}")));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::InvalidArgument(format!(
            "channel {label} is constant; its rank transform is undefined"
        )));
    }
    let c = spec.rank_offset;
    let denom = n as f64 - 2.0 * c + 1.0;
    Ok(average_ranks(x)
        .into_iter()
        .map(|r| spec.family.quantile((r - c) / denom))
        .collect())
}

/// Column-wise rank standardization of a B × D matrix.
pub fn rank_standardize(values: &DMatrix<f64>, spec: &MarginSpec, channels: &[String]) -> Result<DMatrix<f64>> {
    let (b, d) = values.shape();
    let mut out = DMatrix::zeros(b, d);
    for j in 0..d {
        let label = channels.get(j).cloned().unwrap_or_else(|| format!("#{}", j + 1));
        let col: Vec<f64> = values.column(j).iter().copied().collect();
        let z = standardize_column(&col, spec, &label)?;
        out.set_column(j, &nalgebra::DVector::from_vec(z));
    }
    Ok(out)
}
