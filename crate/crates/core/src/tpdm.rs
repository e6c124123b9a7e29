//! Tail pairwise dependence matrix (TPDM) and extremal dependence measure (EDM).
//!
//! For a standardized panel with rows Z_b ∈ R^D the estimator is
//!
//! ```text
//! Γ̂_jk = (D / c) Σ_b Z_jb Z_kb / ‖Z_b‖² · 1{‖Z_b‖ > r}
//! ```
//!
//! with r the empirical q-quantile of the row norms and c the number of rows
//! whose norm strictly exceeds it.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ingest::{read_table, write_table, BlockSplit, ChannelPartition};
use crate::linalg::{min_eigenvalue, submatrix};

pub const MIN_BLOCKS: usize = 50;
pub const DEFAULT_TAIL_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone)]
pub struct Tpdm {
    /// D × D, symmetric by construction.
    pub matrix: DMatrix<f64>,
    pub channels: Vec<String>,
    pub partition: BlockSplit,
    pub threshold_quantile: f64,
    pub exceedance_count: usize,
    pub radius: f64,
}

impl Tpdm {
    /// Wrap a known dependence matrix (e.g. a ground-truth TPDM) with a leading P/Q split.
    pub fn from_matrix(matrix: DMatrix<f64>, p: usize) -> Result<Self> {
        crate::linalg::check_square(&matrix, "TPDM")?;
        let d = matrix.nrows();
        if p == 0 || p >= d {
            return Err(Error::InvalidArgument(format!("cannot split {d} channels at {p}")));
        }
        Ok(Tpdm {
            channels: (0..d).map(|j| format!("Z{}", j + 1)).collect(),
            partition: BlockSplit::leading(p, d - p),
            matrix,
            threshold_quantile: f64::NAN,
            exceedance_count: 0,
            radius: f64::NAN,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_split(mut self, split: BlockSplit) -> Result<Self> {
        split.validate(self.dim())?;
        self.partition = split;
        Ok(self)
    }

    pub fn with_partition(self, partition: &ChannelPartition) -> Result<Self> {
        let split = partition.resolve(&self.channels)?;
        self.with_split(split)
    }

    pub fn with_channels(mut self, channels: Vec<String>) -> Result<Self> {
        if channels.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for a {}-channel TPDM",
                channels.len(),
                self.dim()
            )));
        }
        self.channels = channels;
        Ok(self)
    }

    pub fn block_xx(&self) -> DMatrix<f64> {
        submatrix(&self.matrix, &self.partition.x, &self.partition.x)
    }

    pub fn block_yy(&self) -> DMatrix<f64> {
        submatrix(&self.matrix, &self.partition.y, &self.partition.y)
    }

    pub fn block_xy(&self) -> DMatrix<f64> {
        submatrix(&self.matrix, &self.partition.x, &self.partition.y)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    /// Fewer exceedances than channels: the estimate cannot be full rank.
    pub fn is_rank_deficient(&self) -> bool {
        self.exceedance_count < self.dim()
    }
}

/// Empirical quantile F̂⁻¹(q) = inf{x : F̂(x) ≥ q}.
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

pub fn row_norms(panel: &DMatrix<f64>) -> Vec<f64> {
    panel
        .row_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

pub fn estimate_tpdm(panel: &DMatrix<f64>, q: f64) -> Result<Tpdm> {
    let (b, d) = panel.shape();
    if b < MIN_BLOCKS {
        return Err(Error::InvalidArgument(format!(
            "TPDM estimation needs at least {MIN_BLOCKS} blocks, got {b}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("panel has no channels".into()));
    }
    if !(q > 0.5 && q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail quantile must lie in (0.5, 1), got {q}"
        )));
    }
    if panel.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("panel contains non-finite values".into()));
    }
    let norms = row_norms(panel);
    let radius = empirical_quantile(&norms, q);

    let mut acc = DMatrix::<f64>::zeros(d, d);
    let mut c = 0usize;
    let mut z = vec![0.0; d];
    for (bi, &norm) in norms.iter().enumerate() {
        if norm <= radius {
            continue;
        }
        c += 1;
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = panel[(bi, j)];
        }
        let sumsq: f64 = z.iter().map(|v| v * v).sum();
        for j in 0..d {
            for k in j..d {
                acc[(j, k)] += z[j] * z[k] / sumsq;
            }
        }
    }
    if c == 0 {
        return Err(Error::Numerical(format!(
            "no row norm exceeds the radius {radius} at q = {q}"
        )));
    }
    let scale_num = d as f64;
    let cf = c as f64;
    for j in 0..d {
        for k in j..d {
            let v = scale_num * acc[(j, k)] / cf;
            acc[(j, k)] = v;
            acc[(k, j)] = v;
        }
    }
    Ok(Tpdm {
        matrix: acc,
        channels: (0..d).map(|j| format!("Z{}", j + 1)).collect(),
        partition: BlockSplit::halves(d),
        threshold_quantile: q,
        exceedance_count: c,
        radius,
    })
}

/// One estimate per tail quantile, for threshold sensitivity checks.
pub fn estimate_tpdm_grid(panel: &DMatrix<f64>, grid: &[f64]) -> Result<Vec<Tpdm>> {
    grid.iter().map(|&q| estimate_tpdm(panel, q)).collect()
}

/// Empirical EDM of a two-column panel: the off-diagonal of its 2 × 2 TPDM.
pub fn edm(pair_panel: &DMatrix<f64>, q: f64) -> Result<f64> {
    if pair_panel.ncols() != 2 {
        return Err(Error::InvalidArgument(format!(
            "EDM needs exactly two columns, got {}",
            pair_panel.ncols()
        )));
    }
    Ok(estimate_tpdm(pair_panel, q)?.matrix[(0, 1)])
}

pub fn write_tpdm(path: &Path, tpdm: &Tpdm) -> Result<()> {
    let meta = vec![
        ("q".to_string(), tpdm.threshold_quantile.to_string()),
        ("c".to_string(), tpdm.exceedance_count.to_string()),
        ("r".to_string(), crate::ingest::fmt_f64(tpdm.radius)),
    ];
    write_table(path, &meta, &tpdm.channels, &tpdm.matrix)
}

pub fn load_tpdm(path: &Path) -> Result<Tpdm> {
    let table = read_table(path)?;
    let m = table.values;
    if m.nrows() != m.ncols() || m.ncols() != table.header.len() {
        return Err(Error::Validation(format!(
            "{}: TPDM must be square with one label per column, got {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    let d = m.nrows();
    let get = |k: &str| table.meta.get(k).and_then(|s| s.parse::<f64>().ok());
    Ok(Tpdm {
        matrix: m,
        channels: table.header,
        partition: BlockSplit::halves(d),
        threshold_quantile: get("q").unwrap_or(f64::NAN),
        exceedance_count: get("c").map(|c| c as usize).unwrap_or(0),
        radius: get("r").unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::{rank_standardize, MarginFamily, MarginSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frechet_panel(b: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(b, d, |_, _| {
            let u: f64 = rng.sample(rand::distr::Open01);
            (-u.ln()).powf(-0.5)
        })
    }

    #[test]
    fn duplicated_channel_is_all_ones() {
        let mut p = frechet_panel(500, 1, 1);
        p = p.clone().insert_column(1, 0.0);
        for b in 0..500 {
            p[(b, 1)] = p[(b, 0)];
        }
        let t = estimate_tpdm(&p, 0.9).unwrap();
        assert_eq!(t.matrix, DMatrix::from_element(2, 2, 1.0));
    }

    #[test]
    fn antipodal_pair_has_edm_minus_one() {
        let x = frechet_panel(400, 1, 2);
        let spec = MarginSpec::new(MarginFamily::SymmetricPareto2);
        let z = rank_standardize(&x, &spec, &["a".into()]).unwrap();
        let pair = DMatrix::from_fn(400, 2, |b, j| if j == 0 { z[(b, 0)] } else { -z[(b, 0)] });
        assert_eq!(edm(&pair, 0.9).unwrap(), -1.0);
        let same = DMatrix::from_fn(400, 2, |b, _| z[(b, 0)]);
        assert_eq!(edm(&same, 0.9).unwrap(), 1.0);
    }

    /// E[2ψ₁ψ₂ | R > r_q] for independent Fréchet(2) pairs by a midpoint rule
    /// in probability space.
    fn independent_edm_quadrature(q: f64, n: usize) -> f64 {
        let z: Vec<f64> = (0..n)
            .map(|i| (-((i as f64 + 0.5) / n as f64).ln()).powf(-0.5))
            .collect();
        let mut r2: Vec<(f64, f64)> = Vec::with_capacity(n * n);
        for &a in &z {
            for &b in &z {
                let rr = a * a + b * b;
                r2.push((rr, 2.0 * a * b / rr));
            }
        }
        r2.sort_by(|x, y| x.0.total_cmp(&y.0));
        let cut = (q * r2.len() as f64).ceil() as usize;
        let tail = &r2[cut..];
        tail.iter().map(|t| t.1).sum::<f64>() / tail.len() as f64
    }

    #[test]
    fn independent_columns_match_quadrature() {
        // at q = 0.95 the pre-asymptotic EDM is near 0.3, not near 0
        let oracle = independent_edm_quadrature(0.95, 1500);
        let p = frechet_panel(20_000, 2, 3);
        let e = edm(&p, 0.95).unwrap();
        assert!((e - oracle).abs() < 0.03, "{e} vs {oracle}");
    }

    #[test]
    fn independent_columns_edm_vanishes_deep_in_tail() {
        let p = frechet_panel(200_000, 2, 7);
        let e = edm(&p, 0.999).unwrap();
        assert!((0.0..=0.1).contains(&e), "{e}");
        assert!(e < edm(&p, 0.95).unwrap());
    }

    #[test]
    fn trace_equals_dimension() {
        let p = frechet_panel(1000, 5, 4);
        for q in [0.6, 0.9, 0.99] {
            let t = estimate_tpdm(&p, q).unwrap();
            assert!((t.trace() - 5.0).abs() < 1e-10);
        }
    }

    #[test]
    fn strict_exceedance_count() {
        let p = frechet_panel(1000, 3, 5);
        let t = estimate_tpdm(&p, 0.95).unwrap();
        // type-1 quantile sits on the 950th order statistic, leaving 50 strictly above
        assert_eq!(t.exceedance_count, 50);
        assert_eq!(t.radius, empirical_quantile(&row_norms(&p), 0.95));
    }

    #[test]
    fn quantile_definition() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(empirical_quantile(&v, 0.6), 3.0);
        assert_eq!(empirical_quantile(&v, 0.61), 4.0);
        assert_eq!(empirical_quantile(&v, 0.99), 5.0);
    }

    #[test]
    fn all_ties_at_top_gives_error() {
        let p = DMatrix::from_element(100, 2, 1.0);
        assert!(matches!(estimate_tpdm(&p, 0.9), Err(Error::Numerical(_))));
    }

    #[test]
    fn zero_rows_never_exceed() {
        let mut p = frechet_panel(200, 3, 6);
        for b in 0..50 {
            for j in 0..3 {
                p[(b, j)] = 0.0;
            }
        }
        let t = estimate_tpdm(&p, 0.9).unwrap();
        assert!(t.matrix.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn preconditions() {
        let p = frechet_panel(40, 2, 7);
        assert!(estimate_tpdm(&p, 0.9).is_err());
        let p = frechet_panel(100, 2, 7);
        assert!(estimate_tpdm(&p, 0.5).is_err());
        assert!(estimate_tpdm(&p, 1.0).is_err());
        assert!(edm(&frechet_panel(100, 3, 7), 0.9).is_err());
    }

    #[test]
    fn blocks_extracted_from_joint_estimate() {
        let p = frechet_panel(800, 5, 8);
        let t = estimate_tpdm(&p, 0.9).unwrap().with_split(BlockSplit { x: vec![4, 0], y: vec![2, 3] }).unwrap();
        let xx = t.block_xx();
        assert_eq!(xx[(0, 1)], t.matrix[(4, 0)]);
        assert_eq!(t.block_xy()[(1, 0)], t.matrix[(0, 2)]);
        assert_eq!(t.block_yy()[(1, 1)], t.matrix[(3, 3)]);
    }

    #[test]
    fn rank_deficiency_flag() {
        let p = frechet_panel(100, 12, 9);
        let t = estimate_tpdm(&p, 0.95).unwrap();
        assert!(t.is_rank_deficient());
    }
}
