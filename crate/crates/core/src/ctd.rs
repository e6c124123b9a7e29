//! Canonical tail dependence (CTD).
//!
//! Given a dependence matrix partitioned into blocks (XX, XY; YX, YY), the CTD
//! maximizes (γᵀ Γ_XY β)² subject to γᵀ Γ_XX γ = βᵀ Γ_YY β = 1. With
//! K = Γ_XX^{-1/2} Γ_XY Γ_YY^{-1/2} the maximum is the top eigenvalue of the
//! symmetric matrix M = K Kᵀ, which shares its nonzero spectrum with
//! G₁ = Γ_XX⁻¹ Γ_XY Γ_YY⁻¹ Γ_YX and G₂ = Γ_YY⁻¹ Γ_YX Γ_XX⁻¹ Γ_XY.
//!
//! The tail-topology is the pair of unit vectors λ₁ (top eigenvector of K Kᵀ)
//! and λ₂ (top eigenvector of Kᵀ K); the canonical tail-variates are
//! γ* = Γ_XX^{-1/2} λ₁ and β* = Γ_YY^{-1/2} λ₂.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ConditionReport, Error, Result};
use crate::ingest::BlockSplit;
use crate::linalg::{self, fix_sign, ridge_block, sym_eigen_desc, sym_inv_sqrt, RidgedBlock};
use crate::seed::derive_seed;
use crate::tpdm::Tpdm;

/// Eigenvalues closer than this to the top one are treated as tied.
pub const DEGENERACY_GAP: f64 = 1e-8;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CtdSolution {
    pub tau: f64,
    pub gamma_star: Vec<f64>,
    pub beta_star: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Descending eigenvalues of K Kᵀ, first min(P, Q) kept.
    pub spectrum: Vec<f64>,
    pub condition_report: ConditionReport,
    /// Top spectral gap below [`DEGENERACY_GAP`].
    pub degenerate: bool,
}

impl CtdSolution {
    pub fn p(&self) -> usize {
        self.lambda1.len()
    }

    pub fn q(&self) -> usize {
        self.lambda2.len()
    }

    /// (|λ₁|, |λ₂|) concatenated.
    pub fn abs_topology(&self) -> Vec<f64> {
        self.lambda1.iter().chain(self.lambda2.iter()).map(|v| v.abs()).collect()
    }
}

/// Blocks of a dependence matrix after the ridge policy, ready for the eigen
/// solver or the numerical oracle.
#[derive(Debug, Clone)]
pub struct PreparedBlocks {
    pub xx: DMatrix<f64>,
    pub yy: DMatrix<f64>,
    pub xy: DMatrix<f64>,
    pub report: ConditionReport,
}

pub fn prepare_blocks(xx: &DMatrix<f64>, yy: &DMatrix<f64>, xy: &DMatrix<f64>) -> Result<PreparedBlocks> {
    linalg::check_square(xx, "XX block")?;
    linalg::check_square(yy, "YY block")?;
    if xy.nrows() != xx.nrows() || xy.ncols() != yy.nrows() {
        return Err(Error::InvalidArgument(format!(
            "cross block is {}x{}, expected {}x{}",
            xy.nrows(),
            xy.ncols(),
            xx.nrows(),
            yy.nrows()
        )));
    }
    if xx.iter().chain(yy.iter()).chain(xy.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("dependence blocks contain non-finite entries".into()));
    }
    let rx: RidgedBlock = ridge_block(xx);
    let ry: RidgedBlock = ridge_block(yy);
    let report = ConditionReport {
        min_eig_xx: rx.min_eig,
        min_eig_yy: ry.min_eig,
        ridge_xx: rx.ridge,
        ridge_yy: ry.ridge,
    };
    if !rx.ok || !ry.ok {
        return Err(Error::Singular(report));
    }
    Ok(PreparedBlocks {
        xx: rx.matrix,
        yy: ry.matrix,
        xy: xy.clone(),
        report,
    })
}

/// Top unit eigenvector, sign-fixed; ties within [`DEGENERACY_GAP`] broken by
/// the lexicographically largest candidate.
fn top_eigvec(m: &DMatrix<f64>) -> (DVector<f64>, Vec<f64>, bool) {
    let eig = sym_eigen_desc(m);
    let top = eig.values[0];
    let tied: Vec<usize> = (0..eig.values.len())
        .filter(|&i| top - eig.values[i] < DEGENERACY_GAP)
        .collect();
    let mut best: Option<DVector<f64>> = None;
    for i in &tied {
        let mut v = eig.vectors.column(*i).into_owned();
        fix_sign(&mut v);
        best = match best {
            None => Some(v),
            Some(b) => {
                let ord = v
                    .iter()
                    .zip(b.iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal);
                if ord.is_gt() {
                    Some(v)
                } else {
                    Some(b)
                }
            }
        };
    }
    (best.expect("non-empty spectrum"), eig.values.iter().copied().collect(), tied.len() > 1)
}

/// Canonical pair of already-prepared blocks; shared by CTD and classical CCA.
pub fn solve_blocks(blocks: &PreparedBlocks) -> CtdSolution {
    let wx = sym_inv_sqrt(&blocks.xx);
    let wy = sym_inv_sqrt(&blocks.yy);
    let k = &wx * &blocks.xy * &wy;
    let mut m = &k * k.transpose();
    linalg::symmetrize(&mut m);
    let (lambda1, values, degenerate) = top_eigvec(&m);
    let tau = values[0].max(0.0);

    let kt_l = k.transpose() * &lambda1;
    let norm = kt_l.norm();
    let lambda2 = if norm > 1e-12 * k.norm().max(1e-300) && norm > 0.0 {
        let mut v = kt_l / norm;
        fix_sign(&mut v);
        v
    } else {
        let mut n = k.transpose() * &k;
        linalg::symmetrize(&mut n);
        top_eigvec(&n).0
    };
    let gamma = &wx * &lambda1;
    let beta = &wy * &lambda2;
    let keep = blocks.xx.nrows().min(blocks.yy.nrows());
    CtdSolution {
        tau,
        gamma_star: gamma.iter().copied().collect(),
        beta_star: beta.iter().copied().collect(),
        lambda1: lambda1.iter().copied().collect(),
        lambda2: lambda2.iter().copied().collect(),
        spectrum: values.into_iter().take(keep).collect(),
        condition_report: blocks.report.clone(),
        degenerate,
    }
}

/// Relative asymmetry tolerated before a TPDM is rejected.
const SYMMETRY_TOL: f64 = 1e-10;

pub fn solve_ctd(tpdm: &Tpdm) -> Result<CtdSolution> {
    let split = &tpdm.partition;
    split.validate(tpdm.dim())?;
    if split.p() < 2 || split.q() < 2 {
        return Err(Error::InvalidArgument(format!(
            "CTD needs at least two channels per group, got P = {}, Q = {}",
            split.p(),
            split.q()
        )));
    }
    let scale = tpdm.matrix.amax().max(f64::MIN_POSITIVE);
    if linalg::asymmetry(&tpdm.matrix) > SYMMETRY_TOL * scale {
        return Err(Error::InvalidArgument("TPDM is not symmetric".into()));
    }
    let blocks = prepare_blocks(&tpdm.block_xx(), &tpdm.block_yy(), &tpdm.block_xy())?;
    Ok(solve_blocks(&blocks))
}

/// Per-block projections (γ*ᵀ X_b, β*ᵀ Y_b).
pub fn extremal_scores(panel: &DMatrix<f64>, solution: &CtdSolution, split: &BlockSplit) -> Result<DMatrix<f64>> {
    projected_scores(panel, &solution.gamma_star, &solution.beta_star, split)
}

pub fn projected_scores(panel: &DMatrix<f64>, gamma: &[f64], beta: &[f64], split: &BlockSplit) -> Result<DMatrix<f64>> {
    split.validate(panel.ncols())?;
    if gamma.len() != split.p() || beta.len() != split.q() {
        return Err(Error::InvalidArgument(format!(
            "weights of length ({}, {}) do not match partition ({}, {})",
            gamma.len(),
            beta.len(),
            split.p(),
            split.q()
        )));
    }
    Ok(DMatrix::from_fn(panel.nrows(), 2, |b, c| {
        if c == 0 {
            split.x.iter().zip(gamma).map(|(&j, w)| w * panel[(b, j)]).sum()
        } else {
            split.y.iter().zip(beta).map(|(&j, w)| w * panel[(b, j)]).sum()
        }
    }))
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub tau: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub elapsed: Duration,
}

const ORACLE_MAX_ITER: usize = 5000;

fn ellipsoid_normalize(v: &mut DVector<f64>, a: &DMatrix<f64>) -> bool {
    let q = v.dot(&(a * &*v));
    if !(q > 0.0 && q.is_finite()) {
        return false;
    }
    *v /= q.sqrt();
    true
}

fn random_start(rng: &mut ChaCha8Rng, a: &DMatrix<f64>) -> DVector<f64> {
    loop {
        let mut v = DVector::from_fn(a.nrows(), |_, _| rng.random_range(-1.0..1.0));
        if ellipsoid_normalize(&mut v, a) {
            return v;
        }
    }
}

/// Component of `grad` tangent to the constraint ellipsoid with outward normal `normal`.
fn tangent(grad: &DVector<f64>, normal: &DVector<f64>) -> DVector<f64> {
    let nn = normal.norm_squared();
    if nn == 0.0 {
        return grad.clone();
    }
    grad - normal * (grad.dot(normal) / nn)
}

/// Projected gradient ascent on (γᵀ Γ_XY β)² from one start.
fn ascend(blocks: &PreparedBlocks, mut g: DVector<f64>, mut b: DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let c = &blocks.xy;
    let objective = |g: &DVector<f64>, b: &DVector<f64>| {
        let s = g.dot(&(c * b));
        s * s
    };
    let mut f = objective(&g, &b);
    let mut step = 1.0;
    let mut stalls = 0;
    for _ in 0..ORACLE_MAX_ITER {
        let s = g.dot(&(c * &b));
        let grad_g = tangent(&((c * &b) * (2.0 * s)), &(&blocks.xx * &g));
        let grad_b = tangent(&((c.transpose() * &g) * (2.0 * s)), &(&blocks.yy * &b));
        let mut accepted = false;
        while step > 1e-18 {
            let mut g2 = &g + &grad_g * step;
            let mut b2 = &b + &grad_b * step;
            if ellipsoid_normalize(&mut g2, &blocks.xx) && ellipsoid_normalize(&mut b2, &blocks.yy) {
                let f2 = objective(&g2, &b2);
                if f2 >= f {
                    let gain = f2 - f;
                    g = g2;
                    b = b2;
                    f = f2;
                    step = (step * 1.5).min(1e8);
                    accepted = true;
                    stalls = if gain <= 1e-15 * f.max(1e-300) { stalls + 1 } else { 0 };
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted || stalls >= 3 {
            break;
        }
    }
    (f, g, b)
}

/// Best (γᵀ Γ_XY β)² over `restarts` seeded projected-ascent runs.
pub fn numeric_ctd_oracle(tpdm: &Tpdm, restarts: usize, seed: u64) -> Result<OracleResult> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("oracle needs at least one restart".into()));
    }
    let blocks = prepare_blocks(&tpdm.block_xx(), &tpdm.block_yy(), &tpdm.block_xy())?;
    Ok(oracle_on_blocks(&blocks, restarts, seed))
}

pub fn oracle_on_blocks(blocks: &PreparedBlocks, restarts: usize, seed: u64) -> OracleResult {
    let start = Instant::now();
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "oracle", r as u64));
        let g = random_start(&mut rng, &blocks.xx);
        let b = random_start(&mut rng, &blocks.yy);
        let run = ascend(blocks, g, b);
        if best.as_ref().is_none_or(|(f, _, _)| run.0 > *f) {
            best = Some(run);
        }
    }
    let (tau, g, b) = best.expect("restarts >= 1");
    OracleResult {
        tau,
        gamma: g.iter().copied().collect(),
        beta: b.iter().copied().collect(),
        elapsed: start.elapsed(),
    }
}
