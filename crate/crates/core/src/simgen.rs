//! Synthetic regularly-varying panels with a two-cluster tail structure,
//! built from transformed-linear combinations of IID Fréchet(2) variables.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ctd::{solve_ctd, CtdSolution};
use crate::error::{Error, Result};
use crate::linalg;
use crate::margins::{rank_standardize, MarginFamily, MarginSpec};
use crate::seed::derive_seed;
use crate::tpdm::Tpdm;

pub const DEFAULT_COUPLING: f64 = 0.8;

/// Softplus ℓ(x) = ln(1 + eˣ).
pub fn tl_softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// ℓ⁻¹(y) = ln(eʸ − 1), defined for y > 0.
pub fn tl_softplus_inv(y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::InvalidArgument(format!("softplus inverse needs y > 0, got {y}")));
    }
    Ok(if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    })
}

/// a ∘ y = ℓ(a ℓ⁻¹(y)); 1 ∘ y is returned as y itself.
pub fn tl_scale(a: f64, y: f64) -> Result<f64> {
    if a == 1.0 {
        if !(y > 0.0) {
            return Err(Error::InvalidArgument(format!("transformed scaling needs y > 0, got {y}")));
        }
        return Ok(y);
    }
    Ok(tl_softplus(a * tl_softplus_inv(y)?))
}

/// y ⊕ z ⊕ ... = ℓ(Σ ℓ⁻¹(yᵢ)).
pub fn tl_sum(ys: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for &y in ys {
        acc += tl_softplus_inv(y)?;
    }
    Ok(tl_softplus(acc))
}

/// ⊕ₖ aₖ ∘ vₖ, with zero coefficients dropped and a lone term handled by ∘
/// directly so that identity rows reproduce their input exactly.
pub fn tl_combination(coeffs: &[f64], v: &[f64]) -> Result<f64> {
    let terms: Vec<(f64, f64)> = coeffs.iter().zip(v).filter(|(a, _)| **a != 0.0).map(|(a, x)| (*a, *x)).collect();
    match terms.as_slice() {
        [] => Ok(tl_softplus(0.0)),
        [(a, x)] => tl_scale(*a, *x),
        _ => {
            let mut acc = 0.0;
            for (a, x) in &terms {
                acc += a * tl_softplus_inv(*x)?;
            }
            Ok(tl_softplus(acc))
        }
    }
}

/// Fréchet(2) by inversion.
pub fn frechet2_from_uniform(u: f64) -> f64 {
    (-u.ln()).powf(-0.5)
}

/// δ₁ couples X-channel i with Y-channel i, δ₂ couples it with the mirrored
/// Y-channel. Strength a/(i+1)² keeps the top canonical pair unique and well
/// separated from the next one.
pub fn default_cluster_deltas(p: usize, q: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if p < 2 || q < 2 {
        return Err(Error::InvalidArgument(format!("default deltas need P, Q >= 2, got P = {p}, Q = {q}")));
    }
    let d = p + q;
    let mut d1 = DMatrix::identity(d, d);
    let mut d2 = DMatrix::identity(d, d);
    for i in 0..p.min(q) {
        let w = DEFAULT_COUPLING / ((i + 1) * (i + 1)) as f64;
        d1[(i, p + i)] = w;
        d2[(i, d - 1 - i)] = w;
    }
    Ok((d1, d2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthConvention {
    /// Γ = δδᵀ, the transformed-linear TPDM of δ ∘ V.
    Tpdm,
    /// Γ = (δδᵀ)⁻¹.
    Precision,
}

impl std::str::FromStr for TruthConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tpdm" => Ok(TruthConvention::Tpdm),
            "precision" => Ok(TruthConvention::Precision),
            other => Err(Error::InvalidArgument(format!("unknown truth convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub delta1: DMatrix<f64>,
    pub delta2: DMatrix<f64>,
    pub n_subjects: usize,
    pub n_blocks: usize,
    pub fuzzy_frac: f64,
    pub p: usize,
    pub q: usize,
    pub seed: u64,
    /// d_n ∈ {1, 2}; empty means first half 1, second half 2.
    pub labels: Vec<usize>,
    pub margin: MarginFamily,
    pub convention: TruthConvention,
}

impl SimulationSpec {
    /// Default deltas, B = 2000, balanced labels.
    pub fn new(n_subjects: usize, p: usize, q: usize, fuzzy_frac: f64, seed: u64) -> Result<Self> {
        let (delta1, delta2) = default_cluster_deltas(p, q)?;
        Ok(SimulationSpec {
            delta1,
            delta2,
            n_subjects,
            n_blocks: 2000,
            fuzzy_frac,
            p,
            q,
            seed,
            labels: Vec::new(),
            margin: MarginFamily::SymmetricPareto2,
            convention: TruthConvention::Tpdm,
        })
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn resolved_labels(&self) -> Vec<usize> {
        if self.labels.is_empty() {
            (0..self.n_subjects).map(|n| if n < self.n_subjects / 2 { 1 } else { 2 }).collect()
        } else {
            self.labels.clone()
        }
    }

    pub fn n_fuzzy(&self) -> usize {
        (self.fuzzy_frac * self.n_subjects as f64).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.p == 0 || self.q == 0 {
            return Err(Error::InvalidArgument("P and Q must be positive".into()));
        }
        for (name, delta) in [("delta1", &self.delta1), ("delta2", &self.delta2)] {
            if delta.shape() != (d, d) {
                return Err(Error::InvalidArgument(format!(
                    "{name} is {}x{}, expected {d}x{d}",
                    delta.nrows(),
                    delta.ncols()
                )));
            }
            if delta.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} has non-finite entries")));
            }
            let g = delta * delta.transpose();
            let min = linalg::min_eigenvalue(&g);
            if !(min > 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "{name} {name}ᵀ is not positive definite (min eigenvalue {min:e})"
                )));
            }
        }
        if self.n_subjects == 0 {
            return Err(Error::InvalidArgument("need at least one subject".into()));
        }
        if self.n_blocks < crate::margins::MIN_ROWS {
            return Err(Error::InvalidArgument(format!(
                "need at least {} blocks, got {}",
                crate::margins::MIN_ROWS,
                self.n_blocks
            )));
        }
        if !(0.0..=1.0).contains(&self.fuzzy_frac) {
            return Err(Error::InvalidArgument(format!("fuzzy fraction must lie in [0, 1], got {}", self.fuzzy_frac)));
        }
        let labels = self.resolved_labels();
        if labels.len() != self.n_subjects || labels.iter().any(|l| !(1..=2).contains(l)) {
            return Err(Error::InvalidArgument("labels must be N values in {1, 2}".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GroundTruth {
    pub convention: TruthConvention,
    pub labels: Vec<usize>,
    pub fuzzy: Vec<bool>,
    pub delta: [Vec<Vec<f64>>; 2],
    /// δδᵀ per cluster.
    pub tpdm: [Vec<Vec<f64>>; 2],
    /// (δδᵀ)⁻¹ per cluster.
    pub precision: [Vec<Vec<f64>>; 2],
    /// Λ under the selected convention.
    pub topology: [Vec<f64>; 2],
    pub topology_tpdm: [Vec<f64>; 2],
    pub topology_precision: [Vec<f64>; 2],
    pub tau_tpdm: [f64; 2],
}

impl GroundTruth {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Validation(e.to_string()))?;
        crate::ingest::write_file(path, text.as_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedSubject {
    pub id: String,
    pub label: usize,
    pub fuzzy: bool,
    /// Positive B × D panel Z.
    pub raw: DMatrix<f64>,
    /// Z rank-standardized to `SimulationSpec::margin`.
    pub standardized: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub subjects: Vec<SimulatedSubject>,
    pub truth: GroundTruth,
    pub channels: Vec<String>,
}

pub fn channel_names(p: usize, q: usize) -> Vec<String> {
    (1..=p).map(|i| format!("X{i}")).chain((1..=q).map(|i| format!("Y{i}"))).collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn topology(gamma: DMatrix<f64>, p: usize) -> Result<CtdSolution> {
    solve_ctd(&Tpdm::from_matrix(gamma, p)?)
}

pub fn ground_truth(spec: &SimulationSpec, fuzzy: Vec<bool>) -> Result<GroundTruth> {
    let t = [&spec.delta1, &spec.delta2].map(|d| {
        let mut g = d * d.transpose();
        linalg::symmetrize(&mut g);
        g
    });
    let prec = t.clone().map(|g| {
        let mut inv = linalg::sym_inv(&g);
        linalg::symmetrize(&mut inv);
        inv
    });
    let sol_t = [topology(t[0].clone(), spec.p)?, topology(t[1].clone(), spec.p)?];
    let sol_p = [topology(prec[0].clone(), spec.p)?, topology(prec[1].clone(), spec.p)?];
    let topo_t = [sol_t[0].abs_topology(), sol_t[1].abs_topology()];
    let topo_p = [sol_p[0].abs_topology(), sol_p[1].abs_topology()];
    Ok(GroundTruth {
        convention: spec.convention,
        labels: spec.resolved_labels(),
        fuzzy,
        delta: [rows(&spec.delta1), rows(&spec.delta2)],
        tpdm: [rows(&t[0]), rows(&t[1])],
        precision: [rows(&prec[0]), rows(&prec[1])],
        topology: match spec.convention {
            TruthConvention::Tpdm => topo_t.clone(),
            TruthConvention::Precision => topo_p.clone(),
        },
        topology_tpdm: topo_t,
        topology_precision: topo_p,
        tau_tpdm: [sol_t[0].tau, sol_t[1].tau],
    })
}

/// One subject's raw panel. `fuzzy` subjects draw the generating δ per block.
pub fn simulate_subject(spec: &SimulationSpec, label: usize, fuzzy: bool, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let d = spec.dim();
    let mut z = DMatrix::zeros(spec.n_blocks, d);
    let mut v = vec![0.0; d];
    let coeff_rows = [rows(&spec.delta1), rows(&spec.delta2)];
    for b in 0..spec.n_blocks {
        for x in v.iter_mut() {
            *x = frechet2_from_uniform(rng.sample(rand::distr::Open01));
        }
        let second = if fuzzy { rng.random_bool(0.5) } else { label == 2 };
        let delta = &coeff_rows[second as usize];
        for j in 0..d {
            z[(b, j)] = tl_combination(&delta[j], &v)?;
        }
    }
    Ok(z)
}

pub fn simulate_panel(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let n = spec.n_subjects;
    let labels = spec.resolved_labels();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "fuzzy", 0)));
    let mut fuzzy = vec![false; n];
    for &i in &order[..spec.n_fuzzy()] {
        fuzzy[i] = true;
    }
    let channels = channel_names(spec.p, spec.q);
    let margin = MarginSpec::new(spec.margin);
    let width = n.to_string().len().max(2);
    let subjects = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "subject", i as u64));
            let raw = simulate_subject(spec, labels[i], fuzzy[i], &mut rng)?;
            let standardized = rank_standardize(&raw, &margin, &channels)?;
            Ok(SimulatedSubject {
                id: format!("sim{:0width$}", i + 1),
                label: labels[i],
                fuzzy: fuzzy[i],
                raw,
                standardized,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Simulation {
        truth: ground_truth(spec, fuzzy)?,
        subjects,
        channels,
    })
}
