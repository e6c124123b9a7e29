//! Fuzzy C-means over stacked tail-topologies, label assignment, two-cluster
//! accuracy, and the baselines it is compared against.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ctd::{prepare_blocks, solve_blocks, CtdSolution};
use crate::error::{Error, Result};
use crate::ingest::BlockSplit;
use crate::linalg;
use crate::seed::derive_seed;

pub const DEFAULT_CUTOFF: f64 = 0.7;
pub const DEFAULT_M_GRID: [f64; 7] = [1.1, 1.2, 1.5, 1.8, 2.0, 2.2, 2.5];

#[derive(Debug, Clone)]
pub struct FeatureStack {
    pub subjects: Vec<String>,
    /// N × D, one row per subject.
    pub features: DMatrix<f64>,
}

impl FeatureStack {
    pub fn new(subjects: Vec<String>, features: DMatrix<f64>) -> Result<Self> {
        if subjects.len() != features.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} subject ids for {} feature rows",
                subjects.len(),
                features.nrows()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            let n = i % features.nrows();
            return Err(Error::InvalidArgument(format!(
                "subject {}: non-finite feature value",
                subjects[n]
            )));
        }
        Ok(FeatureStack { subjects, features })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows reordered by `order` (new row i = old row order[i]).
    pub fn permuted(&self, order: &[usize]) -> Self {
        FeatureStack {
            subjects: order.iter().map(|&i| self.subjects[i].clone()).collect(),
            features: self.features.select_rows(order),
        }
    }
}

/// Row n = (|λ₁⁽ⁿ⁾|, |λ₂⁽ⁿ⁾|).
pub fn stack_tail_topologies(solutions: &[(String, CtdSolution)]) -> Result<FeatureStack> {
    let Some((_, first)) = solutions.first() else {
        return Err(Error::InvalidArgument("no solutions to stack".into()));
    };
    let (p, q) = (first.p(), first.q());
    let mut rows = Vec::with_capacity(solutions.len());
    for (id, s) in solutions {
        if s.p() != p || s.q() != q {
            return Err(Error::InvalidArgument(format!(
                "subject {id}: topology has P = {}, Q = {}, expected P = {p}, Q = {q}",
                s.p(),
                s.q()
            )));
        }
        rows.push(s.abs_topology());
    }
    let features = DMatrix::from_fn(rows.len(), p + q, |n, j| rows[n][j]);
    FeatureStack::new(solutions.iter().map(|(id, _)| id.clone()).collect(), features)
}

#[derive(Debug, Clone, Copy)]
pub struct FcmOptions {
    pub clusters: usize,
    pub fuzziness: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    pub cutoff: f64,
}

impl FcmOptions {
    pub fn new(clusters: usize, fuzziness: f64, seed: u64) -> Self {
        FcmOptions {
            clusters,
            fuzziness,
            seed,
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
            cutoff: DEFAULT_CUTOFF,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.clusters < 2 || self.clusters > n {
            return Err(Error::InvalidArgument(format!(
                "need 2 <= S <= N, got S = {} with N = {n}",
                self.clusters
            )));
        }
        if !(self.fuzziness > 1.0 && self.fuzziness < 3.0) {
            return Err(Error::InvalidArgument(format!(
                "fuzziness m must lie in (1, 3), got {}",
                self.fuzziness
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument(
                "tol must be positive and max_iter, restarts at least 1".into(),
            ));
        }
        check_cutoff(self.cutoff, self.clusters)
    }
}

fn check_cutoff(cutoff: f64, s: usize) -> Result<()> {
    if !(cutoff > 1.0 / s as f64 && cutoff <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "cutoff must lie in (1/S, 1], got {cutoff} with S = {s}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MembershipMatrix {
    /// N × S, rows sum to one.
    pub u: DMatrix<f64>,
    /// S × D.
    pub centers: DMatrix<f64>,
    pub fuzziness: f64,
    /// J(U, centers) after every iteration.
    pub objective_trace: Vec<f64>,
    /// 1-based.
    pub hard_labels: Vec<usize>,
    pub fuzzy_flags: Vec<bool>,
    pub cutoff: f64,
    pub converged: bool,
}

impl MembershipMatrix {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Membership row for squared distances `d2` to each centre.
///
/// A zero distance claims the point entirely (first such centre wins).
/// Otherwise u_s ∝ d_s^{-2/(m-1)}, evaluated as a softmax in log space.
pub fn membership_row(d2: &[f64], m: f64) -> Vec<f64> {
    if let Some(hit) = d2.iter().position(|&d| d == 0.0) {
        let mut row = vec![0.0; d2.len()];
        row[hit] = 1.0;
        return row;
    }
    let e = 1.0 / (m - 1.0);
    let lw: Vec<f64> = d2.iter().map(|d| -e * d.ln()).collect();
    let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|n| x.row(n).iter().copied().collect()).collect()
}

fn update_centers(x: &[Vec<f64>], u: &DMatrix<f64>, m: f64) -> Vec<Vec<f64>> {
    let (n, s) = u.shape();
    let d = x[0].len();
    (0..s)
        .map(|k| {
            let mut num = vec![0.0; d];
            let mut den = 0.0;
            for i in 0..n {
                let w = u[(i, k)].powf(m);
                den += w;
                for (acc, v) in num.iter_mut().zip(&x[i]) {
                    *acc += w * v;
                }
            }
            if den > 0.0 {
                num.iter_mut().for_each(|v| *v /= den);
            }
            num
        })
        .collect()
}

fn objective(x: &[Vec<f64>], u: &DMatrix<f64>, centers: &[Vec<f64>], m: f64) -> f64 {
    let mut j = 0.0;
    for (i, xi) in x.iter().enumerate() {
        for (k, c) in centers.iter().enumerate() {
            j += u[(i, k)].powf(m) * sq_dist(xi, c);
        }
    }
    j
}

fn single_run(x: &[Vec<f64>], opts: &FcmOptions, seed: u64) -> MembershipMatrix {
    let n = x.len();
    let s = opts.clusters;
    let m = opts.fuzziness;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DMatrix::from_fn(n, s, |_, _| rng.random::<f64>() + f64::EPSILON);
    for i in 0..n {
        let total: f64 = u.row(i).sum();
        for k in 0..s {
            u[(i, k)] /= total;
        }
    }
    let mut centers = update_centers(x, &u, m);
    let mut trace = vec![objective(x, &u, &centers, m)];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let mut next = DMatrix::zeros(n, s);
        for (i, xi) in x.iter().enumerate() {
            let d2: Vec<f64> = centers.iter().map(|c| sq_dist(xi, c)).collect();
            for (k, v) in membership_row(&d2, m).into_iter().enumerate() {
                next[(i, k)] = v;
            }
        }
        let change = (&next - &u).amax();
        u = next;
        centers = update_centers(x, &u, m);
        trace.push(objective(x, &u, &centers, m));
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let (hard_labels, fuzzy_flags) = labels_from(&u, opts.cutoff);
    MembershipMatrix {
        centers: DMatrix::from_fn(s, x[0].len(), |k, j| centers[k][j]),
        u,
        fuzziness: m,
        objective_trace: trace,
        hard_labels,
        fuzzy_flags,
        cutoff: opts.cutoff,
        converged,
    }
}

/// Best of `opts.restarts` seeded FCM runs by final objective.
pub fn fuzzy_cmeans(stack: &FeatureStack, opts: &FcmOptions) -> Result<MembershipMatrix> {
    opts.validate(stack.len())?;
    if stack.dim() == 0 {
        return Err(Error::InvalidArgument("feature stack has no columns".into()));
    }
    let x = rows_of(&stack.features);
    let runs: Vec<MembershipMatrix> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| single_run(&x, opts, derive_seed(opts.seed, "fcm", r as u64)))
        .collect();
    // first strictly-lowest objective, so the result ignores scheduling
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.objective() < runs[best].objective() {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("restarts >= 1"))
}

fn labels_from(u: &DMatrix<f64>, cutoff: f64) -> (Vec<usize>, Vec<bool>) {
    (0..u.nrows())
        .map(|i| {
            let mut arg = 0;
            for k in 1..u.ncols() {
                if u[(i, k)] > u[(i, arg)] {
                    arg = k;
                }
            }
            (arg + 1, u[(i, arg)] < cutoff)
        })
        .unzip()
}

/// Argmax labels (ties to the lowest index, 1-based) and fuzzy flags.
pub fn assign_labels(u: &DMatrix<f64>, cutoff: f64) -> Result<(Vec<usize>, Vec<bool>)> {
    check_cutoff(cutoff, u.ncols())?;
    Ok(labels_from(u, cutoff))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConfusionMatrix {
    /// Rows are true labels, columns predicted.
    pub m: [[usize; 2]; 2],
    pub n_total: usize,
}

impl ConfusionMatrix {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::InvalidArgument(format!(
                "{} predictions for {} true labels",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::InvalidArgument("accuracy of an empty labelling".into()));
        }
        let mut m = [[0usize; 2]; 2];
        for (&p, &t) in pred.iter().zip(truth) {
            if !(1..=2).contains(&p) || !(1..=2).contains(&t) {
                return Err(Error::InvalidArgument(format!(
                    "two-cluster accuracy needs labels in {{1, 2}}, got predicted {p}, true {t}"
                )));
            }
            m[t - 1][p - 1] += 1;
        }
        Ok(ConfusionMatrix { m, n_total: pred.len() })
    }

    pub fn accuracy(&self) -> f64 {
        let diag = self.m[0][0] + self.m[1][1];
        let anti = self.m[0][1] + self.m[1][0];
        diag.max(anti) as f64 / self.n_total as f64
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(ConfusionMatrix::new(pred, truth)?.accuracy())
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub m: f64,
    pub membership: MembershipMatrix,
    pub confusion: Option<ConfusionMatrix>,
}

impl SweepPoint {
    pub fn accuracy(&self) -> Option<f64> {
        self.confusion.map(|c| c.accuracy())
    }
}

/// FCM at each m of `grid`; `truth` (1-based, stack order) enables accuracy.
pub fn sweep_fuzziness(
    stack: &FeatureStack,
    grid: &[f64],
    base: &FcmOptions,
    truth: Option<&[usize]>,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("fuzziness grid is empty".into()));
    }
    grid.par_iter()
        .map(|&m| {
            let opts = FcmOptions { fuzziness: m, ..*base };
            let membership = fuzzy_cmeans(stack, &opts)?;
            let confusion = match truth {
                Some(t) if opts.clusters == 2 => Some(ConfusionMatrix::new(&membership.hard_labels, t)?),
                _ => None,
            };
            Ok(SweepPoint { m, membership, confusion })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CcaResult {
    /// Squared top canonical correlation.
    pub rho: f64,
    /// (λ₁, λ₂) of the covariance problem, concatenated.
    pub lambda0: Vec<f64>,
    pub solution: CtdSolution,
}

pub fn sample_covariance(panel: &DMatrix<f64>) -> DMatrix<f64> {
    let (b, d) = panel.shape();
    let means: Vec<f64> = (0..d).map(|j| panel.column(j).mean()).collect();
    let centered = DMatrix::from_fn(b, d, |i, j| panel[(i, j)] - means[j]);
    let mut cov = centered.transpose() * &centered / (b as f64 - 1.0);
    linalg::symmetrize(&mut cov);
    cov
}

/// Classical CCA on the sample covariance, solved exactly like the CTD.
pub fn cca_canonical_vectors(panel: &DMatrix<f64>, split: &BlockSplit) -> Result<CcaResult> {
    let (b, d) = panel.shape();
    split.validate(d)?;
    if b <= d {
        return Err(Error::InvalidArgument(format!("CCA needs B > D, got B = {b}, D = {d}")));
    }
    let cov = sample_covariance(panel);
    let xx = linalg::submatrix(&cov, &split.x, &split.x);
    let yy = linalg::submatrix(&cov, &split.y, &split.y);
    let xy = linalg::submatrix(&cov, &split.x, &split.y);
    let solution = solve_blocks(&prepare_blocks(&xx, &yy, &xy)?);
    Ok(CcaResult {
        rho: solution.tau.min(1.0),
        lambda0: solution.lambda1.iter().chain(&solution.lambda2).copied().collect(),
        solution,
    })
}

/// Each subject's whole panel flattened block by block: FCM on the data
/// itself, with no dependence summary in between.
pub fn raw_feature_stack(panels: &[(String, DMatrix<f64>)]) -> Result<FeatureStack> {
    let Some((_, first)) = panels.first() else {
        return Err(Error::InvalidArgument("no panels to stack".into()));
    };
    let shape = first.shape();
    let width = shape.0 * shape.1;
    let mut data = Vec::with_capacity(panels.len() * width);
    for (id, p) in panels {
        if p.shape() != shape {
            return Err(Error::InvalidArgument(format!(
                "subject {id}: panel is {}x{}, expected {}x{}",
                p.nrows(),
                p.ncols(),
                shape.0,
                shape.1
            )));
        }
        data.extend(p.transpose().iter().copied());
    }
    let features = DMatrix::from_row_slice(panels.len(), width, &data);
    FeatureStack::new(panels.iter().map(|(id, _)| id.clone()).collect(), features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ConditionReport;

    fn sol(l1: Vec<f64>, l2: Vec<f64>) -> CtdSolution {
        CtdSolution {
            tau: 0.5,
            gamma_star: l1.clone(),
            beta_star: l2.clone(),
            lambda1: l1,
            lambda2: l2,
            spectrum: vec![0.5],
            condition_report: ConditionReport {
                min_eig_xx: 1.0,
                min_eig_yy: 1.0,
                ridge_xx: 0.0,
                ridge_yy: 0.0,
            },
            degenerate: false,
        }
    }

    #[test]
    fn stacking_takes_absolute_values() {
        let s = stack_tail_topologies(&[("a".into(), sol(vec![-0.6, 0.8], vec![1.0, 0.0]))]).unwrap();
        assert_eq!(s.features.shape(), (1, 4));
        assert_eq!(s.features.row(0).iter().copied().collect::<Vec<_>>(), vec![0.6, 0.8, 1.0, 0.0]);
        let flipped = stack_tail_topologies(&[
            ("a".into(), sol(vec![-0.6, 0.8], vec![1.0, 0.0])),
            ("b".into(), sol(vec![0.6, -0.8], vec![-1.0, 0.0])),
        ])
        .unwrap();
        assert_eq!(flipped.features.row(0), flipped.features.row(1));
    }

    #[test]
    fn stacking_rejects_mixed_shapes() {
        let r = stack_tail_topologies(&[
            ("a".into(), sol(vec![1.0, 0.0], vec![1.0, 0.0])),
            ("b".into(), sol(vec![1.0, 0.0, 0.0], vec![1.0, 0.0])),
        ]);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn equidistant_membership_is_half() {
        assert_eq!(membership_row(&[2.5, 2.5], 2.0), vec![0.5, 0.5]);
        assert_eq!(membership_row(&[1e-30, 1e-30], 1.1), vec![0.5, 0.5]);
    }

    #[test]
    fn exact_hit_takes_all() {
        assert_eq!(membership_row(&[1.0, 0.0, 0.0], 2.0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn membership_matches_ratio_formula() {
        let d2 = [1.0, 4.0, 9.0];
        let m = 2.0;
        let row = membership_row(&d2, m);
        for s in 0..3 {
            let denom: f64 = d2.iter().map(|d| (d2[s] / d).powf(1.0 / (m - 1.0))).sum();
            assert!((row[s] - 1.0 / denom).abs() < 1e-14);
        }
    }

    #[test]
    fn labels_and_flags() {
        let u = DMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.6, 0.4, 0.5, 0.5]);
        let (l, f) = assign_labels(&u, 0.7).unwrap();
        assert_eq!(l, vec![1, 1, 1]);
        assert_eq!(f, vec![false, true, true]);
        assert!(assign_labels(&u, 0.5).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let truth: Vec<usize> = [vec![1; 6], vec![2; 8]].concat();
        assert_eq!(accuracy(&truth, &truth).unwrap(), 1.0);
        let swapped: Vec<usize> = truth.iter().map(|&t| 3 - t).collect();
        assert_eq!(accuracy(&swapped, &truth).unwrap(), 1.0);
        let truth = [vec![1; 6], vec![2; 8]].concat();
        let pred = [vec![1, 1, 1, 2, 2, 2], vec![1, 1, 1, 1, 2, 2, 2, 2]].concat();
        let c = ConfusionMatrix::new(&pred, &truth).unwrap();
        assert_eq!(c.m, [[3, 3], [4, 4]]);
        assert_eq!(c.accuracy(), 0.5);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[3], &[1]).is_err());
    }

    fn two_groups() -> FeatureStack {
        let mut rows = Vec::new();
        for i in 0..5 {
            rows.extend([0.0 + 0.01 * i as f64, 0.0]);
        }
        for i in 0..5 {
            rows.extend([5.0 + 0.01 * i as f64, 5.0]);
        }
        FeatureStack::new((0..10).map(|i| format!("s{i}")).collect(), DMatrix::from_row_slice(10, 2, &rows)).unwrap()
    }

    #[test]
    fn separated_groups_near_hard() {
        let stack = two_groups();
        let r = fuzzy_cmeans(&stack, &FcmOptions::new(2, 1.1, 3)).unwrap();
        // k-means on this data puts the first five and last five together
        let first = r.hard_labels[0];
        for n in 0..10 {
            let own = if n < 5 { first } else { 3 - first };
            assert_eq!(r.hard_labels[n], own);
            assert!(r.u[(n, own - 1)] >= 0.99);
        }
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let r = fuzzy_cmeans(&two_groups(), &FcmOptions::new(2, 2.5, 4)).unwrap();
        for n in 0..10 {
            assert!((r.u.row(n).sum() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn option_validation() {
        let s = two_groups();
        assert!(fuzzy_cmeans(&s, &FcmOptions::new(11, 2.0, 0)).is_err());
        assert!(fuzzy_cmeans(&s, &FcmOptions::new(2, 3.0, 0)).is_err());
        assert!(fuzzy_cmeans(&s, &FcmOptions::new(2, 1.0, 0)).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let s = two_groups();
        let a = fuzzy_cmeans(&s, &FcmOptions::new(2, 2.0, 9)).unwrap();
        let b = fuzzy_cmeans(&s, &FcmOptions::new(2, 2.0, 9)).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.objective_trace, b.objective_trace);
    }

    #[test]
    fn cca_duplicate_block_has_unit_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(200, 2, |_, _| rng.random::<f64>());
        let panel = DMatrix::from_fn(200, 4, |b, j| x[(b, j % 2)]);
        let r = cca_canonical_vectors(&panel, &BlockSplit::leading(2, 2)).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cca_one_by_one_is_squared_pearson() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let panel = DMatrix::from_fn(500, 2, |b, j| {
            let e: f64 = rng.random();
            if j == 0 { b as f64 / 500.0 + e } else { (b as f64 / 500.0) * 0.3 + e }
        });
        let r = cca_canonical_vectors(&panel, &BlockSplit::leading(1, 1)).unwrap();
        let (a, b) = (panel.column(0), panel.column(1));
        let (ma, mb) = (a.mean(), b.mean());
        let cov: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        let pearson2 = cov * cov / (va * vb);
        assert!((r.rho - pearson2).abs() < 1e-10, "{} vs {pearson2}", r.rho);
    }

    #[test]
    fn cca_needs_more_rows_than_columns() {
        let panel = DMatrix::from_element(3, 4, 1.0);
        assert!(cca_canonical_vectors(&panel, &BlockSplit::leading(2, 2)).is_err());
    }

    #[test]
    fn raw_stack_flattens_rows() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = raw_feature_stack(&[("a".into(), p.clone()), ("b".into(), p * 2.0)]).unwrap();
        assert_eq!(s.features.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.features[(1, 3)], 8.0);
    }
}
