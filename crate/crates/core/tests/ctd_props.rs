use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tailtopo::ctd::{numeric_ctd_oracle, solve_ctd, CtdSolution};
use tailtopo::ingest::BlockSplit;
use tailtopo::tpdm::Tpdm;

fn random_psd(seed: u64, d: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DMatrix::<f64>::from_fn(d, 2 * d, |_, _| StandardNormal.sample(&mut rng));
    let g: DMatrix<f64> = &w * w.transpose();
    let g = g.clone() * (d as f64 / g.trace());
    (&g + g.transpose()) * 0.5
}

fn solve(g: &DMatrix<f64>, p: usize) -> CtdSolution {
    solve_ctd(&Tpdm::from_matrix(g.clone(), p).unwrap()).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Reorder rows and columns so the Y block comes first.
fn swap_blocks(g: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let d = g.nrows();
    let order: Vec<usize> = (p..d).chain(0..p).collect();
    DMatrix::from_fn(d, d, |i, j| g[(order[i], order[j])])
}

/// Real eigenvalues of a general square matrix, descending.
fn real_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn eigen_dominates_oracle(seed in any::<u64>(), p in 2usize..5, q in 2usize..5) {
        let t = Tpdm::from_matrix(random_psd(seed, p + q), p).unwrap();
        let sol = solve_ctd(&t).unwrap();
        let oracle = numeric_ctd_oracle(&t, 20, seed ^ 0x5a5a).unwrap();
        prop_assert!(sol.tau >= oracle.tau - 1e-6, "eigen {} < oracle {}", sol.tau, oracle.tau);
        prop_assert!(sol.tau <= 1.0 + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swapping_blocks_swaps_roles(seed in any::<u64>(), p in 2usize..6, q in 2usize..6) {
        let g = random_psd(seed, p + q);
        let a = solve(&g, p);
        let b = solve(&swap_blocks(&g, p), q);
        prop_assert!((a.tau - b.tau).abs() <= 1e-10);
        prop_assert!(close(&a.lambda1, &b.lambda2, 1e-8));
        prop_assert!(close(&a.lambda2, &b.lambda1, 1e-8));
        prop_assert!(close(&a.gamma_star, &b.beta_star, 1e-8));
        prop_assert!(close(&a.beta_star, &b.gamma_star, 1e-8));
    }

    #[test]
    fn scaling_leaves_directions_and_tau(seed in any::<u64>(), p in 2usize..6, q in 2usize..6, s in 0.01f64..100.0) {
        let g = random_psd(seed, p + q);
        let a = solve(&g, p);
        let b = solve(&(&g * s), p);
        prop_assert!((a.tau - b.tau).abs() <= 1e-8);
        prop_assert!(close(&a.lambda1, &b.lambda1, 1e-8));
        prop_assert!(close(&a.lambda2, &b.lambda2, 1e-8));
    }

    #[test]
    fn permuting_x_channels_permutes_lambda1(seed in any::<u64>(), p in 2usize..6, q in 2usize..6, rot in 1usize..5) {
        let d = p + q;
        let g = random_psd(seed, d);
        let perm: Vec<usize> = (0..p).map(|i| (i + rot) % p).chain(p..d).collect();
        let gp = DMatrix::from_fn(d, d, |i, j| g[(perm[i], perm[j])]);
        let a = solve(&g, p);
        let b = solve(&gp, p);
        let expected: Vec<f64> = (0..p).map(|i| a.lambda1[perm[i]]).collect();
        prop_assert!(close(&b.lambda1, &expected, 1e-8));
        prop_assert!((a.tau - b.tau).abs() <= 1e-10);
    }

    #[test]
    fn g1_and_g2_share_the_nonzero_spectrum(seed in any::<u64>(), p in 2usize..6, q in 2usize..6) {
        let g = random_psd(seed, p + q);
        let split = BlockSplit::leading(p, q);
        let t = Tpdm::from_matrix(g, p).unwrap().with_split(split).unwrap();
        let (xx, yy, xy) = (t.block_xx(), t.block_yy(), t.block_xy());
        let xx_inv = xx.clone().try_inverse().unwrap();
        let yy_inv = yy.clone().try_inverse().unwrap();
        let g1 = &xx_inv * &xy * &yy_inv * xy.transpose();
        let g2 = &yy_inv * xy.transpose() * &xx_inv * &xy;
        let (s1, s2) = (real_spectrum(&g1), real_spectrum(&g2));
        let k = p.min(q);
        let sol = solve_ctd(&t).unwrap();
        for i in 0..k {
            prop_assert!((s1[i] - s2[i]).abs() <= 1e-8, "{:?} vs {:?}", s1, s2);
            prop_assert!((s1[i] - sol.spectrum[i]).abs() <= 1e-8);
        }
        prop_assert!((sol.tau - s1[0]).abs() <= 1e-8);
    }

    #[test]
    fn canonical_pair_attains_tau(seed in any::<u64>(), p in 2usize..6, q in 2usize..6) {
        let t = Tpdm::from_matrix(random_psd(seed, p + q), p).unwrap();
        let sol = solve_ctd(&t).unwrap();
        let g = nalgebra::DVector::from_vec(sol.gamma_star.clone());
        let b = nalgebra::DVector::from_vec(sol.beta_star.clone());
        prop_assert!(((g.transpose() * t.block_xx() * &g)[0] - 1.0).abs() <= 1e-8);
        prop_assert!(((b.transpose() * t.block_yy() * &b)[0] - 1.0).abs() <= 1e-8);
        prop_assert!(((g.transpose() * t.block_xy() * &b)[0].powi(2) - sol.tau).abs() <= 1e-8);
    }
}

/// Brute force for P = Q = 2: with Γ_XX = Lx Lxᵀ, feasible γ are Lx⁻ᵀ(cos θ, sin θ),
/// so the objective is (uᵀ K v)² with K = Lx⁻¹ Γ_XY Ly⁻ᵀ over two angles.
#[test]
fn two_by_two_matches_a_one_degree_grid() {
    let rad = |deg: f64| deg.to_radians();
    let rot = |deg: f64| DMatrix::from_row_slice(2, 2, &[rad(deg).cos(), -rad(deg).sin(), rad(deg).sin(), rad(deg).cos()]);
    for (k, (a, b, s1, s2)) in [(30.0, 70.0, 0.9, 0.3), (0.0, 45.0, 0.6, 0.5), (120.0, 10.0, 0.4, 0.1)].into_iter().enumerate() {
        let lx = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3 + 0.1 * k as f64, 0.8]);
        let ly = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, -0.2, 1.1]);
        // singular values below one keep the joint matrix PSD; angles are whole degrees
        let core = rot(a) * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![s1, s2])) * rot(b).transpose();
        let xy = &lx * &core * ly.transpose();
        let mut g = DMatrix::zeros(4, 4);
        g.view_mut((0, 0), (2, 2)).copy_from(&(&lx * lx.transpose()));
        g.view_mut((2, 2), (2, 2)).copy_from(&(&ly * ly.transpose()));
        g.view_mut((0, 2), (2, 2)).copy_from(&xy);
        g.view_mut((2, 0), (2, 2)).copy_from(&xy.transpose());
        let tau = solve(&g, 2).tau;

        let mut best: f64 = 0.0;
        for i in 0..360 {
            let u = nalgebra::DVector::from_vec(vec![rad(i as f64).cos(), rad(i as f64).sin()]);
            for j in 0..360 {
                let v = nalgebra::DVector::from_vec(vec![rad(j as f64).cos(), rad(j as f64).sin()]);
                best = best.max((u.transpose() * &core * &v)[0].powi(2));
            }
        }
        assert!((tau - best).abs() <= 1e-4, "case {k}: eigen {tau} vs grid {best}");
        assert!((tau - s1 * s1).abs() <= 1e-10);
    }
}
