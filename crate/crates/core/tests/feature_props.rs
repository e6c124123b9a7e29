use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tailtopo::ingest::{load_feature_panel, write_feature_panel, ChannelPartition};
use tailtopo::margins::{rank_standardize, standardize_column, MarginFamily, MarginSpec};
use tailtopo::spectral::{band_periodogram, local_periodogram, BandPeriodogramPanel, BandSpec};
use tailtopo::ingest::SignalPanel;

fn family() -> impl Strategy<Value = MarginFamily> {
    prop_oneof![Just(MarginFamily::Frechet2), Just(MarginFamily::SymmetricPareto2)]
}

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("C{j}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_csv_round_trip_is_bit_exact(rows in 1usize..30, cols in 1usize..6, seed in any::<u64>(), scale in -300i32..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(f64::MIN_POSITIVE..1.0) * 10f64.powi(scale));
        let panel = BandPeriodogramPanel::from_matrix("s01", labels(cols), values);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s01.csv");
        write_feature_panel(&path, &panel).unwrap();
        let back = load_feature_panel(&path).unwrap();
        prop_assert_eq!(back.values, panel.values);
        prop_assert_eq!(back.channels, panel.channels);
        prop_assert_eq!(back.subject_id, "s01");
    }

    #[test]
    fn partition_resolution_is_order_stable(seed in any::<u64>(), d in 4usize..10) {
        let channels = labels(d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(1..d);
        let mut x: Vec<String> = channels[..p].to_vec();
        let mut y: Vec<String> = channels[p..].to_vec();
        let a = ChannelPartition::new(x.clone(), y.clone()).unwrap().resolve(&channels).unwrap();
        x.reverse();
        y.rotate_left(1);
        let b = ChannelPartition::new(x, y).unwrap().resolve(&channels).unwrap();
        let sorted = |v: &[usize]| { let mut v = v.to_vec(); v.sort(); v };
        prop_assert_eq!(sorted(&a.x), sorted(&b.x));
        prop_assert_eq!(sorted(&a.y), sorted(&b.y));
    }

    #[test]
    fn standardization_is_monotone_and_rank_only(seed in any::<u64>(), n in 10usize..400, fam in family()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let spec = MarginSpec::new(fam);
        let z = standardize_column(&x, &spec, "c").unwrap();
        for i in 0..n {
            for j in 0..n {
                if x[i] < x[j] {
                    prop_assert!(z[i] < z[j]);
                }
            }
        }
        // any strictly increasing map of the input leaves the output untouched
        let warped: Vec<f64> = x.iter().map(|v| v.exp() * 3.0 + v.powi(3)).collect();
        prop_assert_eq!(standardize_column(&warped, &spec, "c").unwrap(), z);
    }

    #[test]
    fn parseval_holds_per_block(seed in any::<u64>(), a in 2usize..700) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..a).map(|_| rng.random_range(-10.0..10.0)).collect();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let mass: f64 = local_periodogram(&x).unwrap().iter().sum();
        prop_assert!((mass - energy).abs() <= 1e-9 * energy);
    }

    #[test]
    fn tiling_bands_recover_non_dc_mass(seed in any::<u64>(), cut1 in 5.0f64..40.0, cut2 in 45.0f64..100.0, s in 0.1f64..20.0) {
        let (sr, a) = (256.0, 256usize);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = DMatrix::from_fn(1, 3 * a, |_, _| rng.random_range(-1.0..1.0));
        let panel = SignalPanel::new("s", vec!["C".into()], samples.clone(), sr).unwrap();
        let bands = [BandSpec::custom(0.0, cut1).unwrap(), BandSpec::custom(cut1, cut2).unwrap(), BandSpec::custom(cut2, sr / 2.0).unwrap()];
        for block in 0..3 {
            let x: Vec<f64> = (0..a).map(|t| samples[(0, block * a + t)]).collect();
            let pg = local_periodogram(&x).unwrap();
            let non_dc: f64 = pg[1..=a / 2].iter().sum();
            let mut weighted = 0.0;
            for band in &bands {
                let n_bins = tailtopo::spectral::band_bins(sr, a, band).len() as f64;
                let v = band_periodogram(&panel, band, a).unwrap().values[(block, 0)];
                prop_assert!(v >= 0.0);
                weighted += n_bins * v;
            }
            prop_assert!((weighted - non_dc).abs() <= 1e-9 * non_dc);
        }
        // scaling a channel by s scales its band values by s²
        let scaled = SignalPanel::new("s", vec!["C".into()], &samples * s, sr).unwrap();
        let v0 = band_periodogram(&panel, &bands[1], a).unwrap().values;
        let v1 = band_periodogram(&scaled, &bands[1], a).unwrap().values;
        for (p, q) in v0.iter().zip(v1.iter()) {
            prop_assert!((q - s * s * p).abs() <= 1e-12 * q.abs().max(1e-300));
        }
    }
}

#[test]
fn standardized_margins_have_index_two_tails() {
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(0.0..1.0));
    for fam in [MarginFamily::Frechet2, MarginFamily::SymmetricPareto2] {
        let z = rank_standardize(&x, &MarginSpec::new(fam), &labels(1)).unwrap();
        let level = fam.quantile(0.99);
        let tail = z.iter().filter(|v| v.abs() > level).count() as f64 / n as f64;
        let ratio = tail * level * level;
        assert!((ratio - 1.0).abs() <= 0.15, "{}: P(|Z| > z) z² = {ratio}", fam.as_str());
    }
}
