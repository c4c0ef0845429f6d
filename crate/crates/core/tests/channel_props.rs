mod common;

use latlist::channel::{encode_dithered, effective_noise, gaussian_vector};
use latlist::stats::{non_increasing_within, trial_rng};
use latlist::{build_chain, simulate_p2p, AwgnParams, LatticeChain, ListDecoder};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const PRIMES: [u64; 3] = [2, 3, 5];

/// A chain `(k, k_s, k_c)` with the list rank between the other two.
fn triple() -> impl Strategy<Value = LatticeChain> {
    (0usize..3, 1usize..=4, 0.5f64..2.0)
        .prop_flat_map(|(pi, n, gamma)| (Just(pi), Just(n), prop::collection::vec(0..=n, 3), Just(gamma)))
        .prop_map(|(pi, n, mut ks, gamma)| {
            ks.sort_unstable();
            build_chain(PRIMES[pi], n, &ks, gamma).unwrap()
        })
}

fn with_point(chain: impl Strategy<Value = LatticeChain>) -> impl Strategy<Value = (LatticeChain, Vec<f64>)> {
    chain.prop_flat_map(|c| {
        let n = c.dim();
        (Just(c), prop::collection::vec(-6.0f64..6.0, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn both_list_forms_match_window_scan((c, y) in with_point(triple())) {
        let d = ListDecoder::from_chain(&c, 0, 1, 2).unwrap();
        let s = d.decode(&y).unwrap();
        let q = d.decode_q_form(&y).unwrap();
        prop_assert_eq!(&s.members, &q.members);
        prop_assert_eq!(&s.members, &common::window_scan_list(&d, &y));
        let expect = c.prime().pow((c.ranks()[2] - c.ranks()[1]) as u32) as usize;
        prop_assert_eq!(s.len(), expect);
        for m in &s.members {
            let g = d.coarse().gamma();
            let point: Vec<f64> = m.iter().map(|&v| v as f64 * g).collect();
            prop_assert!(d.coarse().in_voronoi(&point).unwrap());
        }
    }

    #[test]
    fn three_point_lists_on_small_chain(y in prop::collection::vec(-5.0f64..5.0, 2)) {
        let c = build_chain(3, 2, &[0, 1, 2], 1.0).unwrap();
        let d = ListDecoder::from_chain(&c, 0, 1, 2).unwrap();
        prop_assert_eq!(d.decode(&y).unwrap().len(), 3);
    }
}

#[test]
fn transmitted_power_matches_second_moment() {
    let c = build_chain(3, 2, &[1, 2], 1.0).unwrap();
    let (coarse, fine) = (c.lattice(0), c.lattice(1));
    let cb = latlist::enumerate_codebook(coarse, fine).unwrap();
    let m = 100_000u64;
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let powers: Vec<f64> = (0..m)
        .map(|_| {
            let t = cb.point(rng.random_range(1..=cb.len()));
            let u = coarse.sample_uniform_voronoi(&mut rng);
            let x = encode_dithered(t, &u, coarse).unwrap();
            x.iter().map(|v| v * v).sum::<f64>() / 2.0
        })
        .collect();
    let mean = powers.iter().sum::<f64>() / m as f64;
    let var = powers.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = (var / m as f64).sqrt();
    let reference = coarse.second_moment(100_000, 17).unwrap();
    let combined = (se * se + reference.std_error * reference.std_error).sqrt();
    assert!((mean - reference.value).abs() < 3.0 * combined, "{mean} vs {}", reference.value);
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn transmitted_signal_is_independent_of_codeword() {
    let c = build_chain(3, 2, &[1, 2], 1.0).unwrap();
    let (coarse, fine) = (c.lattice(0), c.lattice(1));
    let cb = latlist::enumerate_codebook(coarse, fine).unwrap();
    let m = 20_000;
    let draw = |message: usize, seed: u64| -> Vec<Vec<f64>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| {
                let u = coarse.sample_uniform_voronoi(&mut rng);
                encode_dithered(cb.point(message), &u, coarse).unwrap()
            })
            .collect()
    };
    let a = draw(1, 100);
    let b = draw(cb.len(), 200);
    // 1% critical value of the two-sample statistic
    let critical = 1.628 * ((2 * m) as f64 / (m * m) as f64).sqrt();
    for i in 0..2 {
        let d = ks_statistic(a.iter().map(|x| x[i]).collect(), b.iter().map(|x| x[i]).collect());
        assert!(d < critical, "coordinate {i}: D = {d}, critical {critical}");
    }
}

#[test]
fn error_rate_falls_as_list_region_grows() {
    let c = build_chain(3, 4, &[0, 2, 3, 4], 1.0).unwrap();
    let awgn = AwgnParams::new(0.75, 0.05).unwrap();
    let stats: Vec<_> = [3usize, 2, 1]
        .iter()
        .map(|&list| {
            let d = ListDecoder::from_chain(&c, 0, list, 3).unwrap();
            simulate_p2p(&d, &awgn, 10_000, 5).unwrap()
        })
        .collect();
    for s in &stats {
        assert_eq!(s.list_size_deviations, 0);
        assert_eq!(s.event_mismatches, 0);
    }
    assert!(stats[0].errors.errors > 0, "regime too easy to show a trend");
    for w in stats.windows(2) {
        assert!(non_increasing_within(&w[0].errors, &w[1].errors, 2.0), "{:?} then {:?}", w[0].errors, w[1].errors);
    }
}

#[test]
fn p2p_runs_are_reproducible() {
    let c = build_chain(5, 2, &[0, 1, 2], 1.0).unwrap();
    let d = ListDecoder::from_chain(&c, 0, 1, 2).unwrap();
    let awgn = AwgnParams::new(2.0, 0.6).unwrap();
    let a = simulate_p2p(&d, &awgn, 2_000, 9).unwrap();
    let b = simulate_p2p(&d, &awgn, 2_000, 9).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.csv_row(), b.csv_row());
    assert_eq!(a.event_mismatches, 0);
}

#[test]
fn mmse_noise_variance() {
    let coarse = build_chain(3, 2, &[0], 1.0).unwrap().lattice(0).clone();
    let power = coarse.exact_second_moment().unwrap();
    let noise = 0.4;
    let alpha = power / (power + noise);
    let m = 100_000u64;
    let samples: Vec<f64> = (0..m)
        .map(|i| {
            let mut rng = trial_rng(77, i);
            let u = coarse.sample_uniform_voronoi(&mut rng);
            let x = encode_dithered(&[0.0, 0.0], &u, &coarse).unwrap();
            let z = gaussian_vector(&mut rng, 2, noise);
            effective_noise(&x, &z, alpha).iter().map(|v| v * v).sum::<f64>() / 2.0
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / m as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = (var / m as f64).sqrt();
    let expect = power * noise / (power + noise);
    assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect} (se {se})");
}
