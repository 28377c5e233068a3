use align_lab::counting::{cj_parameters, is_proper, symmetric_bound, tdma_baseline};
use align_lab::model::sample_channels;
use align_lab::verify::{leakage, normalize_gauge};
use align_lab::{substream, CMat, Channels, Cx, Exact, IaSolution, Solution, SystemConfig};
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, seed: u64, tag: u64) -> CMat<f64> {
    let mut rng = substream(seed, &[1000, tag]);
    CMat::from_fn(rows, cols, |_, _| Cx::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

fn small_config() -> impl Strategy<Value = SystemConfig> {
    (2usize..=4, 1usize..=4, any::<u64>()).prop_flat_map(|(k, n, seed)| {
        proptest::collection::vec(1..=n, k).prop_map(move |d| SystemConfig::generic(vec![n; k], d).with_seed(seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leakage_is_gauge_invariant(cfg in small_config(), s in any::<u64>()) {
        let ch: Channels = sample_channels(&cfg).unwrap();
        let sol = Solution::random(&cfg.signal_dims, &cfg.streams, &mut substream(s, &[1]));
        let mixed = IaSolution::new(
            sol.u.iter().enumerate().map(|(k, u)| u * gaussian(u.ncols(), u.ncols(), s, 10 + k as u64)).collect(),
            sol.v.iter().enumerate().map(|(k, v)| v * gaussian(v.ncols(), v.ncols(), s, 20 + k as u64)).collect(),
        ).unwrap();
        let base = leakage(&ch, &sol).unwrap();
        let again = leakage(&ch, &mixed).unwrap();
        prop_assert!((base - again).abs() <= 1e-9 * base.max(1.0), "{base} vs {again}");
    }

    #[test]
    fn normalize_gauge_preserves_leakage(cfg in small_config(), s in any::<u64>()) {
        let ch: Channels = sample_channels(&cfg).unwrap();
        let sol = Solution::random(&cfg.signal_dims, &cfg.streams, &mut substream(s, &[2]));
        let normed = normalize_gauge(&sol).unwrap();
        for (k, u) in normed.u.iter().enumerate() {
            let d = cfg.streams[k];
            prop_assert_eq!(u.rows(0, d).into_owned(), CMat::<f64>::identity(d, d));
        }
        let a = leakage(&ch, &sol).unwrap();
        let b = leakage(&ch, &normed).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn symmetric_properness_matches_closed_form(k in 2usize..=40, m in 1usize..=40, frac in 0.0f64..1.0) {
        let d = 1 + ((m - 1) as f64 * frac) as usize;
        let proper = is_proper(&SystemConfig::symmetric(k, m, d)).proper;
        let bound = symmetric_bound(m as u64, k as u64);
        prop_assert_eq!(proper, Exact::from_integer(BigInt::from(d)) <= bound);
        prop_assert_eq!(proper, d * (k + 1) <= 2 * m);
    }

    #[test]
    fn sampling_is_deterministic(cfg in small_config()) {
        let a: Channels = sample_channels(&cfg).unwrap();
        let b: Channels = sample_channels(&cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let c: Channels = sample_channels(&cfg.clone().with_seed(cfg.seed.wrapping_add(1))).unwrap();
        prop_assert_ne!(&a, &c);
    }

    #[test]
    fn channel_scaling_keeps_verdict(n in 1usize..=5, seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let inst = align_lab::Cj3::generate(n, seed).unwrap();
        let mut ch = inst.channels.clone();
        *ch.get_mut(0, 1) *= Cx::new(re, im);
        let r0 = align_lab::verify::check(&inst.channels, &inst.solution).unwrap();
        let r1 = align_lab::verify::check(&ch, &inst.solution).unwrap();
        prop_assert!(r0.passed());
        prop_assert_eq!(r0.aligned, r1.aligned);
    }
}

#[test]
fn bound_a_series_is_monotone_below_half_and_above_tdma() {
    let half = Exact::new(BigInt::from(1), BigInt::from(2));
    for k in 3..=6 {
        let tdma = tdma_baseline(k as u64).unwrap();
        let mut prev = Exact::from_integer(BigInt::from(0));
        for n in 1..=1000u64 {
            let p = cj_parameters(k, n).unwrap();
            assert!(p.normalized > prev, "K={k} n={n}");
            assert!(p.normalized < half, "K={k} n={n}");
            assert!(p.normalized > tdma, "K={k} n={n}");
            let gap = &half - &p.normalized;
            let envelope = Exact::new(BigInt::from(p.exponent), BigInt::from(2 * n));
            assert!(gap < envelope, "K={k} n={n}");
            prev = p.normalized;
        }
    }
}

#[test]
fn poly_counts_match_equation_and_variable_counts() {
    let cases = [
        SystemConfig::symmetric(2, 2, 1),
        SystemConfig::symmetric(3, 2, 1),
        SystemConfig::generic(vec![4, 3, 5], vec![2, 1, 2]),
        SystemConfig::diagonal(5, vec![3, 2, 2]),
        SystemConfig::block_diagonal(vec![2, 2, 2], 2, vec![1, 2, 1]),
    ];
    for cfg in cases {
        let ch: Channels = sample_channels(&cfg).unwrap();
        let sys = align_lab::poly::polynomial_system(&cfg, &ch).unwrap();
        let rep = is_proper(&cfg);
        assert_eq!(BigInt::from(sys.polynomials.len()), rep.equations, "{cfg:?}");
        assert_eq!(BigInt::from(sys.variables.len()), rep.variables, "{cfg:?}");
    }
}
