use std::collections::HashMap;

use align_lab::counting::{cj_parameters, is_proper, min_improper_n, sparse_dim_deficit};
use align_lab::linalg::numerical_rank;
use align_lab::model::sample_channels;
use align_lab::poly::{gauge_assignment, polynomial_system, PolynomialSystem};
use align_lab::probe::{build_p_matrix, channels_from_vector, draw_beams, probe_draw, run_probe};
use align_lab::solve::{classify, minimize_leakage, replay};
use align_lab::verify::{check, leakage, normalize_gauge};
use align_lab::{cj3, Channels, Classification, Cx, SolverOptions, SystemConfig};
use num_bigint::BigInt;

#[test]
fn generic_p_has_full_row_rank() {
    let cases = [
        SystemConfig::symmetric(3, 2, 1),
        SystemConfig::generic(vec![3, 4, 3], vec![1, 2, 1]),
        SystemConfig::symmetric(4, 3, 1),
    ];
    for cfg in cases {
        let n_e = cfg.cross_pairs().map(|(j, k)| cfg.streams[j] * cfg.streams[k]).sum::<usize>();
        let dim = cfg.free_entry_count(false);
        for seed in 0..100 {
            let (beams, basis) = probe_draw::<f64>(&cfg, seed, 0).unwrap();
            let p = build_p_matrix(&cfg, &beams).unwrap();
            assert_eq!(numerical_rank(&p, None), n_e, "{cfg:?} seed {seed}");
            assert_eq!(basis.ncols(), dim - n_e);
        }
    }
}

/// Generic nullity of a diagonal configuration: each ordered pair is an
/// independent Khatri-Rao block of rank `min(d_j d_k, N_s)`.
fn diagonal_nullity(cfg: &SystemConfig) -> usize {
    let ns = cfg.signal_dims[0];
    cfg.cross_pairs().map(|(j, k)| ns.saturating_sub(cfg.streams[j] * cfg.streams[k])).sum()
}

#[test]
fn diagonal_nullity_matches_blockwise_count() {
    let cases = [
        SystemConfig::diagonal(3, vec![2, 1, 1]),
        SystemConfig::diagonal(5, vec![3, 2, 2]),
        SystemConfig::diagonal(3, vec![3, 3, 1, 1]),
        SystemConfig::diagonal(4, vec![1, 1, 1, 1]),
    ];
    for cfg in cases {
        for seed in 0..10 {
            let (_, basis) = probe_draw::<f64>(&cfg, seed, 0).unwrap();
            assert_eq!(basis.ncols(), diagonal_nullity(&cfg), "{cfg:?}");
        }
    }
}

#[test]
fn overdetermined_diagonal_blocks_have_no_solutions() {
    for cfg in [SystemConfig::diagonal(2, vec![2, 2, 1]), SystemConfig::diagonal(3, vec![2, 2, 2])] {
        assert!(sparse_dim_deficit(&cfg) > BigInt::from(0));
        let r = run_probe::<f64>(&cfg, 32, 5).unwrap();
        assert_eq!(r.nontrivial_draws, 0, "{cfg:?}");
        assert_eq!(r.span_rank, 0);
    }
    // A positive deficit alone does not force zero nullity.
    let cfg = SystemConfig::diagonal(3, vec![3, 3, 1, 1]);
    assert!(sparse_dim_deficit(&cfg) > BigInt::from(0));
    assert_eq!(diagonal_nullity(&cfg), 4);
}

#[test]
fn probe_is_deterministic_and_monotone() {
    let cfg = SystemConfig::generic(vec![3, 3, 3], vec![1, 1, 2]);
    let a = run_probe::<f64>(&cfg, 10, 9).unwrap();
    let b = run_probe::<f64>(&cfg, 10, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.span_rank_trajectory.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn probe_combinations_align_with_their_beams() {
    let cfg = SystemConfig::diagonal(5, vec![3, 2, 2]);
    for index in 0..5 {
        let beams = draw_beams::<f64>(&cfg, 3, index);
        let (_, basis) = probe_draw::<f64>(&cfg, 3, index).unwrap();
        let weights: Vec<Cx<f64>> = (0..basis.ncols()).map(|c| Cx::new(1.0 + c as f64, -(c as f64) * 0.5)).collect();
        let h = &basis * nalgebra::DVector::from_vec(weights);
        let ch = channels_from_vector(&cfg, h.as_slice()).unwrap();
        assert!(leakage(&ch, &beams).unwrap() <= 1e-8);
    }
}

#[test]
fn polynomial_round_trip_at_solver_solution() {
    let cfg = SystemConfig::symmetric(3, 2, 1).with_seed(11);
    let ch: Channels = sample_channels(&cfg).unwrap();
    let run = minimize_leakage(&ch, &cfg.streams, &SolverOptions::default()).unwrap();
    assert!(run.final_leakage() < 1e-8);

    let text = polynomial_system(&cfg, &ch).unwrap().to_text();
    let sys = PolynomialSystem::parse(&text).unwrap();
    assert_eq!(sys.polynomials.len(), 6);
    assert_eq!(sys.variables.len(), 6);
    let values: HashMap<String, Cx<f64>> = gauge_assignment(&run.solution).unwrap();
    let residuals = sys.evaluate(&values).unwrap();

    let g = normalize_gauge(&run.solution).unwrap();
    let mut expected = Vec::new();
    for (j, k) in cfg.cross_pairs() {
        let m = g.u[j].adjoint() * ch.get(j, k) * &g.v[k];
        for a in 0..m.nrows() {
            for b in 0..m.ncols() {
                expected.push(m[(a, b)]);
            }
        }
    }
    assert_eq!(residuals.len(), expected.len());
    for (r, e) in residuals.iter().zip(&expected) {
        assert!((r - e).norm() < 1e-10, "{r} vs {e}");
    }
    let sq: f64 = residuals.iter().map(|z| z.norm_sqr()).sum();
    assert!(sq < 1e-6);
}

#[test]
fn three_user_scheme_is_always_proper_and_matches_bound_a() {
    for n in 1..=1000u64 {
        let p = cj_parameters(3, n).unwrap();
        assert!(p.properness().proper, "n={n}");
        assert_eq!(cj3::cj3_normalized_dof(n as usize), p.normalized);
    }
    for n in 1..=8 {
        assert!(is_proper(&cj3::cj3_config(n, 0).unwrap()).proper);
    }
    assert_eq!(min_improper_n(3, 1000).unwrap(), None);
    for k in 4..=8 {
        assert!(min_improper_n(k, 100).unwrap().is_some(), "K={k}");
    }
}

#[test]
fn construction_in_single_precision() {
    let inst = cj3::Cj3Instance::<f32>::generate(2, 4).unwrap();
    let r = check(&inst.channels, &inst.solution).unwrap();
    assert!(r.rank_ok);
    assert!(r.leakage < 1e-8, "{}", r.leakage);
}

#[test]
fn zero_channel_entry_is_rejected() {
    let inst = align_lab::Cj3::generate(2, 1).unwrap();
    let mut ch = inst.channels.clone();
    ch.get_mut(1, 2)[(3, 3)] = Cx::new(0.0, 0.0);
    let err = cj3::construct(&ch, 2).unwrap_err();
    assert!(matches!(err, align_lab::Error::SingularChannel { rx: 1, tx: 2, slot: 3 }));
    assert!(err.is_numerical());
}

#[test]
fn witness_keeps_diagonal_layout_feasible() {
    let cfg = SystemConfig::diagonal(3, vec![2, 1, 1]);
    let opts = SolverOptions {
        trials: 4,
        ..SolverOptions::default()
    };
    let v = classify::<f64>(&cfg, &opts).unwrap();
    assert!(v.witness_found);
    assert_eq!(v.classification, Classification::LikelyFeasible);
    assert_eq!(v, classify::<f64>(&cfg, &opts).unwrap());
}

#[test]
fn feasible_verdict_best_run_replays_and_verifies() {
    let cfg = SystemConfig::symmetric(3, 2, 1);
    let opts = SolverOptions {
        trials: 8,
        ..SolverOptions::default()
    };
    let v = classify::<f64>(&cfg, &opts).unwrap();
    assert_eq!(v.classification, Classification::LikelyFeasible);
    let (ch, run) = replay::<f64>(&cfg, &opts, v.best_run.0, v.best_run.1).unwrap();
    assert_eq!(run.final_leakage(), v.best_leakage);
    assert!(check(&ch, &run.solution).unwrap().passed());
}
