mod common;

use common::{all_sequences, link, rng};
use ris_idbp::baselines::*;
use ris_idbp::metrics::{strictly_below, TIE_RTOL};
use ris_idbp::linalg::{cis, CMat, CVec};
use ris_idbp::metrics::Objective;
use ris_idbp::transceiver::DesignOptions;
use ris_idbp::Error;

#[test]
fn reference_space_is_fully_enumerated() {
    let l = link(12, 1);
    let leaf = l.leaf();
    let es = exhaustive_search(&leaf, 3, 12, DEFAULT_ES_CAP).unwrap();
    assert_eq!(es.evaluations, 531_441);
    assert_eq!(es.sequence.phases.len(), 12);
    assert!((leaf.eval(&es.sequence.phases) - es.objective).abs() <= 1e-12 * es.objective.abs());
}

#[test]
fn fast_scan_matches_plain_closure() {
    let l = link(8, 2);
    let leaf = l.leaf();
    let plain = |s: &[usize]| leaf.eval(s);
    let a = exhaustive_search(&leaf, 3, 8, DEFAULT_ES_CAP).unwrap();
    let b = exhaustive_search(&plain, 3, 8, DEFAULT_ES_CAP).unwrap();
    assert_eq!(a.sequence.phases, b.sequence.phases);
    assert!((a.objective - b.objective).abs() <= 1e-9 * b.objective.abs());
    let naive = all_sequences(3, 8)
        .into_iter()
        .map(|s| leaf.eval(&s))
        .fold(f64::INFINITY, f64::min);
    assert!((a.objective - naive).abs() <= 1e-9 * naive.abs());
}

#[test]
fn space_checks() {
    let f = |_: &[usize]| 0.0;
    assert!(matches!(
        exhaustive_search(&f, 3, 30, DEFAULT_ES_CAP),
        Err(Error::SpaceTooLarge { .. })
    ));
    assert!(matches!(exhaustive_search(&f, 3, 0, 10), Err(Error::InvalidConfig(_))));
    assert!(matches!(exhaustive_search(&f, 2, 4, 15), Err(Error::SpaceTooLarge { size: 16, cap: 15 })));
    assert_eq!(exhaustive_search(&f, 2, 4, 16).unwrap().evaluations, 16);
}

#[test]
fn nan_objective_ranks_last() {
    let f = |s: &[usize]| if s[0] == 0 { f64::NAN } else { s[1] as f64 };
    let r = exhaustive_search(&f, 2, 2, 100).unwrap();
    assert_eq!(r.sequence.phases, vec![1, 0]);
}

#[test]
fn rank_one_coupling_is_recovered() {
    let alphabet: Vec<f64> = [5.0f64, 125.0, 245.0].iter().map(|d| d.to_radians()).collect();
    let phasors: Vec<_> = alphabet.iter().map(|&t| cis(t)).collect();
    let target = [1usize, 0, 2, 2, 1, 0, 0, 1];
    let v = CVec::from_iterator(8, target.iter().map(|&p| phasors[p]));
    let z: CMat = &v * v.adjoint();
    let r = tmh_from_coupling(&z, &alphabet).unwrap();
    assert!((r.eigenvalue - 8.0).abs() < 1e-9);
    assert!((trace_form(&z, &r.sequence.phases, &phasors) - 64.0).abs() < 1e-9);
    let shift = (r.sequence.phases[0] + 3 - target[0]) % 3;
    for (got, want) in r.sequence.phases.iter().zip(target) {
        assert_eq!(*got, (want + shift) % 3);
    }
}

#[test]
fn power_iteration_on_diagonal() {
    let mut z = CMat::zeros(3, 3);
    z[(0, 0)] = 1.0.into();
    z[(1, 1)] = 5.0.into();
    z[(2, 2)] = 2.0.into();
    z[(0, 1)] = 0.1.into();
    z[(1, 0)] = 0.1.into();
    let (v, lambda) = principal_eigenvector(&z, 10_000, 1e-12).unwrap();
    assert!((lambda - (3.0 + 4.01f64.sqrt())).abs() < 1e-9);
    assert!(v[1].norm() > 0.99);
    let (_, zero) = principal_eigenvector(&CMat::zeros(2, 2), 10, 1e-9).unwrap();
    assert_eq!(zero, 0.0);
    assert!(principal_eigenvector(&CMat::zeros(2, 3), 10, 1e-9).is_err());
}

#[test]
fn quantizer_wraps_and_breaks_ties_low() {
    let alphabet = [0.0, std::f64::consts::PI];
    assert_eq!(quantize_angles(&[0.1, 3.0, -0.1, 6.2, std::f64::consts::FRAC_PI_2], &alphabet), vec![0, 1, 0, 0, 0]);
}

#[test]
fn coupling_form_matches_cascade_power() {
    let l = link(8, 3);
    let z = coupling_matrix(&l.channel, &l.set);
    let phasors: Vec<_> = l.cfg.phase_alphabet.iter().map(|&t| cis(t)).collect();
    let phases = [0, 1, 2, 0, 1, 2, 2, 1];
    let d = CVec::from_iterator(8, phases.iter().map(|&p| phasors[p]));
    let cascade = l.set.w() * &l.channel.p_mat * CMat::from_diagonal(&d) * &l.channel.r_mat * l.set.f();
    let direct: f64 = cascade.iter().map(|x| x.norm_sqr()).sum();
    assert!((trace_form(&z, &phases, &phasors) - direct).abs() <= 1e-9 * direct);
    assert!((z.adjoint() - &z).norm() <= 1e-9 * z.norm());
}

#[test]
fn heuristic_never_beats_exhaustive() {
    for seed in 0..4 {
        let l = link(8, 10 + seed);
        let leaf = l.leaf();
        let es = exhaustive_search(&leaf, 3, 8, DEFAULT_ES_CAP).unwrap();
        let t = tmh(&l.channel, &l.set, &l.cfg).unwrap();
        assert!(t.sequence.phases.iter().all(|&p| p < 3));
        assert!(leaf.eval(&t.sequence.phases) >= es.objective);
        let best_trace = tmh_exhaustive(&l.channel, &l.set, &l.cfg, DEFAULT_ES_CAP).unwrap();
        let z = coupling_matrix(&l.channel, &l.set);
        let phasors: Vec<_> = l.cfg.phase_alphabet.iter().map(|&t| cis(t)).collect();
        assert!(trace_form(&z, &t.sequence.phases, &phasors) <= -best_trace.objective * (1.0 + 1e-12));
    }
}

#[test]
fn zero_phases_pick_nearest_entry() {
    let l = link(12, 0);
    assert_eq!(zero_phases(&l.cfg), vec![1; 12]);
}

#[test]
fn first_alternating_variant_is_monotone_and_converges() {
    let l = link(8, 20);
    let opts = DesignOptions::default();
    let init = ao1_init(&l.channel, &l.cfg, opts).unwrap();
    let r = alternating_opt(&l.channel, &l.cfg, init, 1e-6, 50, opts).unwrap();
    assert!(r.converged);
    assert!(r.rounds <= 50);
    assert_eq!(r.mse_history.len(), r.rounds + 1);
    assert!(r.mse_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.phases.phases.iter().all(|&p| p < 3));
    let end = *r.mse_history.last().unwrap();
    assert!((ao_loss(&l.channel, &r.transceivers, &l.cfg, &r.phases.phases).unwrap() - end).abs() <= 1e-9 * end);

    let again = alternating_opt(
        &l.channel,
        &l.cfg,
        AoInit {
            transceivers: r.transceivers.clone(),
            phases: r.phases.phases.clone(),
        },
        1e-6,
        50,
        opts,
    )
    .unwrap();
    assert!(again.converged);
    assert_eq!(again.rounds, 1);
}

#[test]
fn second_alternating_variant_is_monotone() {
    let l = link(8, 21);
    let opts = DesignOptions::default();
    let init = ao2_init(&l.channel, &l.cfg, opts, &mut rng(4)).unwrap();
    let start = ao_loss(&l.channel, &init.transceivers, &l.cfg, &init.phases).unwrap();
    let r = alternating_opt(&l.channel, &l.cfg, init, 1e-6, 50, opts).unwrap();
    assert_eq!(r.mse_history[0], start);
    assert!(r.mse_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.converged);
    assert!(r.loss_evaluations > r.rounds * 8 * 2);
}

#[test]
fn alternating_rejects_bad_tolerance() {
    let l = link(8, 22);
    let opts = DesignOptions::default();
    let init = ao1_init(&l.channel, &l.cfg, opts).unwrap();
    assert!(matches!(
        alternating_opt(&l.channel, &l.cfg, init, 0.0, 5, opts),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn round_cap_stops_early() {
    let l = link(8, 23);
    let opts = DesignOptions::default();
    let init = ao2_init(&l.channel, &l.cfg, opts, &mut rng(5)).unwrap();
    let r = alternating_opt(&l.channel, &l.cfg, init, 1e-300, 1, opts).unwrap();
    assert_eq!(r.rounds, 1);
    assert_eq!(r.mse_history.len(), 2);
}

#[test]
fn near_ties_go_to_the_lower_index() {
    let f = |s: &[usize]| match s[0] {
        0 => 1.0 + 0.1 * TIE_RTOL,
        1 => 1.0,
        _ => 2.0,
    };
    assert_eq!(exhaustive_search(&f, 3, 1, 10).unwrap().sequence.phases, vec![0]);
    let g = |s: &[usize]| if s[0] == 0 { 1.0 + 10.0 * TIE_RTOL } else { 1.0 };
    assert_eq!(exhaustive_search(&g, 3, 1, 10).unwrap().sequence.phases, vec![1]);
    assert!(!strictly_below(1.0, 1.0));
    assert!(strictly_below(-1.0, 0.0));
}
