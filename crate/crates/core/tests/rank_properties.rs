use std::sync::Arc;

use pidp_core::dynamics::{Params, State};
use pidp_core::liealg::{Family, TaylorField};
use pidp_core::rank::{
    bracket_generating_verdict, classify_family, classify_stratum, escape_test, find_gamma_points,
    lie_rank, rescaled_family, sweep, RankError, StratumLabel, SweepSpec, VerdictKind,
    DEFAULT_ESCAPE_HORIZON, DEFAULT_ESCAPE_STEPS, DEFAULT_RANK_TOL, DEFAULT_STRATUM_TOL,
};
use pidp_core::sim::{compose_flows, FlowMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn generic_points_reach_full_rank() {
    let p = Params::unit(9.81);
    let report = sweep(&p, &SweepSpec::random(10_000, 42));
    assert_eq!(report.counts.total(), 10_000);
    assert!(report.defects.is_empty());
    assert!(report.counts.generic > 9_000);
    assert_eq!(report.fraction_rank4_generic, Some(1.0));
    let v = bracket_generating_verdict(&report).unwrap();
    assert_eq!(v.verdict, VerdictKind::Supported);
}

#[test]
fn sweep_is_deterministic() {
    let p = Params::unit(9.81);
    let a = sweep(&p, &SweepSpec::random(300, 9));
    let b = sweep(&p, &SweepSpec::random(300, 9));
    assert_eq!(a, b);
    assert_eq!(a.rows, b.rows);
}

#[test]
fn rank_invariant_under_scaling_and_reordering() {
    let p = Params::unit(9.81);
    let fam = Family::pidp(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let z = State::new(
            rng.gen_range(-3.1..3.1),
            rng.gen_range(-3.1..3.1),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let base = lie_rank(&fam, &z, 2, DEFAULT_RANK_TOL).unwrap().rank;
        for index in 1..=4 {
            for factor in [1e-3, 1e3] {
                let scaled = rescaled_family(&fam, index, factor).unwrap();
                let r = lie_rank(&scaled, &z, 2, DEFAULT_RANK_TOL).unwrap().rank;
                assert_eq!(r, base, "X{index} scaled by {factor} at {z:?}");
            }
        }
        let mut members: Vec<Arc<dyn TaylorField>> = fam.members().to_vec();
        members.reverse();
        let r = lie_rank(&Family::new(members), &z, 2, DEFAULT_RANK_TOL)
            .unwrap()
            .rank;
        assert_eq!(r, base);
    }
}

#[test]
fn rank_is_monotone_in_depth() {
    let p = Params::new(0.7, 1.6, 1.1, 0.8, 9.81);
    let fam = Family::pidp(&p);
    // include points of Γ and Υ, where rank at depth 0 can be deficient
    let mut points = find_gamma_points(&p, [0.0, 0.0], 4, DEFAULT_STRATUM_TOL).unwrap();
    points.push(State::new(0.3, -0.2, 0.5, 0.1));
    points.push(State::new(1.0, 2.0, 0.0, 0.0));
    for z in points {
        let ranks: Vec<usize> = (0..=4)
            .map(|d| lie_rank(&fam, &z, d, DEFAULT_RANK_TOL).unwrap().rank)
            .collect();
        assert!(ranks.windows(2).all(|w| w[0] <= w[1]), "{ranks:?} at {z:?}");
        assert!(ranks.iter().all(|&r| r <= 4));
    }
}

#[test]
fn witness_words_have_the_reported_rank() {
    let p = Params::unit(9.81);
    let fam = Family::pidp(&p);
    let z = State::new(1.0, 2.0, 0.0, 0.0);
    let r = lie_rank(&fam, &z, 4, DEFAULT_RANK_TOL).unwrap();
    let vals: Vec<_> = r
        .witness_words
        .iter()
        .map(|w| pidp_core::liealg::evaluate_word_exact(w, &fam, &z, 4).unwrap())
        .collect();
    assert_eq!(pidp_core::rank::rank_of(&vals, DEFAULT_RANK_TOL), r.rank);
    assert_eq!(vals.len(), r.rank);
}

#[test]
fn gamma_points_and_escape() {
    let p = Params::unit(9.81);
    let pts = find_gamma_points(&p, [0.0, 0.0], 12, DEFAULT_STRATUM_TOL).unwrap();
    assert!(pts.len() >= 10, "found {}", pts.len());
    for z in &pts {
        let s = classify_stratum(&p, z, DEFAULT_STRATUM_TOL).unwrap();
        assert!(s.gamma_det.abs() <= DEFAULT_STRATUM_TOL * s.gamma_scale);
        assert!(s.label.on_gamma());
        let e = escape_test(
            &p,
            z,
            DEFAULT_ESCAPE_HORIZON,
            DEFAULT_ESCAPE_STEPS,
            DEFAULT_STRATUM_TOL,
        )
        .unwrap();
        assert!(e.escape_time.unwrap() <= DEFAULT_ESCAPE_HORIZON);
        assert!(e.gamma_det_increased);
        assert!(!e.final_label.on_gamma());
    }
}

#[test]
fn gamma_points_with_motion_are_gamma() {
    let p = Params::unit(9.81);
    let pts = find_gamma_points(&p, [0.4, -0.7], 3, DEFAULT_STRATUM_TOL).unwrap();
    for z in pts {
        let s = classify_stratum(&p, &z, DEFAULT_STRATUM_TOL).unwrap();
        assert_eq!(s.label, StratumLabel::Gamma);
    }
}

#[test]
fn escape_contracts() {
    let p = Params::unit(9.81);
    let generic = State::new(0.3, -0.2, 0.5, 0.1);
    assert!(matches!(
        escape_test(&p, &generic, 1.0, 10, DEFAULT_STRATUM_TOL),
        Err(RankError::ParameterMisuse(_))
    ));
    let z = find_gamma_points(&p, [0.0, 0.0], 1, DEFAULT_STRATUM_TOL).unwrap()[0];
    assert!(matches!(
        escape_test(&p, &z, 0.0, 10, DEFAULT_STRATUM_TOL),
        Err(RankError::NoEscapeWithinHorizon { .. })
    ));
}

#[test]
fn rank_constant_along_orbits() {
    let p = Params::unit(9.81);
    let fam = Family::pidp(&p);
    let z0 = State::new(0.3, -0.2, 0.5, 0.1);
    assert_eq!(
        classify_family(&fam, &z0, DEFAULT_STRATUM_TOL)
            .unwrap()
            .label,
        StratumLabel::Generic
    );
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let word: Vec<(usize, f64)> = (0..rng.gen_range(1..=3))
            .map(|_| (rng.gen_range(1..=4), rng.gen_range(-0.2..0.2)))
            .collect();
        let z = compose_flows(&p, z0, &word, 1e-3, FlowMode::Orbit).unwrap();
        assert_eq!(
            lie_rank(&fam, &z, 2, DEFAULT_RANK_TOL).unwrap().rank,
            4,
            "{word:?}"
        );
    }
}

#[test]
fn boundary_params_sweep_reports() {
    // equality in the third admissibility condition
    let p = Params::new(1.0, 1.0, 1.0, 2f64.sqrt(), 9.81);
    let report = sweep(&p, &SweepSpec::random(500, 42));
    assert_eq!(report.counts.total() + report.defects.len(), 500);
    assert!(bracket_generating_verdict(&report).is_ok());
}

#[test]
fn transversal_gamma_roots_escape() {
    // away from θ1 − θ2 ∈ {0, π} X4 is nonzero and Γ is a genuine tangency of X2, X4
    let p = Params::new(0.7, 1.6, 1.1, 0.8, 9.81);
    let pts = find_gamma_points(&p, [0.0, 0.0], 64, DEFAULT_STRATUM_TOL).unwrap();
    let transversal: Vec<_> = pts
        .iter()
        .filter(|z| (z.theta1 - z.theta2).sin().abs() > 0.1)
        .collect();
    assert!(transversal.len() >= 10, "{}", transversal.len());
    for z in transversal {
        let s = classify_stratum(&p, z, DEFAULT_STRATUM_TOL).unwrap();
        assert!(s.gamma_scale > 1.0);
        let e = escape_test(
            &p,
            z,
            DEFAULT_ESCAPE_HORIZON,
            DEFAULT_ESCAPE_STEPS,
            DEFAULT_STRATUM_TOL,
        )
        .unwrap();
        assert!(e.gamma_det_increased && !e.final_label.on_gamma());
    }
}
