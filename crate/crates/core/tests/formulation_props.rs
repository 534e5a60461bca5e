mod common;

use std::collections::BTreeMap;

use phasealloc::formulation::{read_solution, write_lp, write_solution, ConstraintTag, Relation, VarKind};
use phasealloc::network::{Network, PhaseSet};
use phasealloc::synthetic::random_assignment;
use phasealloc::{build_model, fix_assignment, fixtures, solve_lp, solve_mip, Assignment, CaseConfig, FormulationError, LpStatus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Closed-form model size counted straight from the feeder data.
fn expected_census(net: &Network) -> (usize, usize, BTreeMap<ConstraintTag, usize>) {
    let mut vars = 0;
    let mut rows = BTreeMap::new();
    let mut bump = |tag, n: usize| *rows.entry(tag).or_insert(0) += n;
    for bus in net.buses() {
        let k = bus.phases.len();
        vars += 5 * k + 1;
        for tag in [ConstraintTag::InjectionCapP, ConstraintTag::InjectionCapQ, ConstraintTag::PowerFactor, ConstraintTag::AbsAbove, ConstraintTag::AbsBelow] {
            bump(tag, k);
        }
        for tag in [ConstraintTag::TotalP, ConstraintTag::TotalQ, ConstraintTag::PhaseCap, ConstraintTag::PhaseFloor, ConstraintTag::MeanVoltage] {
            bump(tag, 1);
        }
    }
    for line in net.lines() {
        let k = net.bus(net.bus_index(&line.to).unwrap()).phases.len();
        vars += 2 * k;
        for tag in [ConstraintTag::Consistency, ConstraintTag::BalanceP, ConstraintTag::BalanceQ, ConstraintTag::VoltageDrop] {
            bump(tag, k);
        }
    }
    let binaries = net.buses().iter().map(|b| b.phases.len()).sum();
    (vars, binaries, rows)
}

#[test]
fn fixture_census_matches_closed_form() {
    for (name, net) in fixtures::all() {
        let m = build_model(&net, &CaseConfig::default().with_band(net.voltage_band())).unwrap();
        let (vars, bins, rows) = expected_census(&net);
        let c = m.census();
        assert_eq!(c.variables, vars, "{name}");
        assert_eq!(c.binaries, bins, "{name}");
        assert_eq!(c.rows_by_tag, rows, "{name}");
        assert_eq!(c.constraints, rows.values().sum::<usize>(), "{name}");
    }
}

#[test]
fn consistency_rows_of_example_tree() {
    let net = common::consistency_example();
    let m = build_model(&net, &CaseConfig::default()).unwrap();
    let mut pairs: Vec<(String, String)> = m
        .constraints_tagged(ConstraintTag::Consistency)
        .map(|c| {
            assert_eq!(c.relation, Relation::Ge);
            let hi = m.meta[c.terms[0].0].unwrap().bus;
            let lo = m.meta[c.terms[1].0].unwrap().bus;
            assert_eq!((c.terms[0].1, c.terms[1].1), (1.0, -1.0));
            (net.bus(hi).id.clone(), net.bus(lo).id.clone())
        })
        .collect();
    pairs.sort();
    pairs.dedup();
    let mut expected: Vec<(String, String)> = [(4, 7), (4, 8), (2, 4), (1, 2), (1, 3), (0, 1), (6, 9), (6, 10), (3, 5), (3, 6)]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    expected.sort();
    assert_eq!(pairs, expected);
    assert_eq!(m.constraints_tagged(ConstraintTag::Consistency).count(), 30);
}

#[test]
fn inconsistent_assignment_is_rejected() {
    let net = common::consistency_example();
    let m = build_model(&net, &CaseConfig::default()).unwrap();
    let mut a = Assignment::base(&net);
    a.sets[net.bus_index("3").unwrap()] = "a".parse().unwrap();
    assert!(matches!(fix_assignment(&m, &net, &a), Err(FormulationError::AssignmentInconsistent { .. })));
    let mut a = Assignment::base(&net);
    a.sets[net.source()] = "ab".parse().unwrap();
    assert!(fix_assignment(&m, &net, &a).is_err());
}

#[test]
fn base_assignment_lp_reproduces_case_one() {
    let net = fixtures::ieee13();
    let cfg = CaseConfig::case(1).with_band(net.voltage_band());
    let m = build_model(&net, &cfg).unwrap();
    let lp = solve_lp(&fix_assignment(&m, &net, &Assignment::base(&net)).unwrap());
    assert_eq!(lp.status, LpStatus::Optimal);
    let mip = solve_mip(&m, &cfg);
    assert!((lp.objective - mip.objective).abs() < 1e-6, "{} vs {}", lp.objective, mip.objective);
}

#[test]
fn lp_export_lists_every_row_and_variable() {
    let net = fixtures::ieee13();
    let m = build_model(&net, &CaseConfig::default().with_band(net.voltage_band())).unwrap();
    let text = write_lp(&m);
    assert!(text.starts_with("\\ "));
    assert!(text.trim_end().ends_with("End"));
    for c in &m.constraints {
        assert!(text.contains(&format!(" {}:", c.name)), "missing row {}", c.name);
    }
    let section = |from: &str, to: &str| {
        let s = text.find(from).unwrap() + from.len();
        let e = text.find(to).unwrap();
        text[s..e].to_string()
    };
    assert_eq!(section("Bounds\n", "Binaries\n").lines().count(), m.variables.len());
    let bins: usize = section("Binaries\n", "End").split_whitespace().count();
    assert_eq!(bins, m.binaries().count());
}

#[test]
fn external_solution_round_trip() {
    let net = fixtures::ieee13();
    let cfg = CaseConfig::default().with_band(net.voltage_band());
    let m = build_model(&net, &cfg).unwrap();
    let x = solve_mip(&m, &cfg).incumbent.unwrap();
    let back = read_solution(&m, &write_solution(&m, &x)).unwrap();
    assert_eq!(back, x);
    assert!(read_solution(&m, "nope 1.0").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn census_matches_closed_form(net in common::feeder(25)) {
        let m = build_model(&net, &CaseConfig::case(3)).unwrap();
        let (vars, bins, rows) = expected_census(&net);
        let c = m.census();
        prop_assert_eq!(c.variables, vars);
        prop_assert_eq!(c.binaries, bins);
        prop_assert_eq!(c.rows_by_tag, rows);
        prop_assert!(m.variables.iter().filter(|v| v.kind == VarKind::Binary).all(|v| v.upper == 1.0 && (v.lower == 0.0 || v.lower == 1.0)));
        let roles: Vec<&str> = c.vars_by_role.keys().copied().collect();
        for r in roles {
            prop_assert!(["xi", "p", "q", "pf", "qf", "v", "vm", "t"].contains(&r));
        }
    }

    #[test]
    fn scaling_loads_keeps_structure(net in common::feeder(15), k in 0.1f64..10.0) {
        let mut scaled = net.data().clone();
        for b in &mut scaled.buses {
            b.load_p = b.load_p.map(|v| v * k);
            b.load_q = b.load_q.map(|v| v * k);
        }
        let scaled = Network::new(scaled).unwrap();
        let cfg = CaseConfig::case(2);
        let a = build_model(&net, &cfg).unwrap();
        let b = build_model(&scaled, &cfg).unwrap();
        prop_assert_eq!(a.constraints.len(), b.constraints.len());
        for (ra, rb) in a.constraints.iter().zip(&b.constraints) {
            prop_assert_eq!(&ra.name, &rb.name);
            let ja: Vec<usize> = ra.terms.iter().map(|t| t.0).collect();
            let jb: Vec<usize> = rb.terms.iter().map(|t| t.0).collect();
            prop_assert_eq!(ja, jb);
            match ra.tag {
                ConstraintTag::InjectionCapP | ConstraintTag::InjectionCapQ => {
                    for (ta, tb) in ra.terms.iter().zip(&rb.terms).skip(1) {
                        prop_assert!((tb.1 - k * ta.1).abs() <= 1e-12 * tb.1.abs().max(1.0));
                    }
                }
                ConstraintTag::TotalP | ConstraintTag::TotalQ => {
                    prop_assert!((rb.rhs - k * ra.rhs).abs() <= 1e-12 * rb.rhs.abs().max(1.0));
                }
                _ => prop_assert_eq!(&ra.terms, &rb.terms),
            }
        }
        for (va, vb) in a.variables.iter().zip(&b.variables) {
            prop_assert_eq!(va.kind, vb.kind);
        }
    }

    #[test]
    fn zero_alpha_objective_counts_phases(net in common::feeder(15)) {
        let m = build_model(&net, &CaseConfig::default().with_alpha(0.0)).unwrap();
        for v in &m.variables {
            let expect = if v.kind == VarKind::Binary { 1.0 } else { 0.0 };
            prop_assert_eq!(v.objective, expect);
        }
    }

    #[test]
    fn fixed_lp_never_beats_the_mip(seed in any::<u64>()) {
        let net = phasealloc::synthetic::seeded_feeder(seed, 5);
        let cfg = CaseConfig::case(2).with_band(net.voltage_band());
        let m = build_model(&net, &cfg).unwrap();
        let mip = solve_mip(&m, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let a = random_assignment(&mut rng, &net);
            let lp = solve_lp(&fix_assignment(&m, &net, &a).unwrap());
            if lp.status == LpStatus::Optimal {
                prop_assert!(lp.objective >= mip.objective - 1e-6, "{} < {}", lp.objective, mip.objective);
            }
        }
    }

    #[test]
    fn phase_floor_rows_reflect_demand(net in common::feeder(15)) {
        let m = build_model(&net, &CaseConfig::case(1)).unwrap();
        for c in m.constraints_tagged(ConstraintTag::PhaseFloor) {
            let bus = net.bus(m.meta[c.terms[0].0].unwrap().bus);
            let loaded = PhaseSet::from_mask(
                bus.phases.iter().filter(|ph| bus.load_p[ph.index()] > 0.0).fold(0, |acc, ph| acc | (1 << ph.index())),
            );
            // With unit capacity every loaded phase is needed, and at least one phase is always kept.
            let expect = if bus.is_source { bus.phases.len() } else { loaded.len().max(1) };
            prop_assert_eq!(c.rhs as usize, expect);
        }
    }
}
