mod common;

use phasealloc::analysis::{audit, unbalance_csv};
use phasealloc::lin3distflow::PhasorState;
use phasealloc::network::{Bus, FeederData, Line, Network, Phase, PhaseSet};
use phasealloc::{fixtures, magnitude_metric, reassignment, solve_case, unbalance_metric, CaseConfig};
use proptest::prelude::*;

fn state_strategy() -> impl Strategy<Value = PhasorState> {
    prop::collection::vec((1u8..8, prop::array::uniform3(0.8f64..1.2)), 1..20).prop_map(|buses| {
        let phases: Vec<PhaseSet> = buses.iter().map(|(m, _)| PhaseSet::from_mask(*m)).collect();
        let v = buses
            .iter()
            .map(|(m, v)| {
                let set = PhaseSet::from_mask(*m);
                let mut out = [0.0; 3];
                for ph in set.iter() {
                    out[ph.index()] = v[ph.index()];
                }
                out
            })
            .collect();
        PhasorState { phases, v, p_flow: Vec::new(), q_flow: Vec::new() }
    })
}

fn permute(state: &PhasorState, perm: [usize; 3]) -> PhasorState {
    let map = |set: PhaseSet| set.iter().fold(PhaseSet::EMPTY, |s, ph| s.with(Phase::from_index(perm[ph.index()]).unwrap()));
    PhasorState {
        phases: state.phases.iter().map(|s| map(*s)).collect(),
        v: state
            .v
            .iter()
            .map(|v| {
                let mut out = [0.0; 3];
                for k in 0..3 {
                    out[perm[k]] = v[k];
                }
                out
            })
            .collect(),
        p_flow: Vec::new(),
        q_flow: Vec::new(),
    }
}

#[test]
fn hand_computed_bus_contribution() {
    let st = PhasorState { phases: vec![PhaseSet::ABC], v: vec![[1.00, 1.02, 1.04]], p_flow: vec![], q_flow: vec![] };
    let r = unbalance_metric(&st);
    assert!((r.v_mean[0] - 1.02).abs() < 1e-12);
    assert!((r.total_metric - 0.04).abs() < 1e-12);
}

#[test]
fn single_phase_buses_contribute_nothing() {
    let st = PhasorState { phases: vec!["b".parse().unwrap()], v: vec![[0.0, 0.93, 0.0]], p_flow: vec![], q_flow: vec![] };
    assert_eq!(unbalance_metric(&st).total_metric, 0.0);
    assert_eq!(magnitude_metric(&st).total_metric, 0.0);
}

#[test]
fn case_one_keeps_every_load() {
    let net = fixtures::ieee13();
    let run = solve_case(&net, &CaseConfig::case(1).with_band(net.voltage_band())).unwrap();
    let table = reassignment(&net, run.solution.as_ref().unwrap());
    assert!(table.changed_buses().is_empty());
    assert_eq!(table.rows.iter().map(|r| r.bus.as_str()).collect::<std::collections::BTreeSet<_>>().len(), 9);
    for r in &table.rows {
        assert!((r.original_kw - r.optimized_kw).abs() < 1e-6);
        assert!((r.original_kvar - r.optimized_kvar).abs() < 1e-6);
    }
}

#[test]
fn unloaded_feeder_has_empty_table() {
    let mut d = FeederData::new("idle", Bus::new("s", PhaseSet::ABC), 1000.0, 2.4);
    d.buses.push(Bus::new("n", PhaseSet::ABC));
    d.lines.push(Line { from: "s".into(), to: "n".into(), r: common::diag(0.1, PhaseSet::ABC), x: common::diag(0.2, PhaseSet::ABC) });
    let net = Network::new(d).unwrap();
    let run = solve_case(&net, &CaseConfig::default()).unwrap();
    let table = reassignment(&net, run.solution.as_ref().unwrap());
    assert!(table.rows.is_empty());
    assert_eq!(table.to_csv().lines().count(), 4);
}

#[test]
fn fixture_solutions_pass_the_audit() {
    for (name, net) in fixtures::all() {
        for case in 1..=3 {
            let run = solve_case(&net, &CaseConfig::case(case).with_band(net.voltage_band()).with_gap(1e-4)).unwrap();
            let sol = run.solution.unwrap();
            let a = audit(&net, &sol);
            assert!(a.conservation_ok(), "{name} case {case}: {a:?}");
            assert!(a.consistency_ok(), "{name} case {case}: {a:?}");
            assert!(a.voltage_residual < 1e-8, "{name} case {case}: {a:?}");
            let table = reassignment(&net, &sol);
            let (tp, tq) = net.total_load();
            for k in 0..3 {
                assert!((table.original_total.0[k] - tp[k]).abs() < 1e-9);
                assert!((table.original_total.1[k] - tq[k]).abs() < 1e-9);
            }
            let grand = |t: [f64; 3]| t.iter().sum::<f64>();
            assert!((grand(table.optimized_total.0) - grand(tp)).abs() < 1e-6);
            assert!((grand(table.optimized_total.1) - grand(tq)).abs() < 1e-6);
            let csv = unbalance_csv(&net, &sol.phasor_state(&net));
            assert_eq!(csv.lines().count(), net.bus_count() + 2);
        }
    }
}

proptest! {
    #[test]
    fn totals_are_sums_of_nonnegative_parts(st in state_strategy()) {
        for r in [unbalance_metric(&st), magnitude_metric(&st)] {
            prop_assert!(r.per_bus.iter().all(|v| *v >= 0.0));
            prop_assert!((r.total_metric - r.per_bus.iter().sum::<f64>()).abs() < 1e-15);
        }
    }

    #[test]
    fn metric_ignores_phase_labels(st in state_strategy(), which in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let a = unbalance_metric(&st).total_metric;
        let b = unbalance_metric(&permute(&st, perms[which])).total_metric;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn metric_ignores_per_bus_offsets(st in state_strategy(), offsets in prop::collection::vec(-0.1f64..0.1, 20)) {
        let mut shifted = st.clone();
        for (b, v) in shifted.v.iter_mut().enumerate() {
            for ph in st.phases[b].iter() {
                v[ph.index()] += offsets[b];
            }
        }
        let a = unbalance_metric(&st);
        let b = unbalance_metric(&shifted);
        for (x, y) in a.per_bus.iter().zip(&b.per_bus) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_phases_give_zero(vals in prop::collection::vec((1u8..8, 0.5f64..1.5), 1..10)) {
        let st = PhasorState {
            phases: vals.iter().map(|(m, _)| PhaseSet::from_mask(*m)).collect(),
            v: vals.iter().map(|(m, v)| {
                let mut out = [0.0; 3];
                for ph in PhaseSet::from_mask(*m).iter() {
                    out[ph.index()] = *v;
                }
                out
            }).collect(),
            p_flow: vec![],
            q_flow: vec![],
        };
        prop_assert_eq!(unbalance_metric(&st).total_metric, 0.0);
    }
}
