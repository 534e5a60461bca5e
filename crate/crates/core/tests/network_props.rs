mod common;

use std::collections::BTreeSet;

use phasealloc::network::{parse_feeder, serialize_feeder, Line, NetworkError, Violation};
use phasealloc::{fixtures, validate};
use proptest::prelude::*;

#[test]
fn example_tree_children() {
    let net = common::consistency_example();
    assert_eq!(net.children("3").unwrap(), vec!["5", "6"]);
    assert_eq!(net.children("4").unwrap(), vec!["7", "8"]);
    assert_eq!(net.children("1").unwrap(), vec!["2", "3"]);
    assert!(net.children("10").unwrap().is_empty());
    assert!(matches!(net.children("11"), Err(NetworkError::UnknownBus(_))));
}

#[test]
fn children_are_sorted_by_id() {
    let net = fixtures::ieee123();
    for b in net.buses() {
        let kids = net.children(&b.id).unwrap();
        let mut sorted = kids.clone();
        sorted.sort();
        assert_eq!(kids, sorted);
    }
}

#[test]
fn fixtures_validate_cleanly() {
    for (name, net) in fixtures::all() {
        let report = validate(net.data());
        assert!(report.is_valid(), "{name}: {report}");
    }
}

#[test]
fn extra_line_on_fixture_is_one_radiality_violation() {
    let mut data = fixtures::ieee13().into_data();
    let first = data.lines[3].clone();
    data.lines.push(Line {
        from: first.from.clone(),
        to: data.lines[7].to.clone(),
        ..first
    });
    let report = validate(&data);
    assert_eq!(report.radiality_count(), 1, "{report}");
}

#[test]
fn parse_error_for_unknown_line_end() {
    let text = "[feeder]\nname = \"x\"\nbase_kva = 1000.0\nbase_kv = 2.4\nsource = \"s\"\n\n[[bus]]\nid = \"s\"\nphases = \"abc\"\n\n[[line]]\nfrom = \"s\"\nto = \"q\"\nr = [[0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.1]]\nx = [[0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.1]]\n";
    match parse_feeder(text) {
        Err(NetworkError::Invalid(report)) => {
            assert!(report.violations.iter().any(|v| matches!(v, Violation::UnknownBus { .. })), "{report}")
        }
        other => panic!("expected an invalid feeder, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn child_sets_partition_non_source_buses(net in common::feeder(20)) {
        let parents = common::bfs_parents(&net);
        let mut seen = BTreeSet::new();
        for b in 0..net.bus_count() {
            for &c in net.child_indices(b) {
                prop_assert!(seen.insert(c), "bus {c} is a child twice");
                prop_assert_eq!(parents[c], Some(b));
            }
        }
        let expected: BTreeSet<usize> = (0..net.bus_count()).filter(|&b| b != net.source()).collect();
        prop_assert_eq!(seen, expected);
    }

    #[test]
    fn children_are_antisymmetric(net in common::feeder(20)) {
        for a in net.buses() {
            for b in net.children(&a.id).unwrap() {
                prop_assert!(!net.children(b).unwrap().contains(&a.id.as_str()));
            }
        }
    }

    #[test]
    fn source_subtrees_cover_the_feeder(net in common::feeder(20)) {
        let src = net.source();
        let mut covered = BTreeSet::from([src]);
        for &c in net.child_indices(src) {
            covered.insert(c);
            covered.extend(net.descendants(c));
        }
        prop_assert_eq!(covered.len(), net.bus_count());
    }

    #[test]
    fn serialize_then_parse_is_identity(net in common::feeder(15)) {
        let text = serialize_feeder(net.data());
        let again = parse_feeder(&text).unwrap();
        prop_assert_eq!(again.data(), net.data());
    }

    #[test]
    fn validated_feeders_keep_phase_consistency(net in common::feeder(20)) {
        for b in 0..net.bus_count() {
            if let Some(p) = net.parent(b) {
                prop_assert!(net.bus(b).phases.is_subset(net.bus(p).phases));
            }
        }
        prop_assert_eq!(net.lines().len() + 1, net.bus_count());
    }
}
