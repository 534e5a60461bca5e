#![allow(dead_code)]

use phasealloc::network::{Bus, FeederData, Line, Matrix3, Network, PhaseSet};
use phasealloc::synthetic;
use proptest::prelude::*;

pub fn diag(v: f64, phases: PhaseSet) -> Matrix3 {
    let mut m = [[0.0; 3]; 3];
    for i in phases.iter() {
        for j in phases.iter() {
            m[i.index()][j.index()] = if i == j { v } else { v / 3.0 };
        }
    }
    m
}

/// The eleven-node tree used to illustrate phase consistency: node 0 feeds 1,
/// 1 feeds 2 and 3, 2 feeds 4, 4 feeds 7 and 8, 3 feeds 5 and 6, 6 feeds 9 and 10.
pub fn consistency_example() -> Network {
    let edges = [(0, 1), (1, 2), (1, 3), (2, 4), (4, 7), (4, 8), (3, 5), (3, 6), (6, 9), (6, 10)];
    let mut d = FeederData::new("example", Bus::new("0", PhaseSet::ABC), 1000.0, 2.4);
    for k in 1..=10 {
        d.buses.push(Bus::new(k.to_string(), PhaseSet::ABC).with_load([20.0; 3], [5.0; 3]));
    }
    for (a, b) in edges {
        d.lines.push(Line {
            from: a.to_string(),
            to: b.to_string(),
            r: diag(0.05, PhaseSet::ABC),
            x: diag(0.1, PhaseSet::ABC),
        });
    }
    Network::new(d).unwrap()
}

pub fn feeder(max_buses: usize) -> impl Strategy<Value = Network> {
    any::<u64>().prop_map(move |seed| synthetic::seeded_feeder(seed, max_buses))
}

/// Independent breadth-first parent map built from the raw line list.
pub fn bfs_parents(net: &Network) -> Vec<Option<usize>> {
    let n = net.bus_count();
    let mut adj = vec![Vec::new(); n];
    for l in net.lines() {
        let a = net.bus_index(&l.from).unwrap();
        let b = net.bus_index(&l.to).unwrap();
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([net.source()]);
    seen[net.source()] = true;
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(u);
                queue.push_back(w);
            }
        }
    }
    parent
}
