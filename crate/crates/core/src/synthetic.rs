//! Seeded random radial feeders for property tests and benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formulation::Assignment;
use crate::network::{Bus, FeederData, Line, Matrix3, Network, PhaseSet};

/// Phase impedance of a typical 4.16 kV overhead line, ohm per mile.
const R_PER_MILE: Matrix3 = [[0.3465, 0.1560, 0.1580], [0.1560, 0.3375, 0.1535], [0.1580, 0.1535, 0.3414]];
const X_PER_MILE: Matrix3 = [[1.0179, 0.5017, 0.4236], [0.5017, 1.0478, 0.3849], [0.4236, 0.3849, 1.0348]];

fn restrict(m: &Matrix3, phases: PhaseSet, miles: f64) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for i in phases.iter() {
        for j in phases.iter() {
            out[i.index()][j.index()] = m[i.index()][j.index()] * miles;
        }
    }
    out
}

/// A random radial feeder with `n_buses` buses (the source included).
///
/// Phase sets shrink or stay the same going downstream, about three in four
/// present phases carry a load with `q <= p`, and line lengths are short
/// enough that the base configuration stays inside the voltage band.
pub fn random_feeder<R: Rng>(rng: &mut R, n_buses: usize, name: &str) -> Network {
    assert!(n_buses >= 1, "a feeder has at least its source");
    let mut data = FeederData::new(name, Bus::new("b0", PhaseSet::ABC), 1000.0, 2.4);
    data.voltage_band = Some((0.64, 1.1025));
    for k in 1..n_buses {
        let parent = rng.random_range(0..k);
        let parent_phases = data.buses[parent].phases;
        let phases = if rng.random_bool(0.5) {
            parent_phases
        } else {
            let subsets: Vec<PhaseSet> = parent_phases.nonempty_subsets().collect();
            *subsets.choose(rng).expect("parent has phases")
        };
        let mut bus = Bus::new(format!("b{k}"), phases);
        for ph in phases.iter() {
            if rng.random_bool(0.75) {
                let p: f64 = rng.random_range(10.0..300.0);
                let q = p * rng.random_range(0.1..0.7);
                bus.load_p[ph.index()] = (p * 10.0).round() / 10.0;
                bus.load_q[ph.index()] = (q * 10.0).round() / 10.0;
            }
        }
        data.buses.push(bus);
        let miles = rng.random_range(0.02..0.15);
        data.lines.push(Line {
            from: format!("b{parent}"),
            to: format!("b{k}"),
            r: restrict(&R_PER_MILE, phases, miles),
            x: restrict(&X_PER_MILE, phases, miles),
        });
    }
    Network::new(data).expect("generated feeders are valid")
}

/// [`random_feeder`] from a seed, with 2 to `max_buses` buses.
pub fn seeded_feeder(seed: u64, max_buses: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_buses.max(2));
    random_feeder(&mut rng, n, &format!("synthetic-{seed}"))
}

/// A uniformly drawn consistent assignment, built top-down.
pub fn random_assignment<R: Rng>(rng: &mut R, net: &Network) -> Assignment {
    let mut sets = vec![PhaseSet::EMPTY; net.bus_count()];
    'retry: loop {
        for &b in net.topological_order() {
            let bus = net.bus(b);
            if bus.is_source {
                sets[b] = bus.phases;
                continue;
            }
            let allowed = bus.phases.intersection(sets[net.parent(b).expect("non-source bus")]);
            let options: Vec<PhaseSet> = allowed.nonempty_subsets().collect();
            match options.choose(rng) {
                Some(s) => sets[b] = *s,
                None => continue 'retry,
            }
        }
        return Assignment { sets };
    }
}
