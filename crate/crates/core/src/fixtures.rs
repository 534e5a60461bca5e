//! Bundled IEEE test feeders.
//!
//! The documents live in `fixtures/` next to the crate manifest; the header
//! comment of each file lists how it was derived from the public test feeder
//! data.

use crate::network::{parse_feeder, Network};

pub const IEEE13: &str = include_str!("../fixtures/ieee13.toml");
pub const IEEE37: &str = include_str!("../fixtures/ieee37.toml");
pub const IEEE123: &str = include_str!("../fixtures/ieee123.toml");

pub fn ieee13() -> Network {
    parse_feeder(IEEE13).expect("bundled IEEE-13 fixture is valid")
}

pub fn ieee37() -> Network {
    parse_feeder(IEEE37).expect("bundled IEEE-37 fixture is valid")
}

pub fn ieee123() -> Network {
    parse_feeder(IEEE123).expect("bundled IEEE-123 fixture is valid")
}

/// All bundled feeders with their short names.
pub fn all() -> Vec<(&'static str, Network)> {
    vec![("ieee13", ieee13()), ("ieee37", ieee37()), ("ieee123", ieee123())]
}

/// A bundled feeder by short name.
pub fn by_name(name: &str) -> Option<Network> {
    match name {
        "ieee13" => Some(ieee13()),
        "ieee37" => Some(ieee37()),
        "ieee123" => Some(ieee123()),
        _ => None,
    }
}
