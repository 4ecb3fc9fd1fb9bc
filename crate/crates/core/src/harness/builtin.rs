//! Scenarios compiled into the library, addressable by name.

use super::scenario::Scenario;

pub const CAR_TRADING: &str = include_str!("../../scenarios/car-trading.scn");
pub const CHAIN_HOLE: &str = include_str!("../../scenarios/chain-hole.scn");
pub const FORKED_PAIR: &str = include_str!("../../scenarios/forked-pair.scn");
pub const TETRA_JOIN: &str = include_str!("../../scenarios/tetra-join.complex");

/// The car-trading failure suite: one file per injected failure.
pub const SUITE: [(&str, &str); 6] = [
    ("none", include_str!("../../scenarios/suite/none.scn")),
    ("walk-away", include_str!("../../scenarios/suite/walk-away.scn")),
    ("late", include_str!("../../scenarios/suite/late.scn")),
    ("witness-crash", include_str!("../../scenarios/suite/witness-crash.scn")),
    ("vote-abort", include_str!("../../scenarios/suite/vote-abort.scn")),
    ("update-failure", include_str!("../../scenarios/suite/update-failure.scn")),
];

/// Text of a built-in scenario.
pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "car-trading" => Some(CAR_TRADING),
        "chain-hole" => Some(CHAIN_HOLE),
        "forked-pair" => Some(FORKED_PAIR),
        _ => SUITE.iter().find(|(n, _)| *n == name).map(|(_, s)| *s),
    }
}

pub fn scenario(name: &str) -> Option<Scenario> {
    source(name).map(|s| Scenario::parse(s).expect("built-in scenarios parse"))
}

pub fn suite() -> Vec<Scenario> {
    SUITE.iter().map(|(_, s)| Scenario::parse(s).expect("built-in scenarios parse")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses_and_builds() {
        for name in ["car-trading", "chain-hole", "forked-pair"].into_iter().chain(SUITE.iter().map(|(n, _)| *n)) {
            let s = scenario(name).unwrap();
            s.build_federation().unwrap();
            assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s, "{name}");
        }
        assert!(scenario("nope").is_none());
    }
}
