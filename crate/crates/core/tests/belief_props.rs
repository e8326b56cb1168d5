use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tod_core::belief::{
    compute_turn_domain, parse_belief, repair_belief, serialize_belief, BeliefState, DomainName,
};

const SLOTS: [&str; 10] = [
    "name", "type", "area", "pricerange", "day", "time", "people", "stay", "book_extra", "zz9",
];

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z0-9]{1,7}",
        Just("13:00".to_string()),
        Just("16.50".to_string()),
        Just("hotel".to_string()),
        Just("don't".to_string()),
    ]
}

fn value() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..4).prop_map(|w| w.join(" "))
}

fn slot() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(SLOTS.to_vec()).prop_map(String::from),
        "[a-z_]{1,8}",
    ]
}

fn belief() -> impl Strategy<Value = BeliefState> {
    let domain = prop::sample::select(DomainName::ALL.to_vec());
    let block = prop::collection::btree_map(slot(), value(), 1..5);
    prop::collection::btree_map(domain, block, 0..4).prop_map(|m| {
        let mut b = BeliefState::new();
        for (d, slots) in m {
            for (s, v) in slots {
                b.set(d, &s, &v).unwrap();
            }
        }
        b
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn serialize_then_parse_is_identity(b in belief()) {
        let text = serialize_belief(&b);
        prop_assert_eq!(parse_belief(&text).unwrap(), b);
    }

    #[test]
    fn colon_variant_parses_to_same_state(b in belief()) {
        let text = serialize_belief(&b).replace(" = ", " : ");
        prop_assert_eq!(parse_belief(&text).unwrap(), b);
    }

    #[test]
    fn canonical_form_is_a_fixed_point(b in belief()) {
        let once = serialize_belief(&b);
        let twice = serialize_belief(&parse_belief(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn changed_repairs_always_parse(b in belief(), cut in 0usize..64) {
        // Splitting a value with a stray comma is the failure mode repair targets.
        let text = serialize_belief(&b);
        let spaces: Vec<usize> = text.match_indices(' ').map(|(i, _)| i).collect();
        if spaces.is_empty() {
            return Ok(());
        }
        let at = spaces[cut % spaces.len()];
        let broken = format!("{} ,{}", &text[..at], &text[at..]);
        let repaired = repair_belief(&broken);
        if repaired != broken {
            prop_assert!(parse_belief(&repaired).is_ok(), "{}", repaired);
        }
    }

    #[test]
    fn unchanged_belief_inherits(b in belief(), d in prop::sample::select(DomainName::ALL.to_vec())) {
        prop_assert_eq!(compute_turn_domain(&b, &b, d), d);
    }
}

#[test]
fn reference_literals() {
    let b = parse_belief("restaurant { time = 13:00 , people = 4 }").unwrap();
    assert_eq!(b.get(DomainName::Restaurant, "time"), Some("13:00"));
    assert_eq!(b.get(DomainName::Restaurant, "people"), Some("4"));
    let bad = "{ name : abbey pool , and astroturf pitch , area : north }";
    assert!(parse_belief(bad).is_err());
    assert_eq!(repair_belief(bad), "{ name : abbey pool and astroturf pitch , area : north }");
    assert_eq!(repair_belief("{ = , }"), "{ = , }");
    assert_eq!(serialize_belief(&BeliefState::new()), "");
}

/// Independent statement of the turn-domain rule: per domain, count slots
/// whose value differs between `prev` and `cur` (including removals); the
/// highest positive count among domains constrained in `cur` wins, ties to
/// the earliest domain; no winner inherits.
fn brute_force_turn_domain(prev: &BeliefState, cur: &BeliefState, prev_domain: DomainName) -> DomainName {
    let empty = BTreeMap::new();
    let mut scores = Vec::new();
    for d in DomainName::ALL {
        let now = cur.domain(d).unwrap_or(&empty);
        if now.is_empty() {
            continue;
        }
        let before = prev.domain(d).unwrap_or(&empty);
        let mut keys: Vec<&String> = now.keys().chain(before.keys()).collect();
        keys.sort();
        keys.dedup();
        let diff = keys.iter().filter(|k| now.get(**k) != before.get(**k)).count();
        if diff > 0 {
            scores.push((diff, d));
        }
    }
    let Some(max) = scores.iter().map(|s| s.0).max() else {
        return prev_domain;
    };
    scores.iter().find(|s| s.0 == max).unwrap().1
}

fn random_belief(rng: &mut ChaCha8Rng) -> BeliefState {
    let mut b = BeliefState::new();
    for _ in 0..rng.gen_range(0..=3) {
        let d = DomainName::ALL[rng.gen_range(0..4)];
        for _ in 0..rng.gen_range(1..=4) {
            let s = ["area", "day", "people", "name"][rng.gen_range(0..4)];
            let v = ["east", "north", "2", "friday"][rng.gen_range(0..4)];
            b.set(d, s, v).unwrap();
        }
    }
    b
}

fn mutate(b: &BeliefState, rng: &mut ChaCha8Rng) -> BeliefState {
    let mut out = b.clone();
    for _ in 0..rng.gen_range(0..=3) {
        let d = DomainName::ALL[rng.gen_range(0..4)];
        let s = ["area", "day", "people", "name"][rng.gen_range(0..4)];
        if rng.gen_bool(0.25) {
            out.remove(d, s);
        } else {
            out.set(d, s, ["east", "north", "2", "friday"][rng.gen_range(0..4)]).unwrap();
        }
    }
    out
}

#[test]
fn turn_domain_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut inherited = 0;
    for _ in 0..10_000 {
        let prev = random_belief(&mut rng);
        let cur = if rng.gen_bool(0.5) { mutate(&prev, &mut rng) } else { random_belief(&mut rng) };
        let pd = DomainName::ALL[rng.gen_range(0..DomainName::ALL.len())];
        let want = brute_force_turn_domain(&prev, &cur, pd);
        assert_eq!(compute_turn_domain(&prev, &cur, pd), want, "{prev} -> {cur}");
        inherited += usize::from(want == pd);
    }
    // Both branches of the rule were exercised.
    assert!(inherited > 500 && inherited < 9_500, "{inherited}");
}

#[test]
fn turn_domain_reference_cases() {
    let b = |s: &str| parse_belief(s).unwrap();
    let hotel = b("hotel { area = east }");
    assert_eq!(compute_turn_domain(&BeliefState::new(), &hotel, DomainName::General), DomainName::Hotel);
    assert_eq!(compute_turn_domain(&hotel, &hotel, DomainName::Hotel), DomainName::Hotel);
    let both = b("hotel { area = east } train { day = tuesday }");
    assert_eq!(compute_turn_domain(&hotel, &both, DomainName::Hotel), DomainName::Train);
}
