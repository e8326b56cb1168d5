use super::{BeliefState, DomainName};

/// Derives the turn domain from consecutive belief states.
///
/// A domain is a candidate when it has constraints in `cur` and is either
/// absent from `prev` or its constraint map changed (slot removals count).
/// With no candidate the previous turn domain is inherited. Among several
/// candidates the one with the most added, updated or removed slots wins;
/// remaining ties go to the earlier domain in enumeration order.
pub fn compute_turn_domain(
    prev: &BeliefState,
    cur: &BeliefState,
    prev_domain: DomainName,
) -> DomainName {
    let mut best: Option<(usize, DomainName)> = None;
    for (domain, constraints) in cur.iter() {
        if constraints.is_empty() {
            continue;
        }
        let changes = match prev.domain(domain) {
            None => constraints.len(),
            Some(old) => {
                let touched = constraints
                    .iter()
                    .filter(|(slot, value)| old.get(*slot) != Some(*value))
                    .count();
                let removed = old.keys().filter(|s| !constraints.contains_key(*s)).count();
                touched + removed
            }
        };
        if changes > 0 && best.is_none_or(|(n, _)| changes > n) {
            best = Some((changes, domain));
        }
    }
    best.map_or(prev_domain, |(_, d)| d)
}
