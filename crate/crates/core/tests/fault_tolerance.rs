use tod_core::belief::{parse_belief, repair_belief, serialize_belief, DomainName};
use tod_core::engine::{check_repetition, Session, ToleranceEvent};
use tod_core::fixtures::*;
use tod_core::polish::polish;
use tod_core::seqmodel::Role;

#[test]
fn malformed_belief_is_repaired() {
    assert!(parse_belief(MALFORMED_BELIEF).is_err());
    assert_eq!(repair_belief(MALFORMED_BELIEF), REPAIRED_BELIEF);

    let engine = engine_with(malformed_belief_backend());
    let mut s = Session::new("t", 0);
    let turn = engine.respond(&mut s, MALFORMED_USER).unwrap();
    assert_eq!(turn.tolerance_events, [ToleranceEvent::BeliefRepaired]);
    assert_eq!(turn.domain, DomainName::Attraction);
    assert_eq!(
        serialize_belief(&turn.belief),
        "attraction { name = abbey pool and astroturf pitch , area = north }"
    );
    assert_eq!(turn.raw_response, "the entrance fee is 2 pounds .");
}

#[test]
fn unfillable_template_falls_to_second_candidate() {
    let engine = engine_with(bad_template_backend());
    let mut s = Session::new("t", 0);
    let turn = engine.respond(&mut s, BAD_TEMPLATE_USER).unwrap();
    assert_eq!(serialize_belief(&turn.belief), BAD_TEMPLATE_BELIEF);
    assert_eq!(turn.tolerance_events, [ToleranceEvent::TemplateRejected]);
    assert_eq!(turn.raw_response, GOOD_TEMPLATE);
    assert!(turn.response_beam > 1);
    assert!(turn.booking.is_none());
}

#[test]
fn repeated_response_is_rejected() {
    let engine = engine_with(repetition_backend());
    let mut s = Session::new("t", 0);
    let first = engine.respond(&mut s, REPEAT_USERS[0]).unwrap();
    assert_eq!(first.raw_response, REPEATED_RESPONSE);
    assert!(first.tolerance_events.is_empty());
    let second = engine.respond(&mut s, REPEAT_USERS[1]).unwrap();
    assert_eq!(second.tolerance_events, [ToleranceEvent::RepetitionRejected]);
    assert_eq!(second.raw_response, AFTER_REPEAT);
}

fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

#[test]
fn paraphrased_repeat_against_edit_distance_oracle() {
    let d = levenshtein(PARAPHRASED_REPEAT, REPEATED_RESPONSE);
    let sim = 1.0 - d as f64 / PARAPHRASED_REPEAT.len().max(REPEATED_RESPONSE.len()) as f64;
    assert_eq!(check_repetition(PARAPHRASED_REPEAT, REPEATED_RESPONSE, 0.9), sim >= 0.9);
    assert!(check_repetition(PARAPHRASED_REPEAT, REPEATED_RESPONSE, sim));
    assert!(sim < 0.9, "similarity {sim}");
}

#[test]
fn well_behaved_backend_needs_no_recovery() {
    let engine = engine_with(polish_backend());
    let mut s = Session::new("t", 0);
    let turn = engine.respond(&mut s, AREA_QUESTION_USER).unwrap();
    assert!(turn.tolerance_events.is_empty());
    assert_eq!((turn.belief_beam, turn.response_beam), (1, 1));
    assert_eq!(s.history.len(), 2);
}

#[test]
fn history_keeps_raw_responses() {
    let engine = engine_with(polish_backend());
    let mut s = Session::new("t", 0);
    let turn = engine.respond(&mut s, AREA_QUESTION_USER).unwrap();
    let polished = polish(&turn, engine.db());
    assert_eq!(polished, AREA_QUESTION_POLISHED);
    assert_eq!(s.history.last(), Some(&(Role::System, AREA_QUESTION.to_string())));
    engine.respond(&mut s, "thanks").unwrap();
    assert_eq!(s.history.len(), 4);
}
