use tod_core::belief::{BeliefState, DomainName};
use tod_core::corpus::{grounding_records, load_corpus, normalize_dialog, SlotNormalizer};
use tod_core::data;
use tod_core::lexicon::{
    delexicalize, fill_values, relexicalize, validate_template, Template, DELEX_SLOTS,
};

#[test]
fn every_corpus_system_turn_round_trips() {
    let db = data::database().unwrap();
    let norm = SlotNormalizer::default();
    let mut turns = 0;
    let mut abstracted = 0;
    for raw in load_corpus(data::CORPUS_JSONL).unwrap() {
        let dialog = normalize_dialog(&raw, &norm).unwrap();
        for t in &dialog.turns {
            let (_, records) = grounding_records(&db, t.turn_domain, &t.belief);
            let (template, values) = delexicalize(&t.system, &t.belief, &records);
            assert!(template.is_well_formed(), "{template}");
            assert_eq!(template.placeholders().len(), values.len(), "{template}");
            assert_eq!(fill_values(&template, &values).unwrap(), t.system, "{}", raw.id);
            turns += 1;
            abstracted += usize::from(!values.is_empty());
        }
    }
    assert!(turns > 200, "{turns}");
    assert!(abstracted * 2 > turns, "only {abstracted} of {turns} turns had values");
}

#[test]
fn guesthouse_example_verbatim() {
    let db = data::database().unwrap();
    let records: Vec<_> = db.records(DomainName::Hotel).unwrap().iter().collect();
    let text = "it is a hotel . there are 5 guesthouses in the area . do you prefer cheap or moderate for the price range ?";
    let (template, values) = delexicalize(text, &BeliefState::new(), &records);
    assert_eq!(
        template.as_str(),
        "it is a [value_type] . there are 5 [value_type] in the area . do you prefer [value_pricerange] or [value_pricerange] for the price range ?"
    );
    assert_eq!(fill_values(&template, &values).unwrap(), text);

    // Grounded fill: repeated pricerange placeholders take distinct candidates.
    let cheap = records.iter().find(|r| r.get("pricerange") == Some("cheap")).unwrap();
    let moderate = records.iter().find(|r| r.get("pricerange") == Some("moderate")).unwrap();
    let t = Template::new("do you prefer [value_pricerange] or [value_pricerange] for the price range ?");
    let filled = relexicalize(&t, &BeliefState::new(), DomainName::Hotel, &[cheap, moderate], None).unwrap();
    assert_eq!(filled, "do you prefer cheap or moderate for the price range ?");
}

#[test]
fn multiword_name_is_one_placeholder() {
    let db = data::database().unwrap();
    let records: Vec<_> = db.records(DomainName::Attraction).unwrap().iter().collect();
    let (t, v) = delexicalize("abbey pool and astroturf pitch is in the north .", &BeliefState::new(), &records);
    assert_eq!(t.as_str(), "[value_name] is in the [value_area] .");
    assert_eq!(v[0].1, "abbey pool and astroturf pitch");
}

#[test]
fn no_known_values_is_identity() {
    let (t, v) = delexicalize("how can i help you ?", &BeliefState::new(), &[]);
    assert_eq!(t.as_str(), "how can i help you ?");
    assert!(v.is_empty());
}

#[test]
fn same_placeholder_across_domains() {
    let db = data::database().unwrap();
    let hotel = &db.records(DomainName::Hotel).unwrap()[0];
    let rest = &db.records(DomainName::Restaurant).unwrap()[0];
    let a = delexicalize(&format!("{} is nice .", hotel.get("name").unwrap()), &BeliefState::new(), &[hotel]).0;
    let b = delexicalize(&format!("{} is nice .", rest.get("name").unwrap()), &BeliefState::new(), &[rest]).0;
    assert_eq!(a, b);
    assert_eq!(a.as_str(), "[value_name] is nice .");
}

#[test]
fn validate_template_is_monotone() {
    let t = Template::new("[value_name] on [value_day] at [value_time] , ref [value_ref] , [value_day] .");
    assert_eq!(validate_template(&t, ["time", "people"]), ["name", "day", "ref"]);
    // Every subset of a small universe: adding slots never adds missing ones.
    let universe = ["name", "day", "time", "ref", "people"];
    for mask in 0u32..32 {
        let small: Vec<&str> = (0..5).filter(|i| mask & (1 << i) != 0).map(|i| universe[i]).collect();
        let missing_small = validate_template(&t, small.iter().copied());
        for extra in universe {
            let mut big = small.clone();
            big.push(extra);
            let missing_big = validate_template(&t, big.iter().copied());
            assert!(missing_big.iter().all(|m| missing_small.contains(m)));
        }
    }
    assert!(validate_template(&Template::new("hello ."), []).is_empty());
    for slot in DELEX_SLOTS {
        assert!(Template::new(format!("[value_{slot}]")).is_well_formed());
    }
}
