//! One line per acceptance criterion. Every check runs to completion and the
//! test fails at the end if any of them failed.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tod_core::belief::{
    compute_turn_domain, parse_belief, repair_belief, serialize_belief, BeliefError, BeliefState, DomainName,
};
use tod_core::corpus::{grounding_records, load_corpus, normalize_dialog, SlotNormalizer};
use tod_core::data;
use tod_core::engine::{Engine, EngineConfig, Session, ToleranceEvent};
use tod_core::fixtures::*;
use tod_core::kb::DbMatch;
use tod_core::lexicon::{delexicalize, fill_values, relexicalize, Template};
use tod_core::polish::polish;
use tod_core::seqmodel::{
    beam_generate, flatten, loss_belief, loss_contrastive, loss_response, total_loss, ContrastiveSample, FnBackend,
    GeneratorBackend, Label, Role, TokenId, TurnSample, UniformBackend, Vocab, EOS,
};
use tod_core::simeval::{run_campaign, simulator_backend, CampaignConfig, OracleKind};
use tod_service::cli::{run, Cli};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    ensure(start.elapsed() < limit, format!("took {:?}, limit {limit:?}", start.elapsed()))
}

fn random_belief(rng: &mut ChaCha8Rng) -> BeliefState {
    let words = ["east", "north", "13:00", "16.50", "hotel", "cheap", "guest", "house", "2", "don't"];
    let mut b = BeliefState::new();
    for _ in 0..rng.gen_range(0..=4) {
        let d = DomainName::ALL[rng.gen_range(0..DomainName::ALL.len())];
        for _ in 0..rng.gen_range(1..=5) {
            let slot: String = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
            let value: Vec<&str> = (0..rng.gen_range(1..4)).map(|_| words[rng.gen_range(0..words.len())]).collect();
            b.set(d, &slot, &value.join(" ")).unwrap();
        }
    }
    b
}

fn belief_round_trip() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    for i in 0..1000 {
        let b = random_belief(&mut rng);
        let parsed = parse_belief(&serialize_belief(&b)).map_err(|e| format!("case {i}: {e}"))?;
        ensure(parsed == b, format!("case {i} differs"))?;
    }
    ensure(
        matches!(parse_belief(MALFORMED_BELIEF), Err(BeliefError::Malformed { .. })),
        "malformed literal parsed",
    )?;
    ensure(repair_belief(MALFORMED_BELIEF) == REPAIRED_BELIEF, "repair output differs")?;
    within(start, Duration::from_secs(5))?;
    Ok("1000 random states; malformed literal repaired".into())
}

fn brute_turn_domain(prev: &BeliefState, cur: &BeliefState, pd: DomainName) -> DomainName {
    let empty = BTreeMap::new();
    let mut best: Option<(usize, DomainName)> = None;
    for d in DomainName::ALL {
        let now = cur.domain(d).unwrap_or(&empty);
        let before = prev.domain(d).unwrap_or(&empty);
        let changed = now.iter().filter(|(k, v)| before.get(*k) != Some(v)).count()
            + before.keys().filter(|k| !now.contains_key(*k)).count();
        if !now.is_empty() && changed > 0 && best.is_none_or(|(c, _)| changed > c) {
            best = Some((changed, d));
        }
    }
    best.map_or(pd, |(_, d)| d)
}

fn turn_domain_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let small = |rng: &mut ChaCha8Rng| {
        let mut b = BeliefState::new();
        for _ in 0..rng.gen_range(0..=3) {
            let d = DomainName::ALL[rng.gen_range(0..4)];
            for _ in 0..rng.gen_range(1..=4) {
                let s = ["area", "day", "people", "name"][rng.gen_range(0..4)];
                b.set(d, s, ["east", "west", "2"][rng.gen_range(0..3)]).unwrap();
            }
        }
        b
    };
    for i in 0..10_000 {
        let prev = small(&mut rng);
        let cur = if rng.gen_bool(0.3) { prev.clone() } else { small(&mut rng) };
        let pd = DomainName::ALL[rng.gen_range(0..DomainName::ALL.len())];
        ensure(
            compute_turn_domain(&prev, &cur, pd) == brute_turn_domain(&prev, &cur, pd),
            format!("pair {i}: {prev} -> {cur}"),
        )?;
    }
    let b = |s: &str| parse_belief(s).unwrap();
    let hotel = b("hotel { area = east }");
    let both = b("hotel { area = east } train { day = tuesday }");
    ensure(compute_turn_domain(&BeliefState::new(), &hotel, DomainName::General) == DomainName::Hotel, "hotel-new")?;
    ensure(compute_turn_domain(&hotel, &hotel, DomainName::Hotel) == DomainName::Hotel, "inherit")?;
    ensure(compute_turn_domain(&hotel, &both, DomainName::Hotel) == DomainName::Train, "train-added")?;
    within(start, Duration::from_secs(5))?;
    Ok("10000 random pairs; 3 worked examples".into())
}

fn delex_round_trip() -> Check {
    let db = data::database().map_err(|e| e.to_string())?;
    let norm = SlotNormalizer::default();
    let mut n = 0;
    for raw in load_corpus(data::CORPUS_JSONL).map_err(|e| e.to_string())? {
        let dialog = normalize_dialog(&raw, &norm).map_err(|e| e.to_string())?;
        for t in &dialog.turns {
            let (_, records) = grounding_records(&db, t.turn_domain, &t.belief);
            let (template, values) = delexicalize(&t.system, &t.belief, &records);
            let back = fill_values(&template, &values).map_err(|e| e.to_string())?;
            ensure(back == t.system, format!("{}: {back:?} != {:?}", raw.id, t.system))?;
            n += 1;
        }
    }
    let hotels: Vec<_> = db.records(DomainName::Hotel).unwrap().iter().collect();
    let text = "it is a hotel . there are 5 guesthouses in the area . do you prefer cheap or moderate for the price range ?";
    let (t, v) = delexicalize(text, &BeliefState::new(), &hotels);
    ensure(
        t.as_str()
            == "it is a [value_type] . there are 5 [value_type] in the area . do you prefer [value_pricerange] or [value_pricerange] for the price range ?",
        format!("guesthouse template: {t}"),
    )?;
    ensure(fill_values(&t, &v).as_deref() == Ok(text), "guesthouse restore")?;
    let pair: Vec<_> = ["cheap", "moderate"]
        .iter()
        .map(|p| *hotels.iter().find(|r| r.get("pricerange") == Some(p)).unwrap())
        .collect();
    let q = Template::new("do you prefer [value_pricerange] or [value_pricerange] for the price range ?");
    let filled = relexicalize(&q, &BeliefState::new(), DomainName::Hotel, &pair, None).map_err(|e| e.to_string())?;
    ensure(filled == "do you prefer cheap or moderate for the price range ?", filled)?;
    Ok(format!("{n} system utterances restored; guesthouse example exact"))
}

fn close(a: f64, b: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() < 1e-9, format!("{what}: {a} vs {b}"))
}

fn loss_closed_forms() -> Check {
    let s = TurnSample {
        history: vec![(Role::User, "hi".into())],
        domain: DomainName::General,
        belief: BeliefState::new(),
        db: DbMatch::new(0),
        response: Template::new("hello there ."),
    };
    let gold = flatten(&s);
    let mut ten: Vec<String> = gold[..7].to_vec();
    ten.extend(["a", "b", "c"].map(String::from));
    let u10 = UniformBackend::new(Vocab::new(ten), 0.5);
    close(loss_belief(&u10, &s).map_err(|e| e.to_string())?, 4.0 * 10f64.ln(), "uniform belief")?;
    let uni = UniformBackend::new(Vocab::new(gold.clone()), 0.5);
    let n = (uni.vocab().len() as f64).ln();
    close(loss_response(&uni, &s).unwrap(), 4.0 * n, "uniform response")?;

    let vocab = Vocab::new(gold.clone());
    let ids = vocab.encode(&gold).unwrap();
    let pos_ids = ids.clone();
    let size = vocab.len();
    let oracle = FnBackend::new(
        vocab,
        move |prefix: &[TokenId]| {
            let next = ids[prefix.len().min(ids.len() - 1)];
            (0..size).map(|i| if i as TokenId == next { 0.0 } else { f64::NEG_INFINITY }).collect()
        },
        move |seq| if seq == pos_ids { 0.9 } else { 0.1 },
    );
    let pos = ContrastiveSample::positive(&s);
    let mut neg = ContrastiveSample { tokens: pos.tokens.clone(), label: Label::Negative };
    neg.tokens.swap(0, 2);
    close(loss_belief(&oracle, &s).unwrap(), 0.0, "perfect belief")?;
    close(loss_response(&oracle, &s).unwrap(), 0.0, "perfect response")?;
    close(loss_contrastive(&oracle, &pos, &neg).unwrap(), -2.0 * 0.9f64.ln(), "contrastive")?;
    close(loss_contrastive(&uni, &pos, &neg).unwrap(), 2.0 * 2f64.ln(), "contrastive 0.5")?;
    close(total_loss(&oracle, &s, &pos, &neg).unwrap(), -2.0 * 0.9f64.ln(), "total")?;
    Ok("uniform, perfect-oracle and classifier cases within 1e-9".into())
}

fn beam_exactness() -> Check {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = BTreeMap::new();
        for p in std::iter::once(vec![]).chain((0..5).map(|a| vec![a])) {
            let w: Vec<f64> = (0..6).map(|_| rng.gen_range(0.01..1.0f64).powi(3)).collect();
            let z: f64 = w.iter().sum();
            table.insert(p, w.iter().map(|x| (x / z).ln()).collect::<Vec<f64>>());
        }
        let table = Arc::new(table);
        let t2 = table.clone();
        let backend = FnBackend::new(
            Vocab::new(["a", "b", "c", "d", "e", EOS]),
            move |p: &[TokenId]| {
                t2.get(p).cloned().unwrap_or_else(|| (0..6).map(|i| if i == 5 { 0.0 } else { f64::NEG_INFINITY }).collect())
            },
            |_| 0.5,
        );
        let lp = |seq: &[TokenId]| -> f64 {
            (0..seq.len()).map(|i| table.get(&seq[..i]).map_or(if seq[i] == 5 { 0.0 } else { f64::NEG_INFINITY }, |d| d[seq[i] as usize])).sum()
        };
        let mut all: Vec<Vec<TokenId>> = vec![vec![5]];
        for a in 0..5 {
            all.push(vec![a, 5]);
            for b in 0..5 {
                all.push(vec![a, b, 5]);
            }
        }
        let best = all.iter().max_by(|x, y| lp(x).total_cmp(&lp(y))).unwrap();
        let got = beam_generate(&backend, &[], 5, 6, 128).map_err(|e| e.to_string())?;
        ensure(&got[0].tokens == best, format!("seed {seed}: {:?} vs {best:?}", got[0].tokens))?;
    }
    Ok(format!(
        "beam 6 = brute-force arg-max on 100 toy languages; unforced length-3 cut agrees on {:.0}%",
        100.0 * truncated_agreement()
    ))
}

/// Informational: without a forced stop, the best length-3 cut can be pruned
/// at length 2, so exactness is not guaranteed there.
fn truncated_agreement() -> f64 {
    let mut agree = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut table: BTreeMap<Vec<TokenId>, Vec<f64>> = BTreeMap::new();
        let mut prefixes = vec![vec![]];
        for a in 0..5 {
            prefixes.push(vec![a]);
            for b in 0..5 {
                prefixes.push(vec![a, b]);
            }
        }
        for p in prefixes {
            let w: Vec<f64> = (0..6).map(|_| rng.gen_range(0.01..1.0f64).powi(3)).collect();
            let z: f64 = w.iter().sum();
            table.insert(p, w.iter().map(|x| (x / z).ln()).collect());
        }
        let table = Arc::new(table);
        let t2 = table.clone();
        let backend = FnBackend::new(Vocab::new(["a", "b", "c", "d", "e", EOS]), move |p: &[TokenId]| t2[p].clone(), |_| 0.5);
        let lp = |seq: &[TokenId]| -> f64 { (0..seq.len()).map(|i| table[&seq[..i]][seq[i] as usize]).sum() };
        let mut all: Vec<Vec<TokenId>> = vec![vec![5]];
        for a in 0..5 {
            all.push(vec![a, 5]);
            for b in 0..5 {
                all.push(vec![a, b, 5]);
                for c in 0..5 {
                    all.push(vec![a, b, c]);
                }
            }
        }
        let best = all.iter().max_by(|x, y| lp(x).total_cmp(&lp(y))).unwrap();
        let got = beam_generate(&backend, &[], 5, 6, 3).unwrap();
        agree += usize::from(&got[0].tokens == best);
    }
    agree as f64 / 100.0
}

fn fault_tolerance() -> Check {
    let e = engine_with(malformed_belief_backend());
    let t = e.respond(&mut Session::new("a", 0), MALFORMED_USER).map_err(|e| e.to_string())?;
    ensure(t.tolerance_events == [ToleranceEvent::BeliefRepaired], "no belief_repaired")?;
    ensure(
        serialize_belief(&t.belief) == "attraction { name = abbey pool and astroturf pitch , area = north }",
        serialize_belief(&t.belief),
    )?;

    let e = engine_with(bad_template_backend());
    let t = e.respond(&mut Session::new("b", 0), BAD_TEMPLATE_USER).map_err(|e| e.to_string())?;
    ensure(t.tolerance_events == [ToleranceEvent::TemplateRejected], "no template_rejected")?;
    ensure(t.raw_response == GOOD_TEMPLATE, t.raw_response.clone())?;

    let e = engine_with(repetition_backend());
    let mut s = Session::new("c", 0);
    e.respond(&mut s, REPEAT_USERS[0]).map_err(|e| e.to_string())?;
    let t = e.respond(&mut s, REPEAT_USERS[1]).map_err(|e| e.to_string())?;
    ensure(t.tolerance_events == [ToleranceEvent::RepetitionRejected], "no repetition_rejected")?;
    ensure(t.raw_response == AFTER_REPEAT, t.raw_response.clone())?;
    Ok("belief_repaired, template_rejected, repetition_rejected".into())
}

fn polish_fixtures() -> Check {
    let e = engine_with(polish_backend());
    let mut s = Session::new("p", 0);
    let mut t = e.respond(&mut s, TRAIN_BOOKING_USER).map_err(|e| e.to_string())?;
    let booking = t.booking.as_mut().ok_or("no booking")?;
    booking.reference = Some("tl4r46ys".into());
    let shown = polish(&t, e.db());
    ensure(shown == TRAIN_BOOKING_POLISHED, shown)?;
    ensure(s.history.last().map(|h| &h.1) == Some(&t.raw_response), "history holds polished text")?;
    let t = e.respond(&mut s, AREA_QUESTION_USER).map_err(|e| e.to_string())?;
    let shown = polish(&t, e.db());
    ensure(shown == AREA_QUESTION_POLISHED, shown)?;
    ensure(s.history.last() == Some(&(Role::System, AREA_QUESTION.to_string())), "history holds polished text")?;
    Ok("booking expansion and option suggestion exact; history raw".into())
}

fn campaign() -> Check {
    let start = Instant::now();
    let db = Arc::new(data::database().map_err(|e| e.to_string())?);
    let goals = data::goals().map_err(|e| e.to_string())?;
    ensure(goals.len() == 10, "bundled goals")?;
    let engine = |kind| Engine::new(Arc::new(simulator_backend(db.clone(), kind)), db.clone(), EngineConfig::default());
    let (p, _) = run_campaign(&engine(OracleKind::Perfect), &goals, &CampaignConfig::default()).map_err(|e| e.to_string())?;
    ensure(p.success_rate == 1.0 && p.book_rate == 1.0 && p.inform_f1 == 1.0, format!("perfect: {p:?}"))?;
    let (l, _) = run_campaign(&engine(OracleKind::Lossy), &goals, &CampaignConfig::default()).map_err(|e| e.to_string())?;
    ensure(l.success_rate == 0.0 && l.inform_recall < 1.0, format!("lossy: {l:?}"))?;
    within(start, Duration::from_secs(10))?;
    Ok(format!("perfect 1.0/1.0/1.0, lossy success 0.0 recall {:.3}", l.inform_recall))
}

fn ngram_smoke() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).display().to_string();
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/corpus.jsonl");
    let step = |args: Vec<String>| -> Result<String, String> {
        let mut out = Vec::new();
        run(Cli::parse_from(std::iter::once("tod".to_string()).chain(args)), &mut out).map_err(|e| e.to_string())?;
        Ok(String::from_utf8_lossy(&out).into_owned())
    };
    let ppl = |report: &str| -> Result<f64, String> {
        report
            .lines()
            .find_map(|l| l.strip_prefix("held-out perplexity: "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| format!("no perplexity in {report:?}"))
    };
    let data = p("data");
    step(vec!["preprocess".into(), corpus.display().to_string(), "-o".into(), data.clone()])?;
    step(vec!["pretrain".into(), format!("{data}/chunks.txt"), "-o".into(), p("pre.json")])?;
    let train = |out: &str, init: bool| {
        let mut args = vec!["train".into(), format!("{data}/turns.jsonl"), "-o".into(), p(out), "--dev".into(), format!("{data}/dev.jsonl")];
        if init {
            args.extend(["--init".into(), p("pre.json")]);
        }
        step(args)
    };
    let plain = ppl(&train("plain.json", false)?)?;
    let weighted = ppl(&train("model.json", true)?)?;
    ensure(plain.is_finite() && weighted.is_finite(), "non-finite perplexity")?;
    step(vec!["eval".into(), "--model".into(), p("model.json")])?;
    within(start, Duration::from_secs(60))?;
    Ok(format!("perplexity unweighted {plain:.3}, pretrain-weighted {weighted:.3}"))
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Check);
    let checks: [Criterion; 9] = [
        ("belief grammar round-trip", belief_round_trip),
        ("turn-domain oracle equivalence", turn_domain_equivalence),
        ("delex/relex round-trip", delex_round_trip),
        ("loss closed forms", loss_closed_forms),
        ("beam-search exactness", beam_exactness),
        ("fault-tolerance fixtures", fault_tolerance),
        ("polish fixtures", polish_fixtures),
        ("end-to-end campaign", campaign),
        ("n-gram smoke", ngram_smoke),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match &result {
            Ok(detail) => println!("PASS  {name:<32} {secs:>6.2}s  {detail}"),
            Err(why) => {
                println!("FAIL  {name:<32} {secs:>6.2}s  {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
