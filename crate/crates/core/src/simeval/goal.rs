use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{informable_slots, requestable_slots, EvalError};
use crate::belief::DomainName;
use crate::kb::{booking_slots, Database};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGoal {
    pub domain: DomainName,
    pub informables: BTreeMap<String, String>,
    pub requestables: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub booking: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub domains: Vec<DomainGoal>,
}

impl Goal {
    pub fn domain(&self, domain: DomainName) -> Option<&DomainGoal> {
        self.domains.iter().find(|g| g.domain == domain)
    }
}

pub fn load_goals(json: &str) -> Result<Vec<Goal>, EvalError> {
    let goals: Vec<Goal> = serde_json::from_str(json).map_err(|e| EvalError::BadGoals(e.to_string()))?;
    for (i, g) in goals.iter().enumerate() {
        if g.domains.is_empty() {
            return Err(EvalError::BadGoals(format!("goal {i} has no domain")));
        }
    }
    Ok(goals)
}

const GOAL_DOMAINS: [DomainName; 4] = [
    DomainName::Restaurant,
    DomainName::Hotel,
    DomainName::Attraction,
    DomainName::Train,
];
const DAYS: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const TIMES: [&str; 5] = ["11:30", "12:00", "13:00", "18:45", "19:30"];

fn domain_goal(db: &Database, domain: DomainName, rng: &mut ChaCha8Rng) -> Option<DomainGoal> {
    let record = db.records(domain).ok()?.choose(rng)?;
    let slots: Vec<&str> = informable_slots(domain)
        .iter()
        .copied()
        .filter(|s| record.get(s).is_some())
        .collect();
    if slots.is_empty() {
        return None;
    }
    let k = if domain == DomainName::Train {
        slots.len()
    } else {
        rng.gen_range(2.min(slots.len())..=slots.len())
    };
    let informables = slots
        .choose_multiple(rng, k)
        .map(|s| (s.to_string(), record.get(s).unwrap().to_string()))
        .collect();
    let n_req = rng.gen_range(1..=2);
    let mut requestables: Vec<String> = requestable_slots(domain)
        .choose_multiple(rng, n_req)
        .map(|s| s.to_string())
        .collect();
    requestables.sort_by_key(|s| requestable_slots(domain).iter().position(|r| r == s));
    let booking = (!booking_slots(domain).is_empty() && rng.gen_bool(0.6)).then(|| {
        booking_slots(domain)
            .iter()
            .map(|s| {
                let v = match *s {
                    "people" => rng.gen_range(1..=6).to_string(),
                    "stay" => rng.gen_range(1..=4).to_string(),
                    "day" => DAYS.choose(rng).unwrap().to_string(),
                    _ => TIMES.choose(rng).unwrap().to_string(),
                };
                (s.to_string(), v)
            })
            .collect()
    });
    Some(DomainGoal {
        domain,
        informables,
        requestables,
        booking,
    })
}

/// Random satisfiable goals: each domain goal describes an existing entity.
/// About a third of the goals span two domains.
pub fn generate_goals(db: &Database, n: usize, seed: u64) -> Vec<Goal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let available: Vec<DomainName> = GOAL_DOMAINS
        .iter()
        .copied()
        .filter(|d| db.has_domain(*d))
        .collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n && !available.is_empty() {
        let count = if available.len() > 1 && rng.gen_bool(0.33) { 2 } else { 1 };
        let domains: Vec<DomainName> = available.choose_multiple(&mut rng, count).copied().collect();
        let goals: Vec<DomainGoal> = domains
            .into_iter()
            .filter_map(|d| domain_goal(db, d, &mut rng))
            .collect();
        if !goals.is_empty() {
            out.push(Goal { domains: goals });
        }
    }
    out
}
