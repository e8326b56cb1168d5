use std::fmt;

use serde::{Deserialize, Serialize};

use super::{requestable_slots, DialogRecord, EvalError};
use crate::kb::{Database, EntityRecord};

/// Per-dialog scores. Precision is undefined when nothing was provided,
/// recall when nothing was requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogScore {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub success: bool,
    pub bookings_required: usize,
    pub bookings_made: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dialogs: usize,
    pub success_rate: f64,
    pub book_rate: f64,
    pub inform_precision: f64,
    pub inform_recall: f64,
    pub inform_f1: f64,
    /// Mean exchanges over successful dialogs; 0 when none succeeded.
    pub turns_success: f64,
    pub turns_all: f64,
    pub tolerance_events: usize,
}

/// The entity a domain goal is judged against: the booked one, else the offered one.
fn grounded<'a>(
    record: &DialogRecord,
    db: &'a Database,
    domain: crate::belief::DomainName,
) -> Option<&'a EntityRecord> {
    let key = record
        .booked
        .get(&domain)
        .and_then(|b| b.entity.as_ref())
        .or_else(|| record.offered.get(&domain))?;
    db.find_by_key(domain, key)
}

pub fn score_dialog(record: &DialogRecord, db: &Database) -> DialogScore {
    let (mut provided, mut required, mut hits) = (0usize, 0usize, 0usize);
    let (mut bookings_required, mut bookings_made) = (0, 0);
    let mut success = true;
    for g in &record.goal.domains {
        let entity = grounded(record, db, g.domain);
        let informed = entity.is_some_and(|e| e.satisfies(&g.informables));
        success &= informed;

        let given = record.provided.get(&g.domain);
        let given_req = given
            .into_iter()
            .flatten()
            .filter(|(s, _)| requestable_slots(g.domain).contains(&s.as_str()));
        provided += given_req.count();
        required += g.requestables.len();
        for slot in &g.requestables {
            let value = given.and_then(|p| p.get(slot));
            let correct = matches!((entity, value), (Some(e), Some(v)) if e.get(slot) == Some(v.as_str()));
            hits += usize::from(correct);
            success &= correct;
        }

        if let Some(want) = &g.booking {
            bookings_required += 1;
            let ok = record.booked.get(&g.domain).is_some_and(|b| {
                b.success
                    && informed
                    && b.entity.as_ref() == entity.map(|e| e.key()).as_ref()
                    && want.iter().all(|(s, v)| b.get(s) == Some(v.as_str()))
            });
            bookings_made += usize::from(ok);
            success &= ok;
        }
    }
    DialogScore {
        precision: (provided > 0).then(|| hits as f64 / provided as f64),
        recall: (required > 0).then(|| hits as f64 / required as f64),
        success,
        bookings_required,
        bookings_made,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Macro-averaged inform metrics, success rate, booking rate and turn counts.
pub fn evaluate(records: &[DialogRecord], db: &Database) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let scores: Vec<DialogScore> = records.iter().map(|r| score_dialog(r, db)).collect();
    let precision = mean(scores.iter().filter_map(|s| s.precision));
    let recall = mean(scores.iter().filter_map(|s| s.recall));
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let required: usize = scores.iter().map(|s| s.bookings_required).sum();
    let made: usize = scores.iter().map(|s| s.bookings_made).sum();
    let successes = scores.iter().filter(|s| s.success).count();
    Ok(EvalReport {
        dialogs: records.len(),
        success_rate: successes as f64 / records.len() as f64,
        book_rate: if required == 0 {
            1.0
        } else {
            made as f64 / required as f64
        },
        inform_precision: precision,
        inform_recall: recall,
        inform_f1: f1,
        turns_success: mean(
            records
                .iter()
                .zip(&scores)
                .filter(|(_, s)| s.success)
                .map(|(r, _)| r.turns as f64),
        ),
        turns_all: mean(records.iter().map(|r| r.turns as f64)),
        tolerance_events: records.iter().map(|r| r.tolerance_events).sum(),
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("dialogs", self.dialogs.to_string()),
            ("success rate", format!("{:.3}", self.success_rate)),
            ("book rate", format!("{:.3}", self.book_rate)),
            ("inform precision", format!("{:.3}", self.inform_precision)),
            ("inform recall", format!("{:.3}", self.inform_recall)),
            ("inform f1", format!("{:.3}", self.inform_f1)),
            ("turns (success)", format!("{:.2}", self.turns_success)),
            ("turns (all)", format!("{:.2}", self.turns_all)),
            ("tolerance events", self.tolerance_events.to_string()),
        ];
        writeln!(f, "{:<18} {:>8}", "metric", "value")?;
        for (name, value) in rows {
            writeln!(f, "{name:<18} {value:>8}")?;
        }
        Ok(())
    }
}
