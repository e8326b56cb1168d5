//! Entity database: per-domain tables, constraint queries, match buckets and
//! deterministic bookings.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::belief::{Constraints, DomainName};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("domain `{0}` has no table in the database")]
    UnknownDomain(DomainName),
    #[error("domain `{0}` does not support booking")]
    NotBookable(DomainName),
    #[error("booking in `{domain}` requires slot `{slot}`")]
    MissingBookingField { domain: DomainName, slot: String },
    #[error("reading database file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing database file {path}: {source}")]
    Format {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("record {index} of `{domain}` is empty")]
    EmptyRecord { domain: DomainName, index: usize },
}

/// Value that satisfies any constraint.
pub const DONTCARE: &str = "dontcare";

/// Slots that are booking parameters rather than searchable entity attributes.
pub fn booking_slots(domain: DomainName) -> &'static [&'static str] {
    match domain {
        DomainName::Restaurant => &["time", "day", "people"],
        DomainName::Hotel => &["day", "stay", "people"],
        DomainName::Train => &["people"],
        _ => &[],
    }
}

pub fn is_bookable(domain: DomainName) -> bool {
    !booking_slots(domain).is_empty()
}

/// Fields echoed back by a successful booking, in display order.
fn booking_summary(domain: DomainName) -> &'static [&'static str] {
    match domain {
        DomainName::Restaurant => &["name", "day", "time", "people"],
        DomainName::Hotel => &["name", "day", "stay", "people"],
        DomainName::Train => &["departure", "destination", "leave", "people", "price"],
        _ => &[],
    }
}

/// Drops booking-only slots so the rest can be matched against entity attributes.
pub fn search_constraints(domain: DomainName, constraints: &Constraints) -> Constraints {
    let skip = booking_slots(domain);
    constraints
        .iter()
        .filter(|(slot, _)| !skip.contains(&slot.as_str()))
        .map(|(s, v)| (s.clone(), v.clone()))
        .collect()
}

/// The booking parameters present in `constraints`.
pub fn booking_request(domain: DomainName, constraints: &Constraints) -> Constraints {
    let keep = booking_slots(domain);
    constraints
        .iter()
        .filter(|(slot, _)| keep.contains(&slot.as_str()))
        .map(|(s, v)| (s.clone(), v.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub domain: DomainName,
    /// Position in the table; stable DB order.
    pub index: usize,
    pub attributes: BTreeMap<String, String>,
}

impl EntityRecord {
    pub fn get(&self, slot: &str) -> Option<&str> {
        self.attributes.get(slot).map(String::as_str)
    }

    /// Identifier used for booking refs and grounding: `id`, else `name`, else the index.
    pub fn key(&self) -> String {
        self.get("id")
            .or_else(|| self.get("name"))
            .map(str::to_string)
            .unwrap_or_else(|| format!("#{}", self.index))
    }

    pub fn satisfies(&self, constraints: &Constraints) -> bool {
        constraints
            .iter()
            .all(|(slot, want)| want == DONTCARE || self.get(slot) == Some(want.as_str()))
    }
}

/// Number of matching entities, rendered as a bounded bucket in sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbMatch {
    pub count: usize,
}

impl DbMatch {
    pub fn new(count: usize) -> Self {
        Self { count }
    }

    pub fn bucket(&self) -> &'static str {
        match self.count {
            0 => "0",
            1 => "1",
            2 => "2",
            3 => "3",
            _ => ">3",
        }
    }
}

impl fmt::Display for DbMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.bucket())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookingResult {
    pub domain: DomainName,
    pub success: bool,
    /// Eight lowercase alphanumerics; present iff `success`.
    pub reference: Option<String>,
    /// Echoed booking slots and entity attributes, in display order.
    pub fields: Vec<(String, String)>,
    /// Key of the booked entity.
    pub entity: Option<String>,
}

impl BookingResult {
    fn failed(domain: DomainName) -> Self {
        Self {
            domain,
            success: false,
            reference: None,
            fields: Vec::new(),
            entity: None,
        }
    }

    /// Looks up a field, treating `ref` as the reference number.
    pub fn get(&self, slot: &str) -> Option<&str> {
        if slot == "ref" {
            return self.reference.as_deref();
        }
        self.fields
            .iter()
            .find(|(s, _)| s == slot)
            .map(|(_, v)| v.as_str())
    }

    /// Slot names a template may reference once this booking succeeded.
    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        let reference = self.reference.as_ref().map(|_| "ref");
        self.fields.iter().map(|(s, _)| s.as_str()).chain(reference)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Database {
    tables: BTreeMap<DomainName, Vec<EntityRecord>>,
}

impl Database {
    /// Builds a database from raw attribute maps. Values are lowercased.
    pub fn from_tables(
        tables: impl IntoIterator<Item = (DomainName, Vec<BTreeMap<String, String>>)>,
    ) -> Result<Self, KbError> {
        let mut db = Database::default();
        for (domain, rows) in tables {
            let mut records = Vec::with_capacity(rows.len());
            for (index, row) in rows.into_iter().enumerate() {
                if row.is_empty() {
                    return Err(KbError::EmptyRecord { domain, index });
                }
                let attributes = row
                    .into_iter()
                    .map(|(k, v)| (k.to_lowercase(), v.trim().to_lowercase()))
                    .collect();
                records.push(EntityRecord {
                    domain,
                    index,
                    attributes,
                });
            }
            db.tables.insert(domain, records);
        }
        Ok(db)
    }

    /// Parses one domain table from its JSON text (an array of attribute maps).
    pub fn parse_table(
        json: &str,
        origin: &str,
    ) -> Result<Vec<BTreeMap<String, String>>, KbError> {
        serde_json::from_str(json).map_err(|source| KbError::Format {
            path: origin.to_string(),
            source,
        })
    }

    /// Loads every `<domain>.json` file found in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, KbError> {
        let dir = dir.as_ref();
        let mut tables = Vec::new();
        for domain in DomainName::ALL {
            let path = dir.join(format!("{domain}.json"));
            if !path.exists() {
                continue;
            }
            let shown = path.display().to_string();
            let text = fs::read_to_string(&path).map_err(|source| KbError::Io {
                path: shown.clone(),
                source,
            })?;
            tables.push((domain, Self::parse_table(&text, &shown)?));
        }
        if tables.is_empty() {
            return Err(KbError::Io {
                path: dir.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no domain tables"),
            });
        }
        Self::from_tables(tables)
    }

    pub fn domains(&self) -> impl Iterator<Item = DomainName> + '_ {
        self.tables.keys().copied()
    }

    pub fn has_domain(&self, domain: DomainName) -> bool {
        self.tables.contains_key(&domain)
    }

    pub fn records(&self, domain: DomainName) -> Result<&[EntityRecord], KbError> {
        self.tables
            .get(&domain)
            .map(Vec::as_slice)
            .ok_or(KbError::UnknownDomain(domain))
    }

    /// Records satisfying every constraint, in table order.
    pub fn query(
        &self,
        domain: DomainName,
        constraints: &Constraints,
    ) -> Result<(DbMatch, Vec<&EntityRecord>), KbError> {
        let hits: Vec<&EntityRecord> = self
            .records(domain)?
            .iter()
            .filter(|r| r.satisfies(constraints))
            .collect();
        Ok((DbMatch::new(hits.len()), hits))
    }

    pub fn find_by_key(&self, domain: DomainName, key: &str) -> Option<&EntityRecord> {
        self.tables.get(&domain)?.iter().find(|r| r.key() == key)
    }

    /// Books the first matching entity. The reference is a pure function of
    /// `(seed, domain, entity key)`.
    pub fn book(
        &self,
        domain: DomainName,
        constraints: &Constraints,
        booking: &Constraints,
        seed: u64,
    ) -> Result<BookingResult, KbError> {
        let records = self.records(domain)?;
        if !is_bookable(domain) {
            return Err(KbError::NotBookable(domain));
        }
        if let Some(slot) = booking_slots(domain)
            .iter()
            .find(|s| !booking.contains_key(**s))
        {
            return Err(KbError::MissingBookingField {
                domain,
                slot: slot.to_string(),
            });
        }
        let Some(record) = records.iter().find(|r| r.satisfies(constraints)) else {
            return Ok(BookingResult::failed(domain));
        };
        let fields = booking_summary(domain)
            .iter()
            .filter_map(|slot| {
                booking
                    .get(*slot)
                    .map(String::as_str)
                    .or_else(|| record.get(slot))
                    .map(|v| (slot.to_string(), v.to_string()))
            })
            .collect();
        let key = record.key();
        Ok(BookingResult {
            domain,
            success: true,
            reference: Some(booking_reference(seed, domain, &key)),
            fields,
            entity: Some(key),
        })
    }

    /// Unique values of `slot` in table order.
    pub fn distinct_values(&self, domain: DomainName, slot: &str) -> Result<Vec<String>, KbError> {
        let mut seen = Vec::<String>::new();
        for record in self.records(domain)? {
            if let Some(v) = record.get(slot) {
                if !seen.iter().any(|s| s == v) {
                    seen.push(v.to_string());
                }
            }
        }
        Ok(seen)
    }
}

const REF_ALPHABET: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

fn booking_reference(seed: u64, domain: DomainName, key: &str) -> String {
    let digest = Sha256::digest(format!("{seed}|{domain}|{key}").as_bytes());
    digest[..8]
        .iter()
        .map(|b| REF_ALPHABET[(*b as usize) % REF_ALPHABET.len()] as char)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn tiny() -> Database {
        Database::from_tables([
            (
                DomainName::Hotel,
                vec![
                    row(&[("name", "a"), ("area", "east"), ("type", "hotel")]),
                    row(&[("name", "b"), ("area", "North"), ("type", "guesthouse")]),
                    row(&[("name", "c"), ("area", "east"), ("type", "guesthouse")]),
                ],
            ),
            (DomainName::Police, vec![row(&[("name", "parkside police station")])]),
        ])
        .unwrap()
    }

    fn cons(pairs: &[(&str, &str)]) -> Constraints {
        row(pairs)
    }

    #[test]
    fn buckets() {
        let got: Vec<&str> = [0, 1, 2, 3, 4, 33].map(|n| DbMatch::new(n).bucket()).to_vec();
        assert_eq!(got, ["0", "1", "2", "3", ">3", ">3"]);
    }

    #[test]
    fn query_semantics() {
        let db = tiny();
        assert_eq!(db.query(DomainName::Hotel, &Constraints::new()).unwrap().0.count, 3);
        let (m, hits) = db.query(DomainName::Hotel, &cons(&[("area", "east")])).unwrap();
        assert_eq!(m.count, 2);
        assert_eq!(hits[0].get("name"), Some("a"));
        // values are lowercased on load
        assert_eq!(db.query(DomainName::Hotel, &cons(&[("area", "north")])).unwrap().0.count, 1);
        // a slot the records lack never matches
        assert_eq!(db.query(DomainName::Hotel, &cons(&[("stars", "4")])).unwrap().0.count, 0);
        let dc = db
            .query(DomainName::Hotel, &cons(&[("area", "dontcare"), ("type", "guesthouse")]))
            .unwrap();
        let plain = db.query(DomainName::Hotel, &cons(&[("type", "guesthouse")])).unwrap();
        assert_eq!(dc.1, plain.1);
        assert!(matches!(
            db.query(DomainName::Train, &Constraints::new()),
            Err(KbError::UnknownDomain(DomainName::Train))
        ));
    }

    #[test]
    fn distinct_values_in_table_order() {
        let db = tiny();
        assert_eq!(db.distinct_values(DomainName::Hotel, "area").unwrap(), ["east", "north"]);
        assert!(db.distinct_values(DomainName::Hotel, "phone").unwrap().is_empty());
        assert_eq!(
            db.distinct_values(DomainName::Police, "name").unwrap(),
            ["parkside police station"]
        );
    }

    #[test]
    fn booking_checks_domain_and_fields() {
        let db = tiny();
        let full = cons(&[("day", "monday"), ("stay", "2"), ("people", "3")]);
        assert!(matches!(
            db.book(DomainName::Police, &Constraints::new(), &full, 1),
            Err(KbError::NotBookable(_))
        ));
        assert!(matches!(
            db.book(DomainName::Hotel, &Constraints::new(), &cons(&[("day", "monday")]), 1),
            Err(KbError::MissingBookingField { .. })
        ));
        let miss = db.book(DomainName::Hotel, &cons(&[("area", "west")]), &full, 1).unwrap();
        assert!(!miss.success && miss.reference.is_none() && miss.fields.is_empty());
    }

    #[test]
    fn booking_is_deterministic() {
        let db = tiny();
        let full = cons(&[("day", "monday"), ("stay", "2"), ("people", "3")]);
        let c = cons(&[("area", "east")]);
        let a = db.book(DomainName::Hotel, &c, &full, 7).unwrap();
        let b = db.book(DomainName::Hotel, &c, &full, 7).unwrap();
        assert_eq!(a, b);
        let r = a.reference.clone().unwrap();
        assert_eq!(r.len(), 8);
        assert!(r.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()));
        assert_eq!(a.entity.as_deref(), Some("a"));
        assert_eq!(a.get("name"), Some("a"));
        assert_eq!(a.get("ref"), Some(r.as_str()));
        let other_seed = db.book(DomainName::Hotel, &c, &full, 8).unwrap();
        assert_ne!(other_seed.reference, a.reference);
    }
}
