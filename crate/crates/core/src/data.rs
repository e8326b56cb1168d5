//! Fixture database and mini-corpus compiled into the library.

use crate::belief::DomainName;
use crate::kb::{Database, KbError};

const TABLES: [(DomainName, &str, &str); 4] = [
    (DomainName::Restaurant, "restaurant.json", include_str!("../data/db/restaurant.json")),
    (DomainName::Hotel, "hotel.json", include_str!("../data/db/hotel.json")),
    (DomainName::Attraction, "attraction.json", include_str!("../data/db/attraction.json")),
    (DomainName::Train, "train.json", include_str!("../data/db/train.json")),
];

/// The bundled mini-corpus, one dialog record per line.
pub const CORPUS_JSONL: &str = include_str!("../data/corpus.jsonl");

/// Ten simulator goals over the bundled database.
pub const GOALS_JSON: &str = include_str!("../data/goals.json");

/// Parses the bundled database.
pub fn database() -> Result<Database, KbError> {
    let mut tables = Vec::new();
    for (domain, file, json) in TABLES {
        tables.push((domain, Database::parse_table(json, file)?));
    }
    Database::from_tables(tables)
}

/// Parses the bundled simulator goals.
pub fn goals() -> Result<Vec<crate::simeval::Goal>, crate::simeval::EvalError> {
    crate::simeval::load_goals(GOALS_JSON)
}
