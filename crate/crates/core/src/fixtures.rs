//! Reference dialog scenarios over the bundled database, as scripted
//! backends. Each one reproduces a known decoding failure (or a polish
//! trigger) deterministically.

use std::sync::Arc;

use crate::engine::{Engine, EngineConfig};
use crate::seqmodel::scripted::{ScriptTable, ScriptedBackend};

pub const MALFORMED_USER: &str = "what 's the entrance fee for abbey pool, and astroturf pitch ?";
pub const MALFORMED_BELIEF: &str = "{ name : abbey pool , and astroturf pitch , area : north }";
pub const REPAIRED_BELIEF: &str = "{ name : abbey pool and astroturf pitch , area : north }";

pub const BAD_TEMPLATE_USER: &str = "can you book me a table for 4 people? can you try 13:00 ?";
pub const BAD_TEMPLATE_BELIEF: &str = "restaurant { time = 13:00 , people = 4 }";
pub const BAD_TEMPLATE: &str =
    "i have made your reservation for [value_day] at 13:00 . your reference number is : [value_ref] .";
pub const GOOD_TEMPLATE: &str = "what type of food do you like ?";

pub const REPEAT_USERS: [&str; 2] = ["i want a place to stay.", "i don't have preference."];
pub const REPEATED_RESPONSE: &str = "okay , what area of town would you like to stay in ?";
pub const PARAPHRASED_REPEAT: &str =
    "okay , i can help you with that . what area of town would you like to stay in ?";
pub const AFTER_REPEAT: &str = "i have 33 guest houses in the east . do you have a price range ?";

pub const TRAIN_BOOKING_USER: &str = "i 'll be leaving from peterborough and going to cambridge on tuesday , \
sometime after 15:15 . could you book that for me for 2 people ?";
pub const TRAIN_BOOKING_TEMPLATE: &str = "sure thing . i 've booked two tickets on [value_id] . \
the total fee is [value_price] and your reference number is [value_ref] .";
pub const TRAIN_BOOKING_POLISHED: &str = "booking was successful . departure: peterborough, \
destination: cambridge, leave time: 15:19, people: 2, price: 33 pounds, reference number: tl4r46ys . \
is there anything else i can help with ?";

pub const AREA_QUESTION_USER: &str = "i would like to find someplace to visit .";
pub const AREA_QUESTION: &str = "what area of the town do you prefer ?";
pub const AREA_QUESTION_POLISHED: &str =
    "what area of the town do you prefer ? for example north, south, or center ?";

/// Emits the comma-split belief for [`MALFORMED_USER`], then a fee answer.
pub fn malformed_belief_backend() -> ScriptedBackend {
    ScriptTable::new()
        .rule(
            MALFORMED_USER,
            &[(&format!("attraction {MALFORMED_BELIEF}"), 1.0)],
            &[("the entrance fee is [value_price] .", 1.0)],
        )
        .default_rule(&[("general", 1.0)], &[("how can i help you ?", 1.0)])
        .into_backend("malformed-belief", &[])
}

/// Ranks a template needing an unknown day above a valid question.
pub fn bad_template_backend() -> ScriptedBackend {
    ScriptTable::new()
        .rule(
            BAD_TEMPLATE_USER,
            &[(&format!("restaurant {BAD_TEMPLATE_BELIEF}"), 1.0)],
            &[(BAD_TEMPLATE, 0.6), (GOOD_TEMPLATE, 0.4)],
        )
        .default_rule(&[("general", 1.0)], &[("how can i help you ?", 1.0)])
        .into_backend("bad-template", &[])
}

/// Asks for the area, then prefers asking again verbatim.
pub fn repetition_backend() -> ScriptedBackend {
    ScriptTable::new()
        .rule(REPEAT_USERS[0], &[("hotel", 1.0)], &[(REPEATED_RESPONSE, 1.0)])
        .rule(
            REPEAT_USERS[1],
            &[("hotel", 1.0)],
            &[(REPEATED_RESPONSE, 0.7), (AFTER_REPEAT, 0.3)],
        )
        .default_rule(&[("general", 1.0)], &[("how can i help you ?", 1.0)])
        .into_backend("repetition", &[])
}

/// Books train tr5933 and asks an open area question; both trigger polish rules.
pub fn polish_backend() -> ScriptedBackend {
    ScriptTable::new()
        .rule(
            TRAIN_BOOKING_USER,
            &[(
                "train train { departure = peterborough , destination = cambridge , day = tuesday , people = 2 }",
                1.0,
            )],
            &[(TRAIN_BOOKING_TEMPLATE, 1.0)],
        )
        .rule(AREA_QUESTION_USER, &[("attraction", 1.0)], &[(AREA_QUESTION, 1.0)])
        .default_rule(&[("general", 1.0)], &[("how can i help you ?", 1.0)])
        .into_backend("polish", &["tr5933 33 pounds"])
        .with_prompt_log()
}

/// An engine over the bundled database with default settings.
pub fn engine_with(backend: ScriptedBackend) -> Engine {
    let db = crate::data::database().expect("bundled database parses");
    Engine::new(Arc::new(backend), Arc::new(db), EngineConfig::default())
}
