use super::{evaluate, DialogRecord, EvalError, EvalReport, Goal, NluMode, SimAction, UserSimulator};
use crate::engine::{Engine, Session};
use crate::polish::Polisher;
use crate::seqmodel::Role;

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    /// Exchanges per dialog before the simulator gives up.
    pub max_turns: usize,
    /// Dialog `i` runs with session seed `seed + i`.
    pub seed: u64,
    pub nlu: NluMode,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            max_turns: 20,
            seed: 0,
            nlu: NluMode::Structured,
        }
    }
}

fn run_dialog(
    engine: &Engine,
    polisher: &Polisher,
    goal: &Goal,
    index: usize,
    config: &CampaignConfig,
) -> DialogRecord {
    let db = engine.db();
    let mut session = Session::new(format!("sim-{index}"), config.seed.wrapping_add(index as u64));
    let mut sim = UserSimulator::new(goal.clone(), config.nlu);
    let mut record = DialogRecord::new(goal.clone());
    while record.turns < config.max_turns {
        let utterance = match sim.next_action() {
            SimAction::Terminate(text) => {
                record.transcript.push((Role::User, text));
                record.completed = true;
                break;
            }
            SimAction::Say(text) => text,
        };
        record.transcript.push((Role::User, utterance.clone()));
        let turn = match engine.respond(&mut session, &utterance) {
            Ok(turn) => turn,
            Err(e) => {
                record.error = Some(e.to_string());
                break;
            }
        };
        let polished = polisher.polish(&turn, db);
        record.tolerance_events += turn.tolerance_events.len();
        record.transcript.push((Role::System, polished.clone()));
        record.turns += 1;
        sim.observe_turn(db, &turn, &polished);
    }
    record.offered = sim.state.offered;
    record.provided = sim.state.provided;
    record.booked = sim.state.booked;
    record
}

/// Simulates one dialog per goal against `engine` and scores them.
/// Deterministic for a fixed engine, goal list and config.
pub fn run_campaign(
    engine: &Engine,
    goals: &[Goal],
    config: &CampaignConfig,
) -> Result<(EvalReport, Vec<DialogRecord>), EvalError> {
    let polisher = Polisher::default();
    let records: Vec<DialogRecord> = goals
        .iter()
        .enumerate()
        .map(|(i, g)| run_dialog(engine, &polisher, g, i, config))
        .collect();
    let report = evaluate(&records, engine.db())?;
    Ok((report, records))
}
