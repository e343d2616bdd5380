//! Judged head-to-head battles between a challenger system and a baseline,
//! tallied into a win rate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, GenParams};
use crate::hashing::stable_u64;
use crate::model::{Conversation, VerdictChoice};
use crate::pipeline::par_map_ordered;
use crate::prefs::{build_pairwise_prompt, parse_choice, PrefError};

/// Dataset tag recorded on judge conversations built by this module.
pub const BATTLE_DATASET: &str = "arena-battles";

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("no battles to run")]
    NoBattles,
    #[error("battle id {0} appears more than once")]
    DuplicateBattle(String),
    #[error("judge verdict for battle {id} could not be parsed")]
    Verdict {
        id: String,
        #[source]
        source: PrefError,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// One instruction with the two answers to compare. The challenger is the
/// system whose win rate is being measured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Battle {
    pub id: String,
    pub instruction: String,
    pub challenger: String,
    pub baseline: String,
}

/// True when the challenger's answer is shown as Assistant A for this
/// battle. A seeded hash fixes the presentation per battle so reruns
/// present identically while the judge's side bias cannot line up with
/// either system.
pub fn challenger_presented_as_a(seed: u64, id: &str) -> bool {
    stable_u64(&["arena-presentation", &seed.to_string(), id]) % 2 == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BattleOutcome {
    ChallengerWin,
    BaselineWin,
    Tie,
    Unscored,
}

/// Outcome of one battle. `detail` holds the judge's rationale, or the
/// parse failure for an unscored battle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BattleRecord {
    pub id: String,
    pub outcome: BattleOutcome,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArenaTally {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

impl ArenaTally {
    pub fn judged(&self) -> usize {
        self.wins + self.losses + self.ties
    }

    /// Challenger win rate over judged battles, counting each tie as half
    /// a win. `None` until at least one battle has been judged.
    pub fn win_rate(&self) -> Option<f64> {
        let judged = self.judged();
        if judged == 0 {
            None
        } else {
            Some((self.wins as f64 + 0.5 * self.ties as f64) / judged as f64)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArenaOptions {
    pub workers: usize,
    pub strict: bool,
    pub seed: u64,
    pub judge_params: GenParams,
}

impl Default for ArenaOptions {
    fn default() -> Self {
        Self { workers: 4, strict: false, seed: 0, judge_params: GenParams::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArenaReport {
    pub records: Vec<BattleRecord>,
    pub tally: ArenaTally,
    pub unscored: usize,
}

impl ArenaReport {
    pub fn win_rate(&self) -> Option<f64> {
        self.tally.win_rate()
    }
}

/// Judges every battle and tallies the challenger's record. In lenient
/// mode an unparseable verdict leaves the battle unscored and out of the
/// tally; in strict mode it fails the run.
pub fn run_battles(
    gateway: &Gateway,
    judge_endpoint: &str,
    battles: &[Battle],
    options: &ArenaOptions,
) -> Result<ArenaReport, ArenaError> {
    if battles.is_empty() {
        return Err(ArenaError::NoBattles);
    }
    let mut seen = BTreeSet::new();
    for battle in battles {
        if !seen.insert(battle.id.as_str()) {
            return Err(ArenaError::DuplicateBattle(battle.id.clone()));
        }
    }
    let strict = options.strict;
    let results = par_map_ordered(battles.to_vec(), options.workers.max(1), |_, battle| {
        let challenger_first = challenger_presented_as_a(options.seed, &battle.id);
        let (first, second) = if challenger_first {
            (&battle.challenger, &battle.baseline)
        } else {
            (&battle.baseline, &battle.challenger)
        };
        let prompt = Conversation::from_prompt(
            build_pairwise_prompt(&battle.instruction, first, second),
            BATTLE_DATASET,
        );
        let texts = gateway.generate(judge_endpoint, &prompt, &options.judge_params)?;
        match parse_choice(&texts[0]) {
            Ok(verdict) => {
                let outcome = match verdict.choice {
                    VerdictChoice::Tie => BattleOutcome::Tie,
                    VerdictChoice::A if challenger_first => BattleOutcome::ChallengerWin,
                    VerdictChoice::B if !challenger_first => BattleOutcome::ChallengerWin,
                    _ => BattleOutcome::BaselineWin,
                };
                Ok(BattleRecord { id: battle.id, outcome, detail: verdict.rationale })
            }
            Err(err) if !strict => Ok(BattleRecord {
                id: battle.id,
                outcome: BattleOutcome::Unscored,
                detail: err.to_string(),
            }),
            Err(err) => Err(ArenaError::Verdict { id: battle.id, source: err }),
        }
    });
    let mut records = Vec::with_capacity(battles.len());
    let mut tally = ArenaTally::default();
    let mut unscored = 0usize;
    for result in results {
        let record = result?;
        match record.outcome {
            BattleOutcome::ChallengerWin => tally.wins += 1,
            BattleOutcome::BaselineWin => tally.losses += 1,
            BattleOutcome::Tie => tally.ties += 1,
            BattleOutcome::Unscored => unscored += 1,
        }
        records.push(record);
    }
    Ok(ArenaReport { records, tally, unscored })
}

#[cfg(test)]
mod tests {
    use super::*;

    use std::sync::Arc;

    use serde_json::json;

    use crate::gateway::limiter::ManualClock;
    use crate::gateway::mock::{MockReply, MockTransport};
    use crate::gateway::transport::Route;
    use crate::gateway::EndpointConfig;

    fn gateway_with(mock: Arc<MockTransport>) -> Gateway {
        Gateway::builder()
            .endpoint("judge", EndpointConfig::new("http://judge.local"))
            .transport(mock)
            .clock(Arc::new(ManualClock::new()))
            .build()
            .unwrap()
    }

    fn battles(n: usize) -> Vec<Battle> {
        (0..n)
            .map(|i| Battle {
                id: format!("b-{i}"),
                instruction: format!("Translate item {i}."),
                challenger: format!("challenger answer {i} good"),
                baseline: format!("baseline answer {i}"),
            })
            .collect()
    }

    fn assistant_a_block(prompt: &str) -> &str {
        let start = "[Start of Assistant A's Response]";
        let end = "[End of Assistant A's Response]";
        let open = prompt.find(start).unwrap() + start.len();
        let close = prompt.find(end).unwrap();
        prompt[open..close].trim()
    }

    fn content_judge(mock: &MockTransport) {
        mock.on("judge", Route::Generate, |req| {
            let prompt = req.body.as_ref().unwrap()["messages"][0]["text"].as_str().unwrap();
            let choice = if assistant_a_block(prompt).contains("good") { "A" } else { "B" };
            MockReply::ok(json!({"texts": [format!("The better one is clear.\nChosen: [{choice}]")]}))
        });
    }

    #[test]
    fn win_rate_counts_ties_as_half() {
        let tally = ArenaTally { wins: 3, losses: 1, ties: 2 };
        assert_eq!(tally.judged(), 6);
        assert!((tally.win_rate().unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(ArenaTally::default().win_rate(), None);
    }

    #[test]
    fn presentation_is_deterministic_and_varied() {
        let mut as_a = 0;
        for i in 0..40 {
            let id = format!("b-{i}");
            let first = challenger_presented_as_a(7, &id);
            assert_eq!(first, challenger_presented_as_a(7, &id));
            if first {
                as_a += 1;
            }
        }
        assert!(as_a > 0 && as_a < 40);
    }

    #[test]
    fn content_judge_scores_challenger_regardless_of_presentation() {
        let mock = Arc::new(MockTransport::new());
        content_judge(&mock);
        let gateway = gateway_with(Arc::clone(&mock));
        let mut set = battles(8);
        set[5].challenger = "challenger answer 5 plain".into();
        set[5].baseline = "baseline answer 5 good".into();
        let report = run_battles(&gateway, "judge", &set, &ArenaOptions::default()).unwrap();
        assert_eq!(report.tally, ArenaTally { wins: 7, losses: 1, ties: 0 });
        assert_eq!(report.unscored, 0);
        assert!((report.win_rate().unwrap() - 7.0 / 8.0).abs() < 1e-12);
        assert_eq!(report.records[5].outcome, BattleOutcome::BaselineWin);
        assert_eq!(report.records[0].detail, "The better one is clear.");
    }

    #[test]
    fn side_judge_outcomes_follow_presentation() {
        let mock = Arc::new(MockTransport::new());
        mock.on("judge", Route::Generate, |_| {
            MockReply::ok(json!({"texts": ["Chosen: [A]"]}))
        });
        let gateway = gateway_with(Arc::clone(&mock));
        let options = ArenaOptions { seed: 3, ..ArenaOptions::default() };
        let set = battles(10);
        let report = run_battles(&gateway, "judge", &set, &options).unwrap();
        for (battle, record) in set.iter().zip(&report.records) {
            let expected = if challenger_presented_as_a(3, &battle.id) {
                BattleOutcome::ChallengerWin
            } else {
                BattleOutcome::BaselineWin
            };
            assert_eq!(record.outcome, expected);
        }
        assert!(report.tally.wins > 0 && report.tally.losses > 0);
    }

    #[test]
    fn tie_verdicts_split_the_score() {
        let mock = Arc::new(MockTransport::new());
        mock.on("judge", Route::Generate, |_| {
            MockReply::ok(json!({"texts": ["Both equal.\nChosen: [T]"]}))
        });
        let gateway = gateway_with(Arc::clone(&mock));
        let report = run_battles(&gateway, "judge", &battles(4), &ArenaOptions::default()).unwrap();
        assert_eq!(report.tally.ties, 4);
        assert!((report.win_rate().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unparseable_verdicts_are_left_out_of_the_tally() {
        let mock = Arc::new(MockTransport::new());
        mock.on("judge", Route::Generate, |req| {
            let prompt = req.body.as_ref().unwrap()["messages"][0]["text"].as_str().unwrap();
            if prompt.contains("item 2") {
                MockReply::ok(json!({"texts": ["I cannot decide."]}))
            } else {
                MockReply::ok(json!({"texts": ["Chosen: [T]"]}))
            }
        });
        let gateway = gateway_with(Arc::clone(&mock));
        let report = run_battles(&gateway, "judge", &battles(4), &ArenaOptions::default()).unwrap();
        assert_eq!(report.unscored, 1);
        assert_eq!(report.tally.judged(), 3);
        assert_eq!(report.records[2].outcome, BattleOutcome::Unscored);
        assert!(report.records[2].detail.contains("Chosen"));

        let strict = ArenaOptions { strict: true, ..ArenaOptions::default() };
        let err = run_battles(&gateway, "judge", &battles(4), &strict).unwrap_err();
        assert!(matches!(err, ArenaError::Verdict { id, .. } if id == "b-2"));
    }

    #[test]
    fn input_validation() {
        let mock = Arc::new(MockTransport::new());
        let gateway = gateway_with(Arc::clone(&mock));
        let err = run_battles(&gateway, "judge", &[], &ArenaOptions::default()).unwrap_err();
        assert!(matches!(err, ArenaError::NoBattles));
        let mut set = battles(2);
        set[1].id = "b-0".into();
        let err = run_battles(&gateway, "judge", &set, &ArenaOptions::default()).unwrap_err();
        assert!(matches!(err, ArenaError::DuplicateBattle(id) if id == "b-0"));
    }
}
