//! Decision-maker agents.
//!
//! Every DM sees only a [`DmObservation`]: the text of the one review the
//! expert revealed plus its own running score and last-round result. Scores
//! and the true quality of the current hotel are never part of it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::DmKind;
use crate::oracle::OracleError;
use crate::rng::SimRng;

pub mod chat;
pub mod llm;
pub mod prompt;
pub mod scripted;
pub mod sentiment;

pub use chat::{ChatBackend, ChatError, ChatMessage, ChatRole, ChatTranscript};
pub use llm::{parse_llm_action, LlmDm};
pub use prompt::build_llm_prompt;
pub use sentiment::{sentiment_decide, SentimentDm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    DontGo,
    Go,
}

impl Action {
    pub fn is_go(self) -> bool {
        self == Action::Go
    }
}

impl From<bool> for Action {
    fn from(go: bool) -> Self {
        if go {
            Action::Go
        } else {
            Action::DontGo
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "go" => Ok(Action::Go),
            "dont_go" => Ok(Action::DontGo),
            other => Err(format!("invalid action `{other}` (expected `go` or `dont_go`)")),
        }
    }
}

/// Result of the previous round, revealed to the DM after it acted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundFeedback {
    pub action: Action,
    pub quality: bool,
    pub payoff: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmObservation {
    pub shown_positive_text: String,
    pub shown_negative_text: String,
    pub round_index: u32,
    pub cumulative_points: u32,
    pub last_round_feedback: Option<RoundFeedback>,
    pub expert_display_name: String,
    pub stage_index: u32,
    pub game_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageContext {
    pub stage_index: u32,
    pub expert_display_name: String,
    pub points_target: u32,
    pub rounds: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreviousGame {
    pub points: u32,
    pub final_feedback: Option<RoundFeedback>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameContext {
    pub stage_index: u32,
    pub game_index: u32,
    /// The earlier game of the same stage, if this is a second game.
    pub previous_game: Option<PreviousGame>,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("no action could be parsed from reply {reply:?}, even after a clarification turn")]
    Unparsable { reply: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("action log exhausted at round {0}")]
    ReplayExhausted(u32),
}

pub trait DmAgent {
    fn kind(&self) -> DmKind;

    fn begin_stage(&mut self, _stage: &StageContext) {}

    fn begin_game(&mut self, _game: &GameContext) {}

    /// Test-only information leak: called with the current hotel's true
    /// quality right before [`decide`](Self::decide). Every agent except the
    /// quality oracle ignores it.
    fn observe_hidden_quality(&mut self, _quality: bool) {}

    fn decide(&mut self, obs: &DmObservation, rng: &mut SimRng) -> Result<Action, AgentError>;
}

/// Behavioral persona prefixed to an LLM player's first prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Persona {
    Optimistic,
    Pessimistic,
    Price,
    Facilities,
    Room,
    Location,
    Staff,
    Sanitary,
}

impl Persona {
    pub const ALL: [Persona; 8] = [
        Persona::Optimistic,
        Persona::Pessimistic,
        Persona::Price,
        Persona::Facilities,
        Persona::Room,
        Persona::Location,
        Persona::Staff,
        Persona::Sanitary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Persona::Optimistic => "optimistic",
            Persona::Pessimistic => "pessimistic",
            Persona::Price => "price",
            Persona::Facilities => "facilities",
            Persona::Room => "room",
            Persona::Location => "location",
            Persona::Staff => "staff",
            Persona::Sanitary => "sanitary",
        }
    }

    pub fn prompt_prefix(self) -> &'static str {
        match self {
            Persona::Optimistic => "Behave like an optimistic person.",
            Persona::Pessimistic => "Behave like a pessimistic person.",
            Persona::Price => "Behave like a person to whom the hotel's price is important.",
            Persona::Facilities => {
                "Behave like a person who values the facilities offered by the hotel."
            }
            Persona::Room => {
                "Behave like a person who cares about the quality of the room in the hotel."
            }
            Persona::Location => {
                "Behave like a person for whom the location of the hotel is important."
            }
            Persona::Staff => {
                "Behave like a person who cares about the treatment they will receive from the hotel staff."
            }
            Persona::Sanitary => {
                "Behave like a person to whom the sanitary conditions of the hotel are important."
            }
        }
    }

    /// Round-robin assignment over the eight personas by player index.
    pub fn round_robin(player_index: usize) -> Persona {
        Self::ALL[player_index % Self::ALL.len()]
    }
}

impl fmt::Display for Persona {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Persona {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown persona `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_carries_no_hidden_fields() {
        let obs = DmObservation {
            shown_positive_text: "Location".into(),
            shown_negative_text: "Bad hotel.".into(),
            round_index: 2,
            cumulative_points: 0,
            last_round_feedback: None,
            expert_display_name: "David".into(),
            stage_index: 1,
            game_index: 1,
        };
        let json = serde_json::to_value(&obs).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        for k in keys {
            assert!(!k.contains("score"), "{k}");
            assert!(!k.contains("quality"), "{k}");
        }
    }

    #[test]
    fn persona_prefixes() {
        assert_eq!(
            Persona::Price.prompt_prefix(),
            "Behave like a person to whom the hotel's price is important."
        );
        assert_eq!(Persona::round_robin(9), Persona::Pessimistic);
        for p in Persona::ALL {
            assert_eq!(p.as_str().parse::<Persona>().unwrap(), p);
            assert!(p.prompt_prefix().starts_with("Behave like a"));
        }
    }

    #[test]
    fn action_strings() {
        assert_eq!("go".parse::<Action>().unwrap(), Action::Go);
        assert_eq!("dont_go".parse::<Action>().unwrap(), Action::DontGo);
        assert!("maybe".parse::<Action>().is_err());
    }
}
