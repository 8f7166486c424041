//! Chat-LLM decision-maker.
//!
//! One transcript per stage: it opens with the persona prefix and the game
//! introduction, and both games of the stage continue in it.

use std::sync::{Arc, OnceLock};

use regex::Regex;

use super::prompt::{build_llm_prompt, feedback_message, next_game_message, CLARIFICATION};
use super::{
    Action, AgentError, ChatBackend, ChatTranscript, DmAgent, DmObservation, GameContext, Persona,
    StageContext,
};
use crate::game::DmKind;
use crate::rng::SimRng;

/// Reads an action from a free-form reply. "don't go" / "dont go" win over
/// a bare "go"; `None` means the reply needs a clarification turn.
pub fn parse_llm_action(reply: &str) -> Option<Action> {
    static GO_WORD: OnceLock<Regex> = OnceLock::new();
    let text = reply.to_lowercase().replace(['\u{2019}', '`'], "'");
    if text.contains("don't go") || text.contains("dont go") {
        return Some(Action::DontGo);
    }
    let go = GO_WORD.get_or_init(|| Regex::new(r"\bgo\b").unwrap());
    go.is_match(&text).then_some(Action::Go)
}

pub struct LlmDm {
    backend: Arc<dyn ChatBackend>,
    persona: Option<Persona>,
    stage: Option<StageContext>,
    transcript: ChatTranscript,
}

impl LlmDm {
    pub fn new(backend: Arc<dyn ChatBackend>, persona: Option<Persona>) -> Self {
        LlmDm { backend, persona, stage: None, transcript: ChatTranscript::new() }
    }

    pub fn transcript(&self) -> &ChatTranscript {
        &self.transcript
    }

    fn ask(&mut self) -> Result<String, AgentError> {
        let reply = self.backend.complete(&self.transcript)?;
        self.transcript.push_agent(&reply);
        Ok(reply)
    }
}

impl DmAgent for LlmDm {
    fn kind(&self) -> DmKind {
        DmKind::Llm
    }

    fn begin_stage(&mut self, stage: &StageContext) {
        self.stage = Some(stage.clone());
        self.transcript = ChatTranscript::new();
    }

    fn begin_game(&mut self, game: &GameContext) {
        let (Some(prev), Some(stage)) = (game.previous_game, &self.stage) else {
            return;
        };
        if let Some(fb) = &prev.final_feedback {
            self.transcript.push_nature(&feedback_message(fb));
        }
        self.transcript.push_nature(&next_game_message(prev.points, stage));
    }

    fn decide(&mut self, obs: &DmObservation, _rng: &mut SimRng) -> Result<Action, AgentError> {
        let stage = self.stage.clone().unwrap_or_else(|| StageContext {
            stage_index: obs.stage_index,
            expert_display_name: obs.expert_display_name.clone(),
            points_target: 10,
            rounds: 10,
        });
        let text = build_llm_prompt(self.persona, &stage, obs);
        self.transcript.push_nature(&text);
        let reply = self.ask()?;
        if let Some(a) = parse_llm_action(&reply) {
            return Ok(a);
        }
        self.transcript.push_nature(CLARIFICATION);
        let reply = self.ask()?;
        parse_llm_action(&reply).ok_or(AgentError::Unparsable { reply })
    }
}
