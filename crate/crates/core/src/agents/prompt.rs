//! Text shown to chat players (and, in structured form, to web players).
//!
//! Layout per round:
//!
//! ```text
//! Round: 1 | You have 0 points
//! David's review about the hotel:
//! ~
//! Positive: ...
//! Negative: ...
//! ~
//! Choose your action: [ Go | Don't Go ]
//! ```

use super::{DmObservation, Persona, RoundFeedback, StageContext};

pub const ACTION_CHOICES: &str = "Choose your action: [ Go | Don't Go ]";

pub const CLARIFICATION: &str =
    "Please answer with exactly one of the two options: Go or Don't Go.\nChoose your action: [ Go | Don't Go ]";

/// The game introduction, parameterized by expert name, points target and
/// the number of rounds per game.
pub fn introduction(stage: &StageContext) -> String {
    let name = &stage.expert_display_name;
    format!(
        "Let's play a game!\n###\nIntroduction:\n\
Are you the vacation planner at your house? Think you always know how to choose the best hotel? \
Start to plan your 10-days trip with our travel agents. Just remember - they don't always want the best for you, \
and might have their own strategy to make you book the hotel they try to promote! \
Travel or Trouble is a strategy game in which you will try to outsmart our traveling agents and plan the perfect vacation for you. \
Each game consists of {rounds} rounds, in each round, one of our traveling agents will introduce you to a review for a new hotel \
they think might suit you, and you will have to choose: either book the hotel or stay home.\n\
###\nThe game:\n\
You will play as the traveler and encounter several travel agents in the game. \
In each round, the agent will provide you with a message about the hotel, and you will decide whether to go to the hotel or stay at home. \
Your goal is to go to the good hotels and avoid the bad ones.\n\
Meet your new travel agent: {name}!\n\
You'll be playing the next game with {name} as your travel agent.\n\
You need to earn {target} points to win the game.\n###\n",
        rounds = stage.rounds,
        target = stage.points_target,
    )
}

pub fn intro_message(persona: Option<Persona>, stage: &StageContext) -> String {
    match persona {
        Some(p) => format!("{}\n{}", p.prompt_prefix(), introduction(stage)),
        None => introduction(stage),
    }
}

pub fn round_message(obs: &DmObservation) -> String {
    format!(
        "Round: {} | You have {} points\n{}'s review about the hotel:\n~\nPositive: {}\nNegative: {}\n~\n{ACTION_CHOICES}",
        obs.round_index,
        obs.cumulative_points,
        obs.expert_display_name,
        obs.shown_positive_text.trim(),
        obs.shown_negative_text.trim(),
    )
}

/// The two result lines, e.g. "This hotel is bad, You should have skipped
/// it." / "This round, you earn no points.".
pub fn feedback_lines(fb: &RoundFeedback) -> (&'static str, &'static str) {
    let verdict = match (fb.action.is_go(), fb.quality) {
        (true, false) => "This hotel is bad, You should have skipped it.",
        (true, true) => "This hotel is good, You were right to go.",
        (false, false) => "This hotel is bad, You were right to skip it.",
        (false, true) => "This hotel is good, You should have gone.",
    };
    let earned = if fb.payoff {
        "This round, you earn 1 point."
    } else {
        "This round, you earn no points."
    };
    (verdict, earned)
}

pub fn feedback_message(fb: &RoundFeedback) -> String {
    let (verdict, earned) = feedback_lines(fb);
    format!("Round results:\n{verdict}\n{earned}\n###\n")
}

pub fn next_game_message(points: u32, stage: &StageContext) -> String {
    format!(
        "You earned {points} points, but you needed {target} points to win the game.\nLet's play another game with {name}!\n###\n",
        target = stage.points_target,
        name = stage.expert_display_name,
    )
}

/// The nature text sent to the player for `obs`: the introduction on the
/// first round of a stage's first game, then the previous round's results,
/// then the current round.
pub fn build_llm_prompt(
    persona: Option<Persona>,
    stage: &StageContext,
    obs: &DmObservation,
) -> String {
    let mut text = String::new();
    if obs.round_index == 1 && obs.game_index == 1 {
        text.push_str(&intro_message(persona, stage));
    }
    if let Some(fb) = &obs.last_round_feedback {
        text.push_str(&feedback_message(fb));
    }
    text.push_str(&round_message(obs));
    text
}
