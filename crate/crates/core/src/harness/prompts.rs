//! Default prompt texts and the per-turn prompt assembly shared by the
//! harness and the training export.

use std::ops::RangeInclusive;

use crate::trace::SessionHistory;

/// Usability-test goal. `{DATE}` is substituted at session start.
pub const DEFAULT_GOAL_TEMPLATE: &str = "Please generate the next move according to the UI screenshot, instruction and previous actions.

Instruction:
Conduct a usability test of this website.

You have a budget of 50 actions you can perform on the website. Use it as efficiently as possible to test all important flows for the website and make the most accurate assessment of usability.

First, list the most important user goals for this site. Then, work through at least three distinct key flows that cover those goals, one by one. Use realistic placeholder data if you need to fill any fields.

If you are using a date picker widget in a booking flow, remember that the target date usually must be in the future. Today's date is {DATE}. If given the option, you should try to use a date picker instead of manually entering the date.The date picker control is usually located immediately to the right of the date field.

If you encounter errors, try your best to complete the flow but if you cannot complete it, move onto another flow.

Do not finish the trace until you have worked through the key flows you listed.";

/// Scoring turn appended after the last navigation step.
pub const DEFAULT_EVAL_PROMPT: &str = "Rate the website usability from 0 to 100.
The score should represent the probability that an average user can successfully use the website's most important flows.
You are testing a real website - the site you are testing is NOT a mock/demo/educational app.
Review the assistant thoughts from each interaction step and create a list of usability problems.
Each observation you make must reference a direct quote from the thought history, and you must rate it as a major or minor issue.
Pay special attention to broken navigation, failed page loads, non-responsive clicks, confusing flows, and unfinished core flows.
For example, look for thoughts that say \"page appears to be stuck or not loading properly,\" \"I need to wait briefly to ensure the page fully load\", and \"I need to wait for the page to load.\"
If this appears multiple times, that is a red flag because the implementation might not contain that functionality and only appears to be loading.
If the thoughts contain \"haven't successfully completed\" that is also a red flag.
End with exactly one final line: Action: score(<number from 0 to 100>).";

/// System message describing the response format and action grammar.
pub const DEFAULT_GROUNDING: &str = "You control a web browser through screenshots. Coordinates are integer pixels measured from the top-left corner of the current screenshot.
Reply with a line starting with \"Thought:\" that explains your reasoning, followed by exactly one final line of the form \"Action: <action>\".
Available actions:
click(x, y)
type(\"text\")  types into the focused field
scroll(up|down, n)
key(name+name)  for example key(enter) or key(ctrl+a)
wait(ms)
stop()  when you have finished testing";

pub const REPROMPT_TEXT: &str = "Your previous reply did not end with a valid action line";

/// Image token that leads the user message of an exported example.
pub const IMAGE_TOKEN: &str = "<image>";

pub fn substitute_date(template: &str, date: &str) -> String {
    template.replace("{DATE}", date)
}

/// Text parts of one policy turn; images are described by the step range
/// whose observations they are.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnPrompt {
    pub system: String,
    pub user_text: String,
    /// 1-based steps whose observations accompany the prompt, oldest first.
    pub image_steps: RangeInclusive<u32>,
}

impl TurnPrompt {
    pub fn image_count(&self) -> usize {
        self.image_steps.clone().count()
    }
}

/// Steps `max(1, t - window + 1)..=t`.
pub fn window_steps(t: u32, window: u32) -> RangeInclusive<u32> {
    let first = t.saturating_sub(window.saturating_sub(1)).max(1);
    first..=t
}

fn history_block(history: &SessionHistory) -> String {
    if history.is_empty() {
        "Previous actions: none".to_string()
    } else {
        format!("Previous actions:\n{}", history.to_text())
    }
}

/// Prompt for navigation step `t`; `history` covers steps `1..t`.
pub fn step_prompt(
    grounding: &str,
    goal: &str,
    history: &SessionHistory,
    t: u32,
    budget: u32,
    window: u32,
) -> TurnPrompt {
    let image_steps = window_steps(t, window);
    let n = image_steps.clone().count();
    let user_text = format!(
        "{goal}\n\n{}\n\nStep {t} of {budget}. {n} screenshot(s) attached in chronological order; the last one is the current screen.",
        history_block(history)
    );
    TurnPrompt {
        system: grounding.to_string(),
        user_text,
        image_steps,
    }
}

/// Prompt for the scoring turn after `steps` navigation steps.
pub fn assessment_prompt(
    grounding: &str,
    goal: &str,
    eval_prompt: &str,
    history: &SessionHistory,
    steps: u32,
    window: u32,
) -> TurnPrompt {
    let user_text = format!("{goal}\n\n{}\n\n{eval_prompt}", history_block(history));
    TurnPrompt {
        system: grounding.to_string(),
        user_text,
        image_steps: window_steps(steps, window),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_last_five() {
        assert_eq!(window_steps(1, 5), 1..=1);
        assert_eq!(window_steps(3, 5), 1..=3);
        assert_eq!(window_steps(5, 5), 1..=5);
        assert_eq!(window_steps(50, 5), 46..=50);
        assert_eq!(window_steps(7, 1), 7..=7);
    }

    #[test]
    fn date_is_substituted() {
        let goal = substitute_date(DEFAULT_GOAL_TEMPLATE, "2025-01-31");
        assert!(goal.contains("Today's date is 2025-01-31."));
        assert!(!goal.contains("{DATE}"));
    }

    #[test]
    fn eval_prompt_ends_with_score_instruction() {
        assert!(DEFAULT_EVAL_PROMPT.ends_with("Action: score(<number from 0 to 100>)."));
    }

    #[test]
    fn step_prompt_mentions_history() {
        let p = step_prompt("sys", "goal", &SessionHistory::default(), 1, 50, 5);
        assert!(p.user_text.contains("Previous actions: none"));
        assert_eq!(p.image_count(), 1);
    }
}
