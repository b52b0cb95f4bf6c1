//! Action grammar shared by the harness, the trace archive and the
//! environment adapters.
//!
//! A policy response ends with a line of the form `Action: name(args)`.
//! Supported actions:
//!
//! | action | example |
//! |--------|---------|
//! | click  | `click(312, 480)` |
//! | type   | `type("John Doe")` |
//! | scroll | `scroll(down, 3)` |
//! | key    | `key(ctrl+l)` |
//! | wait   | `wait(1000)` |
//! | stop   | `stop()` |
//! | score  | `score(65)` (assessment turn only) |

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ACTION_PREFIX: &str = "Action:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrollDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Click { x: u32, y: u32 },
    Type { text: String },
    Scroll { direction: ScrollDirection, amount: u32 },
    Key { combo: Vec<String> },
    Wait { ms: u64 },
    Stop,
    Score { value: u8 },
}

/// Coarse action category used by the navigation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionClass {
    Click,
    Scroll,
    Other,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Click { .. } => "click",
            Action::Type { .. } => "type",
            Action::Scroll { .. } => "scroll",
            Action::Key { .. } => "key",
            Action::Wait { .. } => "wait",
            Action::Stop => "stop",
            Action::Score { .. } => "score",
        }
    }

    pub fn class(&self) -> ActionClass {
        match self {
            Action::Click { .. } => ActionClass::Click,
            Action::Scroll { .. } => ActionClass::Scroll,
            _ => ActionClass::Other,
        }
    }

    /// The full action line, e.g. `Action: click(3, 4)`.
    pub fn to_line(&self) -> String {
        format!("{ACTION_PREFIX} {self}")
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Click { x, y } => write!(f, "click({x}, {y})"),
            Action::Type { text } => {
                let quoted = serde_json::to_string(text).map_err(|_| fmt::Error)?;
                write!(f, "type({quoted})")
            }
            Action::Scroll { direction, amount } => {
                let d = match direction {
                    ScrollDirection::Up => "up",
                    ScrollDirection::Down => "down",
                };
                write!(f, "scroll({d}, {amount})")
            }
            Action::Key { combo } => write!(f, "key({})", combo.join("+")),
            Action::Wait { ms } => write!(f, "wait({ms})"),
            Action::Stop => f.write_str("stop()"),
            Action::Score { value } => write!(f, "score({value})"),
        }
    }
}

/// A parsed action together with the verbatim line the policy emitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub kind: Action,
    pub raw_text: String,
}

impl ActionRecord {
    /// Record for an action synthesised by the harness rather than parsed
    /// from a policy response.
    pub fn synthesized(kind: Action) -> Self {
        let raw_text = kind.to_line();
        Self { kind, raw_text }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionParseError {
    #[error("no `Action:` line found")]
    NoActionLine,
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("malformed arguments for `{action}`: {detail}")]
    MalformedArguments { action: String, detail: String },
    #[error("click ({x}, {y}) outside the {width}x{height} screenshot")]
    OutOfBounds {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
}

/// Locate the last `Action:` line of `text`.
pub fn find_action_line(text: &str) -> Option<&str> {
    text.lines()
        .rev()
        .map(str::trim)
        .find(|line| line.starts_with(ACTION_PREFIX))
}

/// Parse the last `Action: name(args)` line of a policy response.
///
/// `bounds` is the `(width, height)` of the screenshot the action refers to;
/// click coordinates must lie strictly inside it.
pub fn parse_action(text: &str, bounds: Option<(u32, u32)>) -> Result<ActionRecord, ActionParseError> {
    let line = find_action_line(text).ok_or(ActionParseError::NoActionLine)?;
    let kind = parse_call(line[ACTION_PREFIX.len()..].trim())?;
    if let (Action::Click { x, y }, Some((width, height))) = (&kind, bounds) {
        if *x >= width || *y >= height {
            return Err(ActionParseError::OutOfBounds {
                x: *x,
                y: *y,
                width,
                height,
            });
        }
    }
    Ok(ActionRecord {
        kind,
        raw_text: line.to_string(),
    })
}

/// Parse a bare call such as `scroll(down, 2)`; an optional `Action:` prefix
/// is accepted.
pub fn parse_call(call: &str) -> Result<Action, ActionParseError> {
    let call = call.trim();
    let call = call.strip_prefix(ACTION_PREFIX).map(str::trim).unwrap_or(call);
    let open = call
        .find('(')
        .ok_or_else(|| ActionParseError::UnknownAction(call.to_string()))?;
    let name = call[..open].trim().to_ascii_lowercase();
    let rest = &call[open + 1..];
    let close = rest.rfind(')').ok_or_else(|| malformed(&name, "missing `)`"))?;
    if !rest[close + 1..].trim().is_empty() {
        return Err(malformed(&name, "trailing text after `)`"));
    }
    let args = rest[..close].trim();

    match name.as_str() {
        "click" => {
            let parts = split_args(args);
            if parts.len() != 2 {
                return Err(malformed(&name, "expected two coordinates"));
            }
            let x = parse_uint(&name, parts[0])?;
            let y = parse_uint(&name, parts[1])?;
            Ok(Action::Click {
                x: to_u32(&name, x)?,
                y: to_u32(&name, y)?,
            })
        }
        "type" => {
            let text = if args.starts_with('"') {
                serde_json::from_str::<String>(args)
                    .map_err(|e| malformed(&name, &format!("bad string literal: {e}")))?
            } else {
                args.to_string()
            };
            Ok(Action::Type { text })
        }
        "scroll" => {
            let parts = split_args(args);
            if parts.is_empty() || parts.len() > 2 || parts[0].is_empty() {
                return Err(malformed(&name, "expected direction and optional amount"));
            }
            let direction = match unquote(parts[0]).to_ascii_lowercase().as_str() {
                "up" => ScrollDirection::Up,
                "down" => ScrollDirection::Down,
                other => return Err(malformed(&name, &format!("unknown direction `{other}`"))),
            };
            let amount = match parts.get(1) {
                Some(a) => to_u32(&name, parse_uint(&name, a)?)?,
                None => 1,
            };
            if amount == 0 {
                return Err(malformed(&name, "amount must be positive"));
            }
            Ok(Action::Scroll { direction, amount })
        }
        "key" => {
            let combo: Vec<String> = unquote(args)
                .split(|c: char| c == '+' || c.is_whitespace())
                .map(str::trim)
                .filter(|k| !k.is_empty())
                .map(str::to_string)
                .collect();
            if combo.is_empty() {
                return Err(malformed(&name, "empty key combo"));
            }
            Ok(Action::Key { combo })
        }
        "wait" => {
            let ms = if args.is_empty() {
                1000
            } else {
                parse_uint(&name, args)?
            };
            Ok(Action::Wait { ms })
        }
        "stop" | "finished" => {
            if !args.is_empty() {
                return Err(malformed("stop", "takes no arguments"));
            }
            Ok(Action::Stop)
        }
        "score" => {
            let v = parse_uint(&name, args)?;
            if v > 100 {
                return Err(malformed(&name, "score must be within 0..=100"));
            }
            Ok(Action::Score { value: v as u8 })
        }
        _ => Err(ActionParseError::UnknownAction(name)),
    }
}

/// Split a policy response into its free-text thought and its action line.
/// A leading `Thought:` label is dropped.
pub fn split_response(text: &str) -> (String, Option<String>) {
    let mut lines: Vec<&str> = text.lines().collect();
    let action_idx = lines
        .iter()
        .rposition(|l| l.trim().starts_with(ACTION_PREFIX));
    let action = action_idx.map(|i| lines.remove(i).trim().to_string());
    let thought = lines.join("\n");
    let thought = thought.trim();
    let thought = thought.strip_prefix("Thought:").unwrap_or(thought).trim();
    (thought.to_string(), action)
}

fn split_args(args: &str) -> Vec<&str> {
    if args.is_empty() {
        return Vec::new();
    }
    args.split(',').map(str::trim).collect()
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .or_else(|| s.strip_prefix('\'').and_then(|s| s.strip_suffix('\'')))
        .unwrap_or(s)
}

fn parse_uint(action: &str, s: &str) -> Result<u64, ActionParseError> {
    let s = s.trim();
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(action, &format!("`{s}` is not a non-negative integer")));
    }
    s.parse::<u64>()
        .map_err(|e| malformed(action, &format!("`{s}`: {e}")))
}

fn to_u32(action: &str, v: u64) -> Result<u32, ActionParseError> {
    u32::try_from(v).map_err(|_| malformed(action, "value too large"))
}

fn malformed(action: &str, detail: &str) -> ActionParseError {
    ActionParseError::MalformedArguments {
        action: action.to_string(),
        detail: detail.to_string(),
    }
}
