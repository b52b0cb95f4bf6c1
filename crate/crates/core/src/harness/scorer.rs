use crate::action::{parse_action, split_response, ActionClass};
use crate::hash::{is_blank, phash};
use crate::nav::{compute_metrics, NavConfig, ObservedStep};

use super::{Policy, PolicyError, PolicyRequest, Turn};

/// Scripted assessor: navigates with an inner policy, watches the screens it
/// is shown and, on the scoring turn, reports unresponsive clicks and scores
/// `round(100 * (1 - same_after_clicks_ratio))`.
pub struct ReflectiveScorer<P> {
    inner: P,
    nav: NavConfig,
    observed: Vec<ObservedStep>,
    quotes: Vec<(u32, String)>,
}

impl<P> ReflectiveScorer<P> {
    pub fn new(inner: P) -> Self {
        Self::with_config(inner, NavConfig::default())
    }

    pub fn with_config(inner: P, nav: NavConfig) -> Self {
        Self {
            inner,
            nav,
            observed: Vec::new(),
            quotes: Vec::new(),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    fn report(&self) -> String {
        let Ok(m) = compute_metrics(&self.observed, &self.nav) else {
            return "No usable screens were observed.\nAction: score(0)".to_string();
        };
        let mut lines = Vec::new();
        let mut unchanged = Vec::new();
        for i in 1..self.observed.len() {
            let (prev, cur) = (&self.observed[i - 1], &self.observed[i]);
            if prev.action == ActionClass::Click && !prev.blank && !cur.blank && self.nav.identity.same(prev.hash, cur.hash) {
                unchanged.push(i);
            }
        }
        for &i in &unchanged {
            let t = i as u32;
            let quote = self
                .quotes
                .iter()
                .find(|(qt, _)| *qt == t)
                .map(|(_, q)| q.as_str())
                .unwrap_or("");
            let severity = if unchanged.len() > 2 { "major" } else { "minor" };
            lines.push(format!("- {severity}: the click at step {t} produced no visible change (\"{quote}\")"));
        }
        if lines.is_empty() {
            lines.push("- no unresponsive clicks observed".to_string());
        }
        let score = (100.0 * (1.0 - m.same_after_clicks_ratio)).round() as u8;
        format!(
            "Usability problems:\n{}\nClicks without change: {}/{}\nAction: score({score})",
            lines.join("\n"),
            m.same_click_transitions,
            m.click_transitions
        )
    }
}

impl<P: Policy> Policy for ReflectiveScorer<P> {
    fn generate(&mut self, request: &PolicyRequest) -> Result<String, PolicyError> {
        match request.turn {
            Turn::Assessment => Ok(self.report()),
            Turn::Step(t) => {
                if t == 1 && request.attempt == 0 {
                    self.observed.clear();
                    self.quotes.clear();
                }
                let text = self.inner.generate(request)?;
                let screen = request
                    .current_screen()
                    .ok_or_else(|| PolicyError::Protocol("step request without a screenshot".into()))?;
                let action = parse_action(&text, None).map(|r| r.kind.class()).unwrap_or(ActionClass::Other);
                let step = ObservedStep {
                    hash: phash(screen),
                    blank: is_blank(screen),
                    action,
                };
                self.observed.truncate(t as usize - 1);
                self.observed.push(step);
                self.quotes.retain(|(qt, _)| *qt != t);
                self.quotes.push((t, split_response(&text).0));
                Ok(text)
            }
        }
    }
}
