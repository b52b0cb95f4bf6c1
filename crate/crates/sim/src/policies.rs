//! Scripted navigators for exercising the pipeline without a model.
//!
//! Each policy keeps a mirror of the browsing state, advanced with the same
//! transition function the environment uses, so its plan matches what the
//! environment will show.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use uxpipe_core::harness::{Policy, PolicyError, PolicyRequest, Turn};
use uxpipe_core::Action;

use crate::site::{EdgeKind, Guard, NodeId, SimSite, WidgetId, WidgetKind};
use crate::state::{reach_widget, Outcome, SiteState};

fn respond(thought: &str, action: &Action) -> String {
    format!("Thought: {thought}\n{}", action.to_line())
}

fn no_assessment() -> PolicyError {
    PolicyError::Protocol("scripted navigator does not answer the scoring turn".into())
}

fn is_first_query(req: &PolicyRequest) -> bool {
    req.turn == Turn::Step(1) && req.attempt == 0
}

/// Edges a visitor can take from `node` to a different screen right now.
fn exits<'a>(site: &'a SimSite, state: &'a SiteState, node: NodeId) -> impl Iterator<Item = (WidgetId, NodeId)> + 'a {
    site.edges
        .iter()
        .filter(move |e| e.from == node && e.kind != EdgeKind::Focus && e.to != e.from)
        .filter(move |e| state.guard_holds(site, node, e.guard.as_ref()))
        .map(|e| (e.widget, e.to))
}

/// First widget on a shortest path from the current screen to any node
/// satisfying `goal`, in edge order.
fn first_hop(site: &SimSite, state: &SiteState, goal: impl Fn(NodeId) -> bool) -> Option<WidgetId> {
    let mut seen = BTreeSet::from([state.node]);
    let mut queue: VecDeque<(NodeId, WidgetId)> = VecDeque::new();
    for (w, to) in exits(site, state, state.node) {
        if seen.insert(to) {
            queue.push_back((to, w));
        }
    }
    while let Some((n, first)) = queue.pop_front() {
        if goal(n) {
            return Some(first);
        }
        for (_, to) in exits(site, state, n) {
            if seen.insert(to) {
                queue.push_back((to, first));
            }
        }
    }
    None
}

/// Text a scripted visitor types into a field.
fn value_for(site: &SimSite, node: NodeId, field: WidgetId) -> String {
    let code_field = site
        .edges
        .iter()
        .any(|e| e.from == node && e.guard == Some(Guard::CodeMatches { field }));
    if code_field {
        return site.code.clone();
    }
    site.flows
        .iter()
        .flat_map(|f| f.steps.iter())
        .find(|s| s.node == node && s.widget == field)
        .and_then(|s| s.input.clone())
        .unwrap_or_else(|| "test".to_string())
}

/// Click or scroll toward a widget on the current screen and advance the mirror.
fn act_on(site: &SimSite, state: &mut SiteState, widget: WidgetId) -> Option<(Action, Outcome, String)> {
    let w = site.widget(state.node, widget)?;
    let action = reach_widget(state, w);
    let thought = match action {
        Action::Click { .. } => format!("I will click \"{}\".", w.label),
        _ => format!("\"{}\" is out of view, so I scroll toward it.", w.label),
    };
    let outcome = state.apply(site, &action);
    Some((action, outcome, thought))
}

/// Visits unclicked widgets breadth-first, filling fields as it meets them.
/// Never stops on its own.
pub struct SystematicExplorer {
    site: Arc<SimSite>,
    state: SiteState,
    clicks: BTreeMap<(NodeId, WidgetId), u32>,
}

impl SystematicExplorer {
    pub fn new(site: Arc<SimSite>) -> Self {
        let state = SiteState::initial(&site);
        Self {
            site,
            state,
            clicks: BTreeMap::new(),
        }
    }

    /// Unclicked clickable widgets of `node`, page content before the header.
    fn pending(&self, node: NodeId) -> Vec<WidgetId> {
        let Some(n) = self.site.node(node) else { return Vec::new() };
        let mut ws: Vec<_> = n
            .widgets
            .iter()
            .filter(|w| w.kind != WidgetKind::Field && !self.clicks.contains_key(&(node, w.id)))
            .collect();
        ws.sort_by_key(|w| w.fixed);
        ws.into_iter().map(|w| w.id).collect()
    }

    fn choose(&self) -> Option<WidgetId> {
        if let Some(&w) = self.pending(self.state.node).first() {
            return Some(w);
        }
        if let Some(w) = first_hop(&self.site, &self.state, |n| !self.pending(n).is_empty()) {
            return Some(w);
        }
        exits(&self.site, &self.state, self.state.node)
            .min_by_key(|(w, _)| self.clicks.get(&(self.state.node, *w)).copied().unwrap_or(0))
            .map(|(w, _)| w)
    }
}

impl Policy for SystematicExplorer {
    fn generate(&mut self, req: &PolicyRequest) -> Result<String, PolicyError> {
        if req.turn == Turn::Assessment {
            return Err(no_assessment());
        }
        if is_first_query(req) {
            self.state = SiteState::initial(&self.site);
            self.clicks.clear();
        }
        let node = self.state.node;
        if let Some(f) = self.state.focus.filter(|&f| self.state.field(node, f).is_empty()) {
            let text = value_for(&self.site, node, f);
            let action = Action::Type { text };
            self.state.apply(&self.site, &action);
            return Ok(respond("I fill in the highlighted field.", &action));
        }
        let Some(w) = self.choose() else {
            let action = Action::Wait { ms: 1000 };
            return Ok(respond("Nothing here is clickable.", &action));
        };
        let site = Arc::clone(&self.site);
        let (action, _, thought) = act_on(&site, &mut self.state, w).expect("chosen widget exists");
        if matches!(action, Action::Click { .. }) {
            *self.clicks.entry((node, w)).or_default() += 1;
        }
        Ok(respond(&thought, &action))
    }
}

/// Clicks the same control forever: the home link in the navigation bar,
/// or the first widget when there is none.
pub struct Looper {
    site: Arc<SimSite>,
    state: SiteState,
}

impl Looper {
    pub fn new(site: Arc<SimSite>) -> Self {
        let state = SiteState::initial(&site);
        Self { site, state }
    }
}

impl Policy for Looper {
    fn generate(&mut self, req: &PolicyRequest) -> Result<String, PolicyError> {
        if req.turn == Turn::Assessment {
            return Err(no_assessment());
        }
        if is_first_query(req) {
            self.state = SiteState::initial(&self.site);
        }
        let node = self.site.node(self.state.node).ok_or_else(|| PolicyError::Protocol("lost track of the screen".into()))?;
        let target = node
            .widgets
            .iter()
            .find(|w| w.logical.as_deref() == Some("nav:home"))
            .or_else(|| node.widgets.first())
            .map(|w| w.id);
        let Some(w) = target else {
            return Ok(respond("Nothing to click.", &Action::Wait { ms: 1000 }));
        };
        let site = Arc::clone(&self.site);
        let (action, _, thought) = act_on(&site, &mut self.state, w).expect("widget exists");
        Ok(respond(&thought, &action))
    }
}

/// Retries of an unresponsive flow click before giving up.
pub const MAX_RETRIES: u32 = 2;

/// Executes one named flow from the entry, detouring through whatever
/// screens lie between, and stops when it completes or gets stuck.
pub struct FlowFollower {
    site: Arc<SimSite>,
    flow: String,
    state: SiteState,
    cursor: usize,
    unchanged: u32,
}

impl FlowFollower {
    pub fn new(site: Arc<SimSite>, flow: impl Into<String>) -> Self {
        let state = SiteState::initial(&site);
        Self {
            site,
            flow: flow.into(),
            state,
            cursor: 0,
            unchanged: 0,
        }
    }

    pub fn completed(&self) -> bool {
        self.site.flow(&self.flow).is_some_and(|f| self.cursor >= f.steps.len())
    }

    fn next(&mut self) -> (String, Action) {
        let site = Arc::clone(&self.site);
        let Some(flow) = site.flow(&self.flow) else {
            return (format!("There is no task called {}.", self.flow), Action::Stop);
        };
        let Some(step) = flow.steps.get(self.cursor) else {
            return ("The task is complete.".into(), Action::Stop);
        };
        if self.unchanged > MAX_RETRIES {
            return ("The page does not respond, so I give up on this task.".into(), Action::Stop);
        }
        if self.state.node != step.node {
            let target = step.node;
            return match first_hop(&site, &self.state, |n| n == target) {
                Some(w) => {
                    let (action, _, thought) = act_on(&site, &mut self.state, w).expect("hop widget exists");
                    (thought, action)
                }
                None => ("I cannot find my way to the next part of the task.".into(), Action::Stop),
            };
        }
        match &step.input {
            Some(text) => {
                if self.state.focus != Some(step.widget) {
                    let (action, _, thought) = act_on(&site, &mut self.state, step.widget).expect("flow widget exists");
                    return (thought, action);
                }
                let action = Action::Type { text: text.clone() };
                self.state.apply(&site, &action);
                self.cursor += 1;
                (format!("I type \"{text}\"."), action)
            }
            None => {
                let Some((action, outcome, thought)) = act_on(&site, &mut self.state, step.widget) else {
                    return ("The control I need is missing.".into(), Action::Stop);
                };
                match outcome {
                    Outcome::Navigated { .. } => {
                        self.cursor += 1;
                        self.unchanged = 0;
                    }
                    Outcome::NoEffect | Outcome::Blocked => self.unchanged += 1,
                    _ => {}
                }
                (thought, action)
            }
        }
    }
}

impl Policy for FlowFollower {
    fn generate(&mut self, req: &PolicyRequest) -> Result<String, PolicyError> {
        if req.turn == Turn::Assessment {
            return Err(no_assessment());
        }
        if is_first_query(req) {
            self.state = SiteState::initial(&self.site);
            self.cursor = 0;
            self.unchanged = 0;
        }
        let (thought, action) = self.next();
        Ok(respond(&thought, &action))
    }
}
