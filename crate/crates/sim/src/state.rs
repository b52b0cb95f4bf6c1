//! Browsing state and the transition function shared by the environment and
//! the scripted policies.

use std::collections::BTreeMap;

use uxpipe_core::action::ScrollDirection;
use uxpipe_core::Action;

use crate::site::{EdgeKind, Guard, NodeId, SimSite, Widget, WidgetId, WidgetKind, HEADER_H, SCROLL_UNIT_PX, VIEWPORT_H, VIEWPORT_W};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteState {
    pub node: NodeId,
    pub scroll: u32,
    pub focus: Option<WidgetId>,
    /// Field contents, kept for the whole session.
    pub fields: BTreeMap<(NodeId, WidgetId), String>,
}

/// What an action did to the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Navigated { from: NodeId, to: NodeId },
    /// A guarded submit whose guard failed.
    Blocked,
    /// A self-loop edge or a click on nothing.
    NoEffect,
    Focused,
    Typed,
    Scrolled,
    Ignored,
}

impl SiteState {
    pub fn initial(site: &SimSite) -> Self {
        let mut s = Self {
            node: site.entry,
            scroll: 0,
            focus: None,
            fields: BTreeMap::new(),
        };
        s.focus = s.first_empty_field(site, None);
        s
    }

    pub fn field(&self, node: NodeId, widget: WidgetId) -> &str {
        self.fields.get(&(node, widget)).map_or("", String::as_str)
    }

    /// First empty field on the current screen after `after`, in widget order.
    fn first_empty_field(&self, site: &SimSite, after: Option<WidgetId>) -> Option<WidgetId> {
        let node = site.node(self.node)?;
        let mut fields = node.fields().map(|w| w.id);
        if let Some(a) = after {
            let ids: Vec<WidgetId> = fields.collect();
            let start = ids.iter().position(|&id| id == a).map_or(0, |p| p + 1);
            return ids[start..].iter().copied().find(|&id| self.field(self.node, id).is_empty());
        }
        fields.find(|&id| self.field(self.node, id).is_empty())
    }

    pub fn guard_holds(&self, site: &SimSite, node: NodeId, guard: Option<&Guard>) -> bool {
        match guard {
            None => true,
            Some(Guard::FieldsFilled) => site
                .node(node)
                .is_some_and(|n| n.fields().all(|w| !self.field(node, w.id).trim().is_empty())),
            Some(Guard::CodeMatches { field }) => self.field(node, *field).trim() == site.code,
        }
    }

    fn goto(&mut self, site: &SimSite, to: NodeId) {
        self.node = to;
        self.scroll = 0;
        self.focus = None;
        self.focus = self.first_empty_field(site, None);
    }

    fn activate(&mut self, site: &SimSite, widget: WidgetId) -> Outcome {
        let Some(w) = site.widget(self.node, widget) else {
            return Outcome::NoEffect;
        };
        if w.kind == WidgetKind::Field {
            self.focus = Some(widget);
            return Outcome::Focused;
        }
        let Some(edge) = site.edge(self.node, widget) else {
            return Outcome::NoEffect;
        };
        if edge.kind == EdgeKind::Focus {
            return Outcome::NoEffect;
        }
        if !self.guard_holds(site, self.node, edge.guard.as_ref()) {
            return Outcome::Blocked;
        }
        if edge.to == self.node {
            return Outcome::NoEffect;
        }
        let from = self.node;
        self.goto(site, edge.to);
        Outcome::Navigated { from, to: edge.to }
    }

    /// Apply one action.
    pub fn apply(&mut self, site: &SimSite, action: &Action) -> Outcome {
        match action {
            Action::Click { x, y } => match widget_at(site, self, *x, *y) {
                Some(id) => self.activate(site, id),
                None => Outcome::NoEffect,
            },
            Action::Type { text } => match self.focus {
                Some(f) => {
                    self.fields.entry((self.node, f)).or_default().push_str(text);
                    self.focus = self.first_empty_field(site, Some(f));
                    Outcome::Typed
                }
                None => Outcome::NoEffect,
            },
            Action::Scroll { direction, amount } => {
                let max = site.node(self.node).map_or(0, |n| n.max_scroll());
                let delta = amount.saturating_mul(SCROLL_UNIT_PX);
                let next = match direction {
                    ScrollDirection::Down => self.scroll.saturating_add(delta).min(max),
                    ScrollDirection::Up => self.scroll.saturating_sub(delta),
                };
                if next == self.scroll {
                    return Outcome::NoEffect;
                }
                self.scroll = next;
                Outcome::Scrolled
            }
            Action::Key { combo } => {
                let keys: Vec<String> = combo.iter().map(|k| k.to_ascii_lowercase()).collect();
                match keys.as_slice() {
                    [k] if k == "enter" || k == "return" => {
                        let submit = site
                            .edges
                            .iter()
                            .find(|e| e.from == self.node && e.kind == EdgeKind::Submit)
                            .map(|e| e.widget);
                        submit.map_or(Outcome::NoEffect, |w| self.activate(site, w))
                    }
                    [k] if k == "tab" => {
                        let ids: Vec<WidgetId> = site.node(self.node).map(|n| n.fields().map(|w| w.id).collect()).unwrap_or_default();
                        if ids.is_empty() {
                            return Outcome::NoEffect;
                        }
                        let next = match self.focus.and_then(|f| ids.iter().position(|&id| id == f)) {
                            Some(p) => ids[(p + 1) % ids.len()],
                            None => ids[0],
                        };
                        self.focus = Some(next);
                        Outcome::Focused
                    }
                    _ => Outcome::Ignored,
                }
            }
            Action::Wait { .. } | Action::Stop | Action::Score { .. } => Outcome::Ignored,
        }
    }
}

/// Widget id under a viewport point: header widgets first, then page
/// widgets offset by the scroll position.
pub fn widget_at(site: &SimSite, state: &SiteState, x: u32, y: u32) -> Option<WidgetId> {
    let node = site.node(state.node)?;
    if x >= VIEWPORT_W || y >= VIEWPORT_H {
        return None;
    }
    if y < HEADER_H {
        return node.widgets.iter().find(|w| w.fixed && w.rect.contains(x, y)).map(|w| w.id);
    }
    let py = y + state.scroll;
    node.widgets.iter().find(|w| !w.fixed && w.rect.contains(x, py)).map(|w| w.id)
}

/// Whether a page widget is fully inside the content area at the current scroll.
pub fn is_visible(state: &SiteState, w: &Widget) -> bool {
    if w.fixed {
        return true;
    }
    w.rect.y >= state.scroll + HEADER_H && w.rect.bottom() <= state.scroll + VIEWPORT_H
}

/// Click on the widget's centre, or the scroll that brings it into view.
pub fn reach_widget(state: &SiteState, w: &Widget) -> Action {
    if is_visible(state, w) {
        let (cx, cy) = w.rect.center();
        let y = if w.fixed { cy } else { cy - state.scroll };
        return Action::Click { x: cx, y };
    }
    if w.rect.bottom() > state.scroll + VIEWPORT_H {
        let needed = w.rect.bottom() + 40 - (state.scroll + VIEWPORT_H);
        Action::Scroll {
            direction: ScrollDirection::Down,
            amount: needed.div_ceil(SCROLL_UNIT_PX),
        }
    } else {
        let needed = (state.scroll + HEADER_H + 40).saturating_sub(w.rect.y);
        Action::Scroll {
            direction: ScrollDirection::Up,
            amount: needed.div_ceil(SCROLL_UNIT_PX).max(1),
        }
    }
}
