//! Site graph: nodes with widgets, typed edges, flows and defect metadata.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use uxpipe_core::DefectPrinciple;

use crate::SimError;

pub const VIEWPORT_W: u32 = 1920;
pub const VIEWPORT_H: u32 = 1080;
/// Height of the fixed header holding the navigation bar.
pub const HEADER_H: u32 = 96;
/// Pixels moved per unit of `scroll(direction, amount)`.
pub const SCROLL_UNIT_PX: u32 = 100;

pub type NodeId = u32;
pub type WidgetId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Shop,
    Booking,
    Forum,
    Jobs,
}

impl Template {
    pub const ALL: [Template; 4] = [Template::Shop, Template::Booking, Template::Forum, Template::Jobs];

    pub fn as_str(self) -> &'static str {
        match self {
            Template::Shop => "shop",
            Template::Booking => "booking",
            Template::Forum => "forum",
            Template::Jobs => "jobs",
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Template {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SimError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn contains(&self, px: u32, py: u32) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }

    pub fn center(&self) -> (u32, u32) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidgetKind {
    Button,
    Link,
    Field,
    ListItem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub id: WidgetId,
    pub kind: WidgetKind,
    pub label: String,
    /// Page coordinates, or viewport coordinates when `fixed`.
    pub rect: Rect,
    /// Drawn in the header and unaffected by scrolling.
    #[serde(default)]
    pub fixed: bool,
    /// Identity shared by the same control on different screens, e.g. `nav:home`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logical: Option<String>,
    #[serde(default)]
    pub destructive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Home,
    Catalog,
    Details,
    Form,
    Review,
    Success,
    Account,
    History,
    HistoryItem,
    ConfirmDelete,
    Deleted,
    Help,
    Article,
    Settings,
    Search,
    About,
    Promo,
}

/// Flat background block; these give each screen its coarse appearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Panel {
    pub rect: Rect,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBlock {
    pub x: u32,
    pub y: u32,
    pub scale: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub role: NodeRole,
    pub title: String,
    pub page_height: u32,
    pub panels: Vec<Panel>,
    pub texts: Vec<TextBlock>,
    pub widgets: Vec<Widget>,
    /// Whether the site's reference code is printed on this screen.
    #[serde(default)]
    pub shows_code: bool,
}

impl Node {
    pub fn widget(&self, id: WidgetId) -> Option<&Widget> {
        self.widgets.iter().find(|w| w.id == id)
    }

    pub fn widget_mut(&mut self, id: WidgetId) -> Option<&mut Widget> {
        self.widgets.iter_mut().find(|w| w.id == id)
    }

    pub fn fields(&self) -> impl Iterator<Item = &Widget> {
        self.widgets.iter().filter(|w| w.kind == WidgetKind::Field)
    }

    pub fn max_scroll(&self) -> u32 {
        self.page_height.saturating_sub(VIEWPORT_H)
    }

    pub fn next_widget_id(&self) -> WidgetId {
        self.widgets.iter().map(|w| w.id + 1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Click,
    Back,
    Submit,
    /// Clicking a field focuses it without leaving the screen.
    Focus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Guard {
    /// Every field on the screen holds text.
    FieldsFilled,
    /// The given field holds the site's reference code.
    CodeMatches { field: WidgetId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub widget: WidgetId,
    pub kind: EdgeKind,
    pub to: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Guard>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowStep {
    pub node: NodeId,
    pub widget: WidgetId,
    /// Text typed into the widget; `None` means click it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub name: String,
    pub steps: Vec<FlowStep>,
    pub terminal: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectInfo {
    pub principle: DefectPrinciple,
    pub seed: u64,
    pub description: String,
    /// The widget the mutation centres on, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<(NodeId, WidgetId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSite {
    pub site_id: String,
    pub seed: u64,
    pub template: Template,
    pub name: String,
    /// Reference code shown after the form step and required on review.
    pub code: String,
    pub entry: NodeId,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub flows: Vec<Flow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<DefectInfo>,
}

/// Flow that walks through the site's main task and its closure.
pub const MAIN_FLOW: &str = "purchase";

impl SimSite {
    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn node_by_role(&self, role: NodeRole) -> Option<&Node> {
        self.nodes.iter().find(|n| n.role == role)
    }

    pub fn widget(&self, node: NodeId, widget: WidgetId) -> Option<&Widget> {
        self.node(node).and_then(|n| n.widget(widget))
    }

    /// The first edge leaving through `widget`.
    pub fn edge(&self, node: NodeId, widget: WidgetId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == node && e.widget == widget)
    }

    pub fn edge_mut(&mut self, node: NodeId, widget: WidgetId) -> Option<&mut Edge> {
        self.edges.iter_mut().find(|e| e.from == node && e.widget == widget)
    }

    pub fn flow(&self, name: &str) -> Option<&Flow> {
        self.flows.iter().find(|f| f.name == name)
    }

    pub fn next_node_id(&self) -> NodeId {
        self.nodes.iter().map(|n| n.id + 1).max().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("site serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let site: SimSite = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        site.validate()?;
        Ok(site)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        std::fs::write(path, self.to_text()).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Nodes reachable from the entry through any edge, ignoring guards.
    pub fn reachable(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([self.entry]);
        let mut queue = VecDeque::from([self.entry]);
        while let Some(n) = queue.pop_front() {
            for e in self.edges.iter().filter(|e| e.from == n) {
                if seen.insert(e.to) {
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }

    /// Structural checks: references resolve, the graph is connected from
    /// the entry, and on plain sites every widget has an edge.
    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::Invalid(msg));
        if self.node(self.entry).is_none() {
            return invalid(format!("entry node {} does not exist", self.entry));
        }
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return invalid(format!("duplicate node id {}", n.id));
            }
            if n.page_height < VIEWPORT_H {
                return invalid(format!("node {} is shorter than the viewport", n.id));
            }
            let mut wids = BTreeSet::new();
            for w in &n.widgets {
                if !wids.insert(w.id) {
                    return invalid(format!("node {} has duplicate widget id {}", n.id, w.id));
                }
                let limit = if w.fixed { VIEWPORT_H } else { n.page_height };
                if w.rect.x + w.rect.w > VIEWPORT_W || w.rect.bottom() > limit {
                    return invalid(format!("widget {}/{} lies outside its page", n.id, w.id));
                }
            }
        }
        for e in &self.edges {
            if self.widget(e.from, e.widget).is_none() {
                return invalid(format!("edge from missing widget {}/{}", e.from, e.widget));
            }
            if self.node(e.to).is_none() {
                return invalid(format!("edge {}/{} leads to missing node {}", e.from, e.widget, e.to));
            }
        }
        let reachable = self.reachable();
        if let Some(n) = self.nodes.iter().find(|n| !reachable.contains(&n.id)) {
            return invalid(format!("node {} is unreachable from the entry", n.id));
        }
        if self.defect.is_none() {
            for n in &self.nodes {
                for w in &n.widgets {
                    if self.edge(n.id, w.id).is_none() {
                        return invalid(format!("widget {}/{} ({}) has no edge", n.id, w.id, w.label));
                    }
                }
            }
        }
        for f in &self.flows {
            if self.node(f.terminal).is_none() || f.steps.iter().any(|s| self.widget(s.node, s.widget).is_none()) {
                return invalid(format!("flow {} references missing nodes or widgets", f.name));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_parsing() {
        assert_eq!("Shop".parse::<Template>().unwrap(), Template::Shop);
        assert_eq!(" jobs ".parse::<Template>().unwrap(), Template::Jobs);
        assert!(matches!("bank".parse::<Template>(), Err(SimError::UnknownTemplate(_))));
    }

    #[test]
    fn rect_geometry() {
        let r = Rect::new(10, 20, 30, 40);
        assert!(r.contains(10, 20));
        assert!(r.contains(39, 59));
        assert!(!r.contains(40, 59));
        assert_eq!(r.center(), (25, 40));
        assert_eq!(r.bottom(), 60);
    }
}
