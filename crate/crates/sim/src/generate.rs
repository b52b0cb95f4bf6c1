//! Seeded site generation.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uxpipe_core::hash::phash;
use uxpipe_core::ScreenHash;

use crate::render::{palette, render};
use crate::site::{
    Edge, EdgeKind, Flow, FlowStep, Guard, Node, NodeId, NodeRole, Panel, Rect, SimSite, Template, TextBlock, Widget,
    WidgetId, WidgetKind, HEADER_H, MAIN_FLOW, VIEWPORT_H, VIEWPORT_W,
};

/// Minimum pairwise hash distance between the screens of one site.
pub const MIN_SCREEN_DISTANCE: u32 = 9;
const PANEL_ATTEMPTS: usize = 256;

const CONTENT_X: u32 = 80;
const CONTENT_TOP: u32 = 420;
const ROW_H: u32 = 72;
const ROW_GAP: u32 = 24;
const BACK_RECT: Rect = Rect {
    x: 1560,
    y: 136,
    w: 280,
    h: 64,
};

struct Vocab {
    names: &'static [&'static str],
    catalog: &'static str,
    items: &'static [&'static str],
    select: &'static str,
    form: &'static str,
    fields: [(&'static str, &'static str); 2],
    review: &'static str,
    confirm: &'static str,
    success: &'static str,
    history: &'static str,
    record: &'static str,
    destroy: &'static str,
    destroy_yes: &'static str,
    destroyed: &'static str,
    articles: [&'static str; 2],
}

fn vocab(t: Template) -> Vocab {
    match t {
        Template::Shop => Vocab {
            names: &["Cartwheel", "Shelfside", "Basketry"],
            catalog: "Products",
            items: &["Desk lamp", "Wool scarf", "Tea kettle", "Canvas tote", "Field notebook"],
            select: "Add to cart",
            form: "Shipping details",
            fields: [("Full name", "Ada Lovelace"), ("Street address", "12 Analytical Way")],
            review: "Review order",
            confirm: "Place order",
            success: "Order placed",
            history: "Order history",
            record: "Order #1042",
            destroy: "Cancel order",
            destroy_yes: "Yes, cancel it",
            destroyed: "Order cancelled",
            articles: ["Shipping times", "Returns"],
        },
        Template::Booking => Vocab {
            names: &["Staybook", "Harborview", "Nightfall Inns"],
            catalog: "Rooms",
            items: &["Garden room", "Harbor suite", "Loft studio", "Twin room", "Family suite"],
            select: "Reserve",
            form: "Guest details",
            fields: [("Guest name", "Grace Hopper"), ("Email", "grace@example.org")],
            review: "Review booking",
            confirm: "Confirm booking",
            success: "Booking confirmed",
            history: "My bookings",
            record: "Booking #2210",
            destroy: "Cancel booking",
            destroy_yes: "Yes, cancel it",
            destroyed: "Booking cancelled",
            articles: ["Check-in times", "Refund policy"],
        },
        Template::Forum => Vocab {
            names: &["Threadline", "Commonroom", "Porchlight"],
            catalog: "Threads",
            items: &["Welcome thread", "Build logs", "Show and tell", "Bug reports", "Off topic"],
            select: "Reply",
            form: "Write a reply",
            fields: [("Subject", "Great point"), ("Message", "Thanks for sharing")],
            review: "Preview reply",
            confirm: "Post reply",
            success: "Reply posted",
            history: "My posts",
            record: "Post #318",
            destroy: "Delete post",
            destroy_yes: "Yes, delete it",
            destroyed: "Post deleted",
            articles: ["Posting rules", "Formatting"],
        },
        Template::Jobs => Vocab {
            names: &["Jobcrate", "Hirepath", "Roletrack"],
            catalog: "Openings",
            items: &["Data analyst", "Line cook", "Site engineer", "Copy editor", "Bike courier"],
            select: "Apply",
            form: "Your application",
            fields: [("Full name", "Alan Turing"), ("Email", "alan@example.org")],
            review: "Review application",
            confirm: "Submit application",
            success: "Application sent",
            history: "Applications",
            record: "Application #77",
            destroy: "Withdraw application",
            destroy_yes: "Yes, withdraw",
            destroyed: "Application withdrawn",
            articles: ["Interview tips", "Profile help"],
        },
    }
}

fn template_salt(t: Template) -> u64 {
    match t {
        Template::Shop => 0x5a0f_0001,
        Template::Booking => 0x5a0f_0002,
        Template::Forum => 0x5a0f_0003,
        Template::Jobs => 0x5a0f_0004,
    }
}

pub fn plain_site_id(template: Template, seed: u64) -> String {
    format!("{template}-{seed}")
}

struct Builder {
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl Builder {
    fn node(&mut self, role: NodeRole, title: &str) -> NodeId {
        let id = self.nodes.len() as NodeId;
        let page_height = VIEWPORT_H + 100 * self.rng.random_range(0..=8u32);
        self.nodes.push(Node {
            id,
            role,
            title: title.to_string(),
            page_height,
            panels: Vec::new(),
            texts: vec![TextBlock {
                x: CONTENT_X,
                y: HEADER_H + 48,
                scale: 5,
                text: title.to_string(),
            }],
            widgets: Vec::new(),
            shows_code: false,
        });
        id
    }

    fn widget(&mut self, node: NodeId, kind: WidgetKind, label: &str, rect: Rect) -> WidgetId {
        let n = &mut self.nodes[node as usize];
        let id = n.next_widget_id();
        n.widgets.push(Widget {
            id,
            kind,
            label: label.to_string(),
            rect,
            fixed: false,
            logical: None,
            destructive: false,
        });
        id
    }

    fn edge(&mut self, from: NodeId, widget: WidgetId, kind: EdgeKind, to: NodeId, guard: Option<Guard>) {
        self.edges.push(Edge {
            from,
            widget,
            kind,
            to,
            guard,
        });
    }

    /// Next free row in the content column of `node`.
    fn row_rect(&self, node: NodeId, width: u32) -> Rect {
        let rows = self.nodes[node as usize].widgets.iter().filter(|w| !w.fixed && w.rect != BACK_RECT).count() as u32;
        Rect::new(CONTENT_X, CONTENT_TOP + rows * (ROW_H + ROW_GAP), width, ROW_H)
    }

    fn row(&mut self, node: NodeId, kind: WidgetKind, label: &str, kind_edge: EdgeKind, to: NodeId) -> WidgetId {
        let width = match kind {
            WidgetKind::Button => 460,
            WidgetKind::Link => 520,
            WidgetKind::Field | WidgetKind::ListItem => 760,
        };
        let rect = self.row_rect(node, width);
        let w = self.widget(node, kind, label, rect);
        self.edge(node, w, kind_edge, to, None);
        w
    }

    fn field(&mut self, node: NodeId, label: &str) -> WidgetId {
        self.row(node, WidgetKind::Field, label, EdgeKind::Focus, node)
    }

    fn back(&mut self, node: NodeId, to: NodeId) -> WidgetId {
        let w = self.widget(node, WidgetKind::Button, "< Back", BACK_RECT);
        self.edge(node, w, EdgeKind::Back, to, None);
        w
    }

    fn nav(&mut self, node: NodeId, targets: &[(&str, &str, NodeId)]) {
        for (i, (key, label, to)) in targets.iter().enumerate() {
            let rect = Rect::new(1000 + 220 * i as u32, 28, 200, 40);
            let w = self.widget(node, WidgetKind::Link, label, rect);
            let wd = self.nodes[node as usize].widget_mut(w).expect("just added");
            wd.fixed = true;
            wd.logical = Some(format!("nav:{key}"));
            self.edge(node, w, EdgeKind::Click, *to, None);
        }
    }

    fn text(&mut self, node: NodeId, y: u32, scale: u32, text: &str) {
        self.nodes[node as usize].texts.push(TextBlock {
            x: CONTENT_X,
            y,
            scale,
            text: text.to_string(),
        });
    }
}

/// Build a deterministic plain site for `(seed, template)`.
pub fn generate_site(seed: u64, template: Template) -> SimSite {
    let v = vocab(template);
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed ^ template_salt(template).rotate_left(32)),
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    let name = v.names.choose(&mut b.rng).copied().unwrap_or("Site").to_string();
    let code = format!("{:04}", b.rng.random_range(1000..10000u32));
    let n_details = b.rng.random_range(1..=4usize);
    let extras: Vec<NodeRole> = [NodeRole::Settings, NodeRole::Search, NodeRole::About]
        .into_iter()
        .filter(|_| b.rng.random_bool(0.5))
        .collect();

    let home = b.node(NodeRole::Home, &format!("Welcome to {name}"));
    let catalog = b.node(NodeRole::Catalog, v.catalog);
    let details: Vec<NodeId> = (0..n_details).map(|i| b.node(NodeRole::Details, v.items[i])).collect();
    let form = b.node(NodeRole::Form, v.form);
    let review = b.node(NodeRole::Review, v.review);
    let success = b.node(NodeRole::Success, v.success);
    let account = b.node(NodeRole::Account, "Your account");
    let history = b.node(NodeRole::History, v.history);
    let record = b.node(NodeRole::HistoryItem, v.record);
    let confirm = b.node(NodeRole::ConfirmDelete, &format!("{}?", v.destroy));
    let deleted = b.node(NodeRole::Deleted, v.destroyed);
    let help = b.node(NodeRole::Help, "Help center");
    let article = b.node(NodeRole::Article, v.articles[0]);
    let extra_ids: Vec<(NodeRole, NodeId)> = extras
        .iter()
        .map(|&r| {
            let title = match r {
                NodeRole::Settings => "Settings",
                NodeRole::Search => "Search",
                _ => "About us",
            };
            (r, b.node(r, title))
        })
        .collect();

    let nav = [
        ("home", "Home", home),
        ("catalog", v.catalog, catalog),
        ("account", "Account", account),
        ("help", "Help", help),
    ];
    for id in 0..b.nodes.len() as NodeId {
        b.nav(id, &nav);
    }

    let hero = b.row(home, WidgetKind::Button, &format!("Browse {}", v.catalog.to_lowercase()), EdgeKind::Click, catalog);
    b.row(home, WidgetKind::Link, "Your account", EdgeKind::Click, account);
    b.row(home, WidgetKind::Link, "Help center", EdgeKind::Click, help);
    for &(role, id) in &extra_ids {
        let label = match role {
            NodeRole::Settings => "Settings",
            NodeRole::Search => "Search",
            _ => "About us",
        };
        b.row(home, WidgetKind::Link, label, EdgeKind::Click, id);
    }

    let mut first_item = 0;
    for (i, &d) in details.iter().enumerate() {
        let w = b.row(catalog, WidgetKind::ListItem, v.items[i], EdgeKind::Click, d);
        if i == 0 {
            first_item = w;
        }
    }
    b.back(catalog, home);

    let mut select = 0;
    for (i, &d) in details.iter().enumerate() {
        let price = 12 + 7 * i as u32 + b.rng.random_range(0..40u32);
        b.text(d, 300, 3, &format!("From ${price}"));
        let w = b.row(d, WidgetKind::Button, v.select, EdgeKind::Click, form);
        if i == 0 {
            select = w;
        }
        b.back(d, catalog);
    }

    let f1 = b.field(form, v.fields[0].0);
    let f2 = b.field(form, v.fields[1].0);
    let cont = b.row(form, WidgetKind::Button, "Continue", EdgeKind::Submit, review);
    b.edges.last_mut().expect("edge").guard = Some(Guard::FieldsFilled);
    b.back(form, catalog);
    b.nodes[form as usize].shows_code = true;

    let code_field = b.field(review, "Reference code");
    let place = b.row(review, WidgetKind::Button, v.confirm, EdgeKind::Submit, success);
    b.edges.last_mut().expect("edge").guard = Some(Guard::CodeMatches { field: code_field });
    b.back(review, form);
    b.nodes[review as usize].shows_code = true;

    b.text(success, 300, 3, "Thank you. You can close this page.");
    b.row(success, WidgetKind::Button, "Back to home", EdgeKind::Click, home);

    let history_link = b.row(account, WidgetKind::Link, v.history, EdgeKind::Click, history);
    if let Some(&(_, settings)) = extra_ids.iter().find(|(r, _)| *r == NodeRole::Settings) {
        b.row(account, WidgetKind::Link, "Settings", EdgeKind::Click, settings);
    }
    b.back(account, home);

    let record_item = b.row(history, WidgetKind::ListItem, v.record, EdgeKind::Click, record);
    b.back(history, account);

    let destroy = b.row(record, WidgetKind::Button, v.destroy, EdgeKind::Click, confirm);
    b.nodes[record as usize].widget_mut(destroy).expect("widget").destructive = true;
    b.back(record, history);

    b.text(confirm, 300, 3, "This cannot be undone.");
    let yes = b.row(confirm, WidgetKind::Button, v.destroy_yes, EdgeKind::Click, deleted);
    b.nodes[confirm as usize].widget_mut(yes).expect("widget").destructive = true;
    let keep = b.row(confirm, WidgetKind::Button, "Keep it", EdgeKind::Back, record);
    let _ = keep;

    b.row(deleted, WidgetKind::Button, "Back to home", EdgeKind::Click, home);

    let art0 = b.row(help, WidgetKind::ListItem, v.articles[0], EdgeKind::Click, article);
    b.row(help, WidgetKind::ListItem, v.articles[1], EdgeKind::Click, article);
    b.back(help, home);

    b.text(article, 300, 3, "Answers to common questions.");
    b.back(article, help);

    for &(role, id) in &extra_ids {
        match role {
            NodeRole::Settings => {
                b.field(id, "Display name");
                b.row(id, WidgetKind::Button, "Save", EdgeKind::Click, account);
                b.back(id, account);
            }
            NodeRole::Search => {
                b.field(id, "Search");
                b.row(id, WidgetKind::ListItem, v.items[0], EdgeKind::Click, details[0]);
                b.back(id, home);
            }
            _ => {
                b.text(id, 300, 3, "A small team with a big catalog.");
                b.row(id, WidgetKind::Link, "Contact us", EdgeKind::Click, help);
                b.back(id, home);
            }
        }
    }

    let nav_widget = |b: &Builder, node: NodeId, key: &str| -> WidgetId {
        b.nodes[node as usize]
            .widgets
            .iter()
            .find(|w| w.logical.as_deref() == Some(&format!("nav:{key}")))
            .map(|w| w.id)
            .expect("nav widget")
    };
    let click = |node: NodeId, widget: WidgetId| FlowStep {
        node,
        widget,
        input: None,
    };
    let typed = |node: NodeId, widget: WidgetId, text: &str| FlowStep {
        node,
        widget,
        input: Some(text.to_string()),
    };
    let flows = vec![
        Flow {
            name: "browse".into(),
            steps: vec![click(home, hero), click(catalog, first_item)],
            terminal: details[0],
        },
        Flow {
            name: MAIN_FLOW.into(),
            steps: vec![
                click(home, hero),
                click(catalog, first_item),
                click(details[0], select),
                typed(form, f1, v.fields[0].1),
                typed(form, f2, v.fields[1].1),
                click(form, cont),
                typed(review, code_field, &code),
                click(review, place),
            ],
            terminal: success,
        },
        Flow {
            name: "cancel".into(),
            steps: vec![
                click(home, nav_widget(&b, home, "account")),
                click(account, history_link),
                click(history, record_item),
                click(record, destroy),
                click(confirm, yes),
            ],
            terminal: deleted,
        },
        Flow {
            name: "help".into(),
            steps: vec![click(home, nav_widget(&b, home, "help")), click(help, art0)],
            terminal: article,
        },
    ];

    let mut site = SimSite {
        site_id: plain_site_id(template, seed),
        seed,
        template,
        name,
        code,
        entry: home,
        nodes: b.nodes,
        edges: b.edges,
        flows,
        defect: None,
    };
    let mut rng = b.rng;
    let mut hashes: Vec<ScreenHash> = Vec::new();
    for id in 0..site.nodes.len() as NodeId {
        let h = assign_distinct_panels(&mut site, id, &hashes, &mut rng);
        hashes.push(h);
    }
    site
}

fn random_panels(rng: &mut ChaCha8Rng, template: Template, page_height: u32) -> Vec<Panel> {
    let bg = palette(template).background;
    let n = rng.random_range(3..=5);
    (0..n)
        .map(|_| {
            let w = 80 * rng.random_range(4..=16u32);
            let x = 80 * rng.random_range(0..=(VIEWPORT_W - w) / 80);
            let h = 60 * rng.random_range(4..=12u32);
            let span = page_height.saturating_sub(HEADER_H + h) / 60;
            let y = HEADER_H + 60 * rng.random_range(0..=span);
            let level: f64 = [0.18, 0.38, 0.62, 0.85][rng.random_range(0..4)];
            let tint = rng.random_range(0..3usize);
            let mut color = [0u8; 3];
            for (c, &b) in color.iter_mut().zip(bg.iter()) {
                *c = (f64::from(b) * level) as u8;
            }
            color[tint] = color[tint].saturating_add(30);
            Panel {
                rect: Rect::new(x, y, w, h),
                color,
            }
        })
        .collect()
}

/// Re-roll the background panels of `node` until its default render lies at
/// least `MIN_SCREEN_DISTANCE` bits from every hash in `others`; keeps the
/// most distant layout if no attempt succeeds. Returns the final hash.
pub(crate) fn assign_distinct_panels(site: &mut SimSite, node: NodeId, others: &[ScreenHash], rng: &mut ChaCha8Rng) -> ScreenHash {
    let template = site.template;
    let page_height = site.node(node).expect("node exists").page_height;
    let mut best: Option<(u32, Vec<Panel>, ScreenHash)> = None;
    for _ in 0..PANEL_ATTEMPTS {
        let panels = random_panels(rng, template, page_height);
        site.node_mut(node).expect("node exists").panels = panels.clone();
        let h = phash(&render(site, node, 0).expect("node renders"));
        let min = others.iter().map(|o| o.distance(h)).min().unwrap_or(64);
        if min >= MIN_SCREEN_DISTANCE {
            return h;
        }
        if best.as_ref().is_none_or(|(d, _, _)| min > *d) {
            best = Some((min, panels, h));
        }
    }
    let (_, panels, h) = best.expect("at least one attempt");
    site.node_mut(node).expect("node exists").panels = panels;
    h
}
