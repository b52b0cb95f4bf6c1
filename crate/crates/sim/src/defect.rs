//! Defect injectors, one per principle, and the signature each leaves.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uxpipe_core::hash::phash;
use uxpipe_core::reward::defect_site_id;
use uxpipe_core::{DefectPrinciple, ScreenHash};

use crate::generate::assign_distinct_panels;
use crate::render::render;
use crate::site::{
    DefectInfo, EdgeKind, FlowStep, Node, NodeRole, Rect, SimSite, TextBlock, Widget, WidgetKind, HEADER_H, MAIN_FLOW,
    VIEWPORT_H,
};
use crate::SimError;

fn principle_salt(p: DefectPrinciple) -> u64 {
    DefectPrinciple::ALL.iter().position(|&q| q == p).unwrap_or(0) as u64 + 0xD3F3_C700
}

/// Click steps of the main flow that leave their node, as `(step index, step)`.
fn main_clicks(site: &SimSite) -> Vec<(usize, FlowStep)> {
    site.flow(MAIN_FLOW)
        .map(|f| {
            f.steps
                .iter()
                .enumerate()
                .filter(|(_, s)| s.input.is_none())
                .map(|(i, s)| (i, s.clone()))
                .collect()
        })
        .unwrap_or_default()
}

fn missing(what: &str) -> SimError {
    SimError::Invalid(format!("site lacks {what}"))
}

/// Mutated copy of a plain site violating `principle`.
pub fn inject_defect(site: &SimSite, principle: DefectPrinciple, defect_seed: u64) -> Result<SimSite, SimError> {
    if let Some(d) = &site.defect {
        return Err(SimError::AlreadyDefective(d.principle));
    }
    let mut s = site.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(defect_seed ^ principle_salt(principle).rotate_left(24) ^ site.seed);
    let (description, target) = match principle {
        DefectPrinciple::Feedback => feedback(&mut s, &mut rng)?,
        DefectPrinciple::Consistency => consistency(&mut s, &mut rng)?,
        DefectPrinciple::Dialog => dialog(&mut s)?,
        DefectPrinciple::Prevention => prevention(&mut s)?,
        DefectPrinciple::Control => control(&mut s, &mut rng)?,
        DefectPrinciple::Reversal => reversal(&mut s),
        DefectPrinciple::Memory => memory(&mut s)?,
        DefectPrinciple::Hierarchy => hierarchy(&mut s, &mut rng)?,
    };
    s.site_id = defect_site_id(&site.site_id, principle.as_str());
    s.defect = Some(DefectInfo {
        principle,
        seed: defect_seed,
        description,
        target,
    });
    s.validate()?;
    Ok(s)
}

type Mutation = (String, Option<(u32, u32)>);

fn feedback(s: &mut SimSite, rng: &mut ChaCha8Rng) -> Result<Mutation, SimError> {
    let total = s.nodes.len();
    let clicks: Vec<(usize, FlowStep)> = main_clicks(s)
        .into_iter()
        .filter(|(_, st)| {
            let mut probe = s.clone();
            probe.edge_mut(st.node, st.widget).is_some_and(|e| {
                e.to = e.from;
                true
            }) && probe.reachable().len() == total
        })
        .collect();
    let (_, step) = clicks.choose(rng).ok_or_else(|| missing("a main-flow click that can stall"))?.clone();
    let edge = s.edge_mut(step.node, step.widget).ok_or_else(|| missing("the flow edge"))?;
    edge.to = edge.from;
    let label = s.widget(step.node, step.widget).map(|w| w.label.clone()).unwrap_or_default();
    Ok((format!("clicking \"{label}\" does nothing"), Some((step.node, step.widget))))
}

const SYNONYMS: [(&str, &str); 4] = [
    ("nav:home", "Start"),
    ("nav:catalog", "Browse"),
    ("nav:account", "Profile"),
    ("nav:help", "Support"),
];

fn consistency(s: &mut SimSite, rng: &mut ChaCha8Rng) -> Result<Mutation, SimError> {
    let mut ids: Vec<u32> = s.nodes.iter().filter(|n| n.id != s.entry).map(|n| n.id).collect();
    ids.shuffle(rng);
    let count = (ids.len() / 2).max(2).min(ids.len());
    let chosen = &ids[..count];
    if chosen.is_empty() {
        return Err(missing("non-entry screens"));
    }
    for &id in chosen {
        let node = s.node_mut(id).expect("chosen from nodes");
        let nav: Vec<usize> = (0..node.widgets.len()).filter(|&i| node.widgets[i].logical.is_some()).collect();
        if nav.len() < 2 {
            continue;
        }
        let rects: Vec<Rect> = nav.iter().map(|&i| node.widgets[i].rect).collect();
        // Rotate positions so no button keeps its slot.
        let shift = rng.random_range(1..nav.len());
        for (k, &i) in nav.iter().enumerate() {
            node.widgets[i].rect = rects[(k + shift) % nav.len()];
        }
        let relabel = nav[rng.random_range(0..nav.len())];
        let w = &mut node.widgets[relabel];
        if let Some((_, synonym)) = SYNONYMS.iter().find(|(k, _)| Some(*k) == w.logical.as_deref()) {
            w.label = (*synonym).to_string();
        }
    }
    Ok((format!("navigation bar rearranged on {count} screens"), None))
}

fn dialog(s: &mut SimSite) -> Result<Mutation, SimError> {
    let success = s.node_by_role(NodeRole::Success).ok_or_else(|| missing("a success screen"))?.id;
    let entry = s.entry;
    let mut target = None;
    s.edges.retain(|e| e.from != success);
    for e in s.edges.iter_mut().filter(|e| e.to == success) {
        e.to = entry;
        target = Some((e.from, e.widget));
    }
    s.nodes.retain(|n| n.id != success);
    for f in s.flows.iter_mut().filter(|f| f.terminal == success) {
        f.terminal = entry;
    }
    Ok(("completing the main task returns to the start without confirmation".into(), target))
}

fn prevention(s: &mut SimSite) -> Result<Mutation, SimError> {
    let confirm = s.node_by_role(NodeRole::ConfirmDelete).ok_or_else(|| missing("a confirmation screen"))?.id;
    let deleted = s.node_by_role(NodeRole::Deleted).ok_or_else(|| missing("a deleted screen"))?.id;
    let mut target = None;
    s.edges.retain(|e| e.from != confirm);
    for e in s.edges.iter_mut().filter(|e| e.to == confirm) {
        e.to = deleted;
        target = Some((e.from, e.widget));
    }
    s.nodes.retain(|n| n.id != confirm);
    for f in &mut s.flows {
        f.steps.retain(|st| st.node != confirm);
    }
    Ok(("destructive action runs without confirmation".into(), target))
}

fn control(s: &mut SimSite, rng: &mut ChaCha8Rng) -> Result<Mutation, SimError> {
    let clicks: Vec<(usize, FlowStep)> = main_clicks(s).into_iter().skip(1).collect();
    let (_, step) = clicks.choose(rng).ok_or_else(|| missing("a mid-flow click"))?.clone();
    let dest = s.edge(step.node, step.widget).ok_or_else(|| missing("the flow edge"))?.to;
    let promo = s.next_node_id();
    let template_nav: Vec<Widget> = s
        .node(s.entry)
        .map(|n| n.widgets.iter().filter(|w| w.fixed).cloned().collect())
        .unwrap_or_default();
    let mut widgets = template_nav.clone();
    let cont_id = widgets.iter().map(|w| w.id + 1).max().unwrap_or(0);
    let dest_title = s.node(dest).map(|n| n.title.clone()).unwrap_or_default();
    widgets.push(Widget {
        id: cont_id,
        kind: WidgetKind::Button,
        label: format!("Continue to {dest_title}"),
        rect: Rect::new(80, 520, 760, 72),
        fixed: false,
        logical: None,
        destructive: false,
    });
    s.nodes.push(Node {
        id: promo,
        role: NodeRole::Promo,
        title: "Special offer!".into(),
        page_height: VIEWPORT_H,
        panels: Vec::new(),
        texts: vec![
            TextBlock {
                x: 80,
                y: HEADER_H + 48,
                scale: 5,
                text: "Special offer!".into(),
            },
            TextBlock {
                x: 80,
                y: 330,
                scale: 3,
                text: "Members save 10% today.".into(),
            },
        ],
        widgets,
        shows_code: false,
    });
    for w in &template_nav {
        let to = s.edge(s.entry, w.id).map(|e| e.to).unwrap_or(s.entry);
        s.edges.push(crate::site::Edge {
            from: promo,
            widget: w.id,
            kind: EdgeKind::Click,
            to,
            guard: None,
        });
    }
    s.edges.push(crate::site::Edge {
        from: promo,
        widget: cont_id,
        kind: EdgeKind::Click,
        to: dest,
        guard: None,
    });
    s.edge_mut(step.node, step.widget).expect("checked above").to = promo;
    for f in &mut s.flows {
        let hits: Vec<usize> = f
            .steps
            .iter()
            .enumerate()
            .filter(|(_, st)| st.input.is_none() && st.node == step.node && st.widget == step.widget)
            .map(|(i, _)| i)
            .collect();
        for i in hits.into_iter().rev() {
            f.steps.insert(
                i + 1,
                FlowStep {
                    node: promo,
                    widget: cont_id,
                    input: None,
                },
            );
        }
    }
    let others: Vec<ScreenHash> = s
        .nodes
        .iter()
        .filter(|n| n.id != promo)
        .map(|n| phash(&render(s, n.id, 0).expect("node renders")))
        .collect();
    assign_distinct_panels(s, promo, &others, rng);
    Ok(("an unrequested offer interrupts the main task".into(), Some((step.node, step.widget))))
}

fn reversal(s: &mut SimSite) -> Mutation {
    let back: Vec<(u32, u32)> = s.edges.iter().filter(|e| e.kind == EdgeKind::Back).map(|e| (e.from, e.widget)).collect();
    s.edges.retain(|e| e.kind != EdgeKind::Back);
    for (node, widget) in &back {
        if let Some(n) = s.node_mut(*node) {
            n.widgets.retain(|w| w.id != *widget);
        }
    }
    (format!("{} back controls removed", back.len()), None)
}

fn memory(s: &mut SimSite) -> Result<Mutation, SimError> {
    let review = s.node_by_role(NodeRole::Review).ok_or_else(|| missing("a review screen"))?.id;
    s.node_mut(review).expect("found").shows_code = false;
    let field = s.node(review).and_then(|n| n.fields().next()).map(|w| w.id);
    Ok(("the reference code must be recalled from an earlier screen".into(), field.map(|f| (review, f))))
}

fn hierarchy(s: &mut SimSite, rng: &mut ChaCha8Rng) -> Result<Mutation, SimError> {
    let clicks: Vec<(usize, FlowStep)> = main_clicks(s)
        .into_iter()
        .filter(|(_, st)| s.widget(st.node, st.widget).is_some_and(|w| !w.fixed))
        .collect();
    let (_, step) = clicks.choose(rng).ok_or_else(|| missing("a main-flow page widget"))?.clone();
    let y = VIEWPORT_H + 100 * rng.random_range(2..=5u32);
    let node = s.node_mut(step.node).expect("flow node");
    let w = node.widget_mut(step.widget).expect("flow widget");
    w.rect = Rect::new(1560, y, 180, 28);
    node.page_height = node.page_height.max(y + 28 + 300);
    Ok(("the main action is small and below the fold".into(), Some((step.node, step.widget))))
}

/// Whether `site` carries the observable signature of `principle`.
pub fn has_signature(site: &SimSite, principle: DefectPrinciple) -> bool {
    let flow_clicks = || site.flows.iter().flat_map(|f| f.steps.iter()).filter(|s| s.input.is_none());
    match principle {
        DefectPrinciple::Feedback => flow_clicks().any(|st| {
            site.edge(st.node, st.widget)
                .is_some_and(|e| e.kind != EdgeKind::Focus && e.to == e.from)
        }),
        DefectPrinciple::Consistency => {
            let mut seen: std::collections::BTreeMap<&str, (&str, Rect)> = Default::default();
            site.nodes.iter().flat_map(|n| n.widgets.iter()).any(|w| match w.logical.as_deref() {
                Some(key) => match seen.get(key) {
                    Some((label, rect)) => *label != w.label || *rect != w.rect,
                    None => {
                        seen.insert(key, (&w.label, w.rect));
                        false
                    }
                },
                None => false,
            })
        }
        DefectPrinciple::Dialog => {
            site.node_by_role(NodeRole::Success).is_none()
                && site.flow(MAIN_FLOW).is_some_and(|f| f.terminal == site.entry)
        }
        DefectPrinciple::Prevention => site
            .nodes
            .iter()
            .flat_map(|n| n.widgets.iter().filter(|w| w.destructive).map(move |w| (n.id, w.id)))
            .filter_map(|(n, w)| site.edge(n, w))
            .any(|e| site.node(e.to).is_some_and(|t| t.role == NodeRole::Deleted) && site.node(e.from).is_some_and(|f| f.role != NodeRole::ConfirmDelete)),
        DefectPrinciple::Control => site
            .edges
            .iter()
            .any(|e| site.node(e.to).is_some_and(|t| t.role == NodeRole::Promo) && flow_clicks().any(|st| st.node == e.from && st.widget == e.widget)),
        DefectPrinciple::Reversal => !site.edges.iter().any(|e| e.kind == EdgeKind::Back),
        DefectPrinciple::Memory => {
            let code_nodes: Vec<u32> = site
                .edges
                .iter()
                .filter(|e| matches!(e.guard, Some(crate::site::Guard::CodeMatches { .. })))
                .map(|e| e.from)
                .collect();
            !code_nodes.is_empty()
                && code_nodes.iter().all(|&n| site.node(n).is_some_and(|n| !n.shows_code))
                && site.nodes.iter().any(|n| n.shows_code)
        }
        DefectPrinciple::Hierarchy => flow_clicks().any(|st| site.widget(st.node, st.widget).is_some_and(|w| !w.fixed && w.rect.y >= VIEWPORT_H)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::generate_site;
    use crate::site::Template;

    #[test]
    fn double_injection_is_rejected() {
        let plain = generate_site(3, Template::Forum);
        let d = inject_defect(&plain, DefectPrinciple::Reversal, 1).unwrap();
        assert_eq!(d.site_id, "forum-3@reversal");
        assert!(matches!(inject_defect(&d, DefectPrinciple::Memory, 1), Err(SimError::AlreadyDefective(_))));
    }

    #[test]
    fn reversal_leaves_no_back_edges() {
        let plain = generate_site(11, Template::Shop);
        assert!(plain.edges.iter().any(|e| e.kind == EdgeKind::Back));
        let d = inject_defect(&plain, DefectPrinciple::Reversal, 0).unwrap();
        assert_eq!(d.edges.iter().filter(|e| e.kind == EdgeKind::Back).count(), 0);
        assert!(d.nodes.iter().flat_map(|n| &n.widgets).all(|w| w.label != "< Back"));
    }

    #[test]
    fn hierarchy_target_is_below_the_fold() {
        let plain = generate_site(5, Template::Jobs);
        let d = inject_defect(&plain, DefectPrinciple::Hierarchy, 9).unwrap();
        let (n, w) = d.defect.as_ref().unwrap().target.unwrap();
        assert!(d.widget(n, w).unwrap().rect.y >= VIEWPORT_H);
    }
}
