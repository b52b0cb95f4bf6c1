//! Static HTML rendition of a site: one full-page image per screen with an
//! image map over its clickable widgets.

use std::fmt::Write as _;
use std::path::Path;

use crate::render::render_page;
use crate::site::{EdgeKind, SimSite};
use crate::SimError;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Write `index.html` plus `n{id}.html` and `n{id}.png` per screen into `dir`.
pub fn write_static_bundle(site: &SimSite, dir: &Path) -> Result<(), SimError> {
    let io = |e: std::io::Error| SimError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for node in &site.nodes {
        let png = render_page(site, node.id)?.to_png();
        std::fs::write(dir.join(format!("n{}.png", node.id)), png).map_err(io)?;
        let mut areas = String::new();
        for w in &node.widgets {
            let Some(edge) = site.edge(node.id, w.id) else { continue };
            if edge.kind == EdgeKind::Focus || edge.to == node.id {
                continue;
            }
            let r = w.rect;
            let _ = writeln!(
                areas,
                r#"  <area shape="rect" coords="{},{},{},{}" href="n{}.html" alt="{}">"#,
                r.x,
                r.y,
                r.x + r.w,
                r.y + r.h,
                edge.to,
                escape(&w.label)
            );
        }
        let html = format!(
            "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>{title}</title></head>\n<body style=\"margin:0\">\n<img src=\"n{id}.png\" usemap=\"#m\" alt=\"{title}\" style=\"display:block\">\n<map name=\"m\">\n{areas}</map>\n</body></html>\n",
            title = escape(&node.title),
            id = node.id,
        );
        std::fs::write(dir.join(format!("n{}.html", node.id)), html).map_err(io)?;
    }
    let index = format!(
        "<!doctype html>\n<html><head><meta charset=\"utf-8\"><meta http-equiv=\"refresh\" content=\"0; url=n{0}.html\"><title>{1}</title></head><body><a href=\"n{0}.html\">{1}</a></body></html>\n",
        site.entry,
        escape(&site.name)
    );
    std::fs::write(dir.join("index.html"), index).map_err(io)
}
