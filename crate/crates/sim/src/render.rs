//! Flat-rectangle rasterizer with an 8x8 bitmap font.

use font8x8::legacy::BASIC_LEGACY;
use uxpipe_core::Screenshot;

use crate::site::{Node, NodeId, SimSite, Template, Widget, WidgetKind, HEADER_H, VIEWPORT_H, VIEWPORT_W};
use crate::state::SiteState;
use crate::SimError;

pub type Rgb = [u8; 3];

/// Page position of the reference-code line on screens that show it.
pub const CODE_TEXT_POS: (u32, u32) = (80, 330);

#[derive(Debug, Clone, Copy)]
pub struct Palette {
    pub background: Rgb,
    pub header: Rgb,
    pub header_text: Rgb,
    pub accent: Rgb,
    pub text: Rgb,
}

pub fn palette(template: Template) -> Palette {
    match template {
        Template::Shop => Palette {
            background: [236, 232, 224],
            header: [38, 52, 74],
            header_text: [250, 250, 250],
            accent: [196, 84, 36],
            text: [30, 30, 30],
        },
        Template::Booking => Palette {
            background: [226, 236, 240],
            header: [20, 84, 110],
            header_text: [255, 255, 255],
            accent: [18, 120, 96],
            text: [24, 34, 40],
        },
        Template::Forum => Palette {
            background: [238, 238, 244],
            header: [70, 44, 104],
            header_text: [245, 240, 255],
            accent: [92, 64, 170],
            text: [28, 24, 36],
        },
        Template::Jobs => Palette {
            background: [240, 240, 236],
            header: [34, 34, 34],
            header_text: [255, 214, 90],
            accent: [30, 96, 180],
            text: [20, 20, 20],
        },
    }
}

/// RGB8 framebuffer with clipped drawing primitives.
pub struct Canvas {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Canvas {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Self {
        let mut pixels = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            pixels.extend_from_slice(&fill);
        }
        Self { width, height, pixels }
    }

    /// Fill `[x, x+w) x [y, y+h)` clipped to the canvas rows `>= clip_top`.
    pub fn fill(&mut self, x: i64, y: i64, w: u32, h: u32, color: Rgb, clip_top: u32) {
        let x0 = x.max(0);
        let x1 = (x + i64::from(w)).min(i64::from(self.width));
        let y0 = y.max(i64::from(clip_top));
        let y1 = (y + i64::from(h)).min(i64::from(self.height));
        if x0 >= x1 || y0 >= y1 {
            return;
        }
        let stride = self.width as usize * 3;
        let (x0, x1) = (x0 as usize, x1 as usize);
        for row in y0 as usize..y1 as usize {
            let line = &mut self.pixels[row * stride + x0 * 3..row * stride + x1 * 3];
            for px in line.chunks_exact_mut(3) {
                px.copy_from_slice(&color);
            }
        }
    }

    pub fn outline(&mut self, x: i64, y: i64, w: u32, h: u32, thickness: u32, color: Rgb, clip_top: u32) {
        let t = thickness.min(w / 2).min(h / 2);
        self.fill(x, y, w, t, color, clip_top);
        self.fill(x, y + i64::from(h - t), w, t, color, clip_top);
        self.fill(x, y, t, h, color, clip_top);
        self.fill(x + i64::from(w - t), y, t, h, color, clip_top);
    }

    /// Draw ASCII text with glyphs magnified by `scale`; other characters
    /// render as `?`.
    pub fn text(&mut self, x: i64, y: i64, scale: u32, color: Rgb, text: &str, clip_top: u32) {
        let s = i64::from(scale);
        for (i, ch) in text.chars().enumerate() {
            let code = if ch.is_ascii() { ch as usize } else { '?' as usize };
            let glyph = BASIC_LEGACY[code];
            let gx = x + i as i64 * 8 * s;
            if gx >= i64::from(self.width) {
                break;
            }
            for (row, bits) in glyph.iter().enumerate() {
                for col in 0..8 {
                    if bits & (1 << col) != 0 {
                        self.fill(gx + col * s, y + row as i64 * s, scale, scale, color, clip_top);
                    }
                }
            }
        }
    }

    pub fn into_screenshot(self, captured_at_ms: u64) -> Screenshot {
        Screenshot::from_raw(self.width, self.height, self.pixels, captured_at_ms).expect("canvas dimensions match its buffer")
    }
}

pub fn text_width(text: &str, scale: u32) -> u32 {
    text.chars().count() as u32 * 8 * scale
}

fn label_scale(h: u32) -> u32 {
    (h.saturating_sub(12) / 8).clamp(1, 3)
}

fn draw_widget(c: &mut Canvas, p: &Palette, w: &Widget, value: &str, focused: bool, scroll: u32) {
    let (x, y, clip) = if w.fixed {
        (i64::from(w.rect.x), i64::from(w.rect.y), 0)
    } else {
        (i64::from(w.rect.x), i64::from(w.rect.y) - i64::from(scroll), HEADER_H)
    };
    let r = w.rect;
    let scale = label_scale(r.h);
    let ty = y + i64::from(r.h.saturating_sub(8 * scale) / 2);
    match w.kind {
        WidgetKind::Button => {
            c.fill(x, y, r.w, r.h, p.accent, clip);
            let tw = text_width(&w.label, scale).min(r.w);
            c.text(x + i64::from((r.w - tw) / 2), ty, scale, [255, 255, 255], &w.label, clip);
        }
        WidgetKind::Link => {
            let color = if w.fixed { p.header_text } else { p.accent };
            c.text(x + 4, ty, scale, color, &w.label, clip);
            let tw = text_width(&w.label, scale).min(r.w.saturating_sub(4));
            c.fill(x + 4, ty + i64::from(8 * scale) + 2, tw, 2, color, clip);
        }
        WidgetKind::Field => {
            c.fill(x, y, r.w, r.h, [255, 255, 255], clip);
            let (border, t) = if focused { (p.accent, 5) } else { ([150, 150, 150], 3) };
            c.outline(x, y, r.w, r.h, t, border, clip);
            if value.is_empty() {
                c.text(x + 16, ty, scale, [160, 160, 160], &w.label, clip);
            } else {
                c.text(x + 16, ty, scale, p.text, value, clip);
            }
        }
        WidgetKind::ListItem => {
            c.fill(x, y, r.w, r.h, [248, 248, 248], clip);
            c.outline(x, y, r.w, r.h, 2, [120, 120, 120], clip);
            c.text(x + 20, ty, scale, p.text, &w.label, clip);
        }
    }
}

fn draw_node(c: &mut Canvas, site: &SimSite, node: &Node, state: &SiteState) {
    let p = palette(site.template);
    let scroll = state.scroll;
    let off = |y: u32| i64::from(y) - i64::from(scroll);
    for panel in &node.panels {
        let r = panel.rect;
        c.fill(i64::from(r.x), off(r.y), r.w, r.h, panel.color, HEADER_H);
    }
    for t in &node.texts {
        c.text(i64::from(t.x), off(t.y), t.scale, p.text, &t.text, HEADER_H);
    }
    if node.shows_code {
        let (x, y) = CODE_TEXT_POS;
        c.text(i64::from(x), off(y), 3, p.text, &format!("Reference code: {}", site.code), HEADER_H);
    }
    for w in node.widgets.iter().filter(|w| !w.fixed) {
        let value = state.field(node.id, w.id);
        draw_widget(c, &p, w, value, state.focus == Some(w.id), scroll);
    }
    c.fill(0, 0, VIEWPORT_W, HEADER_H, p.header, 0);
    c.text(32, 32, 4, p.header_text, &site.name, 0);
    for w in node.widgets.iter().filter(|w| w.fixed) {
        draw_widget(c, &p, w, "", false, 0);
    }
}

/// Raster of the current screen.
pub fn render_state(site: &SimSite, state: &SiteState, captured_at_ms: u64) -> Result<Screenshot, SimError> {
    let node = site.node(state.node).ok_or(SimError::InvalidNode(state.node))?;
    if state.scroll > node.max_scroll() {
        return Err(SimError::InvalidScroll {
            node: node.id,
            scroll: state.scroll,
            max: node.max_scroll(),
        });
    }
    let mut c = Canvas::new(VIEWPORT_W, VIEWPORT_H, palette(site.template).background);
    draw_node(&mut c, site, node, state);
    Ok(c.into_screenshot(captured_at_ms))
}

/// Whole page of `node` at its full height with empty fields.
pub fn render_page(site: &SimSite, node: NodeId) -> Result<Screenshot, SimError> {
    let n = site.node(node).ok_or(SimError::InvalidNode(node))?;
    let mut state = SiteState::initial(site);
    state.node = node;
    state.focus = None;
    let mut c = Canvas::new(VIEWPORT_W, n.page_height, palette(site.template).background);
    draw_node(&mut c, site, n, &state);
    Ok(c.into_screenshot(0))
}

/// Raster of `node` with empty fields, scrolled by `scroll_offset` pixels.
pub fn render(site: &SimSite, node: NodeId, scroll_offset: u32) -> Result<Screenshot, SimError> {
    let mut state = SiteState::initial(site);
    if site.node(node).is_none() {
        return Err(SimError::InvalidNode(node));
    }
    if node != state.node {
        state.node = node;
        state.focus = site.node(node).and_then(|n| n.fields().next()).map(|w| w.id);
    }
    state.scroll = scroll_offset;
    render_state(site, &state, 0)
}
