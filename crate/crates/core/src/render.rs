//! Standalone SVG figures of single predictions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::BBox;
use crate::error::{Error, Result};
use crate::templates::{HeatmapGrid, PredictionRecord, Query, RegPrediction};

pub const DEFAULT_CANVAS: u32 = 512;
const CAPTION_BAND: u32 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub canvas: u32,
    pub subject_color: String,
    pub object_color: String,
    pub background: String,
    pub stroke_width: f64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            canvas: DEFAULT_CANVAS,
            subject_color: "#1f4fd8".into(),
            object_color: "#d62728".into(),
            background: "#ffffff".into(),
            stroke_width: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenePrediction {
    Reg(RegPrediction),
    Pix(HeatmapGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    query: Query,
    prediction: ScenePrediction,
    canvas: u32,
}

impl Scene {
    /// Exactly one of `reg` and `grid` must be given.
    pub fn new(query: Query, reg: Option<RegPrediction>, grid: Option<HeatmapGrid>, canvas: u32) -> Result<Self> {
        let prediction = match (reg, grid) {
            (Some(r), None) => ScenePrediction::Reg(r),
            (None, Some(g)) => ScenePrediction::Pix(g),
            (Some(_), Some(_)) => return Err(Error::Scene("scene holds both a box and a heatmap".into())),
            (None, None) => return Err(Error::Scene("scene holds no prediction".into())),
        };
        if canvas == 0 {
            return Err(Error::Scene("canvas size must be positive".into()));
        }
        if !query.subject_box.is_finite() {
            return Err(Error::Scene("subject box is not finite".into()));
        }
        if let ScenePrediction::Reg(r) = &prediction {
            if !r.to_box().is_finite() {
                return Err(Error::Scene("predicted box is not finite".into()));
            }
        }
        Ok(Self {
            query,
            prediction,
            canvas,
        })
    }

    pub fn from_record(record: &PredictionRecord, canvas: u32) -> Result<Self> {
        match (record.center.is_some() || record.half.is_some(), record.grid.is_some()) {
            (true, true) => Err(Error::Scene("record holds both a box and a heatmap".into())),
            (true, false) => Self::new(record.query.clone(), Some(record.reg_prediction()?), None, canvas),
            (false, true) => Self::new(record.query.clone(), None, Some(record.heatmap()?), canvas),
            (false, false) => Err(Error::Scene("record holds no prediction".into())),
        }
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn prediction(&self) -> &ScenePrediction {
        &self.prediction
    }

    pub fn caption(&self) -> String {
        format!(
            "({}, {}, {})",
            self.query.subject_word, self.query.relation_word, self.query.object_word
        )
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Fixed-precision number so identical scenes give identical bytes.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn reflect(b: &BBox) -> BBox {
    BBox::new(1.0 - b.center_x, b.center_y, b.half_w, b.half_h)
}

fn rect(out: &mut String, b: &BBox, size: f64, offset: f64, color: &str, width: f64) {
    let Some(c) = BBox::new(b.center_x, b.center_y, b.half_w.max(0.0), b.half_h.max(0.0)).clip_unit() else {
        return;
    };
    let _ = writeln!(
        out,
        r#"  <rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
        num(offset + c.left() * size),
        num(c.top() * size),
        num(2.0 * c.half_w * size),
        num(2.0 * c.half_h * size),
        color,
        num(width)
    );
}

fn panel(out: &mut String, scene: &Scene, style: &RenderStyle, offset: f64, mirrored: bool) {
    let size = scene.canvas as f64;
    let flip = |b: BBox| if mirrored { reflect(&b) } else { b };
    let _ = writeln!(
        out,
        r##"  <rect x="{}" y="0" width="{}" height="{}" fill="{}" stroke="#999999" stroke-width="1"/>"##,
        num(offset),
        num(size),
        num(size),
        style.background
    );
    match &scene.prediction {
        ScenePrediction::Pix(grid) => {
            let m = grid.side();
            let cell = size / m as f64;
            for ((i, j), &v) in grid.cells().indexed_iter() {
                let col = if mirrored { m - 1 - j } else { j };
                let _ = writeln!(
                    out,
                    r#"  <rect x="{}" y="{}" width="{}" height="{}" fill="{}" fill-opacity="{}"/>"#,
                    num(offset + col as f64 * cell),
                    num(i as f64 * cell),
                    num(cell),
                    num(cell),
                    style.object_color,
                    num(v)
                );
            }
        }
        ScenePrediction::Reg(r) => {
            rect(out, &flip(r.to_box()), size, offset, &style.object_color, style.stroke_width);
        }
    }
    rect(
        out,
        &flip(scene.query.subject_box),
        size,
        offset,
        &style.subject_color,
        style.stroke_width,
    );
}

/// SVG 1.1 document with the subject box, the predicted box or shaded grid,
/// and the query caption. With `mirrored_view` the horizontal reflection is
/// drawn in a second panel to the right.
pub fn render_scene(scene: &Scene, style: &RenderStyle, mirrored_view: bool) -> String {
    let size = scene.canvas as f64;
    let panels = if mirrored_view { 2.0 } else { 1.0 };
    let width = size * panels;
    let height = size + CAPTION_BAND as f64;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = num(width),
        h = num(height)
    );
    panel(&mut out, scene, style, 0.0, false);
    if mirrored_view {
        panel(&mut out, scene, style, size, true);
    }
    let _ = writeln!(
        out,
        r#"  <text x="{}" y="{}" font-family="sans-serif" font-size="18" text-anchor="middle">{}</text>"#,
        num(width / 2.0),
        num(size + 22.0),
        escape(&scene.caption())
    );
    out.push_str("</svg>\n");
    out
}
