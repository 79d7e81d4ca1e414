//! SVG rendering of stimuli.
//!
//! Data files keep data-space coordinates (y up); the flip to screen space
//! happens here only.

use std::fmt::Write;

use crate::colorimetry::lightness_to_srgb;
use crate::error::Result;
use crate::geometry::{Point, REGION_PX};
use crate::stimgen::{Channel, StimulusSpec};

pub const TICK_SPACING: f64 = 50.0;
const TICK_LENGTH: f64 = 6.0;
/// Diameter of lightness-channel marks (the shared size midpoint).
pub const LIGHTNESS_MARK_DIAMETER: f64 = 25.0;
/// L* of size-channel marks.
pub const SIZE_MARK_LIGHTNESS: f64 = 60.0;

/// Screen-space y for a data-space y.
pub fn flip_y(y: f64) -> f64 {
    REGION_PX - y
}

/// Rendered geometry of one mark.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkStyle {
    pub radius: f64,
    pub fill: String,
}

pub fn mark_style(stimulus: &StimulusSpec, level: u8) -> Result<MarkStyle> {
    let value = stimulus.encoding.value_for_level(level);
    Ok(match stimulus.channel() {
        Channel::Size => MarkStyle {
            radius: value / 2.0,
            fill: lightness_to_srgb(SIZE_MARK_LIGHTNESS)?.hex(),
        },
        Channel::Lightness => MarkStyle {
            radius: LIGHTNESS_MARK_DIAMETER / 2.0,
            fill: lightness_to_srgb(value)?.hex(),
        },
    })
}

/// Extra markers drawn over a stimulus.
#[derive(Debug, Clone, Default)]
pub struct Overlay {
    /// Predicted perceived mean, drawn as an open circle.
    pub predicted: Option<Point>,
    /// True mean, drawn as a cross.
    pub true_mean: Option<Point>,
}

pub fn emit_svg(stimulus: &StimulusSpec) -> Result<String> {
    emit_svg_with_overlay(stimulus, &Overlay::default())
}

pub fn emit_svg_with_overlay(stimulus: &StimulusSpec, overlay: &Overlay) -> Result<String> {
    stimulus.validate()?;
    let size = REGION_PX;
    let mut svg = String::new();
    // fmt::Write into a String cannot fail.
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>"##);
    let _ = writeln!(svg, r##"<g id="axes" stroke="#000000" stroke-width="1">"##);
    let _ = writeln!(svg, r#"<line class="axis-y" x1="0" y1="0" x2="0" y2="{size}"/>"#);
    let _ = writeln!(svg, r#"<line class="axis-x" x1="0" y1="{size}" x2="{size}" y2="{size}"/>"#);
    let n_ticks = (size / TICK_SPACING) as usize;
    for k in 1..n_ticks {
        let t = TICK_SPACING * k as f64;
        let _ = writeln!(
            svg,
            r#"<line class="tick-x" x1="{t}" y1="{size}" x2="{t}" y2="{}"/>"#,
            size - TICK_LENGTH
        );
        let sy = flip_y(t);
        let _ = writeln!(svg, r#"<line class="tick-y" x1="0" y1="{sy}" x2="{TICK_LENGTH}" y2="{sy}"/>"#);
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g id="marks">"#);
    for (p, level) in stimulus.marks() {
        let style = mark_style(stimulus, level)?;
        let _ = writeln!(
            svg,
            r#"<circle class="mark" data-level="{level}" cx="{}" cy="{}" r="{}" fill="{}"/>"#,
            p.x,
            flip_y(p.y),
            style.radius,
            style.fill
        );
    }
    let _ = writeln!(svg, "</g>");

    if let Some(m) = overlay.true_mean {
        let (cx, cy) = (m.x, flip_y(m.y));
        let _ = writeln!(
            svg,
            r##"<path class="true-mean" d="M{} {cy}H{}M{cx} {}V{}" stroke="#000000" stroke-width="2"/>"##,
            cx - 8.0,
            cx + 8.0,
            cy - 8.0,
            cy + 8.0
        );
    }
    if let Some(m) = overlay.predicted {
        let _ = writeln!(
            svg,
            r##"<circle class="predicted-mean" cx="{}" cy="{}" r="9" fill="none" stroke="#e0218a" stroke-width="2.5"/>"##,
            m.x,
            flip_y(m.y)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
