//! Line charts of per-cell means with CI bars, one line per range class.

use std::fmt::Write;

use crate::measures::{ConditionSummary, Measure, Report};
use crate::stimgen::{CellKey, Channel, CorrelationLevel, RangeClass};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 110.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 48.0;
const Y_TICKS: usize = 5;

fn range_color(r: RangeClass) -> &'static str {
    match r {
        RangeClass::Narrow => "#1b9e77",
        RangeClass::Medium => "#d95f02",
        RangeClass::Wide => "#7570b3",
    }
}

fn measure_label(m: Measure) -> &'static str {
    match m {
        Measure::Magnitude => "mean error magnitude (px)",
        Measure::Bias => "mean bias along gradient (px)",
    }
}

/// Round `span / (ticks - 1)` up to 1, 2 or 5 times a power of ten.
fn nice_step(span: f64, ticks: usize) -> f64 {
    let raw = (span / (ticks - 1) as f64).max(1e-9);
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

/// SVG chart for one measure and channel. The control cell, if present, is a
/// separate point right of the correlation axis. Returns `None` when the report
/// has nothing for this measure and channel.
pub fn emit_condition_chart(report: &Report, measure: Measure, channel: Channel) -> Option<String> {
    let cells: Vec<&ConditionSummary> = report
        .summaries
        .iter()
        .filter(|s| s.measure == measure && s.channel == channel)
        .collect();
    if cells.is_empty() {
        return None;
    }

    let mut lo = cells.iter().map(|s| s.ci_low).fold(f64::INFINITY, f64::min);
    let mut hi = cells.iter().map(|s| s.ci_high).fold(f64::NEG_INFINITY, f64::max);
    if measure == Measure::Bias || lo > 0.0 {
        lo = lo.min(0.0);
    }
    if hi - lo < 1.0 {
        hi = lo + 1.0;
    }
    let step = nice_step(hi - lo, Y_TICKS);
    let y_min = (lo / step).floor() * step;
    let y_max = (hi / step).ceil() * step;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let slots = CorrelationLevel::ALL.len() + 1;
    let x_of = |i: usize| MARGIN_LEFT + plot_w * (i as f64 + 0.5) / slots as f64;
    let y_of = |v: f64| MARGIN_TOP + plot_h * (y_max - v) / (y_max - y_min);

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = write!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{} ({})</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        measure_label(measure),
        channel
    );

    let mut v = y_min;
    while v <= y_max + step * 1e-6 {
        let y = y_of(v);
        let _ = write!(
            svg,
            r##"<line class="grid" x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            format_tick(v, step)
        );
        v += step;
    }
    if y_min < 0.0 && y_max > 0.0 {
        let y = y_of(0.0);
        let _ = write!(
            svg,
            r#"<line class="zero" x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="4 3"/>"#,
            MARGIN_LEFT + plot_w
        );
    }
    let _ = write!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{0:.2}" stroke="black"/><line x1="{MARGIN_LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="black"/>"#,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w
    );
    let labels = CorrelationLevel::ALL.iter().map(|c| c.as_str()).chain(["control"]);
    for (i, label) in labels.enumerate() {
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            x_of(i),
            MARGIN_TOP + plot_h + 18.0
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">correlation</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );

    for (k, range) in RangeClass::ALL.into_iter().enumerate() {
        let color = range_color(range);
        // Small horizontal offsets keep overlapping CI bars readable.
        let dx = (k as f64 - 1.0) * 6.0;
        let points: Vec<(f64, &ConditionSummary)> = CorrelationLevel::ALL
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| {
                cells
                    .iter()
                    .find(|s| s.cell() == CellKey::Test(range, c))
                    .map(|s| (x_of(i) + dx, *s))
            })
            .collect();
        if points.is_empty() {
            continue;
        }
        let path: Vec<String> = points.iter().map(|(x, s)| format!("{x:.2},{:.2}", y_of(s.mean))).collect();
        let _ = write!(
            svg,
            r#"<polyline class="series" data-range="{range}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for (x, s) in &points {
            write_point(&mut svg, *x, s, color, &y_of, range.as_str());
        }
        let ly = MARGIN_TOP + 14.0 + 16.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = write!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{range}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0
        );
    }
    if let Some(control) = cells.iter().find(|s| s.is_control()) {
        write_point(&mut svg, x_of(slots - 1), control, "#444", &y_of, "control");
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn write_point(svg: &mut String, x: f64, s: &ConditionSummary, color: &str, y_of: &impl Fn(f64) -> f64, label: &str) {
    let (y, y0, y1) = (y_of(s.mean), y_of(s.ci_low), y_of(s.ci_high));
    let _ = write!(
        svg,
        r#"<g class="cell" data-cell="{label}" data-mean="{:.4}" data-n="{}"><line class="ci" x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="{color}"/><line x1="{:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="{color}"/><line x1="{:.2}" y1="{y1:.2}" x2="{:.2}" y2="{y1:.2}" stroke="{color}"/><circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/></g>"#,
        s.mean,
        s.n,
        x - 3.0,
        x + 3.0,
        x - 3.0,
        x + 3.0
    );
}

fn format_tick(v: f64, step: f64) -> String {
    if step >= 1.0 {
        format!("{v:.0}")
    } else {
        let digits = (-step.log10().floor()) as usize;
        format!("{v:.digits$}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{ExclusionCounts, SummaryMetadata};

    fn summary(measure: Measure, cell: CellKey, mean: f64) -> ConditionSummary {
        let (range_class, correlation) = match cell {
            CellKey::Test(r, c) => (Some(r), Some(c)),
            CellKey::Control => (None, None),
        };
        ConditionSummary { measure, channel: Channel::Size, range_class, correlation, mean, ci_low: mean - 2.0, ci_high: mean + 2.0, n: 10 }
    }

    fn report() -> Report {
        let mut summaries: Vec<ConditionSummary> = CellKey::test_cells()
            .enumerate()
            .map(|(i, c)| summary(Measure::Bias, c, i as f64 - 3.0))
            .collect();
        summaries.push(summary(Measure::Magnitude, CellKey::Control, 40.0));
        Report {
            summaries,
            exclusions: ExclusionCounts::default(),
            metadata: SummaryMetadata { ci_method: "percentile".into(), bootstrap_unit: "trials".into(), confidence: 0.95, n_boot: 1000, seed: 0 },
        }
    }

    #[test]
    fn one_line_per_range() {
        let svg = emit_condition_chart(&report(), Measure::Bias, Channel::Size).unwrap();
        assert_eq!(svg.matches(r#"class="series""#).count(), 3);
        assert_eq!(svg.matches(r#"class="cell""#).count(), 9);
        assert_eq!(svg.matches(r#"class="zero""#).count(), 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn control_only_and_missing() {
        let r = report();
        let svg = emit_condition_chart(&r, Measure::Magnitude, Channel::Size).unwrap();
        assert_eq!(svg.matches(r#"data-cell="control""#).count(), 1);
        assert_eq!(svg.matches(r#"class="series""#).count(), 0);
        assert!(emit_condition_chart(&r, Measure::Bias, Channel::Lightness).is_none());
    }

    #[test]
    fn steps() {
        assert_eq!(nice_step(10.0, 5), 5.0);
        assert_eq!(nice_step(0.7, 5), 0.2);
        assert_eq!(nice_step(100.0, 5), 50.0);
    }
}
