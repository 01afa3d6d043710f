//! SVG rendering of modeled and measured power over time.

use std::fmt::Write as _;

use crate::measurement::{Alignment, MeasurementSeries};
use crate::simulate::PowerProfile;
use crate::validate::{Discrepancy, DiscrepancyKind};

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub width: f64,
    pub height: f64,
    pub title: String,
    /// Label event markers with event names.
    pub event_labels: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            width: 960.0,
            height: 420.0,
            title: "Power profile".into(),
            event_labels: true,
        }
    }
}

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 56.0;
const MARGIN_BOTTOM: f64 = 44.0;

struct Frame {
    x0: f64,
    x1: f64,
    y_max: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn x(&self, t: f64) -> f64 {
        self.left + (t - self.x0) / (self.x1 - self.x0) * (self.right - self.left)
    }

    fn y(&self, p: f64) -> f64 {
        self.bottom - p / self.y_max * (self.bottom - self.top)
    }
}

/// Round tick step covering `span` with roughly `target` intervals.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the modeled profile, the aligned measurements (if any), event
/// markers and shaded discrepancy bands as a self-contained SVG document.
pub fn render_svg(
    profile: &PowerProfile,
    measured: Option<(&MeasurementSeries, &Alignment)>,
    discrepancies: &[Discrepancy],
    opts: &PlotOptions,
) -> String {
    let points: Vec<(f64, f64)> = measured
        .map(|(series, alignment)| {
            series
                .samples()
                .iter()
                .map(|s| (alignment.to_trace_time(s.t), s.value))
                .filter(|&(t, _)| profile.contains(t))
                .collect()
        })
        .unwrap_or_default();

    let peak = profile
        .segments()
        .iter()
        .map(|s| s.power)
        .chain(points.iter().map(|p| p.1))
        .fold(0.0_f64, f64::max);
    let y_step = tick_step(if peak > 0.0 { peak * 1.1 } else { 1.0 }, 5.0);
    let y_max = (peak * 1.1 / y_step).ceil().max(1.0) * y_step;
    let frame = Frame {
        x0: profile.t0(),
        x1: profile.t1(),
        y_max,
        left: MARGIN_LEFT,
        right: opts.width - MARGIN_RIGHT,
        top: MARGIN_TOP,
        bottom: opts.height - MARGIN_BOTTOM,
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = opts.width,
        h = opts.height
    );
    svg.push_str(
        "<style>.modeled{fill:none;stroke:#d62728;stroke-width:2}\
         .measured{fill:none;stroke:#1f77b4;stroke-width:1}\
         .event{stroke:#888;stroke-dasharray:3 3}\
         .discrepancy.excess{fill:#ff7f0e;fill-opacity:0.25}\
         .discrepancy.deficit{fill:#9467bd;fill-opacity:0.25}\
         .axis{stroke:#000}.grid{stroke:#eee}</style>\n",
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
        opts.width, opts.height
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" font-size="14" font-weight="bold">{}</text>"#,
        frame.left,
        escape(&opts.title)
    );

    // Discrepancy bands go under everything else.
    for d in discrepancies {
        let a = d.t_start.max(frame.x0);
        let b = d.t_end.min(frame.x1);
        if b <= a {
            continue;
        }
        let kind = match d.kind {
            DiscrepancyKind::Excess => "excess",
            DiscrepancyKind::Deficit => "deficit",
        };
        let _ = writeln!(
            svg,
            r#"<rect class="discrepancy {kind}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"><title>{kind} {:.3}-{:.3} s</title></rect>"#,
            frame.x(a),
            frame.top,
            frame.x(b) - frame.x(a),
            frame.bottom - frame.top,
            d.t_start,
            d.t_end
        );
    }

    // Grid and axes.
    let mut y = 0.0;
    while y <= y_max + 1e-12 {
        let py = frame.y(y);
        let _ = writeln!(
            svg,
            r#"<line class="grid" x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            frame.left,
            frame.right,
            frame.left - 6.0,
            py + 4.0,
            format_tick(y, y_step)
        );
        y += y_step;
    }
    let span = frame.x1 - frame.x0;
    let x_step = tick_step(span, 10.0);
    let mut t = (frame.x0 / x_step).ceil() * x_step;
    while t <= frame.x1 + 1e-9 {
        let px = frame.x(t);
        let _ = writeln!(
            svg,
            r#"<line class="axis" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.bottom,
            frame.bottom + 4.0,
            frame.bottom + 16.0,
            format_tick(t, x_step)
        );
        t += x_step;
    }
    let _ = writeln!(
        svg,
        r#"<polyline class="axis" fill="none" points="{l:.2},{t:.2} {l:.2},{b:.2} {r:.2},{b:.2}"/>"#,
        l = frame.left,
        t = frame.top,
        b = frame.bottom,
        r = frame.right
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        (frame.left + frame.right) / 2.0,
        opts.height - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(14,{:.2}) rotate(-90)" text-anchor="middle">power (W)</text>"#,
        (frame.top + frame.bottom) / 2.0
    );

    // Event markers.
    for e in profile.events() {
        if !profile.contains(e.t) {
            continue;
        }
        let px = frame.x(e.t);
        let _ = write!(
            svg,
            r#"<line class="event" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}"><title>{} @ {} s</title></line>"#,
            frame.top,
            frame.bottom,
            escape(&e.name),
            e.t
        );
        if opts.event_labels {
            let _ = write!(
                svg,
                r#"<text class="event-label" transform="translate({:.2},{:.2}) rotate(-45)" font-size="9">{}</text>"#,
                px + 2.0,
                frame.top - 2.0,
                escape(&e.name)
            );
        }
        svg.push('\n');
    }

    if !points.is_empty() {
        svg.push_str(r#"<polyline class="measured" data-label="measured" points=""#);
        for (i, (t, p)) in points.iter().enumerate() {
            if i > 0 {
                svg.push(' ');
            }
            let _ = write!(svg, "{:.2},{:.2}", frame.x(*t), frame.y(*p));
        }
        svg.push_str("\"/>\n");
    }

    svg.push_str(r#"<path class="modeled" data-label="modeled" d=""#);
    for (i, s) in profile.segments().iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        let _ = write!(
            svg,
            "{cmd}{:.2},{:.2} L{:.2},{:.2} ",
            frame.x(s.t_start),
            frame.y(s.power),
            frame.x(s.t_end),
            frame.y(s.power)
        );
    }
    svg.push_str("\"/>\n");

    // Legend.
    let lx = frame.right - 150.0;
    let mut ly = 16.0;
    let mut legend = |svg: &mut String, class: &str, label: &str| {
        let _ = writeln!(
            svg,
            r#"<line class="{class}" x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0
        );
        ly += 14.0;
    };
    legend(&mut svg, "modeled", "modeled");
    if !points.is_empty() {
        legend(&mut svg, "measured", "measured");
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    format!("{v:.decimals$}")
}
