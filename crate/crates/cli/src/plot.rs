//! Deterministic SVG plot emitters.
//!
//! Plots are plain data renderings with no external rendering dependency:
//! an arrow map of directions/speeds, a binned heatmap of an association
//! surface, and an information-criterion scatter. All numeric attributes are
//! formatted with fixed precision so reruns emit identical bytes.

const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;

/// Eight-step sequential color ramp (light to dark blue).
const RAMP: [&str; 8] = [
    "#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5", "#084594",
];

fn f(x: f64) -> String {
    format!("{x:.2}")
}

struct Frame {
    xmin: f64,
    ymin: f64,
    span: f64,
}

impl Frame {
    fn fit(xs: &[f64], ys: &[f64]) -> Frame {
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for (&x, &y) in xs.iter().zip(ys) {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        let span = (xmax - xmin).max(ymax - ymin).max(1e-12);
        Frame { xmin, ymin, span }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.xmin) / self.span * (SIZE - 2.0 * MARGIN)
    }

    /// SVG y grows downward; flip so larger data y is higher on the page.
    fn py(&self, y: f64) -> f64 {
        SIZE - MARGIN - (y - self.ymin) / self.span * (SIZE - 2.0 * MARGIN)
    }
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" \
         viewBox=\"0 0 {s} {s}\">\n<rect width=\"{s}\" height=\"{s}\" fill=\"white\"/>\n\
         <text x=\"{m}\" y=\"24\" font-family=\"monospace\" font-size=\"16\">{title}</text>\n",
        s = f(SIZE),
        m = f(MARGIN),
    )
}

/// Arrow map: one arrow per site pointing along `direction` (radians,
/// measured counterclockwise from east) with length scaled by `speed`.
pub fn quiver_svg(
    xs: &[f64],
    ys: &[f64],
    directions: &[f64],
    speeds: &[f64],
    title: &str,
) -> String {
    let frame = Frame::fit(xs, ys);
    let max_speed = speeds.iter().cloned().fold(1e-12_f64, f64::max);
    let mut out = svg_open(title);
    for i in 0..xs.len() {
        let cx = frame.px(xs[i]);
        let cy = frame.py(ys[i]);
        let len = 6.0 + 18.0 * speeds[i] / max_speed;
        let (dx, dy) = (directions[i].cos(), directions[i].sin());
        // page y points down, so the y component is negated
        let (x2, y2) = (cx + len * dx, cy - len * dy);
        // short head strokes at 150 degrees either side of the shaft
        let head = 4.0;
        let a1 = directions[i] + 2.618;
        let a2 = directions[i] - 2.618;
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#2171b5\" stroke-width=\"1.5\"/>\n",
            f(cx), f(cy), f(x2), f(y2)
        ));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#2171b5\" stroke-width=\"1.5\"/>\n",
            f(x2), f(y2), f(x2 + head * a1.cos()), f(y2 - head * a1.sin())
        ));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#2171b5\" stroke-width=\"1.5\"/>\n",
            f(x2), f(y2), f(x2 + head * a2.cos()), f(y2 - head * a2.sin())
        ));
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"1.5\" fill=\"#084594\"/>\n",
            f(cx),
            f(cy)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Index into the color ramp for a value on [lo, hi].
pub fn ramp_bin(v: f64, lo: f64, hi: f64) -> usize {
    if !(hi > lo) {
        return 0;
    }
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    ((t * RAMP.len() as f64) as usize).min(RAMP.len() - 1)
}

/// Heatmap of a scalar surface sampled at scattered sites, drawn as filled
/// squares colored by an eight-bin ramp, with the value range in the legend.
pub fn surface_svg(xs: &[f64], ys: &[f64], values: &[f64], title: &str) -> String {
    let frame = Frame::fit(xs, ys);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = svg_open(title);
    let half = 7.0;
    for i in 0..xs.len() {
        let cx = frame.px(xs[i]);
        let cy = frame.py(ys[i]);
        let color = RAMP[ramp_bin(values[i], lo, hi)];
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            f(cx - half),
            f(cy - half),
            f(2.0 * half),
            f(2.0 * half),
            color
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">range [{}, {}]</text>\n",
        f(MARGIN),
        f(SIZE - 12.0),
        f(lo),
        f(hi)
    ));
    out.push_str("</svg>\n");
    out
}

/// Scatter of a reference model's criterion against each competitor's, with
/// the identity line and the share of points favoring the reference.
pub fn criterion_scatter_svg(
    reference: &[f64],
    competitor: &[f64],
    labels: &[String],
    title: &str,
) -> String {
    let all: Vec<f64> = reference.iter().chain(competitor).cloned().collect();
    let frame = Frame::fit(&all, &all);
    let mut out = svg_open(title);
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n",
        f(frame.px(frame.xmin)),
        f(frame.py(frame.ymin)),
        f(frame.px(frame.xmin + frame.span)),
        f(frame.py(frame.ymin + frame.span)),
    ));
    let mut favored = 0usize;
    for i in 0..reference.len() {
        if competitor[i] > reference[i] {
            favored += 1;
        }
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#2171b5\"/>\n",
            f(frame.px(reference[i])),
            f(frame.py(competitor[i]))
        ));
        if let Some(lab) = labels.get(i) {
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\">{}</text>\n",
                f(frame.px(reference[i]) + 6.0),
                f(frame.py(competitor[i]) - 6.0),
                lab
            ));
        }
    }
    let pct = if reference.is_empty() {
        0.0
    } else {
        100.0 * favored as f64 / reference.len() as f64
    };
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">reference favored: {}%</text>\n",
        f(MARGIN),
        f(SIZE - 12.0),
        f(pct)
    ));
    out.push_str("</svg>\n");
    out
}
