//! Standalone SVG chart per characteristic: scores in the title block,
//! overlaid class histograms and the effective range as a shaded band.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::reasoner::{Direction, EffectiveRange, FeatureSummary};

pub const HISTOGRAM_BINS: usize = 20;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 620.0;
const TOP: f64 = 80.0;
const BOTTOM: f64 = 340.0;

/// Counts of one feature's raw values over 20 equal bins of the observed
/// range, split by target class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub min: f64,
    pub max: f64,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl ClassHistogram {
    pub fn new(values: &[f64], targets: &[bool]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut h = ClassHistogram {
            min,
            max,
            positive: vec![0; HISTOGRAM_BINS],
            negative: vec![0; HISTOGRAM_BINS],
        };
        for (&v, &t) in values.iter().zip(targets) {
            let b = h.bin(v);
            if t {
                h.positive[b] += 1;
            } else {
                h.negative[b] += 1;
            }
        }
        h
    }

    pub fn bin(&self, v: f64) -> usize {
        if self.max <= self.min {
            return 0;
        }
        let b = ((v - self.min) / (self.max - self.min) * HISTOGRAM_BINS as f64).floor();
        (b.max(0.0) as usize).min(HISTOGRAM_BINS - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub target: String,
    pub feature: String,
    pub dis: f64,
    pub duf: f64,
    pub dos: f64,
    pub der: Option<EffectiveRange>,
    pub histogram: ClassHistogram,
}

impl ChartSpec {
    pub fn new(target: &str, summary: &FeatureSummary, raw_values: &[f64], targets: &[bool]) -> Self {
        ChartSpec {
            target: target.to_string(),
            feature: summary.name.clone(),
            dis: summary.dis,
            duf: summary.duf,
            dos: summary.dos,
            der: summary.der,
            histogram: ClassHistogram::new(raw_values, targets),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

pub fn render_chart(spec: &ChartSpec) -> String {
    let h = &spec.histogram;
    let span = if h.max > h.min { h.max - h.min } else { 1.0 };
    let x_of = |v: f64| LEFT + (v - h.min) / span * (RIGHT - LEFT);
    let peak = h
        .positive
        .iter()
        .chain(&h.negative)
        .copied()
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let bin_w = (RIGHT - LEFT) / HISTOGRAM_BINS as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="28" font-size="16" font-weight="bold">{} ({})</text>"#,
        escape(&spec.feature),
        escape(&spec.target)
    );
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="50" font-size="13">DIS {:.3}   DUF {:.3}   DOS {:.3}</text>"#,
        spec.dis, spec.duf, spec.dos
    );
    let der_text = match &spec.der {
        Some(d) => format!(
            "DER [{}, {}] {}",
            value(d.lower),
            value(d.upper),
            match d.direction {
                Direction::Low => "low",
                Direction::High => "high",
            }
        ),
        None => "DER none".to_string(),
    };
    let _ = writeln!(s, r#"<text x="{LEFT}" y="68" font-size="13">{}</text>"#, escape(&der_text));

    if let Some(d) = &spec.der {
        let (x0, x1) = (x_of(d.lower), x_of(d.upper));
        let _ = writeln!(
            s,
            r##"<rect class="der" x="{:.2}" y="{TOP}" width="{:.2}" height="{:.2}" fill="#f2c94c" fill-opacity="0.35"/>"##,
            x0,
            (x1 - x0).max(1.0),
            BOTTOM - TOP
        );
    }

    for (counts, colour, class) in [(&h.negative, "#2d6cdf", "negative"), (&h.positive, "#d64545", "positive")] {
        for (b, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let bar = c as f64 / peak * (BOTTOM - TOP);
            let _ = writeln!(
                s,
                r#"<rect class="{class}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{colour}" fill-opacity="0.55"/>"#,
                LEFT + b as f64 * bin_w + 1.0,
                BOTTOM - bar,
                bin_w - 2.0,
                bar
            );
        }
    }

    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{BOTTOM}" x2="{RIGHT}" y2="{BOTTOM}" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{BOTTOM}" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="{}" font-size="12" text-anchor="start">{}</text>"#,
        BOTTOM + 18.0,
        value(h.min)
    );
    let _ = writeln!(
        s,
        r#"<text x="{RIGHT}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
        BOTTOM + 18.0,
        value(h.max)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
        LEFT - 6.0,
        TOP + 4.0,
        peak
    );
    let legend_y = HEIGHT - 20.0;
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{}" width="12" height="12" fill="#d64545" fill-opacity="0.55"/><text x="{}" y="{legend_y}" font-size="12">target 1</text>"##,
        legend_y - 10.0,
        LEFT + 18.0
    );
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="12" height="12" fill="#2d6cdf" fill-opacity="0.55"/><text x="{}" y="{legend_y}" font-size="12">target 0</text>"##,
        LEFT + 110.0,
        legend_y - 10.0,
        LEFT + 128.0
    );
    s.push_str("</svg>\n");
    s
}
