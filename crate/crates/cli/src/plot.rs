//! Minimal SVG line plots: enough for norm histories, window staircases,
//! and state snapshots, with deterministic text output.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 48.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw as steps (staircase) instead of straight segments.
    pub steps: bool,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Horizontal marker lines with labels.
    pub h_lines: Vec<(f64, String)>,
    /// Vertical marker lines.
    pub v_lines: Vec<f64>,
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        mag
    } else if norm < 3.5 {
        2.0 * mag
    } else if norm < 7.5 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * span {
        out.push(t);
        t += step;
    }
    out
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Chart {
    pub fn render(&self) -> String {
        let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for &(x, y) in &s.points {
                x_lo = x_lo.min(x);
                x_hi = x_hi.max(x);
                y_lo = y_lo.min(y);
                y_hi = y_hi.max(y);
            }
        }
        for &(y, _) in &self.h_lines {
            y_lo = y_lo.min(y);
            y_hi = y_hi.max(y);
        }
        if !x_lo.is_finite() {
            x_lo = 0.0;
            x_hi = 1.0;
        }
        if !y_lo.is_finite() {
            y_lo = 0.0;
            y_hi = 1.0;
        }
        if x_hi <= x_lo {
            x_hi = x_lo + 1.0;
        }
        if y_hi <= y_lo {
            y_hi = y_lo + 1.0;
        }
        let pad = 0.05 * (y_hi - y_lo);
        y_lo -= pad;
        y_hi += pad;

        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw;
        let sy = |y: f64| MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph;

        let mut svg = String::new();
        let _ = write!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        );
        let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            self.title
        );
        // axes box
        let _ = write!(
            svg,
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
        );
        // ticks
        for t in nice_ticks(x_lo, x_hi) {
            let x = sx(t);
            let _ = write!(
                svg,
                "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#999\" stroke-width=\"0.5\"/>\n",
                MARGIN_T,
                MARGIN_T + ph
            );
            let _ = write!(
                svg,
                "<text x=\"{x:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                MARGIN_T + ph + 16.0,
                fmt_num(t)
            );
        }
        for t in nice_ticks(y_lo, y_hi) {
            let y = sy(t);
            let _ = write!(
                svg,
                "<line x1=\"{MARGIN_L}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"#999\" stroke-width=\"0.5\"/>\n",
                MARGIN_L + pw
            );
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 6.0,
                y + 4.0,
                fmt_num(t)
            );
        }
        // axis labels
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_L + pw / 2.0,
            HEIGHT - 10.0,
            self.x_label
        );
        let _ = write!(
            svg,
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0,
            self.y_label
        );
        // marker lines
        for &x in &self.v_lines {
            if x >= x_lo && x <= x_hi {
                let xs = sx(x);
                let _ = write!(
                    svg,
                    "<line x1=\"{xs:.2}\" y1=\"{MARGIN_T}\" x2=\"{xs:.2}\" y2=\"{}\" stroke=\"#bbb\" stroke-width=\"1\" stroke-dasharray=\"4,3\"/>\n",
                    MARGIN_T + ph
                );
            }
        }
        for (y, label) in &self.h_lines {
            let ys = sy(*y);
            let _ = write!(
                svg,
                "<line x1=\"{MARGIN_L}\" y1=\"{ys:.2}\" x2=\"{}\" y2=\"{ys:.2}\" stroke=\"#c44\" stroke-width=\"1\" stroke-dasharray=\"6,3\"/>\n",
                MARGIN_L + pw
            );
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#c44\" text-anchor=\"end\">{}</text>\n",
                MARGIN_L + pw - 4.0,
                ys - 4.0,
                label
            );
        }
        // series
        for (si, s) in self.series.iter().enumerate() {
            if s.points.is_empty() {
                continue;
            }
            let color = PALETTE[si % PALETTE.len()];
            let mut path = String::new();
            let mut prev: Option<(f64, f64)> = None;
            for &(x, y) in &s.points {
                let (xs, ys) = (sx(x), sy(y));
                match prev {
                    None => {
                        let _ = write!(path, "M{xs:.2},{ys:.2}");
                    }
                    Some((_, py)) if s.steps => {
                        let _ = write!(path, " L{xs:.2},{py:.2} L{xs:.2},{ys:.2}");
                    }
                    Some(_) => {
                        let _ = write!(path, " L{xs:.2},{ys:.2}");
                    }
                }
                prev = Some((xs, ys));
            }
            let _ = write!(
                svg,
                "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n"
            );
            if s.points.len() == 1 {
                // single point: draw a dot so it renders at all
                let (x, y) = s.points[0];
                let _ = write!(
                    svg,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                    sx(x),
                    sy(y)
                );
            }
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
                MARGIN_L + 8.0,
                MARGIN_T + 16.0 + 14.0 * si as f64,
                s.label
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_a_single_point_and_a_staircase() {
        let chart = Chart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![
                Series { label: "dot".into(), points: vec![(0.5, 0.5)], steps: false },
                Series {
                    label: "stair".into(),
                    points: vec![(0.0, 0.0), (0.5, 1.0), (1.0, 0.5)],
                    steps: true,
                },
            ],
            h_lines: vec![(0.25, "thr".into())],
            v_lines: vec![0.5],
        };
        let svg = chart.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("circle"));
        assert!(svg.contains("stroke-dasharray"));
        // deterministic output
        assert_eq!(svg, chart.render());
    }
}
