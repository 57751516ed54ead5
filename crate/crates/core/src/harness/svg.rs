//! Minimal self-contained SVG line plots: solid series for computed
//! quantities, dashed for ideal references, fixed palette, legend, linear
//! or log-10 x axis.

use std::fmt::Write as _;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;
const MAX_POINTS_PER_SERIES: usize = 1500;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn solid(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.to_string(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.to_string(),
            points,
            dashed: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            log_x: false,
            series: Vec::new(),
        }
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }

    pub fn with(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }

    pub fn render(&self) -> String {
        let xf = |x: f64| if self.log_x { x.log10() } else { x };
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for s in &self.series {
            for &(x, y) in &s.points {
                let x = xf(x);
                if x.is_finite() && y.is_finite() {
                    x_min = x_min.min(x);
                    x_max = x_max.max(x);
                    y_min = y_min.min(y);
                    y_max = y_max.max(y);
                }
            }
        }
        if !x_min.is_finite() || !y_min.is_finite() {
            x_min = 0.0;
            x_max = 1.0;
            y_min = 0.0;
            y_max = 1.0;
        }
        if x_max - x_min < 1e-300 {
            x_max = x_min + 1.0;
        }
        if y_max - y_min < 1e-300 {
            y_max = y_min + 1.0;
        }
        let pad = 0.05 * (y_max - y_min);
        y_min -= pad;
        y_max += pad;

        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let to_px = |x: f64, y: f64| {
            (
                MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w,
                MARGIN_TOP + (y_max - y) / (y_max - y_min) * plot_h,
            )
        };

        let mut svg = String::new();
        let _ = write!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        );
        let _ = write!(
            svg,
            "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            escape(&self.title)
        );

        // gridlines and ticks
        for (gx, label) in x_ticks(x_min, x_max, self.log_x) {
            let (px, _) = to_px(gx, y_min);
            let _ = write!(
                svg,
                "<line x1=\"{px:.1}\" y1=\"{MARGIN_TOP}\" x2=\"{px:.1}\" y2=\"{:.1}\" \
                 stroke=\"#dddddd\"/>\n",
                MARGIN_TOP + plot_h
            );
            let _ = write!(
                svg,
                "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text>\n",
                MARGIN_TOP + plot_h + 16.0
            );
        }
        for (gy, label) in nice_ticks(y_min, y_max) {
            let (_, py) = to_px(x_min, gy);
            let _ = write!(
                svg,
                "<line x1=\"{MARGIN_LEFT}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" \
                 stroke=\"#dddddd\"/>\n",
                MARGIN_LEFT + plot_w
            );
            let _ = write!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>\n",
                MARGIN_LEFT - 6.0,
                py + 4.0
            );
        }
        let _ = write!(
            svg,
            "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
             fill=\"none\" stroke=\"#333333\"/>\n"
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = write!(
            svg,
            "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        // series
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let stride = (s.points.len() / MAX_POINTS_PER_SERIES).max(1);
            let mut path = String::new();
            let mut pen_down = false;
            for (j, &(x, y)) in s.points.iter().enumerate() {
                if j % stride != 0 && j != s.points.len() - 1 {
                    continue;
                }
                let x = xf(x);
                if !x.is_finite() || !y.is_finite() {
                    pen_down = false;
                    continue;
                }
                let (px, py) = to_px(x, y.clamp(y_min, y_max));
                let _ = write!(path, "{}{px:.2} {py:.2} ", if pen_down { "L" } else { "M" });
                pen_down = true;
            }
            let dash = if s.dashed {
                " stroke-dasharray=\"7 4\""
            } else {
                ""
            };
            let _ = write!(
                svg,
                "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
                path.trim_end()
            );
        }

        // legend
        let lx = MARGIN_LEFT + plot_w + 12.0;
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let ly = MARGIN_TOP + 14.0 + 18.0 * i as f64;
            let dash = if s.dashed {
                " stroke-dasharray=\"7 4\""
            } else {
                ""
            };
            let _ = write!(
                svg,
                "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" \
                 stroke-width=\"1.5\"{dash}/>\n",
                lx + 26.0
            );
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{}\">{}</text>\n",
                lx + 32.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn nice_ticks(min: f64, max: f64) -> Vec<(f64, String)> {
    let span = max - min;
    let raw_step = span / 6.0;
    let mag = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= 7.0)
        .unwrap_or(mag * 10.0);
    let mut ticks = Vec::new();
    let mut v = (min / step).ceil() * step;
    while v <= max + 1e-12 * span {
        ticks.push((v, format_tick(v)));
        v += step;
    }
    ticks
}

fn x_ticks(min: f64, max: f64, log: bool) -> Vec<(f64, String)> {
    if !log {
        return nice_ticks(min, max);
    }
    let mut ticks = Vec::new();
    let mut d = min.ceil() as i64;
    while (d as f64) <= max + 1e-12 {
        ticks.push((d as f64, format!("1e{d}")));
        d += 1;
    }
    if ticks.len() < 2 {
        return nice_ticks(min, max);
    }
    ticks
}
