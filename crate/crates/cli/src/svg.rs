//! Standalone SVG plots with fixed-precision coordinates.

use std::fmt::Write;

const MARGIN: f64 = 48.0;
const TICKS: usize = 5;
const NEUTRAL: &str = "#1f77b4";
const PATH_COLOR: &str = "#2ca02c";

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `(x, y, class)`; classless points use a neutral color.
    Points {
        pts: Vec<(f64, f64, Option<usize>)>,
        radius: f64,
        opacity: f64,
    },
    /// `[x, y, vx, vy]` drawn from `(x, y)` to `(x, y) + scale * (vx, vy)`.
    Arrows { rows: Vec<[f64; 4]>, scale: f64 },
    Paths { paths: Vec<Vec<(f64, f64)>> },
    Bars { bars: Vec<(String, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub width: u32,
    pub height: u32,
    pub title: String,
    pub colors: Vec<String>,
    pub layers: Vec<Layer>,
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (self.w - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.h - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (self.h - 2.0 * MARGIN)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-9 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Plot {
    fn color(&self, class: Option<usize>) -> &str {
        match class {
            Some(c) => &self.colors[c % self.colors.len()],
            None => NEUTRAL,
        }
    }

    fn xy_extent(&self) -> (f64, f64, f64, f64) {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut add = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        };
        for layer in &self.layers {
            match layer {
                Layer::Points { pts, .. } => pts.iter().for_each(|p| add(p.0, p.1)),
                Layer::Arrows { rows, scale } => rows.iter().for_each(|r| {
                    add(r[0], r[1]);
                    add(r[0] + scale * r[2], r[1] + scale * r[3]);
                }),
                Layer::Paths { paths } => paths.iter().flatten().for_each(|p| add(p.0, p.1)),
                Layer::Bars { .. } => {}
            }
        }
        let (x0, x1) = padded(x0, x1);
        let (y0, y1) = padded(y0, y1);
        (x0, x1, y0, y1)
    }

    fn bar_extent(&self) -> Option<(usize, f64, f64)> {
        let bars: Vec<&(String, f64)> = self
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::Bars { bars } => Some(bars.iter()),
                _ => None,
            })
            .flatten()
            .collect();
        if bars.is_empty() && !self.layers.iter().any(|l| matches!(l, Layer::Bars { .. })) {
            return None;
        }
        let lo = bars.iter().map(|b| b.1).fold(0.0, f64::min);
        let hi = bars.iter().map(|b| b.1).fold(0.0, f64::max);
        let (lo, hi) = if hi - lo < 1e-12 { (0.0, 1.0) } else { (lo, hi + 0.05 * (hi - lo)) };
        Some((bars.len(), lo, hi))
    }

    pub fn render(&self) -> String {
        let (w, h) = (self.width as f64, self.height as f64);
        let bar = self.bar_extent();
        let frame = match bar {
            Some((n, lo, hi)) => Frame { x0: 0.0, x1: n.max(1) as f64, y0: lo, y1: hi, w, h },
            None => {
                let (x0, x1, y0, y1) = self.xy_extent();
                Frame { x0, x1, y0, y1, w, h }
            }
        };
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            self.width, self.height, self.width, self.height
        )
        .unwrap();
        writeln!(s, r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##, self.width, self.height).unwrap();
        if !self.title.is_empty() {
            writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
                num(w / 2.0),
                num(MARGIN / 2.0),
                escape(&self.title)
            )
            .unwrap();
        }
        self.axes(&mut s, &frame, bar.is_some());
        for layer in &self.layers {
            self.layer(&mut s, &frame, layer);
        }
        s.push_str("</svg>\n");
        s
    }

    fn axes(&self, s: &mut String, f: &Frame, bars: bool) {
        writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333333" stroke-width="1"/>"##,
            num(MARGIN),
            num(MARGIN),
            num(f.w - 2.0 * MARGIN),
            num(f.h - 2.0 * MARGIN)
        )
        .unwrap();
        s.push_str(r##"<g font-family="sans-serif" font-size="10" fill="#333333">"##);
        s.push('\n');
        for i in 0..TICKS {
            let frac = i as f64 / (TICKS - 1) as f64;
            let y = f.y0 + frac * (f.y1 - f.y0);
            writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                num(MARGIN - 4.0),
                num(f.py(y) + 3.0),
                num(y)
            )
            .unwrap();
            if !bars {
                let x = f.x0 + frac * (f.x1 - f.x0);
                writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                    num(f.px(x)),
                    num(f.h - MARGIN + 14.0),
                    num(x)
                )
                .unwrap();
            }
        }
        s.push_str("</g>\n");
    }

    fn layer(&self, s: &mut String, f: &Frame, layer: &Layer) {
        match layer {
            Layer::Points { pts, radius, opacity } => {
                writeln!(s, r#"<g fill-opacity="{}">"#, num(*opacity)).unwrap();
                for &(x, y, c) in pts {
                    writeln!(
                        s,
                        r#"<circle cx="{}" cy="{}" r="{}" fill="{}"/>"#,
                        num(f.px(x)),
                        num(f.py(y)),
                        num(*radius),
                        self.color(c)
                    )
                    .unwrap();
                }
                s.push_str("</g>\n");
            }
            Layer::Arrows { rows, scale } => {
                s.push_str("<g stroke=\"#222222\" stroke-width=\"1\" fill=\"#222222\">\n");
                for r in rows {
                    let (ax, ay) = (f.px(r[0]), f.py(r[1]));
                    let (bx, by) = (f.px(r[0] + scale * r[2]), f.py(r[1] + scale * r[3]));
                    writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, num(ax), num(ay), num(bx), num(by)).unwrap();
                    let (dx, dy) = (bx - ax, by - ay);
                    let len = (dx * dx + dy * dy).sqrt();
                    let (ux, uy) = if len > 1e-9 { (dx / len, dy / len) } else { (0.0, 0.0) };
                    let head = 4.0f64.min(0.5 * len);
                    let (cx, cy) = (bx - head * ux, by - head * uy);
                    let (nx, ny) = (-uy * head * 0.6, ux * head * 0.6);
                    writeln!(
                        s,
                        r#"<polygon points="{},{} {},{} {},{}"/>"#,
                        num(bx),
                        num(by),
                        num(cx + nx),
                        num(cy + ny),
                        num(cx - nx),
                        num(cy - ny)
                    )
                    .unwrap();
                }
                s.push_str("</g>\n");
            }
            Layer::Paths { paths } => {
                writeln!(s, r#"<g fill="none" stroke="{PATH_COLOR}" stroke-width="1" stroke-opacity="0.7">"#).unwrap();
                for p in paths {
                    let pts: Vec<String> = p.iter().map(|&(x, y)| format!("{},{}", num(f.px(x)), num(f.py(y)))).collect();
                    writeln!(s, r#"<polyline points="{}"/>"#, pts.join(" ")).unwrap();
                }
                s.push_str("</g>\n");
            }
            Layer::Bars { bars } => {
                let slot = (f.w - 2.0 * MARGIN) / bars.len().max(1) as f64;
                s.push_str("<g font-family=\"sans-serif\" font-size=\"10\">\n");
                for (i, (label, v)) in bars.iter().enumerate() {
                    let top = f.py(v.max(0.0));
                    let bottom = f.py(v.min(0.0));
                    writeln!(
                        s,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                        num(MARGIN + slot * (i as f64 + 0.15)),
                        num(top),
                        num(slot * 0.7),
                        num(bottom - top),
                        self.color(Some(i))
                    )
                    .unwrap();
                    writeln!(
                        s,
                        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                        num(MARGIN + slot * (i as f64 + 0.5)),
                        num(f.h - MARGIN + 14.0),
                        escape(label)
                    )
                    .unwrap();
                }
                s.push_str("</g>\n");
            }
        }
    }
}
