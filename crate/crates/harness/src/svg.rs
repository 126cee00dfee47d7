//! Static SVG charts. Output is a pure function of the inputs so reruns are
//! byte-identical.

use std::fmt::Write;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";
const BLUE: &str = "#1f77b4";
const ORANGE: &str = "#ff7f0e";
const RED: &str = "#d62728";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Two decimals is plenty for pixel coordinates and keeps files small.
fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

fn open(w: f64, h: f64, title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        px(w),
        px(h),
        px(w),
        px(h)
    )
    .unwrap();
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    writeln!(
        s,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" {FONT} font-weight=\"bold\">{}</text>",
        px(w / 2.0),
        esc(title)
    )
    .unwrap();
    s
}

/// Symmetric or one-sided value range padded so bars never touch the edge.
fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    (
        if lo < 0.0 { lo - pad } else { lo },
        if hi > 0.0 { hi + pad } else { hi },
    )
}

/// Horizontal bar pairs, one pair per label.
pub fn paired_bars(title: &str, labels: &[String], a: (&str, &[f64]), b: (&str, &[f64])) -> String {
    let row_h = 26.0;
    let (left, right, top) = (170.0, 30.0, 48.0);
    let plot_w = 420.0;
    let width = left + plot_w + right;
    let height = top + row_h * labels.len() as f64 + 40.0;
    let (lo, hi) = span(a.1.iter().chain(b.1).copied());
    let x = |v: f64| left + (v - lo) / (hi - lo) * plot_w;

    let mut s = open(width, height, title);
    for (i, (name, color)) in [(a.0, BLUE), (b.0, ORANGE)].iter().enumerate() {
        let lx = left + 150.0 * i as f64;
        writeln!(
            s,
            "<rect x=\"{}\" y=\"28\" width=\"10\" height=\"10\" fill=\"{color}\"/>",
            px(lx)
        )
        .unwrap();
        writeln!(s, "<text x=\"{}\" y=\"37\" {FONT}>{}</text>", px(lx + 14.0), esc(name)).unwrap();
    }
    let zero = x(0.0);
    for (i, label) in labels.iter().enumerate() {
        let y0 = top + row_h * i as f64;
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>{}</text>",
            px(left - 6.0),
            px(y0 + row_h / 2.0 + 4.0),
            esc(label)
        )
        .unwrap();
        for (k, (vals, color)) in [(a.1, BLUE), (b.1, ORANGE)].iter().enumerate() {
            let v = vals.get(i).copied().unwrap_or(0.0);
            let (x0, x1) = if v >= 0.0 { (zero, x(v)) } else { (x(v), zero) };
            writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"10\" fill=\"{color}\"><title>{}</title></rect>",
                px(x0),
                px(y0 + 3.0 + 11.0 * k as f64),
                px((x1 - x0).max(0.0)),
                esc(&format!("{v}"))
            )
            .unwrap();
        }
    }
    let bottom = top + row_h * labels.len() as f64;
    writeln!(
        s,
        "<line x1=\"{z}\" y1=\"{}\" x2=\"{z}\" y2=\"{}\" stroke=\"black\"/>",
        px(top),
        px(bottom),
        z = px(zero)
    )
    .unwrap();
    for v in [lo, 0.0, hi] {
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{}</text>",
            px(x(v)),
            px(bottom + 16.0),
            tick(v)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_owned()
    } else {
        s
    }
}

pub struct ScatterPanel<'a> {
    pub title: String,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// Grid of scatter panels with a shared `y = x` guide in each.
pub fn scatter_grid(title: &str, x_label: &str, y_label: &str, panels: &[ScatterPanel<'_>], columns: usize) -> String {
    let columns = columns.max(1);
    let cell = 200.0;
    let gap = 46.0;
    let rows = panels.len().div_ceil(columns);
    let width = columns as f64 * (cell + gap) + gap;
    let height = rows as f64 * (cell + gap + 16.0) + 60.0;
    let mut s = open(width, height, title);
    writeln!(
        s,
        "<text x=\"{}\" y=\"34\" text-anchor=\"middle\" {FONT}>x: {} / y: {}</text>",
        px(width / 2.0),
        esc(x_label),
        esc(y_label)
    )
    .unwrap();
    for (i, p) in panels.iter().enumerate() {
        let ox = gap + (i % columns) as f64 * (cell + gap);
        let oy = 60.0 + (i / columns) as f64 * (cell + gap + 16.0);
        let (lo, hi) = span(p.x.iter().chain(p.y).copied());
        let (lo, hi) = (lo.min(-hi.abs() * 0.05), hi);
        let map = |v: f64| (v - lo) / (hi - lo) * cell;
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{}</text>",
            px(ox + cell / 2.0),
            px(oy - 4.0),
            esc(&p.title)
        )
        .unwrap();
        writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{c}\" height=\"{c}\" fill=\"none\" stroke=\"#888\"/>",
            px(ox),
            px(oy),
            c = px(cell)
        )
        .unwrap();
        writeln!(
            s,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>",
            px(ox),
            px(oy + cell),
            px(ox + cell),
            px(oy)
        )
        .unwrap();
        for (&xv, &yv) in p.x.iter().zip(p.y) {
            writeln!(
                s,
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{BLUE}\" fill-opacity=\"0.6\"/>",
                px(ox + map(xv)),
                px(oy + cell - map(yv))
            )
            .unwrap();
        }
        for (v, ax, ay, anchor) in [
            (lo, ox, oy + cell + 13.0, "start"),
            (hi, ox + cell, oy + cell + 13.0, "end"),
        ] {
            writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" {FONT}>{}</text>",
                px(ax),
                px(ay),
                tick(v)
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

/// One-row force layout: positive contributions push right from the base
/// value, negative ones push left, ending at the prediction.
pub fn force_plot(title: &str, base: f64, predicted: f64, names: &[String], phi: &[f64]) -> String {
    let (width, left, plot_w) = (760.0, 40.0, 680.0);
    let mut order: Vec<usize> = (0..phi.len()).collect();
    order.sort_by(|&a, &b| phi[b].abs().total_cmp(&phi[a].abs()).then(a.cmp(&b)));

    let pos: f64 = phi.iter().filter(|v| **v > 0.0).sum();
    let neg: f64 = phi.iter().filter(|v| **v < 0.0).sum();
    let lo = (base + neg).min(predicted).min(base) - 0.02;
    let hi = (base + pos).max(predicted).max(base) + 0.02;
    let x = |v: f64| left + (v - lo) / (hi - lo) * plot_w;

    let rows = order.len() as f64;
    let height = 130.0 + 15.0 * rows;
    let mut s = open(width, height, title);
    let bar_y = 52.0;

    // Positive segments stack leftwards from the prediction, negative ones
    // rightwards, so the two runs meet exactly at f(x).
    let mut cursor = predicted;
    for &i in order.iter().filter(|&&i| phi[i] > 0.0) {
        let (a, b) = (cursor - phi[i], cursor);
        segment(&mut s, x(a), x(b), bar_y, RED, &names[i], phi[i]);
        cursor = a;
    }
    let mut cursor = predicted;
    for &i in order.iter().filter(|&&i| phi[i] < 0.0) {
        let (a, b) = (cursor, cursor - phi[i]);
        segment(&mut s, x(a), x(b), bar_y, BLUE, &names[i], phi[i]);
        cursor = b;
    }
    for (v, label, dy) in [(base, "base value", 44.0), (predicted, "f(x)", 44.0)] {
        writeln!(
            s,
            "<line x1=\"{p}\" y1=\"{}\" x2=\"{p}\" y2=\"{}\" stroke=\"black\"/>",
            px(bar_y - 8.0),
            px(bar_y + 26.0),
            p = px(x(v))
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{label} {}</text>",
            px(x(v)),
            px(bar_y + dy),
            tick(v)
        )
        .unwrap();
    }
    for (row, &i) in order.iter().enumerate() {
        let color = if phi[i] >= 0.0 { RED } else { BLUE };
        writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\" {FONT}>{}: {}</text>",
            px(left),
            px(120.0 + 15.0 * row as f64),
            esc(&names[i]),
            tick(phi[i])
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn segment(s: &mut String, x0: f64, x1: f64, y: f64, color: &str, name: &str, value: f64) {
    writeln!(
        s,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"18\" fill=\"{color}\" stroke=\"white\"><title>{}</title></rect>",
        px(x0),
        px(y),
        px((x1 - x0).max(0.0)),
        esc(&format!("{name} = {value}"))
    )
    .unwrap();
}
