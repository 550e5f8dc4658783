//! Decorative SVG line plots: every numeric column against the first one.

use std::fmt::Write as _;

use omckit::table::Table;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#c0392b", "#2c3e50", "#2980b9", "#8e44ad", "#27ae60", "#d35400"];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64> + Clone) -> Option<Axis> {
        let (lo, hi) = values.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !(lo.is_finite() && hi.is_finite()) {
            return None;
        }
        let log = lo > 0.0 && hi / lo > 100.0;
        let (lo, hi) = if log { (lo.log10(), hi.log10()) } else { (lo, hi) };
        let pad = if hi > lo { 0.0 } else { 0.5 * lo.abs().max(1.0) };
        Some(Axis { lo: lo - pad, hi: hi + pad, log })
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn label(&self, t: f64) -> String {
        let v = self.lo + t * (self.hi - self.lo);
        format!("{:.3e}", if self.log { 10f64.powf(v) } else { v })
    }
}

/// Renders `t`, or `None` when it has no plottable numeric data.
pub fn render(title: &str, t: &Table) -> Option<String> {
    let header = t.header();
    let x = t.column_opt_f64(header.first()?).ok()?;
    let series: Vec<(&String, Vec<Option<f64>>)> =
        header[1..].iter().filter_map(|h| t.column_opt_f64(h).ok().map(|c| (h, c))).collect();
    let xa = Axis::fit(x.iter().flatten().copied())?;
    let ya = Axis::fit(series.iter().flat_map(|(_, c)| c.iter().flatten().copied()))?;
    let px = |v: f64| MARGIN + xa.unit(v) * (W - 2.0 * MARGIN);
    let py = |v: f64| H - MARGIN - ya.unit(v) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20">{title}</text>"#);
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{x0}" y="{}">{}</text>"#, y0 + 16.0, xa.label(0.0));
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#, y0 + 16.0, xa.label(1.0));
    let _ = writeln!(s, r#"<text x="{}" y="{y0}" text-anchor="end">{}</text>"#, x0 - 4.0, ya.label(0.0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 4.0, y1 + 4.0, ya.label(1.0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, 0.5 * (x0 + x1), H - 12.0, header[0]);
    for (k, (name, col)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(col)
            .filter_map(|(a, b)| Some((a.as_ref()?, b.as_ref()?)))
            .filter(|(a, b)| (!xa.log || **a > 0.0) && (!ya.log || **b > 0.0))
            .map(|(a, b)| format!("{:.1},{:.1}", px(*a), py(*b)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}" text-anchor="end">{name}</text>"#,
            x1,
            y1 + 14.0 * k as f64
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}
