//! Minimal SVG rendering of the clock fit: observations, fitted curve and
//! the confidence band. Output has no timestamp so it is reproducible.

use std::fmt::Write as _;

use crate::rate::{BandPoint, RateObservation};

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// `band` is drawn as a filled polygon and its `fitted` values as the line;
/// it should be sorted by `x`.
pub fn fit_svg(obs: &[RateObservation], band: &[BandPoint], title: &str) -> String {
    let xs = obs
        .iter()
        .map(|o| o.elapsed_days as f64)
        .chain(band.iter().map(|b| b.x));
    let ys = obs
        .iter()
        .map(|o| o.distance)
        .chain(band.iter().flat_map(|b| [b.lower, b.upper]));
    let (xl, xh) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let (yl, yh) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    let (x0, x1) = if xl.is_finite() {
        widen(xl, xh)
    } else {
        (0.0, 1.0)
    };
    let (y0, y1) = if yl.is_finite() {
        widen(yl, yh)
    } else {
        (0.0, 1.0)
    };
    let f = Frame { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );

    if !band.is_empty() {
        let mut pts: Vec<String> = band
            .iter()
            .map(|b| format!("{:.2},{:.2}", f.px(b.x), f.py(b.upper)))
            .collect();
        pts.extend(
            band.iter()
                .rev()
                .map(|b| format!("{:.2},{:.2}", f.px(b.x), f.py(b.lower))),
        );
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##,
            pts.join(" ")
        );
        let line: Vec<String> = band
            .iter()
            .map(|b| format!("{:.2},{:.2}", f.px(b.x), f.py(b.fitted)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##,
            line.join(" ")
        );
    }
    for o in obs {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"><title>{} ({} d, {:.6})</title></circle>"#,
            f.px(o.elapsed_days as f64),
            f.py(o.distance),
            escape(&o.label),
            o.elapsed_days,
            o.distance
        );
    }

    // axes and tick labels
    let (bx, by) = (MARGIN, H - MARGIN);
    let _ = writeln!(
        s,
        r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#,
        W - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<line x1="{bx}" y1="{by}" x2="{bx}" y2="{MARGIN}" stroke="black"/>"#
    );
    for i in 0..=4 {
        let x = x0 + (x1 - x0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.0}</text>"#,
            f.px(x),
            by + 16.0,
            x
        );
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{:.4}</text>"#,
            bx - 4.0,
            f.py(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">days since reference</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">distance</text>"#,
        H / 2.0,
        H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn renders_points_and_band() {
        let obs = vec![RateObservation {
            label: "a<b".into(),
            date: NaiveDate::from_ymd_opt(2007, 3, 23).unwrap(),
            elapsed_days: 0,
            distance: 0.0,
        }];
        let band = vec![
            BandPoint {
                x: 0.0,
                fitted: 0.0,
                lower: -0.01,
                upper: 0.01,
            },
            BandPoint {
                x: 100.0,
                fitted: 0.01,
                lower: 0.0,
                upper: 0.02,
            },
        ];
        let svg = fit_svg(&obs, &band, "fit");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("<polygon") && svg.contains("a&lt;b"));
        assert_eq!(svg, fit_svg(&obs, &band, "fit"));
    }
}
