//! Deterministic standalone SVG renderers for the report artifacts. All
//! coordinates are formatted with fixed precision so identical inputs yield
//! identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use foehn_core::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const ML: f64 = 60.0; // left margin
const MR: f64 = 20.0;
const MT: f64 = 36.0;
const MB: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Frame {
        // avoid a degenerate scale on constant data
        let (y0, y1) = if y1 - y0 < 1e-12 {
            (y0 - 0.5, y1 + 0.5)
        } else {
            (y0, y1)
        };
        let (x0, x1) = if x1 - x0 < 1e-12 {
            (x0 - 0.5, x1 + 0.5)
        } else {
            (x0, x1)
        };
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        "<line x1=\"{ML:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
         <line x1=\"{ML:.1}\" y1=\"{MT:.1}\" x2=\"{ML:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB,
        H - MB
    );
    for i in 0..=4 {
        let xv = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let yv = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            f.px(xv),
            H - MB + 16.0,
            fmt_tick(xv),
            ML - 6.0,
            f.py(yv) + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = write!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0,
        escape(x_label),
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        escape(y_label)
    );
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (i, (color, label)) in entries.iter().enumerate() {
        let y = MT + 6.0 + 14.0 * i as f64;
        let _ = write!(
            out,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            W - MR - 150.0,
            y,
            W - MR - 136.0,
            y + 9.0,
            escape(label)
        );
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], color: &str) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = write!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
        coords.join(" ")
    );
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo <= hi).then_some((lo, hi))
}

/// Annual mean foehn probability: reconstruction line plus available
/// observed means as points.
pub fn annual_series(
    title: &str,
    years: &[i32],
    recon: &[f64],
    obs: &[Option<f64>],
) -> Result<String> {
    if years.is_empty() || years.len() != recon.len() || obs.len() != recon.len() {
        return Err(Error::Value("annual series chart needs aligned non-empty data".into()));
    }
    let (lo, hi) = bounds(recon.iter().copied().chain(obs.iter().flatten().copied()))
        .ok_or_else(|| Error::Value("annual series chart has no values".into()))?;
    let f = Frame::new(years[0] as f64, *years.last().unwrap() as f64, lo.min(0.0), hi);
    let mut out = header(title);
    axes(&mut out, &f, "year", "annual mean probability");
    let pts: Vec<(f64, f64)> = years
        .iter()
        .zip(recon)
        .map(|(&y, &v)| (f.px(y as f64), f.py(v)))
        .collect();
    polyline(&mut out, &pts, "#2c7bb6");
    for (&y, o) in years.iter().zip(obs) {
        if let Some(v) = o {
            let _ = write!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#d7191c\"/>\n",
                f.px(y as f64),
                f.py(*v)
            );
        }
    }
    legend(&mut out, &[("#2c7bb6", "reconstruction"), ("#d7191c", "observed")]);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Trend component with its 95% confidence band drawn behind the line.
pub fn trend_band(
    title: &str,
    start_year: i32,
    trend: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Result<String> {
    if trend.is_empty() || trend.len() != lo.len() || trend.len() != hi.len() {
        return Err(Error::Value("trend chart needs aligned non-empty data".into()));
    }
    let (ylo, yhi) = bounds(lo.iter().chain(hi).copied()).unwrap();
    let xs: Vec<f64> = (0..trend.len())
        .map(|t| start_year as f64 + t as f64 / 12.0)
        .collect();
    let f = Frame::new(xs[0], *xs.last().unwrap(), ylo, yhi);
    let mut out = header(title);
    axes(&mut out, &f, "year", "trend");
    let mut band: Vec<String> = xs
        .iter()
        .zip(hi)
        .map(|(&x, &v)| format!("{:.2},{:.2}", f.px(x), f.py(v)))
        .collect();
    band.extend(
        xs.iter()
            .zip(lo)
            .rev()
            .map(|(&x, &v)| format!("{:.2},{:.2}", f.px(x), f.py(v))),
    );
    let _ = write!(
        out,
        "<polygon points=\"{}\" fill=\"#c6dbef\" stroke=\"none\"/>\n",
        band.join(" ")
    );
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(trend)
        .map(|(&x, &v)| (f.px(x), f.py(v)))
        .collect();
    polyline(&mut out, &pts, "#08519c");
    legend(&mut out, &[("#08519c", "trend"), ("#c6dbef", "95% band")]);
    out.push_str("</svg>\n");
    Ok(out)
}

fn ramp(t: f64) -> String {
    // blue -> red
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(44.0, 215.0), lerp(123.0, 25.0), lerp(182.0, 28.0))
}

/// Month x hour-of-day heatmap of mean probabilities.
pub fn hovmoller(title: &str, matrix: &[[f64; 24]; 12]) -> Result<String> {
    let (lo, hi) = bounds(matrix.iter().flatten().copied().filter(|v| v.is_finite()))
        .ok_or_else(|| Error::Value("heatmap has no finite cells".into()))?;
    let span = if hi - lo < 1e-12 { 1.0 } else { hi - lo };
    let mut out = header(title);
    let cw = (W - ML - MR - 60.0) / 24.0;
    let ch = (H - MT - MB) / 12.0;
    for (m, row) in matrix.iter().enumerate() {
        for (h, &v) in row.iter().enumerate() {
            let color = if v.is_finite() { ramp((v - lo) / span) } else { "#cccccc".into() };
            let _ = write!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{color}\"/>\n",
                ML + h as f64 * cw,
                MT + m as f64 * ch,
                cw,
                ch
            );
        }
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            ML - 6.0,
            MT + (m as f64 + 0.5) * ch + 4.0,
            m + 1
        );
    }
    for h in (0..24).step_by(6) {
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{h:02}</text>\n",
            ML + (h as f64 + 0.5) * cw,
            H - MB + 16.0
        );
    }
    // color scale legend
    let lx = W - MR - 40.0;
    for i in 0..40 {
        let _ = write!(
            out,
            "<rect x=\"{lx:.1}\" y=\"{:.2}\" width=\"14\" height=\"{:.2}\" fill=\"{}\"/>\n",
            MT + (39 - i) as f64 * (H - MT - MB) / 40.0,
            (H - MT - MB) / 40.0,
            ramp(i as f64 / 39.0)
        );
    }
    let _ = write!(
        out,
        "<text x=\"{lx:.1}\" y=\"{:.1}\">{}</text>\n\
         <text x=\"{lx:.1}\" y=\"{:.1}\">{}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">hour of day</text>\n\
         <text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">month</text>\n",
        MT - 6.0,
        fmt_tick(hi),
        H - MB + 16.0,
        fmt_tick(lo),
        (ML + W - MR - 60.0) / 2.0,
        H - 12.0,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// One seasonal cycle per decade plus the all-period mean.
pub fn decade_seasonal(
    title: &str,
    decades: &BTreeMap<i32, [f64; 12]>,
    mean: &[f64; 12],
) -> Result<String> {
    if decades.is_empty() {
        return Err(Error::Value("decade seasonal chart needs at least one decade".into()));
    }
    let (lo, hi) = bounds(
        decades
            .values()
            .flatten()
            .chain(mean.iter())
            .copied()
            .filter(|v| v.is_finite()),
    )
    .ok_or_else(|| Error::Value("decade seasonal chart has no finite values".into()))?;
    let f = Frame::new(1.0, 12.0, lo, hi);
    let mut out = header(title);
    axes(&mut out, &f, "month", "seasonal component");
    let n = decades.len();
    let mut legend_entries: Vec<(String, String)> = Vec::new();
    for (i, (decade, row)) in decades.iter().enumerate() {
        let shade = 40 + (140 * i / n.max(1)) as u8;
        let color = format!("#{shade:02x}{shade:02x}{shade:02x}");
        let pts: Vec<(f64, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(m, &v)| (f.px(m as f64 + 1.0), f.py(v)))
            .collect();
        polyline(&mut out, &pts, &color);
        legend_entries.push((color, format!("{decade}s")));
    }
    let pts: Vec<(f64, f64)> = mean
        .iter()
        .enumerate()
        .map(|(m, &v)| (f.px(m as f64 + 1.0), f.py(v)))
        .collect();
    polyline(&mut out, &pts, "#d7191c");
    legend_entries.push(("#d7191c".into(), "all-period mean".into()));
    let refs: Vec<(&str, &str)> = legend_entries
        .iter()
        .map(|(c, l)| (c.as_str(), l.as_str()))
        .collect();
    legend(&mut out, &refs);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Mean test Brier score per learner/set combination.
pub fn brier_bars(title: &str, labels: &[String], values: &[f64]) -> Result<String> {
    if labels.is_empty() || labels.len() != values.len() {
        return Err(Error::Value("bar chart needs aligned non-empty data".into()));
    }
    let hi = bounds(values.iter().copied()).unwrap().1.max(1e-12);
    let f = Frame::new(0.0, labels.len() as f64, 0.0, hi);
    let mut out = header(title);
    axes(&mut out, &f, "", "mean test Brier score");
    let bw = (W - ML - MR) / labels.len() as f64;
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let x = ML + i as f64 * bw + bw * 0.15;
        let _ = write!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#2c7bb6\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"9\">{}</text>\n",
            f.py(v),
            bw * 0.7,
            (H - MB) - f.py(v),
            ML + (i as f64 + 0.5) * bw,
            H - MB + 16.0,
            escape(label)
        );
    }
    legend(&mut out, &[("#2c7bb6", "test Brier")]);
    out.push_str("</svg>\n");
    Ok(out)
}
