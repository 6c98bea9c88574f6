//! File-emitting SVG charts: label histograms and training curves.

use std::fmt::Write;

use hallway_core::models::TrainHistory;

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 40.0;

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    s
}

/// One `<rect class="bar">` per bin, left to right from −1 to +1. Each bar
/// carries its count in `data-count`.
pub fn histogram_svg(counts: &[usize]) -> String {
    let mut s = open("Label distribution");
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let n = counts.len().max(1) as f64;
    let slot = (W - 2.0 * PAD) / n;
    let span = H - 2.0 * PAD;
    for (i, &c) in counts.iter().enumerate() {
        let h = span * c as f64 / max;
        let _ = writeln!(
            s,
            r#"<rect class="bar" data-bin="{i}" data-count="{c}" x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="steelblue"/>"#,
            PAD + i as f64 * slot + 1.0,
            H - PAD - h,
            (slot - 2.0).max(0.5)
        );
    }
    for (label, x) in [("-1", PAD), ("0", W / 2.0), ("1", W - PAD)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="11">{label}</text>"#, H - PAD + 16.0);
    }
    s.push_str("</svg>\n");
    s
}

fn polyline(s: &mut String, id: &str, color: &str, ys: &[Option<f64>], lo: f64, hi: f64) {
    let n = ys.len();
    let sx = |i: usize| PAD + (W - 2.0 * PAD) * if n > 1 { i as f64 / (n - 1) as f64 } else { 0.5 };
    let sy = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);
    let pts: Vec<String> =
        ys.iter().enumerate().filter_map(|(i, y)| y.map(|v| format!("{:.2},{:.2}", sx(i), sy(v)))).collect();
    if !pts.is_empty() {
        let _ = writeln!(s, r#"<polyline id="{id}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
    }
}

/// Train loss in blue, validation loss in orange when present.
pub fn loss_svg(history: &TrainHistory) -> String {
    let mut s = open("Loss per epoch");
    let train: Vec<Option<f64>> = history.records.iter().map(|r| Some(r.train_loss)).collect();
    let val: Vec<Option<f64>> = history.records.iter().map(|r| r.val_loss).collect();
    let all = train.iter().chain(&val).flatten().copied().filter(|v| v.is_finite());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo.min(0.0), hi) } else { (0.0, lo.max(0.0) + 1.0) };
    polyline(&mut s, "train", "steelblue", &train, lo, hi);
    polyline(&mut s, "val", "darkorange", &val, lo, hi);
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-size="11">{hi:.3}</text>"#, PAD - 4.0);
    s.push_str("</svg>\n");
    s
}
