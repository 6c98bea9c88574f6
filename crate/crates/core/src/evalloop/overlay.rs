use alloc::string::String;
use core::fmt::Write;

use super::{EvalError, TrajectoryLog};
use crate::simworld::WorldMap;

pub const OVERLAY_HEADER: &str = "series,t,x,y,heading,steer";

/// Both trajectories as `series,t,x,y,heading,steer` rows, expert first.
pub fn overlay_csv(expert: &TrajectoryLog, model: &TrajectoryLog) -> Result<String, EvalError> {
    if expert.entries.is_empty() || model.entries.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    let mut s = String::from(OVERLAY_HEADER);
    s.push('\n');
    for (name, log) in [("expert", expert), ("model", model)] {
        for e in &log.entries {
            let _ = writeln!(s, "{name},{},{},{},{},{}", e.t, e.x, e.y, e.heading, e.steer);
        }
    }
    Ok(s)
}

/// Top-down plot: walls gray, expert path green, model path blue. The
/// view box is the map's bounding box grown by 5% on each side; y points up.
pub fn overlay_svg(map: &WorldMap, expert: &TrajectoryLog, model: &TrajectoryLog) -> Result<String, EvalError> {
    if expert.entries.is_empty() || model.entries.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    let (lo, hi) = map.bounds();
    let (mx, my) = (0.05 * (hi.x - lo.x), 0.05 * (hi.y - lo.y));
    let (x0, x1, y0, y1) = (lo.x - mx, hi.x + mx, lo.y - my, hi.y + my);
    let (w, h) = (x1 - x0, y1 - y0);
    let fy = |y: f64| y1 - y;
    let stroke = 0.004 * w.max(h);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.4} 0 {w:.4} {h:.4}" width="800" height="{:.0}">"#,
        800.0 * h / w
    );
    let _ = writeln!(s, r#"<rect x="{x0:.4}" y="0" width="{w:.4}" height="{h:.4}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g stroke="gray" stroke-width="{:.4}" stroke-linecap="round">"#, 2.0 * stroke);
    for wall in &map.walls {
        let _ = writeln!(
            s,
            r#"<line x1="{:.4}" y1="{:.4}" x2="{:.4}" y2="{:.4}"/>"#,
            wall.a.x,
            fy(wall.a.y),
            wall.b.x,
            fy(wall.b.y)
        );
    }
    s.push_str("</g>\n");
    for (name, color, log) in [("expert", "green", expert), ("model", "blue", model)] {
        let _ = write!(s, r#"<polyline id="{name}" fill="none" stroke="{color}" stroke-width="{stroke:.4}" points=""#);
        for (i, e) in log.entries.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.4},{:.4}", e.x, fy(e.y));
        }
        s.push_str("\"/>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}
