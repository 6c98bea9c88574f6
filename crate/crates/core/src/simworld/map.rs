use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;
use serde::{Deserialize, Serialize};

use super::geometry::{point_segment, ray_segment, Vec2};
use super::WorldError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: Vec2,
    pub b: Vec2,
    pub color: [u8; 3],
}

impl Wall {
    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldMap {
    pub walls: Vec<Wall>,
    pub centerline: Vec<Vec2>,
    pub start: Pose,
}

/// Result of casting a ray into the map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub wall: usize,
}

impl WorldMap {
    /// Builds a map and checks its invariants.
    pub fn new(walls: Vec<Wall>, centerline: Vec<Vec2>, start: Pose) -> Result<Self, WorldError> {
        if walls.is_empty() {
            return Err(WorldError::NoWalls);
        }
        if walls.len() < 3 {
            return Err(WorldError::TooFewWalls(walls.len()));
        }
        if let Some(i) = walls.iter().position(|w| w.length() == 0.0) {
            return Err(WorldError::ZeroLengthWall { line: i + 1 });
        }
        if centerline.len() < 2 {
            return Err(WorldError::ShortCenterline);
        }
        Ok(Self {
            walls,
            centerline,
            start,
        })
    }

    /// Nearest wall along a ray from `origin` at absolute `angle`.
    pub fn cast(&self, origin: Vec2, angle: f64) -> Option<Hit> {
        let dir = Vec2::new(crate::math::cos(angle), crate::math::sin(angle));
        let mut best: Option<Hit> = None;
        for (i, w) in self.walls.iter().enumerate() {
            if let Some(d) = ray_segment(origin, dir, w.a, w.b) {
                if best.is_none_or(|b| d < b.distance) {
                    best = Some(Hit { distance: d, wall: i });
                }
            }
        }
        best
    }

    pub fn nearest_wall_distance(&self, p: Vec2) -> f64 {
        self.walls
            .iter()
            .map(|w| point_segment(p, w.a, w.b).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Axis-aligned bounding box of all walls: (min, max).
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for w in &self.walls {
            for p in [w.a, w.b] {
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
            }
        }
        (lo, hi)
    }

    pub fn centerline_length(&self) -> f64 {
        self.centerline.windows(2).map(|s| s[0].dist(s[1])).sum()
    }

    /// Reflects the whole map across the line through `(x, y)` with direction `heading`.
    pub fn reflected(&self, x: f64, y: f64, heading: f64) -> Self {
        let o = Vec2::new(x, y);
        let d = Vec2::new(crate::math::cos(heading), crate::math::sin(heading));
        let refl = |p: Vec2| {
            let v = p.sub(o);
            let along = d.scale(v.dot(d));
            o.add(along.scale(2.0).sub(v))
        };
        Self {
            walls: self
                .walls
                .iter()
                .map(|w| Wall {
                    a: refl(w.a),
                    b: refl(w.b),
                    color: w.color,
                })
                .collect(),
            centerline: self.centerline.iter().map(|&p| refl(p)).collect(),
            start: {
                let p = refl(Vec2::new(self.start.x, self.start.y));
                Pose {
                    x: p.x,
                    y: p.y,
                    heading: crate::math::normalize_angle(2.0 * heading - self.start.heading),
                }
            },
        }
    }

    /// Serializes back into the world file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for w in &self.walls {
            let _ = writeln!(
                s,
                "W {} {} {} {} {} {} {}",
                w.a.x, w.a.y, w.b.x, w.b.y, w.color[0], w.color[1], w.color[2]
            );
        }
        for p in &self.centerline {
            let _ = writeln!(s, "C {} {}", p.x, p.y);
        }
        let _ = writeln!(s, "S {} {} {}", self.start.x, self.start.y, self.start.heading);
        s
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, WorldError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| WorldError::Malformed {
            line,
            reason: format!("bad number {tok:?}"),
        })
}

fn parse_u8(tok: &str, line: usize) -> Result<u8, WorldError> {
    tok.parse::<u8>().map_err(|_| WorldError::Malformed {
        line,
        reason: format!("bad color component {tok:?}"),
    })
}

/// Parses the line-oriented world format:
/// `W x1 y1 x2 y2 r g b`, `C x y`, `S x y theta`; `#` starts a comment.
///
/// A bare wall record without the `W` tag (seven numbers) is also accepted.
/// When no `S` record is present the car starts on the first centerline
/// point facing the second.
pub fn load_world(text: &str) -> Result<WorldMap, WorldError> {
    let mut walls = Vec::new();
    let mut centerline = Vec::new();
    let mut start = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let (tag, args) = match toks[0] {
            "W" | "C" | "S" => (toks[0], &toks[1..]),
            _ => ("W", &toks[..]),
        };
        let want = match tag {
            "W" => 7,
            "C" => 2,
            _ => 3,
        };
        if args.len() != want {
            return Err(WorldError::Malformed {
                line: line_no,
                reason: format!("{tag} record needs {want} fields, got {}", args.len()),
            });
        }
        match tag {
            "W" => {
                let mut v = [0.0; 4];
                for (slot, tok) in v.iter_mut().zip(args) {
                    *slot = parse_f64(tok, line_no)?;
                }
                let color = [
                    parse_u8(args[4], line_no)?,
                    parse_u8(args[5], line_no)?,
                    parse_u8(args[6], line_no)?,
                ];
                let wall = Wall {
                    a: Vec2::new(v[0], v[1]),
                    b: Vec2::new(v[2], v[3]),
                    color,
                };
                if wall.length() == 0.0 {
                    return Err(WorldError::ZeroLengthWall { line: line_no });
                }
                walls.push(wall);
            }
            "C" => centerline.push(Vec2::new(parse_f64(args[0], line_no)?, parse_f64(args[1], line_no)?)),
            _ => {
                start = Some(Pose {
                    x: parse_f64(args[0], line_no)?,
                    y: parse_f64(args[1], line_no)?,
                    heading: crate::math::normalize_angle(parse_f64(args[2], line_no)?),
                })
            }
        }
    }
    if walls.is_empty() {
        return Err(WorldError::NoWalls);
    }
    if centerline.len() < 2 {
        return Err(WorldError::ShortCenterline);
    }
    let start = start.unwrap_or_else(|| {
        let (a, b) = (centerline[0], centerline[1]);
        Pose {
            x: a.x,
            y: a.y,
            heading: crate::math::atan2(b.y - a.y, b.x - a.x),
        }
    });
    WorldMap::new(walls, centerline, start)
}

/// Maps shipped with the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BundledMap {
    /// 80 m × 2 m straight corridor.
    Straight,
    /// Rectangular loop with 3 m lanes, driven clockwise.
    Loop,
    /// 3 m corridor with one left turn.
    LTurn,
}

impl BundledMap {
    pub const ALL: [BundledMap; 3] = [BundledMap::Straight, BundledMap::Loop, BundledMap::LTurn];

    pub fn name(self) -> &'static str {
        match self {
            BundledMap::Straight => "straight",
            BundledMap::Loop => "loop",
            BundledMap::LTurn => "lturn",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            BundledMap::Straight => include_str!("../../maps/straight.world"),
            BundledMap::Loop => include_str!("../../maps/loop.world"),
            BundledMap::LTurn => include_str!("../../maps/lturn.world"),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn load(self) -> WorldMap {
        load_world(self.text()).expect("bundled map is valid")
    }
}

/// Straight corridor `length × width` with a centered start one meter in.
pub fn straight_corridor(length: f64, width: f64) -> WorldMap {
    let side = [90, 110, 160];
    let other = [160, 90, 70];
    let cap = [200, 200, 90];
    let walls = alloc::vec![
        Wall { a: Vec2::new(0.0, 0.0), b: Vec2::new(length, 0.0), color: side },
        Wall { a: Vec2::new(length, 0.0), b: Vec2::new(length, width), color: cap },
        Wall { a: Vec2::new(length, width), b: Vec2::new(0.0, width), color: other },
        Wall { a: Vec2::new(0.0, width), b: Vec2::new(0.0, 0.0), color: cap },
    ];
    let mid = width / 2.0;
    WorldMap::new(
        walls,
        alloc::vec![Vec2::new(1.0, mid), Vec2::new(length - 1.0, mid)],
        Pose { x: 1.0, y: mid, heading: 0.0 },
    )
    .expect("valid corridor")
}

impl core::fmt::Display for BundledMap {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for BundledMap {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_name(s).ok_or_else(|| s.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RECT: &str = "W 0 0 20 0 128 128 128\nW 20 0 20 2 128 128 128\nW 20 2 0 2 128 128 128\nW 0 2 0 0 128 128 128\nC 0 1\nC 20 1\n";

    #[test]
    fn rectangle_loads() {
        let m = load_world(RECT).unwrap();
        assert_eq!(m.walls.len(), 4);
        assert!(m.centerline.iter().all(|p| p.y == 1.0));
        assert_eq!(m.start, Pose { x: 0.0, y: 1.0, heading: 0.0 });
    }

    #[test]
    fn empty_is_no_walls() {
        assert_eq!(load_world(""), Err(WorldError::NoWalls));
        assert_eq!(load_world("# only a comment\n"), Err(WorldError::NoWalls));
    }

    #[test]
    fn zero_length_wall_rejected() {
        let err = load_world("0 0 0 0 128 128 128").unwrap_err();
        assert_eq!(err, WorldError::ZeroLengthWall { line: 1 });
        assert!(err.to_string().contains("zero-length wall"));
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = "W 0 0 1 0 1 1 1\nW 0 0 x 0 1 1 1\n";
        match load_world(text) {
            Err(WorldError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match load_world("W 0 0 1 0 1 1\n") {
            Err(WorldError::Malformed { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_walls() {
        let text = "W 0 0 1 0 1 1 1\nW 1 0 1 1 1 1 1\nC 0 0\nC 1 1\n";
        assert_eq!(load_world(text), Err(WorldError::TooFewWalls(2)));
    }

    #[test]
    fn bundled_maps_parse_and_roundtrip() {
        for m in BundledMap::ALL {
            let map = m.load();
            assert!(map.walls.len() >= 4);
            assert!(map.nearest_wall_distance(Vec2::new(map.start.x, map.start.y)) > 0.5);
            assert_eq!(load_world(&map.to_text()).unwrap(), map);
        }
    }
}
