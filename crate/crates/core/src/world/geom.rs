//! Grid geometry: cells, headings, camera horizons and height bands.

use serde::{Deserialize, Serialize};
use std::fmt;

/// World units per grid cell.
pub const CELL_SIZE: f64 = 0.25;

/// An integer grid coordinate. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell(pub i32, pub i32);

impl Cell {
    pub fn x(self) -> i32 {
        self.0
    }

    pub fn y(self) -> i32 {
        self.1
    }

    pub fn dist(self, other: Cell) -> f64 {
        let dx = (other.0 - self.0) as f64;
        let dy = (other.1 - self.1) as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// 4-neighbourhood in a fixed order (north, east, south, west).
    pub fn neighbours4(self) -> [Cell; 4] {
        [
            Cell(self.0, self.1 + 1),
            Cell(self.0 + 1, self.1),
            Cell(self.0, self.1 - 1),
            Cell(self.0 - 1, self.1),
        ]
    }

    /// Cells strictly between `self` and `to` on a Bresenham line.
    pub fn line_to(self, to: Cell) -> Vec<Cell> {
        let mut out = Vec::new();
        let (mut x, mut y) = (self.0, self.1);
        let dx = (to.0 - x).abs();
        let dy = -(to.1 - y).abs();
        let sx = if x < to.0 { 1 } else { -1 };
        let sy = if y < to.1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            if x == to.0 && y == to.1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
            if x == to.0 && y == to.1 {
                break;
            }
            out.push(Cell(x, y));
        }
        out
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0, self.1)
    }
}

/// Agent heading in degrees. 0 faces +y, 90 faces +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> i64 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    pub fn from_degrees(deg: i64) -> Option<Rotation> {
        match deg.rem_euclid(360) {
            0 => Some(Rotation::R0),
            90 => Some(Rotation::R90),
            180 => Some(Rotation::R180),
            270 => Some(Rotation::R270),
            _ => None,
        }
    }

    pub fn forward(self) -> (i32, i32) {
        match self {
            Rotation::R0 => (0, 1),
            Rotation::R90 => (1, 0),
            Rotation::R180 => (0, -1),
            Rotation::R270 => (-1, 0),
        }
    }

    /// Heading that looks from `from` straight at the 4-neighbour `to`.
    pub fn facing(from: Cell, to: Cell) -> Option<Rotation> {
        match (to.0 - from.0, to.1 - from.1) {
            (0, 1) => Some(Rotation::R0),
            (1, 0) => Some(Rotation::R90),
            (0, -1) => Some(Rotation::R180),
            (-1, 0) => Some(Rotation::R270),
            _ => None,
        }
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let deg = i64::deserialize(d)?;
        Rotation::from_degrees(deg)
            .filter(|_| (0..360).contains(&deg))
            .ok_or_else(|| serde::de::Error::custom(format!("invalid rotation {deg}")))
    }
}

/// Camera pitch in degrees: -30 looks up, 30 looks down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Horizon {
    Up,
    Level,
    Down,
}

impl Horizon {
    pub const ALL: [Horizon; 3] = [Horizon::Up, Horizon::Level, Horizon::Down];

    pub fn degrees(self) -> i64 {
        match self {
            Horizon::Up => -30,
            Horizon::Level => 0,
            Horizon::Down => 30,
        }
    }

    pub fn from_degrees(deg: i64) -> Option<Horizon> {
        match deg {
            -30 => Some(Horizon::Up),
            0 => Some(Horizon::Level),
            30 => Some(Horizon::Down),
            _ => None,
        }
    }

    /// The height band in view at this pitch.
    pub fn band(self) -> HeightBand {
        match self {
            Horizon::Up => HeightBand::High,
            Horizon::Level => HeightBand::Mid,
            Horizon::Down => HeightBand::Low,
        }
    }

    pub fn for_band(band: HeightBand) -> Horizon {
        match band {
            HeightBand::High => Horizon::Up,
            HeightBand::Mid => Horizon::Level,
            HeightBand::Low => Horizon::Down,
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let deg = i64::deserialize(d)?;
        Horizon::from_degrees(deg).ok_or_else(|| serde::de::Error::custom(format!("invalid horizon {deg}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeightBand {
    Low,
    Mid,
    High,
}

/// Where the agent stands and looks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScenePose {
    pub cell: Cell,
    pub rotation: Rotation,
    pub horizon: Horizon,
}

/// Axis-aligned rectangle in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox { x0, y0, x1, y1 }
    }

    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        w.max(0.0) * h.max(0.0)
    }

    pub fn clamp_unit(&self) -> BBox {
        BBox::new(
            self.x0.clamp(0.0, 1.0),
            self.y0.clamp(0.0, 1.0),
            self.x1.clamp(0.0, 1.0),
            self.y1.clamp(0.0, 1.0),
        )
    }

    pub fn within_unit(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1].iter().all(|v| (0.0..=1.0).contains(v))
            && self.x0 <= self.x1
            && self.y0 <= self.y1
    }

    pub fn scaled(&self, s: f64) -> BBox {
        BBox::new(self.x0 * s, self.y0 * s, self.x1 * s, self.y1 * s)
    }
}
