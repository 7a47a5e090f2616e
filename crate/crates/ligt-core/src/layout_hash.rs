//! Hierarchical quadrant hashing of bounding boxes.
//!
//! A set of boxes is addressed by fitting a root rectangle around all box
//! corners, splitting it into four equal quarters, and recording which
//! quarter holds each box center. The process recurses into the containing
//! quarter for `L` levels, so every box ends up with a chain of `L` quadrant
//! symbols that localizes it from coarse to fine. Quarters are numbered in
//! reading order: 1 top-left, 2 top-right, 3 bottom-left, 4 bottom-right.
//!
//! Midline ties are half-open: a center exactly on a dividing line belongs
//! to the right/bottom quarter. A zero-extent axis contributes the left/top
//! bit at every level. Under these rules the recursive descent is exactly
//! equivalent to extracting the binary digits of the center's normalized
//! coordinates at `2^L` resolution, which is what the test oracles check.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Deepest supported hashing level. Four letters per level walk the
/// alphabet `A..X`; level 7 would need letters past `Z`.
pub const MAX_LEVELS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutHashError {
    #[error("no boxes")]
    NoBoxes,
    #[error("invalid bounding box [{x_min}, {y_min}, {x_max}, {y_max}]")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("hash level count {0} out of range 1..={MAX_LEVELS}")]
    LevelOutOfRange(usize),
    #[error("alphabet exhausted: no letters for level {0}")]
    AlphabetExhausted(u8),
    #[error("bad quadrant symbol (level {level}, quadrant {quadrant})")]
    BadSymbol { level: u8, quadrant: u8 },
}

/// Axis-aligned box in pixel-like coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, LayoutHashError> {
        let b = BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) && x_min <= x_max && y_min <= y_max
        {
            Ok(b)
        } else {
            Err(LayoutHashError::InvalidBox {
                x_min,
                y_min,
                x_max,
                y_max,
            })
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = LayoutHashError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> [f64; 4] {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// Rectangular cell examined at one hashing step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    fn mid_x(&self) -> f64 {
        self.x_min + (self.x_max - self.x_min) / 2.0
    }

    fn mid_y(&self) -> f64 {
        self.y_min + (self.y_max - self.y_min) / 2.0
    }

    pub fn contains(&self, point: (f64, f64)) -> bool {
        point.0 >= self.x_min && point.0 <= self.x_max && point.1 >= self.y_min && point.1 <= self.y_max
    }

    /// Sub-rectangle for quadrant `q` in 1..=4.
    pub fn quadrant(&self, q: u8) -> Rect {
        let (mx, my) = (self.mid_x(), self.mid_y());
        match q {
            1 => Rect {
                x_min: self.x_min,
                y_min: self.y_min,
                x_max: mx,
                y_max: my,
            },
            2 => Rect {
                x_min: mx,
                y_min: self.y_min,
                x_max: self.x_max,
                y_max: my,
            },
            3 => Rect {
                x_min: self.x_min,
                y_min: my,
                x_max: mx,
                y_max: self.y_max,
            },
            4 => Rect {
                x_min: mx,
                y_min: my,
                x_max: self.x_max,
                y_max: self.y_max,
            },
            _ => unreachable!("quadrant index {q} out of range"),
        }
    }
}

/// One quadrant decision: at `level`, the box center sat in `quadrant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadSymbol {
    pub level: u8,
    pub quadrant: u8,
}

impl QuadSymbol {
    pub fn new(level: u8, quadrant: u8) -> Result<Self, LayoutHashError> {
        if level >= 1 && (1..=4).contains(&quadrant) {
            Ok(QuadSymbol { level, quadrant })
        } else {
            Err(LayoutHashError::BadSymbol { level, quadrant })
        }
    }

    pub fn letter(self) -> Result<char, LayoutHashError> {
        symbol_to_letter(self)
    }
}

/// Full symbol chain of one box, ordered level 1..=L.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutCode {
    pub symbols: Vec<QuadSymbol>,
}

impl LayoutCode {
    pub fn quadrants(&self) -> Vec<u8> {
        self.symbols.iter().map(|s| s.quadrant).collect()
    }

    /// Letter encoding of the chain, e.g. `AEIM` for quadrant 1 at levels 1..4.
    pub fn letters(&self) -> Result<String, LayoutHashError> {
        self.symbols.iter().map(|s| s.letter()).collect()
    }
}

/// Codes for a whole box set, in input box order.
#[derive(Debug, Clone, PartialEq)]
pub struct HashGrid {
    pub codes: Vec<LayoutCode>,
    pub root_rect: Rect,
}

/// Min/max envelope of all box corners.
pub fn bounding_rect(boxes: &[BoundingBox]) -> Result<Rect, LayoutHashError> {
    let first = boxes.first().ok_or(LayoutHashError::NoBoxes)?;
    let mut rect = Rect {
        x_min: first.x_min,
        y_min: first.y_min,
        x_max: first.x_max,
        y_max: first.y_max,
    };
    for b in &boxes[1..] {
        rect.x_min = rect.x_min.min(b.x_min);
        rect.y_min = rect.y_min.min(b.y_min);
        rect.x_max = rect.x_max.max(b.x_max);
        rect.y_max = rect.y_max.max(b.y_max);
    }
    Ok(rect)
}

fn axis_bit(c: f64, lo: f64, hi: f64) -> u8 {
    if hi <= lo {
        return 0; // zero-extent axis
    }
    let mid = lo + (hi - lo) / 2.0;
    u8::from(c >= mid)
}

/// Quadrant of `cell` containing `center`, half-open on the midlines.
pub fn assign_quadrant(center: (f64, f64), cell: &Rect) -> u8 {
    let bx = axis_bit(center.0, cell.x_min, cell.x_max);
    let by = axis_bit(center.1, cell.y_min, cell.y_max);
    1 + bx + 2 * by
}

/// Hash every box through `levels` quadrant subdivisions of the fitted root
/// rectangle.
pub fn layout_hash(boxes: &[BoundingBox], levels: usize) -> Result<HashGrid, LayoutHashError> {
    if !(1..=MAX_LEVELS).contains(&levels) {
        return Err(LayoutHashError::LevelOutOfRange(levels));
    }
    let root_rect = bounding_rect(boxes)?;
    let codes = boxes
        .iter()
        .map(|b| {
            let center = b.center();
            let mut cell = root_rect;
            let mut symbols = Vec::with_capacity(levels);
            for level in 1..=levels {
                let q = assign_quadrant(center, &cell);
                symbols.push(QuadSymbol {
                    level: level as u8,
                    quadrant: q,
                });
                cell = cell.quadrant(q);
            }
            LayoutCode { symbols }
        })
        .collect();
    Ok(HashGrid { codes, root_rect })
}

/// Letter for a quadrant symbol: level 1 maps to `A..D`, level 2 to `E..H`,
/// and so on through level 6 (`U..X`).
pub fn symbol_to_letter(symbol: QuadSymbol) -> Result<char, LayoutHashError> {
    if symbol.level < 1 || symbol.level as usize > MAX_LEVELS {
        return Err(LayoutHashError::AlphabetExhausted(symbol.level));
    }
    if !(1..=4).contains(&symbol.quadrant) {
        return Err(LayoutHashError::BadSymbol {
            level: symbol.level,
            quadrant: symbol.quadrant,
        });
    }
    let idx = 4 * (symbol.level - 1) + (symbol.quadrant - 1);
    Ok((b'A' + idx) as char)
}

/// Placeholder symbol carried by question tokens at every level.
pub fn question_symbol() -> char {
    '0'
}
