//! Finite-depth Hilbert curve on `[0,1] -> [0,1]²`.
//!
//! Depth `k` splits the square into `4^k` cells of side `2^-k`. Cell indices
//! are walked top-down, two bits per level, through a four-element
//! orientation group (identity, transpose, anti-transpose, half-turn):
//!
//! ```text
//!   level-1 order        sub-curve orientation per quadrant
//!   1 ─── 2              1: identity      2: identity
//!   │     │
//!   0     3              0: transpose     3: anti-transpose
//! ```
//!
//! The curve starts in the lower-left corner `(0,0)` and ends in the
//! lower-right corner `(1,0)` at every depth.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::dyadic::Dyadic;

/// Default cap for full curve enumeration (`4^k` points).
pub const DEFAULT_TRACE_CAP: u32 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("depth {depth} exceeds cap {cap}")]
    DepthCap { depth: u32, cap: u32 },
}

/// A parameter `numerator / 4^depth` in `[0,1]`.
#[derive(Debug, Clone)]
pub struct CurveParam {
    numerator: BigUint,
    depth: u32,
}

impl CurveParam {
    pub fn new(numerator: impl Into<BigUint>, depth: u32) -> Result<Self, CurveError> {
        let numerator = numerator.into();
        if numerator > cell_count(depth) {
            return Err(CurveError::Domain(format!(
                "parameter {numerator}/4^{depth} lies above 1"
            )));
        }
        Ok(CurveParam { numerator, depth })
    }

    /// Exact conversion from a dyadic in `[0,1]`. Odd powers of two in the
    /// denominator are absorbed by moving one level deeper.
    pub fn from_dyadic(v: &Dyadic) -> Result<Self, CurveError> {
        if v.is_negative() || *v > Dyadic::one() {
            return Err(CurveError::Domain(format!("parameter {v} outside [0,1]")));
        }
        let bits = v.fractional_bits();
        let depth = bits.div_ceil(2);
        let depth = u32::try_from(depth)
            .map_err(|_| CurveError::Domain("parameter precision too large".into()))?;
        let scaled = v.shift(2 * depth as i64).floor();
        let numerator = scaled
            .to_biguint()
            .ok_or_else(|| CurveError::Domain("negative parameter".into()))?;
        CurveParam::new(numerator, depth)
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn value(&self) -> Dyadic {
        Dyadic::from_biguint(&self.numerator).shift(-2 * self.depth as i64)
    }

    /// Index of the depth-`k` cell whose parameter interval contains this
    /// value; `t = 1` belongs to the last cell.
    pub fn index_at(&self, k: u32) -> BigUint {
        let idx = if self.depth >= k {
            &self.numerator >> (2 * (self.depth - k) as u64)
        } else {
            &self.numerator << (2 * (k - self.depth) as u64)
        };
        let n = cell_count(k);
        if idx >= n {
            n - BigUint::one()
        } else {
            idx
        }
    }
}

impl PartialEq for CurveParam {
    fn eq(&self, other: &Self) -> bool {
        let d = self.depth.max(other.depth);
        let a = &self.numerator << (2 * (d - self.depth) as u64);
        let b = &other.numerator << (2 * (d - other.depth) as u64);
        a == b
    }
}

impl Eq for CurveParam {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanePoint {
    pub x: Dyadic,
    pub y: Dyadic,
}

impl PlanePoint {
    pub fn new(x: Dyadic, y: Dyadic) -> Self {
        PlanePoint { x, y }
    }

    pub fn from_f64(x: f64, y: f64) -> Result<Self, CurveError> {
        let conv = |v: f64| Dyadic::from_f64(v).map_err(|e| CurveError::Domain(e.to_string()));
        Ok(PlanePoint::new(conv(x)?, conv(y)?))
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.x.to_f64(), self.y.to_f64())
    }

    pub fn in_unit_square(&self) -> bool {
        let (zero, one) = (Dyadic::zero(), Dyadic::one());
        self.x >= zero && self.x <= one && self.y >= zero && self.y <= one
    }

    pub fn sup_distance(&self, other: &PlanePoint) -> Dyadic {
        Dyadic::max(&(&self.x - &other.x).abs(), &(&self.y - &other.y).abs())
    }

    pub fn lerp(a: &PlanePoint, b: &PlanePoint, w: &Dyadic) -> PlanePoint {
        PlanePoint::new(Dyadic::lerp(&a.x, &b.x, w), Dyadic::lerp(&a.y, &b.y, w))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellAddress {
    pub depth: u32,
    pub col: BigUint,
    pub row: BigUint,
}

impl CellAddress {
    pub fn new(depth: u32, col: impl Into<BigUint>, row: impl Into<BigUint>) -> Self {
        CellAddress {
            depth,
            col: col.into(),
            row: row.into(),
        }
    }

    pub fn center(&self) -> PlanePoint {
        let half = |c: &BigUint| {
            let num = (c << 1u32) + BigUint::one();
            Dyadic::from_biguint(&num).shift(-(self.depth as i64) - 1)
        };
        PlanePoint::new(half(&self.col), half(&self.row))
    }

    /// Closed-cell containment.
    pub fn contains(&self, p: &PlanePoint) -> bool {
        let lo_x = Dyadic::from_biguint(&self.col).shift(-(self.depth as i64));
        let lo_y = Dyadic::from_biguint(&self.row).shift(-(self.depth as i64));
        let side = Dyadic::one().shift(-(self.depth as i64));
        p.x >= lo_x && p.x <= &lo_x + &side && p.y >= lo_y && p.y <= &lo_y + &side
    }

    /// True when `other` is at the same depth and shares an edge.
    pub fn is_edge_adjacent(&self, other: &CellAddress) -> bool {
        if self.depth != other.depth {
            return false;
        }
        let diff = |a: &BigUint, b: &BigUint| if a >= b { a - b } else { b - a };
        let dc = diff(&self.col, &other.col);
        let dr = diff(&self.row, &other.row);
        (dc.is_one() && dr.is_zero()) || (dc.is_zero() && dr.is_one())
    }

    /// The ancestor of this cell at a shallower depth.
    pub fn parent_at(&self, depth: u32) -> CellAddress {
        assert!(depth <= self.depth);
        let s = (self.depth - depth) as u64;
        CellAddress::new(depth, &self.col >> s, &self.row >> s)
    }
}

pub fn cell_count(k: u32) -> BigUint {
    BigUint::one() << (2 * k as u64)
}

// (swap, flip) acting on a quadrant bit pair; the group is abelian so
// composition is component-wise xor.
#[derive(Clone, Copy)]
struct Orientation {
    swap: bool,
    flip: bool,
}

const BASE_ORDER: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 1), (1, 0)];

impl Orientation {
    const IDENTITY: Orientation = Orientation {
        swap: false,
        flip: false,
    };

    fn apply(self, (x, y): (u8, u8)) -> (u8, u8) {
        let (x, y) = if self.swap { (y, x) } else { (x, y) };
        if self.flip {
            (1 - x, 1 - y)
        } else {
            (x, y)
        }
    }

    fn child(self, digit: u8) -> Orientation {
        let (s, f) = match digit {
            0 => (true, false),
            3 => (true, true),
            _ => (false, false),
        };
        Orientation {
            swap: self.swap ^ s,
            flip: self.flip ^ f,
        }
    }
}

/// Cell (col, row) visited at position `index` of the depth-`k` walk.
pub fn index_to_cell(index: &BigUint, k: u32) -> CellAddress {
    let mut col = BigUint::zero();
    let mut row = BigUint::zero();
    let mut orient = Orientation::IDENTITY;
    for level in (0..k as u64).rev() {
        let digit = (index.bit(2 * level + 1) as u8) << 1 | index.bit(2 * level) as u8;
        let (qx, qy) = orient.apply(BASE_ORDER[digit as usize]);
        if qx == 1 {
            col.set_bit(level, true);
        }
        if qy == 1 {
            row.set_bit(level, true);
        }
        orient = orient.child(digit);
    }
    CellAddress { depth: k, col, row }
}

/// Inverse of [`index_to_cell`].
pub fn cell_to_index(cell: &CellAddress) -> BigUint {
    let mut index = BigUint::zero();
    let mut orient = Orientation::IDENTITY;
    for level in (0..cell.depth as u64).rev() {
        let global = (cell.col.bit(level) as u8, cell.row.bit(level) as u8);
        // every orientation is an involution
        let local = orient.apply(global);
        let digit = BASE_ORDER.iter().position(|&q| q == local).unwrap() as u8;
        if digit & 2 != 0 {
            index.set_bit(2 * level + 1, true);
        }
        if digit & 1 != 0 {
            index.set_bit(2 * level, true);
        }
        orient = orient.child(digit);
    }
    index
}

/// Depth-`k` cell visited at `t`, together with its center.
pub fn hilbert_encode(t: &CurveParam, k: u32) -> Result<(CellAddress, PlanePoint), CurveError> {
    if t.numerator > cell_count(t.depth) {
        return Err(CurveError::Domain("parameter above 1".into()));
    }
    let cell = index_to_cell(&t.index_at(k), k);
    let center = cell.center();
    Ok((cell, center))
}

/// Depth-`k` cell containing `p`. Points on a shared edge or corner go to
/// the lower-left neighbour.
pub fn cell_of_point(p: &PlanePoint, k: u32) -> Result<CellAddress, CurveError> {
    if !p.in_unit_square() {
        return Err(CurveError::Domain(format!(
            "point ({}, {}) outside the unit square",
            p.x, p.y
        )));
    }
    let side = BigUint::one() << k as u64;
    let coord = |v: &Dyadic| {
        let c = v.shift(k as i64).ceil();
        let c = if c.is_zero() { c } else { c - 1 };
        let c = c.to_biguint().unwrap_or_default();
        if c >= side {
            &side - BigUint::one()
        } else {
            c
        }
    };
    Ok(CellAddress {
        depth: k,
        col: coord(&p.x),
        row: coord(&p.y),
    })
}

/// Start of the parameter interval of the depth-`k` cell containing `p`.
pub fn hilbert_decode(p: &PlanePoint, k: u32) -> Result<CurveParam, CurveError> {
    let cell = cell_of_point(p, k)?;
    CurveParam::new(cell_to_index(&cell), k)
}

/// The `4^k` cell centers in traversal order.
pub fn curve_trace(k: u32, cap: u32) -> Result<Vec<PlanePoint>, CurveError> {
    if k > cap {
        return Err(CurveError::DepthCap { depth: k, cap });
    }
    let n = 1u64 << (2 * k);
    Ok((0..n)
        .map(|i| index_to_cell(&BigUint::from(i), k).center())
        .collect())
}

/// Sup-distance bound for parameters at most `4^-k` apart: adjacent cells
/// share an edge, so `2 · 2^-k` covers both the cell centers and the
/// polygon approximant.
pub fn modulus_bound(k: u32) -> f64 {
    2.0 * 2f64.powi(-(k as i32))
}

/// Bound on the sup-distance between the depth-`k` polygon and the limit
/// curve at the same parameter.
pub fn limit_distance(k: u32) -> f64 {
    1.5 * 2f64.powi(-(k as i32))
}

/// Parameter of the center of cell `index` at depth `k`: `(2i+1) / (2·4^k)`.
pub fn center_param(index: &BigUint, k: u32) -> Dyadic {
    let num = (index << 1u32) + BigUint::one();
    Dyadic::from_biguint(&num).shift(-(2 * k as i64) - 1)
}

/// Continuous depth-`k` approximant: the polygon through
/// `(0,0), c_0, c_1, …, c_{N-1}, (1,0)` where `c_i` is reached at
/// [`center_param`]`(i)`. Speed is `2^k` in the sup norm throughout.
pub fn polygon_point(s: &Dyadic, k: u32) -> Result<PlanePoint, CurveError> {
    if s.is_negative() || *s > Dyadic::one() {
        return Err(CurveError::Domain(format!("parameter {s} outside [0,1]")));
    }
    let n = cell_count(k);
    let v = s.shift(2 * k as i64);
    let half = Dyadic::one().shift(-1);
    if v <= half {
        let c = v.shift(-(k as i64));
        return Ok(PlanePoint::new(c.clone(), c));
    }
    let last = &Dyadic::from_biguint(&n) - &half;
    if v >= last {
        let w = (&v - &last).shift(1);
        let from = index_to_cell(&(&n - BigUint::one()), k).center();
        let to = PlanePoint::new(Dyadic::one(), Dyadic::zero());
        return Ok(PlanePoint::lerp(&from, &to, &w));
    }
    let u = &v - &half;
    let i = u.floor();
    let frac = &u - &Dyadic::from_bigint(i.clone());
    let i = i.to_biguint().expect("index is non-negative");
    let a = index_to_cell(&i, k).center();
    let b = index_to_cell(&(i + BigUint::one()), k).center();
    Ok(PlanePoint::lerp(&a, &b, &frac))
}

/// Convenience for small depths where indices fit a machine word.
pub fn index_to_cell_u64(index: u64, k: u32) -> (u64, u64) {
    let c = index_to_cell(&BigUint::from(index), k);
    (
        c.col.to_u64().unwrap_or(u64::MAX),
        c.row.to_u64().unwrap_or(u64::MAX),
    )
}
