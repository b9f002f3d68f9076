//! Normalized center-size boxes and the two label classes.

use std::fmt;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ClassId {
    Face = 0,
    Eye = 1,
}

impl ClassId {
    pub const ALL: [ClassId; 2] = [ClassId::Face, ClassId::Eye];

    pub fn from_index(v: u8) -> Option<Self> {
        match v {
            0 => Some(ClassId::Face),
            1 => Some(ClassId::Eye),
            _ => None,
        }
    }

    #[inline]
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::Face => "face",
            ClassId::Eye => "eye",
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Axis-aligned box as `(cx, cy, w, h)`, usually in `[0, 1]` image units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub cx: T,
    pub cy: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(cx: T, cy: T, w: T, h: T) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_corners(x0: T, y0: T, x1: T, y1: T) -> Self {
        let two = T::of(2.0);
        Self { cx: (x0 + x1) / two, cy: (y0 + y1) / two, w: x1 - x0, h: y1 - y0 }
    }

    /// `(x0, y0, x1, y1)`.
    pub fn corners(&self) -> [T; 4] {
        let two = T::of(2.0);
        let (hw, hh) = (self.w / two, self.h / two);
        [self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh]
    }

    #[inline]
    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn scaled(&self, sx: T, sy: T) -> Self {
        Self { cx: self.cx * sx, cy: self.cy * sy, w: self.w * sx, h: self.h * sy }
    }

    pub fn as_array(&self) -> [T; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    /// Label-file range: centers in `[0, 1]`, sizes in `(0, 1]`.
    pub fn is_normalized(&self) -> bool {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        unit(self.cx) && unit(self.cy) && self.w > T::zero() && self.w <= T::one() && self.h > T::zero() && self.h <= T::one()
    }
}
