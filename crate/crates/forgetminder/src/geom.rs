//! Axis-aligned rectangles and the overlap measures used by the evaluator
//! and the object localizer.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix > 0.0 && iy > 0.0 {
            ix * iy
        } else {
            0.0
        }
    }

    /// Intersection over union; 0 when both rectangles are degenerate.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// True when the closed rectangles share at least a boundary point.
    pub fn touches(&self, other: &Rect) -> bool {
        self.x <= other.x + other.w
            && other.x <= self.x + self.w
            && self.y <= other.y + other.h
            && other.y <= self.y + self.h
    }

    /// Smallest rectangle covering both inputs.
    pub fn union_bounds(&self, other: &Rect) -> Rect {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = (self.x + self.w).max(other.x + other.w);
        let y1 = (self.y + self.h).max(other.y + other.h);
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.x + self.w && py >= self.y && py <= self.y + self.h
    }
}

/// Intersection over union for closed integer frame intervals `[a0, a1]`,
/// `[b0, b1]`. Exact in integer arithmetic so threshold comparisons at the
/// 0.4 boundary are reliable.
pub fn interval_iou(a: (usize, usize), b: (usize, usize)) -> f64 {
    let (a0, a1) = a;
    let (b0, b1) = b;
    assert!(a1 >= a0 && b1 >= b0, "intervals must be non-empty");
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    let inter = if hi >= lo { hi - lo + 1 } else { 0 };
    let union = (a1 - a0 + 1) + (b1 - b0 + 1) - inter;
    inter as f64 / union as f64
}
