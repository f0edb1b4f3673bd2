//! Axis-aligned geometry in the image plane.
//!
//! Image coordinates: origin at the top-left corner, `y` grows downward, so a
//! "higher" rectangle has the smaller center `y`. All containment and range
//! predicates are closed: touching edges count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Rectangle stored as its min/max extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

/// A box as annotated in CVML: center plus width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub center: Point,
    pub width: f64,
    pub height: f64,
}

impl BoxSpec {
    pub const fn new(xc: f64, yc: f64, width: f64, height: f64) -> Self {
        Self {
            center: Point::new(xc, yc),
            width,
            height,
        }
    }
}

impl Rect {
    /// Builds a rect from two corners given in any order.
    pub fn from_corners(a: Point, b: Point) -> Self {
        Self {
            min_x: a.x.min(b.x),
            min_y: a.y.min(b.y),
            max_x: a.x.max(b.x),
            max_y: a.y.max(b.y),
        }
    }

    pub fn center(&self) -> Point {
        Point::new((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn min_x(&self) -> f64 {
        self.min_x
    }

    pub fn max_x(&self) -> f64 {
        self.max_x
    }

    pub fn min_y(&self) -> f64 {
        self.min_y
    }

    pub fn max_y(&self) -> f64 {
        self.max_y
    }

    /// Recovers the center/size form.
    pub fn to_box(&self) -> BoxSpec {
        let c = self.center();
        BoxSpec::new(c.x, c.y, self.width(), self.height())
    }
}

/// Extents are center ± size/2 on each axis; zero-size boxes give point rects.
pub fn rect_from_box(b: &BoxSpec) -> Rect {
    let hw = b.width / 2.0;
    let hh = b.height / 2.0;
    Rect {
        min_x: b.center.x - hw,
        min_y: b.center.y - hh,
        max_x: b.center.x + hw,
        max_y: b.center.y + hh,
    }
}

pub fn dist(p1: Point, p2: Point) -> f64 {
    (p1.x - p2.x).hypot(p1.y - p2.y)
}

pub fn pt_inside(p: Point, r: &Rect) -> bool {
    in_x_range_pt(p, r) && in_y_range_pt(p, r)
}

/// `inner` lies within `outer` (equal bounds allowed).
pub fn rect_inside(inner: &Rect, outer: &Rect) -> bool {
    inner.min_x >= outer.min_x
        && inner.max_x <= outer.max_x
        && inner.min_y >= outer.min_y
        && inner.max_y <= outer.max_y
}

/// The closed rectangles share at least one point.
pub fn overlaps(a: &Rect, b: &Rect) -> bool {
    in_x_range(a, b) && in_y_range(a, b)
}

pub fn rect_higher(a: &Rect, b: &Rect) -> bool {
    a.center().y < b.center().y
}

pub fn rect_lower(a: &Rect, b: &Rect) -> bool {
    a.center().y > b.center().y
}

pub fn rect_left(a: &Rect, b: &Rect) -> bool {
    a.center().x < b.center().x
}

pub fn rect_right(a: &Rect, b: &Rect) -> bool {
    a.center().x > b.center().x
}

pub fn in_x_range_pt(p: Point, r: &Rect) -> bool {
    r.min_x <= p.x && p.x <= r.max_x
}

pub fn in_y_range_pt(p: Point, r: &Rect) -> bool {
    r.min_y <= p.y && p.y <= r.max_y
}

/// The x-projections of the two rects intersect.
pub fn in_x_range(a: &Rect, b: &Rect) -> bool {
    a.min_x <= b.max_x && b.min_x <= a.max_x
}

/// The y-projections of the two rects intersect.
pub fn in_y_range(a: &Rect, b: &Rect) -> bool {
    a.min_y <= b.max_y && b.min_y <= a.max_y
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Rect {
        Rect {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    #[test]
    fn box_to_rect_examples() {
        let r = rect_from_box(&BoxSpec::new(184.0, 204.0, 55.0, 30.0));
        assert_eq!(r, rect(156.5, 189.0, 211.5, 219.0));

        let r = rect_from_box(&BoxSpec::new(0.0, 0.0, 0.0, 0.0));
        assert_eq!(r, rect(0.0, 0.0, 0.0, 0.0));

        let r = rect_from_box(&BoxSpec::new(10.0, 10.0, 2.0, 4.0));
        assert_eq!(r, rect(9.0, 8.0, 11.0, 12.0));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
        assert_eq!(dist(Point::new(7.0, 7.0), Point::new(7.0, 7.0)), 0.0);
        let d = dist(Point::new(72.0, 76.0), Point::new(78.0, 63.0));
        assert!((d - 205f64.sqrt()).abs() < 1e-12);
        assert!((d - 14.3178).abs() < 1e-4);
    }

    #[test]
    fn containment_examples() {
        let r0 = rect_from_box(&BoxSpec::new(184.0, 204.0, 55.0, 30.0));
        assert!(pt_inside(Point::new(184.0, 204.0), &r0));
        assert!(pt_inside(Point::new(156.5, 189.0), &r0));
        assert!(rect_inside(&r0, &r0));
        assert!(overlaps(&rect(0.0, 0.0, 1.0, 1.0), &rect(1.0, 1.0, 2.0, 2.0)));
        assert!(!overlaps(&rect(0.0, 0.0, 1.0, 1.0), &rect(1.5, 1.0, 2.0, 2.0)));
    }

    #[test]
    fn ordering_examples() {
        let obj1 = rect_from_box(&BoxSpec::new(72.0, 76.0, 26.0, 18.0));
        let obj2 = rect_from_box(&BoxSpec::new(78.0, 63.0, 25.0, 21.0));
        assert!(rect_higher(&obj2, &obj1));
        assert!(!rect_left(&obj1, &obj1));
        assert!(!rect_higher(&obj1, &obj1) && !rect_lower(&obj1, &obj1));
    }

    #[test]
    fn range_examples() {
        let obj1 = rect_from_box(&BoxSpec::new(72.0, 76.0, 26.0, 18.0));
        let obj2 = rect_from_box(&BoxSpec::new(78.0, 63.0, 25.0, 21.0));
        assert_eq!((obj2.min_x(), obj2.max_x()), (65.5, 90.5));
        assert_eq!((obj1.min_x(), obj1.max_x()), (59.0, 85.0));
        assert!(in_x_range(&obj2, &obj1));
        assert!(in_x_range(&obj1, &obj1));
        assert!(!in_y_range(&rect(0.0, 0.0, 1.0, 1.0), &rect(0.0, 5.0, 1.0, 6.0)));
        assert!(in_x_range_pt(Point::new(59.0, 1000.0), &obj1));
    }

    fn coord() -> impl Strategy<Value = f64> {
        (-200i32..200).prop_map(|v| v as f64 / 2.0)
    }

    fn any_rect() -> impl Strategy<Value = Rect> {
        (coord(), coord(), coord(), coord())
            .prop_map(|(a, b, c, d)| Rect::from_corners(Point::new(a, b), Point::new(c, d)))
    }

    fn any_point() -> impl Strategy<Value = Point> {
        (coord(), coord()).prop_map(|(x, y)| Point::new(x, y))
    }

    proptest! {
        #[test]
        fn box_round_trip(xc in coord(), yc in coord(), w in 0u32..400, h in 0u32..400) {
            let b = BoxSpec::new(xc, yc, w as f64 / 2.0, h as f64 / 2.0);
            prop_assert_eq!(rect_from_box(&b).to_box(), b);
        }

        #[test]
        fn dist_is_a_metric(a in any_point(), b in any_point(), c in any_point()) {
            prop_assert_eq!(dist(a, b), dist(b, a));
            prop_assert!(dist(a, b) >= 0.0);
            prop_assert_eq!(dist(a, b) == 0.0, a == b);
            prop_assert!(dist(a, c) <= dist(a, b) + dist(b, c) + 1e-9);
        }

        #[test]
        fn overlap_laws(a in any_rect(), b in any_rect()) {
            prop_assert_eq!(overlaps(&a, &b), overlaps(&b, &a));
            if rect_inside(&a, &b) && rect_inside(&b, &a) {
                prop_assert_eq!(a, b);
            }
            if rect_inside(&a, &b) {
                prop_assert!(overlaps(&a, &b));
            }
            prop_assert_eq!(overlaps(&a, &b), in_x_range(&a, &b) && in_y_range(&a, &b));
        }

        #[test]
        fn overlap_matches_grid_sampling(a in any_rect(), b in any_rect()) {
            // coordinates are multiples of 0.5, so a 0.5 grid finds any shared point
            let mut shared = false;
            let mut x = a.min_x;
            while x <= a.max_x && !shared {
                let mut y = a.min_y;
                while y <= a.max_y {
                    if pt_inside(Point::new(x, y), &b) {
                        shared = true;
                        break;
                    }
                    y += 0.5;
                }
                x += 0.5;
            }
            prop_assert_eq!(shared, overlaps(&a, &b));
        }

        #[test]
        fn vertical_trichotomy(a in any_rect(), b in any_rect()) {
            let equal = a.center().y == b.center().y;
            let n = [rect_higher(&a, &b), rect_lower(&a, &b), equal].iter().filter(|v| **v).count();
            prop_assert_eq!(n, 1);
            prop_assert_eq!(rect_lower(&a, &b), rect_higher(&b, &a));
            prop_assert_eq!(rect_right(&a, &b), rect_left(&b, &a));
        }
    }
}
