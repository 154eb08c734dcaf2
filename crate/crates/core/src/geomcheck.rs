//! Necessary conditions for maximum-area inscribed rectangles, as
//! executable checks.
//!
//! These only ever reject: a rectangle that passes is consistent with being
//! optimal, one that fails certainly is not (up to the tolerance).

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::convexset::{ConvexSet, Polygon2D};
use crate::error::{Error, Result};
use crate::mair2d::Rectangle2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CornerKind {
    VertexCorner,
    EdgeCorner,
    InteriorCorner,
}

/// Where a rectangle corner sits relative to a polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerClass {
    pub kind: CornerKind,
    /// Vertex index for vertex corners, index `i` of edge `(v_i, v_{i+1})`
    /// for edge corners.
    pub witness: Option<usize>,
    /// Distance to the witness, or to the boundary for interior corners.
    pub residual: f64,
}

fn segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let s = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

/// Classifies `point` as a vertex, edge or interior corner of `poly`.
pub fn classify_corner(poly: &Polygon2D, point: &Vector2<f64>, tol: f64) -> Result<CornerClass> {
    if !(tol >= 0.0) {
        return Err(Error::Input(format!("tolerance must be non-negative, got {tol}")));
    }
    let x = DVector::from_vec(vec![point.x, point.y]);
    let outside = poly.halfspaces().iter().map(|h| h.residual(&x)).fold(f64::NEG_INFINITY, f64::max);
    if outside > tol {
        return Err(Error::Input(format!(
            "point ({}, {}) is outside the polygon by {outside:e}",
            point.x, point.y
        )));
    }
    let vs = poly.vertices();
    let nearest = |dist: &dyn Fn(usize) -> f64| {
        (0..vs.len()).map(|i| (dist(i), i)).fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    };
    let (dv, iv) = nearest(&|i| (point - vs[i]).norm());
    if dv <= tol {
        return Ok(CornerClass { kind: CornerKind::VertexCorner, witness: Some(iv), residual: dv });
    }
    let (de, ie) = nearest(&|i| segment_distance(point, &vs[i], &vs[(i + 1) % vs.len()]));
    if de <= tol {
        return Ok(CornerClass { kind: CornerKind::EdgeCorner, witness: Some(ie), residual: de });
    }
    Ok(CornerClass { kind: CornerKind::InteriorCorner, witness: None, residual: de })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimalityCase {
    /// All four corners on the boundary.
    Case1NoInterior,
    /// One interior corner with a vertex corner next to it.
    Case2OneInteriorAdjacentVertex,
    /// Two opposite interior corners, the other two at vertices, and the
    /// rectangle is a square.
    Case3TwoDiagonalInteriorSquare,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityVerdict {
    pub case: OptimalityCase,
    /// Corners in the order `x, x+u, x+u+v, x+v`.
    pub details: Vec<CornerClass>,
    pub notes: Vec<String>,
}

impl OptimalityVerdict {
    pub fn is_violation(&self) -> bool {
        self.case == OptimalityCase::Violation
    }
}

fn is_square(rect: &Rectangle2D, tol: f64) -> (bool, f64) {
    let (a, b) = (rect.u_vec().norm(), rect.v_vec().norm());
    let gap = (a - b).abs();
    (gap <= tol * a.max(b), gap)
}

/// Checks the corner structure every maximum-area inscribed rectangle of a
/// convex polygon must have.
pub fn check_polygon_optimality(poly: &Polygon2D, rect: &Rectangle2D, tol: f64) -> OptimalityVerdict {
    let mut notes = Vec::new();
    let mut details = Vec::with_capacity(4);
    for (i, c) in rect.corners().iter().enumerate() {
        match classify_corner(poly, c, tol) {
            Ok(cc) => details.push(cc),
            Err(e) => {
                notes.push(format!("corner {i}: {e}"));
                return OptimalityVerdict { case: OptimalityCase::Violation, details, notes };
            }
        }
    }
    let kind = |i: usize| details[i % 4].kind;
    let on_boundary = |i: usize| kind(i) != CornerKind::InteriorCorner;
    let interior: Vec<usize> = (0..4).filter(|&i| !on_boundary(i)).collect();

    // Two opposite corners on the boundary; if they are not both vertices a
    // third boundary corner is needed.
    let diag_ok = (0..2).any(|i| {
        on_boundary(i)
            && on_boundary(i + 2)
            && ((kind(i) == CornerKind::VertexCorner && kind(i + 2) == CornerKind::VertexCorner)
                || on_boundary(i + 1)
                || on_boundary(i + 3))
    });
    if !diag_ok {
        notes.push("no pair of opposite corners on the boundary with the required support".into());
    }
    // Both neighbours of every interior corner on the boundary.
    let adjacent_ok = interior.iter().all(|&i| on_boundary(i + 1) && on_boundary(i + 3));
    if !adjacent_ok {
        notes.push("an interior corner has an interior neighbour; the rectangle can be extended".into());
    }

    let case = match interior.as_slice() {
        [] => OptimalityCase::Case1NoInterior,
        [i] => {
            if kind(i + 1) == CornerKind::VertexCorner || kind(i + 3) == CornerKind::VertexCorner {
                OptimalityCase::Case2OneInteriorAdjacentVertex
            } else {
                notes.push(format!("interior corner {i} has no neighbouring vertex corner"));
                OptimalityCase::Violation
            }
        }
        [i, j] if j - i == 2 => {
            let (square, gap) = is_square(rect, tol);
            let vertices = kind(i + 1) == CornerKind::VertexCorner && kind(i + 3) == CornerKind::VertexCorner;
            if !vertices {
                notes.push("opposite interior corners but the other two are not vertex corners".into());
            }
            if !square {
                notes.push(format!("opposite interior corners but side lengths differ by {gap:e}"));
            }
            if square && vertices {
                OptimalityCase::Case3TwoDiagonalInteriorSquare
            } else {
                OptimalityCase::Violation
            }
        }
        _ => {
            notes.push(format!("{} interior corners", interior.len()));
            OptimalityCase::Violation
        }
    };
    if case != OptimalityCase::Violation && !(diag_ok && adjacent_ok) {
        notes.push("corner counts are inconsistent".into());
        return OptimalityVerdict { case: OptimalityCase::Violation, details, notes };
    }
    OptimalityVerdict { case, details, notes }
}

/// The rectangle's center lies within `tol` of `center`.
pub fn check_central_symmetry(center: &Vector2<f64>, rect: &Rectangle2D, tol: f64) -> bool {
    central_offset(center, rect) <= tol
}

pub fn central_offset(center: &Vector2<f64>, rect: &Rectangle2D) -> f64 {
    (rect.center() - center).norm()
}

/// Outcome of one condition of the axial-symmetry check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: u8,
    /// False when the condition's hypothesis does not hold, in which case it
    /// passes vacuously.
    pub applicable: bool,
    pub pass: bool,
    pub residual: f64,
    pub note: String,
}

/// Length of the line `p + s d` inside the rectangle.
fn clip_length(p: &Vector2<f64>, d: &Vector2<f64>, rect: &Rectangle2D) -> f64 {
    let x = rect.x_vec();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for e in [rect.u_vec(), rect.v_vec()] {
        // 0 <= (p + s d - x).e <= |e|^2
        let a = (p - x).dot(&e);
        let b = d.dot(&e);
        let len2 = e.norm_squared();
        if b.abs() < 1e-300 {
            if a < 0.0 || a > len2 {
                return 0.0;
            }
        } else {
            let (s0, s1) = ((-a) / b, (len2 - a) / b);
            lo = lo.max(s0.min(s1));
            hi = hi.min(s0.max(s1));
        }
    }
    ((hi - lo) * d.norm()).max(0.0)
}

/// How close `point` is to the boundary of `set`: a distance for polygon
/// sets, the largest constraint value otherwise.
fn boundary_gap(set: &ConvexSet, point: &Vector2<f64>) -> Result<f64> {
    match set.polygon() {
        Some(poly) => {
            let x = DVector::from_vec(vec![point.x, point.y]);
            let r = poly.halfspaces().iter().map(|h| h.residual(&x)).fold(f64::NEG_INFINITY, f64::max);
            Ok(r.abs())
        }
        None => Ok(set.max_residual(&DVector::from_vec(vec![point.x, point.y]))?.abs()),
    }
}

/// Checks the four conditions an optimal rectangle satisfies with respect to
/// an axis of symmetry `axis_point + s * axis_dir` of `set`.
pub fn check_axial_symmetry(
    axis_point: &Vector2<f64>,
    axis_dir: &Vector2<f64>,
    set: &ConvexSet,
    rect: &Rectangle2D,
    tol: f64,
) -> Result<Vec<ConditionVerdict>> {
    let dn = axis_dir.norm();
    if !(dn > 0.0 && dn.is_finite()) {
        return Err(Error::Input("axis direction must be nonzero".into()));
    }
    if set.dim() != 2 {
        return Err(Error::Input("axial symmetry check needs a planar set".into()));
    }
    let d = axis_dir / dn;
    let normal = Vector2::new(-d.y, d.x);
    let corners = rect.corners();
    let side: Vec<f64> = corners.iter().map(|c| (c - axis_point).dot(&normal)).collect();
    let above = side.iter().filter(|&&s| s > tol).count();
    let below = side.iter().filter(|&&s| s < -tol).count();
    let mut out = Vec::with_capacity(4);

    let clip = clip_length(axis_point, &d, rect);
    let crosses = above > 0 && below > 0 && clip > tol;
    out.push(ConditionVerdict {
        condition: 1,
        applicable: true,
        pass: crosses,
        residual: clip,
        note: if crosses {
            "axis crosses the interior".into()
        } else {
            "rectangle lies on one side of the axis".into()
        },
    });

    let dd = DVector::from_vec(vec![d.x, d.y]);
    let ends = [set.support_point(&dd)?, set.support_point(&-&dd)?];
    let end_gap = corners
        .iter()
        .flat_map(|c| ends.iter().map(move |e| (c - Vector2::new(e[0], e[1])).norm()))
        .fold(f64::INFINITY, f64::min);
    let gaps: Vec<f64> = corners.iter().map(|c| boundary_gap(set, c)).collect::<Result<_>>()?;
    let touch = |sign: f64| {
        (0..4)
            .filter(|&i| side[i] * sign > tol)
            .map(|i| gaps[i])
            .fold(f64::INFINITY, f64::min)
    };
    let worst_side = touch(1.0).max(touch(-1.0));
    let at_end = end_gap <= tol;
    out.push(ConditionVerdict {
        condition: 2,
        applicable: !at_end,
        pass: at_end || worst_side <= tol,
        residual: if at_end { end_gap } else { worst_side },
        note: if at_end {
            "a corner sits at an end of the symmetry chord".into()
        } else {
            "boundary corner required on each side of the axis".into()
        },
    });

    let (square, gap) = is_square(rect, tol);
    let lopsided = above >= 3 || below >= 3;
    out.push(ConditionVerdict {
        condition: 3,
        applicable: square,
        pass: !square || !lopsided,
        residual: gap,
        note: if square {
            format!("{above} corners above and {below} below the axis")
        } else {
            "not a square".into()
        },
    });

    let on_axis = side.iter().filter(|s| s.abs() <= tol).count();
    // Angle between the rectangle's sides and the axis, folded into [0, pi/4].
    let raw = rect.u_vec().angle(&d) % std::f64::consts::FRAC_PI_2;
    let alpha = raw.min(std::f64::consts::FRAC_PI_2 - raw);
    let applicable = on_axis >= 2;
    let angle_ok = alpha >= FRAC_PI_6 - tol && alpha < FRAC_PI_4 + tol;
    out.push(ConditionVerdict {
        condition: 4,
        applicable,
        pass: !applicable || square || angle_ok,
        residual: alpha,
        note: if !applicable {
            "no diagonal on the axis".into()
        } else if square {
            "diagonal on the axis; square".into()
        } else {
            format!("diagonal on the axis at angle {alpha:.6}")
        },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square() -> Polygon2D {
        Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    fn rhombus(delta: f64) -> Polygon2D {
        let a = 1.0 + delta;
        Polygon2D::from_points(&[[a, 0.0], [0.0, 1.0], [-a, 0.0], [0.0, -1.0]]).unwrap()
    }

    fn rhombus_square() -> Rectangle2D {
        Rectangle2D::new([0.0, -1.0], [1.0, 1.0], [-1.0, 1.0]).unwrap()
    }

    #[test]
    fn corner_classes() {
        let p = square();
        let c = classify_corner(&p, &Vector2::new(1.0, 1.0), 1e-6).unwrap();
        assert_eq!(c.kind, CornerKind::VertexCorner);
        assert_eq!(p.vertices()[c.witness.unwrap()], Vector2::new(1.0, 1.0));
        let c = classify_corner(&p, &Vector2::new(0.5, 0.0), 1e-6).unwrap();
        assert_eq!(c.kind, CornerKind::EdgeCorner);
        let w = c.witness.unwrap();
        let (a, b) = (p.vertices()[w], p.vertices()[(w + 1) % 4]);
        assert!(a.y == 0.0 && b.y == 0.0);
        let c = classify_corner(&p, &Vector2::new(0.5, 0.5), 1e-6).unwrap();
        assert_eq!(c.kind, CornerKind::InteriorCorner);
        assert_relative_eq!(c.residual, 0.5);
        assert!(classify_corner(&p, &Vector2::new(1.1, 0.5), 1e-6).is_err());
    }

    #[test]
    fn classification_is_tolerance_monotone() {
        let p = square();
        let rank = |k: CornerKind| match k {
            CornerKind::InteriorCorner => 0,
            CornerKind::EdgeCorner => 1,
            CornerKind::VertexCorner => 2,
        };
        for pt in [Vector2::new(0.02, 0.03), Vector2::new(0.5, 0.01), Vector2::new(0.3, 0.4)] {
            let mut last = 0;
            for tol in [1e-4, 1e-2, 0.02, 0.035, 0.1, 0.5] {
                let r = rank(classify_corner(&p, &pt, tol).unwrap().kind);
                assert!(r >= last);
                last = r;
            }
        }
    }

    #[test]
    fn triangle_maair_is_case1() {
        let tri = Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let r = Rectangle2D::new([0.0, 0.0], [0.5, 0.0], [0.0, 0.5]).unwrap();
        let v = check_polygon_optimality(&tri, &r, 1e-6);
        assert_eq!(v.case, OptimalityCase::Case1NoInterior, "{v:?}");
    }

    #[test]
    fn adjacent_interior_corners_violate() {
        let r = Rectangle2D::new([0.0, 0.2], [0.5, 0.0], [0.0, 0.5]).unwrap();
        let v = check_polygon_optimality(&square(), &r, 1e-6);
        assert_eq!(v.case, OptimalityCase::Violation);
        assert!(v.notes.iter().any(|n| n.contains("interior neighbour")));
    }

    #[test]
    fn one_interior_corner_needs_adjacent_vertex() {
        let tri = Polygon2D::from_points(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]).unwrap();
        // corner (0.5, 0.5) interior; neighbours (0.5, 0) and (0, 0.5) are edge corners
        let r = Rectangle2D::new([0.0, 0.0], [0.5, 0.0], [0.0, 0.5]).unwrap();
        let v = check_polygon_optimality(&tri, &r, 1e-6);
        assert_eq!(v.case, OptimalityCase::Violation);
        // now one neighbour at a vertex
        let r = Rectangle2D::new([0.0, 0.0], [2.0, 0.0], [0.0, 0.5]).unwrap();
        let v = check_polygon_optimality(&tri, &r, 1e-6);
        assert_eq!(v.case, OptimalityCase::Violation, "two interior corners");
        let quad = Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.5, 1.5], [0.0, 1.0]]).unwrap();
        let r = Rectangle2D::new([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]).unwrap();
        let v = check_polygon_optimality(&quad, &r, 1e-6);
        assert_eq!(v.case, OptimalityCase::Case2OneInteriorAdjacentVertex, "{v:?}");
    }

    #[test]
    fn stretched_rhombus_square_is_case3() {
        let v = check_polygon_optimality(&rhombus(0.05), &rhombus_square(), 1e-3);
        assert_eq!(v.case, OptimalityCase::Case3TwoDiagonalInteriorSquare, "{v:?}");
        let long = Rectangle2D::new([0.0, -1.0], [1.0, 1.0], [-0.9, 0.9]).unwrap();
        let v = check_polygon_optimality(&rhombus(0.05), &long, 1e-3);
        assert_eq!(v.case, OptimalityCase::Violation);
    }

    #[test]
    fn central_symmetry() {
        let r = Rectangle2D::new([0.2, 0.2], [0.3, 0.0], [0.0, 0.3]).unwrap();
        assert!(!check_central_symmetry(&Vector2::zeros(), &r, 1e-4));
        assert_relative_eq!(central_offset(&Vector2::zeros(), &r), 0.35 * 2f64.sqrt(), epsilon = 1e-15);
        assert!(check_central_symmetry(&Vector2::zeros(), &r, 0.5));
    }

    #[test]
    fn rhombus_axis_conditions() {
        let set = ConvexSet::from_polygon(rhombus(0.05));
        let v = check_axial_symmetry(&Vector2::zeros(), &Vector2::new(1.0, 0.0), &set, &rhombus_square(), 1e-3)
            .unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|c| c.pass), "{v:?}");
        assert!(v[3].applicable);
    }

    #[test]
    fn rectangle_above_axis_fails_condition1() {
        let set = ConvexSet::from_polygon(square());
        let r = Rectangle2D::new([0.1, 0.6], [0.8, 0.0], [0.0, 0.3]).unwrap();
        let v = check_axial_symmetry(&Vector2::new(0.5, 0.5), &Vector2::new(1.0, 0.0), &set, &r, 1e-6).unwrap();
        assert!(!v[0].pass);
        assert_eq!(v[0].residual, 0.0);
    }

    #[test]
    fn thin_rectangle_on_axis_fails_condition4() {
        // diagonal on the axis, angle about 0.25 rad < pi/6
        let set = ConvexSet::from_polygon(rhombus(3.0));
        let a = 0.25f64;
        let (l, s) = (2.0 * a.cos(), 2.0 * a.sin());
        let u = [l * a.cos(), -l * a.sin()];
        let v = [s * a.sin(), s * a.cos()];
        let half = [(u[0] + v[0]) * 0.5, (u[1] + v[1]) * 0.5];
        let r = Rectangle2D::new([-half[0], -half[1]], u, v).unwrap();
        let out = check_axial_symmetry(&Vector2::zeros(), &Vector2::new(1.0, 0.0), &set, &r, 1e-6).unwrap();
        assert!(out[3].applicable);
        assert!(!out[3].pass, "{out:?}");
    }

    #[test]
    fn fixed_diagonal_area_peaks_at_square() {
        let l = 2.0;
        let area = |th: f64| (l * th.cos()) * (l * th.sin());
        let grid: Vec<f64> = (1..1000).map(|k| k as f64 * std::f64::consts::FRAC_PI_2 / 1000.0).collect();
        let best = grid.iter().copied().fold(0.0, |b: f64, th| if area(th) > area(b) { th } else { b });
        assert!((best - FRAC_PI_4).abs() < 2e-3);
        assert_relative_eq!(area(FRAC_PI_4), l * l / 2.0, epsilon = 1e-12);
    }
}
