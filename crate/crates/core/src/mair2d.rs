//! Maximum-area inscribed rectangles in planar convex sets.
//!
//! For a fixed direction `t = tan(theta)` the rectangle with anchor `x` and
//! edges `u = (u1, t*u1)`, `v = (-t*v2, v2)` has area `(1 + t^2) u1 v2`, so
//! maximizing `log u1 + log v2` with all four corners inside the set is a
//! convex problem in `(u1, v2, x1, x2)`. Each inequality of the set is
//! imposed at the four corners, giving `4n` barrier terms.
//!
//! Every rectangle direction has an equivalent in `theta in [-pi/4, pi/4]`,
//! so the sweep samples only that window, at the midpoints of `K` equal
//! pieces of width `alpha = eps / (2 * rho_bar)`, where `rho_bar` bounds the
//! aspect ratio of an optimal rectangle. Some sample is then within `alpha`
//! of the optimal direction, which guarantees area at least `(1 - eps)` of
//! the optimum.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::{
    self, AffineFn, BarrierProblem, LogSumFn, QuadraticFn, SmoothFunction, SolverConfig,
    SolverReport,
};
use crate::convexset::{ConvexSet, Inequality};
use crate::error::{Error, Result};
use crate::mvair;

/// Aspect-ratio bounds above this abort the sweep.
pub const MAX_RHO_BAR: f64 = 1e6;

/// Rectangle with corners `x`, `x+u`, `x+u+v`, `x+v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle2D {
    pub x: [f64; 2],
    pub u: [f64; 2],
    pub v: [f64; 2],
}

impl Rectangle2D {
    pub fn new(x: [f64; 2], u: [f64; 2], v: [f64; 2]) -> Result<Self> {
        let r = Self { x, u, v };
        let (un, vn) = (r.u_vec().norm(), r.v_vec().norm());
        if !(un > 0.0 && vn > 0.0) {
            return Err(Error::Validation("rectangle edges must be nonzero".into()));
        }
        if r.u_vec().dot(&r.v_vec()).abs() > 1e-9 * un * vn {
            return Err(Error::Validation("rectangle edges are not orthogonal".into()));
        }
        Ok(r)
    }

    pub fn x_vec(&self) -> Vector2<f64> {
        Vector2::new(self.x[0], self.x[1])
    }

    pub fn u_vec(&self) -> Vector2<f64> {
        Vector2::new(self.u[0], self.u[1])
    }

    pub fn v_vec(&self) -> Vector2<f64> {
        Vector2::new(self.v[0], self.v[1])
    }

    pub fn area(&self) -> f64 {
        self.u_vec().perp(&self.v_vec()).abs()
    }

    /// Corners in cyclic order `x, x+u, x+u+v, x+v`.
    pub fn corners(&self) -> [Vector2<f64>; 4] {
        let (x, u, v) = (self.x_vec(), self.u_vec(), self.v_vec());
        [x, x + u, x + u + v, x + v]
    }

    pub fn center(&self) -> Vector2<f64> {
        self.x_vec() + (self.u_vec() + self.v_vec()) * 0.5
    }

    /// Longer side over shorter side.
    pub fn aspect_ratio(&self) -> f64 {
        let (a, b) = (self.u_vec().norm(), self.v_vec().norm());
        a.max(b) / a.min(b)
    }

    /// Angle of `u` with the x-axis.
    pub fn angle(&self) -> f64 {
        self.u[1].atan2(self.u[0])
    }

    /// Largest constraint residual over the four corners.
    pub fn max_residual_in(&self, set: &ConvexSet) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for c in self.corners() {
            worst = worst.max(set.max_residual(&DVector::from_vec(vec![c.x, c.y]))?);
        }
        Ok(worst)
    }
}

/// Solved fixed-direction rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSample {
    pub t: f64,
    pub theta: f64,
    /// `f(t)`, the area of `rect`.
    pub area: f64,
    pub rect: Rectangle2D,
    pub report: SolverReport,
}

/// Linear map from `w = (u1, v2, x1, x2)` to a corner, in the order
/// `x, x+u, x+v, x+u+v`.
fn corner_maps(t: f64) -> [nalgebra::Matrix2x4<f64>; 4] {
    use nalgebra::Matrix2x4;
    [
        Matrix2x4::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
        Matrix2x4::new(1.0, 0.0, 1.0, 0.0, t, 0.0, 0.0, 1.0),
        Matrix2x4::new(0.0, -t, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0),
        Matrix2x4::new(1.0, -t, 1.0, 0.0, t, 1.0, 0.0, 1.0),
    ]
}

fn check_direction(set: &ConvexSet, t: f64) -> Result<()> {
    if set.dim() != 2 {
        return Err(Error::Input(format!("rectangle solver needs a planar set, got dimension {}", set.dim())));
    }
    if !(t.abs() <= 1.0) {
        return Err(Error::Input(format!("direction t = {t} outside [-1, 1]")));
    }
    Ok(())
}

/// Fixed-direction model over `(u1, v2, x1, x2)` with `4n` corner constraints.
pub fn build_qt(set: &ConvexSet, t: f64) -> Result<BarrierProblem> {
    check_direction(set, t)?;
    let maps = corner_maps(t);
    let mut constraints: Vec<Box<dyn SmoothFunction>> = Vec::with_capacity(4 * set.n());
    for q in set.ineqs() {
        for m in &maps {
            let m = DMatrix::from_iterator(2, 4, m.iter().copied());
            match q {
                Inequality::Linear(l) => {
                    constraints.push(Box::new(AffineFn::new(m.transpose() * l.p(), -l.b())));
                }
                Inequality::Quadratic(qq) => {
                    let qm = m.transpose() * qq.a() * &m;
                    let r = m.transpose() * qq.b() * 2.0;
                    constraints.push(Box::new(QuadraticFn::new(qm, r, qq.c())));
                }
            }
        }
    }
    let e = |i: usize| DVector::from_fn(4, |j, _| if i == j { 1.0 } else { 0.0 });
    let objective = LogSumFn::new(4, vec![AffineFn::new(e(0), 0.0), AffineFn::new(e(1), 0.0)]);
    BarrierProblem::new(4, Box::new(objective), constraints)
}

fn rect_from_vars(w: &[f64], t: f64) -> Rectangle2D {
    Rectangle2D { x: [w[2], w[3]], u: [w[0], t * w[0]], v: [-t * w[1], w[1]] }
}

/// How the fixed-direction solve is started.
#[derive(Debug, Clone)]
pub enum DirectionStart {
    /// Box start of the set seen in the frame rotated by `-theta`, shrunk by
    /// half about its center and rotated back.
    RotatedFrame,
    /// A square of half-diagonal `radius` about `center`, valid in every
    /// direction when the disk of that radius is strictly inside the set.
    InscribedDisk { center: [f64; 2], radius: f64 },
}

impl DirectionStart {
    /// Direction-independent start from the set's axis-aligned box start:
    /// the disk inscribed in half of that box.
    pub fn shared(set: &ConvexSet) -> Result<Self> {
        let model = mvair::build_mvair(set)?;
        let (z, _) = mvair::initial_feasible_for(set, &model)?;
        let b = model.unpack(z.as_slice());
        let half = b.extents().into_iter().fold(f64::INFINITY, f64::min) * 0.5;
        let c = b.center();
        Ok(Self::InscribedDisk { center: [c[0], c[1]], radius: 0.5 * half })
    }
}

fn vars_from_rect(r: &Rectangle2D) -> DVector<f64> {
    DVector::from_vec(vec![r.u[0], r.v[1], r.x[0], r.x[1]])
}

fn rotation(theta: f64) -> Matrix2<f64> {
    nalgebra::Rotation2::new(theta).into_inner()
}

fn start_rectangle(set: &ConvexSet, t: f64, start: &DirectionStart) -> Result<Rectangle2D> {
    let theta = t.atan();
    let rot = rotation(theta);
    let (c, hu, hv) = match start {
        DirectionStart::RotatedFrame => {
            let frame = set.rotated(-theta)?;
            let model = mvair::build_mvair(&frame)?;
            let (z, _) = mvair::initial_feasible_for(&frame, &model)?;
            let b = model.unpack(z.as_slice());
            let ext = b.extents();
            let c = rot * Vector2::new(b.center()[0], b.center()[1]);
            (c, 0.25 * ext[0], 0.25 * ext[1])
        }
        DirectionStart::InscribedDisk { center, radius } => {
            let h = radius / std::f64::consts::SQRT_2;
            (Vector2::new(center[0], center[1]), h, h)
        }
    };
    let ue = rot * Vector2::new(1.0, 0.0);
    let ve = rot * Vector2::new(0.0, 1.0);
    let x = c - ue * hu - ve * hv;
    let (u, v) = (ue * (2.0 * hu), ve * (2.0 * hv));
    Ok(Rectangle2D { x: [x.x, x.y], u: [u.x, u.y], v: [v.x, v.y] })
}

/// Strictly feasible variables for [`build_qt`], shrinking toward an
/// interior point if the preferred start is not.
fn direction_start_vars(
    set: &ConvexSet,
    problem: &BarrierProblem,
    t: f64,
    start: &DirectionStart,
) -> Result<DVector<f64>> {
    if let Ok(r) = start_rectangle(set, t, start) {
        let w = vars_from_rect(&r);
        if problem.is_strictly_feasible(&w) {
            return Ok(w);
        }
    }
    let c = set.interior_point()?;
    let bb = set.bounding_box()?;
    let mut h = 0.25 * bb.extents().into_iter().fold(f64::INFINITY, f64::min);
    let theta = t.atan();
    for _ in 0..60 {
        let r = start_rectangle(
            set,
            t,
            &DirectionStart::InscribedDisk { center: [c[0], c[1]], radius: h * std::f64::consts::SQRT_2 },
        )?;
        let w = vars_from_rect(&r);
        if problem.is_strictly_feasible(&w) {
            return Ok(w);
        }
        h *= 0.5;
    }
    Err(Error::EmptyInterior(format!("no strictly feasible rectangle at theta = {theta}")))
}

/// Maximum-area rectangle with `u` at angle `atan(t)`.
pub fn maair_direction(set: &ConvexSet, t: f64, cfg: &SolverConfig) -> Result<DirectionSample> {
    maair_direction_from(set, t, cfg, &DirectionStart::RotatedFrame)
}

pub fn maair_direction_from(
    set: &ConvexSet,
    t: f64,
    cfg: &SolverConfig,
    start: &DirectionStart,
) -> Result<DirectionSample> {
    let problem = build_qt(set, t)?;
    let w0 = direction_start_vars(set, &problem, t, start)?;
    let report = barrier::path_follow(&problem, &w0, cfg)?;
    let rect = rect_from_vars(&report.x_star, t);
    let area = rect.area();
    debug_assert!(
        {
            let psi = report.f0_star;
            let factored = (1.0 + t * t) * psi.exp();
            (factored - area).abs() <= 1e-9 * area
        },
        "area disagrees with (1+t^2) exp(psi)"
    );
    Ok(DirectionSample { t, theta: t.atan(), area, rect, report })
}

/// Upper bound on the aspect ratio of a maximum-area inscribed rectangle.
///
/// Polygon-backed sets use `4 diam^2 / area`. Other sets use
/// `16 sqrt(2) AR(R')`, where `R'` is the smallest enclosing rectangle with a
/// side parallel to the segment joining the touching points of the shorter
/// sides of the bounding box.
pub fn aspect_ratio_bound(set: &ConvexSet) -> Result<f64> {
    if set.dim() != 2 {
        return Err(Error::Input("aspect-ratio bound needs a planar set".into()));
    }
    let raw = match set.polygon() {
        Some(poly) => {
            let (diam, _) = poly.diameter();
            4.0 * diam * diam / poly.area()
        }
        None => {
            let bb = set.bounding_box()?;
            let ext = bb.extents();
            let axis = if ext[0] >= ext[1] { 0 } else { 1 };
            let e = DVector::from_fn(2, |i, _| if i == axis { 1.0 } else { 0.0 });
            let p = set.support_point(&-&e)?;
            let q = set.support_point(&e)?;
            let along = (&q - &p).normalize();
            let across = DVector::from_vec(vec![-along[1], along[0]]);
            let width = |dir: &DVector<f64>| -> Result<f64> {
                Ok(dir.dot(&set.support_point(dir)?) - dir.dot(&set.support_point(&-dir)?))
            };
            let (w, h) = (width(&along)?, width(&across)?);
            16.0 * std::f64::consts::SQRT_2 * w.max(h) / w.min(h)
        }
    };
    if !(raw <= MAX_RHO_BAR) {
        return Err(Error::Capability(format!(
            "aspect-ratio bound {raw:e} exceeds {MAX_RHO_BAR:e}; the set is too thin to sweep"
        )));
    }
    Ok(raw.max(1.0))
}

/// Number of directions `ceil((pi/2) / alpha)` with `alpha = eps / (2 rho_bar)`.
pub fn sweep_count(rho_bar: f64, eps: f64) -> usize {
    let alpha = eps / (2.0 * rho_bar);
    (FRAC_PI_2 / alpha).ceil() as usize
}

/// Midpoints of `k` equal pieces of `[-pi/4, pi/4]`.
pub fn sweep_angles(k: usize) -> Vec<f64> {
    let width = FRAC_PI_2 / k as f64;
    (0..k).map(|i| -FRAC_PI_4 + (i as f64 + 0.5) * width).collect()
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub best: Rectangle2D,
    pub best_index: usize,
    pub rho_bar: f64,
    pub samples: Vec<DirectionSample>,
}

impl SweepResult {
    pub fn best_sample(&self) -> &DirectionSample {
        &self.samples[self.best_index]
    }
}

/// Best sample; area ties within `1e-12` go to the smaller angle, then the
/// smaller index.
fn select_best(samples: &[DirectionSample]) -> usize {
    let mut best = 0;
    for (i, s) in samples.iter().enumerate().skip(1) {
        let b = &samples[best];
        let tie = (s.area - b.area).abs() <= 1e-12 * b.area.abs().max(1.0);
        if (!tie && s.area > b.area) || (tie && s.theta < b.theta) {
            best = i;
        }
    }
    best
}

/// Evaluates fixed-direction solves at each `t`, on `threads` workers.
/// Results come back in input order regardless of thread count.
pub fn solve_directions(
    set: &ConvexSet,
    ts: &[f64],
    cfg: &SolverConfig,
    start: &DirectionStart,
    threads: usize,
) -> Result<Vec<DirectionSample>> {
    if threads <= 1 {
        return ts.iter().map(|&t| maair_direction_from(set, t, cfg, start)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Input(format!("cannot build thread pool: {e}")))?;
    pool.install(|| ts.par_iter().map(|&t| maair_direction_from(set, t, cfg, start)).collect())
}

/// `(1 - eps)`-approximate maximum-area inscribed rectangle.
pub fn mair_sweep(set: &ConvexSet, eps: f64, cfg: &SolverConfig) -> Result<(Rectangle2D, Vec<DirectionSample>)> {
    let r = mair_sweep_with(set, eps, cfg, 1)?;
    Ok((r.best, r.samples))
}

pub fn mair_sweep_with(set: &ConvexSet, eps: f64, cfg: &SolverConfig, threads: usize) -> Result<SweepResult> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Input(format!("eps = {eps} outside (0, 1)")));
    }
    check_direction(set, 0.0)?;
    let rho_bar = aspect_ratio_bound(set)?;
    let k = sweep_count(rho_bar, eps);
    log::debug!("sweep: rho_bar = {rho_bar:.6}, {k} directions");
    let ts: Vec<f64> = sweep_angles(k).into_iter().map(f64::tan).collect();
    let start = sweep_start(set)?;
    let samples = solve_directions(set, &ts, cfg, &start, threads)?;
    let best_index = select_best(&samples);
    Ok(SweepResult { best: samples[best_index].rect, best_index, rho_bar, samples })
}

/// Polygon-backed sets get an exact rotated-frame start per direction; for
/// other sets one shared start avoids a support solve per direction.
fn sweep_start(set: &ConvexSet) -> Result<DirectionStart> {
    if set.polygon().is_some() {
        Ok(DirectionStart::RotatedFrame)
    } else {
        DirectionStart::shared(set)
    }
}

/// `f(t)` at `samples` evenly spaced `t` in `[-1, 1]`, endpoints included.
pub fn f_profile(set: &ConvexSet, samples: usize, cfg: &SolverConfig) -> Result<Vec<(f64, f64)>> {
    Ok(f_profile_samples(set, samples, cfg, 1)?.into_iter().map(|s| (s.t, s.area)).collect())
}

pub fn f_profile_samples(
    set: &ConvexSet,
    samples: usize,
    cfg: &SolverConfig,
    threads: usize,
) -> Result<Vec<DirectionSample>> {
    if samples < 2 {
        return Err(Error::Input("profile needs at least 2 samples".into()));
    }
    check_direction(set, 0.0)?;
    let ts: Vec<f64> = (0..samples)
        .map(|i| {
            if i + 1 == samples {
                1.0
            } else {
                -1.0 + 2.0 * i as f64 / (samples - 1) as f64
            }
        })
        .collect();
    let start = sweep_start(set)?;
    solve_directions(set, &ts, cfg, &start, threads)
}

/// Angle wrapped into `(-pi/2, pi/2]` modulo the quarter-turn symmetry of
/// rectangles, i.e. into `[-pi/4, pi/4)`.
pub fn canonical_angle(theta: f64) -> f64 {
    (theta + FRAC_PI_4).rem_euclid(FRAC_PI_2) - FRAC_PI_4
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexset::Polygon2D;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_square() -> ConvexSet {
        ConvexSet::from_polygon(
            Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap(),
        )
    }

    fn unit_disk() -> ConvexSet {
        ConvexSet::ellipsoid(&[0.0, 0.0], DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn qt_counts() {
        let p = build_qt(&unit_square(), 0.3).unwrap();
        assert_eq!(p.dim(), 4);
        assert_eq!(p.n_barrier(), 16);
        assert_eq!(build_qt(&unit_disk(), -1.0).unwrap().n_barrier(), 4);
        assert!(matches!(build_qt(&unit_disk(), 1.5), Err(Error::Input(_))));
    }

    #[test]
    fn qt_corner_constraints_match_rectangle_corners() {
        let set = unit_disk();
        let t = 0.4;
        let p = build_qt(&set, t).unwrap();
        let w = [0.3, 0.5, -0.2, -0.1];
        let r = rect_from_vars(&w, t);
        let g = p.constraint_values(&DVector::from_column_slice(&w));
        // corner order x, x+u, x+v, x+u+v
        let cs = r.corners();
        for (gi, c) in g.iter().zip([cs[0], cs[1], cs[3], cs[2]]) {
            assert_relative_eq!(*gi, c.norm_squared() - 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn square_directions() {
        let cfg = SolverConfig::default();
        let s = maair_direction(&unit_square(), 0.0, &cfg).unwrap();
        assert_relative_eq!(s.area, 1.0, epsilon = 1e-6);
        let s = maair_direction(&unit_square(), 1.0, &cfg).unwrap();
        assert_relative_eq!(s.area, 0.5, epsilon = 1e-3);
        assert_relative_eq!(s.rect.angle(), FRAC_PI_4, epsilon = 1e-9);
    }

    #[test]
    fn disk_is_rotation_invariant() {
        let cfg = SolverConfig::default();
        for t in [-1.0, -0.3, 0.0, 0.7] {
            let s = maair_direction(&unit_disk(), t, &cfg).unwrap();
            assert_relative_eq!(s.area, 2.0, epsilon = 1e-4);
            let r = &s.rect;
            assert!(r.u_vec().dot(&r.v_vec()).abs() <= 1e-9 * r.u_vec().norm() * r.v_vec().norm());
        }
    }

    #[test]
    fn aspect_bounds() {
        assert_relative_eq!(aspect_ratio_bound(&unit_square()).unwrap(), 8.0, epsilon = 1e-12);
        let ngon: Vec<[f64; 2]> = (0..512)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 512.0;
                [a.cos(), a.sin()]
            })
            .collect();
        let disk_poly = ConvexSet::from_polygon(Polygon2D::from_points(&ngon).unwrap());
        assert!((aspect_ratio_bound(&disk_poly).unwrap() - 16.0 / PI).abs() < 1e-3);
        let general = aspect_ratio_bound(&unit_disk()).unwrap();
        assert!((general - 16.0 * std::f64::consts::SQRT_2).abs() < 1e-4, "{general}");
    }

    #[test]
    fn sweep_counts() {
        assert_eq!(sweep_count(5.1, 0.1), 161);
        let a = sweep_angles(4);
        assert_relative_eq!(a[0], -FRAC_PI_4 + PI / 16.0, epsilon = 1e-15);
        assert_relative_eq!(a[3], FRAC_PI_4 - PI / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn selection_tie_breaks_toward_smaller_angle() {
        let s = maair_direction(&unit_square(), 0.0, &SolverConfig::default()).unwrap();
        let mut a = s.clone();
        let mut b = s.clone();
        a.theta = 0.2;
        b.theta = -0.1;
        b.area = a.area * (1.0 + 1e-14);
        assert_eq!(select_best(&[a.clone(), b.clone()]), 1);
        b.theta = 0.3;
        assert_eq!(select_best(&[a, b]), 0);
    }

    #[test]
    fn canonical_angles() {
        assert_relative_eq!(canonical_angle(FRAC_PI_2 + 0.1), 0.1, epsilon = 1e-15);
        assert_relative_eq!(canonical_angle(-0.2), -0.2, epsilon = 1e-15);
    }
}
