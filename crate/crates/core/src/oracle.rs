//! Brute-force baselines: grid search for inscribed rectangles, Monte-Carlo
//! area, and seeded random polygons for tests.
//!
//! Grid searches return lower bounds. Grids are nested: node `i` of a grid
//! with `k` steps sits at `lo + i * extent / k`, so doubling every step
//! count only adds candidates.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convexset::{ConvexSet, Inequality, Polygon2D};
use crate::error::{Error, Result};
use crate::mair2d::Rectangle2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub anchor_steps: usize,
    pub size_steps: usize,
    pub angle_steps: usize,
}

impl GridSpec {
    pub fn uniform(steps: usize) -> Self {
        Self { anchor_steps: steps, size_steps: steps, angle_steps: steps }
    }

    fn validate(&self) -> Result<()> {
        if self.anchor_steps < 2 || self.size_steps < 2 || self.angle_steps < 2 {
            return Err(Error::Input(format!("grid steps must all be at least 2, got {self:?}")));
        }
        Ok(())
    }
}

/// Planar constraints flattened for fast exact membership tests.
struct Membership {
    /// `p . x <= b`
    linear: Vec<([f64; 2], f64)>,
    /// `x' A x + 2 b . x + c <= 0`
    quadratic: Vec<([f64; 3], [f64; 2], f64)>,
}

impl Membership {
    fn new(set: &ConvexSet) -> Self {
        let mut linear = Vec::new();
        let mut quadratic = Vec::new();
        for q in set.ineqs() {
            match q {
                Inequality::Linear(l) => linear.push(([l.p()[0], l.p()[1]], l.b())),
                Inequality::Quadratic(q) => {
                    let a = q.a();
                    quadratic.push(([a[(0, 0)], a[(0, 1)], a[(1, 1)]], [q.b()[0], q.b()[1]], q.c()))
                }
            }
        }
        Self { linear, quadratic }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.linear.iter().all(|(p, b)| p[0] * x + p[1] * y <= *b)
            && self.quadratic.iter().all(|(a, b, c)| {
                a[0] * x * x + 2.0 * a[1] * x * y + a[2] * y * y + 2.0 * (b[0] * x + b[1] * y) + c <= 0.0
            })
    }

    fn contains_box(&self, x: f64, y: f64, w: f64, h: f64) -> bool {
        self.contains(x, y) && self.contains(x + w, y) && self.contains(x, y + h) && self.contains(x + w, y + h)
    }
}

/// Best axis-aligned grid rectangle in `set` (already in the search frame),
/// as `(area, x, y, w, h)`.
fn grid_search(set: &ConvexSet, grid: &GridSpec) -> Result<(f64, [f64; 4])> {
    let bb = set.bounding_box()?;
    let m = Membership::new(set);
    let (na, ns) = (grid.anchor_steps, grid.size_steps);
    let (ex, ey) = (bb.xu[0] - bb.xl[0], bb.xu[1] - bb.xl[1]);
    let node = |lo: f64, ext: f64, i: usize, k: usize| lo + ext * i as f64 / k as f64;
    let size = |ext: f64, j: usize| ext * j as f64 / ns as f64;
    let mut best = (0.0, [bb.xl[0], bb.xl[1], 0.0, 0.0]);
    for i in 0..=na {
        let x = node(bb.xl[0], ex, i, na);
        for j in 0..=na {
            let y = node(bb.xl[1], ey, j, na);
            if !m.contains(x, y) {
                continue;
            }
            for a in 1..=ns {
                let w = size(ex, a);
                if w * ey <= best.0 {
                    continue;
                }
                if !m.contains(x + w, y) {
                    break;
                }
                // Feasible heights form a prefix of the size grid.
                let (mut lo, mut hi) = (0usize, ns);
                while lo < hi {
                    let mid = (lo + hi).div_ceil(2);
                    if m.contains_box(x, y, w, size(ey, mid)) {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                let h = size(ey, lo);
                if lo > 0 && w * h > best.0 {
                    best = (w * h, [x, y, w, h]);
                }
            }
        }
    }
    Ok(best)
}

/// Grid-search rectangle with edges along `(1, t)` and `(-t, 1)`.
pub fn brute_maair(set: &ConvexSet, t: f64, grid: &GridSpec) -> Result<(f64, Rectangle2D)> {
    grid.validate()?;
    if !(t.abs() <= 1.0) {
        return Err(Error::Input(format!("direction t = {t} outside [-1, 1]")));
    }
    brute_at_angle(set, t.atan(), grid)
}

fn brute_at_angle(set: &ConvexSet, theta: f64, grid: &GridSpec) -> Result<(f64, Rectangle2D)> {
    if set.dim() != 2 {
        return Err(Error::Input("grid oracle needs a planar set".into()));
    }
    let frame = set.rotated(-theta)?;
    let (area, [x, y, w, h]) = grid_search(&frame, grid)?;
    let (c, s) = (theta.cos(), theta.sin());
    let rot = |v: Vector2<f64>| [c * v.x - s * v.y, s * v.x + c * v.y];
    let rect = Rectangle2D {
        x: rot(Vector2::new(x, y)),
        u: rot(Vector2::new(w, 0.0)),
        v: rot(Vector2::new(0.0, h)),
    };
    Ok((area, rect))
}

/// Grid-search rectangle over `angle_steps` angles spanning `[-pi/4, pi/4]`,
/// both ends included. Ties go to the smaller angle.
pub fn brute_mair(set: &ConvexSet, grid: &GridSpec) -> Result<(f64, Rectangle2D)> {
    grid.validate()?;
    let k = grid.angle_steps;
    let results: Vec<(f64, Rectangle2D)> = (0..k)
        .into_par_iter()
        .map(|i| brute_at_angle(set, -FRAC_PI_4 + FRAC_PI_2 * i as f64 / (k - 1) as f64, grid))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.0 > results[best].0 {
            best = i;
        }
    }
    Ok(results[best])
}

/// Rejection-sampling area estimate and its binomial standard error.
pub fn monte_carlo_area(set: &ConvexSet, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 100 {
        return Err(Error::Input(format!("need at least 100 samples, got {samples}")));
    }
    if set.dim() != 2 {
        return Err(Error::Input("Monte-Carlo area needs a planar set".into()));
    }
    let bb = set.bounding_box()?;
    let m = Membership::new(set);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = bb.xl[0] + (bb.xu[0] - bb.xl[0]) * rng.random::<f64>();
        let y = bb.xl[1] + (bb.xu[1] - bb.xl[1]) * rng.random::<f64>();
        if m.contains(x, y) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let box_area = bb.volume();
    Ok((p * box_area, box_area * (p * (1.0 - p) / samples as f64).sqrt()))
}

/// Convex polygon with `n` vertices on a randomly shaped, rotated and placed
/// ellipse. Deterministic in `seed`.
pub fn random_convex_polygon(seed: u64, n: usize) -> Result<Polygon2D> {
    if n < 3 {
        return Err(Error::Input(format!("a polygon needs at least 3 vertices, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a = rng.random_range(0.5..2.0);
        let b = rng.random_range(0.3..1.0) * a;
        let rot = rng.random_range(0.0..TAU);
        let (cx, cy) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let pts: Vec<[f64; 2]> = angles
            .iter()
            .map(|&s| {
                let (x, y) = (a * s.cos(), b * s.sin());
                [cx + rot.cos() * x - rot.sin() * y, cy + rot.sin() * x + rot.cos() * y]
            })
            .collect();
        if let Ok(p) = Polygon2D::from_points(&pts) {
            if p.len() == n && p.area() > 0.05 * a * b {
                return Ok(p);
            }
        }
    }
}
