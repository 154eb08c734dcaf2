//! Convex sets as finite inequality systems, convex polygons, and the
//! geometric primitives the solvers rely on.
//!
//! A [`ConvexSet`] is a list of linear inequalities `p.x <= b` and convex
//! quadratic inequalities `x'Ax + 2b.x + c <= 0`. A planar set may also carry
//! the [`Polygon2D`] it was built from, which makes support queries, bounding
//! boxes, diameter and area exact.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::barrier::{self, AffineFn, BarrierProblem, QuadraticFn, SmoothFunction, SolverConfig};
use crate::error::{Error, Result};

/// `p.x <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearIneq {
    p: DVector<f64>,
    b: f64,
}

impl LinearIneq {
    pub fn new(p: DVector<f64>, b: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Validation("linear inequality has empty normal".into()));
        }
        if p.iter().chain(std::iter::once(&b)).any(|v| !v.is_finite()) {
            return Err(Error::Validation("linear inequality has non-finite entries".into()));
        }
        if p.iter().all(|&v| v == 0.0) {
            return Err(Error::Validation("linear inequality has zero normal".into()));
        }
        Ok(Self { p, b })
    }

    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        self.p.dot(x) - self.b
    }
}

/// `x'Ax + 2b.x + c <= 0` with `A` symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticIneq {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl QuadraticIneq {
    /// Symmetrizes `A` as `(A + A')/2` and rejects it if it has an
    /// eigenvalue below `-1e-10 * |A|`.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        let d = b.len();
        if d == 0 || a.nrows() != d || a.ncols() != d {
            return Err(Error::Validation(format!(
                "quadratic inequality: A is {}x{} but b has length {d}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().chain(b.iter()).chain(std::iter::once(&c)).any(|v| !v.is_finite()) {
            return Err(Error::Validation("quadratic inequality has non-finite entries".into()));
        }
        let a = (&a + a.transpose()) * 0.5;
        let norm = a.norm();
        let min_eig = a.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < -1e-10 * norm {
            return Err(Error::Validation(format!(
                "quadratic inequality is not convex: A has eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x).dot(x) + 2.0 * self.b.dot(x) + self.c
    }

    /// Off-diagonal entries all within `tol` relative to the largest entry.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let scale = self.a.amax().max(f64::MIN_POSITIVE);
        let d = self.a.nrows();
        (0..d).all(|i| (0..d).all(|j| i == j || self.a[(i, j)].abs() <= tol * scale))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inequality {
    Linear(LinearIneq),
    Quadratic(QuadraticIneq),
}

impl Inequality {
    pub fn dim(&self) -> usize {
        match self {
            Inequality::Linear(l) => l.p.len(),
            Inequality::Quadratic(q) => q.b.len(),
        }
    }

    /// `p.x - b` or `x'Ax + 2b.x + c`; non-positive inside.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        match self {
            Inequality::Linear(l) => l.residual(x),
            Inequality::Quadratic(q) => q.residual(x),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Inequality::Linear(_))
    }

    /// The inequality as a barrier constraint `g(x) < 0` in the same variables.
    pub fn to_oracle(&self) -> Box<dyn SmoothFunction> {
        match self {
            Inequality::Linear(l) => Box::new(AffineFn::new(l.p.clone(), -l.b)),
            Inequality::Quadratic(q) => {
                Box::new(QuadraticFn::new(q.a.clone(), &q.b * 2.0, q.c))
            }
        }
    }

    /// Largest `r >= 0` with `origin + r*dir` satisfying this inequality, or
    /// `None` if the whole ray does. `origin` must satisfy it.
    pub fn ray_exit(&self, origin: &DVector<f64>, dir: &DVector<f64>) -> Option<f64> {
        match self {
            Inequality::Linear(l) => {
                let rate = l.p.dot(dir);
                (rate > 0.0).then(|| (-l.residual(origin) / rate).max(0.0))
            }
            Inequality::Quadratic(q) => {
                // residual(origin + r dir) = qa r^2 + qb r + qc
                let qa = (&q.a * dir).dot(dir);
                let qb = 2.0 * ((&q.a * origin).dot(dir) + q.b.dot(dir));
                let qc = q.residual(origin).min(0.0);
                if qa <= 0.0 {
                    return (qb > 0.0).then(|| -qc / qb);
                }
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
                // larger root, written to avoid cancellation
                let root = if qb >= 0.0 {
                    -2.0 * qc / (qb + disc.sqrt())
                } else {
                    (-qb + disc.sqrt()) / (2.0 * qa)
                };
                Some(root.max(0.0))
            }
        }
    }
}

/// An axis-aligned box `{x : xl <= x <= xu}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub xl: Vec<f64>,
    pub xu: Vec<f64>,
}

impl BoxRegion {
    pub fn new(xl: Vec<f64>, xu: Vec<f64>) -> Result<Self> {
        if xl.len() != xu.len() || xl.is_empty() {
            return Err(Error::Input("box bounds must be non-empty and of equal length".into()));
        }
        Ok(Self { xl, xu })
    }

    pub fn dim(&self) -> usize {
        self.xl.len()
    }

    pub fn extents(&self) -> Vec<f64> {
        self.xl.iter().zip(&self.xu).map(|(l, u)| u - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.extents().iter().product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.xl.iter().zip(&self.xu).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// All `2^d` corners; bit `i` of the index selects `xu[i]`.
    pub fn corners(&self) -> Vec<DVector<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                DVector::from_fn(d, |i, _| if mask >> i & 1 == 1 { self.xu[i] } else { self.xl[i] })
            })
            .collect()
    }

    /// `max(1, largest extent)`, the length scale used for tolerances.
    pub fn scale(&self) -> f64 {
        self.extents().into_iter().fold(1.0, f64::max)
    }
}

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    vertices: Vec<Vector2<f64>>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<Vector2<f64>>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::Validation(format!("polygon needs at least 3 vertices, got {n}")));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::Validation("polygon has non-finite coordinates".into()));
        }
        let scale = extent_of(&vertices).max(f64::MIN_POSITIVE);
        let mut winding = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let e1 = b - a;
            let e2 = c - b;
            let turn = e1.perp(&e2);
            if turn <= 1e-12 * scale * scale {
                return Err(Error::Validation(format!(
                    "polygon is not strictly convex and counter-clockwise at vertex {}",
                    (i + 1) % n
                )));
            }
            winding += turn.atan2(e1.dot(&e2));
        }
        if (winding - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::Validation("polygon boundary winds more than once".into()));
        }
        Ok(Self { vertices })
    }

    pub fn from_points(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vector2::new(p[0], p[1])).collect())
    }

    /// Convex hull of a point cloud (monotone chain; collinear points dropped).
    pub fn convex_hull(points: &[Vector2<f64>]) -> Result<Self> {
        let mut pts: Vec<Vector2<f64>> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Err(Error::Validation("convex hull needs 3 distinct points".into()));
        }
        let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| (a - o).perp(&(b - o));
        let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * pts.len());
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &Vector2<f64>>> =
                if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
            for p in iter {
                while hull.len() >= start + 2
                    && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
                {
                    hull.pop();
                }
                hull.push(*p);
            }
            hull.pop();
        }
        Self::new(hull)
    }

    pub fn vertices(&self) -> &[Vector2<f64>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n).map(|i| self.vertices[i].perp(&self.vertices[(i + 1) % n])).sum::<f64>()
    }

    pub fn centroid_of_vertices(&self) -> Vector2<f64> {
        self.vertices.iter().sum::<Vector2<f64>>() / self.vertices.len() as f64
    }

    /// Largest vertex distance and an attaining pair of vertex indices, by
    /// rotating calipers over antipodal pairs.
    pub fn diameter(&self) -> (f64, (usize, usize)) {
        let v = &self.vertices;
        let n = v.len();
        let twice_area = |i: usize, j: usize, k: usize| (v[j] - v[i]).perp(&(v[k] - v[i]));
        let mut best = (0.0, (0, 1));
        let consider = |i: usize, j: usize, best: &mut (f64, (usize, usize))| {
            let d = (v[i] - v[j]).norm_squared();
            if d > best.0 {
                *best = (d, (i.min(j), i.max(j)));
            }
        };
        let mut j = 1;
        for i in 0..n {
            let ni = (i + 1) % n;
            while twice_area(i, ni, (j + 1) % n) > twice_area(i, ni, j) {
                j = (j + 1) % n;
            }
            consider(i, j, &mut best);
            consider(ni, j, &mut best);
        }
        (best.0.sqrt(), best.1)
    }

    /// Maximizer of `dir.v` over the vertices; ties (within `1e-12` relative)
    /// go to the lexicographically largest vertex.
    pub fn support_point(&self, dir: &Vector2<f64>) -> Result<Vector2<f64>> {
        if dir.x == 0.0 && dir.y == 0.0 {
            return Err(Error::Input("support direction must be nonzero".into()));
        }
        let best = self.vertices.iter().map(|v| dir.dot(v)).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * best.abs().max(dir.norm() * extent_of(&self.vertices)).max(1e-300);
        Ok(*self
            .vertices
            .iter()
            .filter(|v| dir.dot(v) >= best - tol)
            .max_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)))
            .expect("polygon has vertices"))
    }

    /// One inward halfspace per edge with unit normals, in edge order.
    pub fn halfspaces(&self) -> Vec<LinearIneq> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let e = self.vertices[(i + 1) % n] - a;
                let normal = Vector2::new(e.y, -e.x).normalize();
                LinearIneq {
                    p: DVector::from_vec(vec![normal.x, normal.y]),
                    b: normal.dot(&a),
                }
            })
            .collect()
    }

    /// `max(1, largest bounding-box extent)`.
    pub fn scale(&self) -> f64 {
        extent_of(&self.vertices).max(1.0)
    }

    /// Applies `v -> m v + shift`; orientation-reversing maps reverse the
    /// vertex order to stay counter-clockwise.
    pub fn transformed(&self, m: &nalgebra::Matrix2<f64>, shift: &Vector2<f64>) -> Result<Self> {
        let mut vs: Vec<Vector2<f64>> = self.vertices.iter().map(|v| m * v + shift).collect();
        if m.determinant() < 0.0 {
            vs.reverse();
        }
        Self::new(vs)
    }
}

fn extent_of(vs: &[Vector2<f64>]) -> f64 {
    let (mut lo, mut hi) = (vs[0], vs[0]);
    for v in vs {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (hi - lo).amax()
}

/// Vertex list of a bounded planar set cut out by linear inequalities only,
/// found by intersecting every pair of boundary lines. `None` when a
/// constraint is not linear, the set is unbounded or degenerate, or there are
/// too many constraints for the pairwise search.
fn polygon_from_halfspaces(ineqs: &[Inequality]) -> Option<Polygon2D> {
    let lines: Vec<(Vector2<f64>, f64)> = ineqs
        .iter()
        .map(|q| match q {
            Inequality::Linear(l) => {
                let n = l.p().norm();
                Some((Vector2::new(l.p()[0], l.p()[1]) / n, l.b() / n))
            }
            Inequality::Quadratic(_) => None,
        })
        .collect::<Option<_>>()?;
    if lines.len() < 3 || lines.len() > 256 {
        return None;
    }
    let scale = lines.iter().map(|(_, b)| b.abs()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut pts: Vec<Vector2<f64>> = Vec::new();
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (pi, bi) = lines[i];
            let (pj, bj) = lines[j];
            let det = pi.perp(&pj);
            if det.abs() < 1e-12 {
                continue;
            }
            let x = Vector2::new(bi * pj.y - bj * pi.y, pi.x * bj - pj.x * bi) / det;
            if lines.iter().all(|(p, b)| p.dot(&x) - b <= tol)
                && pts.iter().all(|q| (q - x).norm() > tol)
            {
                pts.push(x);
            }
        }
    }
    let poly = Polygon2D::convex_hull(&pts).ok()?;
    // Every constraint must be supported somewhere, otherwise the set is
    // unbounded in a direction the hull cannot see.
    let closed = lines.iter().all(|(p, b)| poly.vertices().iter().all(|v| p.dot(v) - b <= tol));
    let bounded = poly.halfspaces().iter().all(|h| {
        let normal = Vector2::new(h.p()[0], h.p()[1]);
        lines.iter().any(|(p, _)| (p - normal).norm() < 1e-9)
    });
    (closed && bounded).then_some(poly)
}

/// A convex set `{x in R^d : every inequality holds}`, assumed compact with
/// nonempty interior.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSet {
    dim: usize,
    ineqs: Vec<Inequality>,
    polygon: Option<Polygon2D>,
}

impl ConvexSet {
    pub fn new(dim: usize, ineqs: Vec<Inequality>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("set dimension must be positive".into()));
        }
        if ineqs.is_empty() {
            return Err(Error::Validation("set needs at least one inequality".into()));
        }
        if let Some((i, q)) = ineqs.iter().enumerate().find(|(_, q)| q.dim() != dim) {
            return Err(Error::Validation(format!(
                "inequality {i} has dimension {}, set has dimension {dim}",
                q.dim()
            )));
        }
        let polygon = if dim == 2 { polygon_from_halfspaces(&ineqs) } else { None };
        Ok(Self { dim, ineqs, polygon })
    }

    /// Halfspace form of a polygon, keeping the vertex list for exact queries.
    pub fn from_polygon(poly: Polygon2D) -> Self {
        let ineqs = poly.halfspaces().into_iter().map(Inequality::Linear).collect();
        Self { dim: 2, ineqs, polygon: Some(poly) }
    }

    /// The box `lo <= x <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Input("box bounds must be non-empty and of equal length".into()));
        }
        let d = lo.len();
        let mut ineqs = Vec::with_capacity(2 * d);
        for i in 0..d {
            let e = DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 });
            ineqs.push(Inequality::Linear(LinearIneq::new(e.clone(), hi[i])?));
            ineqs.push(Inequality::Linear(LinearIneq::new(-e, -lo[i])?));
        }
        Self::new(d, ineqs)
    }

    /// `(x - center)' M (x - center) <= 1` for symmetric positive definite `M`.
    pub fn ellipsoid(center: &[f64], m: DMatrix<f64>) -> Result<Self> {
        let c = DVector::from_column_slice(center);
        let b = -(&m * &c);
        let k = (&m * &c).dot(&c) - 1.0;
        let q = QuadraticIneq::new(m, b, k)?;
        Self::new(center.len(), vec![Inequality::Quadratic(q)])
    }

    /// Ellipse with the given semi-axes, rotated by `angle` about `center`.
    pub fn ellipse(center: [f64; 2], semi_axes: [f64; 2], angle: f64) -> Result<Self> {
        if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
            return Err(Error::Input("ellipse semi-axes must be positive".into()));
        }
        let r = nalgebra::Rotation2::new(angle).into_inner();
        let d = nalgebra::Matrix2::new(
            1.0 / (semi_axes[0] * semi_axes[0]),
            0.0,
            0.0,
            1.0 / (semi_axes[1] * semi_axes[1]),
        );
        let m = r * d * r.transpose();
        Self::ellipsoid(&center, DMatrix::from_iterator(2, 2, m.iter().copied()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ineqs(&self) -> &[Inequality] {
        &self.ineqs
    }

    pub fn n(&self) -> usize {
        self.ineqs.len()
    }

    pub fn polygon(&self) -> Option<&Polygon2D> {
        self.polygon.as_ref()
    }

    pub fn is_polyhedral(&self) -> bool {
        self.ineqs.iter().all(Inequality::is_linear)
    }

    /// Adds an inequality. Drops any polygon backing, since the vertex list
    /// no longer describes the set.
    pub fn with_inequality(mut self, ineq: Inequality) -> Result<Self> {
        if ineq.dim() != self.dim {
            return Err(Error::Validation("inequality dimension does not match set".into()));
        }
        self.ineqs.push(ineq);
        self.polygon = None;
        Ok(self)
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Input(format!(
                "point has dimension {}, set has dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn residuals(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.ineqs.iter().map(|q| q.residual(x)).collect())
    }

    /// Largest residual; non-positive inside.
    pub fn max_residual(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.residuals(x)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// True iff every residual is `<= tol`.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        if !(tol >= 0.0) {
            return Err(Error::Input(format!("tolerance {tol} must be non-negative")));
        }
        Ok(self.max_residual(x)? <= tol)
    }

    /// Image of the set under `x -> m x + shift` for invertible `m`.
    pub fn affine_image(&self, m: &DMatrix<f64>, shift: &DVector<f64>) -> Result<Self> {
        let d = self.dim;
        if m.nrows() != d || m.ncols() != d || shift.len() != d {
            return Err(Error::Input("affine map has wrong dimensions".into()));
        }
        let inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Input("affine map is singular".into()))?;
        let w = &inv * shift;
        let ineqs = self
            .ineqs
            .iter()
            .map(|q| match q {
                Inequality::Linear(l) => {
                    let p = inv.transpose() * &l.p;
                    let b = l.b + p.dot(shift);
                    Ok(Inequality::Linear(LinearIneq::new(p, b)?))
                }
                Inequality::Quadratic(q) => {
                    let a = inv.transpose() * &q.a * &inv;
                    let aw = &q.a * &w;
                    let b = inv.transpose() * (&q.b - &aw);
                    let c = q.c + aw.dot(&w) - 2.0 * q.b.dot(&w);
                    Ok(Inequality::Quadratic(QuadraticIneq::new(a, b, c)?))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let polygon = match &self.polygon {
            Some(p) => {
                let m2 = nalgebra::Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
                Some(p.transformed(&m2, &Vector2::new(shift[0], shift[1]))?)
            }
            None => None,
        };
        Ok(Self { dim: d, ineqs, polygon })
    }

    pub fn translated(&self, t: &[f64]) -> Result<Self> {
        self.affine_image(&DMatrix::identity(self.dim, self.dim), &DVector::from_column_slice(t))
    }

    /// Rotation of a planar set about the origin.
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        if self.dim != 2 {
            return Err(Error::Input("rotation is defined for planar sets only".into()));
        }
        let r = nalgebra::Rotation2::new(angle).into_inner();
        self.affine_image(&DMatrix::from_iterator(2, 2, r.iter().copied()), &DVector::zeros(2))
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        self.affine_image(
            &(DMatrix::identity(self.dim, self.dim) * s),
            &DVector::zeros(self.dim),
        )
    }

    fn oracles(&self) -> Vec<Box<dyn SmoothFunction>> {
        self.ineqs.iter().map(Inequality::to_oracle).collect()
    }

    /// A strictly interior point: the minimizer of the largest residual,
    /// found by a barrier solve over `(x, s)` with `g_i(x) < s`.
    pub fn interior_point(&self) -> Result<DVector<f64>> {
        if let Some(poly) = &self.polygon {
            let c = poly.centroid_of_vertices();
            return Ok(DVector::from_vec(vec![c.x, c.y]));
        }
        let d = self.dim;
        let lift = |a: &DVector<f64>| DVector::from_fn(d + 1, |i, _| if i < d { a[i] } else { 0.0 });
        let mut cons: Vec<Box<dyn SmoothFunction>> = Vec::with_capacity(self.ineqs.len());
        for q in &self.ineqs {
            let mut slack = DVector::zeros(d + 1);
            slack[d] = -1.0;
            match q {
                Inequality::Linear(l) => {
                    cons.push(Box::new(AffineFn::new(lift(&l.p) + slack, -l.b)));
                }
                Inequality::Quadratic(qq) => {
                    let mut a = DMatrix::zeros(d + 1, d + 1);
                    a.view_mut((0, 0), (d, d)).copy_from(&qq.a);
                    cons.push(Box::new(QuadraticFn::new(a, lift(&(&qq.b * 2.0)) + slack, qq.c)));
                }
            }
        }
        let mut obj = DVector::zeros(d + 1);
        obj[d] = -1.0;
        let problem = BarrierProblem::new(d + 1, Box::new(AffineFn::new(obj, 0.0)), cons)?;
        let worst = self.max_residual(&DVector::zeros(d))?;
        let mut x0 = DVector::zeros(d + 1);
        x0[d] = worst + worst.abs().max(1.0);
        let cfg = SolverConfig { eps: 1e-9, ..SolverConfig::default() };
        let report = barrier::path_follow(&problem, &x0, &cfg).map_err(noncompact)?;
        let x = DVector::from_fn(d, |i, _| report.x_star[i]);
        if !(self.max_residual(&x)? < 0.0) {
            return Err(Error::EmptyInterior(format!(
                "largest residual at the deepest point found is {:e}",
                report.x_star[d]
            )));
        }
        Ok(x)
    }

    /// Maximizer of `dir.x` over the set. Exact for polygon-backed sets;
    /// otherwise a barrier solve accurate to about `1e-8` in value.
    pub fn support_point(&self, dir: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(dir)?;
        if dir.iter().all(|&v| v == 0.0) {
            return Err(Error::Input("support direction must be nonzero".into()));
        }
        if let Some(poly) = &self.polygon {
            let v = poly.support_point(&Vector2::new(dir[0], dir[1]))?;
            return Ok(DVector::from_vec(vec![v.x, v.y]));
        }
        let x0 = self.interior_point()?;
        self.support_from(&x0, dir)
    }

    fn support_from(&self, x0: &DVector<f64>, dir: &DVector<f64>) -> Result<DVector<f64>> {
        let problem =
            BarrierProblem::new(self.dim, Box::new(AffineFn::new(dir.clone(), 0.0)), self.oracles())?;
        let cfg = SolverConfig { eps: 1e-10, ..SolverConfig::default() };
        let report = barrier::path_follow(&problem, x0, &cfg).map_err(noncompact)?;
        Ok(DVector::from_vec(report.x_star))
    }

    /// Smallest axis-aligned box containing the set.
    pub fn bounding_box(&self) -> Result<BoxRegion> {
        if let Some(poly) = &self.polygon {
            let vs = poly.vertices();
            let (mut lo, mut hi) = (vs[0], vs[0]);
            for v in vs {
                lo = lo.inf(v);
                hi = hi.sup(v);
            }
            return BoxRegion::new(vec![lo.x, lo.y], vec![hi.x, hi.y]);
        }
        let d = self.dim;
        let x0 = self.interior_point()?;
        let mut xl = vec![0.0; d];
        let mut xu = vec![0.0; d];
        for i in 0..d {
            let e = DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 });
            xu[i] = self.support_from(&x0, &e)?[i];
            xl[i] = self.support_from(&x0, &-e)?[i];
        }
        BoxRegion::new(xl, xu)
    }

    /// `max(1, largest bounding-box extent)`.
    pub fn scale(&self) -> Result<f64> {
        Ok(self.bounding_box()?.scale())
    }

    /// Farthest boundary point from `origin` along `dir`, or `None` if the ray
    /// never leaves the set. `origin` must be inside.
    pub fn ray_exit(&self, origin: &DVector<f64>, dir: &DVector<f64>) -> Option<f64> {
        self.ineqs
            .iter()
            .filter_map(|q| q.ray_exit(origin, dir))
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
    }
}

/// Support and phase-one solves fail when the set has a recession direction:
/// either the iterates diverge or the barrier Hessian becomes singular.
fn noncompact(e: Error) -> Error {
    match e {
        Error::Conditioning { .. } => {
            Error::Unbounded("barrier Hessian is singular; the set contains a line".into())
        }
        other => other,
    }
}

// JSON schema for sets ------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintSpec {
    Linear { p: Vec<f64>, b: f64 },
    Quadratic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonSpec {
    pub vertices: Vec<[f64; 2]>,
}

/// On-disk set description: either `{"dim", "constraints"}` or `{"polygon"}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<ConstraintSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<PolygonSpec>,
}

impl SetSpec {
    pub fn build(&self) -> Result<ConvexSet> {
        match (&self.polygon, &self.dim, &self.constraints) {
            (Some(poly), None, None) => {
                Ok(ConvexSet::from_polygon(Polygon2D::from_points(&poly.vertices)?))
            }
            (None, Some(dim), Some(cons)) => {
                let ineqs = cons
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        constraint_from_spec(c)
                            .map_err(|e| Error::Validation(format!("constraints[{i}]: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ConvexSet::new(*dim, ineqs)
            }
            (Some(_), _, _) => Err(Error::Input(
                "`polygon` cannot be combined with `dim` or `constraints`".into(),
            )),
            (None, None, _) => Err(Error::Input("missing key `dim` (or `polygon`)".into())),
            (None, Some(_), None) => Err(Error::Input("missing key `constraints`".into())),
        }
    }
}

fn constraint_from_spec(c: &ConstraintSpec) -> Result<Inequality> {
    match c {
        ConstraintSpec::Linear { p, b } => {
            Ok(Inequality::Linear(LinearIneq::new(DVector::from_column_slice(p), *b)?))
        }
        ConstraintSpec::Quadratic { a, b, c } => {
            let d = b.len();
            if a.len() != d || a.iter().any(|row| row.len() != d) {
                return Err(Error::Validation(format!("`A` must be {d}x{d}")));
            }
            let m = DMatrix::from_fn(d, d, |i, j| a[i][j]);
            Ok(Inequality::Quadratic(QuadraticIneq::new(m, DVector::from_column_slice(b), *c)?))
        }
    }
}

/// Parses the JSON set schema. Syntax errors carry serde's line/column.
pub fn parse_set(json: &str) -> Result<ConvexSet> {
    let spec: SetSpec = serde_json::from_str(json).map_err(|e| Error::Input(e.to_string()))?;
    spec.build()
}

impl ConvexSet {
    /// The set in the JSON schema accepted by [`parse_set`].
    /// Exact area for polygon sets and single ellipses; `None` otherwise.
    pub fn planar_area(&self) -> Option<f64> {
        if self.dim != 2 {
            return None;
        }
        if let Some(p) = &self.polygon {
            return Some(p.area());
        }
        match self.ineqs.as_slice() {
            // x'Ax + 2b.x + c <= 0 is the ellipse (x + A^-1 b)' A (x + A^-1 b) <= b'A^-1 b - c.
            [Inequality::Quadratic(q)] => {
                let det = q.a.determinant();
                if !(det > 0.0) {
                    return None;
                }
                let r2 = q.b.dot(&(q.a.clone().try_inverse()? * &q.b)) - q.c;
                (r2 > 0.0).then(|| std::f64::consts::PI * r2 / det.sqrt())
            }
            _ => None,
        }
    }

    pub fn to_spec(&self) -> SetSpec {
        if let Some(p) = &self.polygon {
            return SetSpec {
                polygon: Some(PolygonSpec {
                    vertices: p.vertices().iter().map(|v| [v.x, v.y]).collect(),
                }),
                ..SetSpec::default()
            };
        }
        let constraints = self
            .ineqs
            .iter()
            .map(|q| match q {
                Inequality::Linear(l) => ConstraintSpec::Linear { p: l.p.iter().copied().collect(), b: l.b },
                Inequality::Quadratic(q) => ConstraintSpec::Quadratic {
                    a: q.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    b: q.b.iter().copied().collect(),
                    c: q.c,
                },
            })
            .collect();
        SetSpec { dim: Some(self.dim), constraints: Some(constraints), polygon: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn unit_square() -> ConvexSet {
        ConvexSet::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    fn unit_disk() -> ConvexSet {
        ConvexSet::ellipsoid(&[0.0, 0.0], DMatrix::identity(2, 2)).unwrap()
    }

    fn hexagon() -> Polygon2D {
        let vs = (0..6)
            .map(|k| {
                let a = k as f64 * std::f64::consts::PI / 3.0;
                Vector2::new(a.cos(), a.sin())
            })
            .collect();
        Polygon2D::new(vs).unwrap()
    }

    #[test]
    fn membership() {
        let sq = unit_square();
        assert!(sq.contains(&v(&[0.5, 0.5]), 0.0).unwrap());
        assert!(!sq.contains(&v(&[1.5, 0.5]), 0.0).unwrap());
        assert!(unit_disk().contains(&v(&[0.6, 0.8]), 1e-9).unwrap());
        assert!(matches!(sq.contains(&v(&[0.5]), 0.0), Err(Error::Input(_))));
        assert!(sq.contains(&v(&[0.5, 0.5]), -1.0).is_err());
    }

    #[test]
    fn triangle_halfspaces() {
        let tri = Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let set = ConvexSet::from_polygon(tri.clone());
        assert_eq!(set.n(), 3);
        assert!(set.contains(&v(&[0.1, 0.1]), 0.0).unwrap());
        assert!(!set.contains(&v(&[1.0, 1.0]), 0.0).unwrap());
        for p in tri.vertices() {
            assert!(set.max_residual(&v(&[p.x, p.y])).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn square_halfspaces_match_box() {
        let sq = ConvexSet::from_polygon(
            Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap(),
        );
        assert_eq!(sq.n(), 4);
        for p in [[0.0, 0.0], [1.0, 1.0], [0.3, 0.9], [1.0 + 1e-6, 0.5], [0.5, -1e-6]] {
            let inside = p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 1.0;
            assert_eq!(sq.contains(&v(&p), 0.0).unwrap(), inside, "{p:?}");
        }
    }

    #[test]
    fn hexagon_apothem() {
        let set = ConvexSet::from_polygon(hexagon());
        assert_eq!(set.n(), 6);
        for r in set.residuals(&v(&[0.0, 0.0])).unwrap() {
            assert!(r <= -(3f64.sqrt() / 2.0) + 1e-9);
            assert_relative_eq!(r, -(3f64.sqrt() / 2.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn polygon_validation() {
        assert!(Polygon2D::from_points(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err(), "clockwise");
        assert!(Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0]]).is_err());
        // pentagram: every turn is a left turn but it winds twice
        let star: Vec<[f64; 2]> = (0..5)
            .map(|k| {
                let a = (2 * k) as f64 * std::f64::consts::TAU / 5.0;
                [a.cos(), a.sin()]
            })
            .collect();
        assert!(Polygon2D::from_points(&star).is_err());
    }

    #[test]
    fn polygon_support_tie_breaks() {
        let sq = Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(sq.support_point(&Vector2::new(1.0, 0.0)).unwrap(), Vector2::new(1.0, 1.0));
        let tri = Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(tri.support_point(&Vector2::new(1.0, 1.0)).unwrap(), Vector2::new(1.0, 0.0));
        assert!(tri.support_point(&Vector2::zeros()).is_err());
    }

    #[test]
    fn disk_support_and_bounding_box() {
        let disk = unit_disk();
        let top = disk.support_point(&v(&[0.0, 1.0])).unwrap();
        assert!((top[0]).abs() < 1e-4 && (top[1] - 1.0).abs() < 1e-8, "{top}");
        let bb = disk.bounding_box().unwrap();
        for i in 0..2 {
            assert!((bb.xl[i] + 1.0).abs() < 1e-8);
            assert!((bb.xu[i] - 1.0).abs() < 1e-8);
        }
        let ell = ConvexSet::ellipse([0.0, 0.0], [2.0, 1.0], 0.0).unwrap();
        let bb = ell.bounding_box().unwrap();
        assert!((bb.xl[0] + 2.0).abs() < 1e-8 && (bb.xu[0] - 2.0).abs() < 1e-8);
        assert!((bb.xl[1] + 1.0).abs() < 1e-8 && (bb.xu[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn polygon_bounding_box_is_vertex_extremes() {
        let set = ConvexSet::from_polygon(hexagon());
        let bb = set.bounding_box().unwrap();
        assert_eq!(bb.xl, vec![-1.0, -(3f64.sqrt() / 2.0)]);
        assert_relative_eq!(bb.xu[0], 1.0);
        assert_relative_eq!(bb.xu[1], 3f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn unbounded_sets_are_reported() {
        let half = ConvexSet::new(
            2,
            vec![Inequality::Linear(LinearIneq::new(v(&[1.0, 0.0]), 0.0).unwrap())],
        )
        .unwrap();
        assert!(matches!(half.support_point(&v(&[0.0, 1.0])), Err(Error::Unbounded(_))));
        let strip = ConvexSet::new(
            2,
            vec![
                Inequality::Linear(LinearIneq::new(v(&[1.0, 0.0]), 1.0).unwrap()),
                Inequality::Linear(LinearIneq::new(v(&[-1.0, 0.0]), 0.0).unwrap()),
            ],
        )
        .unwrap();
        assert!(matches!(strip.bounding_box(), Err(Error::Unbounded(_))));
    }

    #[test]
    fn empty_interior_is_reported() {
        let slab = ConvexSet::new(
            1,
            vec![
                Inequality::Linear(LinearIneq::new(v(&[1.0]), 0.0).unwrap()),
                Inequality::Linear(LinearIneq::new(v(&[-1.0]), 0.0).unwrap()),
            ],
        )
        .unwrap();
        assert!(matches!(slab.interior_point(), Err(Error::EmptyInterior(_))));
    }

    #[test]
    fn diameter_examples() {
        let sq = Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let (d, (i, j)) = sq.diameter();
        assert_relative_eq!(d, 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!((j + 4 - i) % 4, 2, "opposite corners");
        let tri = Polygon2D::from_points(&[[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(tri.diameter(), (5f64.sqrt(), (1, 2)));
        assert_relative_eq!(hexagon().diameter().0, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn area_examples() {
        let sq = Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(sq.area(), 1.0);
        let tri = Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(tri.area(), 0.5);
    }

    #[test]
    fn quadratic_symmetrized_and_psd_checked() {
        let q = QuadraticIneq::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
            v(&[0.0, 0.0]),
            -1.0,
        )
        .unwrap();
        assert_eq!(q.a()[(0, 1)], 1.0);
        assert_eq!(q.a()[(1, 0)], 1.0);
        assert!(!q.is_diagonal(1e-12));
        let bad = QuadraticIneq::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), v(&[0.0, 0.0]), -1.0);
        assert!(matches!(bad, Err(Error::Validation(_))));
    }

    #[test]
    fn affine_image_maps_membership() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 1.5]);
        let s = v(&[0.3, -0.7]);
        for set in [unit_disk(), unit_square(), ConvexSet::from_polygon(hexagon())] {
            let img = set.affine_image(&m, &s).unwrap();
            for p in [[0.1, 0.2], [0.9, 0.9], [-0.5, 0.95], [0.99, 0.01], [1.2, 0.0]] {
                let x = v(&p);
                let y = &m * &x + &s;
                assert_eq!(
                    set.max_residual(&x).unwrap() <= 0.0,
                    img.max_residual(&y).unwrap() <= 0.0,
                    "{p:?}"
                );
            }
        }
    }

    #[test]
    fn ray_exit_hits_boundary() {
        let disk = unit_disk();
        let r = disk.ray_exit(&v(&[0.5, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert_relative_eq!(r, 0.5, epsilon = 1e-15);
        let r = disk.ray_exit(&v(&[0.5, 0.0]), &v(&[-1.0, 0.0])).unwrap();
        assert_relative_eq!(r, 1.5, epsilon = 1e-15);
        let r = unit_square().ray_exit(&v(&[0.5, 0.5]), &v(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(r, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let json = r#"{"dim": 2, "constraints": [{"type":"linear","p":[1,0],"b":1},
            {"type":"quadratic","A":[[1,0],[0,1]],"b":[0,0],"c":-1}]}"#;
        let set = parse_set(json).unwrap();
        assert_eq!(set.n(), 2);
        let again = parse_set(&serde_json::to_string(&set.to_spec()).unwrap()).unwrap();
        assert_eq!(again, set);
        let poly = parse_set(r#"{"polygon": {"vertices": [[0,0],[1,0],[0,1]]}}"#).unwrap();
        assert!(poly.polygon().is_some());

        let err = parse_set(r#"{"dim": 2, "constraints": [{"type":"linear","b":1}]}"#).unwrap_err();
        assert!(err.to_string().contains("`p`"), "{err}");
        let err = parse_set(r#"{"constraints": []}"#).unwrap_err();
        assert!(err.to_string().contains("`dim`"), "{err}");
        let err = parse_set(r#"{"polygon": {"vertices": [[0,0],[0,1],[1,0]]}}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn planar_areas() {
        let e = ConvexSet::ellipse([1.0, -2.0], [3.0, 0.5], 0.3).unwrap();
        assert_relative_eq!(e.planar_area().unwrap(), std::f64::consts::PI * 1.5, epsilon = 1e-12);
        let sq = ConvexSet::from_box(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        assert_relative_eq!(sq.planar_area().unwrap(), 2.0, epsilon = 1e-12);
        let cut = e.with_inequality(Inequality::Linear(LinearIneq::new(v(&[1.0, 0.0]), 1.0).unwrap())).unwrap();
        assert!(cut.planar_area().is_none());
    }
}
