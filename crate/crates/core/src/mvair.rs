//! Maximum-volume axis-aligned inscribed box (MVAIR).
//!
//! The decision variable is the pair of opposite corners, packed as
//! `z = (xu, xl)` in `R^{2d}`. The objective is `sum_j log(xu_j - xl_j)`;
//! its domain enforces `xu > xl`, so no extra barrier terms are needed.
//!
//! A linear inequality `p.x <= b` holds on the whole box iff
//! `sum_j (p+_ij xu_j - p-_ij xl_j) <= b_i`, one barrier term per inequality.
//! A convex quadratic holds on the box iff it holds at every box vertex; for
//! a diagonal `A` only the coordinates with positive curvature need both
//! endpoints, the rest are pinned to the endpoint picked by the sign of the
//! linear coefficient.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::barrier::{
    self, AffineFn, BarrierProblem, LogSumFn, QuadraticFn, SmoothFunction, SolverConfig,
    SolverReport,
};
use crate::convexset::{BoxRegion, ConvexSet, Inequality, LinearIneq, QuadraticIneq};
use crate::error::{Error, Result};

/// Largest number of free vertex coordinates for which quadratic
/// constraints are enumerated over box vertices.
pub const MAX_VERTEX_ENUM_DIM: usize = 12;

/// Positive and negative parts of a constraint matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    pub p_plus: DMatrix<f64>,
    pub p_minus: DMatrix<f64>,
}

pub fn split_pos_neg(p: &DMatrix<f64>) -> SplitMatrix {
    SplitMatrix { p_plus: p.map(|v| v.max(0.0)), p_minus: p.map(|v| (-v).max(0.0)) }
}

/// A box model ready for the barrier solver.
#[derive(Debug)]
pub struct MvairModel {
    pub problem: BarrierProblem,
    pub dim: usize,
    /// Barrier terms contributed by each input inequality, in input order.
    pub groups: Vec<usize>,
}

impl MvairModel {
    pub fn n_barrier(&self) -> usize {
        self.problem.n_barrier()
    }

    pub fn pack(&self, b: &BoxRegion) -> DVector<f64> {
        pack(&b.xl, &b.xu)
    }

    pub fn unpack(&self, z: &[f64]) -> BoxRegion {
        unpack(self.dim, z)
    }
}

fn pack(xl: &[f64], xu: &[f64]) -> DVector<f64> {
    DVector::from_iterator(xl.len() * 2, xu.iter().chain(xl.iter()).copied())
}

fn unpack(d: usize, z: &[f64]) -> BoxRegion {
    BoxRegion { xu: z[..d].to_vec(), xl: z[d..2 * d].to_vec() }
}

fn volume_objective(d: usize) -> LogSumFn {
    let terms = (0..d)
        .map(|j| {
            let mut a = DVector::zeros(2 * d);
            a[j] = 1.0;
            a[d + j] = -1.0;
            AffineFn::new(a, 0.0)
        })
        .collect();
    LogSumFn::new(2 * d, terms)
}

fn linear_box_constraint(l: &LinearIneq) -> AffineFn {
    let d = l.p().len();
    let mut a = DVector::zeros(2 * d);
    for j in 0..d {
        let pj = l.p()[j];
        a[j] = pj.max(0.0);
        a[d + j] = -(-pj).max(0.0);
    }
    AffineFn::new(a, -l.b())
}

/// Model for a set of linear inequalities only.
pub fn build_mvair_polytope(set: &ConvexSet) -> Result<MvairModel> {
    if !set.is_polyhedral() {
        return Err(Error::Input(
            "set has quadratic constraints; use build_mvair_general".into(),
        ));
    }
    let d = set.dim();
    let constraints: Vec<Box<dyn SmoothFunction>> = set
        .ineqs()
        .iter()
        .map(|q| match q {
            Inequality::Linear(l) => Box::new(linear_box_constraint(l)) as Box<dyn SmoothFunction>,
            Inequality::Quadratic(_) => unreachable!(),
        })
        .collect();
    let groups = vec![1; constraints.len()];
    let problem = BarrierProblem::new(2 * d, Box::new(volume_objective(d)), constraints)?;
    Ok(MvairModel { problem, dim: d, groups })
}

/// Which box endpoint each coordinate of a vertex takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endpoint {
    Upper,
    Lower,
}

/// `g(z) = v' A v + 2 b.v + c` where `v` picks `xu_i` or `xl_i` per coordinate.
fn vertex_constraint(q: &QuadraticIneq, pick: &[Endpoint]) -> QuadraticFn {
    let d = pick.len();
    let col = |i: usize| match pick[i] {
        Endpoint::Upper => i,
        Endpoint::Lower => d + i,
    };
    let mut qm = DMatrix::zeros(2 * d, 2 * d);
    let mut r = DVector::zeros(2 * d);
    for i in 0..d {
        r[col(i)] += 2.0 * q.b()[i];
        for j in 0..d {
            qm[(col(i), col(j))] += q.a()[(i, j)];
        }
    }
    QuadraticFn::new(qm, r, q.c())
}

fn quadratic_box_constraints(q: &QuadraticIneq) -> Result<Vec<QuadraticFn>> {
    let d = q.b().len();
    let (free, pinned): (Vec<usize>, Vec<(usize, Endpoint)>) = if q.is_diagonal(1e-12) {
        let curv_tol = 1e-12 * q.a().amax();
        let mut free = Vec::new();
        let mut pinned = Vec::new();
        for i in 0..d {
            if q.a()[(i, i)] > curv_tol {
                free.push(i);
            } else if q.b()[i] < 0.0 {
                pinned.push((i, Endpoint::Lower));
            } else {
                pinned.push((i, Endpoint::Upper));
            }
        }
        (free, pinned)
    } else {
        ((0..d).collect(), Vec::new())
    };
    if free.len() > MAX_VERTEX_ENUM_DIM {
        return Err(Error::Capability(format!(
            "quadratic constraint needs 2^{} box-vertex constraints; at most {} free coordinates \
             (2^{} constraints) are supported",
            free.len(),
            MAX_VERTEX_ENUM_DIM,
            MAX_VERTEX_ENUM_DIM
        )));
    }
    let mut pick = vec![Endpoint::Upper; d];
    for &(i, e) in &pinned {
        pick[i] = e;
    }
    Ok((0..1usize << free.len())
        .map(|mask| {
            for (bit, &i) in free.iter().enumerate() {
                pick[i] = if mask >> bit & 1 == 1 { Endpoint::Upper } else { Endpoint::Lower };
            }
            vertex_constraint(q, &pick)
        })
        .collect())
}

/// Model for any set of linear and convex quadratic inequalities.
pub fn build_mvair_general(set: &ConvexSet) -> Result<MvairModel> {
    let d = set.dim();
    let mut constraints: Vec<Box<dyn SmoothFunction>> = Vec::new();
    let mut groups = Vec::with_capacity(set.n());
    for q in set.ineqs() {
        match q {
            Inequality::Linear(l) => {
                constraints.push(Box::new(linear_box_constraint(l)));
                groups.push(1);
            }
            Inequality::Quadratic(q) => {
                let cs = quadratic_box_constraints(q)?;
                groups.push(cs.len());
                constraints.extend(cs.into_iter().map(|c| Box::new(c) as Box<dyn SmoothFunction>));
            }
        }
    }
    let problem = BarrierProblem::new(2 * d, Box::new(volume_objective(d)), constraints)?;
    Ok(MvairModel { problem, dim: d, groups })
}

/// Polytope model when possible, general model otherwise.
pub fn build_mvair(set: &ConvexSet) -> Result<MvairModel> {
    if set.is_polyhedral() {
        build_mvair_polytope(set)
    } else {
        build_mvair_general(set)
    }
}

/// How the starting box was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMethod {
    /// Grown around the bounding-box center, which is interior.
    BoundingBoxMidpoint,
    /// Grown around the bounding-box center shifted along the
    /// perturbation direction `nu`.
    PerturbedMidpoint,
    /// Grown around the deepest point of a phase-one solve.
    InteriorPoint,
    /// Built from facet centroids of a boundary simplex.
    Simplex,
}

const MAX_HALVINGS: usize = 60;

fn strictly_feasible_with_margin(model: &MvairModel, z: &DVector<f64>, margin: f64) -> bool {
    model.problem.objective(z).is_finite()
        && model.problem.constraint_values(z).iter().all(|&g| g < -margin)
}

/// Box `center +/- delta*h` as a packed variable vector.
fn scaled_box(center: &DVector<f64>, h: &[f64], delta: f64) -> DVector<f64> {
    let xu: Vec<f64> = center.iter().zip(h).map(|(c, h)| c + delta * h).collect();
    let xl: Vec<f64> = center.iter().zip(h).map(|(c, h)| c - delta * h).collect();
    pack(&xl, &xu)
}

/// Grows a box of shape `h` around an interior `center`: first halve
/// `delta` from 0.25 until strictly feasible, then push out along the ray to
/// the largest feasible `delta` and take the midpoint between the degenerate
/// box and that extreme box.
fn grow_box(model: &MvairModel, center: &DVector<f64>, h: &[f64], margin: f64) -> Option<DVector<f64>> {
    let feasible = |delta: f64| strictly_feasible_with_margin(model, &scaled_box(center, h, delta), margin);
    let mut delta = 0.25;
    let mut found = false;
    for _ in 0..MAX_HALVINGS {
        if feasible(delta) {
            found = true;
            break;
        }
        delta *= 0.5;
    }
    if !found {
        return None;
    }
    let (mut lo, mut hi) = (delta, None);
    let mut probe = delta;
    while probe < 0.5 {
        probe = (probe * 2.0).min(0.5);
        if feasible(probe) {
            lo = probe;
        } else {
            hi = Some(probe);
            break;
        }
    }
    if let Some(mut hi) = hi {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Some(scaled_box(center, h, 0.5 * lo))
}

/// Strictly feasible start for [`build_mvair`]'s model of `set`.
pub fn initial_feasible(set: &ConvexSet) -> Result<(DVector<f64>, InitMethod)> {
    let model = build_mvair(set)?;
    initial_feasible_for(set, &model)
}

pub(crate) fn initial_feasible_for(
    set: &ConvexSet,
    model: &MvairModel,
) -> Result<(DVector<f64>, InitMethod)> {
    let bb = set.bounding_box()?;
    let scale = bb.scale();
    let margin = 1e-10 * scale;
    let h = bb.extents();
    if h.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::EmptyInterior("bounding box is flat".into()));
    }
    let inside = |c: &DVector<f64>| set.max_residual(c).map(|r| r < -margin);

    let mid = DVector::from_vec(bb.center());
    if inside(&mid)? {
        if let Some(z) = grow_box(model, &mid, &h, margin) {
            return Ok((z, InitMethod::BoundingBoxMidpoint));
        }
    }

    // nu = e_k - (e_k.w / |w|^2) w with k the smallest extent of the box.
    let d = set.dim();
    let w = DVector::from_column_slice(&h);
    let k = (0..d).fold(0, |best, i| if h[i] < h[best] { i } else { best });
    let mut nu = -&w * (w[k] / w.norm_squared());
    nu[k] += 1.0;
    if nu.norm() > 1e-12 {
        let mut delta = 0.25 * scale;
        for _ in 0..MAX_HALVINGS {
            for sign in [1.0, -1.0] {
                let c = &mid + &nu * (sign * delta);
                if inside(&c)? {
                    if let Some(z) = grow_box(model, &c, &h, margin) {
                        return Ok((z, InitMethod::PerturbedMidpoint));
                    }
                }
            }
            delta *= 0.5;
        }
    }

    let c = set.interior_point()?;
    grow_box(model, &c, &h, margin)
        .map(|z| (z, InitMethod::InteriorPoint))
        .ok_or_else(|| {
            Error::EmptyInterior(format!("no strictly feasible box after {MAX_HALVINGS} halvings"))
        })
}

/// Start from `d + 1` affinely independent boundary points: the centroids of
/// the facets `conv(p1..pd)` and `conv(p1, p3..p_{d+1})` span the box, pulled
/// halfway toward the simplex centroid so it lies strictly inside.
pub fn simplex_start(set: &ConvexSet, points: &[DVector<f64>]) -> Result<(DVector<f64>, InitMethod)> {
    let d = set.dim();
    if points.len() != d + 1 || points.iter().any(|p| p.len() != d) {
        return Err(Error::Input(format!("simplex start needs {} points in R^{d}", d + 1)));
    }
    let model = build_mvair(set)?;
    let centroid = |ps: &[&DVector<f64>]| ps.iter().fold(DVector::zeros(d), |acc, p| acc + *p) / ps.len() as f64;
    let all: Vec<&DVector<f64>> = points.iter().collect();
    let g = centroid(&all);
    let facet1: Vec<&DVector<f64>> = points[..d].iter().collect();
    let facet2: Vec<&DVector<f64>> =
        std::iter::once(&points[0]).chain(points[2..].iter()).collect();
    let y1 = &g + (centroid(&facet1) - &g) * 0.5;
    let y2 = &g + (centroid(&facet2) - &g) * 0.5;
    let xu: Vec<f64> = (0..d).map(|i| y1[i].max(y2[i])).collect();
    let xl: Vec<f64> = (0..d).map(|i| y1[i].min(y2[i])).collect();
    let z = pack(&xl, &xu);
    let margin = 1e-10 * set.scale()?;
    if strictly_feasible_with_margin(&model, &z, margin) {
        Ok((z, InitMethod::Simplex))
    } else {
        Err(Error::EmptyInterior(
            "facet-centroid box is degenerate or not strictly inside the set".into(),
        ))
    }
}

/// Maximum-volume axis-aligned box inscribed in `set`.
pub fn solve_mvair(set: &ConvexSet, cfg: &SolverConfig) -> Result<(BoxRegion, SolverReport)> {
    let model = build_mvair(set)?;
    let (z0, method) = initial_feasible_for(set, &model)?;
    log::debug!("mvair start via {method:?}");
    let report = barrier::path_follow(&model.problem, &z0, cfg)?;
    Ok((model.unpack(&report.x_star), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexset::Polygon2D;
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

    fn triangle() -> ConvexSet {
        ConvexSet::from_polygon(Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap())
    }

    #[test]
    fn split_examples() {
        let s = split_pos_neg(&DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 0.0]));
        assert_eq!(s.p_plus.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
        assert_eq!(s.p_minus.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 2.0]);
        assert!(s.p_plus.row(1).iter().chain(s.p_minus.row(1).iter()).all(|&x| x == 0.0));
        let p = DMatrix::from_row_slice(1, 3, &[0.5, -3.0, 2.0]);
        let a = split_pos_neg(&p);
        let b = split_pos_neg(&-&p);
        assert_eq!(a.p_plus, b.p_minus);
        assert_eq!(a.p_minus, b.p_plus);
        assert_eq!(&a.p_plus - &a.p_minus, p);
    }

    #[test]
    fn polytope_model_counts_and_values() {
        let m = build_mvair_polytope(&unit_square()).unwrap();
        assert_eq!(m.n_barrier(), 4);
        assert_eq!(m.problem.dim(), 4);

        let set = ConvexSet::new(
            2,
            vec![
                Inequality::Linear(LinearIneq::new(v(&[1.0, 1.0]), 1.0).unwrap()),
                Inequality::Linear(LinearIneq::new(v(&[-1.0, 0.0]), 0.0).unwrap()),
            ],
        )
        .unwrap();
        let m = build_mvair_polytope(&set).unwrap();
        // z = (xu1, xu2, xl1, xl2)
        let z = v(&[0.3, 0.4, 0.1, 0.2]);
        let g = m.problem.constraint_values(&z);
        assert_relative_eq!(g[0], 0.3 + 0.4 - 1.0, epsilon = 1e-15);
        assert_relative_eq!(g[1], -0.1, epsilon = 1e-15);
        assert!(matches!(build_mvair_polytope(&unit_disk()), Err(Error::Input(_))));
    }

    #[test]
    fn general_model_vertex_counts() {
        let m = build_mvair_general(&unit_disk()).unwrap();
        assert_eq!(m.groups, vec![4]);
        let q = QuadraticIneq::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            v(&[0.1, 0.0]),
            -1.0,
        )
        .unwrap();
        let set = ConvexSet::new(2, vec![Inequality::Quadratic(q)]).unwrap();
        assert_eq!(build_mvair_general(&set).unwrap().groups, vec![4]);
    }

    #[test]
    fn disk_vertex_constraints_match_corner_enumeration() {
        let m = build_mvair_general(&unit_disk()).unwrap();
        let b = BoxRegion::new(vec![-0.3, 0.1], vec![0.5, 0.9]).unwrap();
        let z = m.pack(&b);
        let mut from_model = m.problem.constraint_values(&z);
        let mut from_corners: Vec<f64> =
            b.corners().iter().map(|c| unit_disk().max_residual(c).unwrap()).collect();
        from_model.sort_by(f64::total_cmp);
        from_corners.sort_by(f64::total_cmp);
        for (a, b) in from_model.iter().zip(&from_corners) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let d = 13;
        let mut a = DMatrix::identity(d, d);
        a[(0, 1)] = 0.1;
        a[(1, 0)] = 0.1;
        let q = QuadraticIneq::new(a, DVector::zeros(d), -1.0).unwrap();
        let set = ConvexSet::new(d, vec![Inequality::Quadratic(q)]).unwrap();
        assert!(matches!(build_mvair_general(&set), Err(Error::Capability(_))));
    }

    #[test]
    fn initial_points_are_strictly_feasible() {
        for set in [unit_square(), unit_disk(), triangle()] {
            let model = build_mvair(&set).unwrap();
            let (z, method) = initial_feasible(&set).unwrap();
            assert!(model.problem.is_strictly_feasible(&z), "{method:?}");
            let b = model.unpack(z.as_slice());
            assert!(b.xu.iter().zip(&b.xl).all(|(u, l)| u > l));
            for c in b.corners() {
                assert!(set.max_residual(&c).unwrap() < 0.0);
            }
        }
        assert_eq!(initial_feasible(&unit_square()).unwrap().1, InitMethod::BoundingBoxMidpoint);
        assert_eq!(initial_feasible(&triangle()).unwrap().1, InitMethod::InteriorPoint);
    }

    #[test]
    fn simplex_start_on_polygons() {
        let sq = ConvexSet::from_polygon(
            Polygon2D::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap(),
        );
        let (z, method) = simplex_start(&sq, &[v(&[1.0, 0.2]), v(&[0.3, 1.0]), v(&[0.0, 0.0])]).unwrap();
        assert_eq!(method, InitMethod::Simplex);
        assert!(build_mvair(&sq).unwrap().problem.is_strictly_feasible(&z));
        // Facet centroids (0.5,0.5) and (0.5,0) share an x coordinate: degenerate.
        let pts = [v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.0, 0.0])];
        assert!(simplex_start(&triangle(), &pts).is_err());
    }

    #[test]
    fn closed_form_volumes() {
        let cfg = SolverConfig::default();
        let (b, r) = solve_mvair(&unit_square(), &cfg).unwrap();
        assert_relative_eq!(b.volume(), 1.0, epsilon = 1e-6);
        assert!(r.gap <= cfg.eps);
        let (b, _) = solve_mvair(&unit_disk(), &cfg).unwrap();
        assert_relative_eq!(b.volume(), 2.0, epsilon = 1e-4);
        let (b, _) = solve_mvair(&triangle(), &cfg).unwrap();
        assert_relative_eq!(b.volume(), 0.25, epsilon = 1e-4);
    }
}
