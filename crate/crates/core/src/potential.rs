//! Guillemin reference potential `u0 = sum l_i log l_i`, its Hessian metric
//! `g0 = D^2 u0`, boundary-chart distance approximations, and the weighted
//! Hoelder norm estimator built on the weight `rho = sqrt(prod l_i)`.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};

pub type MetricTensor = Matrix2<f64>;

/// `x log x` with the limit value 0 at `x = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `u0(x) = sum_i l_i(x) log l_i(x)`, finite on the closed polygon.
pub fn u0_eval(polygon: &Polygon, x: Point) -> Result<f64> {
    if polygon.min_l(x) < -1e-12 {
        return Err(Error::PointOutsidePolygon(x.x, x.y));
    }
    Ok(polygon.edges.iter().map(|e| xlogx(e.l(x).max(0.0))).sum())
}

/// Gradient of `u0` at a strictly interior point: `sum_i n_i (log l_i + 1)`.
pub fn u0_gradient(polygon: &Polygon, x: Point) -> Result<Point> {
    if polygon.min_l(x) <= 0.0 {
        return Err(Error::BoundaryPoint(x.x, x.y));
    }
    let mut g = Point::new(0.0, 0.0);
    for e in &polygon.edges {
        g += e.normal * (e.l(x).ln() + 1.0);
    }
    Ok(g)
}

/// `D^2 u0(x) = sum_i n_i n_i^T / l_i(x)`, symmetric positive definite in the
/// interior and blowing up like `1/dist` at the boundary.
pub fn g0_hessian(polygon: &Polygon, x: Point) -> Result<MetricTensor> {
    let min = polygon.min_l(x);
    if min < -1e-12 {
        return Err(Error::PointOutsidePolygon(x.x, x.y));
    }
    if min <= 0.0 {
        return Err(Error::BoundaryPoint(x.x, x.y));
    }
    let mut m = Matrix2::zeros();
    for e in &polygon.edges {
        let n = e.normal;
        let l = e.l(x);
        m += Matrix2::new(n.x * n.x, n.x * n.y, n.x * n.y, n.y * n.y) / l;
    }
    Ok(m)
}

/// Which boundary chart a point falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Chart {
    /// Within `radius` of vertex `i` along both adjacent edges.
    Vertex(usize),
    /// Within `radius` of edge `i`, away from its endpoints.
    Edge(usize),
    /// Interior bulk.
    Bulk,
}

/// Chart classification with radius a fixed fraction of the shortest edge.
pub fn classify_chart(polygon: &Polygon, x: Point) -> Chart {
    let radius = 0.3 * polygon.min_edge_length();
    let n = polygon.num_edges();
    let ls = polygon.l_values(x);
    for i in 0..n {
        let prev = polygon.prev_edge(i);
        if ls[prev] < radius && ls[i] < radius {
            return Chart::Vertex(i);
        }
    }
    for (i, &l) in ls.iter().enumerate() {
        if l < radius {
            return Chart::Edge(i);
        }
    }
    Chart::Bulk
}

/// `g0`-distance between two points in the same boundary chart (or both in
/// the bulk). Near an edge the chart formula is `|t2 - t1| + |sqrt(s2) -
/// sqrt(s1)|`; near a vertex `|sqrt(t2) - sqrt(t1)| + |sqrt(s2) - sqrt(s1)|`.
/// In the bulk the straight-segment Riemannian length is used.
pub fn g0_distance(polygon: &Polygon, p: Point, q: Point) -> Result<f64> {
    if polygon.min_l(p) < -1e-12 {
        return Err(Error::PointOutsidePolygon(p.x, p.y));
    }
    if polygon.min_l(q) < -1e-12 {
        return Err(Error::PointOutsidePolygon(q.x, q.y));
    }
    if p == q {
        return Ok(0.0);
    }
    let cp = classify_chart(polygon, p);
    let cq = classify_chart(polygon, q);
    if cp != cq {
        return Err(Error::ChartMismatch);
    }
    match cp {
        Chart::Edge(i) => {
            let e = &polygon.edges[i];
            let (t1, s1) = (e.param_of(p), e.l(p));
            let (t2, s2) = (e.param_of(q), e.l(q));
            Ok((t2 - t1).abs() + (s2.max(0.0).sqrt() - s1.max(0.0).sqrt()).abs())
        }
        Chart::Vertex(i) => {
            let prev = polygon.prev_edge(i);
            let (t1, s1) = (
                polygon.edges[prev].l(p).max(0.0),
                polygon.edges[i].l(p).max(0.0),
            );
            let (t2, s2) = (
                polygon.edges[prev].l(q).max(0.0),
                polygon.edges[i].l(q).max(0.0),
            );
            Ok((t2.sqrt() - t1.sqrt()).abs() + (s2.sqrt() - s1.sqrt()).abs())
        }
        Chart::Bulk => Ok(segment_g0_length(polygon, p, q)),
    }
}

/// Global `g0`-distance approximation: Riemannian length of the straight
/// segment from `p` to `q`, by graded composite quadrature (the `1/sqrt(l)`
/// endpoint singularity is integrable). An upper bound for the true distance.
pub fn g0_distance_global(polygon: &Polygon, p: Point, q: Point) -> f64 {
    segment_g0_length(polygon, p, q)
}

fn segment_g0_length(polygon: &Polygon, p: Point, q: Point) -> f64 {
    let dir = q - p;
    // Graded subdivision toward both endpoints, 5-point Gauss per cell.
    const LEVELS: usize = 24;
    let mut knots = Vec::with_capacity(2 * LEVELS + 2);
    knots.push(0.0);
    for k in (1..=LEVELS).rev() {
        knots.push(0.5f64.powi(k as i32));
    }
    for k in 1..=LEVELS {
        knots.push(1.0 - 0.5f64.powi(k as i32));
    }
    knots.push(1.0);
    let gauss: [(f64, f64); 5] = [
        (-0.906179845938664, 0.236926885056189),
        (-0.538469310105683, 0.478628670499366),
        (0.0, 0.568888888888889),
        (0.538469310105683, 0.478628670499366),
        (0.906179845938664, 0.236926885056189),
    ];
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(node, weight) in &gauss {
            let t = mid + half * node;
            let x = p + dir * t;
            let mut quad = 0.0;
            for e in &polygon.edges {
                let nd = e.normal.dot(&dir);
                let l = e.l(x).max(1e-300);
                quad += nd * nd / l;
            }
            total += weight * half * quad.sqrt();
        }
    }
    total
}

/// Scalar field sampled at scattered points, optionally with derivatives.
#[derive(Debug, Clone)]
pub struct ScalarField2D {
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub grads: Option<Vec<Point>>,
    pub hessians: Option<Vec<Matrix2<f64>>>,
}

impl ScalarField2D {
    /// Sample closures on a uniform grid over the bounding box, clipped to the
    /// closed polygon.
    pub fn sample<F, G, H>(polygon: &Polygon, n: usize, f: F, grad: G, hess: H) -> Self
    where
        F: Fn(Point) -> f64,
        G: Fn(Point) -> Point,
        H: Fn(Point) -> Matrix2<f64>,
    {
        let (lo, hi) = polygon.bounding_box();
        let mut points = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                let x = Point::new(
                    lo.x + (hi.x - lo.x) * i as f64 / n as f64,
                    lo.y + (hi.y - lo.y) * j as f64 / n as f64,
                );
                if polygon.contains(x, 1e-12) {
                    points.push(x);
                }
            }
        }
        let values = points.iter().map(|&x| f(x)).collect();
        let grads = Some(points.iter().map(|&x| grad(x)).collect());
        let hessians = Some(points.iter().map(|&x| hess(x)).collect());
        Self {
            points,
            values,
            grads,
            hessians,
        }
    }

    pub fn sample_values_only<F>(polygon: &Polygon, n: usize, f: F) -> Self
    where
        F: Fn(Point) -> f64,
    {
        let mut field = Self::sample(polygon, n, f, |_| Point::new(0.0, 0.0), |_| Matrix2::zeros());
        field.grads = None;
        field.hessians = None;
        field
    }
}

/// Estimated pieces of the weighted norm
/// `||f||_{C^{0,a}} + ||rho Df||_{C^{0,a}} + ||rho^2 D^2 f||_{C^{0,a}}`.
#[derive(Debug, Clone, Serialize)]
pub struct WeightedNormReport {
    pub c0_alpha: f64,
    pub weighted_grad: f64,
    pub weighted_hess: f64,
    pub total: f64,
}

const MIN_PAIRS: usize = 16;
// Below this node count every pair is enumerated; above it, three dyadic
// near-diagonal bands plus a strided far-pair sweep.
const ALL_PAIRS_NODE_LIMIT: usize = 2500;

pub fn weighted_holder_norm(
    polygon: &Polygon,
    field: &ScalarField2D,
    alpha: f64,
) -> Result<WeightedNormReport> {
    let n = field.points.len();
    if n * (n - 1) / 2 < MIN_PAIRS {
        return Err(Error::MeshTooCoarse(n * (n.saturating_sub(1)) / 2, MIN_PAIRS));
    }
    let grads = field
        .grads
        .as_ref()
        .ok_or_else(|| Error::Config("weighted norm needs first derivatives".into()))?;
    let hessians = field
        .hessians
        .as_ref()
        .ok_or_else(|| Error::Config("weighted norm needs second derivatives".into()))?;

    let rho: Vec<f64> = field
        .points
        .iter()
        .map(|&x| polygon.rho_weight(x).unwrap_or(0.0))
        .collect();

    // The three sampled functions: f, rho*Df (2 comps), rho^2*D^2f (3 comps).
    let g0: Vec<[f64; 3]> = field.values.iter().map(|&v| [v, 0.0, 0.0]).collect();
    let g1: Vec<[f64; 3]> = grads
        .iter()
        .zip(&rho)
        .map(|(g, &r)| [r * g.x, r * g.y, 0.0])
        .collect();
    let g2: Vec<[f64; 3]> = hessians
        .iter()
        .zip(&rho)
        .map(|(h, &r)| [r * r * h[(0, 0)], r * r * h[(0, 1)], r * r * h[(1, 1)]])
        .collect();

    let mut sups = [0.0f64; 3];
    for i in 0..n {
        sups[0] = sups[0].max(norm3(&g0[i]));
        sups[1] = sups[1].max(norm3(&g1[i]));
        sups[2] = sups[2].max(norm3(&g2[i]));
    }

    let mut semis = [0.0f64; 3];
    let mut record = |i: usize, j: usize| {
        let d = (field.points[i] - field.points[j]).norm();
        if d <= 0.0 {
            return;
        }
        let da = d.powf(alpha);
        semis[0] = semis[0].max(diff3(&g0[i], &g0[j]) / da);
        semis[1] = semis[1].max(diff3(&g1[i], &g1[j]) / da);
        semis[2] = semis[2].max(diff3(&g2[i], &g2[j]) / da);
    };

    if n <= ALL_PAIRS_NODE_LIMIT {
        for i in 0..n {
            for j in (i + 1)..n {
                record(i, j);
            }
        }
    } else {
        // Minimal pair distance estimated from a strided sweep.
        let mut dmin = f64::INFINITY;
        let stride = (n / 200).max(1);
        for i in (0..n).step_by(stride) {
            for j in 0..n {
                if i != j {
                    let d = (field.points[i] - field.points[j]).norm();
                    if d > 0.0 {
                        dmin = dmin.min(d);
                    }
                }
            }
        }
        let band_hi = 8.0 * dmin;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (field.points[i] - field.points[j]).norm();
                if d >= dmin && d < band_hi {
                    record(i, j);
                }
            }
        }
        let far_stride = ((n * n / 2_000_000).max(1) as f64).sqrt().ceil() as usize;
        for i in (0..n).step_by(far_stride) {
            for j in (i + 1..n).step_by(far_stride) {
                record(i, j);
            }
        }
    }

    let c0_alpha = sups[0] + semis[0];
    let weighted_grad = sups[1] + semis[1];
    let weighted_hess = sups[2] + semis[2];
    Ok(WeightedNormReport {
        c0_alpha,
        weighted_grad,
        weighted_hess,
        total: c0_alpha + weighted_grad + weighted_hess,
    })
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn diff3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    norm3(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_polygon, unit_square};

    #[test]
    fn u0_square_values() {
        let p = unit_square();
        let v = u0_eval(&p, Point::new(0.5, 0.5)).unwrap();
        assert!((v - (-2.0 * 2f64.ln())).abs() < 1e-14);
        let v = u0_eval(&p, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(v, 0.0);
        let v = u0_eval(&p, Point::new(0.25, 0.5)).unwrap();
        let expect = xlogx(0.25) + xlogx(0.75) + 2.0 * xlogx(0.5);
        assert!((v - expect).abs() < 1e-14);
        assert!((expect - (-1.25549)).abs() < 1e-5);
    }

    #[test]
    fn g0_square_values() {
        let p = unit_square();
        let m = g0_hessian(&p, Point::new(0.5, 0.5)).unwrap();
        assert!((m[(0, 0)] - 4.0).abs() < 1e-14);
        assert!((m[(1, 1)] - 4.0).abs() < 1e-14);
        assert!(m[(0, 1)].abs() < 1e-14);
        let m = g0_hessian(&p, Point::new(0.5, 0.01)).unwrap();
        assert!((m[(1, 1)] - (1.0 / 0.01 + 1.0 / 0.99)).abs() < 1e-10);
        assert!((m[(0, 0)] - 4.0).abs() < 1e-14);
        assert!(g0_hessian(&p, Point::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn g0_triangle_centroid_matches_formula() {
        // Independent symbolic evaluation of sum n_i n_i^T / l_i at the centroid.
        let p = build_polygon(&[
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        let c = Point::new(1.0 / 3.0, 1.0 / 3.0);
        let m = g0_hessian(&p, c).unwrap();
        let s = 1.0 / 2f64.sqrt();
        // l for bottom edge = 1/3, hypotenuse = (1/3)/sqrt(2), left edge = 1/3.
        let l_hyp = (1.0 - 2.0 / 3.0) * s;
        let mut expect = Matrix2::zeros();
        expect += Matrix2::new(0.0, 0.0, 0.0, 1.0) * 3.0; // n = (0,1), l = 1/3
        expect += Matrix2::new(1.0, 0.0, 0.0, 0.0) * 3.0; // n = (1,0), l = 1/3
        expect += Matrix2::new(s * s, s * s, s * s, s * s) / l_hyp; // n = (-s,-s)
        assert!((m - expect).norm() < 1e-12);
    }

    #[test]
    fn g0_matches_finite_differences_of_u0() {
        let p = unit_square();
        let h = 1e-5;
        for &(x, y) in &[(0.5, 0.5), (0.3, 0.7), (0.1, 0.2)] {
            let pt = Point::new(x, y);
            let m = g0_hessian(&p, pt).unwrap();
            let f = |q: Point| u0_eval(&p, q).unwrap();
            let fxx = (f(Point::new(x + h, y)) - 2.0 * f(pt) + f(Point::new(x - h, y))) / (h * h);
            let fyy = (f(Point::new(x, y + h)) - 2.0 * f(pt) + f(Point::new(x, y - h))) / (h * h);
            let fxy = (f(Point::new(x + h, y + h)) - f(Point::new(x + h, y - h))
                - f(Point::new(x - h, y + h))
                + f(Point::new(x - h, y - h)))
                / (4.0 * h * h);
            assert!((m[(0, 0)] - fxx).abs() < 1e-4 * (1.0 + m[(0, 0)].abs()));
            assert!((m[(1, 1)] - fyy).abs() < 1e-4 * (1.0 + m[(1, 1)].abs()));
            assert!((m[(0, 1)] - fxy).abs() < 1e-4);
        }
    }

    #[test]
    fn det_g0_times_product_bounded_on_square() {
        // det(D^2 u0) * prod l_i stays bounded and away from zero: u0 solves
        // the equation class with bounded H.
        let p = unit_square();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 1..40 {
            for j in 1..40 {
                let x = Point::new(i as f64 / 40.0, j as f64 / 40.0);
                let m = g0_hessian(&p, x).unwrap();
                let val = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(0, 1)]) * p.l_product(x);
                lo = lo.min(val);
                hi = hi.max(val);
            }
        }
        assert!(lo > 0.5, "lo = {lo}");
        assert!(hi < 5.0, "hi = {hi}");
    }

    #[test]
    fn chart_distances() {
        let p = unit_square();
        let d = g0_distance(&p, Point::new(0.5, 0.01), Point::new(0.5, 0.04)).unwrap();
        assert!((d - 0.1).abs() < 1e-14);
        let d = g0_distance(&p, Point::new(0.01, 0.04), Point::new(0.04, 0.01)).unwrap();
        assert!((d - 0.2).abs() < 1e-14);
        let d = g0_distance(&p, Point::new(0.4, 0.6), Point::new(0.4, 0.6)).unwrap();
        assert_eq!(d, 0.0);
        assert!(matches!(
            g0_distance(&p, Point::new(0.5, 0.01), Point::new(0.01, 0.5)),
            Err(Error::ChartMismatch)
        ));
    }

    #[test]
    fn distance_equivalence_constants_finite() {
        // c |p - q| <= d_{g0} <= C sqrt(|p - q|) over random-ish pairs.
        let p = unit_square();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let mut cmin = f64::INFINITY;
        let mut cmax: f64 = 0.0;
        for _ in 0..1000 {
            let a = Point::new(rand01(), rand01());
            let b = Point::new(rand01(), rand01());
            if (a - b).norm() < 1e-6 {
                continue;
            }
            let d = g0_distance_global(&p, a, b);
            let euclid = (a - b).norm();
            cmin = cmin.min(d / euclid);
            cmax = cmax.max(d / euclid.sqrt());
        }
        assert!(cmin > 0.0 && cmin.is_finite());
        assert!(cmax.is_finite());
        assert!(cmin > 0.5, "lower equivalence constant too small: {cmin}");
    }

    #[test]
    fn weighted_norm_constant_field() {
        let p = unit_square();
        let f = ScalarField2D::sample(&p, 20, |_| 3.0, |_| Point::new(0.0, 0.0), |_| Matrix2::zeros());
        let rep = weighted_holder_norm(&p, &f, 0.5).unwrap();
        assert!((rep.c0_alpha - 3.0).abs() < 1e-14);
        assert_eq!(rep.weighted_grad, 0.0);
        assert_eq!(rep.weighted_hess, 0.0);
        assert!((rep.total - 3.0).abs() < 1e-14);
    }

    #[test]
    fn weighted_norm_linear_field() {
        // f = x1, alpha = 1/2: sup = 1 and the seminorm sup is attained at the
        // farthest horizontal pair, |dx|/sqrt(|dx|) = 1. Cross-checked against
        // a brute-force pair enumeration oracle.
        let p = unit_square();
        let f = ScalarField2D::sample(
            &p,
            16,
            |x| x.x,
            |_| Point::new(1.0, 0.0),
            |_| Matrix2::zeros(),
        );
        let rep = weighted_holder_norm(&p, &f, 0.5).unwrap();
        assert!((rep.c0_alpha - 2.0).abs() < 1e-12, "{}", rep.c0_alpha);

        // Oracle for the rho*Df part.
        let mut sup = 0.0f64;
        let mut semi = 0.0f64;
        let rho: Vec<f64> = f.points.iter().map(|&x| p.rho_weight(x).unwrap()).collect();
        for i in 0..f.points.len() {
            sup = sup.max(rho[i]);
            for j in (i + 1)..f.points.len() {
                let d = (f.points[i] - f.points[j]).norm();
                if d > 0.0 {
                    semi = semi.max((rho[i] - rho[j]).abs() / d.sqrt());
                }
            }
        }
        assert!((rep.weighted_grad - (sup + semi)).abs() < 1e-12);
    }

    #[test]
    fn weighted_norm_u0_stable_under_refinement() {
        // Finite total for f = u0; dense re-sampling changes it only modestly.
        let p = unit_square();
        let make = |n: usize| {
            ScalarField2D::sample(
                &p,
                n,
                |x| u0_eval(&p, x).unwrap(),
                |x| u0_gradient(&p, x).unwrap_or_else(|_| Point::new(0.0, 0.0)),
                |x| g0_hessian(&p, x).unwrap_or_else(|_| Matrix2::zeros()),
            )
        };
        let coarse = weighted_holder_norm(&p, &make(16), 0.5).unwrap();
        let fine = weighted_holder_norm(&p, &make(32), 0.5).unwrap();
        assert!(coarse.total.is_finite() && fine.total.is_finite());
        assert!(fine.total < 3.0 * coarse.total + 1.0);
    }

    #[test]
    fn mesh_too_coarse() {
        let p = unit_square();
        let f = ScalarField2D {
            points: vec![Point::new(0.5, 0.5), Point::new(0.6, 0.6)],
            values: vec![0.0, 0.0],
            grads: Some(vec![Point::new(0.0, 0.0); 2]),
            hessians: Some(vec![Matrix2::zeros(); 2]),
        };
        assert!(matches!(
            weighted_holder_norm(&p, &f, 0.5),
            Err(Error::MeshTooCoarse(_, _))
        ));
    }

    #[test]
    fn rho_vanishes_exactly_on_boundary() {
        let p = unit_square();
        for k in 0..50 {
            let t = k as f64 / 49.0;
            assert_eq!(p.rho_weight(Point::new(t, 0.0)).unwrap(), 0.0);
        }
        // rho grows like sqrt(dist) away from an edge midpoint.
        for k in 1..20 {
            let d = k as f64 / 40.0;
            let r = p.rho_weight(Point::new(0.5, d)).unwrap();
            assert!(r > 0.0);
            assert!(r <= (d as f64).sqrt());
        }
    }
}
