//! Convex polygon `P = { l_i(x) > 0 }` with unit inward normals, edge
//! tangents, and the vertex compatibility condition on the right-hand side.

use nalgebra::Vector2;
use serde::Serialize;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Rotate a vector by -90 degrees: (x, y) -> (y, -x).
pub fn rot_minus_90(v: Point) -> Point {
    Point::new(v.y, -v.x)
}

/// Rotate a vector by +90 degrees: (x, y) -> (-y, x).
pub fn rot_plus_90(v: Point) -> Point {
    Point::new(-v.y, v.x)
}

/// One edge of the polygon together with its affine defining function
/// `l(x) = n . x - offset`, where `n` is the unit inward normal.
#[derive(Debug, Clone, Serialize)]
pub struct Edge {
    /// Start vertex `v_i` (the edge runs from `v_i` to `v_{i+1}`).
    pub start: Point,
    pub end: Point,
    /// Unit inward normal.
    pub normal: Point,
    /// Unit tangent, `rot_{-90}(normal)`; points from `start` to `end`.
    pub tangent: Point,
    /// Offset so that `l(x) = normal . x - offset`.
    pub offset: f64,
    /// Edge length.
    pub length: f64,
}

impl Edge {
    /// Affine defining function; vanishes on the edge, positive inside.
    /// Equals the distance to the supporting line (unit normal).
    pub fn l(&self, x: Point) -> f64 {
        self.normal.dot(&x) - self.offset
    }

    /// Point on the edge at arclength parameter `t` in `[0, length]`.
    pub fn point_at(&self, t: f64) -> Point {
        self.start + self.tangent * t
    }

    /// Arclength parameter of the orthogonal projection of `x` onto the edge line.
    pub fn param_of(&self, x: Point) -> f64 {
        (x - self.start).dot(&self.tangent)
    }
}

/// Convex polygon in counterclockwise orientation.
#[derive(Debug, Clone, Serialize)]
pub struct Polygon {
    pub vertices: Vec<Point>,
    pub edges: Vec<Edge>,
}

const COLLINEAR_TOL: f64 = 1e-12;

/// Build a polygon from counterclockwise, strictly convex vertices.
pub fn build_polygon(vertices: &[Point]) -> Result<Polygon> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::TooFewVertices(n));
    }
    // Signed area via the shoelace formula.
    let mut area2 = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        area2 += a.x * b.y - b.x * a.y;
    }
    if area2 <= 0.0 {
        return Err(Error::WrongOrientation);
    }
    let scale = area2.abs().sqrt();
    for i in 0..n {
        let prev = vertices[(i + n - 1) % n];
        let cur = vertices[i];
        let next = vertices[(i + 1) % n];
        let d1 = cur - prev;
        let d2 = next - cur;
        let cross = d1.x * d2.y - d1.y * d2.x;
        if cross.abs() <= COLLINEAR_TOL * scale * scale {
            return Err(Error::CollinearVertices((i + n - 1) % n, i, (i + 1) % n));
        }
        if cross < 0.0 {
            return Err(Error::NonConvex(i));
        }
    }
    let edges = (0..n)
        .map(|i| {
            let start = vertices[i];
            let end = vertices[(i + 1) % n];
            let dir = end - start;
            let length = dir.norm();
            let tangent = dir / length;
            let normal = rot_plus_90(tangent);
            Edge {
                start,
                end,
                normal,
                tangent,
                offset: normal.dot(&start),
                length,
            }
        })
        .collect();
    Ok(Polygon {
        vertices: vertices.to_vec(),
        edges,
    })
}

impl Polygon {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// All `l_i(x)` values.
    pub fn l_values(&self, x: Point) -> Vec<f64> {
        self.edges.iter().map(|e| e.l(x)).collect()
    }

    /// Product of all defining functions `l_1(x) ... l_N(x)`.
    pub fn l_product(&self, x: Point) -> f64 {
        self.edges.iter().map(|e| e.l(x)).product()
    }

    /// Smallest `l_i(x)`; negative outside the polygon.
    pub fn min_l(&self, x: Point) -> f64 {
        self.edges
            .iter()
            .map(|e| e.l(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: Point, tol: f64) -> bool {
        self.min_l(x) >= -tol
    }

    pub fn is_strictly_interior(&self, x: Point) -> bool {
        self.min_l(x) > 0.0
    }

    /// Index of the edge preceding vertex `i` (i.e. `e_{i-1}`, with wraparound).
    pub fn prev_edge(&self, i: usize) -> usize {
        (i + self.num_edges() - 1) % self.num_edges()
    }

    pub fn next_edge(&self, i: usize) -> usize {
        (i + 1) % self.num_edges()
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.length)
            .fold(f64::INFINITY, f64::min)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// The weight `rho(x) = sqrt(dist(x, e_1) ... dist(x, e_N))`; zero exactly
    /// on the boundary. Distances are the `l_i` themselves (unit normals).
    pub fn rho_weight(&self, x: Point) -> Result<f64> {
        let min = self.min_l(x);
        if min < -1e-12 {
            return Err(Error::PointOutsidePolygon(x.x, x.y));
        }
        let prod: f64 = self.edges.iter().map(|e| e.l(x).max(0.0)).product();
        Ok(prod.sqrt())
    }
}

/// Right-hand side data `H` with its bounds and Hoelder data.
#[derive(Clone)]
pub struct RhsField {
    pub eval: std::sync::Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    /// Lower bound `a`, `0 < a <= H`.
    pub lower: f64,
    /// Upper bound `A >= H`.
    pub upper: f64,
    /// Hoelder exponent `alpha` in (0,1).
    pub alpha: f64,
    /// Estimate of the seminorm `[H]_{C^{0,alpha}}`.
    pub holder_seminorm: f64,
}

impl std::fmt::Debug for RhsField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RhsField")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("alpha", &self.alpha)
            .field("holder_seminorm", &self.holder_seminorm)
            .finish()
    }
}

impl RhsField {
    pub fn new<F>(eval: F, lower: f64, upper: f64, alpha: f64, holder_seminorm: f64) -> Self
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: std::sync::Arc::new(eval),
            lower,
            upper,
            alpha,
            holder_seminorm,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, c, c, 0.5, 0.0)
    }

    pub fn value(&self, x: Point) -> f64 {
        (self.eval)(x)
    }

    /// Full `C^{0,alpha}` norm estimate: sup norm plus seminorm.
    pub fn holder_norm(&self) -> f64 {
        self.upper + self.holder_seminorm
    }
}

/// Default absolute tolerance for the vertex compatibility residuals.
pub const COMPAT_TOL: f64 = 1e-8;

/// Per-vertex compatibility residuals `r_i = H(v_i) - RHS(v_i)` where
/// `RHS(v_i) = det(n_{i-1}, n_i)^2 * prod_{j != i-1, i} l_j(v_i)`.
#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub residuals: Vec<f64>,
    pub required: Vec<f64>,
    pub compatible: bool,
    pub tolerance: f64,
}

/// The value `H` must take at vertex `i` for a Guillemin-type solution to exist.
pub fn compatibility_value(polygon: &Polygon, i: usize) -> f64 {
    let n = polygon.num_edges();
    let prev = polygon.prev_edge(i);
    let np = polygon.edges[prev].normal;
    let ni = polygon.edges[i].normal;
    let det = np.x * ni.y - ni.x * np.y;
    let v = polygon.vertices[i];
    let prod: f64 = (0..n)
        .filter(|&j| j != prev && j != i)
        .map(|j| polygon.edges[j].l(v))
        .product();
    det * det * prod
}

pub fn check_compatibility(polygon: &Polygon, rhs: &RhsField, tol: f64) -> CompatibilityReport {
    let required: Vec<f64> = (0..polygon.num_edges())
        .map(|i| compatibility_value(polygon, i))
        .collect();
    let residuals: Vec<f64> = polygon
        .vertices
        .iter()
        .zip(&required)
        .map(|(&v, &req)| rhs.value(v) - req)
        .collect();
    let compatible = residuals.iter().all(|r| r.abs() <= tol);
    CompatibilityReport {
        residuals,
        required,
        compatible,
        tolerance: tol,
    }
}

/// Unit square `(0,0), (1,0), (1,1), (0,1)`. The workhorse test domain:
/// `l = { x2, 1-x1, 1-x2, x1 }`.
pub fn unit_square() -> Polygon {
    build_polygon(&[
        Point::new(0.0, 0.0),
        Point::new(1.0, 0.0),
        Point::new(1.0, 1.0),
        Point::new(0.0, 1.0),
    ])
    .expect("unit square is valid")
}
