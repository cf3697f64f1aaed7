//! Common interface over potentials: solved fields and closed-form model
//! fields share the diagnostics code. Also houses the edge- and
//! vertex-adapted coordinate maps used by the boundary functionals.

use std::sync::Arc;

use nalgebra::Matrix2;

use crate::error::Result;
use crate::geometry::{Point, Polygon};
use crate::solver::Solution;

pub trait PotentialField {
    fn polygon(&self) -> &Polygon;
    fn u(&self, x: Point) -> Result<f64>;
    fn grad(&self, x: Point) -> Result<Point>;
    fn hess(&self, x: Point) -> Result<Matrix2<f64>>;
    /// u at a boundary point given by edge index and edge parameter. Must be
    /// the analytic/trace value, not interior extrapolation.
    fn boundary_u(&self, edge: usize, t: f64) -> f64;
}

impl PotentialField for Solution {
    fn polygon(&self) -> &Polygon {
        &self.mesh.polygon
    }
    fn u(&self, x: Point) -> Result<f64> {
        Ok(self.evaluate(x, 0)?.u)
    }
    fn grad(&self, x: Point) -> Result<Point> {
        Ok(self.evaluate(x, 1)?.grad)
    }
    fn hess(&self, x: Point) -> Result<Matrix2<f64>> {
        Ok(self.evaluate(x, 2)?.hess)
    }
    fn boundary_u(&self, edge: usize, t: f64) -> f64 {
        self.boundary.u_at(edge, t)
    }
}

/// Closed-form potential given by closures, finite on the closed polygon.
#[derive(Clone)]
pub struct AnalyticField {
    pub polygon: Polygon,
    f: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    df: Arc<dyn Fn(Point) -> Point + Send + Sync>,
    d2f: Arc<dyn Fn(Point) -> Matrix2<f64> + Send + Sync>,
}

impl AnalyticField {
    pub fn new<F, G, H>(polygon: Polygon, f: F, df: G, d2f: H) -> Self
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
        G: Fn(Point) -> Point + Send + Sync + 'static,
        H: Fn(Point) -> Matrix2<f64> + Send + Sync + 'static,
    {
        Self {
            polygon,
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
        }
    }
}

impl PotentialField for AnalyticField {
    fn polygon(&self) -> &Polygon {
        &self.polygon
    }
    fn u(&self, x: Point) -> Result<f64> {
        Ok((self.f)(x))
    }
    fn grad(&self, x: Point) -> Result<Point> {
        Ok((self.df)(x))
    }
    fn hess(&self, x: Point) -> Result<Matrix2<f64>> {
        Ok((self.d2f)(x))
    }
    fn boundary_u(&self, edge: usize, t: f64) -> f64 {
        (self.f)(self.polygon.edges[edge].point_at(t))
    }
}

/// Edge-adapted chart: x = v_i + t T_i + s n_i, with t along the edge and
/// s the inward distance.
pub fn edge_point(polygon: &Polygon, edge: usize, t: f64, s: f64) -> Point {
    let e = &polygon.edges[edge];
    e.start + e.tangent * t + e.normal * s
}

/// Tangential and normal derivative components in the edge chart.
pub fn edge_frame(polygon: &Polygon, edge: usize) -> (Point, Point) {
    let e = &polygon.edges[edge];
    (e.tangent, e.normal)
}

/// Vertex-adapted chart at vertex i: xi1 runs along edge i, xi2 along edge
/// i-1 into the polygon.
pub fn vertex_axes(polygon: &Polygon, vertex: usize) -> (Point, Point) {
    let prev = polygon.prev_edge(vertex);
    (
        polygon.edges[vertex].tangent,
        -polygon.edges[prev].tangent,
    )
}

pub fn vertex_point(polygon: &Polygon, vertex: usize, xi1: f64, xi2: f64) -> Point {
    let (e1, e2) = vertex_axes(polygon, vertex);
    polygon.vertices[vertex] + e1 * xi1 + e2 * xi2
}

/// Boundary value in the vertex chart: (xi1, 0) is on edge i at parameter
/// xi1, and (0, xi2) on edge i-1 at parameter L_{i-1} - xi2.
pub fn vertex_boundary_u<F: PotentialField + ?Sized>(
    field: &F,
    vertex: usize,
    xi1: f64,
    xi2: f64,
) -> f64 {
    let polygon = field.polygon();
    if xi2 == 0.0 {
        field.boundary_u(vertex, xi1)
    } else {
        debug_assert_eq!(xi1, 0.0);
        let prev = polygon.prev_edge(vertex);
        field.boundary_u(prev, polygon.edges[prev].length - xi2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::unit_square;
    use crate::potential::xlogx;

    #[test]
    fn square_charts() {
        let p = unit_square();
        let x = edge_point(&p, 0, 0.3, 0.1);
        assert!((x - Point::new(0.3, 0.1)).norm() < 1e-15);
        let x = edge_point(&p, 2, 0.3, 0.1);
        // Edge 2 runs from (1,1) to (0,1) with inward normal (0,-1).
        assert!((x - Point::new(0.7, 0.9)).norm() < 1e-15);
        let x = vertex_point(&p, 0, 0.2, 0.3);
        assert!((x - Point::new(0.2, 0.3)).norm() < 1e-15);
        let x = vertex_point(&p, 2, 0.2, 0.3);
        // Vertex 2 = (1,1); edge 2 tangent (-1,0), edge 1 runs upward.
        assert!((x - Point::new(0.8, 0.7)).norm() < 1e-15);
    }

    #[test]
    fn analytic_field_boundary() {
        let p = unit_square();
        let f = AnalyticField::new(
            p.clone(),
            |x: Point| xlogx(x.x) + xlogx(x.y),
            |x: Point| Point::new(x.x.ln() + 1.0, x.y.ln() + 1.0),
            |x: Point| Matrix2::new(1.0 / x.x, 0.0, 0.0, 1.0 / x.y),
        );
        assert_eq!(f.boundary_u(0, 0.5), xlogx(0.5));
        assert!((vertex_boundary_u(&f, 0, 0.25, 0.0) - xlogx(0.25)).abs() < 1e-15);
        assert!((vertex_boundary_u(&f, 0, 0.0, 0.25) - xlogx(0.25)).abs() < 1e-15);
    }
}
