//! Tensor mesh over the polygon's bounding box, graded toward the sides, with
//! clipped (Shortley-Weller) difference stencils at nodes whose grid
//! neighbors fall outside the polygon. Boundary values come from the edge
//! traces, so the unknown is only the regular part v at interior nodes.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon};
use crate::potential::{g0_hessian, u0_eval};

/// Linear functional over the interior unknowns plus a constant carrying the
/// boundary-trace contributions.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Stencil {
    pub cols: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Stencil {
    pub fn apply(&self, v: &[f64]) -> f64 {
        self.constant + self.cols.iter().map(|&(c, w)| w * v[c]).sum::<f64>()
    }

    fn add_scaled(&mut self, other: &Stencil, w: f64) {
        self.constant += w * other.constant;
        for &(c, wc) in &other.cols {
            if let Some(e) = self.cols.iter_mut().find(|e| e.0 == c) {
                e.1 += w * wc;
            } else {
                self.cols.push((c, w * wc));
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeStencils {
    pub dxx: Stencil,
    pub dyy: Stencil,
    pub dxy: Stencil,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeshParams {
    /// Nodes per side are 2^level + 1.
    pub level: usize,
    /// 0 = uniform, 1 = full cosine grading toward the box sides.
    pub grading: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            level: 6,
            grading: 0.0,
        }
    }
}

/// One value source on a grid line: either an interior unknown or a known
/// boundary value at a clipped point.
enum Neighbor {
    Interior(usize, f64),
    Boundary(f64, f64),
}

impl Neighbor {
    fn dist(&self) -> f64 {
        match *self {
            Neighbor::Interior(_, d) | Neighbor::Boundary(_, d) => d,
        }
    }
    fn push(&self, st: &mut Stencil, w: f64) {
        match *self {
            Neighbor::Interior(c, _) => st.cols.push((c, w)),
            Neighbor::Boundary(val, _) => st.constant += w * val,
        }
    }
}

pub struct Mesh {
    pub polygon: Polygon,
    pub params: MeshParams,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Lexicographic grid index (iy * nx + ix) to unknown index.
    pub node_index: Vec<Option<usize>>,
    /// Unknown index to grid coordinates.
    pub nodes: Vec<(usize, usize)>,
    pub points: Vec<Point>,
    /// prod_i l_i at each interior node.
    pub weight: Vec<f64>,
    pub u0: Vec<f64>,
    pub g0: Vec<Matrix2<f64>>,
    pub stencils: Vec<NodeStencils>,
    /// v-trace at grid points lying on the boundary, NaN off the closure.
    pub grid_boundary_v: Vec<f64>,
    /// Band width of the Newton linearization in unknown ordering.
    pub bandwidth: usize,
}

fn graded_axis(lo: f64, hi: f64, n: usize, grading: f64) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n)
        .map(|k| {
            let xi = k as f64 / m;
            let cosm = 0.5 * (1.0 - (std::f64::consts::PI * xi).cos());
            lo + (hi - lo) * ((1.0 - grading) * xi + grading * cosm)
        })
        .collect()
}

/// Finds the boundary point on the segment from interior `x` toward `q`
/// (which lies outside or on the boundary), and the v-trace value there.
fn clip_to_boundary(
    polygon: &Polygon,
    boundary: &BoundaryData,
    x: Point,
    q: Point,
) -> Result<(f64, f64)> {
    let mut t_star = f64::INFINITY;
    let mut edge = usize::MAX;
    for (j, e) in polygon.edges.iter().enumerate() {
        let lx = e.l(x);
        let lq = e.l(q);
        if lq < lx && lx > 0.0 {
            let t = lx / (lx - lq);
            if t < t_star {
                t_star = t;
                edge = j;
            }
        }
    }
    if edge == usize::MAX || !(t_star > 0.0) || t_star > 1.0 + 1e-9 {
        return Err(Error::MeshTooCoarse(0, 1));
    }
    let t_star = t_star.min(1.0);
    let b = x + (q - x) * t_star;
    let param = polygon.edges[edge].param_of(b).clamp(0.0, polygon.edges[edge].length);
    let val = boundary.v_at(polygon, edge, param);
    Ok(((b - x).norm(), val))
}

/// v-trace at a grid point on the boundary of the polygon.
fn boundary_grid_value(polygon: &Polygon, boundary: &BoundaryData, x: Point) -> Option<f64> {
    let ls = polygon.l_values(x);
    let mut best: Option<(usize, f64)> = None;
    for (j, &l) in ls.iter().enumerate() {
        if l.abs() <= 1e-10 {
            let e = &polygon.edges[j];
            let t = e.param_of(x);
            if (-1e-9..=e.length + 1e-9).contains(&t)
                && best.map_or(true, |(_, bl)| l.abs() < bl)
            {
                best = Some((j, l.abs()));
            }
        }
    }
    best.map(|(j, _)| {
        let e = &polygon.edges[j];
        boundary.v_at(polygon, j, e.param_of(x).clamp(0.0, e.length))
    })
}

pub fn build_mesh(
    polygon: &Polygon,
    boundary: &BoundaryData,
    params: MeshParams,
) -> Result<Mesh> {
    let n_side = (1usize << params.level) + 1;
    let (lo, hi) = polygon.bounding_box();
    let xs = graded_axis(lo.x, hi.x, n_side, params.grading);
    let ys = graded_axis(lo.y, hi.y, n_side, params.grading);
    let nx = xs.len();
    let ny = ys.len();

    let mut node_index = vec![None; nx * ny];
    let mut nodes = Vec::new();
    let mut points = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let p = Point::new(xs[ix], ys[iy]);
            if polygon.min_l(p) > 1e-12 {
                node_index[iy * nx + ix] = Some(nodes.len());
                nodes.push((ix, iy));
                points.push(p);
            }
        }
    }
    if nodes.len() < 9 {
        return Err(Error::MeshTooCoarse(nodes.len(), 9));
    }

    let mut grid_boundary_v = vec![f64::NAN; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let gi = iy * nx + ix;
            if node_index[gi].is_none() {
                let p = Point::new(xs[ix], ys[iy]);
                if polygon.min_l(p) > -1e-10 {
                    if let Some(val) = boundary_grid_value(polygon, boundary, p) {
                        grid_boundary_v[gi] = val;
                    }
                }
            }
        }
    }

    let neighbor = |ix: usize, iy: usize, from: Point| -> Result<Neighbor> {
        let gi = iy * nx + ix;
        let q = Point::new(xs[ix], ys[iy]);
        if let Some(c) = node_index[gi] {
            Ok(Neighbor::Interior(c, (q - from).norm()))
        } else {
            let (d, val) = clip_to_boundary(polygon, boundary, from, q)?;
            Ok(Neighbor::Boundary(val, d))
        }
    };

    // Nonuniform central second difference from two neighbors.
    let second_diff = |left: &Neighbor, right: &Neighbor| -> Stencil {
        let (hl, hr) = (left.dist(), right.dist());
        let mut st = Stencil::default();
        left.push(&mut st, 2.0 / (hl * (hl + hr)));
        right.push(&mut st, 2.0 / (hr * (hl + hr)));
        st.cols.push((usize::MAX, -2.0 / (hl * hr)));
        st
    };
    // Nonuniform central first difference (exact for quadratics).
    let first_diff = |left: &Neighbor, right: &Neighbor| -> Stencil {
        let (hl, hr) = (left.dist(), right.dist());
        let mut st = Stencil::default();
        left.push(&mut st, -hr / (hl * (hl + hr)));
        right.push(&mut st, hl / (hr * (hl + hr)));
        st.cols.push((usize::MAX, (hr - hl) / (hl * hr)));
        st
    };

    let mut stencils = Vec::with_capacity(nodes.len());
    let mut weight = Vec::with_capacity(nodes.len());
    let mut u0v = Vec::with_capacity(nodes.len());
    let mut g0v = Vec::with_capacity(nodes.len());
    for (k, &(ix, iy)) in nodes.iter().enumerate() {
        let p = points[k];
        if ix == 0 || iy == 0 || ix + 1 == nx || iy + 1 == ny {
            return Err(Error::MeshTooCoarse(k, nodes.len()));
        }
        let xl = neighbor(ix - 1, iy, p)?;
        let xr = neighbor(ix + 1, iy, p)?;
        let yl = neighbor(ix, iy - 1, p)?;
        let yr = neighbor(ix, iy + 1, p)?;

        let mut dxx = second_diff(&xl, &xr);
        let mut dyy = second_diff(&yl, &yr);
        resolve_self(&mut dxx, k);
        resolve_self(&mut dyy, k);

        let dxy = cross_stencil(
            polygon,
            boundary,
            &node_index,
            &grid_boundary_v,
            &xs,
            &ys,
            ix,
            iy,
            k,
            &first_diff,
        )?;

        stencils.push(NodeStencils { dxx, dyy, dxy });
        weight.push(polygon.l_product(p));
        u0v.push(u0_eval(polygon, p)?);
        g0v.push(g0_hessian(polygon, p)?);
    }

    // Band width: max index distance across all stencils.
    let mut bandwidth = 0usize;
    for (k, st) in stencils.iter().enumerate() {
        for s in [&st.dxx, &st.dyy, &st.dxy] {
            for &(c, _) in &s.cols {
                bandwidth = bandwidth.max(k.abs_diff(c));
            }
        }
    }

    Ok(Mesh {
        polygon: polygon.clone(),
        params,
        xs,
        ys,
        node_index,
        nodes,
        points,
        weight,
        u0: u0v,
        g0: g0v,
        stencils,
        grid_boundary_v,
        bandwidth,
    })
}

fn resolve_self(st: &mut Stencil, k: usize) {
    for e in st.cols.iter_mut() {
        if e.0 == usize::MAX {
            e.0 = k;
        }
    }
}

/// Cross-derivative stencil. With all four diagonal grid corners inside the
/// closed polygon the symmetric 4-corner formula is used (exact for bilinear
/// v on any tensor grid); otherwise the outer x-difference of inner
/// y-differences, one-sided if only one side column is usable.
#[allow(clippy::too_many_arguments)]
fn cross_stencil(
    polygon: &Polygon,
    boundary: &BoundaryData,
    node_index: &[Option<usize>],
    grid_boundary_v: &[f64],
    xs: &[f64],
    ys: &[f64],
    ix: usize,
    iy: usize,
    k: usize,
    first_diff: &dyn Fn(&Neighbor, &Neighbor) -> Stencil,
) -> Result<Stencil> {
    let nx = xs.len();
    let value_at = |jx: usize, jy: usize| -> Option<(Option<usize>, f64)> {
        let gi = jy * nx + jx;
        if let Some(c) = node_index[gi] {
            Some((Some(c), 0.0))
        } else if grid_boundary_v[gi].is_finite() {
            Some((None, grid_boundary_v[gi]))
        } else {
            None
        }
    };

    let corners = [
        value_at(ix - 1, iy - 1),
        value_at(ix + 1, iy - 1),
        value_at(ix - 1, iy + 1),
        value_at(ix + 1, iy + 1),
    ];
    if corners.iter().all(|c| c.is_some()) {
        let denom = (xs[ix + 1] - xs[ix - 1]) * (ys[iy + 1] - ys[iy - 1]);
        let signs = [1.0, -1.0, -1.0, 1.0];
        let mut st = Stencil::default();
        for (c, s) in corners.iter().zip(signs) {
            let (col, val) = c.unwrap();
            let w = s / denom;
            match col {
                Some(col) => st.cols.push((col, w)),
                None => st.constant += w * val,
            }
        }
        return Ok(st);
    }

    // Inner y-difference along a usable column jx, at row iy.
    let dy_at = |jx: usize| -> Option<Stencil> {
        let center = value_at(jx, iy)?;
        let p = Point::new(xs[jx], ys[iy]);
        if center.0.is_none() {
            // Center of the inner difference must be an interior node.
            return None;
        }
        let mk = |jy: usize| -> Option<Neighbor> {
            let q = Point::new(xs[jx], ys[jy]);
            if let Some((Some(c), _)) = value_at(jx, jy) {
                Some(Neighbor::Interior(c, (q - p).norm()))
            } else {
                clip_to_boundary(polygon, boundary, p, q)
                    .ok()
                    .map(|(d, v)| Neighbor::Boundary(v, d))
            }
        };
        let below = mk(iy - 1)?;
        let above = mk(iy + 1)?;
        let mut st = first_diff(&below, &above);
        resolve_self(&mut st, center.0.unwrap());
        Some(st)
    };

    let center_dy = dy_at(ix);
    let left_dy = dy_at(ix - 1);
    let right_dy = dy_at(ix + 1);
    let hx_l = xs[ix] - xs[ix - 1];
    let hx_r = xs[ix + 1] - xs[ix];

    let mut st = Stencil::default();
    match (left_dy, center_dy, right_dy) {
        (Some(l), Some(c), Some(r)) => {
            st.add_scaled(&l, -hx_r / (hx_l * (hx_l + hx_r)));
            st.add_scaled(&c, (hx_r - hx_l) / (hx_l * hx_r));
            st.add_scaled(&r, hx_l / (hx_r * (hx_l + hx_r)));
        }
        (None, Some(c), Some(r)) => {
            st.add_scaled(&r, 1.0 / hx_r);
            st.add_scaled(&c, -1.0 / hx_r);
        }
        (Some(l), Some(c), None) => {
            st.add_scaled(&c, 1.0 / hx_l);
            st.add_scaled(&l, -1.0 / hx_l);
        }
        _ => {
            // Isolated node with no usable side columns: drop the cross term.
            let _ = k;
        }
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::assemble_dirichlet_data;
    use crate::geometry::{build_polygon, unit_square, RhsField};

    fn square_mesh(level: usize) -> (Polygon, BoundaryData, Mesh) {
        let p = unit_square();
        let rhs = RhsField::constant(1.0);
        let bd = assemble_dirichlet_data(&p, &rhs, &[0.0; 4]).unwrap();
        let mesh = build_mesh(&p, &bd, MeshParams { level, grading: 0.0 }).unwrap();
        (p, bd, mesh)
    }

    #[test]
    fn square_interior_count() {
        let (_, _, mesh) = square_mesh(4);
        // 17 points per side, 15^2 interior.
        assert_eq!(mesh.nodes.len(), 15 * 15);
        assert_eq!(mesh.bandwidth, 16);
        for &p in &mesh.points {
            assert!(mesh.polygon.is_strictly_interior(p));
        }
    }

    #[test]
    fn stencils_exact_on_quadratics() {
        // dxx, dyy, dxy applied to grid samples of x^2 + 3xy + 2y^2 plus the
        // boundary constants reproduce (2, 4, 3) at every node.
        let (p, bd, mesh) = square_mesh(4);
        let _ = (&p, &bd);
        let f = |q: Point| q.x * q.x + 3.0 * q.x * q.y + 2.0 * q.y * q.y;
        // Interior vector sampled from f.
        let v: Vec<f64> = mesh.points.iter().map(|&q| f(q)).collect();
        // Boundary constants in the stencils were built from the v-trace of
        // the H=1, a=0 problem (v = 0 on the boundary), so rebuild constants
        // for f by direct evaluation: apply stencil to (v - 0) and add exact
        // boundary f values where the stencil touched the boundary.
        // Instead, test on the subset of nodes whose stencils have no
        // boundary constant dependencies.
        let nx = mesh.xs.len();
        for (k, st) in mesh.stencils.iter().enumerate() {
            // Only nodes whose full 3x3 neighborhood is interior, so the
            // stencils carry no boundary-trace constants.
            let (ix, iy) = mesh.nodes[k];
            if ix < 2 || iy < 2 || ix > nx - 3 || iy > nx - 3 {
                continue;
            }
            assert!((st.dxx.apply(&v) - 2.0).abs() < 1e-9, "node {k}");
            assert!((st.dyy.apply(&v) - 4.0).abs() < 1e-9, "node {k}");
            assert!((st.dxy.apply(&v) - 3.0).abs() < 1e-9, "node {k}");
        }
    }

    #[test]
    fn graded_mesh_ratio_bounded() {
        let p = unit_square();
        let rhs = RhsField::constant(1.0);
        let bd = assemble_dirichlet_data(&p, &rhs, &[0.0; 4]).unwrap();
        let mesh = build_mesh(&p, &bd, MeshParams { level: 5, grading: 1.0 }).unwrap();
        for w in mesh.xs.windows(3) {
            let r = (w[2] - w[1]) / (w[1] - w[0]);
            assert!(r > 0.25 && r < 4.0, "ratio {r}");
        }
    }

    #[test]
    fn triangle_mesh_builds_with_clipping() {
        let p = build_polygon(&[
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        let s = 0.5f64.sqrt();
        let rhs = RhsField::new(move |x: Point| s + (0.5 - s) * (x.x + x.y), 0.4, 0.8, 1.0, 1.0);
        let bd = assemble_dirichlet_data(&p, &rhs, &[0.0; 3]).unwrap();
        let mesh = build_mesh(&p, &bd, MeshParams { level: 5, grading: 0.0 }).unwrap();
        assert!(mesh.nodes.len() > 300);
        // Every node keeps complete second-difference stencils.
        for st in &mesh.stencils {
            assert!(st.dxx.cols.len() + (st.dxx.constant != 0.0) as usize >= 2);
            assert!(st.dyy.cols.len() + (st.dyy.constant != 0.0) as usize >= 2);
        }
    }

    #[test]
    fn boundary_grid_values_filled_on_square() {
        let (_, _, mesh) = square_mesh(4);
        let nx = mesh.xs.len();
        for ix in 0..nx {
            assert!(mesh.grid_boundary_v[ix].is_finite(), "bottom row {ix}");
            assert!(mesh.grid_boundary_v[(nx - 1) * nx + ix].is_finite());
        }
    }
}
