//! Damped Newton solver for the regularized interior problem
//! `F(v) = (prod l_i) det(D^2 u0 + D^2_h v) - H = 0`, with the singular part
//! u0 carried analytically and v discretized on the tensor mesh.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::boundary::{assemble_dirichlet_data, BoundaryData};
use crate::error::{Error, Result};
use crate::geometry::{Point, Polygon, RhsField};
use crate::linalg::BandMatrix;
use crate::mesh::{build_mesh, Mesh, MeshParams};
use crate::potential::{g0_hessian, u0_eval, u0_gradient};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverParams {
    pub tol: f64,
    pub max_iter: usize,
    pub damping_floor: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            damping_floor: (0.5f64).powi(20),
        }
    }
}

pub struct Solution {
    pub mesh: Mesh,
    pub boundary: BoundaryData,
    /// v at interior unknowns.
    pub v: Vec<f64>,
    /// v on the full grid: unknowns, boundary grid values, NaN outside.
    pub grid_v: Vec<f64>,
    pub converged: bool,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Discrete Hessian of u = u0 + v at node `k`.
pub fn node_hessian(mesh: &Mesh, v: &[f64], k: usize) -> Matrix2<f64> {
    let st = &mesh.stencils[k];
    let vxx = st.dxx.apply(v);
    let vyy = st.dyy.apply(v);
    let vxy = st.dxy.apply(v);
    let g = mesh.g0[k];
    Matrix2::new(
        g[(0, 0)] + vxx,
        g[(0, 1)] + vxy,
        g[(0, 1)] + vxy,
        g[(1, 1)] + vyy,
    )
}

/// Residual field of the regularized operator at every interior node.
pub fn discrete_operator(mesh: &Mesh, rhs: &RhsField, v: &[f64]) -> Vec<f64> {
    (0..mesh.nodes.len())
        .map(|k| {
            let m = node_hessian(mesh, v, k);
            mesh.weight[k] * (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(0, 1)])
                - rhs.value(mesh.points[k])
        })
        .collect()
}

fn sup_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn all_spd(mesh: &Mesh, v: &[f64]) -> Option<usize> {
    for k in 0..mesh.nodes.len() {
        let m = node_hessian(mesh, v, k);
        if !(m[(0, 0)] > 0.0 && m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(0, 1)] > 0.0) {
            return Some(k);
        }
    }
    None
}

pub fn solve(
    polygon: &Polygon,
    rhs: &RhsField,
    vertex_values: &[f64],
    mesh_params: MeshParams,
    solver_params: SolverParams,
) -> Result<Solution> {
    let boundary = assemble_dirichlet_data(polygon, rhs, vertex_values)?;
    let mesh = build_mesh(polygon, &boundary, mesh_params)?;

    let h_min = mesh
        .points
        .iter()
        .map(|&p| rhs.value(p))
        .fold(f64::INFINITY, f64::min);
    if !(h_min > 0.0) {
        return Err(Error::NonPositiveH(h_min));
    }

    let n = mesh.nodes.len();
    let mut v = vec![0.0f64; n];
    if let Some(k) = all_spd(&mesh, &v) {
        return Err(Error::IndefiniteHessianUnrecoverable(k));
    }
    let mut residual = discrete_operator(&mesh, rhs, &v);
    let mut res_norm = sup_norm(&residual);

    let mut iterations = 0usize;
    while res_norm > solver_params.tol && iterations < solver_params.max_iter {
        iterations += 1;
        let bw = mesh.bandwidth;
        let mut jac = BandMatrix::zeros(n, bw, bw);
        for k in 0..n {
            let m = node_hessian(&mesh, &v, k);
            let w = mesh.weight[k];
            let st = &mesh.stencils[k];
            for &(c, wxx) in &st.dxx.cols {
                jac.add(k, c, w * m[(1, 1)] * wxx);
            }
            for &(c, wyy) in &st.dyy.cols {
                jac.add(k, c, w * m[(0, 0)] * wyy);
            }
            for &(c, wxy) in &st.dxy.cols {
                jac.add(k, c, -2.0 * w * m[(0, 1)] * wxy);
            }
        }
        let lu = jac.factor()?;
        let neg_res: Vec<f64> = residual.iter().map(|&r| -r).collect();
        let delta = lu.solve(&neg_res);

        // Backtracking: keep every node Hessian SPD and decrease the
        // residual sup norm.
        let mut lambda = 1.0f64;
        let mut last_bad_node = None;
        loop {
            let trial: Vec<f64> = v
                .iter()
                .zip(&delta)
                .map(|(&a, &d)| a + lambda * d)
                .collect();
            match all_spd(&mesh, &trial) {
                Some(k) => last_bad_node = Some(k),
                None => {
                    let trial_res = discrete_operator(&mesh, rhs, &trial);
                    let trial_norm = sup_norm(&trial_res);
                    if trial_norm < res_norm || trial_norm <= solver_params.tol {
                        v = trial;
                        residual = trial_res;
                        res_norm = trial_norm;
                        break;
                    }
                }
            }
            lambda *= 0.5;
            if lambda < solver_params.damping_floor {
                return match last_bad_node {
                    Some(k) => Err(Error::IndefiniteHessianUnrecoverable(k)),
                    None => Err(Error::NewtonStalled(iterations, res_norm)),
                };
            }
        }
    }

    let converged = res_norm <= solver_params.tol;
    if !converged {
        return Err(Error::NewtonStalled(iterations, res_norm));
    }

    let nx = mesh.xs.len();
    let ny = mesh.ys.len();
    let mut grid_v = vec![f64::NAN; nx * ny];
    for (gi, val) in grid_v.iter_mut().enumerate() {
        if let Some(c) = mesh.node_index[gi] {
            *val = v[c];
        } else if mesh.grid_boundary_v[gi].is_finite() {
            *val = mesh.grid_boundary_v[gi];
        }
    }

    Ok(Solution {
        mesh,
        boundary,
        v,
        grid_v,
        converged,
        residual_norm: res_norm,
        iterations,
    })
}

/// Point evaluation of u = u0 + v and its derivatives; v is interpolated by
/// local cubics on the tensor grid, falling back to bilinear where the full
/// 4x4 block leaves the polygon.
#[derive(Debug, Clone, Copy)]
pub struct Eval {
    pub u: f64,
    pub grad: Point,
    pub hess: Matrix2<f64>,
    pub v: f64,
}

impl Solution {
    /// Builds a Solution directly from nodal v values (no solve); used to
    /// wrap closed-form fields in the same evaluation machinery.
    pub fn from_values(
        mesh: Mesh,
        boundary: BoundaryData,
        v: Vec<f64>,
        rhs: &RhsField,
    ) -> Self {
        let residual = discrete_operator(&mesh, rhs, &v);
        let res_norm = sup_norm(&residual);
        let nx = mesh.xs.len();
        let ny = mesh.ys.len();
        let mut grid_v = vec![f64::NAN; nx * ny];
        for (gi, val) in grid_v.iter_mut().enumerate() {
            if let Some(c) = mesh.node_index[gi] {
                *val = v[c];
            } else if mesh.grid_boundary_v[gi].is_finite() {
                *val = mesh.grid_boundary_v[gi];
            }
        }
        Self {
            mesh,
            boundary,
            v,
            grid_v,
            converged: true,
            residual_norm: res_norm,
            iterations: 0,
        }
    }

    pub fn evaluate(&self, x: Point, order: u8) -> Result<Eval> {
        let polygon = &self.mesh.polygon;
        if !polygon.is_strictly_interior(x) {
            return Err(Error::PointOutsidePolygon(x.x, x.y));
        }
        let (v, vg, vh) = self.interp_v(x)?;
        let u = u0_eval(polygon, x)? + v;
        let mut grad = Point::new(0.0, 0.0);
        let mut hess = Matrix2::zeros();
        if order >= 1 {
            grad = u0_gradient(polygon, x)? + vg;
        }
        if order >= 2 {
            hess = g0_hessian(polygon, x)? + vh;
        }
        Ok(Eval { u, grad, hess, v })
    }

    /// Interpolated (v, Dv, D^2 v) at x.
    fn interp_v(&self, x: Point) -> Result<(f64, Point, Matrix2<f64>)> {
        let xs = &self.mesh.xs;
        let ys = &self.mesh.ys;
        let nx = xs.len();
        let ny = ys.len();
        let ix = find_cell(xs, x.x);
        let iy = find_cell(ys, x.y);

        // Prefer a full 4x4 block around the cell.
        let bx = ix.saturating_sub(1).min(nx - 4);
        let by = iy.saturating_sub(1).min(ny - 4);
        let block_ok = (0..4).all(|b| {
            (0..4).all(|a| self.grid_v[(by + b) * nx + (bx + a)].is_finite())
        });
        if block_ok {
            let (lx, dlx, ddlx) = lagrange_basis(&xs[bx..bx + 4], x.x);
            let (ly, dly, ddly) = lagrange_basis(&ys[by..by + 4], x.y);
            let mut v = 0.0;
            let mut vx = 0.0;
            let mut vy = 0.0;
            let mut vxx = 0.0;
            let mut vyy = 0.0;
            let mut vxy = 0.0;
            for b in 0..4 {
                for a in 0..4 {
                    let val = self.grid_v[(by + b) * nx + (bx + a)];
                    v += lx[a] * ly[b] * val;
                    vx += dlx[a] * ly[b] * val;
                    vy += lx[a] * dly[b] * val;
                    vxx += ddlx[a] * ly[b] * val;
                    vyy += lx[a] * ddly[b] * val;
                    vxy += dlx[a] * dly[b] * val;
                }
            }
            return Ok((v, Point::new(vx, vy), Matrix2::new(vxx, vxy, vxy, vyy)));
        }

        // Fallback: bilinear on the cell corners that exist.
        let corners = [
            (ix, iy),
            (ix + 1, iy),
            (ix, iy + 1),
            (ix + 1, iy + 1),
        ];
        let vals: Vec<Option<f64>> = corners
            .iter()
            .map(|&(a, b)| {
                let val = self.grid_v[b * nx + a];
                val.is_finite().then_some(val)
            })
            .collect();
        if vals.iter().all(|c| c.is_some()) {
            let hx = xs[ix + 1] - xs[ix];
            let hy = ys[iy + 1] - ys[iy];
            let tx = (x.x - xs[ix]) / hx;
            let ty = (x.y - ys[iy]) / hy;
            let (v00, v10, v01, v11) = (
                vals[0].unwrap(),
                vals[1].unwrap(),
                vals[2].unwrap(),
                vals[3].unwrap(),
            );
            let v = v00 * (1.0 - tx) * (1.0 - ty)
                + v10 * tx * (1.0 - ty)
                + v01 * (1.0 - tx) * ty
                + v11 * tx * ty;
            let vx = ((v10 - v00) * (1.0 - ty) + (v11 - v01) * ty) / hx;
            let vy = ((v01 - v00) * (1.0 - tx) + (v11 - v10) * tx) / hy;
            let vxy = (v11 - v10 - v01 + v00) / (hx * hy);
            return Ok((v, Point::new(vx, vy), Matrix2::new(0.0, vxy, vxy, 0.0)));
        }

        // Last resort: nearest finite grid value.
        let mut best = (f64::INFINITY, 0.0);
        for b in 0..ny {
            for a in 0..nx {
                let val = self.grid_v[b * nx + a];
                if val.is_finite() {
                    let d = (Point::new(xs[a], ys[b]) - x).norm();
                    if d < best.0 {
                        best = (d, val);
                    }
                }
            }
        }
        Ok((best.1, Point::new(0.0, 0.0), Matrix2::zeros()))
    }
}

fn find_cell(grid: &[f64], x: f64) -> usize {
    let n = grid.len();
    match grid.binary_search_by(|g| g.partial_cmp(&x).unwrap()) {
        Ok(k) => k.min(n - 2),
        Err(k) => k.saturating_sub(1).min(n - 2),
    }
}

/// Values, first and second derivatives of the 4 cubic Lagrange basis
/// functions on the given nodes, at x.
fn lagrange_basis(nodes: &[f64], x: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let mut l = [0.0; 4];
    let mut dl = [0.0; 4];
    let mut ddl = [0.0; 4];
    for a in 0..4 {
        let mut denom = 1.0;
        for b in 0..4 {
            if b != a {
                denom *= nodes[a] - nodes[b];
            }
        }
        let others: Vec<f64> = (0..4).filter(|&b| b != a).map(|b| nodes[b]).collect();
        let (p, q, r) = (x - others[0], x - others[1], x - others[2]);
        l[a] = p * q * r / denom;
        dl[a] = (q * r + p * r + p * q) / denom;
        ddl[a] = 2.0 * (p + q + r) / denom;
    }
    (l, dl, ddl)
}
