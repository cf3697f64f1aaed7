//! Boundary-regularity diagnostics: the D / E / D1 / D2 functionals, decay
//! tables, sections of the normalized potential, Hessian comparability with
//! the reference metric, edge rescalings, vertex scaling roots, strict
//! convexity modulus, and a brute-force Monge-Ampere measure oracle.

use nalgebra::{Matrix2, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{edge_point, vertex_boundary_u, vertex_point, PotentialField};
use crate::geometry::Point;
use crate::potential::g0_hessian;
use crate::quad::adaptive_gauss;

/// Potential normalized at an interior base point: subtracts the supporting
/// plane, so the result vanishes at p and is nonnegative by convexity.
pub struct NormalizedFrame<'a, F: PotentialField + ?Sized> {
    pub field: &'a F,
    pub p: Point,
    pub u_p: f64,
    pub grad_p: Point,
}

pub fn normalize<F: PotentialField + ?Sized>(field: &F, p: Point) -> Result<NormalizedFrame<'_, F>> {
    if !field.polygon().is_strictly_interior(p) {
        return Err(Error::PointOutsidePolygon(p.x, p.y));
    }
    Ok(NormalizedFrame {
        field,
        p,
        u_p: field.u(p)?,
        grad_p: field.grad(p)?,
    })
}

impl<F: PotentialField + ?Sized> NormalizedFrame<'_, F> {
    pub fn eval(&self, x: Point) -> Result<f64> {
        Ok(self.field.u(x)? - self.u_p - self.grad_p.dot(&(x - self.p)))
    }

    /// Normalized value at a boundary point, using the trace.
    pub fn eval_boundary(&self, edge: usize, t: f64) -> f64 {
        let x = self.field.polygon().edges[edge].point_at(t);
        self.field.boundary_u(edge, t) - self.u_p - self.grad_p.dot(&(x - self.p))
    }
}

/// Donaldson's D at edge-chart point (t, s):
/// `D = [u(t,0) - u(t,s) + s u_2(t,s)] / s`, boundary value from the trace.
pub fn donaldson_d<F: PotentialField + ?Sized>(
    field: &F,
    edge: usize,
    t: f64,
    s: f64,
    margin: f64,
) -> Result<f64> {
    let polygon = field.polygon();
    let e = &polygon.edges[edge];
    if !(t >= margin && t <= e.length - margin) || !(s > 0.0) {
        return Err(Error::ChartMismatch);
    }
    let x = edge_point(polygon, edge, t, s);
    if !polygon.is_strictly_interior(x) {
        return Err(Error::PointOutsidePolygon(x.x, x.y));
    }
    let u_b = field.boundary_u(edge, t);
    let u_x = field.u(x)?;
    let u2 = e.normal.dot(&field.grad(x)?);
    Ok((u_b - u_x + s * u2) / s)
}

/// Donaldson's E at a vertex: normalization at (eps, eps) in the vertex
/// chart, `E = [u*(2 eps, 0) + u*(0, 2 eps)] / eps`.
pub fn donaldson_e<F: PotentialField + ?Sized>(
    field: &F,
    vertex: usize,
    eps: f64,
) -> Result<f64> {
    let polygon = field.polygon();
    let prev = polygon.prev_edge(vertex);
    let l1 = polygon.edges[vertex].length;
    let l2 = polygon.edges[prev].length;
    if !(eps > 0.0) || 2.0 * eps >= l1.min(l2) {
        return Err(Error::ChartMismatch);
    }
    let p = vertex_point(polygon, vertex, eps, eps);
    let frame = normalize(field, p)?;
    let b1 = vertex_point(polygon, vertex, 2.0 * eps, 0.0);
    let b2 = vertex_point(polygon, vertex, 0.0, 2.0 * eps);
    let s1 = vertex_boundary_u(field, vertex, 2.0 * eps, 0.0)
        - frame.u_p
        - frame.grad_p.dot(&(b1 - p));
    let s2 = vertex_boundary_u(field, vertex, 0.0, 2.0 * eps)
        - frame.u_p
        - frame.grad_p.dot(&(b2 - p));
    Ok((s1 + s2) / eps)
}

/// D1 and D2 at a vertex-chart point (p1, p2): normalized boundary values on
/// the two adjacent edges, scaled by the opposite coordinate.
pub fn donaldson_d1_d2<F: PotentialField + ?Sized>(
    field: &F,
    vertex: usize,
    p1: f64,
    p2: f64,
) -> Result<(f64, f64)> {
    let polygon = field.polygon();
    let prev = polygon.prev_edge(vertex);
    if !(p1 > 0.0 && p2 > 0.0)
        || p1 >= polygon.edges[vertex].length
        || p2 >= polygon.edges[prev].length
    {
        return Err(Error::ChartMismatch);
    }
    let p = vertex_point(polygon, vertex, p1, p2);
    let frame = normalize(field, p)?;
    let b1 = vertex_point(polygon, vertex, p1, 0.0);
    let b2 = vertex_point(polygon, vertex, 0.0, p2);
    let s1 =
        vertex_boundary_u(field, vertex, p1, 0.0) - frame.u_p - frame.grad_p.dot(&(b1 - p));
    let s2 =
        vertex_boundary_u(field, vertex, 0.0, p2) - frame.u_p - frame.grad_p.dot(&(b2 - p));
    Ok((s1 / p2, s2 / p1))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayRow {
    pub k: u32,
    pub s: f64,
    pub d: f64,
    pub scaled: f64,
}

/// Table of `s^{1-gamma} D` along the geometric ladder s = 2^-k.
pub fn decay_check<F: PotentialField + ?Sized>(
    field: &F,
    edge: usize,
    t: f64,
    gamma: f64,
    ks: std::ops::RangeInclusive<u32>,
    margin: f64,
) -> Result<Vec<DecayRow>> {
    let mut rows = Vec::new();
    for k in ks {
        let s = 0.5f64.powi(k as i32);
        let d = donaldson_d(field, edge, t, s, margin)?;
        rows.push(DecayRow {
            k,
            s,
            d,
            scaled: s.powf(1.0 - gamma) * d,
        });
    }
    Ok(rows)
}

/// Tail decreasing check used by the acceptance properties.
pub fn decay_trend_ok(rows: &[DecayRow]) -> bool {
    if rows.len() < 2 {
        return false;
    }
    let last = rows.last().unwrap().scaled;
    let first = rows.first().unwrap().scaled;
    let mut decreasing_tail = true;
    for w in rows[rows.len().saturating_sub(4)..].windows(2) {
        if w[1].scaled > w[0].scaled * (1.0 + 1e-9) {
            decreasing_tail = false;
        }
    }
    last < first && decreasing_tail
}

/// `Delta(delta, q) = u_t(q1 + delta, q2) - u_t(q1 - delta, q2)` in the edge
/// chart; nonnegative for convex u.
pub fn delta_integral<F: PotentialField + ?Sized>(
    field: &F,
    edge: usize,
    q1: f64,
    q2: f64,
    delta: f64,
) -> Result<f64> {
    let polygon = field.polygon();
    let e = &polygon.edges[edge];
    let a = edge_point(polygon, edge, q1 + delta, q2);
    let b = edge_point(polygon, edge, q1 - delta, q2);
    let ga = e.tangent.dot(&field.grad(a)?);
    let gb = e.tangent.dot(&field.grad(b)?);
    Ok(ga - gb)
}

#[derive(Debug, Clone, Serialize)]
pub struct SectionReport {
    pub eps: f64,
    pub h: f64,
    /// Edge-chart bounding box of the sampled section {u* < h}.
    pub t_min: f64,
    pub t_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub points_found: usize,
    /// Section stays inside {s > eps/2}.
    pub inclusion_holds: bool,
    /// Section reached the scan boundary; extent is a lower bound only.
    pub touches_boundary: bool,
}

/// Scans the sub-level set {u* < h} of the potential normalized at the
/// edge-chart point (t, eps).
pub fn section_extent<F: PotentialField + ?Sized>(
    field: &F,
    edge: usize,
    t: f64,
    eps: f64,
    h: f64,
    grid_n: usize,
) -> Result<SectionReport> {
    let polygon = field.polygon();
    let e_len = polygon.edges[edge].length;
    let p = edge_point(polygon, edge, t, eps);
    let frame = normalize(field, p)?;

    let s_lo = eps / 64.0;
    let s_hi = 0.45 * e_len;
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    let mut points_found = 0usize;
    let mut touches = false;
    for i in 0..=grid_n {
        let tt = e_len * i as f64 / grid_n as f64;
        for j in 0..=grid_n {
            // Geometric blend so small s values are resolved.
            let frac = j as f64 / grid_n as f64;
            let ss = s_lo * (s_hi / s_lo).powf(frac);
            let x = edge_point(polygon, edge, tt, ss);
            if !polygon.is_strictly_interior(x) {
                continue;
            }
            if frame.eval(x)? < h {
                points_found += 1;
                t_min = t_min.min(tt);
                t_max = t_max.max(tt);
                s_min = s_min.min(ss);
                s_max = s_max.max(ss);
                if i == 0 || i == grid_n || j == 0 || j == grid_n {
                    touches = true;
                }
            }
        }
    }
    let inclusion_holds = points_found > 0 && s_min > eps / 2.0;
    Ok(SectionReport {
        eps,
        h,
        t_min,
        t_max,
        s_min,
        s_max,
        points_found,
        inclusion_holds,
        touches_boundary: touches,
    })
}

/// Largest c (by bisection over h = c eps) for which the section inclusion
/// {u* < h} within {s > eps/2} holds at every eps in the ladder.
pub fn measured_section_constant<F: PotentialField + ?Sized>(
    field: &F,
    edge: usize,
    t: f64,
    eps_ladder: &[f64],
    grid_n: usize,
) -> Result<f64> {
    let mut c_global = f64::INFINITY;
    for &eps in eps_ladder {
        let mut lo = 0.0f64;
        let mut hi = 4.0f64;
        for _ in 0..24 {
            let mid = 0.5 * (lo + hi);
            let rep = section_extent(field, edge, t, eps, mid * eps, grid_n)?;
            if rep.inclusion_holds || rep.points_found == 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c_global = c_global.min(lo);
    }
    Ok(c_global)
}

#[derive(Debug, Clone, Serialize)]
pub struct HessianReport {
    pub c: f64,
    pub arg: (f64, f64),
    pub indefinite_at: Option<(f64, f64)>,
}

/// Comparability factor at one point via the symmetric similarity
/// `(D^2 u0)^{-1/2} D^2 u (D^2 u0)^{-1/2}`.
pub fn hessian_comparability_at<F: PotentialField + ?Sized>(field: &F, x: Point) -> Result<f64> {
    let g0 = g0_hessian(field.polygon(), x)?;
    let d2u = field.hess(x)?;
    comparability_factor(&g0, &d2u).ok_or(Error::IndefiniteHessian(0))
}

fn comparability_factor(g0: &Matrix2<f64>, d2u: &Matrix2<f64>) -> Option<f64> {
    let eig0 = SymmetricEigen::new(*g0);
    if eig0.eigenvalues.min() <= 0.0 {
        return None;
    }
    let q = eig0.eigenvectors;
    let inv_sqrt = Matrix2::from_diagonal(&eig0.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let s = q * inv_sqrt * q.transpose();
    let m = s * d2u * s;
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.max();
    if lmin <= 0.0 {
        return None;
    }
    Some(lmax.max(1.0 / lmin))
}

/// Global comparability over the solution's interior nodes, using the same
/// discrete Hessians the solver certified as SPD.
pub fn hessian_comparability(sol: &crate::solver::Solution) -> HessianReport {
    use crate::solver::node_hessian;
    let mut c = 1.0f64;
    let mut arg = (0.0, 0.0);
    for k in 0..sol.mesh.nodes.len() {
        let d2u = node_hessian(&sol.mesh, &sol.v, k);
        let g0 = sol.mesh.g0[k];
        match comparability_factor(&g0, &d2u) {
            Some(ck) => {
                if ck > c {
                    c = ck;
                    arg = (sol.mesh.points[k].x, sol.mesh.points[k].y);
                }
            }
            None => {
                return HessianReport {
                    c: f64::INFINITY,
                    arg,
                    indefinite_at: Some((sol.mesh.points[k].x, sol.mesh.points[k].y)),
                };
            }
        }
    }
    HessianReport {
        c,
        arg,
        indefinite_at: None,
    }
}

/// Rescaled frame at an edge-chart point (t0, s0):
/// `u~(x) = u*(t0 + lambda0 x1, s0 x2) / (s0 D)` with `lambda0 = sqrt(s0 D)`.
pub struct RescaledFrame<'a, F: PotentialField + ?Sized> {
    frame: NormalizedFrame<'a, F>,
    pub edge: usize,
    pub t0: f64,
    pub s0: f64,
    pub d: f64,
    pub lambda0: f64,
}

pub fn rescale_edge<F: PotentialField + ?Sized>(
    field: &F,
    edge: usize,
    t0: f64,
    s0: f64,
    margin: f64,
) -> Result<RescaledFrame<'_, F>> {
    let d = donaldson_d(field, edge, t0, s0, margin)?;
    let lambda0 = (s0 * d).sqrt();
    let polygon = field.polygon();
    let e_len = polygon.edges[edge].length;
    if t0 - lambda0 < 0.0
        || t0 + lambda0 > e_len
        || !polygon.is_strictly_interior(edge_point(polygon, edge, t0, 2.0 * s0))
    {
        return Err(Error::WindowExceedsDomain);
    }
    let p = edge_point(polygon, edge, t0, s0);
    let frame = normalize(field, p)?;
    Ok(RescaledFrame {
        frame,
        edge,
        t0,
        s0,
        d,
        lambda0,
    })
}

impl<F: PotentialField + ?Sized> RescaledFrame<'_, F> {
    pub fn eval(&self, x1: f64, x2: f64) -> Result<f64> {
        let t = self.t0 + self.lambda0 * x1;
        let norm = self.s0 * self.d;
        if x2 == 0.0 {
            let xb = self.frame.field.polygon().edges[self.edge].point_at(t);
            let ub = self.frame.field.boundary_u(self.edge, t);
            return Ok((ub - self.frame.u_p - self.frame.grad_p.dot(&(xb - self.frame.p))) / norm);
        }
        let x = edge_point(self.frame.field.polygon(), self.edge, t, self.s0 * x2);
        Ok(self.frame.eval(x)? / norm)
    }

    /// `max over [0,1] of u~(0, x2) - 1`; nonpositive means the vertical
    /// restriction stays below 1.
    pub fn vertical_margin(&self, n: usize) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..=n {
            let x2 = j as f64 / n as f64;
            worst = worst.max(self.eval(0.0, x2)? - 1.0);
        }
        Ok(worst)
    }

    /// Measured constant C in `u~(x1, 0) <= 1 + C x1 + (a_upper/2) x1^2`.
    pub fn horizontal_fit(&self, a_upper: f64, n: usize) -> Result<f64> {
        let mut c = f64::NEG_INFINITY;
        for j in 1..=n {
            let x1 = j as f64 / n as f64;
            let val = self.eval(x1, 0.0)?;
            c = c.max((val - 1.0 - 0.5 * a_upper * x1 * x1) / x1);
        }
        Ok(c)
    }
}

/// `F(zeta) = zeta ln((1 + zeta)/(1 - zeta))`, the closed form of the scaling
/// equation when u_11(t, 0) = 1/t.
pub fn scaling_f(zeta: f64) -> f64 {
    zeta * ((1.0 + zeta) / (1.0 - zeta)).ln()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingRoot {
    pub lambda: f64,
    pub zeta: f64,
    /// lambda / sqrt(p1 p2), the ratio the vertex lemma bounds.
    pub ratio: f64,
}

/// Solves `lambda int_{p1-lambda}^{p1+lambda} u11(t) dt = p1 d1` by bisection
/// on `zeta = lambda / p1` in (0, 1).
pub fn vertex_scaling_lambda(
    u11: &dyn Fn(f64) -> f64,
    p1: f64,
    p2: f64,
    d1: f64,
) -> Result<ScalingRoot> {
    let target = p1 * d1;
    let g = |zeta: f64| -> Result<f64> {
        let lambda = zeta * p1;
        let integral = adaptive_gauss(u11, p1 - lambda, p1 + lambda, 1e-12)?;
        Ok(lambda * integral - target)
    };
    let mut lo = 1e-12;
    let mut hi = 1.0 - 1e-9;
    if g(lo)? > 0.0 {
        return Err(Error::RootNotBracketed(target));
    }
    if g(hi)? < 0.0 {
        return Err(Error::RootNotBracketed(target));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let zeta = 0.5 * (lo + hi);
    let lambda = zeta * p1;
    Ok(ScalingRoot {
        lambda,
        zeta,
        ratio: lambda / (p1 * p2).sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusReport {
    pub m: f64,
    pub arg_p: (f64, f64),
    pub arg_x: (f64, f64),
}

/// Modulus of strict convexity: inf over p with dist >= 2 delta and x on the
/// delta level set of `u(x) - u(p) - Du(p).(x - p)`.
pub fn strict_convexity_modulus<F: PotentialField + ?Sized>(
    field: &F,
    delta: f64,
    grid_n: usize,
) -> Result<ModulusReport> {
    let polygon = field.polygon();
    let (lo, hi) = polygon.bounding_box();

    // Sample the delta level set of min_l by offsetting each edge inward and
    // clipping against all other offsets.
    let mut ring = Vec::new();
    let n_edges = polygon.num_edges();
    for i in 0..n_edges {
        let e = &polygon.edges[i];
        for k in 0..=96 {
            let t = e.length * k as f64 / 96.0;
            let x = edge_point(polygon, i, t, delta);
            let ls = polygon.l_values(x);
            if ls[i] > 0.0 && (ls[i] - delta).abs() < 1e-12 && ls.iter().all(|&l| l >= delta - 1e-12)
            {
                ring.push(x);
            }
        }
    }
    if ring.is_empty() {
        return Err(Error::Config(format!(
            "delta = {delta} exceeds the polygon inradius"
        )));
    }
    let ring_u: Vec<f64> = ring
        .iter()
        .map(|&x| field.u(x))
        .collect::<Result<_>>()?;

    let mut m = f64::INFINITY;
    let mut arg_p = (0.0, 0.0);
    let mut arg_x = (0.0, 0.0);
    for i in 0..=grid_n {
        for j in 0..=grid_n {
            let p = Point::new(
                lo.x + (hi.x - lo.x) * i as f64 / grid_n as f64,
                lo.y + (hi.y - lo.y) * j as f64 / grid_n as f64,
            );
            if polygon.min_l(p) < 2.0 * delta {
                continue;
            }
            let u_p = field.u(p)?;
            let g_p = field.grad(p)?;
            for (x, &u_x) in ring.iter().zip(&ring_u) {
                let val = u_x - u_p - g_p.dot(&(x - p));
                if val < m {
                    m = val;
                    arg_p = (p.x, p.y);
                    arg_x = (x.x, x.y);
                }
            }
        }
    }
    Ok(ModulusReport { m, arg_p, arg_x })
}

/// Brute-force Monge-Ampere measure of a rectangular patch: the subgradient
/// image area of the piecewise linear interpolant, summed over interior grid
/// vertices as convex-hull areas of the incident triangle gradients.
pub fn ma_measure_oracle<F: PotentialField + ?Sized>(
    field: &F,
    lo: Point,
    hi: Point,
    n: usize,
) -> Result<f64> {
    let nx = n + 1;
    let hx = (hi.x - lo.x) / n as f64;
    let hy = (hi.y - lo.y) / n as f64;
    let mut vals = vec![0.0f64; nx * nx];
    for j in 0..nx {
        for i in 0..nx {
            let x = Point::new(lo.x + hx * i as f64, lo.y + hy * j as f64);
            vals[j * nx + i] = field.u(x)?;
        }
    }
    // Two triangles per cell, split along the (lower-left, upper-right)
    // diagonal; gradients are affine in the vertex values.
    let tri_grad = |a: (usize, usize), b: (usize, usize), c: (usize, usize)| -> Point {
        let pa = Point::new(lo.x + hx * a.0 as f64, lo.y + hy * a.1 as f64);
        let pb = Point::new(lo.x + hx * b.0 as f64, lo.y + hy * b.1 as f64);
        let pc = Point::new(lo.x + hx * c.0 as f64, lo.y + hy * c.1 as f64);
        let (va, vb, vc) = (
            vals[a.1 * nx + a.0],
            vals[b.1 * nx + b.0],
            vals[c.1 * nx + c.0],
        );
        let d1 = pb - pa;
        let d2 = pc - pa;
        let det = d1.x * d2.y - d1.y * d2.x;
        Point::new(
            ((vb - va) * d2.y - (vc - va) * d1.y) / det,
            (-(vb - va) * d2.x + (vc - va) * d1.x) / det,
        )
    };

    let mut total = 0.0;
    for j in 1..n {
        for i in 1..n {
            // The six triangles incident to vertex (i, j) in this
            // triangulation.
            let tris = [
                ((i, j), (i + 1, j), (i + 1, j + 1)),
                ((i, j), (i + 1, j + 1), (i, j + 1)),
                ((i - 1, j), (i, j), (i, j + 1)),
                ((i - 1, j - 1), (i, j - 1), (i, j)),
                ((i - 1, j - 1), (i, j), (i - 1, j)),
                ((i, j - 1), (i + 1, j), (i, j)),
            ];
            let grads: Vec<Point> = tris.iter().map(|&(a, b, c)| tri_grad(a, b, c)).collect();
            total += convex_hull_area(&grads);
        }
    }
    Ok(total)
}

fn convex_hull_area(pts: &[Point]) -> f64 {
    let mut p: Vec<Point> = pts.to_vec();
    p.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    p.dedup_by(|a, b| (*a - *b).norm() < 1e-15);
    if p.len() < 3 {
        return 0.0;
    }
    let cross = |o: Point, a: Point, b: Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let half_hull = |pts: &mut dyn Iterator<Item = Point>| -> Vec<Point> {
        let mut hull: Vec<Point> = Vec::new();
        for pt in pts {
            while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0.0 {
                hull.pop();
            }
            hull.push(pt);
        }
        hull.pop();
        hull
    };
    let mut hull = half_hull(&mut p.iter().copied());
    hull.extend(half_hull(&mut p.iter().rev().copied()));
    if hull.len() < 3 {
        return 0.0;
    }
    let mut area = 0.0;
    for k in 0..hull.len() {
        let a = hull[k];
        let b = hull[(k + 1) % hull.len()];
        area += a.x * b.y - b.x * a.y;
    }
    0.5 * area.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::AnalyticField;
    use crate::geometry::unit_square;
    use crate::potential::{g0_hessian, u0_eval, u0_gradient, xlogx};

    /// Model field u = x2 ln x2 on the unit square: the edge-0 normal
    /// coordinate is s = x2, so D = 1 identically.
    fn edge_model() -> AnalyticField {
        AnalyticField::new(
            unit_square(),
            |x: Point| xlogx(x.y),
            |x: Point| Point::new(0.0, x.y.ln() + 1.0),
            |x: Point| Matrix2::new(0.0, 0.0, 0.0, 1.0 / x.y),
        )
    }

    /// Model field u = x1 ln x1 + x2 ln x2: gives E = 4 ln 2 and
    /// D1 = D2 = 1 at vertex 0.
    fn vertex_model() -> AnalyticField {
        AnalyticField::new(
            unit_square(),
            |x: Point| xlogx(x.x) + xlogx(x.y),
            |x: Point| Point::new(x.x.ln() + 1.0, x.y.ln() + 1.0),
            |x: Point| Matrix2::new(1.0 / x.x, 0.0, 0.0, 1.0 / x.y),
        )
    }

    fn with_affine(base: &AnalyticField, a: f64, b: Point) -> AnalyticField {
        let f = base.clone();
        let g = base.clone();
        let h = base.clone();
        AnalyticField::new(
            base.polygon.clone(),
            move |x: Point| f.u(x).unwrap() + a + b.dot(&x),
            move |x: Point| g.grad(x).unwrap() + b,
            move |x: Point| h.hess(x).unwrap(),
        )
    }

    #[test]
    fn d_is_one_on_model() {
        let field = edge_model();
        for &t in &[0.2, 0.5, 0.8] {
            for k in 1..=12 {
                let s = 0.5f64.powi(k);
                let d = donaldson_d(&field, 0, t, s, 0.1).unwrap();
                assert!((d - 1.0).abs() < 1e-12, "D = {d} at t={t}, s={s}");
            }
        }
    }

    #[test]
    fn d_rejects_out_of_margin() {
        let field = edge_model();
        assert!(matches!(
            donaldson_d(&field, 0, 0.05, 0.25, 0.1),
            Err(Error::ChartMismatch)
        ));
    }

    #[test]
    fn e_is_4ln2_on_model() {
        let field = vertex_model();
        for &eps in &[0.05, 0.1, 0.2] {
            let e = donaldson_e(&field, 0, eps).unwrap();
            assert!((e - 4.0 * 2.0f64.ln()).abs() < 1e-12, "E = {e} at eps={eps}");
        }
        assert!(matches!(
            donaldson_e(&field, 0, 0.5),
            Err(Error::ChartMismatch)
        ));
    }

    #[test]
    fn d1_d2_are_one_on_model() {
        // The field is the exact vertex model at vertex 0 only.
        let field = vertex_model();
        for &(p1, p2) in &[(0.3, 0.2), (0.1, 0.1), (0.45, 0.05)] {
            let (d1, d2) = donaldson_d1_d2(&field, 0, p1, p2).unwrap();
            assert!((d1 - 1.0).abs() < 1e-12, "D1 = {d1} at ({p1},{p2})");
            assert!((d2 - 1.0).abs() < 1e-12, "D2 = {d2} at ({p1},{p2})");
        }
    }

    #[test]
    fn functionals_affine_invariant() {
        let base = vertex_model();
        let shifted = with_affine(&base, 3.7, Point::new(-1.3, 2.9));
        let d0 = donaldson_d(&base, 0, 0.4, 0.125, 0.1).unwrap();
        let d1 = donaldson_d(&shifted, 0, 0.4, 0.125, 0.1).unwrap();
        assert!((d0 - d1).abs() < 1e-12);
        let e0 = donaldson_e(&base, 0, 0.1).unwrap();
        let e1 = donaldson_e(&shifted, 0, 0.1).unwrap();
        assert!((e0 - e1).abs() < 1e-12);
        let p0 = donaldson_d1_d2(&base, 0, 0.3, 0.2).unwrap();
        let p1 = donaldson_d1_d2(&shifted, 0, 0.3, 0.2).unwrap();
        assert!((p0.0 - p1.0).abs() < 1e-12 && (p0.1 - p1.1).abs() < 1e-12);
    }

    #[test]
    fn decay_table_on_model() {
        let field = edge_model();
        let rows = decay_check(&field, 0, 0.5, 0.5, 1..=12, 0.1).unwrap();
        assert_eq!(rows.len(), 12);
        for r in &rows {
            // D = 1, so scaled = s^{1/2}.
            assert!((r.scaled - r.s.sqrt()).abs() < 1e-12);
        }
        assert!(decay_trend_ok(&rows));
    }

    #[test]
    fn delta_integral_quadratic() {
        let field = AnalyticField::new(
            unit_square(),
            |x: Point| 0.5 * x.x * x.x + xlogx(x.y),
            |x: Point| Point::new(x.x, x.y.ln() + 1.0),
            |x: Point| Matrix2::new(1.0, 0.0, 0.0, 1.0 / x.y),
        );
        // u_t = x1 along edge 0, so the increment over 2 delta is 2 delta.
        let v = delta_integral(&field, 0, 0.5, 0.3, 0.1).unwrap();
        assert!((v - 0.2).abs() < 1e-13, "{v}");
    }

    #[test]
    fn section_of_paraboloid_is_a_disk() {
        let c = Point::new(0.5, 0.1);
        let field = AnalyticField::new(
            unit_square(),
            move |x: Point| 0.5 * (x - c).norm_squared(),
            move |x: Point| x - c,
            |_| Matrix2::identity(),
        );
        let eps = 0.1;
        let h = 0.001;
        let rep = section_extent(&field, 0, 0.5, eps, h, 128).unwrap();
        let r = (2.0 * h).sqrt();
        assert!(rep.inclusion_holds, "{rep:?}");
        assert!(!rep.touches_boundary);
        assert!((rep.t_min - (0.5 - r)).abs() < 0.01, "{rep:?}");
        assert!((rep.t_max - (0.5 + r)).abs() < 0.01, "{rep:?}");
        assert!(rep.s_min > eps - r - 0.01 && rep.s_max < eps + r + 0.01);
    }

    #[test]
    fn section_constant_of_paraboloid() {
        let c = Point::new(0.5, 0.1);
        let field = AnalyticField::new(
            unit_square(),
            move |x: Point| 0.5 * (x - c).norm_squared(),
            move |x: Point| x - c,
            |_| Matrix2::identity(),
        );
        // Inclusion needs sqrt(2 c eps) <= eps / 2, i.e. c <= eps / 8.
        let cstar = measured_section_constant(&field, 0, 0.5, &[0.1], 128).unwrap();
        assert!((cstar - 0.0125).abs() < 0.002, "{cstar}");
    }

    #[test]
    fn comparability_local_value() {
        let sq = unit_square();
        let p2 = sq.clone();
        let p3 = sq.clone();
        let field = AnalyticField::new(
            sq.clone(),
            move |x: Point| u0_eval(&sq, x).unwrap() + x.x * x.y,
            move |x: Point| u0_gradient(&p2, x).unwrap() + Point::new(x.y, x.x),
            move |x: Point| {
                g0_hessian(&p3, x).unwrap() + Matrix2::new(0.0, 1.0, 1.0, 0.0)
            },
        );
        let c = hessian_comparability_at(&field, Point::new(0.5, 0.5)).unwrap();
        assert!((c - 4.0 / 3.0).abs() < 1e-12, "{c}");
    }

    #[test]
    fn comparability_detects_indefinite() {
        let field = AnalyticField::new(
            unit_square(),
            |x: Point| x.x * x.x - x.y * x.y,
            |x: Point| Point::new(2.0 * x.x, -2.0 * x.y),
            |_| Matrix2::new(2.0, 0.0, 0.0, -2.0),
        );
        assert!(matches!(
            hessian_comparability_at(&field, Point::new(0.5, 0.5)),
            Err(Error::IndefiniteHessian(_))
        ));
    }

    #[test]
    fn rescaled_model_matches_closed_form() {
        // For the model, u~(0, x2) = x2 ln x2 - x2 + 1 and u~(0, 0) = 1.
        let field = edge_model();
        let fr = rescale_edge(&field, 0, 0.5, 0.05, 0.1).unwrap();
        assert!((fr.d - 1.0).abs() < 1e-12);
        assert!((fr.lambda0 - 0.05f64.sqrt()).abs() < 1e-12);
        assert!((fr.eval(0.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        for &x2 in &[0.1f64, 0.5, 1.0, 1.7] {
            let expect = x2 * x2.ln() - x2 + 1.0;
            let got = fr.eval(0.0, x2).unwrap();
            assert!((got - expect).abs() < 1e-12, "x2={x2}: {got} vs {expect}");
        }
        // The vertical restriction peaks at x2 = 0 with value 1.
        assert!(fr.vertical_margin(64).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rescale_rejects_large_windows() {
        let field = edge_model();
        // s0 = 0.45: the window [0, 2 s0] leaves the unit square.
        assert!(matches!(
            rescale_edge(&field, 0, 0.5, 0.45, 0.1),
            Err(Error::WindowExceedsDomain)
        ));
    }

    #[test]
    fn scaling_f_closed_form() {
        assert!((scaling_f(0.5) - 0.5 * 3.0f64.ln()).abs() < 1e-15);
        assert_eq!(scaling_f(0.0), 0.0);
    }

    #[test]
    fn scaling_root_for_log_model() {
        // u11 = 1/t gives lambda int = p1 F(zeta); with D1 = 1 the root
        // satisfies F(zeta) = 1.
        let root = vertex_scaling_lambda(&|t: f64| 1.0 / t, 0.25, 0.25, 1.0).unwrap();
        assert!((scaling_f(root.zeta) - 1.0).abs() < 1e-9, "{root:?}");
        assert!((root.lambda - root.zeta * 0.25).abs() < 1e-15);
        assert!((root.ratio - root.zeta).abs() < 1e-12);
    }

    #[test]
    fn scaling_root_unbracketed() {
        // Bounded u11 with a huge target: no root in (0, 1).
        assert!(matches!(
            vertex_scaling_lambda(&|_| 1.0, 0.25, 0.25, 1000.0),
            Err(Error::RootNotBracketed(_))
        ));
    }

    #[test]
    fn modulus_of_paraboloid() {
        let field = AnalyticField::new(
            unit_square(),
            |x: Point| 0.5 * x.norm_squared(),
            |x: Point| x,
            |_| Matrix2::identity(),
        );
        // Plane-excess of |x|^2/2 is |x - p|^2 / 2; the closest approach of
        // {min_l >= 2 delta} to {min_l = delta} is delta.
        let delta = 0.1;
        let rep = strict_convexity_modulus(&field, delta, 20).unwrap();
        assert!((rep.m - 0.5 * delta * delta).abs() < 1e-12, "{rep:?}");
    }

    #[test]
    fn ma_oracle_exact_for_identity_hessian() {
        let field = AnalyticField::new(
            unit_square(),
            |x: Point| 0.5 * x.norm_squared(),
            |x: Point| x,
            |_| Matrix2::identity(),
        );
        // det D^2 u = 1: the oracle equals the dual-cell union area exactly.
        let n = 8;
        let total = ma_measure_oracle(&field, Point::new(0.0, 0.0), Point::new(1.0, 1.0), n)
            .unwrap();
        let h = 1.0 / n as f64;
        assert!((total - (1.0 - h) * (1.0 - h)).abs() < 1e-12, "{total}");
    }

    #[test]
    fn convex_hull_area_square() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(0.5, 0.5),
        ];
        assert!((convex_hull_area(&pts) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn report_on_reference_square() {
        use crate::mesh::MeshParams;
        use crate::solver::{solve, SolverParams};
        let sq = unit_square();
        let rhs = crate::geometry::RhsField::constant(1.0);
        let sol = solve(
            &sq,
            &rhs,
            &[0.0; 4],
            MeshParams {
                level: 5,
                grading: 0.0,
            },
            SolverParams::default(),
        )
        .unwrap();
        let params = DiagnosticsParams::for_polygon(&sq, 0.5);
        let rep = compute_diagnostics(&sol, &params).unwrap();
        // For u0 on the square, D(t, s) = -ln(1 - s)/s: the ladder sup is
        // 2 ln 2 at s = 1/2.
        assert!(
            (rep.sup_d.value - 2.0 * 2.0f64.ln()).abs() < 0.05,
            "sup D = {}",
            rep.sup_d.value
        );
        assert!(rep.hessian.indefinite_at.is_none());
        assert!(rep.hessian.c < 1.1, "C = {}", rep.hessian.c);
        assert!(rep.decay_all_ok);
        assert!(rep.modulus.m > 0.0);
        assert!(rep.sup_e.value.is_finite() && rep.sup_d1.value.is_finite());
        assert_eq!(rep.decay.len(), 4);
        assert_eq!(rep.sections.len(), 4);
    }
}

/// Parameters of the aggregate report sweep.
#[derive(Debug, Clone)]
pub struct DiagnosticsParams {
    /// Decay exponent gamma in s^{1-gamma} D.
    pub gamma: f64,
    /// Level-set offset for the convexity modulus.
    pub delta: f64,
    /// Dyadic ladder range k_min..=k_max, s = 2^-k.
    pub k_range: (u32, u32),
    /// Tangential probe count per edge.
    pub t_probes: usize,
}

impl DiagnosticsParams {
    pub fn for_polygon(polygon: &crate::geometry::Polygon, alpha: f64) -> Self {
        Self {
            gamma: 0.5 * alpha,
            delta: 0.1 * polygon.min_edge_length(),
            k_range: (1, 12),
            t_probes: 33,
        }
    }
}

/// A supremum with the probe that attained it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ArgedSup {
    pub value: f64,
    /// Edge index for D, vertex index for E / D1 / D2.
    pub index: usize,
    /// (t, s) for D; (eps, eps) for E; (p1, p2) for D1 / D2.
    pub at: (f64, f64),
}

impl ArgedSup {
    fn empty() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            index: usize::MAX,
            at: (0.0, 0.0),
        }
    }
    fn take(&mut self, value: f64, index: usize, at: (f64, f64)) {
        if value > self.value {
            *self = Self { value, index, at };
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeDecay {
    pub edge: usize,
    pub t: f64,
    pub rows: Vec<DecayRow>,
    pub trend_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeRescale {
    pub edge: usize,
    pub t0: f64,
    pub s0: f64,
    pub d: f64,
    pub lambda0: f64,
    pub vertical_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub gamma: f64,
    pub sup_d: ArgedSup,
    pub sup_e: ArgedSup,
    pub sup_d1: ArgedSup,
    pub sup_d2: ArgedSup,
    pub hessian: HessianReport,
    pub decay: Vec<EdgeDecay>,
    pub decay_all_ok: bool,
    pub sections: Vec<SectionReport>,
    pub rescales: Vec<EdgeRescale>,
    pub modulus: ModulusReport,
}

/// Probe-ladder sweep of every boundary functional over a solved field.
pub fn compute_diagnostics(
    sol: &crate::solver::Solution,
    params: &DiagnosticsParams,
) -> Result<DiagnosticsReport> {
    let polygon = &sol.mesh.polygon;
    let n_edges = polygon.num_edges();
    let margin = 0.1 * polygon.min_edge_length();
    let (k_min, k_max) = params.k_range;

    let mut sup_d = ArgedSup::empty();
    for edge in 0..n_edges {
        let len = polygon.edges[edge].length;
        for i in 0..params.t_probes {
            let t = margin + (len - 2.0 * margin) * i as f64 / (params.t_probes - 1) as f64;
            for k in k_min..=k_max {
                let s = 0.5f64.powi(k as i32);
                match donaldson_d(sol, edge, t, s, margin) {
                    Ok(d) => sup_d.take(d, edge, (t, s)),
                    Err(Error::PointOutsidePolygon(_, _)) | Err(Error::ChartMismatch) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let mut sup_e = ArgedSup::empty();
    let mut sup_d1 = ArgedSup::empty();
    let mut sup_d2 = ArgedSup::empty();
    for v in 0..n_edges {
        let adj = polygon.edges[v]
            .length
            .min(polygon.edges[polygon.prev_edge(v)].length);
        for k in 1..=6u32 {
            let eps = 0.4 * adj * 0.5f64.powi(k as i32);
            match donaldson_e(sol, v, eps) {
                Ok(e) => sup_e.take(e, v, (eps, eps)),
                Err(Error::PointOutsidePolygon(_, _)) | Err(Error::ChartMismatch) => continue,
                Err(e) => return Err(e),
            }
            for k2 in 1..=6u32 {
                let p2 = 0.4 * adj * 0.5f64.powi(k2 as i32);
                match donaldson_d1_d2(sol, v, eps, p2) {
                    Ok((d1, d2)) => {
                        sup_d1.take(d1, v, (eps, p2));
                        sup_d2.take(d2, v, (eps, p2));
                    }
                    Err(Error::PointOutsidePolygon(_, _)) | Err(Error::ChartMismatch) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let hessian = hessian_comparability(sol);

    let mut decay = Vec::new();
    let mut decay_all_ok = true;
    for edge in 0..n_edges {
        let t = 0.5 * polygon.edges[edge].length;
        let rows = decay_check(sol, edge, t, params.gamma, k_min..=k_max, margin)?;
        let trend_ok = decay_trend_ok(&rows);
        decay_all_ok &= trend_ok;
        decay.push(EdgeDecay {
            edge,
            t,
            rows,
            trend_ok,
        });
    }

    let mut sections = Vec::new();
    for edge in 0..n_edges {
        let t = 0.5 * polygon.edges[edge].length;
        let eps = 0.05 * polygon.min_edge_length();
        sections.push(section_extent(sol, edge, t, eps, 0.25 * eps, 64)?);
    }

    let mut rescales = Vec::new();
    for edge in 0..n_edges {
        let t0 = 0.5 * polygon.edges[edge].length;
        let s0 = 0.02 * polygon.edges[edge].length;
        match rescale_edge(sol, edge, t0, s0, margin) {
            Ok(fr) => {
                let vertical_margin = fr.vertical_margin(32)?;
                rescales.push(EdgeRescale {
                    edge,
                    t0,
                    s0,
                    d: fr.d,
                    lambda0: fr.lambda0,
                    vertical_margin,
                });
            }
            Err(Error::WindowExceedsDomain) => continue,
            Err(e) => return Err(e),
        }
    }

    let modulus = strict_convexity_modulus(sol, params.delta, 32)?;

    Ok(DiagnosticsReport {
        gamma: params.gamma,
        sup_d,
        sup_e,
        sup_d1,
        sup_d2,
        hessian,
        decay,
        decay_all_ok,
        sections,
        rescales,
        modulus,
    })
}
