//! Upper and lower barriers at a corner for Hoelder right-hand sides, and the
//! comparison / Lipschitz checks they certify on solved fields.
//!
//! Everything lives in the vertex chart (xi1 along the edge at the vertex,
//! xi2 along the previous edge). The potential is split as
//! `u = xi1 ln xi1 + xi2 ln xi2 + v(xi1, xi2)`; the remainder v absorbs the
//! smooth contributions of the far edges and is measured, not assumed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{vertex_boundary_u, vertex_point, PotentialField};
use crate::geometry::RhsField;
use crate::potential::xlogx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Upper,
    Lower,
}

/// Which chart variable carries the explicit profile; the other carries the
/// boundary trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// Profile in xi2, trace v(xi1, 0): the barrier U+/-.
    X2,
    /// Profile in xi1, trace v(0, xi2): the barrier U-hat.
    X1,
}

#[derive(Debug, Clone, Serialize)]
pub struct Barrier {
    pub vertex: usize,
    pub side: Side,
    pub orientation: Orientation,
    pub alpha: f64,
    /// Linear coefficient A+/-.
    pub a_const: f64,
    /// Profile coefficient B+/- = (2/a) ||H||_{C^{0,alpha}}.
    pub b_const: f64,
    /// Box radius r+/-.
    pub r: f64,
    /// The measured constants that entered A.
    pub v_sup: f64,
    pub vn_sup_inner: f64,
    pub vn_sup_outer: f64,
    /// The three lower bounds whose max is A.
    pub a_bounds: [f64; 3],
}

/// Chart remainder v(xi1, xi2) = u - xi1 ln xi1 - xi2 ln xi2.
pub fn chart_v<F: PotentialField + ?Sized>(
    field: &F,
    vertex: usize,
    xi1: f64,
    xi2: f64,
) -> Result<f64> {
    let u = if xi1 == 0.0 || xi2 == 0.0 {
        vertex_boundary_u(field, vertex, xi1, xi2)
    } else {
        field.u(vertex_point(field.polygon(), vertex, xi1, xi2))?
    };
    Ok(u - xlogx(xi1) - xlogx(xi2))
}

fn oriented(orientation: Orientation, xi1: f64, xi2: f64) -> (f64, f64) {
    match orientation {
        Orientation::X2 => (xi1, xi2),
        Orientation::X1 => (xi2, xi1),
    }
}

/// Trace term of the barrier: v on the chart axis carrying coordinate q1.
fn trace_v<F: PotentialField + ?Sized>(
    field: &F,
    vertex: usize,
    orientation: Orientation,
    q1: f64,
) -> Result<f64> {
    let (xi1, xi2) = oriented(orientation, q1, 0.0);
    chart_v(field, vertex, xi1, xi2)
}

impl Barrier {
    /// Barrier value at chart point (xi1, xi2); q2 is the profile variable.
    pub fn eval<F: PotentialField + ?Sized>(
        &self,
        field: &F,
        xi1: f64,
        xi2: f64,
    ) -> Result<f64> {
        let (q1, q2) = oriented(self.orientation, xi1, xi2);
        let sign = match self.side {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        };
        let profile = sign
            * (self.a_const * q2
                - self.b_const * q2.powf(1.0 + self.alpha) / (self.alpha * (1.0 + self.alpha)));
        Ok(profile + xlogx(xi1) + xlogx(xi2) + trace_v(field, self.vertex, self.orientation, q1)?)
    }

    /// Signed comparison margin: (U+ - u) for the upper side, (u - U-) for
    /// the lower; both must be nonnegative on the box.
    pub fn margin<F: PotentialField + ?Sized>(
        &self,
        field: &F,
        xi1: f64,
        xi2: f64,
    ) -> Result<f64> {
        let b = self.eval(field, xi1, xi2)?;
        // On the chart axes the point lies on the polygon boundary, where u
        // is the given trace; interior points go through the field.
        let u = if xi1 == 0.0 || xi2 == 0.0 {
            xlogx(xi1) + xlogx(xi2) + chart_v(field, self.vertex, xi1, xi2)?
        } else {
            field.u(vertex_point(field.polygon(), self.vertex, xi1, xi2))?
        };
        Ok(match self.side {
            Side::Upper => b - u,
            Side::Lower => u - b,
        })
    }

    /// Samples the explicit chart Hessian terms of the barrier; convexity of
    /// the profile part needs `1/q2 - B q2^{alpha-1} > 0` on (0, r].
    pub fn profile_convex_on_box(&self) -> bool {
        let n = 256;
        for k in 1..=n {
            let q2 = self.r * k as f64 / n as f64;
            if 1.0 / q2 - self.b_const * q2.powf(self.alpha - 1.0) <= 0.0 {
                return false;
            }
        }
        true
    }
}

pub fn build_barrier<F: PotentialField + ?Sized>(
    field: &F,
    vertex: usize,
    rhs: &RhsField,
    side: Side,
    orientation: Orientation,
    mesh_h: f64,
) -> Result<Barrier> {
    let alpha = rhs.alpha;
    let a = rhs.lower;
    if !(a > 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!(
            "barrier needs a positive lower bound and alpha in (0,1], got a = {a}, alpha = {alpha}"
        )));
    }
    let h_norm = rhs.holder_norm();
    let b_const = 2.0 / a * h_norm;

    // Two-term radius formula; the box must stay small, so the min is taken.
    let r_candidates = [
        (a / (4.0 * (h_norm + 1.0))).powf(1.0 / alpha),
        (alpha * (alpha + 1.0) / 2.0).powf(1.0 / alpha),
    ];
    let polygon = field.polygon();
    let prev = polygon.prev_edge(vertex);
    let chart = 0.45 * polygon.edges[vertex].length.min(polygon.edges[prev].length);
    let r = r_candidates[0].min(r_candidates[1]).min(chart);
    if r < 4.0 * mesh_h {
        return Err(Error::RadiusCollapse(r, (r / mesh_h) as usize));
    }

    // Measured constants entering A: sup |v| over the box, and sup of the
    // profile-direction derivative of v on the two trace-parallel sides.
    let n = 48;
    let mut v_sup = 0.0f64;
    for i in 0..=n {
        for j in 0..=n {
            let xi1 = r * i as f64 / n as f64;
            let xi2 = r * j as f64 / n as f64;
            v_sup = v_sup.max(chart_v(field, vertex, xi1, xi2)?.abs());
        }
    }
    // Derivative along the inner side q1 = 0 (on the trace edge itself) and
    // the outer side q1 = r.
    let mut vn_inner = 0.0f64;
    let mut vn_outer = 0.0f64;
    for j in 1..n {
        let q2 = r * j as f64 / n as f64;
        vn_inner = vn_inner.max(dv_along_profile(field, vertex, orientation, 0.0, q2, r)?.abs());
        vn_outer = vn_outer.max(dv_along_profile(field, vertex, orientation, r, q2, r)?.abs());
    }

    let curv = b_const * r.powf(alpha) / (alpha * (1.0 + alpha));
    let a_bounds = [
        vn_inner + curv,
        vn_outer + curv,
        2.0 * v_sup / r + curv,
    ];
    let a_const = a_bounds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    Ok(Barrier {
        vertex,
        side,
        orientation,
        alpha,
        a_const,
        b_const,
        r,
        v_sup,
        vn_sup_inner: vn_inner,
        vn_sup_outer: vn_outer,
        a_bounds,
    })
}

/// Central difference of v in the profile direction q2 at fixed q1.
fn dv_along_profile<F: PotentialField + ?Sized>(
    field: &F,
    vertex: usize,
    orientation: Orientation,
    q1: f64,
    q2: f64,
    r: f64,
) -> Result<f64> {
    let d = (r / 1024.0).min(0.4 * q2);
    let (a1, a2) = oriented(orientation, q1, q2 + d);
    let (b1, b2) = oriented(orientation, q1, q2 - d);
    let va = chart_v(field, vertex, a1, a2)?;
    let vb = chart_v(field, vertex, b1, b2)?;
    Ok((va - vb) / (2.0 * d))
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub min_margin: f64,
    pub arg: (f64, f64),
    pub nodes_checked: usize,
}

/// Min over a box grid of the signed comparison margin.
pub fn verify_barrier<F: PotentialField + ?Sized>(
    field: &F,
    barrier: &Barrier,
    n_grid: usize,
) -> Result<BarrierReport> {
    let mut min_margin = f64::INFINITY;
    let mut arg = (0.0, 0.0);
    let mut nodes = 0usize;
    for i in 0..=n_grid {
        for j in 0..=n_grid {
            let xi1 = barrier.r * i as f64 / n_grid as f64;
            let xi2 = barrier.r * j as f64 / n_grid as f64;
            if xi1 == 0.0 && xi2 == 0.0 {
                continue;
            }
            let m = barrier.margin(field, xi1, xi2)?;
            nodes += 1;
            if m < min_margin {
                min_margin = m;
                arg = (xi1, xi2);
            }
        }
    }
    Ok(BarrierReport {
        min_margin,
        arg,
        nodes_checked: nodes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    /// sup |v(xi1, xi2) - v(xi1, 0)| / xi2.
    pub c2: f64,
    /// sup |v(xi1, xi2) - v(0, xi2)| / xi1.
    pub c1: f64,
}

/// Measured Lipschitz constants of the chart remainder toward the two edges.
pub fn lipschitz_check<F: PotentialField + ?Sized>(
    field: &F,
    vertex: usize,
    r: f64,
    n_grid: usize,
) -> Result<LipschitzReport> {
    let mut c2 = 0.0f64;
    let mut c1 = 0.0f64;
    for i in 0..=n_grid {
        for j in 1..=n_grid {
            let xi1 = r * i as f64 / n_grid as f64;
            let xi2 = r * j as f64 / n_grid as f64;
            let v = chart_v(field, vertex, xi1, xi2)?;
            let v10 = chart_v(field, vertex, xi1, 0.0)?;
            c2 = c2.max((v - v10).abs() / xi2);
            if i >= 1 {
                let v01 = chart_v(field, vertex, 0.0, xi2)?;
                c1 = c1.max((v - v01).abs() / xi1);
            }
        }
    }
    Ok(LipschitzReport { c2, c1 })
}
