//! Dirichlet boundary data from vertex values: per-edge restriction of u via
//! the edge ODE `u_tt = h(t) / (t (L - t))`, with the `t log t` endpoint
//! singularities carried in closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Polygon, RhsField, COMPAT_TOL};
use crate::potential::{u0_eval, xlogx};
use crate::quad::{gauss5, graded_grid};

/// Number of graded parameter nodes per edge.
pub const EDGE_NODES: usize = 1025;

/// The effective one-dimensional right-hand side on an edge:
/// `h(t) = H(x(t)) t (L - t) / prod_{j != i} l_j(x(t))`. The two adjacent
/// defining functions vanish linearly along the edge, `l_{i-1} = k0 t` and
/// `l_{i+1} = kL (L - t)`, so the ratio is evaluated without any singular
/// division and the endpoint values are analytic.
#[derive(Clone)]
pub struct EdgeH {
    pub edge: usize,
    pub length: f64,
    pub h0: f64,
    pub h_l: f64,
    /// `k0 = n_{i-1} . T_i`, the linear rate of `l_{i-1}` along the edge.
    pub kappa0: f64,
    /// `kL = -n_{i+1} . T_i`, the linear rate of `l_{i+1}`.
    pub kappa_l: f64,
    polygon: Polygon,
    rhs: RhsField,
    other_edges: Vec<usize>,
}

impl EdgeH {
    pub fn eval(&self, t: f64) -> f64 {
        let e = &self.polygon.edges[self.edge];
        let x = e.point_at(t);
        let mut denom = self.kappa0 * self.kappa_l;
        for &j in &self.other_edges {
            denom *= self.polygon.edges[j].l(x);
        }
        self.rhs.value(x) / denom
    }
}

/// Builds the edge right-hand side `h` and checks its endpoint limits against
/// the values forced by the Guillemin expansion: the `t log t` coefficient
/// `h(0)/L` must equal `k0` (and symmetrically at `t = L`), which is the
/// per-edge face of the vertex compatibility condition.
pub fn edge_h_from_h_field(polygon: &Polygon, rhs: &RhsField, i: usize) -> Result<EdgeH> {
    let n = polygon.num_edges();
    if i >= n {
        return Err(Error::Config(format!("edge index {i} out of range (N = {n})")));
    }
    let e = &polygon.edges[i];
    let prev = polygon.prev_edge(i);
    let next = polygon.next_edge(i);
    let kappa0 = polygon.edges[prev].normal.dot(&e.tangent);
    let kappa_l = -polygon.edges[next].normal.dot(&e.tangent);
    debug_assert!(kappa0 > 0.0 && kappa_l > 0.0);
    let other_edges: Vec<usize> = (0..n).filter(|&j| j != prev && j != i && j != next).collect();
    let length = e.length;

    let limit_at = |t: f64| {
        let x = e.point_at(t);
        let mut denom = kappa0 * kappa_l;
        for &j in &other_edges {
            denom *= polygon.edges[j].l(x);
        }
        rhs.value(x) / denom
    };
    let h0 = limit_at(0.0);
    let h_l = limit_at(length);

    let res0 = (h0 / (kappa0 * length) - 1.0).abs();
    let res_l = (h_l / (kappa_l * length) - 1.0).abs();
    let residual = res0.max(res_l);
    if residual > COMPAT_TOL {
        return Err(Error::IncompatibleH { edge: i, residual });
    }

    Ok(EdgeH {
        edge: i,
        length,
        h0,
        h_l,
        kappa0,
        kappa_l,
        polygon: polygon.clone(),
        rhs: rhs.clone(),
        other_edges,
    })
}

/// Restriction of u to one edge: graded samples plus the analytic singular
/// model, so values and first differences interpolate accurately up to the
/// endpoints.
#[derive(Debug, Clone, Serialize)]
pub struct EdgeTrace {
    pub edge: usize,
    pub length: f64,
    /// Graded parameter grid on [0, L].
    pub ts: Vec<f64>,
    /// u(v_i + t T_i) at the grid nodes.
    pub u: Vec<f64>,
    /// Smooth remainder: u minus `(h0/L) t ln t` minus `(hL/L) (L-t) ln(L-t)`.
    pub remainder: Vec<f64>,
    /// h sampled at the grid nodes.
    pub h: Vec<f64>,
    pub h0: f64,
    pub h_l: f64,
    pub a_left: f64,
    pub a_right: f64,
}

impl EdgeTrace {
    /// u at an arbitrary parameter: analytic singular part plus cubic
    /// interpolation of the smooth remainder.
    pub fn u_at(&self, t: f64) -> f64 {
        let s = t.clamp(0.0, self.length);
        self.singular_part(s) + self.remainder_at(s)
    }

    fn singular_part(&self, t: f64) -> f64 {
        (self.h0 / self.length) * xlogx(t) + (self.h_l / self.length) * xlogx(self.length - t)
    }

    /// Cubic Lagrange interpolation of the remainder on the graded grid.
    pub fn remainder_at(&self, t: f64) -> f64 {
        let n = self.ts.len();
        let k = match self.ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => return self.remainder[k],
            Err(k) => k,
        };
        // 4-point stencil centred on the cell [k-1, k].
        let lo = k.saturating_sub(2).min(n - 4);
        let mut val = 0.0;
        for a in lo..lo + 4 {
            let mut w = 1.0;
            for b in lo..lo + 4 {
                if a != b {
                    w *= (t - self.ts[b]) / (self.ts[a] - self.ts[b]);
                }
            }
            val += w * self.remainder[a];
        }
        val
    }

    /// Central second difference of u at uniform spacing `delta` around `t`.
    pub fn second_difference(&self, t: f64, delta: f64) -> f64 {
        (self.u_at(t + delta) - 2.0 * self.u_at(t) + self.u_at(t - delta)) / (delta * delta)
    }
}

/// Solves `u_tt = h(t)/(t(L-t))`, `u(0) = a_left`, `u(L) = a_right`.
///
/// The linear interpolant of h between its analytic endpoint values is split
/// off; its contribution integrates in closed form to the `t ln t` terms, and
/// the Hoelder remainder is handled by the Green's function of `-d^2/dt^2` via
/// cumulative Gauss quadrature on the graded grid.
pub fn solve_edge_ode(
    h: &dyn Fn(f64) -> f64,
    h0: f64,
    h_l: f64,
    length: f64,
    a_left: f64,
    a_right: f64,
) -> Result<EdgeTrace> {
    let el = length;
    if !(el > 0.0) {
        return Err(Error::Config("edge length must be positive".into()));
    }
    let ts = graded_grid(el, EDGE_NODES);
    let f_reg = |s: f64| {
        let h_lin = h0 * (el - s) / el + h_l * s / el;
        let denom = s * (el - s);
        let num = h(s) - h_lin;
        if denom <= 0.0 {
            0.0
        } else {
            num / denom
        }
    };

    let n = ts.len();
    // A(t_k) = int_0^{t_k} s f_reg(s) ds, B(t_k) = int_{t_k}^L (L-s) f_reg ds.
    let mut a_cum = vec![0.0f64; n];
    for k in 1..n {
        let inc = gauss5(&|s| s * f_reg(s), ts[k - 1], ts[k]);
        if !inc.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-integrable edge remainder near t = {:.3e}",
                ts[k - 1]
            )));
        }
        a_cum[k] = a_cum[k - 1] + inc;
    }
    let mut b_cum = vec![0.0f64; n];
    for k in (0..n - 1).rev() {
        let inc = gauss5(&|s| (el - s) * f_reg(s), ts[k], ts[k + 1]);
        if !inc.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-integrable edge remainder near t = {:.3e}",
                ts[k + 1]
            )));
        }
        b_cum[k] = b_cum[k + 1] + inc;
    }

    let ln_l = el.ln();
    let mut u = Vec::with_capacity(n);
    let mut remainder = Vec::with_capacity(n);
    let mut h_samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = ts[k];
        let lin = a_left * (el - t) / el + a_right * t / el;
        let green = -((el - t) / el * a_cum[k] + t / el * b_cum[k]);
        let sing = (h0 / el) * xlogx(t) + (h_l / el) * xlogx(el - t);
        let log_corr = -(h0 / el) * t * ln_l - (h_l / el) * (el - t) * ln_l;
        let rem = lin + green + log_corr;
        remainder.push(rem);
        u.push(sing + rem);
        h_samples.push(if k == 0 {
            h0
        } else if k == n - 1 {
            h_l
        } else {
            h(t)
        });
    }
    // Pin the endpoint values exactly; the singular model is nonzero at the
    // opposite endpoint when L != 1.
    u[0] = a_left;
    remainder[0] = a_left - h_l * ln_l;
    u[n - 1] = a_right;
    remainder[n - 1] = a_right - h0 * ln_l;

    Ok(EdgeTrace {
        edge: 0,
        length: el,
        ts,
        u,
        remainder,
        h: h_samples,
        h0,
        h_l,
        a_left,
        a_right,
    })
}

/// Full Dirichlet data: one EdgeTrace per edge, built from the vertex values.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryData {
    pub traces: Vec<EdgeTrace>,
    pub vertex_values: Vec<f64>,
}

pub fn assemble_dirichlet_data(
    polygon: &Polygon,
    rhs: &RhsField,
    vertex_values: &[f64],
) -> Result<BoundaryData> {
    let n = polygon.num_edges();
    if vertex_values.len() != n {
        return Err(Error::Config(format!(
            "expected {n} vertex values, got {}",
            vertex_values.len()
        )));
    }
    let mut traces = Vec::with_capacity(n);
    for i in 0..n {
        let eh = edge_h_from_h_field(polygon, rhs, i)?;
        let mut trace = solve_edge_ode(
            &|t| eh.eval(t),
            eh.h0,
            eh.h_l,
            eh.length,
            vertex_values[i],
            vertex_values[(i + 1) % n],
        )?;
        trace.edge = i;
        traces.push(trace);
    }
    Ok(BoundaryData {
        traces,
        vertex_values: vertex_values.to_vec(),
    })
}

impl BoundaryData {
    /// u on edge `i` at parameter `t`.
    pub fn u_at(&self, edge: usize, t: f64) -> f64 {
        self.traces[edge].u_at(t)
    }

    /// v = u - u0 on edge `i` at parameter `t`. On the edge the own term
    /// `l_i log l_i` vanishes identically, so this subtracts the remaining
    /// smooth part of u0 from the trace.
    pub fn v_at(&self, polygon: &Polygon, edge: usize, t: f64) -> f64 {
        let x = polygon.edges[edge].point_at(t);
        self.traces[edge].u_at(t) - u0_eval(polygon, x).unwrap_or(0.0)
    }

    /// Estimator for the C^{1,alpha} norm of the v-trace along one closed
    /// edge: sup |v| + sup |v'| + Hoelder seminorm of v' over sampled pairs.
    pub fn v_trace_c1alpha(&self, polygon: &Polygon, edge: usize, alpha: f64) -> f64 {
        let el = self.traces[edge].length;
        let m = 257;
        let mut ts = Vec::with_capacity(m);
        let mut vs = Vec::with_capacity(m);
        let mut dvs = Vec::with_capacity(m);
        for k in 0..m {
            let t = el * (k as f64 + 0.5) / m as f64;
            let dt = (el / m as f64 * 0.25).min(t.min(el - t) * 0.5);
            ts.push(t);
            vs.push(self.v_at(polygon, edge, t));
            dvs.push(
                (self.v_at(polygon, edge, t + dt) - self.v_at(polygon, edge, t - dt)) / (2.0 * dt),
            );
        }
        let sup_v = vs.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let sup_dv = dvs.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let mut semi = 0.0f64;
        for i in 0..m {
            for j in (i + 1)..m {
                let d = (ts[j] - ts[i]).abs();
                if d > 0.0 {
                    semi = semi.max((dvs[j] - dvs[i]).abs() / d.powf(alpha));
                }
            }
        }
        sup_v + sup_dv + semi
    }
}
