//! Approximation study: solve with mollified right-hand sides H_n -> H,
//! re-pin each H_n to the exact vertex compatibility values, and track the
//! successive solution differences in the weighted C^{1,alpha} estimator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{compatibility_value, Point, Polygon, RhsField};
use crate::mesh::MeshParams;
use crate::potential::{weighted_holder_norm, ScalarField2D};
use crate::quad::GAUSS5;
use crate::solver::{solve, Solution, SolverParams};

/// Average of H over the axis-aligned square of half-width `width`, by a
/// tensor 5-point Gauss rule. Expressions are total functions on the plane,
/// so sampling slightly outside the polygon is well defined.
pub fn mollify(rhs: &RhsField, width: f64) -> RhsField {
    let inner = rhs.clone();
    let w = width;
    RhsField::new(
        move |x: Point| {
            let mut acc = 0.0;
            for &(xi, wi) in &GAUSS5 {
                for &(xj, wj) in &GAUSS5 {
                    acc += wi * wj * inner.value(Point::new(x.x + w * xi, x.y + w * xj));
                }
            }
            acc / 4.0
        },
        rhs.lower,
        rhs.upper,
        rhs.alpha,
        rhs.holder_seminorm,
    )
}

/// Restore the exact compatibility values at the vertices with bump
/// corrections supported on products of the non-adjacent edge functions:
/// phi_v vanishes at every other vertex and equals 1 at v.
pub fn repin(polygon: &Polygon, rhs: &RhsField, tol: f64) -> Result<RhsField> {
    let n = polygon.num_edges();
    let mut corrections = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for v in 0..n {
        let target = compatibility_value(polygon, v);
        let have = rhs.value(polygon.vertices[v]);
        let c = target - have;
        worst = worst.max(c.abs());
        corrections.push(c);
    }
    if worst > tol {
        return Err(Error::CompatibilityLost(worst));
    }
    let inner = rhs.clone();
    let poly = polygon.clone();
    let corr = corrections;
    let corrected = RhsField::new(
        move |x: Point| {
            let ls = poly.l_values(x);
            let mut val = inner.value(x);
            for v in 0..poly.num_edges() {
                if corr[v] == 0.0 {
                    continue;
                }
                let prev = poly.prev_edge(v);
                let mut phi = 1.0;
                for j in 0..poly.num_edges() {
                    if j != v && j != prev {
                        phi *= ls[j] / poly.edges[j].l(poly.vertices[v]);
                    }
                }
                val += corr[v] * phi;
            }
            val
        },
        (rhs.lower - worst).max(0.5 * rhs.lower),
        rhs.upper + worst,
        rhs.alpha,
        rhs.holder_seminorm,
    );
    Ok(corrected)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StudyRow {
    /// Mollification level of the later iterate: width = 2^-k.
    pub k: u32,
    pub width: f64,
    /// Sup of |v_{n+1} - v_n| over mesh nodes.
    pub sup_diff: f64,
    /// Weighted C^{1,alpha}-type estimator of the difference.
    pub weighted_diff: f64,
}

pub struct StudyOutcome {
    pub rows: Vec<StudyRow>,
    pub solutions: Vec<Solution>,
    pub widths: Vec<f64>,
}

/// Solve with H_n = repin(mollify(H, 2^-k)) for k = k0, k0+1, ... on a fixed
/// mesh, and tabulate successive differences.
#[allow(clippy::too_many_arguments)]
pub fn approximation_study(
    polygon: &Polygon,
    rhs: &RhsField,
    vertex_values: &[f64],
    mesh_params: MeshParams,
    solver_params: SolverParams,
    k0: u32,
    n_levels: usize,
    repin_tol: f64,
) -> Result<StudyOutcome> {
    let mut solutions: Vec<Solution> = Vec::new();
    let mut widths = Vec::new();
    let mut rows = Vec::new();
    for step in 0..n_levels {
        let k = k0 + step as u32;
        let width = 0.5f64.powi(k as i32);
        let h_n = repin(polygon, &mollify(rhs, width), repin_tol)?;
        let sol = solve(polygon, &h_n, vertex_values, mesh_params, solver_params)?;
        if let Some(prev) = solutions.last() {
            let sup_diff = sol
                .v
                .iter()
                .zip(&prev.v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let weighted_diff = difference_estimator(prev, &sol, rhs.alpha)?;
            rows.push(StudyRow {
                k,
                width,
                sup_diff,
                weighted_diff,
            });
        }
        widths.push(width);
        solutions.push(sol);
    }
    Ok(StudyOutcome {
        rows,
        solutions,
        widths,
    })
}

/// Weighted-norm estimator of v_b - v_a on the shared mesh nodes, with
/// derivatives from the solved field difference (the reference part cancels).
fn difference_estimator(a: &Solution, b: &Solution, alpha: f64) -> Result<f64> {
    let mesh = &a.mesh;
    // Subsample nodes to keep the pair sweep cheap on fine meshes.
    let stride = (mesh.nodes.len() / 900).max(1);
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut grads = Vec::new();
    let mut hessians = Vec::new();
    for k in (0..mesh.nodes.len()).step_by(stride) {
        let x = mesh.points[k];
        let ea = a.evaluate(x, 2)?;
        let eb = b.evaluate(x, 2)?;
        points.push(x);
        values.push(eb.v - ea.v);
        grads.push(eb.grad - ea.grad);
        hessians.push(eb.hess - ea.hess);
    }
    let field = ScalarField2D {
        points,
        values,
        grads: Some(grads),
        hessians: Some(hessians),
    };
    Ok(weighted_holder_norm(&mesh.polygon, &field, alpha)?.total)
}
