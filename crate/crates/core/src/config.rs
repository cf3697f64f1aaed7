//! Experiment configuration: TOML schema, validation, and construction of
//! the geometric and analytic inputs (polygon, right-hand side, parameters).

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::geometry::{build_polygon, Point, Polygon, RhsField};
use crate::mesh::MeshParams;
use crate::solver::SolverParams;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub polygon: PolygonConfig,
    pub rhs: RhsConfig,
    /// Potential values at the vertices; defaults to zeros.
    #[serde(default)]
    pub vertex_values: Option<Vec<f64>>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonConfig {
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsConfig {
    /// Whitelisted arithmetic expression in x1, x2, l1..lN.
    pub expr: String,
    /// Positive lower bound a of H on the closed polygon.
    pub lower: f64,
    /// Upper bound A of H.
    pub upper: f64,
    /// Hoelder exponent alpha in (0, 1).
    pub alpha: f64,
    /// C^{0,alpha} seminorm of H (measured or known); 0 for constants.
    #[serde(default)]
    pub holder_seminorm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Dyadic refinement levels (grid is 2^level + 1 per side). The first
    /// entry drives single-solve commands; convergence sweeps use all.
    #[serde(default = "default_levels")]
    pub levels: Vec<u32>,
    #[serde(default)]
    pub grading: f64,
}

fn default_levels() -> Vec<u32> {
    vec![6]
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            grading: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_damping_floor")]
    pub damping_floor: f64,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    50
}
fn default_damping_floor() -> f64 {
    (2.0f64).powi(-20)
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            damping_floor: default_damping_floor(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Decay exponent gamma; defaults to alpha / 2.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Level-set offset for the strict convexity modulus, as a fraction of
    /// the shortest edge.
    #[serde(default = "default_delta_frac")]
    pub delta_frac: f64,
    #[serde(default = "default_k_min")]
    pub k_min: u32,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default = "default_t_probes")]
    pub t_probes: usize,
}

fn default_delta_frac() -> f64 {
    0.1
}
fn default_k_min() -> u32 {
    1
}
fn default_k_max() -> u32 {
    12
}
fn default_t_probes() -> usize {
    33
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            delta_frac: default_delta_frac(),
            k_min: default_k_min(),
            k_max: default_k_max(),
            t_probes: default_t_probes(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
}

/// Fully validated experiment inputs.
pub struct Experiment {
    pub polygon: Polygon,
    pub rhs: RhsField,
    pub rhs_expr: Expr,
    pub vertex_values: Vec<f64>,
    pub mesh: MeshParams,
    pub levels: Vec<u32>,
    pub solver: SolverParams,
    pub diagnostics: DiagnosticsConfig,
    pub out_dir: Option<String>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
}

pub fn validate_config(cfg: &ExperimentConfig) -> Result<Experiment> {
    let pts: Vec<Point> = cfg
        .polygon
        .vertices
        .iter()
        .map(|&[x, y]| Point::new(x, y))
        .collect();
    let polygon = build_polygon(&pts)?;
    let n = polygon.num_edges();

    let r = &cfg.rhs;
    if !(r.lower > 0.0) {
        return Err(Error::Config(format!(
            "rhs.lower must be positive, got {}",
            r.lower
        )));
    }
    if !(r.alpha > 0.0 && r.alpha < 1.0) {
        return Err(Error::Config(format!(
            "rhs.alpha must lie in (0, 1), got {}",
            r.alpha
        )));
    }
    if !(r.upper >= r.lower) {
        return Err(Error::Config(format!(
            "rhs.upper {} below rhs.lower {}",
            r.upper, r.lower
        )));
    }
    if r.holder_seminorm < 0.0 {
        return Err(Error::Config("rhs.holder_seminorm must be >= 0".into()));
    }
    let expr = parse_expr(&r.expr).map_err(|e| Error::Config(format!("rhs.expr: {e}")))?;
    if expr.max_edge_index() > n {
        return Err(Error::Config(format!(
            "rhs.expr references l{} but the polygon has {n} edges",
            expr.max_edge_index()
        )));
    }

    let vertex_values = match &cfg.vertex_values {
        None => vec![0.0; n],
        Some(v) if v.len() == n => v.clone(),
        Some(v) => {
            return Err(Error::Config(format!(
                "vertex_values has length {}, polygon has {n} vertices",
                v.len()
            )))
        }
    };

    if cfg.mesh.levels.is_empty() {
        return Err(Error::Config("mesh.levels must be non-empty".into()));
    }
    for &l in &cfg.mesh.levels {
        if !(2..=12).contains(&l) {
            return Err(Error::Config(format!("mesh level {l} outside 2..=12")));
        }
    }
    if !(0.0..=0.95).contains(&cfg.mesh.grading) {
        return Err(Error::Config(format!(
            "mesh.grading {} outside [0, 0.95]",
            cfg.mesh.grading
        )));
    }
    if !(cfg.solver.tol > 0.0) || !(cfg.solver.damping_floor > 0.0) || cfg.solver.max_iter == 0 {
        return Err(Error::Config("solver parameters must be positive".into()));
    }
    let d = &cfg.diagnostics;
    if let Some(g) = d.gamma {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::Config(format!("diagnostics.gamma {g} outside (0, 1)")));
        }
    }
    if d.k_min == 0 || d.k_max < d.k_min || d.t_probes < 3 {
        return Err(Error::Config("bad diagnostics ladder parameters".into()));
    }
    if !(d.delta_frac > 0.0 && d.delta_frac < 0.5) {
        return Err(Error::Config(format!(
            "diagnostics.delta_frac {} outside (0, 0.5)",
            d.delta_frac
        )));
    }

    let poly_for_rhs = polygon.clone();
    let expr_for_rhs = expr.clone();
    let rhs = RhsField::new(
        move |x: Point| expr_for_rhs.eval_on(&poly_for_rhs, x),
        r.lower,
        r.upper,
        r.alpha,
        r.holder_seminorm,
    );

    Ok(Experiment {
        polygon,
        rhs,
        rhs_expr: expr,
        vertex_values,
        mesh: MeshParams {
            level: cfg.mesh.levels[0] as usize,
            grading: cfg.mesh.grading,
        },
        levels: cfg.mesh.levels.clone(),
        solver: SolverParams {
            tol: cfg.solver.tol,
            max_iter: cfg.solver.max_iter,
            damping_floor: cfg.solver.damping_floor,
        },
        diagnostics: cfg.diagnostics.clone(),
        out_dir: cfg.output.dir.clone(),
    })
}

pub fn load_config(text: &str) -> Result<Experiment> {
    validate_config(&parse_config(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE_H1: &str = r#"
        [polygon]
        vertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]

        [rhs]
        expr = "1"
        lower = 1.0
        upper = 1.0
        alpha = 0.5

        [mesh]
        levels = [5]
    "#;

    #[test]
    fn valid_square_config() {
        let exp = load_config(SQUARE_H1).unwrap();
        assert_eq!(exp.polygon.num_edges(), 4);
        assert_eq!(exp.vertex_values, vec![0.0; 4]);
        assert_eq!(exp.mesh.level, 5);
        assert_eq!(exp.rhs.value(Point::new(0.3, 0.7)), 1.0);
        assert_eq!(exp.solver.max_iter, 50);
    }

    #[test]
    fn rejects_bad_alpha() {
        let bad = SQUARE_H1.replace("alpha = 0.5", "alpha = 1.5");
        assert!(matches!(load_config(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_nonpositive_lower() {
        let bad = SQUARE_H1.replace("lower = 1.0", "lower = 0.0");
        assert!(matches!(load_config(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_wrong_vertex_value_count() {
        // vertex_values is a top-level key, so it must precede the tables.
        let src = SQUARE_H1.replace(
            "[polygon]",
            "vertex_values = [0.0, 0.0]\n\n        [polygon]",
        );
        assert!(matches!(load_config(&src), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_keys_and_syntax() {
        assert!(matches!(
            load_config("not toml at all ==="),
            Err(Error::Config(_))
        ));
        let bad = SQUARE_H1.replace("[mesh]", "[mesh]\n        bogus = 1");
        assert!(matches!(load_config(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_expr_with_out_of_range_edge() {
        let bad = SQUARE_H1.replace("expr = \"1\"", "expr = \"l5\"");
        assert!(matches!(load_config(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_nonconvex_polygon() {
        let bad = SQUARE_H1.replace(
            "[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]",
            "[[0.0, 0.0], [1.0, 0.0], [0.4, 0.4], [0.0, 1.0]]",
        );
        assert!(load_config(&bad).is_err());
    }
}
