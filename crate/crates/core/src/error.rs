use thiserror::Error;

/// Errors surfaced by geometry construction, solves and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vertices {0}, {1}, {2} are collinear (offending index {1})")]
    CollinearVertices(usize, usize, usize),
    #[error("polygon is not convex at vertex index {0}")]
    NonConvex(usize),
    #[error("vertex list is clockwise; counterclockwise order required")]
    WrongOrientation,
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("point ({0}, {1}) lies outside the polygon")]
    PointOutsidePolygon(f64, f64),
    #[error("point ({0}, {1}) lies on the boundary; strictly interior point required")]
    BoundaryPoint(f64, f64),
    #[error("points fall in incompatible boundary charts")]
    ChartMismatch,
    #[error("mesh too coarse: {0} node pairs available, {1} required")]
    MeshTooCoarse(usize, usize),
    #[error("right-hand side H incompatible at edge {edge}: endpoint residual {residual:e}")]
    IncompatibleH { edge: usize, residual: f64 },
    #[error("quadrature failed on edge remainder: {0}")]
    QuadratureFailure(String),
    #[error("Newton stalled: damping factor below floor at iteration {0}, residual {1:e}")]
    NewtonStalled(usize, f64),
    #[error("discrete Hessian indefinite and damping could not recover (node {0})")]
    IndefiniteHessianUnrecoverable(usize),
    #[error("H must be positive; min sampled value {0:e}")]
    NonPositiveH(f64),
    #[error("discrete Hessian indefinite at node {0}")]
    IndefiniteHessian(usize),
    #[error("rescaling window exceeds the solution domain")]
    WindowExceedsDomain,
    #[error("slice y={0} is not strictly monotone in x1; partial Legendre transform undefined")]
    NonMonotoneSlice(f64),
    #[error("scaling root not bracketed: target {0:e} outside range of F on (0,1)")]
    RootNotBracketed(f64),
    #[error("barrier radius {0:e} collapsed below {1} mesh cells")]
    RadiusCollapse(f64, usize),
    #[error("linear solve failed: {0}")]
    SingularSystem(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("compatibility lost after mollification: max vertex residual {0:e}")]
    CompatibilityLost(f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
