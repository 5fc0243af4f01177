use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh resolution must be at least 1")]
    InvalidResolution,
    #[error("mesh has no triangles")]
    Empty,
    #[error("triangle {triangle} references a vertex out of range")]
    VertexOutOfRange { triangle: usize },
    #[error("triangle {triangle} is not counter-clockwise (signed area {area:e})")]
    Orientation { triangle: usize, area: f64 },
    #[error("edge {edge:?} is shared by more than two triangles")]
    NonManifoldEdge { edge: [usize; 2] },
    #[error("edge {edge} is adjacent to {count} triangles")]
    Adjacency { edge: usize, count: usize },
    #[error("hanging node at vertex {vertex}")]
    HangingNode { vertex: usize },
    #[error("covered area {actual} differs from domain area {expected}")]
    AreaMismatch { expected: f64, actual: f64 },
    #[error("boundary length {actual} differs from domain perimeter {expected}")]
    BoundaryMismatch { expected: f64, actual: f64 },
    #[error("marked triangle {index} out of range (mesh has {num_triangles})")]
    MarkedOutOfRange { index: usize, num_triangles: usize },
    #[error("inconsistent mesh data: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("boundary value given for vertex {0}, which is not on the boundary")]
    NotBoundary(usize),
    #[error("boundary value given for vertex {0}, which does not exist")]
    NoSuchVertex(usize),
    #[error("boundary values are only accepted by the P1 space")]
    BoundaryValuesForCr,
    #[error("exponent p = {0} must be greater than 1")]
    InvalidExponent(f64),
    #[error("triangle {index} out of range (mesh has {num_triangles})")]
    TriangleOutOfRange { index: usize, num_triangles: usize },
    #[error("coefficient vector has length {actual}, expected {expected}")]
    Length { expected: usize, actual: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormsError {
    #[error("load evaluated at its singular point {0:?}")]
    SingularPoint([f64; 2]),
    #[error("load is not finite at {0:?}")]
    NonFinite([f64; 2]),
    #[error("trial and test spaces live on different meshes")]
    MeshMismatch,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinSolveError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("solve reached relative residual {achieved:e}, above tolerance {tolerance:e}")]
    Residual { achieved: f64, tolerance: f64 },
    #[error("iterative solver stopped after {iterations} iterations at relative residual {achieved:e}")]
    NotConverged { iterations: usize, achieved: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("gradient of the exact solution is singular at x0 = {0:?}")]
    SingularGradient([f64; 2]),
    #[error("Dörfler parameter theta = {0} must lie in (0, 1]")]
    InvalidTheta(f64),
    #[error("negative or non-finite indicator {value} at element {index}")]
    InvalidMass { index: usize, value: f64 },
    #[error("rate fit needs at least 2 levels, got {0}")]
    TooFewLevels(usize),
    #[error("rate fit needs positive values, got {value} at level {level}")]
    NonPositive { level: usize, value: f64 },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error(transparent)]
    LinSolve(#[from] LinSolveError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("continuation aborted: {0}")]
    Continuation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
