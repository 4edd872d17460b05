use thiserror::Error;

/// Errors surfaced by solvers and set builders.
///
/// Pure algebra (group law, dilations, lattice arithmetic) never fails and
/// panics on programmer errors such as mixing coordinate models.
#[derive(Debug, Error)]
pub enum HeisError {
    #[error("optimizer failed to reach a feasible endpoint: residual {residual:.3e} after {restarts} restarts")]
    InfeasibleEndpoint { residual: f64, restarts: usize },

    #[error("geodesic shooting did not converge: {0}")]
    ShootingFailed(String),

    #[error("dilation factor must have an integer reciprocal, got t = {0}")]
    NonIntegerScale(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too coarse: {axis} axis has {cells} cells, need at least {min}")]
    GridTooCoarse { axis: usize, cells: usize, min: usize },

    #[error("grid box does not contain the required region: {detail}")]
    GridTooSmall { detail: String },

    #[error("enumeration radius {eps:.3} exceeds the safety bound {bound:.3}")]
    RadiusTooLarge { eps: f64, bound: f64 },

    #[error("group element list is not closed under {op}: witness index {witness}")]
    NotAGroup { op: &'static str, witness: usize },

    #[error("orbit diameter {diameter:.3} exceeds half the configured radius bound {bound:.3}")]
    OrbitTooSpread { diameter: f64, bound: f64 },

    #[error("optimizer stagnated at residual {residual:.3e}, tolerance {tol:.3e}")]
    Stagnated { residual: f64, tol: f64 },

    #[error("Gram matrix is numerically singular: smallest eigenvalue {0:.3e}")]
    SingularGram(f64),

    #[error("empty voxel set where a nonempty one is required: {0}")]
    EmptySet(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed voxel dump: {0}")]
    BadDump(String),
}

pub type Result<T> = std::result::Result<T, HeisError>;
