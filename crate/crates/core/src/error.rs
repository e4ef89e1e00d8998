use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the geometry, seeding, voxel and deformation stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("unsupported mesh format {0:?} (expected .obj, .stl or .ply)")]
    UnsupportedFormat(String),

    #[error("mesh is empty after cleanup")]
    EmptyMesh,

    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        vertex_count: usize,
    },

    #[error("mesh is not watertight: {open_edges} open or non-manifold edges")]
    NotWatertight { open_edges: usize },

    #[error("isosurface at level {level} is empty (grid values span [{min}, {max}])")]
    EmptyIsosurface { level: f64, min: f64, max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("requested {requested} seeds but the surface only supports {limit} at its resolution")]
    InsufficientResolution { requested: usize, limit: usize },

    #[error("guidance axis has zero extent over the mesh")]
    DegenerateAxis,

    #[error("rotation policy alternate_180 needs stripe lattice coordinates on every seed")]
    MissingStripeCoordinates,

    #[error("decoration occupies no voxel at edge length {voxel_edge}; increase the resolution")]
    EmptyVoxelization { voxel_edge: f64 },

    #[error("voxel grids are not on the same lattice ({a} vs {b})")]
    LatticeMismatch { a: f64, b: f64 },

    #[error("instance {instance} lost all of its voxels during overlap resolution")]
    Submerged { instance: usize },

    #[error("front of instance {instance} exhausted with {deficit} voxels still to recover")]
    FrontExhausted { instance: usize, deficit: usize },

    #[error("instance {instance} grew into its grid boundary; enlarge the grid factor")]
    GridBoundary { instance: usize },

    #[error("mesh collapsed during smoothing or decimation")]
    Collapsed,

    #[error("seed positions of instances {instances:?} lie on a cut plane")]
    SeedOnCutPlane { instances: Vec<usize> },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
