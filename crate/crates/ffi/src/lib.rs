//! C ABI over the voxpack library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Fallible functions return a `VxStatus`;
//! on failure `vx_last_error_message` describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use voxpack::mesh::{load_mesh, TriangleMesh};
use voxpack::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use voxpack::seeding::{generate_seeds, write_seeds_json, SeedPlacement, SeedingConfig};
use voxpack::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VxStatus {
    Ok = 0,
    NullArgument = 1,
    Io = 2,
    InvalidArgument = 3,
    Geometry = 4,
    Pipeline = 5,
    Panic = 6,
}

/// A loaded triangle mesh.
pub struct VxMesh(TriangleMesh);

/// A set of seed placements.
pub struct VxSeeds(Vec<SeedPlacement>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

struct Failure(VxStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => VxStatus::Io,
            Error::Parse { .. } | Error::UnsupportedFormat(_) | Error::InvalidArgument(_) | Error::Json(_) => {
                VxStatus::InvalidArgument
            }
            _ => VxStatus::Geometry,
        };
        Failure(status, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::Config(_) => VxStatus::InvalidArgument,
            _ => VxStatus::Pipeline,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, records any error or panic and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VxStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            VxStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(VxStatus::NullArgument, format!("{what} is null"))
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(VxStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn read_path(s: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    read_str(s, what).map(PathBuf::from)
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last error on this thread, or null if there was none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an OBJ, STL or PLY mesh.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vx_mesh_load(path: *const c_char, out: *mut *mut VxMesh) -> VxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mesh = load_mesh(read_path(path, "path")?)?;
        write_out(out, VxMesh(mesh));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle from `vx_mesh_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vx_mesh_free(mesh: *mut VxMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn vx_mesh_vertex_count(mesh: *const VxMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertex_count())
}

/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn vx_mesh_triangle_count(mesh: *const VxMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.triangle_count())
}

/// Enclosed volume and surface area.
///
/// # Safety
/// `mesh` must be a live mesh handle; `volume` and `area` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn vx_mesh_measure(mesh: *const VxMesh, volume: *mut f64, area: *mut f64) -> VxStatus {
    guard(|| {
        let (Some(m), false, false) = (mesh.as_ref(), volume.is_null(), area.is_null()) else {
            return Err(null("mesh, volume or area"));
        };
        *volume = m.0.volume();
        *area = m.0.surface_area();
        Ok(())
    })
}

/// Generates seeds on `base` for the given decorations. `config_json` is a
/// JSON seeding config; null uses the defaults.
///
/// # Safety
/// `base` must be a live mesh handle, `decorations` an array of
/// `decoration_count` live mesh handles, `config_json` null or a
/// NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vx_seeds_generate(
    base: *const VxMesh,
    decorations: *const *const VxMesh,
    decoration_count: usize,
    config_json: *const c_char,
    out: *mut *mut VxSeeds,
) -> VxStatus {
    guard(|| {
        let base = base.as_ref().ok_or_else(|| null("base"))?;
        if decorations.is_null() || out.is_null() {
            return Err(null("decorations or out"));
        }
        let decorations = std::slice::from_raw_parts(decorations, decoration_count)
            .iter()
            .map(|d| d.as_ref().map(|m| m.0.clone()).ok_or_else(|| null("decoration")))
            .collect::<Result<Vec<_>, _>>()?;
        let config: SeedingConfig = if config_json.is_null() {
            SeedingConfig::default()
        } else {
            serde_json::from_str(read_str(config_json, "config_json")?)
                .map_err(|e| Failure(VxStatus::InvalidArgument, format!("seeding config: {e}")))?
        };
        let seeds = generate_seeds(&base.0, &decorations, &config)?;
        write_out(out, VxSeeds(seeds));
        Ok(())
    })
}

/// # Safety
/// `seeds` must be null or a live seeds handle.
#[no_mangle]
pub unsafe extern "C" fn vx_seeds_count(seeds: *const VxSeeds) -> usize {
    seeds.as_ref().map_or(0, |s| s.0.len())
}

/// Position of seed `index` as three doubles.
///
/// # Safety
/// `seeds` must be a live seeds handle and `xyz` point to three doubles.
#[no_mangle]
pub unsafe extern "C" fn vx_seeds_position(seeds: *const VxSeeds, index: usize, xyz: *mut f64) -> VxStatus {
    guard(|| {
        let seeds = seeds.as_ref().ok_or_else(|| null("seeds"))?;
        if xyz.is_null() {
            return Err(null("xyz"));
        }
        let s = seeds.0.get(index).ok_or_else(|| {
            Failure(VxStatus::InvalidArgument, format!("seed index {index} out of range ({})", seeds.0.len()))
        })?;
        let p = std::slice::from_raw_parts_mut(xyz, 3);
        p.copy_from_slice(&[s.position.x, s.position.y, s.position.z]);
        Ok(())
    })
}

/// Writes the seeds as a JSON seed file.
///
/// # Safety
/// `seeds` must be a live seeds handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vx_seeds_write(seeds: *const VxSeeds, path: *const c_char) -> VxStatus {
    guard(|| {
        let seeds = seeds.as_ref().ok_or_else(|| null("seeds"))?;
        write_seeds_json(&seeds.0, read_path(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `seeds` must be null or a handle from `vx_seeds_generate` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vx_seeds_free(seeds: *mut VxSeeds) {
    if !seeds.is_null() {
        drop(Box::from_raw(seeds));
    }
}

/// Runs every stage of the pipeline described by a TOML or JSON config file.
/// A non-null `output_dir` overrides the config's output directory.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `output_dir` null or one.
#[no_mangle]
pub unsafe extern "C" fn vx_pipeline_run(config_path: *const c_char, output_dir: *const c_char) -> VxStatus {
    guard(|| {
        let mut config = PipelineConfig::load(read_path(config_path, "config_path")?)?;
        if !output_dir.is_null() {
            config.output_dir = read_path(output_dir, "output_dir")?;
        }
        run_pipeline(&config)?;
        Ok(())
    })
}
