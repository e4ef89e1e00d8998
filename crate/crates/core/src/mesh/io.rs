//! Mesh file IO. Reads OBJ, STL (binary and ASCII) and PLY (ASCII and binary
//! little-endian); writes OBJ and ASCII PLY.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};

use super::{weld, Point, TriangleMesh};
use crate::error::{Error, Result};

/// What cleanup did to a loaded file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub welded_vertices: usize,
    pub degenerate_dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Obj,
    Stl,
    Ply,
}

fn format_of(path: &Path) -> Result<Format> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "obj" => Ok(Format::Obj),
        "stl" => Ok(Format::Stl),
        "ply" => Ok(Format::Ply),
        _ => Err(Error::UnsupportedFormat(ext)),
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let (mesh, report) = load_mesh_with_report(path)?;
    if report.degenerate_dropped > 0 {
        log::warn!(
            "{}: dropped {} degenerate triangles",
            path.display(),
            report.degenerate_dropped
        );
    }
    Ok(mesh)
}

/// Loads a mesh, welds vertices within 1e-9 of the bounding-box diagonal and
/// drops degenerate triangles.
pub fn load_mesh_with_report(path: impl AsRef<Path>) -> Result<(TriangleMesh, LoadReport)> {
    let path = path.as_ref();
    let format = format_of(path)?;
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    let (vertices, triangles) = match format {
        Format::Obj => read_obj(path)?,
        Format::Stl => read_stl(path)?,
        Format::Ply => read_ply(path)?,
    };
    if vertices.is_empty() || triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    for (t, tri) in triangles.iter().enumerate() {
        if let Some(&index) = tri.iter().find(|&&i| i as usize >= vertices.len()) {
            return Err(Error::IndexOutOfRange {
                triangle: t,
                index,
                vertex_count: vertices.len(),
            });
        }
    }
    let diag = super::Aabb::from_points(&vertices).diagonal();
    let (vertices, triangles, welded_vertices) = weld(&vertices, &triangles, 1e-9 * diag);
    let (mesh, stats) = TriangleMesh::with_cleanup(vertices, triangles)?;
    Ok((
        mesh,
        LoadReport {
            welded_vertices,
            degenerate_dropped: stats.degenerate_dropped,
        },
    ))
}

type RawMesh = (Vec<Point>, Vec<[u32; 3]>);

fn read_obj(path: &Path) -> Result<RawMesh> {
    let options = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ignore_points: true,
        ignore_lines: true,
    };
    let (models, _materials) =
        tobj::load_obj(path, &options).map_err(|e| Error::parse(path, e.to_string()))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for model in models {
        let m = model.mesh;
        let base = vertices.len() as u32;
        vertices.extend(
            m.positions
                .chunks_exact(3)
                .map(|p| Point::new(p[0], p[1], p[2])),
        );
        triangles.extend(
            m.indices
                .chunks_exact(3)
                .map(|t| [t[0] + base, t[1] + base, t[2] + base]),
        );
    }
    Ok((vertices, triangles))
}

fn read_stl(path: &Path) -> Result<RawMesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let stl = stl_io::read_stl(&mut reader).map_err(|e| Error::parse(path, e.to_string()))?;
    let vertices = stl
        .vertices
        .iter()
        .map(|v| Point::new(v[0] as f64, v[1] as f64, v[2] as f64))
        .collect();
    let triangles = stl
        .faces
        .iter()
        .map(|f| [f.vertices[0] as u32, f.vertices[1] as u32, f.vertices[2] as u32])
        .collect();
    Ok((vertices, triangles))
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<u32>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&i| i as u32).collect(),
        Property::ListUChar(v) => v.iter().map(|&i| i as u32).collect(),
        Property::ListShort(v) => v.iter().map(|&i| i as u32).collect(),
        Property::ListUShort(v) => v.iter().map(|&i| i as u32).collect(),
        Property::ListInt(v) => v.iter().map(|&i| i as u32).collect(),
        Property::ListUInt(v) => v.clone(),
        _ => return None,
    })
}

fn read_ply(path: &Path) -> Result<RawMesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let parser = Parser::<DefaultElement>::new();
    let ply = parser
        .read_ply(&mut reader)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let empty = Vec::new();
    let verts = ply.payload.get("vertex").unwrap_or(&empty);
    let mut vertices = Vec::with_capacity(verts.len());
    for v in verts {
        let coord = |k: &str| {
            v.get(k)
                .and_then(scalar)
                .ok_or_else(|| Error::parse(path, format!("vertex without scalar {k}")))
        };
        vertices.push(Point::new(coord("x")?, coord("y")?, coord("z")?));
    }
    let faces = ply.payload.get("face").unwrap_or(&empty);
    let mut triangles = Vec::with_capacity(faces.len());
    for f in faces {
        let list = f
            .get("vertex_indices")
            .or_else(|| f.get("vertex_index"))
            .and_then(index_list)
            .ok_or_else(|| Error::parse(path, "face without vertex_indices list"))?;
        // fan-triangulate polygons
        for k in 1..list.len().saturating_sub(1) {
            triangles.push([list[0], list[k], list[k + 1]]);
        }
    }
    Ok((vertices, triangles))
}

/// Writes by extension (`.obj` or `.ply`).
pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match format_of(path)? {
        Format::Obj => save_obj(mesh, path),
        Format::Ply => save_ply(mesh, path),
        Format::Stl => Err(Error::UnsupportedFormat("stl (write)".into())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# {} vertices, {} triangles", mesh.vertex_count(), mesh.triangle_count()).map_err(io)?;
    for p in mesh.vertices() {
        writeln!(w, "v {} {} {}", p.x, p.y, p.z).map_err(io)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes several meshes into one OBJ file, one `o <name>` object each.
pub fn save_obj_objects<'a>(objects: impl IntoIterator<Item = (String, &'a TriangleMesh)>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let mut offset = 1usize;
    for (name, mesh) in objects {
        writeln!(w, "o {name}").map_err(io)?;
        for p in mesh.vertices() {
            writeln!(w, "v {} {} {}", p.x, p.y, p.z).map_err(io)?;
        }
        for t in mesh.triangles() {
            writeln!(
                w,
                "f {} {} {}",
                t[0] as usize + offset,
                t[1] as usize + offset,
                t[2] as usize + offset
            )
            .map_err(io)?;
        }
        offset += mesh.vertex_count();
    }
    w.flush().map_err(io)
}

/// Reads every object of an OBJ file as its own mesh, in file order. No
/// welding is applied.
pub fn load_obj_objects(path: impl AsRef<Path>) -> Result<Vec<(String, TriangleMesh)>> {
    let path = path.as_ref();
    let options = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ignore_points: true,
        ignore_lines: true,
    };
    let (models, _materials) = tobj::load_obj(path, &options).map_err(|e| Error::parse(path, e.to_string()))?;
    models
        .into_iter()
        .map(|model| {
            let m = model.mesh;
            let vertices = m.positions.chunks_exact(3).map(|p| Point::new(p[0], p[1], p[2])).collect();
            let triangles = m.indices.chunks_exact(3).map(|t| [t[0], t[1], t[2]]).collect();
            Ok((model.name, TriangleMesh::new(vertices, triangles)?))
        })
        .collect()
}

pub fn save_ply(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(
        w,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.triangle_count()
    )
    .map_err(io)?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(io)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2]).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn write_stl(mesh: &TriangleMesh, path: &Path) {
        let tris: Vec<stl_io::Triangle> = (0..mesh.triangle_count())
            .map(|t| {
                let [a, b, c] = mesh.triangle(t);
                let n = mesh.face_normal(t).normalize();
                let v = |p: Point| stl_io::Vertex::new([p.x as f32, p.y as f32, p.z as f32]);
                stl_io::Triangle {
                    normal: stl_io::Normal::new([n.x as f32, n.y as f32, n.z as f32]),
                    vertices: [v(a), v(b), v(c)],
                }
            })
            .collect();
        let mut f = File::create(path).unwrap();
        stl_io::write_stl(&mut f, tris.iter()).unwrap();
    }

    #[test]
    fn obj_round_trip_cube() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.obj");
        let cube = shapes::cube(Point::origin(), Point::new(1.0, 1.0, 1.0));
        save_obj(&cube, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.vertex_count(), 8);
        assert_eq!(back.triangle_count(), 12);
        assert_eq!(back.vertices(), cube.vertices());
    }

    #[test]
    fn ply_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.ply");
        let s = shapes::icosphere(1.0, 1);
        save_ply(&s, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.triangle_count(), s.triangle_count());
        assert!((back.surface_area() - s.surface_area()).abs() < 1e-12);
    }

    #[test]
    fn binary_little_endian_ply() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.ply");
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for v in [[0f32, 0., 0.], [1., 0., 0.], [0., 1., 0.]] {
            for c in v {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        bytes.push(3);
        for i in [0i32, 1, 2] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let m = load_mesh(&path).unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert!((m.surface_area() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn stl_icosphere_welds_to_162_vertices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ico.stl");
        let s = shapes::icosphere(1.0, 2);
        write_stl(&s, &path);
        let (m, report) = load_mesh_with_report(&path).unwrap();
        assert_eq!(m.triangle_count(), 320);
        assert_eq!(m.vertex_count(), 162);
        assert_eq!(report.degenerate_dropped, 0);
        assert!(m.is_watertight());
    }

    #[test]
    fn zero_area_triangle_is_dropped_with_warning_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube_plus.obj");
        let cube = shapes::cube(Point::origin(), Point::new(1.0, 1.0, 1.0));
        save_obj(&cube, &path).unwrap();
        // replace the last face with a collinear one
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        let mut text = lines.join("\n");
        text.push_str("\nf 1 2 2\n");
        let path2 = dir.path().join("degenerate.obj");
        std::fs::write(&path2, text).unwrap();
        let (m, report) = load_mesh_with_report(&path2).unwrap();
        assert_eq!(m.triangle_count(), 11);
        assert_eq!(report.degenerate_dropped, 1);
    }

    #[test]
    fn unsupported_and_missing_files() {
        assert!(matches!(load_mesh("model.fbx"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(load_mesh("/nonexistent/model.obj"), Err(Error::Io { .. })));
    }

    #[test]
    fn all_degenerate_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n").unwrap();
        assert!(matches!(load_mesh(&path), Err(Error::EmptyMesh)));
    }

    #[test]
    fn multi_object_round_trip() {
        let a = shapes::icosphere(1.0, 1);
        let b = shapes::cube(Point::new(3.0, 0.0, 0.0), Point::new(4.0, 1.0, 1.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("objs.obj");
        save_obj_objects([("element_0".to_string(), &a), ("element_1".to_string(), &b)], &path).unwrap();
        let back = load_obj_objects(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "element_0");
        assert_eq!(back[0].1.vertices(), a.vertices());
        assert_eq!(back[1].1.triangles(), b.triangles());
    }
}
