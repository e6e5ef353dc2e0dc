//! ASCII OBJ subset: `v` and `f` records on a triangulated mesh.
//!
//! Vertices take three coordinates (a fourth, the optional weight, is
//! ignored). Faces take exactly three references in any of the `i`, `i/j`,
//! `i//k`, `i/j/k` forms; texture and normal indices are ignored. Indices
//! are 1-based, with negative values counting back from the most recent
//! vertex. Every other keyword, comments included, is skipped.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Scene, Triangle};

fn parse_float(context: &str, line: usize, field: &str, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::parse(context, line, format!("invalid {what} `{field}`")))
}

/// Resolves one face reference (`i`, `i/j`, `i//k`, `i/j/k`) to a 0-based
/// vertex index against the vertices seen so far.
fn resolve_index(line: usize, field: &str, n_vertices: usize) -> Result<usize> {
    let head = field.split('/').next().unwrap_or("");
    let idx: i64 = head
        .parse()
        .map_err(|_| Error::parse("obj", line, format!("invalid face index `{field}`")))?;
    let resolved = if idx > 0 {
        idx as usize - 1
    } else if idx < 0 {
        let back = (-idx) as usize;
        if back > n_vertices {
            return Err(Error::parse(
                "obj",
                line,
                format!("face index `{field}` reaches before the first vertex"),
            ));
        }
        n_vertices - back
    } else {
        return Err(Error::parse("obj", line, "face index 0 is invalid"));
    };
    if resolved >= n_vertices {
        return Err(Error::parse(
            "obj",
            line,
            format!("face index `{field}` exceeds the {n_vertices} vertices seen so far"),
        ));
    }
    Ok(resolved)
}

/// Parses the OBJ subset into triangles in file order.
pub fn parse_obj(text: &str) -> Result<Vec<Triangle>> {
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut fields = raw.split_whitespace();
        match fields.next() {
            Some("v") => {
                let coords: Vec<&str> = fields.collect();
                if coords.len() != 3 && coords.len() != 4 {
                    return Err(Error::parse(
                        "obj",
                        line,
                        format!("vertex needs 3 or 4 coordinates, found {}", coords.len()),
                    ));
                }
                let x = parse_float("obj", line, coords[0], "vertex coordinate")?;
                let y = parse_float("obj", line, coords[1], "vertex coordinate")?;
                let z = parse_float("obj", line, coords[2], "vertex coordinate")?;
                if coords.len() == 4 {
                    parse_float("obj", line, coords[3], "vertex weight")?;
                }
                if !(x.is_finite() && y.is_finite() && z.is_finite()) {
                    return Err(Error::parse("obj", line, "vertex coordinates must be finite"));
                }
                vertices.push([x, y, z]);
            }
            Some("f") => {
                let refs: Vec<&str> = fields.collect();
                if refs.len() != 3 {
                    return Err(Error::parse(
                        "obj",
                        line,
                        format!(
                            "face needs exactly 3 vertices (triangulated mesh), found {}",
                            refs.len()
                        ),
                    ));
                }
                let a = resolve_index(line, refs[0], vertices.len())?;
                let b = resolve_index(line, refs[1], vertices.len())?;
                let c = resolve_index(line, refs[2], vertices.len())?;
                triangles.push(Triangle::new(vertices[a], vertices[b], vertices[c]));
            }
            _ => {}
        }
    }
    Ok(triangles)
}

/// Parses OBJ text into a scene with the given id.
pub fn scene_from_obj(id: impl Into<String>, text: &str) -> Result<Scene> {
    Ok(Scene::new(id, parse_obj(text)?))
}

/// Loads an OBJ file; the scene id is the file stem.
pub fn load_obj(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".to_string());
    scene_from_obj(id, &text)
}
