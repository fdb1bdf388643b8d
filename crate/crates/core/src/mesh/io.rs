//! ASCII OFF and OBJ reading and writing (triangles only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Vec3;

use super::SurfaceMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(Self::Off),
            "obj" => Some(Self::Obj),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(Self::Off),
            "obj" => Ok(Self::Obj),
            other => Err(Error::UnknownName {
                kind: "mesh format",
                name: other.to_string(),
            }),
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<SurfaceMesh> {
    let text = fs::read_to_string(path)?;
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(&text, path)?,
        MeshFormat::Obj => parse_obj(&text, path)?,
    };
    SurfaceMesh::new(vertices, faces)
}

pub fn save_mesh(mesh: &SurfaceMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let text = match format {
        MeshFormat::Off => write_off(mesh),
        MeshFormat::Obj => write_obj(mesh),
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn write_off(mesh: &SurfaceMesh) -> String {
    let mut out = String::new();
    out.push_str("OFF\n");
    let _ = writeln!(out, "{} {} 0", mesh.vertex_count(), mesh.face_count());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn write_obj(mesh: &SurfaceMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(tok: &str, path: &Path, line: usize) -> Result<T> {
    tok.parse().map_err(|_| parse_err(path, line, format!("invalid number `{tok}`")))
}

/// Lines with comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

pub fn parse_off(text: &str, path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let mut rest_of_header: Vec<&str> = header.split_whitespace().collect();
    if rest_of_header.first() != Some(&"OFF") {
        return Err(parse_err(path, line, "missing OFF header"));
    }
    rest_of_header.remove(0);
    let (line, counts) = if rest_of_header.is_empty() {
        let (l, c) = lines.next().ok_or_else(|| parse_err(path, line, "missing counts line"))?;
        (l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (line, rest_of_header)
    };
    if counts.len() < 2 {
        return Err(parse_err(path, line, "counts line needs `V F E`"));
    }
    let nv: usize = parse_num(counts[0], path, line)?;
    let nf: usize = parse_num(counts[1], path, line)?;

    let mut vertices = Vec::with_capacity(nv);
    let mut faces = Vec::with_capacity(nf);
    for (line, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if vertices.len() < nv {
            if toks.len() < 3 {
                return Err(parse_err(path, line, "vertex needs 3 coordinates"));
            }
            vertices.push(Vec3::new(
                parse_num(toks[0], path, line)?,
                parse_num(toks[1], path, line)?,
                parse_num(toks[2], path, line)?,
            ));
        } else if faces.len() < nf {
            let n: usize = parse_num(toks[0], path, line)?;
            if n != 3 {
                return Err(parse_err(path, line, format!("only triangles are supported, found {n}-gon")));
            }
            if toks.len() < 4 {
                return Err(parse_err(path, line, "face needs 3 indices"));
            }
            let mut f = [0; 3];
            for k in 0..3 {
                f[k] = parse_num(toks[k + 1], path, line)?;
                if f[k] >= nv {
                    return Err(parse_err(path, line, format!("vertex index {} out of range", f[k])));
                }
            }
            faces.push(f);
        } else {
            return Err(parse_err(path, line, "trailing data after faces"));
        }
    }
    if vertices.len() != nv || faces.len() != nf {
        return Err(parse_err(
            path,
            text.lines().count(),
            format!("expected {nv} vertices and {nf} faces, found {} and {}", vertices.len(), faces.len()),
        ));
    }
    Ok((vertices, faces))
}

pub fn parse_obj(text: &str, path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (line, l) in content_lines(text) {
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(parse_err(path, line, "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(
                    parse_num(c[0], path, line)?,
                    parse_num(c[1], path, line)?,
                    parse_num(c[2], path, line)?,
                ));
            }
            Some("f") => {
                let idx: Vec<&str> = toks.collect();
                if idx.len() != 3 {
                    return Err(parse_err(
                        path,
                        line,
                        format!("only triangles are supported, found {}-gon", idx.len()),
                    ));
                }
                let mut f = [0; 3];
                for k in 0..3 {
                    let first = idx[k].split('/').next().unwrap_or("");
                    let i: usize = parse_num(first, path, line)?;
                    if i == 0 {
                        return Err(parse_err(path, line, "OBJ indices are 1-based"));
                    }
                    f[k] = i - 1;
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    if let Some((t, _)) = faces.iter().enumerate().find(|(_, f)| f.iter().any(|&i| i >= vertices.len())) {
        return Err(Error::InvalidFace(t));
    }
    Ok((vertices, faces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, tetrahedron};

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        for (m, name) in [(tetrahedron(), "t"), (icosphere(2), "i")] {
            for fmt in [MeshFormat::Off, MeshFormat::Obj] {
                let p = dir.path().join(format!("{name}.{fmt:?}"));
                save_mesh(&m, &p, fmt).unwrap();
                let back = load_mesh(&p, fmt).unwrap();
                assert_eq!(back.vertices(), m.vertices());
                assert_eq!(back.triangles(), m.triangles());
            }
        }
    }

    #[test]
    fn off_quad_is_rejected() {
        let text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        match parse_off(text, Path::new("quad.off")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn obj_indices_are_one_based() {
        let text = "# tet\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2/5 3/1 4\n";
        let (v, f) = parse_obj(text, Path::new("t.obj")).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(f, vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]);
        assert!(SurfaceMesh::new(v, f).is_ok());
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n";
        match parse_off(text, Path::new("bad.off")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
