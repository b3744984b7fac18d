//! JSON and plain-text mesh serialization.
//!
//! The text format is line oriented:
//!
//! ```text
//! vertices <n>
//! <x> <y> <marker> <segment|-> <t|->
//! triangles <m>
//! <a> <b> <c>
//! periodic <k> <period|->
//! <left> <right>
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flowfield::PhasePoint;
use crate::mesh::{BoundaryLocation, TriangleMesh, VertexMarker};

impl TriangleMesh {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TriangleMesh = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }
}

fn marker_name(m: VertexMarker) -> &'static str {
    match m {
        VertexMarker::Interior => "interior",
        VertexMarker::Upper => "upper",
        VertexMarker::Lower => "lower",
    }
}

/// Writes the mesh in the plain-text format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_text(m: &TriangleMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "vertices {}", m.vertices.len());
    for ((p, mk), loc) in m.vertices.iter().zip(&m.markers).zip(&m.boundary) {
        match loc {
            Some(l) => {
                let _ = writeln!(s, "{:?} {:?} {} {} {:?}", p.x, p.y, marker_name(*mk), l.segment, l.t);
            }
            None => {
                let _ = writeln!(s, "{:?} {:?} {} - -", p.x, p.y, marker_name(*mk));
            }
        }
    }
    let _ = writeln!(s, "triangles {}", m.triangles.len());
    for t in &m.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    match m.period {
        Some(p) => {
            let _ = writeln!(s, "periodic {} {:?}", m.periodic_pairs.len(), p);
        }
        None => {
            let _ = writeln!(s, "periodic {} -", m.periodic_pairs.len());
        }
    }
    for (l, r) in &m.periodic_pairs {
        let _ = writeln!(s, "{l} {r}");
    }
    s
}

fn bad(line: usize, what: &str) -> Error {
    Error::InvalidMesh(format!("line {}: {what}", line + 1))
}

pub fn read_text(text: &str) -> Result<TriangleMesh> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut header = |name: &str| -> Result<(usize, Vec<String>)> {
        let (i, l) = lines.next().ok_or_else(|| Error::InvalidMesh(format!("missing {name} header")))?;
        let words: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
        if words.first().map(String::as_str) != Some(name) || words.len() < 2 {
            return Err(bad(i, &format!("expected '{name} <count>'")));
        }
        Ok((i, words))
    };
    let num = |i: usize, w: &str| -> Result<f64> { w.parse::<f64>().map_err(|_| bad(i, "bad number")) };
    let int = |i: usize, w: &str| -> Result<usize> { w.parse::<usize>().map_err(|_| bad(i, "bad index")) };

    let (i, words) = header("vertices")?;
    let n = int(i, &words[1])?;
    let mut vertices = Vec::with_capacity(n);
    let mut markers = Vec::with_capacity(n);
    let mut boundary = Vec::with_capacity(n);
    let mut body = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).skip(1);
    for _ in 0..n {
        let (i, l) = body.next().ok_or_else(|| Error::InvalidMesh("truncated vertex list".into()))?;
        let w: Vec<&str> = l.split_whitespace().collect();
        if w.len() != 5 {
            return Err(bad(i, "vertex line needs 5 fields"));
        }
        vertices.push(PhasePoint::new(num(i, w[0])?, num(i, w[1])?));
        markers.push(match w[2] {
            "interior" => VertexMarker::Interior,
            "upper" => VertexMarker::Upper,
            "lower" => VertexMarker::Lower,
            other => return Err(Error::UnknownMarker(other.to_owned())),
        });
        boundary.push(match (w[3], w[4]) {
            ("-", "-") => None,
            (s, t) => Some(BoundaryLocation {
                segment: int(i, s)?,
                t: num(i, t)?,
            }),
        });
    }
    let (i, l) = body.next().ok_or_else(|| Error::InvalidMesh("missing triangles header".into()))?;
    let w: Vec<&str> = l.split_whitespace().collect();
    if w.len() != 2 || w[0] != "triangles" {
        return Err(bad(i, "expected 'triangles <count>'"));
    }
    let m = int(i, w[1])?;
    let mut triangles = Vec::with_capacity(m);
    for _ in 0..m {
        let (i, l) = body.next().ok_or_else(|| Error::InvalidMesh("truncated triangle list".into()))?;
        let w: Vec<&str> = l.split_whitespace().collect();
        if w.len() != 3 {
            return Err(bad(i, "triangle line needs 3 indices"));
        }
        triangles.push([int(i, w[0])?, int(i, w[1])?, int(i, w[2])?]);
    }
    let (i, l) = body.next().ok_or_else(|| Error::InvalidMesh("missing periodic header".into()))?;
    let w: Vec<&str> = l.split_whitespace().collect();
    if w.len() != 3 || w[0] != "periodic" {
        return Err(bad(i, "expected 'periodic <count> <period|->'"));
    }
    let k = int(i, w[1])?;
    let period = if w[2] == "-" { None } else { Some(num(i, w[2])?) };
    let mut periodic_pairs = Vec::with_capacity(k);
    for _ in 0..k {
        let (i, l) = body.next().ok_or_else(|| Error::InvalidMesh("truncated pair list".into()))?;
        let w: Vec<&str> = l.split_whitespace().collect();
        if w.len() != 2 {
            return Err(bad(i, "pair line needs 2 indices"));
        }
        periodic_pairs.push((int(i, w[0])?, int(i, w[1])?));
    }
    let mut mesh = TriangleMesh {
        vertices,
        triangles,
        markers,
        boundary,
        periodic_pairs,
        period,
        h_max: 0.0,
    };
    mesh.validate()?;
    mesh.h_max = mesh.longest_edge();
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowfield::JetParameters;
    use crate::geometry::{build_jet_core_domain, Phase};
    use crate::mesh::mesh_jet_core;

    #[test]
    fn text_and_json_round_trip_exactly() {
        let p = JetParameters::with_beta(0.25).unwrap();
        let d = build_jet_core_domain(&p, Phase::Crest).unwrap();
        let m = mesh_jet_core(&d, 16, 4).unwrap();
        let back = read_text(&write_text(&m)).unwrap();
        assert_eq!(back, m);
        let back = TriangleMesh::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(read_text("").is_err());
        assert!(read_text("vertices 1\n0 0 sideways - -\n").is_err());
        assert!(read_text("vertices 3\n0 0 interior - -\n1 0 interior - -\n0 1 interior - -\ntriangles 1\n0 2 1\nperiodic 0 -\n").is_err());
    }
}
