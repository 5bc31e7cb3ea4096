//! Planar multi-polygon regions: even-odd membership, distance to the set
//! and GeoJSON ingestion.

use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

/// One closed ring. The first vertex is repeated at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    vertices: Vec<[f64; 2]>,
    min: [f64; 2],
    max: [f64; 2],
}

impl Ring {
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Polygon("non-finite vertex coordinate".into()));
        }
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::Polygon(format!(
                "ring needs at least 3 distinct vertices, got {}",
                vertices.len()
            )));
        }
        let first = vertices[0];
        vertices.push(first);

        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for v in &vertices {
            for d in 0..2 {
                min[d] = min[d].min(v[d]);
                max[d] = max[d].max(v[d]);
            }
        }
        Ok(Ring { vertices, min, max })
    }

    /// Closed vertex list (first == last).
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Number of edges crossed by the ray from `p` towards +x.
    fn crossings(&self, p: [f64; 2]) -> usize {
        if p[1] < self.min[1] || p[1] > self.max[1] || p[0] > self.max[0] {
            return 0;
        }
        self.edges()
            .filter(|&(a, b)| {
                if (a[1] > p[1]) != (b[1] > p[1]) {
                    let x_at = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    p[0] < x_at
                } else {
                    false
                }
            })
            .count()
    }

    fn bbox_distance_sq(&self, p: [f64; 2]) -> f64 {
        (0..2)
            .map(|d| {
                (self.min[d] - p[d])
                    .max(p[d] - self.max[d])
                    .max(0.0)
                    .powi(2)
            })
            .sum()
    }

    fn distance_sq(&self, p: [f64; 2]) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance_sq(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Shoelace area (absolute value).
    pub fn area(&self) -> f64 {
        let twice: f64 = self.edges().map(|(a, b)| a[0] * b[1] - b[0] * a[1]).sum();
        0.5 * twice.abs()
    }
}

/// Squared Euclidean distance from `p` to the segment `[a, b]`.
pub fn segment_distance_sq(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len_sq > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    dx * dx + dy * dy
}

/// Union of polygon rings. Membership uses the even-odd rule over every
/// ring, so nested rings cancel rather than being treated as holes.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonSet {
    rings: Vec<Ring>,
}

impl PolygonSet {
    pub fn new(rings: Vec<Ring>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::Polygon("polygon set has no rings".into()));
        }
        Ok(PolygonSet { rings })
    }

    pub fn from_vertex_lists(lists: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        let rings = lists.into_iter().map(Ring::new).collect::<Result<_>>()?;
        PolygonSet::new(rings)
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let total: usize = self.rings.iter().map(|r| r.crossings(p)).sum();
        total % 2 == 1
    }

    /// 0 inside the set, otherwise the Euclidean distance to the nearest edge.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for ring in &self.rings {
            if ring.bbox_distance_sq(p) >= best {
                continue;
            }
            best = best.min(ring.distance_sq(p));
        }
        best.sqrt()
    }

    /// Axis-aligned extent `(min, max)` over all rings.
    pub fn extent(&self) -> ([f64; 2], [f64; 2]) {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for r in &self.rings {
            for d in 0..2 {
                min[d] = min[d].min(r.min[d]);
                max[d] = max[d].max(r.max[d]);
            }
        }
        (min, max)
    }

    pub fn from_geojson_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_geojson_str(&text)
    }

    /// Reads every Polygon / MultiPolygon exterior ring found in a GeoJSON
    /// document. Interior rings (holes) are ignored.
    pub fn from_geojson_str(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::Polygon(format!("invalid GeoJSON: {e}")))?;
        let mut lists = Vec::new();
        collect_exteriors(&doc, &mut lists)?;
        if lists.is_empty() {
            return Err(Error::Polygon(
                "GeoJSON contains no Polygon or MultiPolygon geometry".into(),
            ));
        }
        Self::from_vertex_lists(lists)
    }
}

fn collect_exteriors(node: &Value, out: &mut Vec<Vec<[f64; 2]>>) -> Result<()> {
    let kind = node
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Polygon("GeoJSON object without a \"type\"".into()))?;
    match kind {
        "FeatureCollection" => {
            let features = node
                .get("features")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Polygon("FeatureCollection without features".into()))?;
            for f in features {
                collect_exteriors(f, out)?;
            }
        }
        "Feature" => match node.get("geometry") {
            Some(Value::Null) | None => {}
            Some(g) => collect_exteriors(g, out)?,
        },
        "GeometryCollection" => {
            if let Some(gs) = node.get("geometries").and_then(Value::as_array) {
                for g in gs {
                    collect_exteriors(g, out)?;
                }
            }
        }
        "Polygon" => {
            let rings = coords(node)?
                .as_array()
                .ok_or_else(|| Error::Polygon("Polygon coordinates must be an array".into()))?;
            if let Some(exterior) = rings.first() {
                out.push(parse_ring(exterior)?);
            }
        }
        "MultiPolygon" => {
            let polys = coords(node)?.as_array().ok_or_else(|| {
                Error::Polygon("MultiPolygon coordinates must be an array".into())
            })?;
            for poly in polys {
                let rings = poly
                    .as_array()
                    .ok_or_else(|| Error::Polygon("malformed MultiPolygon member".into()))?;
                if let Some(exterior) = rings.first() {
                    out.push(parse_ring(exterior)?);
                }
            }
        }
        // Points and lines carry no area.
        _ => {}
    }
    Ok(())
}

fn coords(node: &Value) -> Result<&Value> {
    node.get("coordinates")
        .ok_or_else(|| Error::Polygon("geometry without coordinates".into()))
}

fn parse_ring(v: &Value) -> Result<Vec<[f64; 2]>> {
    let pts = v
        .as_array()
        .ok_or_else(|| Error::Polygon("ring must be an array of positions".into()))?;
    pts.iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2);
            match xy.map(|a| (a[0].as_f64(), a[1].as_f64())) {
                Some((Some(x), Some(y))) => Ok([x, y]),
                _ => Err(Error::Polygon(format!("bad position {p}"))),
            }
        })
        .collect()
}
