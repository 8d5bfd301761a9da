use std::path::Path;

use serde_json::{json, Value};

use super::{read_text, write_text, IoError};
use crate::town::{Building, BuildingId, Category};

type Ring = Vec<[f64; 2]>;

/// Area centroid of a polygon given as rings, exterior first and holes after.
/// Falls back to the vertex mean when the area vanishes.
pub fn polygon_centroid(polygons: &[Vec<Ring>]) -> [f64; 2] {
    let mut area = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for rings in polygons {
        for (k, ring) in rings.iter().enumerate() {
            let (a, x, y) = ring_moments(ring);
            // exterior counts positively whatever its orientation, holes negatively
            let sign = if (k == 0) == (a >= 0.0) { 1.0 } else { -1.0 };
            area += sign * a;
            cx += sign * x;
            cy += sign * y;
        }
    }
    if area.abs() > 1e-12 {
        return [cx / (3.0 * area), cy / (3.0 * area)];
    }
    let points: Vec<&[f64; 2]> = polygons.iter().flatten().flatten().collect();
    let n = points.len().max(1) as f64;
    [points.iter().map(|p| p[0]).sum::<f64>() / n, points.iter().map(|p| p[1]).sum::<f64>() / n]
}

/// Signed area and first moments (times 3) of a ring.
fn ring_moments(ring: &[[f64; 2]]) -> (f64, f64, f64) {
    let n = ring.len();
    let (mut a, mut x, mut y) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let cross = p[0] * q[1] - q[0] * p[1];
        a += cross;
        x += (p[0] + q[0]) * cross;
        y += (p[1] + q[1]) * cross;
    }
    (a / 2.0, x / 2.0, y / 2.0)
}

fn feature_err(path: &Path, feature: usize, message: impl Into<String>) -> IoError {
    IoError::Feature { path: path.to_path_buf(), feature, message: message.into() }
}

fn parse_ring(v: &Value, path: &Path, feature: usize) -> Result<Ring, IoError> {
    let points = v.as_array().ok_or_else(|| feature_err(path, feature, "ring is not an array"))?;
    if points.len() < 3 {
        return Err(feature_err(path, feature, "ring needs at least three positions"));
    }
    points
        .iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2).ok_or_else(|| feature_err(path, feature, "bad position"))?;
            let x = xy[0].as_f64().filter(|x| x.is_finite());
            let y = xy[1].as_f64().filter(|y| y.is_finite());
            match (x, y) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => Err(feature_err(path, feature, "coordinates must be finite numbers")),
            }
        })
        .collect()
}

fn parse_polygon(v: &Value, path: &Path, feature: usize) -> Result<Vec<Ring>, IoError> {
    let rings = v.as_array().ok_or_else(|| feature_err(path, feature, "polygon is not an array of rings"))?;
    if rings.is_empty() {
        return Err(feature_err(path, feature, "polygon has no rings"));
    }
    rings.iter().map(|r| parse_ring(r, path, feature)).collect()
}

/// Parse a FeatureCollection of Polygon/MultiPolygon features, each with a
/// `category` property. Building ids follow feature order.
pub fn parse_buildings(text: &str, path: &Path) -> Result<Vec<Building>, IoError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let top = |m: &str| IoError::Config { path: path.to_path_buf(), message: m.to_string() };
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(top("top-level object must be a GeoJSON FeatureCollection"));
    }
    let features = doc.get("features").and_then(Value::as_array).ok_or_else(|| top("missing `features` array"))?;
    let mut buildings = Vec::with_capacity(features.len());
    for (index, f) in features.iter().enumerate() {
        let category = f
            .get("properties")
            .and_then(|p| p.get("category"))
            .and_then(Value::as_str)
            .ok_or_else(|| feature_err(path, index, "missing string property `category`"))?;
        let category: Category = category
            .parse()
            .map_err(|_| feature_err(path, index, format!("unknown category `{category}`")))?;
        let geometry = f.get("geometry").ok_or_else(|| feature_err(path, index, "missing geometry"))?;
        let coords = geometry.get("coordinates").ok_or_else(|| feature_err(path, index, "missing coordinates"))?;
        let polygons = match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![parse_polygon(coords, path, index)?],
            Some("MultiPolygon") => {
                let parts = coords.as_array().ok_or_else(|| feature_err(path, index, "bad MultiPolygon"))?;
                if parts.is_empty() {
                    return Err(feature_err(path, index, "empty MultiPolygon"));
                }
                parts.iter().map(|p| parse_polygon(p, path, index)).collect::<Result<_, _>>()?
            }
            other => {
                return Err(feature_err(
                    path,
                    index,
                    format!("geometry must be Polygon or MultiPolygon, got {}", other.unwrap_or("nothing")),
                ))
            }
        };
        buildings.push(Building {
            id: index as BuildingId,
            category,
            centroid: polygon_centroid(&polygons),
            footprint: polygons.into_iter().map(|mut rings| rings.swap_remove(0)).collect(),
        });
    }
    Ok(buildings)
}

pub fn load_buildings(path: &Path) -> Result<Vec<Building>, IoError> {
    parse_buildings(&read_text(path)?, path)
}

pub fn buildings_to_geojson(buildings: &[Building]) -> Value {
    let features: Vec<Value> = buildings
        .iter()
        .map(|b| {
            let geometry = if b.footprint.len() == 1 {
                json!({ "type": "Polygon", "coordinates": [b.footprint[0]] })
            } else {
                let parts: Vec<Value> = b.footprint.iter().map(|r| json!([r])).collect();
                json!({ "type": "MultiPolygon", "coordinates": parts })
            };
            json!({ "type": "Feature", "properties": { "category": b.category.as_str() }, "geometry": geometry })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn write_buildings(path: &Path, buildings: &[Building]) -> Result<(), IoError> {
    write_text(path, &buildings_to_geojson(buildings).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("town.geojson")
    }

    fn collection(category: &str, geometry: &str) -> String {
        format!(
            r#"{{"type":"FeatureCollection","features":[{{"type":"Feature","properties":{{"category":"{category}"}},"geometry":{geometry}}}]}}"#
        )
    }

    const SQUARE: &str = r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}"#;

    #[test]
    fn unit_square() {
        let b = parse_buildings(&collection("Residential", SQUARE), p()).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].category, Category::Residential);
        assert!((b[0].centroid[0] - 0.5).abs() < 1e-12 && (b[0].centroid[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn centroid_of_l_shape_and_holes() {
        // L made of the unit squares at (0,0), (1,0), (0,1): centroid (5/6, 5/6)
        let l = vec![vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]];
        let c = polygon_centroid(&[l]);
        assert!((c[0] - 5.0 / 6.0).abs() < 1e-12 && (c[1] - 5.0 / 6.0).abs() < 1e-12);
        // 4x4 square minus the 2x2 corner square, clockwise exterior
        let outer = vec![[0.0, 0.0], [0.0, 4.0], [4.0, 4.0], [4.0, 0.0]];
        let hole = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let c = polygon_centroid(&[vec![outer, hole]]);
        let expected = (16.0 * 2.0 - 4.0 * 1.0) / 12.0;
        assert!((c[0] - expected).abs() < 1e-12 && (c[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn rejections() {
        assert!(matches!(parse_buildings(&collection("cinema", SQUARE), p()), Err(IoError::Feature { .. })));
        let point = r#"{"type":"Point","coordinates":[0,0]}"#;
        assert!(matches!(parse_buildings(&collection("commercial", point), p()), Err(IoError::Feature { .. })));
        assert!(matches!(parse_buildings("{\"type\":", p()), Err(IoError::Json { .. })));
        assert!(matches!(parse_buildings("[]", p()), Err(IoError::Config { .. })));
    }

    #[test]
    fn round_trip() {
        let town = crate::town::synthetic_layout(&crate::town::LayoutCounts::default(), 2);
        let text = buildings_to_geojson(&town).to_string();
        let back = parse_buildings(&text, p()).unwrap();
        assert_eq!(back.len(), town.len());
        for (a, b) in town.iter().zip(&back) {
            assert_eq!(a.category, b.category);
            assert_eq!(a.footprint, b.footprint);
            assert!((a.centroid[0] - b.centroid[0]).abs() < 1e-9);
        }
    }
}
