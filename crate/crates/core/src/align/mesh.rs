use spade::{DelaunayTriangulation, Point2, Triangulation};

use super::{AlignError, LandmarkSet, Point};

/// Smallest admissible triangle area, in square pixels.
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;
const DUPLICATE_TOLERANCE: f64 = 1e-6;

/// Four corners then four edge midpoints of a `width` x `height` frame, on
/// pixel-center coordinates.
pub fn border_anchors(width: usize, height: usize) -> [Point; 8] {
    let (w, h) = (width as f64 - 1.0, height as f64 - 1.0);
    [
        Point::new(0.0, 0.0),
        Point::new(w, 0.0),
        Point::new(w, h),
        Point::new(0.0, h),
        Point::new(w / 2.0, 0.0),
        Point::new(w, h / 2.0),
        Point::new(w / 2.0, h),
        Point::new(0.0, h / 2.0),
    ]
}

/// Delaunay triangulation over the landmarks followed by the border anchors.
///
/// Triangles are counter-clockwise (in a y-down frame, positive signed area),
/// rotated so their smallest index comes first, and sorted, which makes the
/// mesh independent of the triangulator's internal ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

impl TriangleMesh {
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    /// Number of vertices on the convex hull, collinear ones included.
    pub fn hull_vertex_count(&self) -> usize {
        let mut edges = std::collections::HashMap::<(usize, usize), usize>::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        // Hull edges belong to exactly one triangle; the hull is a single cycle.
        edges.values().filter(|&&n| n == 1).count()
    }
}

pub fn build_mesh(landmarks: &LandmarkSet, width: usize, height: usize) -> Result<TriangleMesh, AlignError> {
    let mut vertices: Vec<Point> = landmarks.points().to_vec();
    vertices.extend(border_anchors(width, height));
    mesh_from_vertices(vertices)
}

pub(crate) fn mesh_from_vertices(vertices: Vec<Point>) -> Result<TriangleMesh, AlignError> {
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            if vertices[i].distance(vertices[j]) <= DUPLICATE_TOLERANCE {
                return Err(AlignError::DuplicatePoint { first: i, second: j });
            }
        }
    }

    let mut dt: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    for (i, p) in vertices.iter().enumerate() {
        let handle = dt
            .insert(Point2::new(p.x, p.y))
            .map_err(|e| AlignError::Triangulation(format!("{e:?}")))?;
        if handle.index() != i {
            return Err(AlignError::Triangulation(format!(
                "vertex {i} merged into vertex {}",
                handle.index()
            )));
        }
    }

    let mut triangles = Vec::with_capacity(dt.num_inner_faces());
    for face in dt.inner_faces() {
        let mut tri = face.vertices().map(|v| v.fix().index());
        let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if area < 0.0 {
            tri.swap(1, 2);
        }
        if area.abs() <= MIN_TRIANGLE_AREA {
            return Err(AlignError::DegenerateTriangle { vertices: tri, area: area.abs() });
        }
        let min_pos = (0..3).min_by_key(|&k| tri[k]).unwrap_or(0);
        tri.rotate_left(min_pos);
        triangles.push(tri);
    }
    triangles.sort_unstable();
    Ok(TriangleMesh { vertices, triangles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::FaceGeometry;

    fn fixture() -> (LandmarkSet, usize, usize) {
        let geo = FaceGeometry::centered(160, 180);
        (geo.landmarks(), 160, 180)
    }

    #[test]
    fn euler_count_on_fixture() {
        let (lm, w, h) = fixture();
        let mesh = build_mesh(&lm, w, h).unwrap();
        assert_eq!(mesh.vertices().len(), 98);
        let hull = mesh.hull_vertex_count();
        // Landmarks sit strictly inside, so the hull is the 8 border anchors.
        assert_eq!(hull, 8);
        assert_eq!(mesh.triangles().len(), 2 * 98 - 2 - hull);
        assert_eq!(mesh.triangles().len(), 186);
    }

    #[test]
    fn triangles_tile_the_frame() {
        let (lm, w, h) = fixture();
        let mesh = build_mesh(&lm, w, h).unwrap();
        let total: f64 = (0..mesh.triangles().len()).map(|t| mesh.area(t)).sum();
        let frame = (w as f64 - 1.0) * (h as f64 - 1.0);
        assert!((total - frame).abs() < 1e-6 * frame);
        assert!((0..mesh.triangles().len()).all(|t| mesh.area(t) > MIN_TRIANGLE_AREA));
    }

    #[test]
    fn empty_circumcircles() {
        let (lm, w, h) = fixture();
        let mesh = build_mesh(&lm, w, h).unwrap();
        for tri in mesh.triangles() {
            let [a, b, c] = tri.map(|i| mesh.vertices()[i]);
            for (k, p) in mesh.vertices().iter().enumerate() {
                if tri.contains(&k) {
                    continue;
                }
                // In-circle determinant for a counter-clockwise (y-down) triangle.
                let (ax, ay) = (a.x - p.x, a.y - p.y);
                let (bx, by) = (b.x - p.x, b.y - p.y);
                let (cx, cy) = (c.x - p.x, c.y - p.y);
                let det = (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
                    + (cx * cx + cy * cy) * (ax * by - bx * ay);
                let scale = (ax * ax + ay * ay).max(bx * bx + by * by).max(cx * cx + cy * cy).powi(2);
                assert!(det <= 1e-9 * scale, "vertex {k} inside circumcircle of {tri:?}");
            }
        }
    }

    #[test]
    fn duplicate_landmark_is_rejected() {
        let (lm, w, h) = fixture();
        let mut pts = lm.points().to_vec();
        pts[40] = pts[12];
        let dup = LandmarkSet::new(pts, w, h).unwrap();
        assert!(matches!(
            build_mesh(&dup, w, h),
            Err(AlignError::DuplicatePoint { first: 12, second: 40 })
        ));
    }

    #[test]
    fn landmark_on_anchor_is_rejected() {
        let (lm, w, h) = fixture();
        let mut pts = lm.points().to_vec();
        pts[0] = Point::new(0.0, 0.0);
        let set = LandmarkSet::new(pts, w, h).unwrap();
        assert!(matches!(build_mesh(&set, w, h), Err(AlignError::DuplicatePoint { first: 0, second: 90 })));
    }

    #[test]
    fn deterministic() {
        let (lm, w, h) = fixture();
        assert_eq!(build_mesh(&lm, w, h).unwrap(), build_mesh(&lm, w, h).unwrap());
    }
}
