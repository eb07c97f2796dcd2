use super::mesh::{border_anchors, mesh_from_vertices, signed_area};
use super::{AlignError, LandmarkSet, Point, TriangleMesh};
use crate::imgcore::{quantize, RasterImage, ScalarField};
use crate::masks::LabelMap;

/// Row-major affine map `(x, y) -> (m[0] x + m[1] y + m[2], m[3] x + m[4] y + m[5])`.
type Affine = [f64; 6];

const NO_TRIANGLE: u32 = u32::MAX;

/// Piecewise-affine correspondence from a destination frame back into a
/// source frame, one affine map per destination triangle.
#[derive(Debug, Clone)]
pub struct PiecewiseAffineWarp {
    mesh: TriangleMesh,
    maps: Vec<Affine>,
    owner: Vec<u32>,
    dst_width: usize,
    dst_height: usize,
}

fn affine_between(dst: [Point; 3], src: [Point; 3]) -> Affine {
    let (d1x, d1y) = (dst[1].x - dst[0].x, dst[1].y - dst[0].y);
    let (d2x, d2y) = (dst[2].x - dst[0].x, dst[2].y - dst[0].y);
    let (s1x, s1y) = (src[1].x - src[0].x, src[1].y - src[0].y);
    let (s2x, s2y) = (src[2].x - src[0].x, src[2].y - src[0].y);
    let det = d1x * d2y - d2x * d1y;
    // Inverse of the destination edge matrix [d1 d2].
    let (i00, i01, i10, i11) = (d2y / det, -d2x / det, -d1y / det, d1x / det);
    let m00 = s1x * i00 + s2x * i10;
    let m01 = s1x * i01 + s2x * i11;
    let m10 = s1y * i00 + s2y * i10;
    let m11 = s1y * i01 + s2y * i11;
    [
        m00,
        m01,
        src[0].x - m00 * dst[0].x - m01 * dst[0].y,
        m10,
        m11,
        src[0].y - m10 * dst[0].x - m11 * dst[0].y,
    ]
}

fn apply(m: &Affine, x: f64, y: f64) -> Point {
    Point::new(m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5])
}

/// Smallest normalized barycentric coordinate of `p`; non-negative inside.
fn inside_margin(tri: [Point; 3], p: Point) -> f64 {
    let area = signed_area(tri[0], tri[1], tri[2]);
    let b0 = signed_area(p, tri[1], tri[2]) / area;
    let b1 = signed_area(tri[0], p, tri[2]) / area;
    let b2 = signed_area(tri[0], tri[1], p) / area;
    b0.min(b1).min(b2)
}

const INSIDE_TOLERANCE: f64 = -1e-9;

impl PiecewiseAffineWarp {
    /// Triangulates the destination landmarks (plus border anchors of the
    /// destination frame) and pairs every triangle with its source image.
    pub fn new(
        src_landmarks: &LandmarkSet,
        src_size: (usize, usize),
        dst_landmarks: &LandmarkSet,
        dst_size: (usize, usize),
    ) -> Result<Self, AlignError> {
        let (dst_width, dst_height) = dst_size;
        let mut dst_vertices = dst_landmarks.points().to_vec();
        dst_vertices.extend(border_anchors(dst_width, dst_height));
        let mut src_vertices = src_landmarks.points().to_vec();
        src_vertices.extend(border_anchors(src_size.0, src_size.1));
        if src_vertices.len() != dst_vertices.len() {
            return Err(AlignError::VertexMismatch {
                source_count: src_vertices.len(),
                destination: dst_vertices.len(),
            });
        }
        let mesh = mesh_from_vertices(dst_vertices)?;
        let maps: Vec<Affine> = mesh
            .triangles()
            .iter()
            .map(|tri| {
                affine_between(tri.map(|i| mesh.vertices()[i]), tri.map(|i| src_vertices[i]))
            })
            .collect();

        // First triangle in sorted order claims shared edge pixels.
        let mut owner = vec![NO_TRIANGLE; dst_width * dst_height];
        for t in 0..mesh.triangles().len() {
            let tri = mesh.corners(t);
            let x0 = tri.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let x1 = (tri.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max).ceil() as usize).min(dst_width - 1);
            let y0 = tri.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let y1 = (tri.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max).ceil() as usize).min(dst_height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let slot = &mut owner[y * dst_width + x];
                    if *slot == NO_TRIANGLE && inside_margin(tri, Point::new(x as f64, y as f64)) >= INSIDE_TOLERANCE {
                        *slot = t as u32;
                    }
                }
            }
        }
        let mut warp = Self {
            mesh,
            maps,
            owner,
            dst_width,
            dst_height,
        };
        // Rounding can leave a pixel exactly on an edge unclaimed.
        for i in 0..warp.owner.len() {
            if warp.owner[i] == NO_TRIANGLE {
                let p = Point::new((i % dst_width) as f64, (i / dst_width) as f64);
                warp.owner[i] = warp.best_triangle(p) as u32;
            }
        }
        Ok(warp)
    }

    fn best_triangle(&self, p: Point) -> usize {
        (0..self.mesh.triangles().len())
            .map(|t| (t, inside_margin(self.mesh.corners(t), p)))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn dst_size(&self) -> (usize, usize) {
        (self.dst_width, self.dst_height)
    }

    /// Triangle index that owns destination pixel `(x, y)`.
    pub fn owner_of(&self, x: usize, y: usize) -> usize {
        self.owner[y * self.dst_width + x] as usize
    }

    /// Source position of an arbitrary destination point.
    pub fn map_point(&self, p: Point) -> Point {
        let t = self.best_triangle(p);
        apply(&self.maps[t], p.x, p.y)
    }

    /// Source position of destination pixel `(x, y)`.
    pub fn source_of(&self, x: usize, y: usize) -> Point {
        apply(&self.maps[self.owner_of(x, y)], x as f64, y as f64)
    }

    pub fn warp_image(&self, src: &RasterImage) -> RasterImage {
        let (sw, sh) = src.dims();
        let px = src.pixels();
        RasterImage::from_fn(self.dst_width, self.dst_height, |x, y| {
            let s = self.source_of(x, y);
            let (i00, i10, i01, i11, fx, fy) = bilinear_taps(s, sw, sh);
            let mut out = [0u8; 3];
            for (c, o) in out.iter_mut().enumerate() {
                let v = |i: usize| f64::from(px[i * 3 + c]);
                let top = v(i00) + (v(i10) - v(i00)) * fx;
                let bottom = v(i01) + (v(i11) - v(i01)) * fx;
                *o = quantize(top + (bottom - top) * fy);
            }
            out
        })
        .expect("destination dimensions are non-empty")
    }

    pub fn warp_field(&self, src: &ScalarField) -> ScalarField {
        let (sw, sh) = src.dims();
        let v = src.values();
        ScalarField::from_fn(self.dst_width, self.dst_height, |x, y| {
            let (i00, i10, i01, i11, fx, fy) = bilinear_taps(self.source_of(x, y), sw, sh);
            let top = v[i00] + (v[i10] - v[i00]) * fx;
            let bottom = v[i01] + (v[i11] - v[i01]) * fx;
            top + (bottom - top) * fy
        })
        .expect("bilinear blend of finite samples is finite")
    }

    pub fn warp_labels(&self, src: &LabelMap) -> LabelMap {
        let (sw, sh) = src.dims();
        let mut labels = Vec::with_capacity(self.dst_width * self.dst_height);
        for y in 0..self.dst_height {
            for x in 0..self.dst_width {
                let s = self.source_of(x, y);
                let sx = s.x.round().clamp(0.0, sw as f64 - 1.0) as usize;
                let sy = s.y.round().clamp(0.0, sh as f64 - 1.0) as usize;
                labels.push(src.label(sx, sy));
            }
        }
        LabelMap::from_classes(self.dst_width, self.dst_height, labels)
    }
}

/// Clamped bilinear neighbours `(top-left, top-right, bottom-left,
/// bottom-right)` as flat indices, plus the fractional offsets.
fn bilinear_taps(p: Point, w: usize, h: usize) -> (usize, usize, usize, usize, f64, f64) {
    let x = p.x.clamp(0.0, w as f64 - 1.0);
    let y = p.y.clamp(0.0, h as f64 - 1.0);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    (y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1, x - x0 as f64, y - y0 as f64)
}

/// Warps `src` (carrying `src_lm`) so that its landmarks land on `dst_lm` in
/// a frame of `dst_size`.
pub fn warp_image(
    src: &RasterImage,
    src_lm: &LandmarkSet,
    dst_lm: &LandmarkSet,
    dst_size: (usize, usize),
) -> Result<RasterImage, AlignError> {
    Ok(PiecewiseAffineWarp::new(src_lm, src.dims(), dst_lm, dst_size)?.warp_image(src))
}

pub fn warp_labels(
    src: &LabelMap,
    src_lm: &LandmarkSet,
    dst_lm: &LandmarkSet,
    dst_size: (usize, usize),
) -> Result<LabelMap, AlignError> {
    Ok(PiecewiseAffineWarp::new(src_lm, src.dims(), dst_lm, dst_size)?.warp_labels(src))
}

pub fn warp_field(
    src: &ScalarField,
    src_lm: &LandmarkSet,
    dst_lm: &LandmarkSet,
    dst_size: (usize, usize),
) -> Result<ScalarField, AlignError> {
    Ok(PiecewiseAffineWarp::new(src_lm, src.dims(), dst_lm, dst_size)?.warp_field(src))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::PixelCoord;
    use crate::masks::FacialClass;
    use crate::synthetic::FaceGeometry;

    fn checkerboard(w: usize, h: usize) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| if (x / 4 + y / 4) % 2 == 0 { [230, 40, 90] } else { [20, 200, 60] })
            .unwrap()
    }

    #[test]
    fn identity_warp() {
        let geo = FaceGeometry::centered(120, 140);
        let lm = geo.landmarks();
        let src = RasterImage::from_fn(120, 140, |x, y| [(x * 2) as u8, (y + x) as u8, (y * 3 % 256) as u8]).unwrap();
        let out = warp_image(&src, &lm, &lm, (120, 140)).unwrap();
        for (a, b) in out.pixels().iter().zip(src.pixels()) {
            assert!(a.abs_diff(*b) <= 1);
        }
    }

    #[test]
    fn translation_on_enlarged_canvas() {
        let geo = FaceGeometry::centered(120, 140);
        let src_lm = geo.landmarks();
        let dst_pts: Vec<Point> = src_lm.points().iter().map(|p| p.translated(5.0, 0.0)).collect();
        let dst_lm = LandmarkSet::new(dst_pts, 125, 140).unwrap();
        let src = checkerboard(120, 140);
        let warp = PiecewiseAffineWarp::new(&src_lm, (120, 140), &dst_lm, (125, 140)).unwrap();
        let out = warp.warp_image(&src);
        let mut checked = 0;
        for y in 0..140 {
            for x in 0..125 {
                let tri = warp.mesh().triangles()[warp.owner_of(x, y)];
                if tri.iter().all(|&i| i < 90) {
                    let a = out.pixel(PixelCoord::new(x, y));
                    let b = src.pixel(PixelCoord::new(x - 5, y));
                    assert!(a.iter().zip(b).all(|(p, q)| p.abs_diff(q) <= 1), "({x},{y})");
                    checked += 1;
                }
            }
        }
        assert!(checked > 3000, "interior covers the face, got {checked}");

        let labels = geo.labels(false);
        let moved = warp.warp_labels(&labels);
        for y in 0..140 {
            for x in 0..125 {
                let tri = warp.mesh().triangles()[warp.owner_of(x, y)];
                if tri.iter().all(|&i| i < 90) {
                    assert_eq!(moved.label(x, y), labels.label(x - 5, y));
                }
            }
        }
    }

    #[test]
    fn moving_one_source_landmark_is_local() {
        let geo = FaceGeometry::centered(120, 140);
        let lm = geo.landmarks();
        let k = 45;
        let mut moved_pts = lm.points().to_vec();
        moved_pts[k] = moved_pts[k].translated(2.5, -1.5);
        let moved = LandmarkSet::new(moved_pts, 120, 140).unwrap();

        let src = checkerboard(120, 140);
        let base = PiecewiseAffineWarp::new(&lm, (120, 140), &lm, (120, 140)).unwrap();
        let shifted = PiecewiseAffineWarp::new(&moved, (120, 140), &lm, (120, 140)).unwrap();
        let a = base.warp_image(&src);
        let b = shifted.warp_image(&src);
        let mut changed = 0;
        for y in 0..140 {
            for x in 0..120 {
                let t = base.owner_of(x, y);
                let adjacent = base.mesh().triangles()[t].contains(&k);
                let pa = a.pixel(PixelCoord::new(x, y));
                let pb = b.pixel(PixelCoord::new(x, y));
                if !adjacent {
                    assert_eq!(pa, pb, "({x},{y}) outside the landmark's fan changed");
                } else {
                    // Per-triangle oracle: the affine map of this triangle.
                    let tri = base.mesh().triangles()[t].map(|i| base.mesh().vertices()[i]);
                    let src_tri = base.mesh().triangles()[t].map(|i| if i < 90 { moved.get(i) } else { base.mesh().vertices()[i] });
                    let m = affine_between(tri, src_tri);
                    let s = apply(&m, x as f64, y as f64);
                    let expect = shifted.source_of(x, y);
                    assert!(s.distance(expect) < 1e-9);
                    changed += usize::from(pa != pb);
                }
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn labels_stay_categorical() {
        let geo = FaceGeometry::centered(100, 110);
        let other = FaceGeometry { center: Point::new(52.0, 57.0), half_width: 34.0, half_height: 40.0, ..geo };
        let labels = geo.labels(false);
        let out = warp_labels(&labels, &geo.landmarks(), &other.landmarks(), (100, 110)).unwrap();
        let present: std::collections::BTreeSet<FacialClass> = labels.classes().iter().copied().collect();
        assert!(out.classes().iter().all(|c| present.contains(c)));
        let same = warp_labels(&labels, &geo.landmarks(), &geo.landmarks(), (100, 110)).unwrap();
        assert_eq!(same, labels);
    }

    #[test]
    fn landmarks_map_onto_landmarks() {
        let a = FaceGeometry::centered(100, 110);
        let b = FaceGeometry { center: Point::new(47.0, 58.0), half_width: 30.0, half_height: 38.0, ..a };
        let warp = PiecewiseAffineWarp::new(&a.landmarks(), (100, 110), &b.landmarks(), (100, 110)).unwrap();
        for k in 0..90 {
            let s = warp.map_point(b.landmarks().get(k));
            assert!(s.distance(a.landmarks().get(k)) < 1e-9);
        }
    }

    #[test]
    fn deterministic_output() {
        let a = FaceGeometry::centered(90, 90);
        let b = FaceGeometry { half_width: 28.0, ..a };
        let src = checkerboard(90, 90);
        let x = warp_image(&src, &a.landmarks(), &b.landmarks(), (90, 90)).unwrap();
        let y = warp_image(&src, &a.landmarks(), &b.landmarks(), (90, 90)).unwrap();
        assert_eq!(x, y);
    }
}
