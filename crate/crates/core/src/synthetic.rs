//! Deterministic synthetic faces: canonical landmarks, a matching label map
//! and a rendered photo-like raster, with or without makeup.
//!
//! Used for fixtures and tests where real detector and parser output is not
//! available.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{canonical, LandmarkSet, Point, LANDMARK_COUNT};
use crate::imgcore::{quantize, RasterImage};
use crate::masks::{FacialClass, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MakeupStyle {
    Bare,
    /// Rose lipstick, pink blush, soft foundation.
    Rose,
    /// Deep plum lipstick, mauve shadow, darker contour.
    Plum,
}

impl std::str::FromStr for MakeupStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bare" => Ok(Self::Bare),
            "rose" => Ok(Self::Rose),
            "plum" => Ok(Self::Plum),
            other => Err(format!("unknown style `{other}` (expected bare, rose or plum)")),
        }
    }
}

struct Palette {
    skin: [f64; 3],
    skin_noise: f64,
    lips: [f64; 3],
    blush: Option<[f64; 3]>,
    shadow: Option<[f64; 3]>,
    brows: [f64; 3],
    light_falloff: f64,
}

impl MakeupStyle {
    fn palette(self) -> Palette {
        match self {
            MakeupStyle::Bare => Palette {
                skin: [212.0, 168.0, 140.0],
                skin_noise: 7.0,
                lips: [184.0, 116.0, 110.0],
                blush: None,
                shadow: None,
                brows: [92.0, 66.0, 48.0],
                light_falloff: 0.14,
            },
            MakeupStyle::Rose => Palette {
                skin: [226.0, 184.0, 162.0],
                skin_noise: 2.5,
                lips: [206.0, 58.0, 84.0],
                blush: Some([232.0, 128.0, 140.0]),
                shadow: Some([176.0, 112.0, 128.0]),
                brows: [70.0, 48.0, 36.0],
                light_falloff: 0.10,
            },
            MakeupStyle::Plum => Palette {
                skin: [220.0, 176.0, 150.0],
                skin_noise: 3.0,
                lips: [128.0, 34.0, 64.0],
                blush: Some([206.0, 120.0, 124.0]),
                shadow: Some([120.0, 76.0, 110.0]),
                brows: [54.0, 38.0, 30.0],
                light_falloff: 0.22,
            },
        }
    }
}

/// Face placement in an image: an ellipse with center and half-axes, from
/// which every landmark and region is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    pub width: usize,
    pub height: usize,
    pub center: Point,
    pub half_width: f64,
    pub half_height: f64,
}

fn ellipse_points(c: Point, rx: f64, ry: f64, n: usize) -> impl Iterator<Item = Point> {
    (0..n).map(move |j| {
        let t = std::f64::consts::TAU * j as f64 / n as f64;
        Point::new(c.x + rx * t.cos(), c.y + ry * t.sin())
    })
}

fn in_ellipse(p: Point, c: Point, rx: f64, ry: f64) -> bool {
    let dx = (p.x - c.x) / rx;
    let dy = (p.y - c.y) / ry;
    dx * dx + dy * dy <= 1.0
}

fn in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|c| a[c] + (b[c] - a[c]) * t)
}

impl FaceGeometry {
    /// Face roughly centered, filling about 60% of the frame width.
    pub fn centered(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            center: Point::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0 + 0.03 * height as f64),
            half_width: 0.3 * width as f64,
            half_height: 0.36 * height as f64,
        }
    }

    fn rel(&self, fx: f64, fy: f64) -> Point {
        Point::new(self.center.x + fx * self.half_width, self.center.y + fy * self.half_height)
    }

    fn eye_center(&self, right: bool) -> Point {
        self.rel(if right { -0.4 } else { 0.4 }, -0.2)
    }

    fn brow_center(&self, right: bool) -> Point {
        self.rel(if right { -0.42 } else { 0.42 }, -0.42)
    }

    fn mouth_center(&self) -> Point {
        self.rel(0.0, 0.52)
    }

    /// The 90 canonical points as an unchecked list.
    pub fn landmark_points(&self) -> Vec<Point> {
        let (rx, ry) = (self.half_width, self.half_height);
        let mut pts = Vec::with_capacity(LANDMARK_COUNT);
        for k in 0..21 {
            let t = std::f64::consts::PI * k as f64 / 20.0;
            pts.push(Point::new(self.center.x - rx * t.cos(), self.center.y + ry * t.sin()));
        }
        for right in [true, false] {
            let b = self.brow_center(right);
            for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                pts.push(Point::new(b.x + 0.22 * rx * t, b.y - 0.035 * ry - 0.03 * ry * (1.0 - t * t)));
            }
            for t in [0.6, 0.0, -0.6] {
                pts.push(Point::new(b.x + 0.22 * rx * t, b.y + 0.035 * ry - 0.02 * ry * (1.0 - t * t)));
            }
        }
        let nose_side = |t: f64, sign: f64| {
            Point::new(self.center.x + sign * (0.05 + 0.1 * t * t) * rx, self.center.y + (-0.25 + 0.42 * t) * ry)
        };
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            pts.push(nose_side(t, -1.0));
        }
        pts.push(self.rel(-0.05, 0.22));
        pts.push(self.rel(0.05, 0.22));
        for t in [1.0, 0.75, 0.5, 0.25, 0.0] {
            pts.push(nose_side(t, 1.0));
        }
        for right in [true, false] {
            pts.extend(ellipse_points(self.eye_center(right), 0.18 * rx, 0.07 * ry, 10));
        }
        pts.extend(ellipse_points(self.mouth_center(), 0.32 * rx, 0.12 * ry, 12));
        pts.extend(ellipse_points(self.mouth_center(), 0.22 * rx, 0.035 * ry, 9));
        debug_assert_eq!(pts.len(), LANDMARK_COUNT);
        pts
    }

    /// # Panics
    /// If the face does not fit inside the frame.
    pub fn landmarks(&self) -> LandmarkSet {
        LandmarkSet::new(self.landmark_points(), self.width, self.height).expect("synthetic face fits its frame")
    }

    /// Label map of the face; `airbangs` adds a hair fringe over the forehead.
    pub fn labels(&self, airbangs: bool) -> LabelMap {
        let pts = self.landmark_points();
        let poly = |r: std::ops::Range<usize>| pts[r].to_vec();
        let (right_brow, left_brow) = (poly(canonical::RIGHT_BROW), poly(canonical::LEFT_BROW));
        let (right_eye, left_eye) = (poly(canonical::RIGHT_EYE), poly(canonical::LEFT_EYE));
        let nose = poly(canonical::NOSE);
        let (outer_lip, inner_lip) = (poly(canonical::OUTER_LIP), poly(canonical::INNER_LIP));
        let (rx, ry) = (self.half_width, self.half_height);
        let head_center = self.rel(0.0, -0.1);
        let mouth = self.mouth_center();

        LabelMap::from_fn(self.width, self.height, |x, y| {
            let p = Point::new(x as f64, y as f64);
            if !in_ellipse(p, self.center, rx, ry) {
                let hair = in_ellipse(p, head_center, 1.12 * rx, 1.2 * ry) && p.y < self.center.y + 0.2 * ry;
                return if hair { FacialClass::Hair } else { FacialClass::Background };
            }
            if airbangs {
                let wave = 0.06 * ry * (p.x / (0.15 * rx)).sin();
                if p.y < self.center.y - 0.6 * ry + wave {
                    return FacialClass::Hair;
                }
            }
            if in_polygon(p, &inner_lip) {
                FacialClass::MouthCavity
            } else if in_polygon(p, &outer_lip) {
                if p.y < mouth.y { FacialClass::UpperLip } else { FacialClass::LowerLip }
            } else if in_polygon(p, &right_eye) {
                FacialClass::RightEye
            } else if in_polygon(p, &left_eye) {
                FacialClass::LeftEye
            } else if in_polygon(p, &right_brow) {
                FacialClass::RightEyebrow
            } else if in_polygon(p, &left_brow) {
                FacialClass::LeftEyebrow
            } else if in_polygon(p, &nose) {
                FacialClass::Nose
            } else {
                FacialClass::Skin
            }
        })
    }

    pub fn render(&self, style: MakeupStyle, seed: u64) -> RasterImage {
        self.render_scene(style, seed, false)
    }

    /// Renders the face with per-pixel texture noise from `seed`, side
    /// lighting, and the style's makeup.
    pub fn render_scene(&self, style: MakeupStyle, seed: u64, airbangs: bool) -> RasterImage {
        let pal = style.palette();
        let labels = self.labels(airbangs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rx, ry) = (self.half_width, self.half_height);
        let cheeks = [self.rel(-0.5, 0.15), self.rel(0.5, 0.15)];
        let eyes = [self.eye_center(true), self.eye_center(false)];

        RasterImage::from_fn(self.width, self.height, |x, y| {
            let p = Point::new(x as f64, y as f64);
            let noise: f64 = rng.random_range(-1.0..1.0);
            let class = labels.label(x, y);
            let light = 1.0 - pal.light_falloff * (p.x - self.center.x) / rx;
            let skin_at = |p: Point| {
                let mut c = pal.skin;
                if let Some(blush) = pal.blush {
                    for ch in &cheeks {
                        let d2 = ((p.x - ch.x) / (0.22 * rx)).powi(2) + ((p.y - ch.y) / (0.15 * ry)).powi(2);
                        c = mix(c, blush, 0.55 * (-d2).exp());
                    }
                }
                if let Some(shadow) = pal.shadow {
                    for e in &eyes {
                        let d2 = ((p.x - e.x) / (0.22 * rx)).powi(2) + ((p.y - e.y + 0.09 * ry) / (0.08 * ry)).powi(2);
                        c = mix(c, shadow, 0.6 * (-d2).exp());
                    }
                }
                c
            };
            let (base, grain) = match class {
                FacialClass::Background => {
                    let t = y as f64 / self.height as f64;
                    ([206.0 - 20.0 * t, 214.0 - 14.0 * t, 224.0 - 6.0 * t], 1.0)
                }
                FacialClass::Hair => ([58.0, 40.0, 30.0], 9.0),
                FacialClass::Skin => (skin_at(p), pal.skin_noise),
                FacialClass::Nose => (skin_at(p).map(|v| v * 0.96), pal.skin_noise),
                FacialClass::LeftEyebrow | FacialClass::RightEyebrow => (pal.brows, 6.0),
                FacialClass::LeftEye | FacialClass::RightEye => {
                    let e = if class == FacialClass::RightEye { eyes[0] } else { eyes[1] };
                    if p.distance(e) < 0.06 * rx { ([62.0, 44.0, 34.0], 2.0) } else { ([236.0, 234.0, 228.0], 2.0) }
                }
                FacialClass::UpperLip | FacialClass::LowerLip => (pal.lips, 3.0),
                FacialClass::MouthCavity => ([72.0, 24.0, 30.0], 2.0),
            };
            let shade = if matches!(class, FacialClass::Background) { 1.0 } else { light };
            base.map(|v| quantize(v * shade + grain * noise))
        })
        .expect("frame is non-empty")
    }
}
