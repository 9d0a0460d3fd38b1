//! Deterministic synthetic scenes: the bundled mini-dataset and helpers for
//! building test fixtures.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edges::gradient_edges;
use crate::error::Result;
use crate::floodfill::PointAnnotation;
use crate::imaging::{BinaryMask, GrayMap, Point, RasterImage};
use crate::io::{self, AnnotationFile};

pub const MINI_WIDTH: usize = 64;
pub const MINI_HEIGHT: usize = 48;

#[derive(Debug, Clone, Copy)]
pub enum Shape {
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Rect { x0: usize, y0: usize, x1: usize, y1: usize },
}

impl Shape {
    pub fn contains(&self, p: Point) -> bool {
        let (x, y) = (p.x as f64, p.y as f64);
        match *self {
            Shape::Ellipse { cx, cy, rx, ry } => ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0,
            Shape::Rect { x0, y0, x1, y1 } => (x0..x1).contains(&p.x) && (y0..y1).contains(&p.y),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Object {
    shape: Shape,
    color: [u8; 3],
    salient: bool,
    /// Present only in the round-1 map (a hallucinated detection).
    phantom: bool,
    striped: bool,
}

struct SceneSpec {
    id: &'static str,
    background: ([u8; 3], [u8; 3]),
    objects: Vec<Object>,
    foreground_points: Vec<Point>,
    background_point: Point,
}

/// One synthetic image with everything derived from it.
#[derive(Debug, Clone)]
pub struct Scene {
    pub id: String,
    pub image: RasterImage,
    pub gt: BinaryMask,
    pub annotation: PointAnnotation,
    /// Stand-in for a first-round saliency prediction: the salient objects,
    /// plus equally confident unannotated distractors and hallucinated blobs.
    pub round1: GrayMap,
}

fn salient(shape: Shape, color: [u8; 3]) -> Object {
    Object { shape, color, salient: true, phantom: false, striped: false }
}

fn distractor(shape: Shape, color: [u8; 3]) -> Object {
    Object { shape, color, salient: false, phantom: false, striped: false }
}

fn phantom(shape: Shape) -> Object {
    Object { shape, color: [0; 3], salient: false, phantom: true, striped: false }
}

fn specs() -> Vec<SceneSpec> {
    let e = |cx, cy, rx, ry| Shape::Ellipse { cx, cy, rx, ry };
    let r = |x0, y0, x1, y1| Shape::Rect { x0, y0, x1, y1 };
    vec![
        SceneSpec {
            id: "m01_single",
            background: ([70, 90, 120], [110, 130, 150]),
            objects: vec![salient(e(32.0, 24.0, 11.0, 8.0), [210, 40, 40]), phantom(e(54.0, 38.0, 4.0, 4.0))],
            foreground_points: vec![Point::new(32, 24)],
            background_point: Point::new(4, 43),
        },
        SceneSpec {
            id: "m02_pair",
            background: ([40, 60, 50], [90, 110, 80]),
            objects: vec![
                salient(e(17.0, 23.0, 7.0, 7.0), [235, 220, 40]),
                salient(r(38, 14, 54, 34), [200, 40, 200]),
            ],
            foreground_points: vec![Point::new(17, 23), Point::new(46, 24)],
            background_point: Point::new(60, 4),
        },
        SceneSpec {
            id: "m03_distractor",
            background: ([120, 110, 90], [150, 140, 120]),
            objects: vec![
                salient(e(24.0, 28.0, 12.0, 9.0), [240, 130, 20]),
                distractor(e(51.0, 11.0, 6.0, 6.0), [90, 90, 90]),
            ],
            foreground_points: vec![Point::new(24, 28)],
            background_point: Point::new(4, 44),
        },
        SceneSpec {
            id: "m04_border",
            background: ([30, 30, 60], [60, 60, 90]),
            objects: vec![salient(r(0, 22, 18, 48), [40, 210, 220])],
            foreground_points: vec![Point::new(8, 36)],
            background_point: Point::new(56, 6),
        },
        SceneSpec {
            id: "m05_striped",
            background: ([60, 80, 60], [80, 70, 100]),
            objects: vec![
                Object { striped: true, ..salient(e(36.0, 22.0, 15.0, 10.0), [240, 240, 240]) },
                distractor(r(3, 36, 12, 45), [20, 20, 20]),
            ],
            foreground_points: vec![Point::new(36, 22)],
            background_point: Point::new(58, 44),
        },
    ]
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|c| a[c] as f64 + (b[c] as f64 - a[c] as f64) * t)
}

fn build(spec: &SceneSpec, seed: u64) -> Scene {
    let (w, h) = (MINI_WIDTH, MINI_HEIGHT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let visible: Vec<&Object> = spec.objects.iter().filter(|o| !o.phantom).collect();
    let mut rgb = Vec::with_capacity(3 * w * h);
    for y in 0..h {
        for x in 0..w {
            let p = Point::new(x, y);
            let t = (x + y) as f64 / (w + h - 2) as f64;
            let mut c = lerp(spec.background.0, spec.background.1, t);
            if let Some(o) = visible.iter().rev().find(|o| o.shape.contains(p)) {
                c = o.color.map(|v| v as f64);
                if o.striped && x % 4 == 0 {
                    c = c.map(|v| v - 30.0);
                }
            }
            for v in c {
                let noise: f64 = rng.gen_range(-6.0..6.0);
                rgb.push((v + noise).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let image = RasterImage::new(w, h, rgb).expect("sized buffer");
    let gt = BinaryMask::from_fn(w, h, |p| {
        visible.iter().rev().find(|o| o.shape.contains(p)).is_some_and(|o| o.salient)
    })
    .expect("valid dims");

    let raw: Vec<f64> = (0..w * h)
        .map(|i| {
            let p = Point::new(i % w, i / w);
            let base = match spec.objects.iter().rev().find(|o| o.shape.contains(p)) {
                Some(o) if o.salient => 0.9,
                Some(_) => 0.9,
                None => 0.08,
            };
            base + rng.gen_range(-0.05..0.05)
        })
        .collect();
    let round1 = GrayMap::from_fn(w, h, |p| {
        let mut acc = 0.0;
        let mut n = 0.0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
                if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                    acc += raw[y as usize * w + x as usize];
                    n += 1.0;
                }
            }
        }
        // quantized so the map survives an 8-bit round trip unchanged
        ((acc / n).clamp(0.0, 1.0) * 255.0).round() / 255.0
    })
    .expect("valid dims");

    Scene {
        id: spec.id.to_string(),
        image,
        gt,
        annotation: PointAnnotation {
            image_id: spec.id.to_string(),
            width: w,
            height: h,
            foreground_points: spec.foreground_points.clone(),
            background_point: spec.background_point,
        },
        round1,
    }
}

/// The five bundled scenes, in id order.
pub fn mini_dataset() -> Vec<Scene> {
    specs()
        .iter()
        .enumerate()
        .map(|(i, s)| build(s, 0x5a1e_0000 + i as u64))
        .collect()
}

/// Writes `images/`, `edges/`, `gt/`, `round1/` and `annotations.json`
/// under `root`. Edge maps come from [`gradient_edges`].
pub fn write_mini_dataset(root: &Path) -> Result<()> {
    let scenes = mini_dataset();
    let mut annotations = AnnotationFile::default();
    for s in &scenes {
        let name = format!("{}.png", s.id);
        io::write_rgb_png(&root.join("images").join(&name), &s.image.to_rgb_image())?;
        io::write_gray_map(&root.join("edges").join(&name), &gradient_edges(&s.image))?;
        io::write_gray_png(&root.join("gt").join(&name), &s.gt.to_gray_image())?;
        io::write_gray_map(&root.join("round1").join(&name), &s.round1)?;
        annotations.upsert(s.annotation.clone());
    }
    io::write_bytes(&root.join("annotations.json"), annotations.to_json().as_bytes())
}

/// Random non-touching rectangular blobs on a dark background, for
/// suppression tests. Returns the map and one interior point per blob.
pub fn random_blobs(rng: &mut impl Rng, width: usize, height: usize, count: usize) -> (GrayMap, Vec<Point>) {
    let mut occupied = vec![false; width * height];
    let mut values = vec![0.0; width * height];
    let mut centers = Vec::new();
    let mut attempts = 0;
    while centers.len() < count && attempts < 1000 {
        attempts += 1;
        let bw = rng.gen_range(2..=width / 4);
        let bh = rng.gen_range(2..=height / 4);
        let x0 = rng.gen_range(0..=width - bw);
        let y0 = rng.gen_range(0..=height - bh);
        // keep a one-pixel gap so blobs never merge
        let clear = (y0.saturating_sub(1)..(y0 + bh + 1).min(height))
            .all(|y| (x0.saturating_sub(1)..(x0 + bw + 1).min(width)).all(|x| !occupied[y * width + x]));
        if !clear {
            continue;
        }
        let level = rng.gen_range(0.6..1.0);
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                occupied[y * width + x] = true;
                values[y * width + x] = level;
            }
        }
        centers.push(Point::new(x0 + rng.gen_range(0..bw), y0 + rng.gen_range(0..bh)));
    }
    for v in values.iter_mut().filter(|v| **v == 0.0) {
        *v = rng.gen_range(0.0..0.4);
    }
    (GrayMap::new(width, height, values).expect("values in range"), centers)
}
