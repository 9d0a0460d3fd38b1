//! Fixtures and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use pointsal::{BinaryMask, GrayMap, Point, RasterImage};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Base colour plus bounded per-pixel noise, so neighbouring colour
/// differences stay in the range where the loss kernels are informative.
pub fn textured_image(rng: &mut impl Rng, w: usize, h: usize, spread: u8) -> RasterImage {
    let base: [u8; 3] = [rng.gen_range(40..216), rng.gen_range(40..216), rng.gen_range(40..216)];
    let rgb = (0..w * h)
        .flat_map(|_| base)
        .map(|c| c.saturating_add(rng.gen_range(0..=spread)).saturating_sub(spread / 2))
        .collect();
    RasterImage::new(w, h, rgb).unwrap()
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> RasterImage {
    let rgb = (0..3 * w * h).map(|_| rng.gen()).collect();
    RasterImage::new(w, h, rgb).unwrap()
}

/// Piecewise-constant field with a few levels, so band fills have structure.
pub fn random_field(rng: &mut impl Rng, w: usize, h: usize, levels: u32) -> GrayMap {
    let values = (0..w * h).map(|_| rng.gen_range(0..levels) as f64 / (levels - 1) as f64).collect();
    GrayMap::new(w, h, values).unwrap()
}

pub fn random_mask(rng: &mut impl Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    BinaryMask::from_fn(w, h, |p| bits[p.y * w + p.x]).unwrap()
}

/// Reachability by depth-first search over (x, y) pairs, written without
/// any of the library's raster helpers.
pub fn reachable(w: usize, h: usize, seed: (usize, usize), enter: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; w * h];
    let mut stack = vec![seed];
    seen[seed.1 * w + seed.0] = true;
    while let Some((x, y)) = stack.pop() {
        let mut visit = |nx: usize, ny: usize| {
            if !seen[ny * w + nx] && enter(nx, ny) {
                seen[ny * w + nx] = true;
                stack.push((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < w {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < h {
            visit(x, y + 1);
        }
    }
    seen
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Classic two-pass 4-connected labelling. Returns one root id per pixel
/// (`usize::MAX` for background) and the number of components.
pub fn two_pass_components(bits: &[bool], w: usize, h: usize) -> (Vec<usize>, usize) {
    let mut uf = UnionFind((0..w * h).collect());
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            if x > 0 && bits[i - 1] {
                uf.union(i, i - 1);
            }
            if y > 0 && bits[i - w] {
                uf.union(i, i - w);
            }
        }
    }
    let mut roots = vec![usize::MAX; w * h];
    let mut distinct = std::collections::BTreeSet::new();
    for i in 0..w * h {
        if bits[i] {
            roots[i] = uf.find(i);
            distinct.insert(roots[i]);
        }
    }
    (roots, distinct.len())
}

pub fn euclid(a: Point, b: Point) -> f64 {
    let (dx, dy) = (a.x as f64 - b.x as f64, a.y as f64 - b.y as f64);
    (dx * dx + dy * dy).sqrt()
}

/// Relative error. The denominator is floored at 1e-8, below which a central
/// difference with step 1e-5 is dominated by rounding.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central difference of `f` with respect to entry `i` of `values`.
pub fn central_difference(values: &[f64], i: usize, h: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut plus = values.to_vec();
    let mut minus = values.to_vec();
    plus[i] += h;
    minus[i] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Values in `[lo, hi]` whose pairwise gaps all exceed `min_gap`.
pub fn tie_free_values(rng: &mut impl Rng, n: usize, lo: f64, hi: f64, min_gap: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).all(|p| p[1] - p[0] > min_gap) {
            return v;
        }
    }
}

pub fn mini_root() -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini")
}

/// Recursive copy, for tests that mutate a dataset.
pub fn copy_dir(from: &std::path::Path, to: &std::path::Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Every file under `dir`, relative path and contents, sorted.
pub fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
