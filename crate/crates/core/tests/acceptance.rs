//! Acceptance suite. Prints one PASS/FAIL line per criterion, with the
//! individual checks indented below it, and exits non-zero if any fail.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{central_difference, euclid, mini_root, reachable, rel_err, rng, snapshot, textured_image, tie_free_values};
use pointsal::crf::{DenseCrf, DenseCrfParams};
use pointsal::floodfill::{flood_fill, generate_pseudo_label, mask_radius, AdaptiveMaskConfig, BarrierField, FloodFillParams};
use pointsal::io::{self, AnnotationFile};
use pointsal::losses::{total_loss, LossInputs, LossWeights};
use pointsal::metrics::{evaluate_image, f_measure, pr_curve, EvalOptions, DEFAULT_BETA_SQ};
use pointsal::nss::{nss_pipeline, NssParams};
use pointsal::synth::random_blobs;
use pointsal::{bce, gated_crf_loss, partial_bce, BinaryMask, GatedCrfParams, GrayMap, Label, Point, PointAnnotation, RasterImage, Trimap};
use rand::Rng;

const FLOOD_FILL_BUDGET: Duration = Duration::from_secs(5);
const PSEUDO_LABEL_BUDGET: Duration = Duration::from_secs(10);
const END_TO_END_BUDGET: Duration = Duration::from_secs(60);
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-4;
const WEIGHTED_SUM_TOL: f64 = 1e-12;
const MARGINAL_SUM_TOL: f64 = 1e-12;
const FREE_ENERGY_TOL: f64 = 1e-9;
const ENUMERATION_TOL: f64 = 1e-10;

type Criterion = (&'static str, fn() -> Vec<Check>);

/// Outcome of one check inside a criterion.
struct Check {
    label: String,
    ok: bool,
    detail: String,
}

fn check(label: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
    Check {
        label: label.into(),
        ok,
        detail: detail.into(),
    }
}

fn within(label: &str, elapsed: Duration, budget: Duration) -> Check {
    check(
        format!("{label} runtime"),
        elapsed < budget,
        format!("{:.2} s (budget {} s)", elapsed.as_secs_f64(), budget.as_secs()),
    )
}

// ---------------------------------------------------------------- flood fill

fn flood_fill_oracle() -> Vec<Check> {
    let mut r = rng(1001);
    let start = Instant::now();
    let mut mismatched = 0usize;
    let mut worst = String::new();
    let mut blocked_seeds = 0;
    for case in 0..200 {
        let levels = r.gen_range(2..6);
        let field = common::random_field(&mut r, 32, 32, levels);
        let density = r.gen_range(0.0..0.45);
        let barrier = BarrierField::new(common::random_mask(&mut r, 32, 32, density));
        let seed = Point::new(r.gen_range(0..32), r.gen_range(0..32));
        let lo = -r.gen_range(0.0..0.8);
        let params = FloodFillParams::new(lo, lo + r.gen_range(0.05..1.5)).unwrap();
        if barrier.is_blocked(seed) {
            blocked_seeds += 1;
            if flood_fill(seed, &field, &barrier, params).is_ok() {
                mismatched += 1;
                worst = format!("case {case}: fill from a blocked seed did not fail");
            }
            continue;
        }
        let got = flood_fill(seed, &field, &barrier, params).unwrap();
        let base = field.get(seed);
        let want = reachable(32, 32, (seed.x, seed.y), |x, y| {
            let p = Point::new(x, y);
            let d = field.get(p) - base;
            !barrier.is_blocked(p) && params.lo < d && d < params.hi
        });
        let diff = got.bits().iter().zip(&want).filter(|(a, b)| a != b).count();
        if diff > 0 {
            worst = format!("case {case}: {diff} pixels differ");
        }
        mismatched += diff;
    }
    vec![
        check(
            "200 instances equal breadth-first reachability",
            mismatched == 0,
            format!("{mismatched} mismatched pixels, {blocked_seeds} blocked seeds {worst}"),
        ),
        within("flood fill", start.elapsed(), FLOOD_FILL_BUDGET),
    ]
}

fn pseudo_label_partition() -> Vec<Check> {
    let root = mini_root();
    let start = Instant::now();
    let annotations = AnnotationFile::load(&root.join("annotations.json")).unwrap();
    let config = AdaptiveMaskConfig { gamma: 5.0, ..Default::default() };
    let mut out = Vec::new();
    for a in &annotations.images {
        let edges = io::read_gray_map(&root.join("edges").join(format!("{}.png", a.image_id))).unwrap();
        let label = generate_pseudo_label(edges.dims(), &edges, a, &config).unwrap();
        let t = &label.trimap;
        let n = a.width * a.height;
        let counts = [Label::Foreground, Label::Background, Label::Uncertain].map(|l| t.count(l));
        let partition = counts.iter().sum::<usize>() == n && t.labels().len() == n;
        let mut outside = 0;
        for y in 0..a.height {
            for x in 0..a.width {
                let p = Point::new(x, y);
                if t.get(p) == Label::Foreground
                    && !a.foreground_points.iter().any(|&s| euclid(p, s) <= label.radius + 1.0)
                {
                    outside += 1;
                }
            }
        }
        out.push(check(
            format!("{} partition", a.image_id),
            partition,
            format!("fg {} bg {} uncertain {} of {n}", counts[0], counts[1], counts[2]),
        ));
        out.push(check(
            format!("{} enclosure", a.image_id),
            outside == 0 && counts[0] > 0,
            format!("{outside} foreground pixels beyond radius {} + 1", label.radius),
        ));
    }
    out.push(within("pseudo-label", start.elapsed(), PSEUDO_LABEL_BUDGET));
    out
}

fn adaptive_radius() -> Vec<Check> {
    let r = mask_radius(500, 400, 5.0).unwrap();
    vec![check("mask_radius(500, 400, 5) = 80", r == 80.0, format!("{r:?}"))]
}

// ---------------------------------------------------------------------- nss

fn nss_soundness() -> Vec<Check> {
    let mut r = rng(1002);
    let params = NssParams::default();
    let (mut leaked, mut lost, mut seeded_total, mut unseeded_total) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..50 {
        let (w, h) = (r.gen_range(24..64), r.gen_range(24..64));
        let count = r.gen_range(2..8);
        let (map, centers) = random_blobs(&mut r, w, h, count);
        let k = r.gen_range(1..centers.len().max(2));
        let seeds: Vec<Point> = centers[..k.min(centers.len())].to_vec();
        let a = PointAnnotation {
            image_id: "blobs".into(),
            width: w,
            height: h,
            foreground_points: seeds.clone(),
            background_point: Point::new(0, 0),
        };
        let bits: Vec<bool> = map.values().iter().map(|&v| v > params.saliency_threshold).collect();
        let (roots, _) = common::two_pass_components(&bits, w, h);
        let seeded: Vec<usize> = seeds.iter().map(|p| roots[p.y * w + p.x]).filter(|&c| c != usize::MAX).collect();
        let (trimap, _) = nss_pipeline(&map, &a, &params).unwrap();
        for i in 0..w * h {
            if roots[i] == usize::MAX {
                continue;
            }
            let fg = trimap.labels()[i] == Label::Foreground;
            if seeded.contains(&roots[i]) {
                seeded_total += 1;
                lost += usize::from(!fg);
            } else {
                unseeded_total += 1;
                leaked += usize::from(fg);
            }
        }
    }
    vec![
        check(
            "no foreground from unseeded components",
            leaked == 0 && unseeded_total > 0,
            format!("{leaked} of {unseeded_total} unseeded pixels kept"),
        ),
        check(
            "seeded components fully retained",
            lost == 0 && seeded_total > 0,
            format!("{lost} of {seeded_total} seeded pixels lost"),
        ),
    ]
}

// ------------------------------------------------------------------- losses

fn map(v: Vec<f64>) -> GrayMap {
    GrayMap::new(8, 8, v).unwrap()
}

fn random_trimap(r: &mut impl Rng) -> Trimap {
    let labels = (0..64).map(|_| [Label::Background, Label::Uncertain, Label::Foreground][r.gen_range(0..3)]).collect();
    Trimap::new(8, 8, labels).unwrap()
}

/// Values, analytic gradient, and the scalar function they came from.
type FdInstance = (Vec<f64>, Vec<f64>, Box<dyn Fn(&[f64]) -> f64>);

/// Worst relative error over 20 instances.
fn worst_fd(mut instance: impl FnMut() -> FdInstance) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (v, grad, f) = instance();
        for i in 0..v.len() {
            worst = worst.max(rel_err(grad[i], central_difference(&v, i, FD_STEP, &f)));
        }
    }
    worst
}

fn loss_gradients() -> Vec<Check> {
    let mut r = rng(1003);
    let mut out = Vec::new();

    let e = worst_fd(|| {
        let v = tie_free_values(&mut r, 64, 0.02, 0.98, 4.0 * FD_STEP);
        let t = common::random_mask(&mut r, 8, 8, 0.5);
        let g = bce(&map(v.clone()), &t).unwrap().gradient;
        (v, g, Box::new(move |x: &[f64]| bce(&map(x.to_vec()), &t).unwrap().value))
    });
    out.push(check("bce", e < FD_REL_TOL, format!("max rel err {e:.2e}")));

    let e = worst_fd(|| {
        let v = tie_free_values(&mut r, 64, 0.02, 0.98, 4.0 * FD_STEP);
        let t = random_trimap(&mut r);
        let g = partial_bce(&map(v.clone()), &t).unwrap().gradient;
        (v, g, Box::new(move |x: &[f64]| partial_bce(&map(x.to_vec()), &t).unwrap().value))
    });
    out.push(check("partial_bce", e < FD_REL_TOL, format!("max rel err {e:.2e}")));

    let params = GatedCrfParams::default();
    let e = worst_fd(|| {
        let v = tie_free_values(&mut r, 64, 0.05, 0.95, 4.0 * FD_STEP);
        let img = textured_image(&mut r, 8, 8, 40);
        let g = gated_crf_loss(&map(v.clone()), &img, &params).unwrap().gradient;
        (v, g, Box::new(move |x: &[f64]| gated_crf_loss(&map(x.to_vec()), &img, &params).unwrap().value))
    });
    out.push(check("gated_crf_loss", e < FD_REL_TOL, format!("max rel err {e:.2e}")));

    let mut nonzero = Vec::new();
    for c in [0.0, 0.3, 0.5, 1.0] {
        let img = common::random_image(&mut r, 8, 8);
        let v = gated_crf_loss(&GrayMap::filled(8, 8, c).unwrap(), &img, &params).unwrap().value;
        if v != 0.0 {
            nonzero.push(format!("{c} -> {v:e}"));
        }
    }
    out.push(check("gated CRF is exactly 0 on constant maps", nonzero.is_empty(), nonzero.join(", ")));
    out
}

fn weighted_sum() -> Vec<Check> {
    let mut r = rng(1004);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let rand_map = |r: &mut rand_chacha::ChaCha8Rng| map((0..64).map(|_| r.gen_range(0.0..1.0)).collect());
        let (sal, edge) = (rand_map(&mut r), rand_map(&mut r));
        let target: BinaryMask = common::random_mask(&mut r, 8, 8, 0.3);
        let trimap = random_trimap(&mut r);
        let image: RasterImage = common::random_image(&mut r, 8, 8);
        let gcrf = GatedCrfParams::default();
        let inputs = LossInputs {
            edge_pred: &edge,
            edge_target: &target,
            saliency_pred: &sal,
            trimap: &trimap,
            image: &image,
        };
        let total = total_loss(inputs, &gcrf, &LossWeights::new(1.0, 1.0, 1.0).unwrap()).unwrap();
        let sum = bce(&edge, &target).unwrap().value
            + partial_bce(&sal, &trimap).unwrap().value
            + gated_crf_loss(&sal, &image, &gcrf).unwrap().value;
        worst = worst.max((total.value - sum).abs());
    }
    vec![check("total with unit weights equals the sum of terms", worst <= WEIGHTED_SUM_TOL, format!("max |diff| {worst:.2e}"))]
}

// ---------------------------------------------------------------------- crf

fn crf_properties() -> Vec<Check> {
    let mut r = rng(1005);
    let mut sum_err = 0.0f64;
    let mut max_rise = f64::NEG_INFINITY;
    for case in 0..20 {
        let sal = GrayMap::new(16, 16, (0..256).map(|_| r.gen_range(0.0..1.0)).collect()).unwrap();
        let img = if case % 2 == 0 { common::random_image(&mut r, 16, 16) } else { textured_image(&mut r, 16, 16, 60) };
        let mut crf = DenseCrf::new(&sal, &img, &DenseCrfParams::default()).unwrap();
        let mut prev = crf.free_energy();
        for _ in 0..10 {
            crf.sweep();
            for (f, b) in crf.fg().iter().zip(crf.bg()) {
                sum_err = sum_err.max((f + b - 1.0).abs());
            }
            let e = crf.free_energy();
            max_rise = max_rise.max(e - prev);
            prev = e;
        }
    }

    // exhaustive joint over the four labelings of a two-pixel image
    let (s1, s2) = (0.8f64, 0.3f64);
    let sal = GrayMap::new(2, 1, vec![s1, s2]).unwrap();
    let img = RasterImage::from_fn(2, 1, |_| [128, 128, 128]).unwrap();
    let params = DenseCrfParams {
        appearance_weight: 0.0,
        smoothness_weight: 0.6,
        sigma_spatial_smooth: 1.0,
        iterations: 500,
        ..Default::default()
    };
    let mut crf = DenseCrf::new(&sal, &img, &params).unwrap();
    let k = crf.kernel(0, 1);
    crf.run();
    let unary = |s: f64, fg: bool| if fg { -s.ln() } else { -(1.0 - s).ln() };
    let mut z = 0.0;
    let (mut m1, mut m2) = (0.0, 0.0);
    for a in [false, true] {
        for b in [false, true] {
            let energy = unary(s1, a) + unary(s2, b) + if a != b { k } else { 0.0 };
            let p = (-energy).exp();
            z += p;
            m1 += if a { p } else { 0.0 };
            m2 += if b { p } else { 0.0 };
        }
    }
    let (m1, m2) = (m1 / z, m2 / z);
    let err = (crf.fg()[0] - m1).abs().max((crf.fg()[1] - m2).abs());

    vec![
        check("marginals sum to 1", sum_err <= MARGINAL_SUM_TOL, format!("max |q_fg + q_bg - 1| {sum_err:.2e}")),
        check(
            "sequential free energy non-increasing (20 x 16x16)",
            max_rise <= FREE_ENERGY_TOL,
            format!("largest per-sweep change {max_rise:.2e}"),
        ),
        check(
            "two-pixel marginals equal exhaustive enumeration",
            err <= ENUMERATION_TOL,
            format!(
                "mean field ({:.6}, {:.6}) vs exact ({m1:.6}, {m2:.6}), pairwise weight {k}, |diff| {err:.2e}",
                crf.fg()[0],
                crf.fg()[1]
            ),
        ),
    ]
}

// ------------------------------------------------------------------ metrics

fn metrics_sanity() -> Vec<Check> {
    let mut r = rng(1006);
    let mut worst_self = String::new();
    let mut self_ok = true;
    for _ in 0..20 {
        let gt = common::random_mask(&mut r, 24, 18, 0.3);
        let m = evaluate_image("self", &gt.to_gray_map(), &gt, &EvalOptions::default()).unwrap();
        if !(m.f_max == 1.0 && m.mae == 0.0 && m.s_measure >= 0.999) {
            self_ok = false;
            worst_self = format!("f_max {} mae {} s {}", m.f_max, m.mae, m.s_measure);
        }
    }

    let pred = GrayMap::new(2, 2, vec![0.9, 0.6, 0.1, 0.1]).unwrap();
    let gt = BinaryMask::new(2, 2, vec![true, false, false, false]).unwrap();
    let pr = pr_curve(&pred, &gt).unwrap();
    let k = pr.thresholds.iter().position(|&t| t >= 0.5).unwrap();
    let (p, rc) = (pr.precision[k], pr.recall[k]);

    let mut violations = 0;
    for _ in 0..100 {
        let (w, h) = (r.gen_range(2..32), r.gen_range(2..32));
        let density = r.gen_range(0.05..0.9);
        let gt = common::random_mask(&mut r, w, h, density);
        let pred = GrayMap::new(w, h, (0..w * h).map(|_| r.gen_range(0.0..1.0)).collect()).unwrap();
        let (fmax, fmean) = f_measure(&pr_curve(&pred, &gt).unwrap(), DEFAULT_BETA_SQ).unwrap();
        violations += usize::from(fmax < fmean);
    }
    vec![
        check("pred = gt scores perfectly", self_ok, worst_self),
        check("2x2 PR point at t = 0.5", (p, rc) == (0.5, 1.0), format!("P {p} R {rc}")),
        check("f_max >= f_mean on 100 instances", violations == 0, format!("{violations} violations")),
    ]
}

// --------------------------------------------------------------- end to end

fn pointsal(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_pointsal"))
        .args(args)
        .env("POINTSAL_LOG", "off")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn run_pipeline(work: &Path) -> Result<(), String> {
    let root = mini_root();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (data, edges) = (s(&root), s(&work.join("edges")));
    pointsal(&["demo-edges", "--images", &s(&root.join("images")), "--out", &edges])?;
    pointsal(&["pseudo-label", "--data", &data, "--edges", &edges, "--out", &s(&work.join("round1_labels"))])?;
    let nss_out = s(&work.join("round2_labels"));
    let round1 = s(&root.join("round1"));
    pointsal(&["nss", "--data", &data, "--edges", &edges, "--saliency", &round1, "--crf", "on", "--out", &nss_out])?;
    pointsal(&["eval", "--pred", &round1, "--gt", &s(&root.join("gt")), "--out", &s(&work.join("eval"))])
}

fn end_to_end() -> Vec<Check> {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_pipeline(a.path());
    let elapsed = start.elapsed();
    let second = run_pipeline(b.path());
    let mut out = vec![
        check("first run completes", first.is_ok(), first.err().unwrap_or_default()),
        check("second run completes", second.is_ok(), second.err().unwrap_or_default()),
        within("end-to-end", elapsed, END_TO_END_BUDGET),
    ];
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&str> = sa
        .iter()
        .zip(&sb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    out.push(check(
        "outputs bit-identical across runs",
        sa.len() == sb.len() && differing.is_empty() && sa.len() > 20,
        format!("{} files, {} differ {:?}", sa.len(), differing.len(), differing),
    ));
    let expected = ["eval/eval.json", "round1_labels/m05_striped.png", "round2_labels/report.json"];
    let missing: Vec<&&str> = expected.iter().filter(|f| !sa.iter().any(|(n, _)| n == *f)).collect();
    out.push(check("expected outputs present", missing.is_empty(), format!("missing {missing:?}")));
    out
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("flood-fill oracle equivalence", flood_fill_oracle),
        ("pseudo-label partition and enclosure", pseudo_label_partition),
        ("adaptive radius", adaptive_radius),
        ("nss suppression soundness", nss_soundness),
        ("loss gradient checks", loss_gradients),
        ("weighted-sum fidelity", weighted_sum),
        ("crf properties", crf_properties),
        ("metrics sanity", metrics_sanity),
        ("end-to-end pipeline", end_to_end),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(checks) if checks.iter().all(|c| c.ok) => {
                println!("PASS {name} ({secs:.2} s)");
                for c in &checks {
                    println!("    ok   {}: {}", c.label, c.detail);
                }
            }
            Ok(checks) => {
                failed += 1;
                let bad: Vec<&str> = checks.iter().filter(|c| !c.ok).map(|c| c.label.as_str()).collect();
                println!("FAIL {name}: {} ({secs:.2} s)", bad.join("; "));
                for c in &checks {
                    println!("    {} {}: {}", if c.ok { "ok  " } else { "FAIL" }, c.label, c.detail);
                }
            }
            Err(panic) => {
                failed += 1;
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {name}: panicked: {msg}");
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
