//! First-round pseudo-labels from point annotations.
//!
//!     cargo run --release --example pseudo_label -- [gamma]
//!
//! Runs the adaptive masked flood fill on every image of the bundled
//! mini-dataset and draws each trimap in the terminal: `#` foreground,
//! `.` background, blank uncertain, `o` the annotated points.

use std::path::PathBuf;

use pointsal::floodfill::{generate_pseudo_label, AdaptiveMaskConfig};
use pointsal::io::{self, AnnotationFile};
use pointsal::{Label, Point};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let mut config = AdaptiveMaskConfig::default();
    if let Some(g) = std::env::args().nth(1) {
        config.gamma = g.parse()?;
    }

    let annotations = AnnotationFile::load(&root.join("annotations.json"))?;
    for a in &annotations.images {
        let edges = io::read_gray_map(&root.join("edges").join(format!("{}.png", a.image_id)))?;
        let label = generate_pseudo_label(edges.dims(), &edges, a, &config)?;
        let t = &label.trimap;
        println!(
            "{}  radius {:.1}  fg {}  bg {}  uncertain {}",
            a.image_id,
            label.radius,
            t.count(Label::Foreground),
            t.count(Label::Background),
            t.count(Label::Uncertain)
        );
        for n in &label.nudged {
            println!("  seed ({}, {}) moved to ({}, {})", n.from.x, n.from.y, n.to.x, n.to.y);
        }
        let marked: Vec<Point> = a.foreground_points.iter().copied().chain([a.background_point]).collect();
        for y in (0..a.height).step_by(2) {
            let row: String = (0..a.width)
                .map(|x| {
                    let p = Point::new(x, y);
                    if marked.iter().any(|m| m.x == x && m.y / 2 == y / 2) {
                        return 'o';
                    }
                    match t.get(p) {
                        Label::Foreground => '#',
                        Label::Background => '.',
                        Label::Uncertain => ' ',
                    }
                })
                .collect();
            println!("  |{row}|");
        }
    }
    Ok(())
}
