//! PNG raster I/O and the annotation file.

use std::collections::BTreeSet;
use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{GrayImage, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floodfill::PointAnnotation;
use crate::imaging::{BinaryMask, GrayMap, RasterImage, Trimap};

fn open(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}

pub fn read_rgb8(path: &Path) -> Result<RgbImage> {
    Ok(open(path)?.to_rgb8())
}

pub fn read_gray8(path: &Path) -> Result<GrayImage> {
    Ok(open(path)?.to_luma8())
}

pub fn read_rgb(path: &Path) -> Result<RasterImage> {
    RasterImage::from_rgb_image(&read_rgb8(path)?)
}

/// 8-bit grayscale file normalized to [0, 1].
pub fn read_gray_map(path: &Path) -> Result<GrayMap> {
    GrayMap::from_gray_image(&read_gray8(path)?)
}

pub fn read_binary_mask(path: &Path, threshold: u8) -> Result<BinaryMask> {
    BinaryMask::from_gray_image(&read_gray8(path)?, threshold)
}

pub fn read_trimap(path: &Path) -> Result<Trimap> {
    let img = read_gray8(path)?;
    Trimap::from_gray_image(&img).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Lossless PNG bytes of an 8-bit grayscale image.
pub fn encode_gray_png(img: &GrayImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("in-memory PNG encoding");
    buf.into_inner()
}

pub fn encode_rgb_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("in-memory PNG encoding");
    buf.into_inner()
}

pub fn encode_trimap_png(trimap: &Trimap) -> Vec<u8> {
    encode_gray_png(&trimap.to_gray_image())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_gray_png(path: &Path, img: &GrayImage) -> Result<()> {
    write_bytes(path, &encode_gray_png(img))
}

pub fn write_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    write_bytes(path, &encode_rgb_png(img))
}

pub fn write_trimap(path: &Path, trimap: &Trimap) -> Result<()> {
    write_bytes(path, &encode_trimap_png(trimap))
}

pub fn write_gray_map(path: &Path, map: &GrayMap) -> Result<()> {
    write_gray_png(path, &map.to_gray_image())
}

/// `(stem, path)` of every `.png` file in `dir`, sorted by stem.
pub fn list_pngs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Bilinear resize of an 8-bit grayscale image.
pub fn resize_gray(img: &GrayImage, width: u32, height: u32) -> GrayImage {
    imageops::resize(img, width, height, FilterType::Triangle)
}

pub fn resize_rgb(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    imageops::resize(img, width, height, FilterType::Triangle)
}

/// The dataset annotation document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub images: Vec<PointAnnotation>,
}

impl AnnotationFile {
    pub fn get(&self, id: &str) -> Option<&PointAnnotation> {
        self.images.iter().find(|a| a.image_id == id)
    }

    /// Inserts or replaces the entry for `annotation.image_id`, keeping
    /// entries sorted by id.
    pub fn upsert(&mut self, annotation: PointAnnotation) {
        match self.images.iter_mut().find(|a| a.image_id == annotation.image_id) {
            Some(slot) => *slot = annotation,
            None => {
                self.images.push(annotation);
                self.images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, a) in self.images.iter().enumerate() {
            a.validate()
                .map_err(|e| Error::Validation(format!("images[{i}]: {e}")))?;
            if !seen.insert(&a.image_id) {
                return Err(Error::Validation(format!(
                    "images[{i}]: duplicate id '{}'",
                    a.image_id
                )));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let file: AnnotationFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        file.validate().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        AnnotationFile::parse(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation file serializes") + "\n"
    }

    /// Writes to a temporary file next to `path` and renames it into place,
    /// so readers only ever see a complete document.
    pub fn save_atomic(&self, path: &Path) -> Result<()> {
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(self.to_json().as_bytes())
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Point;

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "{\n  \"images\": [\n    { \"id\": \"a\", \"width\": 4 }\n  ]\n}";
        let err = AnnotationFile::parse(text, Path::new("ann.json")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("height"), "{msg}");
    }

    #[test]
    fn validation_errors_name_the_entry() {
        let text = r#"{"images":[{"id":"a","width":4,"height":4,"foreground_points":[{"x":9,"y":0}],"background_point":{"x":0,"y":0}}]}"#;
        let msg = AnnotationFile::parse(text, Path::new("a.json")).unwrap_err().to_string();
        assert!(msg.contains("images[0]") && msg.contains("foreground_points[0]"), "{msg}");
    }

    #[test]
    fn atomic_save_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotations.json");
        let mut file = AnnotationFile::default();
        file.upsert(PointAnnotation {
            image_id: "b".into(),
            width: 5,
            height: 5,
            foreground_points: vec![Point::new(1, 1)],
            background_point: Point::new(4, 4),
        });
        file.upsert(PointAnnotation {
            image_id: "a".into(),
            width: 5,
            height: 5,
            foreground_points: vec![Point::new(2, 2), Point::new(3, 2)],
            background_point: Point::new(0, 4),
        });
        file.save_atomic(&path).unwrap();
        let back = AnnotationFile::load(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.images[0].image_id, "a");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
