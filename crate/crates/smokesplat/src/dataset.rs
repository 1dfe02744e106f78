//! Scene datasets: training views with poses, target cameras, optional
//! ground truth, and the `cameras.json` manifest format.
//!
//! A scene directory holds `cameras.json` plus image files referenced by
//! relative path:
//!
//! ```json
//! {
//!   "train": [{"fx": .., "fy": .., "cx": .., "cy": ..,
//!              "rotation": [9 numbers, row-major],
//!              "translation": [3 numbers],
//!              "image": "images/train_000.png"}, ...],
//!   "test":  [{.., "image": "images/test_000.png"}, ...]
//! }
//! ```
//!
//! Test entries may omit `image` (no ground truth available); they must then
//! carry explicit `width`/`height`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraError, CameraView};
use crate::image::{load_image, save_image, Image, ImageError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset manifest {0}: {1}")]
    ManifestRead(PathBuf, String),
    #[error("invalid dataset manifest {0}: {1}")]
    ManifestParse(PathBuf, String),
    #[error("view {index} in `{split}`: {source}")]
    BadCamera {
        split: String,
        index: usize,
        source: CameraError,
    },
    #[error("view {index} in `{split}`: {0}", .0 = source)]
    BadImage {
        split: String,
        index: usize,
        source: ImageError,
    },
    #[error("view {index} in `{split}`: image is {got} but camera raster is {want}")]
    DimensionMismatch {
        split: String,
        index: usize,
        got: String,
        want: String,
    },
    #[error("test view {0} has neither an image nor explicit width/height")]
    MissingDimensions(usize),
    #[error("dataset needs at least 2 training views, found {0}")]
    TooFewViews(usize),
    #[error("ground truth must cover all test views or none ({0} of {1} present)")]
    PartialGroundTruth(usize, usize),
    #[error("cannot write dataset: {0}")]
    Write(String),
}

/// A scene: M posed training images, T target cameras, optional ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub scene_name: String,
    pub training_views: Vec<(Image, CameraView)>,
    pub target_views: Vec<CameraView>,
    pub ground_truth: Option<Vec<Image>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CamerasFile {
    train: Vec<ViewEntry>,
    test: Vec<ViewEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ViewEntry {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: [f64; 9],
    translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<usize>,
}

impl ViewEntry {
    fn camera(&self, width: usize, height: usize, split: &str, index: usize) -> Result<CameraView, DatasetError> {
        let r = &self.rotation;
        let rotation = Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]);
        let translation = Vector3::new(self.translation[0], self.translation[1], self.translation[2]);
        CameraView::new(self.fx, self.fy, self.cx, self.cy, rotation, translation, width, height)
            .map_err(|source| DatasetError::BadCamera {
                split: split.to_string(),
                index,
                source,
            })
    }

    fn from_camera(cam: &CameraView, image: Option<String>) -> Self {
        let r = &cam.rotation;
        ViewEntry {
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            translation: [cam.translation.x, cam.translation.y, cam.translation.z],
            width: Some(cam.width),
            height: Some(cam.height),
            image,
        }
    }
}

/// Loads a scene directory containing `cameras.json`.
pub fn load_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    let manifest_path = dir.join("cameras.json");
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| DatasetError::ManifestRead(manifest_path.clone(), e.to_string()))?;
    let parsed: CamerasFile = serde_json::from_str(&text)
        .map_err(|e| DatasetError::ManifestParse(manifest_path.clone(), e.to_string()))?;

    if parsed.train.len() < 2 {
        return Err(DatasetError::TooFewViews(parsed.train.len()));
    }

    let mut training_views = Vec::with_capacity(parsed.train.len());
    for (i, entry) in parsed.train.iter().enumerate() {
        let rel = entry.image.as_deref().ok_or_else(|| DatasetError::ManifestParse(
            manifest_path.clone(),
            format!("train view {i} is missing its image path"),
        ))?;
        let img = load_image(&dir.join(rel)).map_err(|source| DatasetError::BadImage {
            split: "train".into(),
            index: i,
            source,
        })?;
        let cam = entry.camera(img.width(), img.height(), "train", i)?;
        check_dims(&img, &cam, "train", i, entry)?;
        training_views.push((img, cam));
    }

    let mut target_views = Vec::with_capacity(parsed.test.len());
    let mut ground_truth = Vec::new();
    for (i, entry) in parsed.test.iter().enumerate() {
        match entry.image.as_deref() {
            Some(rel) => {
                let img = load_image(&dir.join(rel)).map_err(|source| DatasetError::BadImage {
                    split: "test".into(),
                    index: i,
                    source,
                })?;
                let cam = entry.camera(img.width(), img.height(), "test", i)?;
                check_dims(&img, &cam, "test", i, entry)?;
                target_views.push(cam);
                ground_truth.push(img);
            }
            None => {
                let (w, h) = match (entry.width, entry.height) {
                    (Some(w), Some(h)) => (w, h),
                    _ => return Err(DatasetError::MissingDimensions(i)),
                };
                target_views.push(entry.camera(w, h, "test", i)?);
            }
        }
    }
    let ground_truth = if ground_truth.is_empty() {
        None
    } else if ground_truth.len() == target_views.len() {
        Some(ground_truth)
    } else {
        return Err(DatasetError::PartialGroundTruth(
            ground_truth.len(),
            target_views.len(),
        ));
    };

    let scene_name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into());
    Ok(Dataset {
        scene_name,
        training_views,
        target_views,
        ground_truth,
    })
}

fn check_dims(
    img: &Image,
    cam: &CameraView,
    split: &str,
    index: usize,
    entry: &ViewEntry,
) -> Result<(), DatasetError> {
    let want_w = entry.width.unwrap_or(img.width());
    let want_h = entry.height.unwrap_or(img.height());
    if img.width() != want_w || img.height() != want_h || cam.width != img.width() || cam.height != img.height() {
        return Err(DatasetError::DimensionMismatch {
            split: split.into(),
            index,
            got: format!("{}x{}", img.width(), img.height()),
            want: format!("{want_w}x{want_h}"),
        });
    }
    Ok(())
}

/// Writes a scene directory (cameras.json plus PNG images under `images/`).
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<(), DatasetError> {
    let images_dir = dir.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| DatasetError::Write(e.to_string()))?;

    let mut train = Vec::new();
    for (i, (img, cam)) in dataset.training_views.iter().enumerate() {
        let rel = format!("images/train_{i:03}.png");
        save_image(img, &dir.join(&rel)).map_err(|e| DatasetError::Write(e.to_string()))?;
        train.push(ViewEntry::from_camera(cam, Some(rel)));
    }
    let mut test = Vec::new();
    for (j, cam) in dataset.target_views.iter().enumerate() {
        let rel = dataset.ground_truth.as_ref().map(|gt| {
            let rel = format!("images/test_{j:03}.png");
            save_image(&gt[j], &dir.join(&rel)).map(|_| rel)
        });
        let rel = match rel {
            Some(Ok(r)) => Some(r),
            Some(Err(e)) => return Err(DatasetError::Write(e.to_string())),
            None => None,
        };
        test.push(ViewEntry::from_camera(cam, rel));
    }
    let file = CamerasFile { train, test };
    let json = serde_json::to_string_pretty(&file).map_err(|e| DatasetError::Write(e.to_string()))?;
    fs::write(dir.join("cameras.json"), json).map_err(|e| DatasetError::Write(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_camera(w: usize, h: usize) -> CameraView {
        CameraView::new(
            20.0,
            20.0,
            w as f64 / 2.0,
            h as f64 / 2.0,
            Matrix3::identity(),
            Vector3::new(0.0, 0.0, 2.0),
            w,
            h,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_scene_directory() {
        let dir = tempfile::tempdir().unwrap();
        let scene = dir.path().join("toy");
        let img = Image::filled(8, 6, [0.25, 0.5, 0.75]);
        let dataset = Dataset {
            scene_name: "toy".into(),
            training_views: vec![
                (img.clone(), tiny_camera(8, 6)),
                (img.clone(), tiny_camera(8, 6)),
            ],
            target_views: vec![tiny_camera(8, 6)],
            ground_truth: Some(vec![img.clone()]),
        };
        save_dataset(&dataset, &scene).unwrap();
        let loaded = load_dataset(&scene).unwrap();
        assert_eq!(loaded.scene_name, "toy");
        assert_eq!(loaded.training_views.len(), 2);
        assert_eq!(loaded.target_views.len(), 1);
        let gt = loaded.ground_truth.as_ref().unwrap();
        assert_eq!(gt[0].pixel(0, 0), img.pixel(0, 0));
        assert_eq!(loaded.training_views[0].1, dataset.training_views[0].1);
    }

    #[test]
    fn rejects_single_view() {
        let dir = tempfile::tempdir().unwrap();
        let scene = dir.path().join("solo");
        let img = Image::zeros(4, 4);
        let dataset = Dataset {
            scene_name: "solo".into(),
            training_views: vec![(img, tiny_camera(4, 4))],
            target_views: vec![],
            ground_truth: None,
        };
        save_dataset(&dataset, &scene).unwrap();
        assert!(matches!(
            load_dataset(&scene),
            Err(DatasetError::TooFewViews(1))
        ));
    }

    #[test]
    fn test_views_without_images_need_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let scene = dir.path().join("posed");
        fs::create_dir_all(scene.join("images")).unwrap();
        let img = Image::zeros(4, 4);
        save_image(&img, &scene.join("images/train_000.png")).unwrap();
        save_image(&img, &scene.join("images/train_001.png")).unwrap();
        let cam = tiny_camera(4, 4);
        let mut entry = ViewEntry::from_camera(&cam, None);
        entry.width = None;
        entry.height = None;
        let file = CamerasFile {
            train: vec![
                ViewEntry::from_camera(&cam, Some("images/train_000.png".into())),
                ViewEntry::from_camera(&cam, Some("images/train_001.png".into())),
            ],
            test: vec![entry],
        };
        fs::write(
            scene.join("cameras.json"),
            serde_json::to_string(&file).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            load_dataset(&scene),
            Err(DatasetError::MissingDimensions(0))
        ));
    }
}
