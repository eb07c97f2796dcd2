//! Bundled reference faces.
//!
//! Layout: `<assets>/gallery/<id>/image.png` plus optional `landmarks.json`,
//! `labels.png` and `thumbnail.png`. Only entries with both landmarks and
//! labels can serve as transfer references.

use std::path::Path;
use std::sync::Arc;

use makeup_core::align::load_landmarks;
use makeup_core::io::{read_bytes, read_raster};
use makeup_core::masks::load_label_map;
use makeup_core::FaceBundle;
use serde::Serialize;

use crate::ServerError;

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub id: String,
    pub thumbnail: Option<String>,
    pub landmarks: bool,
    pub labels: bool,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub manifest: ManifestEntry,
    pub face: Option<Arc<FaceBundle>>,
    pub thumbnail: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Default)]
pub struct Gallery {
    entries: Vec<GalleryEntry>,
}

impl Gallery {
    /// Scans `<assets>/gallery`; a missing directory yields an empty gallery.
    pub fn load(assets: &Path) -> Result<Self, ServerError> {
        let root = assets.join("gallery");
        if !root.is_dir() {
            return Ok(Self::default());
        }
        let mut dirs: Vec<_> = std::fs::read_dir(&root)
            .map_err(|e| ServerError::Gallery(format!("{}: {e}", root.display())))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.join("image.png").is_file())
            .collect();
        dirs.sort();
        let entries = dirs.iter().map(|d| load_entry(d)).collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[GalleryEntry] {
        &self.entries
    }

    pub fn manifest(&self) -> Vec<&ManifestEntry> {
        self.entries.iter().map(|e| &e.manifest).collect()
    }

    pub fn get(&self, id: &str) -> Option<&GalleryEntry> {
        self.entries.iter().find(|e| e.manifest.id == id)
    }
}

fn load_entry(dir: &Path) -> Result<GalleryEntry, ServerError> {
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| ServerError::Gallery(format!("bad entry name {}", dir.display())))?
        .to_owned();
    let fail = |e: &dyn std::fmt::Display| ServerError::Gallery(format!("{id}: {e}"));
    let image = read_raster(&dir.join("image.png")).map_err(|e| fail(&e))?;
    let (w, h) = image.dims();
    let lm_path = dir.join("landmarks.json");
    let labels_path = dir.join("labels.png");
    let thumb_path = dir.join("thumbnail.png");
    let (has_lm, has_labels) = (lm_path.is_file(), labels_path.is_file());
    let face = if has_lm && has_labels {
        let landmarks = load_landmarks(&lm_path, w, h).map_err(|e| fail(&e))?;
        let labels = load_label_map(&labels_path, (w, h)).map_err(|e| fail(&e))?;
        Some(Arc::new(FaceBundle::new(image, landmarks, labels).map_err(|e| fail(&e))?))
    } else {
        None
    };
    let thumbnail = thumb_path.is_file().then(|| read_bytes(&thumb_path)).transpose().map_err(|e| fail(&e))?;
    Ok(GalleryEntry {
        manifest: ManifestEntry {
            thumbnail: thumbnail.as_ref().map(|_| format!("/references/{id}/thumbnail")),
            id,
            landmarks: has_lm,
            labels: has_labels,
            width: w,
            height: h,
        },
        face,
        thumbnail,
    })
}
