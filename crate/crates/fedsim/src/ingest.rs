//! Image-folder ingestion: `root/<source>/<class>/<image files>`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use fedsim_core::data::{resize_to, Dataset, LabeledImage};
use fedsim_core::Tensor;

use crate::error::{AppError, Result};

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| AppError::io(dir, e))? {
        let path = entry.map_err(|e| AppError::io(dir, e))?.path();
        let hidden = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
        if !hidden {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn name_of(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Decodes one image to RGB in [0, 1], resized to `side`×`side`.
pub fn load_image(path: &Path, side: usize) -> Result<Tensor> {
    let img = image::ImageReader::open(path)
        .map_err(|e| AppError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| AppError::io(path, e))?
        .decode()
        .map_err(|source| AppError::Image { path: path.to_path_buf(), source })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = img.into_raw().into_iter().map(|b| f32::from(b) / 255.0).collect();
    let tensor = Tensor::from_vec(&[h, w, 3], pixels)?;
    Ok(resize_to(&tensor, side)?)
}

/// Reads every image below `root`. Source tags are the first-level directory
/// names; class labels are the second-level names, numbered in sorted order
/// across all sources. Every file must decode and every class must hold at
/// least one image.
pub fn ingest_image_folder(root: &Path, side: usize) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(AppError::Data(format!("{} is not a directory", root.display())));
    }
    let sources: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if sources.is_empty() {
        return Err(AppError::Data(format!("{} contains no source directories", root.display())));
    }
    let mut layout = Vec::new();
    let mut class_names = BTreeSet::new();
    for source in &sources {
        for class_dir in sorted_entries(source)?.into_iter().filter(|p| p.is_dir()) {
            class_names.insert(name_of(&class_dir));
            layout.push((name_of(source), class_dir));
        }
    }
    let class_names: Vec<String> = class_names.into_iter().collect();
    let mut records = Vec::new();
    let mut per_class = vec![0usize; class_names.len()];
    for (source, class_dir) in &layout {
        let label = class_names.binary_search(&name_of(class_dir)).expect("collected above");
        for file in sorted_entries(class_dir)?.into_iter().filter(|p| p.is_file()) {
            let pixels = load_image(&file, side)?;
            records.push(LabeledImage { pixels, label, source: source.clone() });
            per_class[label] += 1;
        }
    }
    if records.is_empty() {
        return Err(AppError::Data(format!("no images found below {}", root.display())));
    }
    if let Some(i) = per_class.iter().position(|&n| n == 0) {
        return Err(AppError::Data(format!("class {:?} has no images", class_names[i])));
    }
    log::info!(
        "ingested {} images, {} classes, {} sources from {}",
        records.len(),
        class_names.len(),
        sources.len(),
        root.display()
    );
    Ok(Dataset::new(records, class_names.len())?)
}
