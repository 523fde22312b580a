//! Per-slide stages: detection on an image, patch featurization and
//! image-graph construction.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::records::{PatchRecord, Provenance, SlideRecord};
use super::tiling::tile_image;
use crate::detection::{detect_nuclei, DetectionParams, GLoGBank, GrayImage};
use crate::features::{patch_feature_vector_with_radius, PatchFeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::image_graph::{build_image_graph, ImageGraph};
use crate::{Error, Result};

const FEATURE_PREFIX: [&str; 5] = ["slide_id", "label", "patch_row", "patch_col", "nuclei"];

/// Tiles an image and detects nuclei in every patch.
pub fn detect_slide(
    image: &GrayImage,
    slide_id: &str,
    label: usize,
    source: &str,
    patch_size: usize,
    stride: usize,
    bank: &GLoGBank,
    params: &DetectionParams,
) -> Result<SlideRecord> {
    let origins = tile_image(image.width(), image.height(), patch_size, stride)?;
    let patches = origins
        .par_iter()
        .map(|o| {
            let crop = image.crop(o.x, o.y, patch_size, patch_size)?;
            Ok(PatchRecord {
                row: o.row,
                col: o.col,
                origin_x: o.x,
                origin_y: o.y,
                points: detect_nuclei(&crop, bank, params)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlideRecord {
        slide_id: slide_id.to_string(),
        label,
        provenance: Provenance {
            source: source.to_string(),
            patch_size,
            stride,
        },
        patches,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchFeatures {
    pub row: usize,
    pub col: usize,
    pub nuclei: usize,
    pub features: PatchFeatureVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlideFeatures {
    pub slide_id: String,
    pub label: usize,
    pub patches: Vec<PatchFeatures>,
}

pub fn featurize_slide(record: &SlideRecord, cell_graph_radius: f64) -> Result<SlideFeatures> {
    let patches = record
        .patches
        .par_iter()
        .map(|p| {
            Ok(PatchFeatures {
                row: p.row,
                col: p.col,
                nuclei: p.points.len(),
                features: patch_feature_vector_with_radius(&p.points, cell_graph_radius)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SlideFeatures {
        slide_id: record.slide_id.clone(),
        label: record.label,
        patches,
    })
}

pub fn featurize_all(records: &[SlideRecord], cell_graph_radius: f64) -> Result<Vec<SlideFeatures>> {
    records.par_iter().map(|r| featurize_slide(r, cell_graph_radius)).collect()
}

/// Image graph over the patches with at least `min_nuclei` nuclei.
pub fn slide_graph(slide: &SlideFeatures, threshold: f64, min_nuclei: usize) -> Result<ImageGraph> {
    let rows: Vec<Vec<f64>> = slide
        .patches
        .iter()
        .filter(|p| p.nuclei >= min_nuclei)
        .map(|p| p.features.values().to_vec())
        .collect();
    if rows.is_empty() {
        return Err(Error::Degenerate(format!(
            "slide {}: no patch has at least {min_nuclei} nuclei",
            slide.slide_id
        )));
    }
    build_image_graph(slide.slide_id.clone(), slide.label, rows, threshold)
}

pub fn build_graphs(slides: &[SlideFeatures], threshold: f64, min_nuclei: usize) -> Result<Vec<ImageGraph>> {
    slides.par_iter().map(|s| slide_graph(s, threshold, min_nuclei)).collect()
}

pub fn write_features<W: Write>(out: W, slides: &[SlideFeatures]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURE_PREFIX.iter().chain(FEATURE_NAMES.iter()))?;
    for s in slides {
        for p in &s.patches {
            let mut row = vec![
                s.slide_id.clone(),
                s.label.to_string(),
                p.row.to_string(),
                p.col.to_string(),
                p.nuclei.to_string(),
            ];
            row.extend(p.features.values().iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<feature writer>", e))?;
    Ok(())
}

pub fn save_features(path: &Path, slides: &[SlideFeatures]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_features(std::io::BufWriter::new(f), slides)
}

pub fn read_features<R: Read>(input: R, path: &Path) -> Result<Vec<SlideFeatures>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    let expected: Vec<&str> = FEATURE_PREFIX.iter().chain(FEATURE_NAMES.iter()).copied().collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "header does not match the feature column layout".into(),
        });
    }
    let mut out: Vec<SlideFeatures> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let fail = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message,
        };
        let row = row.map_err(|e| fail(e.to_string()))?;
        if row.len() != expected.len() {
            return Err(fail(format!("expected {} fields, got {}", expected.len(), row.len())));
        }
        let int = |k: usize| -> Result<usize> {
            row[k].trim().parse().map_err(|_| fail(format!("{}: bad integer {:?}", expected[k], &row[k])))
        };
        let (label, prow, pcol, nuclei) = (int(1)?, int(2)?, int(3)?, int(4)?);
        let mut values = Vec::with_capacity(FEATURE_COUNT);
        for k in FEATURE_PREFIX.len()..expected.len() {
            let v: f64 = row[k]
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| fail(format!("{}: bad number {:?}", expected[k], &row[k])))?;
            values.push(v);
        }
        let features = PatchFeatureVector::try_from(values).map_err(|e| fail(e.to_string()))?;
        let patch = PatchFeatures {
            row: prow,
            col: pcol,
            nuclei,
            features,
        };
        match out.last_mut() {
            Some(s) if s.slide_id == row[0] => {
                if s.label != label {
                    return Err(fail(format!("slide {}: label differs from earlier rows", s.slide_id)));
                }
                s.patches.push(patch);
            }
            _ => {
                if out.iter().any(|s| s.slide_id == row[0]) {
                    return Err(fail(format!("slide {}: rows are not contiguous", &row[0])));
                }
                out.push(SlideFeatures {
                    slide_id: row[0].to_string(),
                    label,
                    patches: vec![patch],
                });
            }
        }
    }
    Ok(out)
}

pub fn load_features(path: &Path) -> Result<Vec<SlideFeatures>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(std::io::BufReader::new(f), path)
}
