//! Class-conditional synthetic slides.
//!
//! Every slide is a grid of non-overlapping square patches. Patch nuclei are
//! drawn from one of three point processes:
//!
//! * class 0: homogeneous Poisson with `poisson_mean` points per patch;
//! * class 1: Thomas process (Neyman-Scott with Gaussian offspring),
//!   `thomas_parents` parents per patch area and `thomas_offspring`
//!   children per parent spread with `thomas_sigma`;
//! * class 2: superposition of a coarse and a fine Thomas process.
//!
//! Parents are drawn over the patch grown by `3 * sigma` on each side so the
//! intensity does not fall off at patch borders. Each slide scales all
//! intensities by a factor in `[1 - jitter, 1 + jitter]`. In class 1 and 2
//! slides a `mix_fraction` of patches follow the class 0 process, and in all
//! slides a `background_fraction` of patches are near-empty background. The
//! first patch of every slide is neither.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::records::{PatchRecord, Provenance, SlideRecord};
use crate::detection::GrayImage;
use crate::points::{Point, PointSet};
use crate::{Error, Result};

pub const SYNTHETIC_CLASSES: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub patch_size: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub poisson_mean: f64,
    pub thomas_parents: f64,
    pub thomas_offspring: f64,
    pub thomas_sigma: f64,
    pub coarse_parents: f64,
    pub coarse_offspring: f64,
    pub coarse_sigma: f64,
    pub fine_parents: f64,
    pub fine_offspring: f64,
    pub fine_sigma: f64,
    pub background_mean: f64,
    pub intensity_jitter: f64,
    pub mix_fraction: f64,
    pub background_fraction: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            patch_size: 256,
            grid_rows: 4,
            grid_cols: 4,
            poisson_mean: 200.0,
            thomas_parents: 16.0,
            thomas_offspring: 14.0,
            thomas_sigma: 10.0,
            coarse_parents: 8.0,
            coarse_offspring: 20.0,
            coarse_sigma: 18.0,
            fine_parents: 16.0,
            fine_offspring: 10.0,
            fine_sigma: 4.0,
            background_mean: 8.0,
            intensity_jitter: 0.15,
            mix_fraction: 0.25,
            background_fraction: 0.1,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::Config("synthetic patch size and grid must be positive".into()));
        }
        let rates = [
            self.poisson_mean,
            self.thomas_parents,
            self.thomas_offspring,
            self.thomas_sigma,
            self.coarse_parents,
            self.coarse_offspring,
            self.coarse_sigma,
            self.fine_parents,
            self.fine_offspring,
            self.fine_sigma,
            self.background_mean,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("synthetic intensities and spreads must be positive".into()));
        }
        for (name, f) in [
            ("intensity_jitter", self.intensity_jitter),
            ("mix_fraction", self.mix_fraction),
            ("background_fraction", self.background_fraction),
        ] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {f}")));
            }
        }
        Ok(())
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

/// Homogeneous Poisson process on `[0, size)^2` with the given mean count.
pub fn poisson_points(rng: &mut ChaCha8Rng, size: f64, mean: f64) -> Vec<Point> {
    let n = poisson_count(rng, mean);
    (0..n)
        .map(|_| Point::new(rng.random_range(0.0..size), rng.random_range(0.0..size)))
        .collect()
}

/// Thomas process on `[0, size)^2`: `parents` is the expected parent count
/// per patch area.
pub fn thomas_points(rng: &mut ChaCha8Rng, size: f64, parents: f64, offspring: f64, sigma: f64) -> Vec<Point> {
    let margin = 3.0 * sigma;
    let grown = size + 2.0 * margin;
    let n_parents = poisson_count(rng, parents * (grown * grown) / (size * size));
    let spread = Normal::new(0.0, sigma).expect("positive sigma");
    let mut out = Vec::new();
    for _ in 0..n_parents {
        let cx = rng.random_range(-margin..size + margin);
        let cy = rng.random_range(-margin..size + margin);
        for _ in 0..poisson_count(rng, offspring) {
            let (x, y) = (cx + spread.sample(rng), cy + spread.sample(rng));
            if (0.0..size).contains(&x) && (0.0..size).contains(&y) {
                out.push(Point::new(x, y));
            }
        }
    }
    out
}

fn class_points(rng: &mut ChaCha8Rng, class_id: usize, p: &SynthParams, size: f64, scale: f64) -> Vec<Point> {
    match class_id {
        0 => poisson_points(rng, size, p.poisson_mean * scale),
        1 => thomas_points(rng, size, p.thomas_parents * scale, p.thomas_offspring, p.thomas_sigma),
        _ => {
            let mut pts = thomas_points(rng, size, p.coarse_parents * scale, p.coarse_offspring, p.coarse_sigma);
            pts.extend(thomas_points(rng, size, p.fine_parents * scale, p.fine_offspring, p.fine_sigma));
            pts
        }
    }
}

/// A synthetic slide of the given class; identical for identical seeds.
pub fn synth_slide(slide_id: impl Into<String>, class_id: usize, params: &SynthParams, seed: u64) -> Result<SlideRecord> {
    if class_id >= SYNTHETIC_CLASSES {
        return Err(Error::invalid(format!(
            "unknown synthetic class {class_id}; expected 0..{SYNTHETIC_CLASSES}"
        )));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = params.patch_size as f64;
    let j = params.intensity_jitter;
    let scale = 1.0 + rng.random_range(-j..=j);
    let mut patches = Vec::with_capacity(params.grid_rows * params.grid_cols);
    for row in 0..params.grid_rows {
        for col in 0..params.grid_cols {
            let first = row == 0 && col == 0;
            let kind = if !first && rng.random_bool(params.background_fraction) {
                None
            } else if !first && class_id > 0 && rng.random_bool(params.mix_fraction) {
                Some(0)
            } else {
                Some(class_id)
            };
            let pts = match kind {
                None => poisson_points(&mut rng, size, params.background_mean),
                Some(c) => class_points(&mut rng, c, params, size, scale),
            };
            patches.push(PatchRecord {
                row,
                col,
                origin_x: col * params.patch_size,
                origin_y: row * params.patch_size,
                points: PointSet::new(pts, size, size)?,
            });
        }
    }
    Ok(SlideRecord {
        slide_id: slide_id.into(),
        label: class_id,
        provenance: Provenance {
            source: format!("synthetic:class={class_id}:seed={seed}"),
            patch_size: params.patch_size,
            stride: params.patch_size,
        },
        patches,
    })
}

/// `slides_per_class` slides of each class, interleaved by class. Slide
/// seeds are drawn in order from a generator seeded with `seed`.
pub fn synth_dataset(slides_per_class: usize, params: &SynthParams, seed: u64) -> Result<Vec<SlideRecord>> {
    use rayon::prelude::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<(usize, usize, u64)> = (0..slides_per_class * SYNTHETIC_CLASSES)
        .map(|i| (i, i % SYNTHETIC_CLASSES, rng.random()))
        .collect();
    specs
        .into_par_iter()
        .map(|(i, class_id, s)| synth_slide(format!("slide_{i:04}"), class_id, params, s))
        .collect()
}

/// Dark Gaussian blobs on a white background:
/// `I = clamp(1 - depth * sum_k exp(-|p - c_k|^2 / (2 sigma^2)), 0, 1)`.
pub fn render_blobs(width: usize, height: usize, centers: &[Point], sigma: f64, depth: f64) -> Result<GrayImage> {
    if !(sigma > 0.0 && (0.0..=1.0).contains(&depth)) {
        return Err(Error::invalid("blob sigma must be positive and depth in [0, 1]"));
    }
    let mut dark = vec![0.0; width * height];
    let reach = (4.0 * sigma).ceil() as isize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    for c in centers {
        let (cx, cy) = (c.x.round() as isize, c.y.round() as isize);
        for y in (cy - reach).max(0)..(cy + reach + 1).min(height as isize) {
            for x in (cx - reach).max(0)..(cx + reach + 1).min(width as isize) {
                let d2 = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                dark[y as usize * width + x as usize] += (-d2 * inv).exp();
            }
        }
    }
    let data = dark.into_iter().map(|d| (1.0 - depth * d).clamp(0.0, 1.0)).collect();
    GrayImage::new(width, height, data)
}

/// Renders a slide's nuclei (in slide coordinates) as blobs.
pub fn render_slide(record: &SlideRecord, sigma: f64, depth: f64) -> Result<GrayImage> {
    let size = record.provenance.patch_size;
    let width = record.patches.iter().map(|p| p.origin_x + size).max().unwrap_or(size);
    let height = record.patches.iter().map(|p| p.origin_y + size).max().unwrap_or(size);
    let centers: Vec<Point> = record
        .patches
        .iter()
        .flat_map(|p| {
            p.points
                .points()
                .iter()
                .map(move |q| Point::new(q.x + p.origin_x as f64, q.y + p.origin_y as f64))
        })
        .collect();
    render_blobs(width, height, &centers, sigma, depth)
}

/// Up to `count` centres at least `min_separation` apart and at least
/// `margin` from the border, by rejection sampling.
pub fn random_blob_layout(
    rng: &mut ChaCha8Rng,
    width: f64,
    height: f64,
    count: usize,
    min_separation: f64,
    margin: f64,
) -> Vec<Point> {
    let sep_sq = min_separation * min_separation;
    let mut out: Vec<Point> = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 10_000 * count.max(1) {
        attempts += 1;
        let p = Point::new(
            rng.random_range(margin..width - margin),
            rng.random_range(margin..height - margin),
        );
        if out.iter().all(|q| q.dist_sq(p) >= sep_sq) {
            out.push(p);
        }
    }
    out
}
