//! Nuclei detection with a bank of rotated, anisotropic Laplacian-of-Gaussian
//! kernels.
//!
//! Kernel `(i, j)` of a bank built from `(sigma_x, sigma_y, orientations,
//! bandwidth)` has major scale `s_i`, log-spaced from `sigma_y` to `sigma_x`
//! over `bandwidth` steps, minor scale `sigma_y`, and is rotated by
//! `j * pi / orientations`. Each kernel is mean-subtracted so it ignores flat
//! regions. Because the responses are pooled by summation, the detector
//! convolves once with the pooled kernel `mean_k(s_major * s_minor * K_k)`.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::points::{Point, PointSet};
use crate::{Error, Result};

/// Responses at or below this are treated as flat image.
const MIN_RESPONSE: f64 = 1e-6;

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image must be non-empty"));
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: format!("{width}x{height} = {} pixels", width * height),
                got: format!("{}", data.len()),
            });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("intensities must lie in [0, 1]"));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Reads any format the `image` crate decodes (PGM/PNG/TIFF) and converts
    /// it to luminance.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = img.dimensions();
        let data = img.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
        Self::new(w as usize, h as usize, data)
    }

    /// Writes an 8-bit binary PGM.
    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|v| (v * 255.0).round() as u8).collect();
        image::save_buffer(path, &bytes, self.width as u32, self.height as u32, image::ExtendedColorType::L8)?;
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Copy of the `w x h` window at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<GrayImage> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::invalid(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        GrayImage::new(w, h, data)
    }
}

/// One oriented LoG kernel, `size x size` with `size = 2 * half_width + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub sigma_major: f64,
    pub sigma_minor: f64,
    pub angle: f64,
    pub half_width: usize,
    pub data: Vec<f64>,
}

impl Kernel {
    pub fn size(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Value at offset `(dx, dy)` from the centre.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let h = self.half_width as isize;
        self.data[((dy + h) * (2 * h + 1) + dx + h) as usize]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GLoGBank {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub orientations: usize,
    pub bandwidth: usize,
    pub kernels: Vec<Kernel>,
}

/// Bank parameters used for nuclei: `sigma_x = 8`, `sigma_y = 4`,
/// 9 orientations, 7 scales.
pub const DEFAULT_BANK: (f64, f64, usize, usize) = (8.0, 4.0, 9, 7);

pub fn build_glog_bank(sigma_x: f64, sigma_y: f64, orientations: usize, bandwidth: usize) -> Result<GLoGBank> {
    if !(sigma_y > 0.0 && sigma_x >= sigma_y && sigma_x.is_finite()) {
        return Err(Error::invalid(format!(
            "need sigma_x >= sigma_y > 0, got sigma_x = {sigma_x}, sigma_y = {sigma_y}"
        )));
    }
    if orientations == 0 || bandwidth == 0 {
        return Err(Error::invalid("orientations and bandwidth must be at least 1"));
    }
    let half_width = (3.0 * sigma_x).ceil() as usize;
    let mut kernels = Vec::with_capacity(orientations * bandwidth);
    for i in 0..bandwidth {
        let major = if bandwidth == 1 {
            sigma_x
        } else {
            sigma_y * (sigma_x / sigma_y).powf(i as f64 / (bandwidth - 1) as f64)
        };
        for j in 0..orientations {
            let angle = j as f64 * PI / orientations as f64;
            kernels.push(oriented_log(major, sigma_y, angle, half_width));
        }
    }
    Ok(GLoGBank {
        sigma_x,
        sigma_y,
        orientations,
        bandwidth,
        kernels,
    })
}

fn oriented_log(sa: f64, sb: f64, theta: f64, half_width: usize) -> Kernel {
    let (sin, cos) = theta.sin_cos();
    let (sa2, sb2) = (sa * sa, sb * sb);
    let a = cos * cos / (2.0 * sa2) + sin * sin / (2.0 * sb2);
    let b = -(2.0 * theta).sin() / (4.0 * sa2) + (2.0 * theta).sin() / (4.0 * sb2);
    let c = sin * sin / (2.0 * sa2) + cos * cos / (2.0 * sb2);
    let norm = 1.0 / (2.0 * PI * sa * sb);
    let h = half_width as isize;
    let mut data = Vec::with_capacity((2 * half_width + 1).pow(2));
    for dy in -h..=h {
        for dx in -h..=h {
            let (x, y) = (dx as f64, dy as f64);
            let g = norm * (-(a * x * x + 2.0 * b * x * y + c * y * y)).exp();
            let gx = 2.0 * a * x + 2.0 * b * y;
            let gy = 2.0 * b * x + 2.0 * c * y;
            data.push((gx * gx - 2.0 * a + gy * gy - 2.0 * c) * g);
        }
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    for v in &mut data {
        *v -= mean;
    }
    Kernel {
        sigma_major: sa,
        sigma_minor: sb,
        angle: theta,
        half_width,
        data,
    }
}

impl GLoGBank {
    /// `mean_k(sigma_major_k * sigma_minor_k * K_k)`.
    pub fn pooled_kernel(&self) -> Kernel {
        let first = &self.kernels[0];
        let mut data = vec![0.0; first.data.len()];
        let count = self.kernels.len() as f64;
        for k in &self.kernels {
            let w = k.sigma_major * k.sigma_minor / count;
            for (d, v) in data.iter_mut().zip(&k.data) {
                *d += w * v;
            }
        }
        Kernel {
            sigma_major: self.sigma_x,
            sigma_minor: self.sigma_y,
            angle: 0.0,
            half_width: first.half_width,
            data,
        }
    }

    /// Pooled blob response: positive at dark blobs on a light background.
    pub fn response(&self, img: &GrayImage) -> Vec<f64> {
        let inverted: Vec<f64> = img.data.iter().map(|v| 1.0 - v).collect();
        let mut r = convolve_reflect(&inverted, img.width, img.height, &self.pooled_kernel());
        for v in &mut r {
            *v = -*v;
        }
        r
    }
}

/// Threshold on the pooled response for accepting a regional maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ResponseThreshold {
    /// Fraction of the strongest response in the image.
    RelativeToMax(f64),
    Absolute(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub threshold: ResponseThreshold,
    /// Maxima closer than this to a stronger kept maximum are dropped.
    pub merge_radius: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            threshold: ResponseThreshold::RelativeToMax(0.1),
            merge_radius: 8.0,
        }
    }
}

/// A detected nucleus centre with its pooled response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub center: Point,
    pub response: f64,
}

/// Regional maxima of the pooled response above the threshold, merged
/// greedily from the strongest down, with sub-pixel parabolic refinement.
pub fn detect_blobs(img: &GrayImage, bank: &GLoGBank, params: &DetectionParams) -> Vec<Detection> {
    let (w, h) = (img.width, img.height);
    let r = bank.response(img);
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = match params.threshold {
        ResponseThreshold::RelativeToMax(f) => f * max,
        ResponseThreshold::Absolute(t) => t,
    }
    .max(MIN_RESPONSE);

    let mut maxima: Vec<(usize, f64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = r[y * w + x];
            if v <= threshold {
                continue;
            }
            let mut is_max = true;
            'scan: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let nv = r[ny as usize * w + nx as usize];
                    // plateaus: the first pixel in raster order wins
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if nv > v || (earlier && nv == v) {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                maxima.push((y * w + x, v));
            }
        }
    }
    maxima.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let refine = |c: usize, lo: Option<usize>, hi: Option<usize>| -> f64 {
        match (lo, hi) {
            (Some(l), Some(u)) => {
                let (a, b, cc) = (r[l], r[c], r[u]);
                let denom = a - 2.0 * b + cc;
                if denom < 0.0 {
                    (0.5 * (a - cc) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    };
    let merge_sq = params.merge_radius * params.merge_radius;
    let mut kept: Vec<Detection> = Vec::new();
    for (idx, v) in maxima {
        let (x, y) = (idx % w, idx / w);
        let ox = refine(idx, (x > 0).then(|| idx - 1), (x + 1 < w).then(|| idx + 1));
        let oy = refine(idx, (y > 0).then(|| idx - w), (y + 1 < h).then(|| idx + w));
        let center = Point::new(
            (x as f64 + ox).clamp(0.0, w as f64 - 1.0),
            (y as f64 + oy).clamp(0.0, h as f64 - 1.0),
        );
        if kept.iter().all(|k| k.center.dist_sq(center) >= merge_sq) {
            kept.push(Detection { center, response: v });
        }
    }
    kept
}

/// Detected nuclei centres as a point set over the image extent.
pub fn detect_nuclei(img: &GrayImage, bank: &GLoGBank, params: &DetectionParams) -> Result<PointSet> {
    let found = detect_blobs(img, bank, params);
    PointSet::new(found.into_iter().map(|d| d.center), img.width as f64, img.height as f64)
}

/// Folds an out-of-range index back into `0..n` by mirror reflection with
/// the edge sample repeated (`d c b a | a b c d | d c b a`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Same-size convolution of a `w x h` image with a point-symmetric kernel,
/// reflect-padded, via FFT.
fn convolve_reflect(img: &[f64], w: usize, h: usize, kernel: &Kernel) -> Vec<f64> {
    let hw = kernel.half_width;
    let (pw, ph) = (w + 2 * hw, h + 2 * hw);
    let mut padded: Vec<Complex<f64>> = Vec::with_capacity(pw * ph);
    for py in 0..ph {
        let sy = reflect(py as isize - hw as isize, h);
        for px in 0..pw {
            let sx = reflect(px as isize - hw as isize, w);
            padded.push(Complex::new(img[sy * w + sx], 0.0));
        }
    }
    let mut kern = vec![Complex::new(0.0, 0.0); pw * ph];
    let k = hw as isize;
    for dy in -k..=k {
        for dx in -k..=k {
            let y = dy.rem_euclid(ph as isize) as usize;
            let x = dx.rem_euclid(pw as isize) as usize;
            kern[y * pw + x].re += kernel.at(dx, dy);
        }
    }
    let mut planner = FftPlanner::new();
    fft2(&mut planner, &mut padded, pw, ph, false);
    fft2(&mut planner, &mut kern, pw, ph, false);
    for (a, b) in padded.iter_mut().zip(&kern) {
        *a *= b;
    }
    fft2(&mut planner, &mut padded, pw, ph, true);
    let scale = 1.0 / (pw * ph) as f64;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(padded[(y + hw) * pw + x + hw].re * scale);
        }
    }
    out
}

fn fft2(planner: &mut FftPlanner<f64>, data: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let plan = |p: &mut FftPlanner<f64>, n| if inverse { p.plan_fft_inverse(n) } else { p.plan_fft_forward(n) };
    plan(planner, w).process(data);
    let mut t = vec![Complex::new(0.0, 0.0); w * h];
    transpose(data, &mut t, w, h);
    plan(planner, h).process(&mut t);
    transpose(&t, data, h, w);
}

fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], w: usize, h: usize) {
    for y in 0..h {
        for x in 0..w {
            dst[x * h + y] = src[y * w + x];
        }
    }
}
