//! Patch-based denoising over a K-SVD dictionary learned from the noisy
//! image itself, started from an overcomplete DCT.

use crate::dictionary::{ksvd_train_from, sparse_code, CodingRule, SparseCodes};
use crate::error::{Result, SparseError};
use crate::linalg::{Matrix, Vector};
use crate::problem::Dictionary;

/// Row-major grayscale image. Pixels are nominally in `[0, 255]` but only
/// finiteness is enforced, so noisy intermediates may overshoot.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(SparseError::DimensionMismatch("image must be nonempty".into()));
        }
        if pixels.len() != height * width {
            return Err(SparseError::DimensionMismatch(format!(
                "{} pixels for a {height}×{width} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(SparseError::NonFinite("image"));
        }
        Ok(GrayImage { height, width, pixels })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let pixels = (0..height * width).map(|i| f(i / width, i % width)).collect();
        GrayImage::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }

    /// Rounded and clipped to bytes.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|p| p.round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn clipped(&self) -> GrayImage {
        GrayImage { pixels: self.pixels.iter().map(|p| p.clamp(0.0, 255.0)).collect(), ..*self }
    }

    /// Pixels as a row-major column vector.
    pub fn to_vector(&self) -> Vector {
        Vector::from_column_slice(&self.pixels)
    }

    /// Bilinear resampling with pixel centers aligned (`src = (dst + ½)·scale − ½`,
    /// clamped at the borders).
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Result<GrayImage> {
        if height == 0 || width == 0 {
            return Err(SparseError::InvalidParameter("resize target must be nonempty".into()));
        }
        let axis = |dst: usize, src_len: usize, dst_len: usize| {
            let pos = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src_len - 1);
            (lo, hi, pos - lo as f64)
        };
        GrayImage::from_fn(height, width, |r, c| {
            let (r0, r1, fr) = axis(r, self.height, height);
            let (c0, c1, fc) = axis(c, self.width, width);
            let top = self.get(r0, c0) * (1.0 - fc) + self.get(r0, c1) * fc;
            let bottom = self.get(r1, c0) * (1.0 - fc) + self.get(r1, c1) * fc;
            top * (1.0 - fr) + bottom * fr
        })
    }
}

/// Peak signal-to-noise ratio in dB against `reference` (peak 255).
/// Identical images give `+∞`.
pub fn psnr(image: &GrayImage, reference: &GrayImage) -> Result<f64> {
    if (image.height, image.width) != (reference.height, reference.width) {
        return Err(SparseError::DimensionMismatch("PSNR needs images of equal size".into()));
    }
    let mse = image.pixels.iter().zip(&reference.pixels).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        / image.pixels.len() as f64;
    Ok(10.0 * (255.0f64.powi(2) / mse).log10())
}

/// Overlapping `p×p` patches, each vectorized row-major into a column.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub stride: usize,
    pub height: usize,
    pub width: usize,
    pub patches: Matrix,
    /// Top-left `(row, col)` of each column's patch.
    pub locations: Vec<(usize, usize)>,
}

/// Offsets `0, s, 2s, …` up to `len − p`, plus `len − p` itself when the
/// stride skips it, so every pixel is covered.
fn offsets(len: usize, p: usize, stride: usize) -> Vec<usize> {
    let last = len - p;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if v.last() != Some(&last) {
        v.push(last);
    }
    v
}

pub fn extract_patches(img: &GrayImage, p: usize, stride: usize) -> Result<PatchGrid> {
    if p == 0 || stride == 0 || stride > p {
        return Err(SparseError::InvalidParameter(format!(
            "need 1 ≤ stride ≤ patch size for full coverage, got stride {stride}, patch {p}"
        )));
    }
    if p > img.height.min(img.width) {
        return Err(SparseError::InvalidParameter(format!(
            "patch size {p} exceeds the {}×{} image",
            img.height, img.width
        )));
    }
    let mut locations = Vec::new();
    for r in offsets(img.height, p, stride) {
        for c in offsets(img.width, p, stride) {
            locations.push((r, c));
        }
    }
    let patches = Matrix::from_fn(p * p, locations.len(), |i, j| {
        let (r, c) = locations[j];
        img.get(r + i / p, c + i % p)
    });
    Ok(PatchGrid { patch_size: p, stride, height: img.height, width: img.width, patches, locations })
}

/// Closed-form fusion of overlapping patch estimates with the observation:
/// per pixel, `(Σ patch values + δ·y) / (coverage + δ)`. Not clipped.
pub fn aggregate(grid: &PatchGrid, estimates: &Matrix, observed: &GrayImage, delta: f64) -> Result<GrayImage> {
    let p = grid.patch_size;
    if estimates.shape() != grid.patches.shape() {
        return Err(SparseError::DimensionMismatch("estimates must match the patch matrix".into()));
    }
    if (observed.height, observed.width) != (grid.height, grid.width) {
        return Err(SparseError::DimensionMismatch("observed image does not match the grid".into()));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(SparseError::InvalidParameter(format!("fidelity weight must be ≥ 0, got {delta}")));
    }
    let w = grid.width;
    let mut sum: Vec<f64> = observed.pixels.iter().map(|v| delta * v).collect();
    let mut weight = vec![delta; sum.len()];
    for (j, &(r, c)) in grid.locations.iter().enumerate() {
        for i in 0..p * p {
            let k = (r + i / p) * w + c + i % p;
            sum[k] += estimates[(i, j)];
            weight[k] += 1.0;
        }
    }
    let pixels = sum.iter().zip(&weight).map(|(s, n)| s / n).collect();
    GrayImage::new(grid.height, grid.width, pixels)
}

/// Separable overcomplete DCT: a `p×k` 1-D cosine frame (non-constant
/// columns made zero-mean) tensored with itself, giving `k²` unit atoms.
pub fn overcomplete_dct(p: usize, k: usize) -> Matrix {
    let mut d1 = Matrix::from_fn(p, k, |i, j| (i as f64 * j as f64 * std::f64::consts::PI / k as f64).cos());
    for j in 0..k {
        let mut col = d1.column(j).into_owned();
        if j > 0 {
            col.add_scalar_mut(-col.mean());
        }
        d1.set_column(j, &(&col / col.norm()));
    }
    Matrix::from_fn(p * p, k * k, |i, a| d1[(i / p, a / k)] * d1[(i % p, a % k)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseConfig {
    /// Noise standard deviation in gray levels.
    pub sigma: f64,
    pub patch: usize,
    pub stride: usize,
    /// Dictionary size; must be a perfect square.
    pub atoms: usize,
    pub sweeps: usize,
    /// Per-patch coding stops once `‖Dα − z‖ ≤ gain·σ·patch`.
    pub gain: f64,
    /// Fidelity weight; `None` means `30/σ`.
    pub delta: Option<f64>,
}

impl DenoiseConfig {
    pub fn new(sigma: f64) -> Self {
        DenoiseConfig { sigma, patch: 8, stride: 1, atoms: 256, sweeps: 10, gain: 1.15, delta: None }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(30.0 / self.sigma)
    }

    pub fn error_bound(&self) -> f64 {
        self.gain * self.sigma * self.patch as f64
    }
}

#[derive(Debug, Clone)]
pub struct DenoiseOutcome {
    pub image: GrayImage,
    pub dict: Dictionary,
    /// Noisy patches as extracted (DC included).
    pub grid: PatchGrid,
    /// Codes of the mean-removed patches against `dict`.
    pub codes: SparseCodes,
    /// `‖Z − DA‖_F` after each learning sweep.
    pub objective_trace: Vec<f64>,
}

pub fn denoise_image(noisy: &GrayImage, config: &DenoiseConfig) -> Result<DenoiseOutcome> {
    let sigma = config.sigma;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(SparseError::InvalidParameter(format!("noise level must be positive, got {sigma}")));
    }
    if !(config.gain > 0.0) || !config.gain.is_finite() {
        return Err(SparseError::InvalidParameter("error gain must be positive".into()));
    }
    let k = (config.atoms as f64).sqrt().round() as usize;
    if k == 0 || k * k != config.atoms {
        return Err(SparseError::InvalidParameter(format!("atom count {} is not a perfect square", config.atoms)));
    }
    let delta = config.delta();
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(SparseError::InvalidParameter(format!("fidelity weight must be ≥ 0, got {delta}")));
    }

    let grid = extract_patches(noisy, config.patch, config.stride)?;
    let means: Vec<f64> = grid.patches.column_iter().map(|c| c.mean()).collect();
    let mut centered = grid.patches.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }

    let p2 = config.patch * config.patch;
    let rule = CodingRule::ErrorBound { epsilon: config.error_bound(), max_atoms: p2 };
    let initial = overcomplete_dct(config.patch, k);
    let (dict, objective_trace) = if config.sweeps > 0 {
        let out = ksvd_train_from(&centered, &initial, rule, config.sweeps)?;
        (out.dict, out.objective_trace)
    } else {
        (Dictionary::normalized(initial)?, Vec::new())
    };
    // Final coding against the finished dictionary so every patch meets the bound.
    let codes = sparse_code(&dict, &centered, rule)?;

    let mut estimates = Matrix::zeros(p2, grid.locations.len());
    for (j, &mean) in means.iter().enumerate() {
        let mut est = codes.reconstruct(dict.atoms(), j);
        est.add_scalar_mut(mean);
        estimates.set_column(j, &est);
    }
    let image = aggregate(&grid, &estimates, noisy, delta)?.clipped();
    Ok(DenoiseOutcome { image, dict, grid, codes, objective_trace })
}
