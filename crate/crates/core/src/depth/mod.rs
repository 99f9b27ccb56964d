//! Metric depth rasters, masks, and scale/shift alignment of predicted depth.
//!
//! Monocular depth predictions are metrically meaningless until aligned; the
//! fit here finds the affine map `s * pred + b` that best matches a metric
//! reference over (a dilation of) the object mask, by closed-form least
//! squares. Flicker diagnostics summarize frame-to-frame wobble of the
//! masked mean depth.

mod io;

pub use io::{read_dpth, read_pgm, write_dpth, write_pgm};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("raster size {width}x{height} does not match buffer length {len}")]
    BadSize { width: u32, height: u32, len: usize },
    #[error("depth value at index {index} is {value}; finite depths must be positive")]
    InvalidValue { index: usize, value: f64 },
    #[error("rasters have mismatched dimensions: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: u32,
        a_height: u32,
        b_width: u32,
        b_height: u32,
    },
    #[error("{found} usable pixels; need at least {need}")]
    InsufficientPixels { found: usize, need: usize },
    #[error("predicted depth is constant over the fit region; scale is unobservable")]
    DegeneratePred,
    #[error("flicker profile needs at least 2 frames, got {found}")]
    TooFewFrames { found: usize },
    #[error("{maps} depth frames but {masks} masks")]
    LengthMismatch { maps: usize, masks: usize },
    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<DepthError>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad depth raster magic; expected \"DPTH\"")]
    BadMagic,
    #[error("depth raster truncated: expected {expected} bytes of samples, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("malformed pgm: {reason}")]
    BadPgm { reason: &'static str },
}

/// Dense depth raster in meters, row-major. `NaN` marks invalid pixels; all
/// finite values are positive (enforced at construction).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T> {
    width: u32,
    height: u32,
    data: Vec<T>,
}

impl<T: Real> DepthMap<T> {
    pub fn new(width: u32, height: u32, data: Vec<T>) -> Result<Self, DepthError> {
        if width == 0 || height == 0 || data.len() != (width as usize) * (height as usize) {
            return Err(DepthError::BadSize {
                width,
                height,
                len: data.len(),
            });
        }
        for (index, &v) in data.iter().enumerate() {
            if !v.is_nan() && !(v.is_finite() && v > T::zero()) {
                return Err(DepthError::InvalidValue {
                    index,
                    value: v.as_f64(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// All-invalid raster to be filled through [`DepthMap::set`].
    pub fn invalid(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![T::nan(); (width as usize) * (height as usize)],
        }
    }

    /// Raster already known to satisfy the value invariant (fit output with
    /// clipped pixels set to NaN).
    fn from_checked(width: u32, height: u32, data: Vec<T>) -> Self {
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> T {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Set one pixel; `value` must be `NaN` or positive finite.
    pub fn set(&mut self, x: u32, y: u32, value: T) {
        debug_assert!(x < self.width && y < self.height);
        debug_assert!(value.is_nan() || value > T::zero());
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    #[inline]
    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.get(x, y).is_finite()
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|v| v.is_finite()).count()
    }

    /// Bilinear sample at continuous pixel coordinates.
    ///
    /// Returns `None` when any of the four neighbors is outside the raster or
    /// invalid, including neighbors whose interpolation weight is zero; a NaN
    /// anywhere in the footprint poisons the sample.
    pub fn sample_bilinear(&self, x: T, y: T) -> Option<T> {
        if !(x.is_finite() && y.is_finite()) || x < T::zero() || y < T::zero() {
            return None;
        }
        let x0f = x.floor();
        let y0f = y.floor();
        let (x0, y0) = (x0f.as_f64() as u32, y0f.as_f64() as u32);
        if x0 + 1 >= self.width || y0 + 1 >= self.height {
            return None;
        }
        let v00 = self.get(x0, y0);
        let v10 = self.get(x0 + 1, y0);
        let v01 = self.get(x0, y0 + 1);
        let v11 = self.get(x0 + 1, y0 + 1);
        if !(v00.is_finite() && v10.is_finite() && v01.is_finite() && v11.is_finite()) {
            return None;
        }
        let fx = x - x0f;
        let fy = y - y0f;
        let one = T::one();
        let top = v00 * (one - fx) + v10 * fx;
        let bottom = v01 * (one - fx) + v11 * fx;
        Some(top * (one - fy) + bottom * fy)
    }
}

/// Binary pixel mask; `true` pixels are masked (the object).
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, DepthError> {
        if width == 0 || height == 0 || bits.len() != (width as usize) * (height as usize) {
            return Err(DepthError::BadSize {
                width,
                height,
                len: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; (width as usize) * (height as usize)],
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Binary dilation by a square structuring element of radius `radius`
    /// (Chebyshev ball), computed separably. Radius 0 is a copy.
    pub fn dilate(&self, radius: u32) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as usize;
        // Horizontal pass.
        let mut horiz = vec![false; w * h];
        for y in 0..h {
            let row = &self.bits[y * w..(y + 1) * w];
            let out = &mut horiz[y * w..(y + 1) * w];
            for x in row.iter().enumerate().filter(|(_, b)| **b).map(|(x, _)| x) {
                let lo = x.saturating_sub(r);
                let hi = (x + r).min(w - 1);
                out[lo..=hi].fill(true);
            }
        }
        // Vertical pass.
        let mut bits = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if horiz[y * w + x] {
                    let lo = y.saturating_sub(r);
                    let hi = (y + r).min(h - 1);
                    for yy in lo..=hi {
                        bits[yy * w + x] = true;
                    }
                }
            }
        }
        Mask {
            width: self.width,
            height: self.height,
            bits,
        }
    }
}

/// Result of aligning predicted depth to a metric reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineDepthFit<T> {
    /// Multiplicative part of `s * pred + b`.
    pub scale: T,
    /// Additive part, meters.
    pub shift: T,
    /// Root-mean-square residual over the pixels used.
    pub rmse: T,
    /// Number of pixels that entered the fit.
    pub pixel_count: usize,
}

/// Pixels participating in a fit: dilated mask intersected with validity of
/// both rasters. Row-major order.
fn fit_pixels<T: Real>(
    pred: &DepthMap<T>,
    real: &DepthMap<T>,
    mask: &Mask,
    dilation_px: u32,
) -> Result<Vec<(T, T)>, DepthError> {
    if pred.width != real.width
        || pred.height != real.height
        || pred.width != mask.width
        || pred.height != mask.height
    {
        return Err(DepthError::DimensionMismatch {
            a_width: pred.width,
            a_height: pred.height,
            b_width: if pred.width != real.width {
                real.width
            } else {
                mask.width
            },
            b_height: if pred.height != real.height {
                real.height
            } else {
                mask.height
            },
        });
    }
    let region = mask.dilate(dilation_px);
    let mut pairs = Vec::new();
    for y in 0..pred.height {
        for x in 0..pred.width {
            if region.get(x, y) && pred.is_valid(x, y) && real.is_valid(x, y) {
                pairs.push((pred.get(x, y), real.get(x, y)));
            }
        }
    }
    Ok(pairs)
}

/// Closed-form least squares of `argmin_{s,b} sum (s * pred + b - real)^2`
/// over the given pairs. Two-pass centered accumulation.
fn solve_affine<T: Real>(pairs: &[(T, T)]) -> Result<AffineDepthFit<T>, DepthError> {
    let n = pairs.len();
    if n < 2 {
        return Err(DepthError::InsufficientPixels { found: n, need: 2 });
    }
    let nt = T::of(n as f64);
    let mut mean_p = T::zero();
    let mut mean_r = T::zero();
    for &(p, r) in pairs {
        mean_p += p;
        mean_r += r;
    }
    mean_p /= nt;
    mean_r /= nt;
    let mut var_p = T::zero();
    let mut cov_pr = T::zero();
    for &(p, r) in pairs {
        let dp = p - mean_p;
        var_p += dp * dp;
        cov_pr += dp * (r - mean_r);
    }
    var_p /= nt;
    cov_pr /= nt;
    if var_p <= T::epsilon() * (T::one() + mean_p * mean_p) {
        return Err(DepthError::DegeneratePred);
    }
    let scale = cov_pr / var_p;
    let shift = mean_r - scale * mean_p;
    let mut sq = T::zero();
    for &(p, r) in pairs {
        let res = scale * p + shift - r;
        sq += res * res;
    }
    Ok(AffineDepthFit {
        scale,
        shift,
        rmse: (sq / nt).sqrt(),
        pixel_count: n,
    })
}

/// Align `pred` to `real` over the mask dilated by `dilation_px` (default
/// usage: 10), minimizing `sum (s * pred + b - real)^2` in closed form.
///
/// Pixels outside the dilated mask, and invalid pixels in either raster, do
/// not influence the result. Errors: `InsufficientPixels` below 2 usable
/// pixels, `DegeneratePred` when the prediction is constant over the region.
pub fn fit_scale_shift<T: Real>(
    pred: &DepthMap<T>,
    real: &DepthMap<T>,
    mask: &Mask,
    dilation_px: u32,
) -> Result<AffineDepthFit<T>, DepthError> {
    solve_affine(&fit_pixels(pred, real, mask, dilation_px)?)
}

/// Mask dilation radius used by the pipeline when none is specified.
pub const DEFAULT_DILATION_PX: u32 = 10;

/// [`fit_scale_shift`], then one trimmed refit: residuals farther than
/// 3 x MAD from the median residual are dropped and the fit is solved once
/// more. A zero MAD (already tight) returns the plain fit unchanged.
pub fn fit_scale_shift_trimmed<T: Real>(
    pred: &DepthMap<T>,
    real: &DepthMap<T>,
    mask: &Mask,
    dilation_px: u32,
) -> Result<AffineDepthFit<T>, DepthError> {
    let pairs = fit_pixels(pred, real, mask, dilation_px)?;
    let first = solve_affine(&pairs)?;
    let mut residuals: Vec<T> = pairs
        .iter()
        .map(|&(p, r)| first.scale * p + first.shift - r)
        .collect();
    let med = median_in_place(&mut residuals.clone());
    for r in &mut residuals {
        *r = (*r - med).abs();
    }
    let mad = median_in_place(&mut residuals.clone());
    if !(mad > T::zero()) {
        return Ok(first);
    }
    let keep: Vec<(T, T)> = pairs
        .iter()
        .zip(&residuals)
        .filter(|(_, &dev)| dev <= T::of(3.0) * mad)
        .map(|(&pair, _)| pair)
        .collect();
    solve_affine(&keep)
}

fn median_in_place<T: Real>(values: &mut [T]) -> T {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("residuals are finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * T::of(0.5)
    }
}

/// Apply `s * d + b` to every valid pixel. Results that are not positive
/// finite depths become invalid (`NaN`); the second return value counts them.
pub fn apply_affine<T: Real>(map: &DepthMap<T>, fit: &AffineDepthFit<T>) -> (DepthMap<T>, usize) {
    let mut clipped = 0usize;
    let data = map
        .data
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return T::nan();
            }
            let out = fit.scale * v + fit.shift;
            if out.is_finite() && out > T::zero() {
                out
            } else {
                clipped += 1;
                T::nan()
            }
        })
        .collect();
    (
        DepthMap::from_checked(map.width, map.height, data),
        clipped,
    )
}

/// Mean depth over `mask AND valid`. `InsufficientPixels` when empty.
pub fn mean_masked_depth<T: Real>(map: &DepthMap<T>, mask: &Mask) -> Result<T, DepthError> {
    if map.width != mask.width || map.height != mask.height {
        return Err(DepthError::DimensionMismatch {
            a_width: map.width,
            a_height: map.height,
            b_width: mask.width,
            b_height: mask.height,
        });
    }
    let mut sum = T::zero();
    let mut n = 0usize;
    for y in 0..map.height {
        for x in 0..map.width {
            if mask.get(x, y) && map.is_valid(x, y) {
                sum += map.get(x, y);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(DepthError::InsufficientPixels { found: 0, need: 1 });
    }
    Ok(sum / T::of(n as f64))
}

/// Frame-to-frame wobble of the masked mean depth.
#[derive(Debug, Clone, PartialEq)]
pub struct FlickerProfile<T> {
    /// Masked mean depth per frame.
    pub means: Vec<T>,
    /// `steps[t] = |means[t + 1] - means[t]|`.
    pub steps: Vec<T>,
}

impl<T: Real> FlickerProfile<T> {
    /// Largest frame-to-frame jump.
    pub fn max_step(&self) -> T {
        self.steps
            .iter()
            .fold(T::zero(), |acc, &s| if s > acc { s } else { acc })
    }
}

/// Per-frame masked means and their absolute frame-to-frame differences.
///
/// `maps` and `masks` must pair up one-to-one with at least two frames; a
/// frame whose mask covers no valid pixel fails with the frame index attached.
pub fn flicker_profile<T: Real>(
    maps: &[DepthMap<T>],
    masks: &[Mask],
) -> Result<FlickerProfile<T>, DepthError> {
    if maps.len() != masks.len() {
        return Err(DepthError::LengthMismatch {
            maps: maps.len(),
            masks: masks.len(),
        });
    }
    if maps.len() < 2 {
        return Err(DepthError::TooFewFrames { found: maps.len() });
    }
    let mut means = Vec::with_capacity(maps.len());
    for (frame, (map, mask)) in maps.iter().zip(masks).enumerate() {
        let mean = mean_masked_depth(map, mask).map_err(|source| DepthError::AtFrame {
            frame,
            source: Box::new(source),
        })?;
        means.push(mean);
    }
    let steps = means.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok(FlickerProfile { means, steps })
}
