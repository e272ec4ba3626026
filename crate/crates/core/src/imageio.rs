//! Grayscale rasters, the downsampling operator, and LR/HR patch-pair extraction.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage { width, height });
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "buffer of {} bytes for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.data[row * self.width..(row + 1) * self.width]
    }
}

/// BT.601 luma with round-half-up, computed in integer arithmetic.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000).min(255) as u8
}

/// Decodes an 8-bit PNG or binary PGM. RGB(A) input is reduced to luma and
/// alpha is discarded.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage { width, height });
    }
    let data = match decoded {
        image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        image::DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        image::DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect(),
        image::DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect(),
        other => {
            return Err(Error::UnsupportedBitDepth {
                path: path.to_owned(),
                format: format!("{:?}", other.color()),
            })
        }
    };
    GrayImage::new(width, height, data)
}

/// Writes an 8-bit grayscale image; the format follows the file extension.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = image::GrayImage::from_raw(img.width as u32, img.height as u32, img.data.clone())
        .expect("buffer length matches dimensions");
    buf.save(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.to_owned(),
            source,
        },
        other => Error::InvalidArgument(format!("cannot write {}: {other}", path.display())),
    })
}

/// Resampling kernel used by [`downsample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Mean of each s×s block.
    Box,
    /// Antialiased Catmull-Rom.
    #[default]
    Bicubic,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Box => "box",
            Kernel::Bicubic => "bicubic",
        })
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "box" => Ok(Kernel::Box),
            "bicubic" | "cubic" => Ok(Kernel::Bicubic),
            other => Err(invalid(format!("unknown kernel `{other}` (expected box or bicubic)"))),
        }
    }
}

#[inline]
fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Catmull-Rom cubic (a = -0.5).
pub fn catmull_rom(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Per-output-sample tap list: (clamped source index, normalized weight).
fn cubic_taps(input_len: usize, scale: usize) -> Vec<Vec<(usize, f64)>> {
    let s = scale as f64;
    let support = 2.0 * s;
    (0..input_len / scale)
        .map(|o| {
            let center = (o as f64 + 0.5) * s - 0.5;
            let lo = (center - support).floor() as isize;
            let hi = (center + support).ceil() as isize;
            let mut taps: Vec<(usize, f64)> = Vec::with_capacity((hi - lo + 1) as usize);
            let mut total = 0.0;
            for i in lo..=hi {
                let w = catmull_rom((i as f64 - center) / s);
                if w == 0.0 {
                    continue;
                }
                let src = i.clamp(0, input_len as isize - 1) as usize;
                total += w;
                match taps.iter_mut().find(|(idx, _)| *idx == src) {
                    Some(tap) => tap.1 += w,
                    None => taps.push((src, w)),
                }
            }
            for tap in &mut taps {
                tap.1 /= total;
            }
            taps
        })
        .collect()
}

/// The degradation operator: reduce both sides by the integer factor `scale`.
pub fn downsample(img: &GrayImage, scale: usize, kernel: Kernel) -> Result<GrayImage> {
    if scale < 2 {
        return Err(invalid(format!("scale must be >= 2, got {scale}")));
    }
    if !img.width.is_multiple_of(scale) || !img.height.is_multiple_of(scale) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} is not divisible by scale {scale}",
            img.width, img.height
        )));
    }
    let (out_w, out_h) = (img.width / scale, img.height / scale);
    let data = match kernel {
        Kernel::Box => {
            let n = (scale * scale) as u32;
            (0..out_h)
                .into_par_iter()
                .flat_map_iter(|orow| {
                    (0..out_w).map(move |ocol| {
                        let mut sum = 0u32;
                        for dr in 0..scale {
                            let row = img.row(orow * scale + dr);
                            sum += row[ocol * scale..(ocol + 1) * scale]
                                .iter()
                                .map(|&v| v as u32)
                                .sum::<u32>();
                        }
                        ((2 * sum + n) / (2 * n)) as u8
                    })
                })
                .collect()
        }
        Kernel::Bicubic => {
            let htaps = cubic_taps(img.width, scale);
            let vtaps = cubic_taps(img.height, scale);
            // Horizontal pass keeps full precision; rounding happens once at the end.
            let horizontal: Vec<f64> = (0..img.height)
                .into_par_iter()
                .flat_map_iter(|row| {
                    let src = img.row(row);
                    htaps
                        .iter()
                        .map(move |taps| taps.iter().map(|&(i, w)| w * src[i] as f64).sum::<f64>())
                })
                .collect();
            (0..out_h)
                .into_par_iter()
                .flat_map_iter(|orow| {
                    let taps = &vtaps[orow];
                    let horizontal = &horizontal;
                    (0..out_w).map(move |ocol| {
                        let v: f64 = taps.iter().map(|&(i, w)| w * horizontal[i * out_w + ocol]).sum();
                        round_half_up(v)
                    })
                })
                .collect()
        }
    };
    GrayImage::new(out_w, out_h, data)
}

/// Position of the selected HR pixel inside the s×s block under the LR
/// center pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelOffset {
    pub row: usize,
    pub col: usize,
}

impl PixelOffset {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// `(⌊(s−1)/2⌋, ⌊(s−1)/2⌋)`.
    pub const fn center(scale: usize) -> Self {
        let c = (scale.saturating_sub(1)) / 2;
        Self { row: c, col: c }
    }

    pub const fn top_left() -> Self {
        Self { row: 0, col: 0 }
    }

    pub const fn bottom_right(scale: usize) -> Self {
        let c = scale.saturating_sub(1);
        Self { row: c, col: c }
    }
}

/// Named or explicit pixel choice, resolved against a scale factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PixelChoice {
    #[default]
    Center,
    TopLeft,
    BottomRight,
    Explicit(PixelOffset),
}

impl PixelChoice {
    pub fn resolve(self, scale: usize) -> PixelOffset {
        match self {
            PixelChoice::Center => PixelOffset::center(scale),
            PixelChoice::TopLeft => PixelOffset::top_left(),
            PixelChoice::BottomRight => PixelOffset::bottom_right(scale),
            PixelChoice::Explicit(o) => o,
        }
    }
}

impl fmt::Display for PixelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PixelChoice::Center => f.write_str("center"),
            PixelChoice::TopLeft => f.write_str("top-left"),
            PixelChoice::BottomRight => f.write_str("bottom-right"),
            PixelChoice::Explicit(o) => write!(f, "{},{}", o.row, o.col),
        }
    }
}

impl FromStr for PixelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "center" | "centre" => Ok(PixelChoice::Center),
            "top-left" | "topleft" | "tl" => Ok(PixelChoice::TopLeft),
            "bottom-right" | "bottomright" | "br" => Ok(PixelChoice::BottomRight),
            _ => {
                let parse = |v: &str| v.trim().parse::<usize>().ok();
                match s.split_once(',') {
                    Some((r, c)) => match (parse(r), parse(c)) {
                        (Some(row), Some(col)) => Ok(PixelChoice::Explicit(PixelOffset::new(row, col))),
                        _ => Err(invalid(format!("bad pixel offset `{s}`"))),
                    },
                    None => Err(invalid(format!(
                        "unknown pixel choice `{s}` (expected center, top-left, bottom-right or `row,col`)"
                    ))),
                }
            }
        }
    }
}

/// Window layout shared by every image of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    pub patch_size: usize,
    pub scale: usize,
    pub stride: usize,
    pub offset: PixelOffset,
}

impl PatchGeometry {
    /// Default offset and a stride equal to the scale.
    pub fn new(patch_size: usize, scale: usize) -> Self {
        Self {
            patch_size,
            scale,
            stride: scale,
            offset: PixelOffset::center(scale),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.patch_size.is_multiple_of(2) {
            return Err(invalid(format!("patch size must be odd, got {}", self.patch_size)));
        }
        if self.scale < 1 {
            return Err(invalid("scale must be >= 1"));
        }
        if self.stride < 1 {
            return Err(invalid("stride must be >= 1"));
        }
        if self.offset.row >= self.scale || self.offset.col >= self.scale {
            return Err(invalid(format!(
                "pixel offset ({}, {}) outside the {}x{} block",
                self.offset.row, self.offset.col, self.scale, self.scale
            )));
        }
        Ok(())
    }

    /// Number of full windows along a side of length `len`.
    pub fn windows_along(&self, len: usize) -> usize {
        if len < self.patch_size {
            0
        } else {
            (len - self.patch_size) / self.stride + 1
        }
    }
}

/// One LR image with its ground-truth and generated HR counterparts.
#[derive(Debug, Clone)]
pub struct ImageTriple {
    pub lr: GrayImage,
    pub hr_gt: GrayImage,
    pub hr_gen: GrayImage,
}

/// Aligned samples stored column-wise: LR patches, projected GT value and
/// projected generated value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchPairSet {
    patch_size: usize,
    patches: Vec<u8>,
    gt_values: Vec<u8>,
    gen_values: Vec<u8>,
    image_ids: Vec<usize>,
    positions: Vec<(usize, usize)>,
}

/// Borrowed view of one sample.
#[derive(Debug, Clone, Copy)]
pub struct PatchSample<'a> {
    pub lr_patch: &'a [u8],
    pub gt_value: u8,
    pub gen_value: u8,
    pub image_id: usize,
    pub position: (usize, usize),
}

impl PatchPairSet {
    pub fn empty(patch_size: usize) -> Self {
        Self {
            patch_size,
            ..Default::default()
        }
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn len(&self) -> usize {
        self.gt_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt_values.is_empty()
    }

    /// Patch dimension r².
    pub fn dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn patch(&self, i: usize) -> &[u8] {
        let d = self.dim();
        &self.patches[i * d..(i + 1) * d]
    }

    pub fn patches(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.patches.chunks_exact(self.dim().max(1))
    }

    pub fn gt_values(&self) -> &[u8] {
        &self.gt_values
    }

    pub fn gen_values(&self) -> &[u8] {
        &self.gen_values
    }

    pub fn image_ids(&self) -> &[usize] {
        &self.image_ids
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn sample(&self, i: usize) -> PatchSample<'_> {
        PatchSample {
            lr_patch: self.patch(i),
            gt_value: self.gt_values[i],
            gen_value: self.gen_values[i],
            image_id: self.image_ids[i],
            position: self.positions[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = PatchSample<'_>> + '_ {
        (0..self.len()).map(move |i| self.sample(i))
    }

    pub fn push(
        &mut self,
        lr_patch: &[u8],
        gt_value: u8,
        gen_value: u8,
        image_id: usize,
        position: (usize, usize),
    ) -> Result<()> {
        if lr_patch.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "patch of {} values in a set of {}x{} patches",
                lr_patch.len(),
                self.patch_size,
                self.patch_size
            )));
        }
        self.patches.extend_from_slice(lr_patch);
        self.gt_values.push(gt_value);
        self.gen_values.push(gen_value);
        self.image_ids.push(image_id);
        self.positions.push(position);
        Ok(())
    }

    /// Appends `other`, shifting its image ids by `id_offset`.
    pub fn append(&mut self, other: PatchPairSet, id_offset: usize) -> Result<()> {
        if other.patch_size != self.patch_size {
            return Err(Error::DimensionMismatch(format!(
                "cannot merge patch sizes {} and {}",
                self.patch_size, other.patch_size
            )));
        }
        self.patches.extend(other.patches);
        self.gt_values.extend(other.gt_values);
        self.gen_values.extend(other.gen_values);
        self.image_ids
            .extend(other.image_ids.into_iter().map(|id| id + id_offset));
        self.positions.extend(other.positions);
        Ok(())
    }

    /// The same samples sorted by (LR patch, GT value, generated value), so
    /// that anything fitted on the result does not depend on image order.
    /// Image ids and positions travel with their samples.
    pub fn canonical_order(&self) -> PatchPairSet {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.par_sort_by(|&a, &b| {
            self.patch(a)
                .cmp(self.patch(b))
                .then(self.gt_values[a].cmp(&self.gt_values[b]))
                .then(self.gen_values[a].cmp(&self.gen_values[b]))
                .then(a.cmp(&b))
        });
        let mut out = PatchPairSet::empty(self.patch_size);
        out.patches.reserve(self.patches.len());
        for i in order {
            out.patches.extend_from_slice(self.patch(i));
            out.gt_values.push(self.gt_values[i]);
            out.gen_values.push(self.gen_values[i]);
            out.image_ids.push(self.image_ids[i]);
            out.positions.push(self.positions[i]);
        }
        out
    }
}

fn check_hr_dims(lr: &GrayImage, hr: &GrayImage, scale: usize, what: &str) -> Result<()> {
    if hr.width != lr.width * scale || hr.height != lr.height * scale {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{} but LR {}x{} at scale {scale} needs {}x{}",
            hr.width,
            hr.height,
            lr.width,
            lr.height,
            lr.width * scale,
            lr.height * scale
        )));
    }
    Ok(())
}

/// Slides an r×r window over `lr` and pairs each window with the selected HR
/// pixel under its center, from both the ground-truth and the generated image.
pub fn extract_patch_pairs(
    lr: &GrayImage,
    hr_gt: &GrayImage,
    hr_gen: &GrayImage,
    geometry: &PatchGeometry,
) -> Result<PatchPairSet> {
    geometry.validate()?;
    check_hr_dims(lr, hr_gt, geometry.scale, "ground-truth HR")?;
    check_hr_dims(lr, hr_gen, geometry.scale, "generated HR")?;
    let r = geometry.patch_size;
    if r > lr.width || r > lr.height {
        return Err(invalid(format!(
            "patch size {r} exceeds the {}x{} LR image",
            lr.width, lr.height
        )));
    }
    let half = r / 2;
    let rows = geometry.windows_along(lr.height);
    let cols = geometry.windows_along(lr.width);
    let mut set = PatchPairSet::empty(r);
    set.patches.reserve(rows * cols * r * r);
    for wi in 0..rows {
        let top = wi * geometry.stride;
        for wj in 0..cols {
            let left = wj * geometry.stride;
            for dr in 0..r {
                set.patches.extend_from_slice(&lr.row(top + dr)[left..left + r]);
            }
            let hr_row = geometry.scale * (top + half) + geometry.offset.row;
            let hr_col = geometry.scale * (left + half) + geometry.offset.col;
            set.gt_values.push(hr_gt.get(hr_row, hr_col));
            set.gen_values.push(hr_gen.get(hr_row, hr_col));
            set.image_ids.push(0);
            set.positions.push((top, left));
        }
    }
    Ok(set)
}

/// Extracts every triple of a dataset. Sample order is (image index, then
/// row-major window position) regardless of how work is scheduled.
pub fn extract_dataset(dataset: &[ImageTriple], geometry: &PatchGeometry) -> Result<PatchPairSet> {
    let parts: Vec<PatchPairSet> = dataset
        .par_iter()
        .map(|t| extract_patch_pairs(&t.lr, &t.hr_gt, &t.hr_gen, geometry))
        .collect::<Result<_>>()?;
    let mut all = PatchPairSet::empty(geometry.patch_size);
    for (id, part) in parts.into_iter().enumerate() {
        all.append(part, id)?;
    }
    Ok(all)
}
