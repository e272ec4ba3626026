//! Deterministic procedural images for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imageio::{downsample, GrayImage, ImageTriple, Kernel};

/// Smooth waves, a few hard-edged rectangles and fine grain, in roughly [16, 240].
pub fn texture(width: usize, height: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let period = rng.gen_range(6.0..40.0);
            let angle = rng.gen_range(0.0..std::f64::consts::PI);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = rng.gen_range(10.0..28.0);
            (period, angle, phase, amp)
        })
        .collect();
    let rects: Vec<(usize, usize, usize, usize, f64)> = (0..6)
        .map(|_| {
            let r0 = rng.gen_range(0..height);
            let c0 = rng.gen_range(0..width);
            let rh = rng.gen_range(height / 8 + 1..height / 2 + 2);
            let cw = rng.gen_range(width / 8 + 1..width / 2 + 2);
            (r0, c0, rh, cw, rng.gen_range(-45.0..45.0))
        })
        .collect();
    let base = rng.gen_range(100.0..150.0);
    let mut grain = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    GrayImage::from_fn(width, height, |r, c| {
        let (y, x) = (r as f64, c as f64);
        let mut v = base;
        for &(period, angle, phase, amp) in &waves {
            let t = (x * angle.cos() + y * angle.sin()) / period;
            v += amp * (std::f64::consts::TAU * t + phase).sin();
        }
        for &(r0, c0, rh, cw, step) in &rects {
            if (r0..r0 + rh).contains(&r) && (c0..c0 + cw).contains(&c) {
                v += step;
            }
        }
        v += grain.gen_range(-6.0..6.0);
        v.round().clamp(16.0, 240.0) as u8
    })
}

/// Mean filter over a (2·radius+1)² neighbourhood with clamped edges.
pub fn box_blur(img: &GrayImage, radius: usize) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let r = radius as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let n = ((2 * radius + 1) * (2 * radius + 1)) as u32;
    GrayImage::from_fn(w, h, |row, col| {
        let mut sum = 0u32;
        for dr in -r..=r {
            for dc in -r..=r {
                sum += img.get(clamp(row as isize + dr, h), clamp(col as isize + dc, w)) as u32;
            }
        }
        ((2 * sum + n) / (2 * n)) as u8
    })
    .expect("same dimensions as a valid image")
}

/// Adds integer noise drawn uniformly from [−⌊width/2⌋, ⌊width/2⌋], clamped to 0–255.
pub fn uniform_noise(img: &GrayImage, width: u32, seed: u64) -> GrayImage {
    let half = (width / 2) as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| (v as i32 + rng.gen_range(-half..=half)).clamp(0, 255) as u8)
        .collect();
    GrayImage::new(img.width(), img.height(), data).expect("same dimensions as a valid image")
}

/// Ground-truth HR textures with LR inputs produced by `kernel`, and the
/// generated HR image produced by `generator(hr_gt, index)`.
pub fn dataset(
    count: usize,
    lr_size: (usize, usize),
    scale: usize,
    kernel: Kernel,
    seed: u64,
    mut generator: impl FnMut(&GrayImage, usize) -> GrayImage,
) -> Result<Vec<ImageTriple>> {
    (0..count)
        .map(|i| {
            let hr_gt = texture(
                lr_size.0 * scale,
                lr_size.1 * scale,
                seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
            )?;
            let lr = downsample(&hr_gt, scale, kernel)?;
            let hr_gen = generator(&hr_gt, i);
            Ok(ImageTriple { lr, hr_gt, hr_gen })
        })
        .collect()
}
