use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use srdm_core::distributions::Distance;
use srdm_core::grouping::GroupingMode;
use srdm_core::imageio::{catmull_rom, downsample, GrayImage, ImageTriple, Kernel, PixelChoice};
use srdm_core::metric::{
    back_projection_error, compute_instance_metric, compute_metric, metric_with_subsampling, GroupCount,
    InstanceSamples, MetricConfig,
};
use srdm_core::synthetic;

fn fixture_config() -> MetricConfig {
    MetricConfig {
        stride: Some(1),
        ..MetricConfig::default()
    }
}

fn noisy_set(count: usize, width: u32) -> Vec<ImageTriple> {
    synthetic::dataset(count, (40, 40), 4, Kernel::Bicubic, 11, |hr, i| {
        synthetic::uniform_noise(hr, width, 500 + i as u64)
    })
    .unwrap()
}

fn constant_triple(lr: u8, gt: u8, gen: u8) -> ImageTriple {
    ImageTriple {
        lr: GrayImage::filled(20, 20, lr).unwrap(),
        hr_gt: GrayImage::filled(40, 40, gt).unwrap(),
        hr_gen: GrayImage::filled(40, 40, gen).unwrap(),
    }
}

#[test]
fn swapped_images_need_two_groups() {
    let data = vec![constant_triple(40, 20, 10), constant_triple(180, 10, 20)];
    let config = MetricConfig {
        scale: 2,
        patch_size: 3,
        n_groups: GroupCount::Fixed(2),
        ..MetricConfig::default()
    };
    let report = compute_metric(&data, &config).unwrap();
    assert_eq!(report.aggregate, 10.0);
    assert_eq!(report.per_group.len(), 2);

    let one = MetricConfig {
        n_groups: GroupCount::Fixed(1),
        ..config
    };
    assert_eq!(compute_metric(&data, &one).unwrap().aggregate, 0.0);
}

#[test]
fn identical_outputs_score_zero() {
    let data = synthetic::dataset(4, (40, 40), 4, Kernel::Bicubic, 2, |hr, _| hr.clone()).unwrap();
    for distance in Distance::ALL {
        let config = MetricConfig {
            distance,
            ..fixture_config()
        };
        let report = compute_metric(&data, &config).unwrap();
        assert!(report.per_group.iter().all(|g| g.distance <= 1e-9), "{distance}");
        if distance != Distance::Kl {
            assert_eq!(report.aggregate, 0.0, "{distance}");
        }
        assert_eq!(report.dropped_groups + report.per_group.len(), report.n_groups);
    }
}

#[test]
fn constant_shift_scores_the_shift() {
    // Textures stay within [16, 240], so +5 never clips.
    let data = synthetic::dataset(4, (40, 40), 4, Kernel::Bicubic, 3, |hr, _| {
        GrayImage::from_fn(hr.width(), hr.height(), |r, c| hr.get(r, c) + 5).unwrap()
    })
    .unwrap();
    let report = compute_metric(&data, &fixture_config()).unwrap();
    assert!(report.per_group.iter().all(|g| (g.distance - 5.0).abs() < 1e-12));
    assert!((report.aggregate - 5.0).abs() < 1e-12);
}

#[test]
fn noise_degrades_monotonically() {
    let scores: Vec<f64> = [4, 16, 64]
        .iter()
        .map(|&w| compute_metric(&noisy_set(6, w), &fixture_config()).unwrap().aggregate)
        .collect();
    assert!(scores[0] > 0.0);
    for pair in scores.windows(2) {
        assert!(pair[1] >= 1.1 * pair[0], "{scores:?}");
    }
}

#[test]
fn subsample_means_agree_across_sizes() {
    // At the smaller noise widths the population distance is below one
    // intensity level and the N_s = 500 estimate is dominated by its own bias.
    let data = noisy_set(16, 64);
    let config = MetricConfig {
        n_groups: GroupCount::Fixed(4),
        ..fixture_config()
    };
    let small = metric_with_subsampling(&data, &config, 500, 20, 1).unwrap();
    let large = metric_with_subsampling(&data, &config, 2000, 20, 1).unwrap();
    assert!(
        (small.mean - large.mean).abs() <= 0.1 * large.mean,
        "{} vs {}",
        small.mean,
        large.mean
    );
    assert!(small.variance >= large.variance);
    let again = metric_with_subsampling(&data, &config, 500, 20, 1).unwrap();
    assert_eq!(small, again);
}

#[test]
fn box_pairs_back_project_exactly() {
    let lr = synthetic::texture(30, 20, 5).unwrap();
    let hr = GrayImage::from_fn(90, 60, |r, c| lr.get(r / 3, c / 3)).unwrap();
    assert_eq!(back_projection_error(&hr, &lr, 3, Kernel::Box).unwrap(), 0.0);
    let hr = synthetic::texture(120, 80, 6).unwrap();
    let lr = downsample(&hr, 4, Kernel::Box).unwrap();
    assert_eq!(back_projection_error(&hr, &lr, 4, Kernel::Box).unwrap(), 0.0);
}

/// Antialiased Catmull-Rom as a direct 2-D weighted sum per output pixel.
fn bicubic_oracle(img: &GrayImage, s: usize) -> GrayImage {
    let sf = s as f64;
    let taps = |center: f64, n: usize| -> Vec<(usize, f64)> {
        let lo = (center - 2.0 * sf).floor() as isize;
        let hi = (center + 2.0 * sf).ceil() as isize;
        let raw: Vec<(usize, f64)> = (lo..=hi)
            .map(|j| {
                let w = catmull_rom((j as f64 + 0.5 - center) / sf);
                (j.clamp(0, n as isize - 1) as usize, w)
            })
            .collect();
        let total: f64 = raw.iter().map(|t| t.1).sum();
        raw.into_iter().map(|(j, w)| (j, w / total)).collect()
    };
    GrayImage::from_fn(img.width() / s, img.height() / s, |r, c| {
        let ty = taps((r as f64 + 0.5) * sf, img.height());
        let tx = taps((c as f64 + 0.5) * sf, img.width());
        let mut v = 0.0;
        for &(y, wy) in &ty {
            for &(x, wx) in &tx {
                v += wy * wx * img.get(y, x) as f64;
            }
        }
        (v + 0.5).floor().clamp(0.0, 255.0) as u8
    })
    .unwrap()
}

#[test]
fn bicubic_round_trip_is_within_one_level() {
    for seed in 0..4 {
        let hr = synthetic::texture(96, 64, seed).unwrap();
        let lr = bicubic_oracle(&hr, 4);
        let err = back_projection_error(&hr, &lr, 4, Kernel::Bicubic).unwrap();
        assert!(err <= 1.0, "seed {seed}: {err}");
    }
}

#[test]
fn invariant_to_order_and_threads() {
    let data = noisy_set(6, 16);
    let config = fixture_config();
    let run = |threads: usize, data: &[ImageTriple]| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| compute_metric(data, &config).unwrap())
    };
    let base = run(1, &data);
    let wide = run(4, &data);
    assert_eq!(base.to_json().unwrap(), wide.to_json().unwrap());
    let mut reversed = data.clone();
    reversed.reverse();
    let rev = run(4, &reversed);
    assert_eq!(base.to_json().unwrap(), rev.to_json().unwrap());
}

#[test]
fn per_pixel_choice_gives_valid_reports() {
    let data = noisy_set(3, 16);
    for pixel in [PixelChoice::Center, PixelChoice::TopLeft, PixelChoice::BottomRight] {
        let config = MetricConfig {
            pixel,
            ..fixture_config()
        };
        let report = compute_metric(&data, &config).unwrap();
        assert!(report.aggregate > 0.0);
    }
}

const KEYS: usize = 10;
const LR_SIDE: usize = 102;

fn key_law(key: usize) -> (Normal<f64>, Normal<f64>) {
    let k = key as f64;
    let gt = Normal::new(60.0 + 14.0 * k, 6.0 + k).unwrap();
    let gen = Normal::new(63.0 + 14.0 * k + 0.5 * k, 9.0 + 0.5 * k).unwrap();
    (gt, gen)
}

fn draw(law: &Normal<f64>, rng: &mut ChaCha8Rng) -> u8 {
    law.sample(rng).round().clamp(0.0, 255.0) as u8
}

#[test]
fn singleton_groups_match_the_instance_metric() {
    // One constant LR image per key, so every window of an image shares a key.
    // With r = 3, s = 2 and stride 1 each window selects a distinct HR pixel:
    // 100 × 100 = 10k draws per key.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data: Vec<ImageTriple> = (0..KEYS)
        .map(|key| {
            let (gt, gen) = key_law(key);
            let side = 2 * LR_SIDE;
            ImageTriple {
                lr: GrayImage::filled(LR_SIDE, LR_SIDE, 10 + 20 * key as u8).unwrap(),
                hr_gt: GrayImage::from_fn(side, side, |_, _| draw(&gt, &mut rng)).unwrap(),
                hr_gen: GrayImage::from_fn(side, side, |_, _| draw(&gen, &mut rng)).unwrap(),
            }
        })
        .collect();
    let config = MetricConfig {
        scale: 2,
        patch_size: 3,
        stride: Some(1),
        n_groups: GroupCount::Fixed(KEYS),
        grouping_mode: GroupingMode::ProjectedOnes,
        ..MetricConfig::default()
    };
    let report = compute_metric(&data, &config).unwrap();
    assert_eq!(report.per_group.len(), KEYS);
    assert!(report.per_group.iter().all(|g| g.gt_count == 10_000));

    let mut oracle_rng = ChaCha8Rng::seed_from_u64(77);
    let samples: Vec<InstanceSamples> = (0..KEYS)
        .map(|key| {
            let (gt, gen) = key_law(key);
            InstanceSamples {
                key: format!("x{key}"),
                gt_values: (0..10_000).map(|_| draw(&gt, &mut oracle_rng)).collect(),
                gen_values: (0..10_000).map(|_| draw(&gen, &mut oracle_rng)).collect(),
            }
        })
        .collect();
    let oracle = compute_instance_metric(&samples, Distance::Wasserstein).unwrap();
    let rel = (report.aggregate - oracle).abs() / oracle;
    assert!(rel <= 0.05, "grouped {} vs instance {oracle}", report.aggregate);
}
