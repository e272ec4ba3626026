//! Implementations checked against independent reference computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srdm_core::analysis::{dispersion_map, linfit, pearson, select_comparison_region};
use srdm_core::distributions::{kl_divergence, sliced_w2, sliced_w2_grad, w1_distance, Histogram256, BINS};
use srdm_core::grouping::{build_grouping, first_principal_component, kmeans, GroupingMode};
use srdm_core::imageio::{catmull_rom, downsample, GrayImage, Kernel, PatchPairSet};
use srdm_core::rating::{conservative_ranking, glicko_update, rate_tournament, GlickoParams, PlayerRating, VoteRecord};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- resampling

/// Non-separable 2-D convolution with the s-stretched Catmull-Rom kernel,
/// clamped edges, renormalized weights.
fn direct_bicubic(img: &GrayImage, s: usize) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let sf = s as f64;
    let mut out = Vec::new();
    for orow in 0..h / s {
        for ocol in 0..w / s {
            let cy = (orow as f64 + 0.5) * sf - 0.5;
            let cx = (ocol as f64 + 0.5) * sf - 0.5;
            let (mut acc, mut norm) = (0.0, 0.0);
            for iy in -(4 * s as isize)..(h as isize + 4 * s as isize) {
                let wy = catmull_rom((iy as f64 - cy) / sf);
                if wy == 0.0 {
                    continue;
                }
                for ix in -(4 * s as isize)..(w as isize + 4 * s as isize) {
                    let wx = catmull_rom((ix as f64 - cx) / sf);
                    if wx == 0.0 {
                        continue;
                    }
                    let y = iy.clamp(0, h as isize - 1) as usize;
                    let x = ix.clamp(0, w as isize - 1) as usize;
                    acc += wy * wx * img.get(y, x) as f64;
                    norm += wy * wx;
                }
            }
            out.push(acc / norm);
        }
    }
    out
}

#[test]
fn bicubic_matches_direct_convolution() {
    let ramp = GrayImage::from_fn(4, 4, |r, c| (r * 4 + c) as u8 * 16).unwrap();
    let got = downsample(&ramp, 4, Kernel::Bicubic).unwrap();
    let want = direct_bicubic(&ramp, 4);
    assert_eq!(got.data().len(), 1);
    assert!(
        (got.data()[0] as f64 - want[0]).abs() <= 1.0,
        "{} vs {}",
        got.data()[0],
        want[0]
    );

    let mut r = rng(5);
    for (w, h, s) in [(16, 12, 2), (24, 24, 4), (12, 18, 3)] {
        let img = GrayImage::from_fn(w, h, |_, _| r.gen()).unwrap();
        let got = downsample(&img, s, Kernel::Bicubic).unwrap();
        for (g, want) in got.data().iter().zip(direct_bicubic(&img, s)) {
            assert!((*g as f64 - want).abs() <= 1.0, "{g} vs {want}");
        }
    }
}

// ---------------------------------------------------------------- PCA

#[test]
fn fpc_matches_dense_eigensolver() {
    let mut r = rng(11);
    let scales = [3.0, 1.5, 0.7, 0.2];
    let points: Vec<f64> = (0..50)
        .flat_map(|_| scales.iter().map(|s| s * r.gen_range(-1.0..1.0)).collect::<Vec<_>>())
        .collect();
    let got = first_principal_component(&points, 4).unwrap();

    let n = 50.0;
    let mean: Vec<f64> = (0..4)
        .map(|j| points.iter().skip(j).step_by(4).sum::<f64>() / n)
        .collect();
    let mut cov = nalgebra::DMatrix::<f64>::zeros(4, 4);
    for p in points.chunks(4) {
        for a in 0..4 {
            for b in 0..4 {
                cov[(a, b)] += (p[a] - mean[a]) * (p[b] - mean[b]) / (n - 1.0);
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let top = eig.eigenvalues.iamax();
    let v = eig.eigenvectors.column(top);
    let dot: f64 = (0..4).map(|i| v[i] * got[i]).sum();
    assert!((dot.abs() - 1.0).abs() < 1e-8, "|dot| = {}", dot.abs());
}

// ---------------------------------------------------------------- k-means

fn objective(points: &[[f64; 2]], centroids: &[[f64; 2]]) -> f64 {
    points
        .iter()
        .map(|p| {
            centroids
                .iter()
                .map(|c| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Plain Lloyd from uniformly random distinct starting points, best of `restarts`.
fn naive_lloyd(points: &[[f64; 2]], k: usize, restarts: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let idx = rand::seq::index::sample(&mut r, points.len(), k);
        let mut cents: Vec<[f64; 2]> = idx.iter().map(|i| points[i]).collect();
        for _ in 0..300 {
            let mut sums = vec![[0.0; 2]; k];
            let mut counts = vec![0usize; k];
            for p in points {
                let c = (0..k)
                    .min_by(|&a, &b| {
                        let da = (p[0] - cents[a][0]).powi(2) + (p[1] - cents[a][1]).powi(2);
                        let db = (p[0] - cents[b][0]).powi(2) + (p[1] - cents[b][1]).powi(2);
                        da.total_cmp(&db)
                    })
                    .unwrap();
                sums[c][0] += p[0];
                sums[c][1] += p[1];
                counts[c] += 1;
            }
            for c in 0..k {
                if counts[c] > 0 {
                    cents[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
                }
            }
        }
        best = best.min(objective(points, &cents));
    }
    best
}

#[test]
fn kmeans_close_to_restarted_lloyd() {
    let mut r = rng(21);
    let centers = [[0.0, 0.0], [30.0, 5.0], [10.0, 40.0], [-20.0, 25.0], [45.0, 45.0]];
    let points: Vec<[f64; 2]> = (0..200)
        .map(|i| {
            let c = centers[i % 5];
            [c[0] + r.gen_range(-12.0..12.0), c[1] + r.gen_range(-12.0..12.0)]
        })
        .collect();
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let oracle = naive_lloyd(&points, 5, 20, 99);
    for seed in 0..5 {
        let fit = kmeans(&flat, 2, 5, seed).unwrap();
        let cents: Vec<[f64; 2]> = fit.centroids.chunks(2).map(|c| [c[0], c[1]]).collect();
        let ours = objective(&points, &cents);
        assert!((ours - fit.objective()).abs() < 1e-6 * ours);
        assert!(ours <= oracle * 1.05, "seed {seed}: {ours} vs oracle {oracle}");
    }
}

// ---------------------------------------------------------------- grouping

#[test]
fn fpc_grouping_recovers_latent() {
    // Patches vary along a single template: patch = 40 + t·template, t in 4 bands.
    let template: Vec<f64> = (0..9)
        .map(|i| [1.0, 2.0, 1.0, 0.0, 3.0, 0.0, -1.0, 2.0, 1.0][i])
        .collect();
    let mut r = rng(8);
    let mut set = PatchPairSet::empty(3);
    let mut latent = Vec::new();
    for i in 0..400 {
        let band = i % 4;
        let t = band as f64 * 12.0 + r.gen_range(0.0..3.0);
        let patch: Vec<u8> = template.iter().map(|w| (60.0 + t * w).round() as u8).collect();
        set.push(&patch, 0, 0, 0, (i, 0)).unwrap();
        latent.push(band);
    }
    let model = build_grouping(&set, GroupingMode::ProjectedFpc, 4, 3).unwrap();
    // Same partition up to relabeling: a bijection between bands and groups.
    let mut map = [usize::MAX; 4];
    for (&band, &g) in latent.iter().zip(&model.assignments) {
        if map[band] == usize::MAX {
            map[band] = g;
        }
        assert_eq!(map[band], g);
    }
    let mut used = map.to_vec();
    used.sort();
    used.dedup();
    assert_eq!(used.len(), 4);
}

// ---------------------------------------------------------------- transport

/// Greedy north-west-corner transport between two sorted 1-D pmfs, which is
/// optimal for convex costs on the line.
fn greedy_transport(p: &[f64], q: &[f64]) -> f64 {
    let (mut p, mut q) = (p.to_vec(), q.to_vec());
    let (mut i, mut j) = (0, 0);
    let mut cost = 0.0;
    while i < p.len() && j < q.len() {
        if p[i] <= 1e-15 {
            i += 1;
            continue;
        }
        if q[j] <= 1e-15 {
            j += 1;
            continue;
        }
        let m = p[i].min(q[j]);
        cost += m * (i as f64 - j as f64).abs();
        p[i] -= m;
        q[j] -= m;
    }
    cost
}

#[test]
fn w1_matches_greedy_transport_on_8_bins() {
    let mut r = rng(1234);
    for _ in 0..200 {
        let mut ca = [0u64; BINS];
        let mut cb = [0u64; BINS];
        for k in 0..8 {
            ca[k] = r.gen_range(0..20);
            cb[k] = r.gen_range(0..20);
        }
        ca[r.gen_range(0..8)] += 1;
        cb[r.gen_range(0..8)] += 1;
        let (a, b) = (Histogram256::from_counts(ca), Histogram256::from_counts(cb));
        let pa: Vec<f64> = ca[..8].iter().map(|&c| c as f64 / a.total() as f64).collect();
        let pb: Vec<f64> = cb[..8].iter().map(|&c| c as f64 / b.total() as f64).collect();
        let oracle = greedy_transport(&pa, &pb);
        let got = w1_distance(&a, &b).unwrap();
        assert!((got - oracle).abs() <= 1e-9, "{got} vs {oracle}");
    }
}

#[test]
fn kl_hand_evaluation() {
    // p = δ0, q = ½δ0 + ½δ1, smoothed by ε then renormalized.
    let eps: f64 = 1e-10;
    let z = 1.0 + 256.0 * eps;
    let p0 = (1.0 + eps) / z;
    let q0 = (0.5 + eps) / z;
    let q1 = (0.5 + eps) / z;
    let pe = eps / z;
    let oracle = p0 * (p0 / q0).ln() + pe * (pe / q1).ln();
    let p: Histogram256 = [0u8].into_iter().collect();
    let q: Histogram256 = [0u8, 1].into_iter().collect();
    let got = kl_divergence(&p, &q).unwrap();
    assert!((got - oracle).abs() < 1e-12);
    assert!((got - std::f64::consts::LN_2).abs() < 1e-6);
}

// ---------------------------------------------------------------- sliced W2

/// Random values in [0, 1) whose pairwise gaps all exceed `min_gap`, so a
/// perturbation of size h never reorders the sample (a generic point of the loss).
fn separated(r: &mut ChaCha8Rng, n: usize, min_gap: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| r.gen()).collect();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        if s.windows(2).all(|w| w[1] - w[0] > min_gap) {
            return v;
        }
    }
}

#[test]
fn sliced_gradient_matches_finite_differences() {
    let mut r = rng(77);
    let h = 1e-4;
    for _ in 0..50 {
        let gen = separated(&mut r, 32, 1e-3);
        let gt: Vec<f64> = (0..32).map(|_| r.gen()).collect();
        let grad = sliced_w2_grad(&gen, &gt).unwrap();
        for i in 0..32 {
            let mut up = gen.clone();
            let mut down = gen.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (sliced_w2(&up, &gt).unwrap() - sliced_w2(&down, &gt).unwrap()) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / grad[i].abs().max(fd.abs());
            assert!(rel <= 1e-4, "component {i}: analytic {} fd {fd}", grad[i]);
        }
    }
}

// ---------------------------------------------------------------- rating

#[test]
fn glicko_three_opponent_example() {
    let me = PlayerRating::new("me", 1500.0, 200.0);
    let games = vec![
        (PlayerRating::new("a", 1400.0, 30.0), 1.0),
        (PlayerRating::new("b", 1550.0, 100.0), 0.0),
        (PlayerRating::new("c", 1700.0, 300.0), 0.0),
    ];
    let out = glicko_update(&me, &games, &GlickoParams::default()).unwrap();
    // Hand evaluation of the one-period update gives 1464.106 and 151.399.
    assert!((out.rating - 1464.1).abs() <= 0.5, "{}", out.rating);
    assert!((out.deviation - 151.4).abs() <= 0.5, "{}", out.deviation);
}

#[test]
fn glicko_win_then_loss_returns_near_start() {
    let params = GlickoParams::default();
    let me = PlayerRating::new("me", 1500.0, 80.0);
    let opp = PlayerRating::new("opp", 1500.0, 80.0);
    let after_win = glicko_update(&me, &[(opp.clone(), 1.0)], &params).unwrap();
    let after_loss = glicko_update(&after_win, &[(opp, 0.0)], &params).unwrap();
    assert!(after_win.rating > 1500.0);
    assert!((after_loss.rating - 1500.0).abs() < 1.0, "{}", after_loss.rating);
    assert!(after_loss.deviation < after_win.deviation);
}

#[test]
fn transitive_chain_is_ranked() {
    let methods: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let mut votes = Vec::new();
    for _ in 0..30 {
        votes.push(VoteRecord::new("A", "B").unwrap());
        votes.push(VoteRecord::new("B", "C").unwrap());
    }
    let ratings = rate_tournament(&votes, &methods, 20, 4).unwrap();
    assert!(ratings[0].rating > ratings[1].rating && ratings[1].rating > ratings[2].rating);
    let order: Vec<String> = conservative_ranking(&ratings).into_iter().map(|(m, _)| m).collect();
    assert_eq!(order, vec!["A", "B", "C"]);
}

// ---------------------------------------------------------------- analysis

fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

#[test]
fn pearson_matches_textbook_formula() {
    let mut r = rng(3);
    for _ in 0..100 {
        let n = r.gen_range(3..40);
        let x: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + r.gen_range(-1.0..1.0)).collect();
        let got = pearson(&x, &y).unwrap();
        assert!((got - textbook_pearson(&x, &y)).abs() <= 1e-12);
    }
}

#[test]
fn linfit_residuals_are_orthogonal() {
    let mut r = rng(4);
    for _ in 0..50 {
        let x: Vec<f64> = (0..30).map(|_| r.gen_range(0.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| -1.5 * v + 4.0 + r.gen_range(-2.0..2.0)).collect();
        let (a, b) = linfit(&x, &y).unwrap();
        let res: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| yi - a * xi - b).collect();
        assert!(res.iter().sum::<f64>().abs() < 1e-9);
        assert!(res.iter().zip(&x).map(|(e, xi)| e * xi).sum::<f64>().abs() < 1e-9);
    }
}

fn naive_region(images: &[GrayImage], region: usize) -> (usize, usize) {
    let d = dispersion_map(images).unwrap();
    let (w, h) = (images[0].width(), images[0].height());
    let mut best = (0, 0, f64::NEG_INFINITY);
    for r in 0..=h - region {
        for c in 0..=w - region {
            let mut s = 0.0;
            for y in r..r + region {
                s += d[y * w + c..y * w + c + region].iter().sum::<f64>();
            }
            if s > best.2 + 1e-9 {
                best = (r, c, s);
            }
        }
    }
    (best.0, best.1)
}

#[test]
fn region_selection_matches_naive_scan() {
    let mut r = rng(600);
    let stack: Vec<GrayImage> = (0..3)
        .map(|_| GrayImage::from_fn(600, 600, |_, _| r.gen()).unwrap())
        .collect();
    assert_eq!(
        select_comparison_region(&stack, 100).unwrap(),
        naive_region(&stack, 100)
    );
    for trial in 0..5 {
        let (w, h) = (r.gen_range(20..60), r.gen_range(20..60));
        let stack: Vec<GrayImage> = (0..r.gen_range(2..5))
            .map(|_| GrayImage::from_fn(w, h, |_, _| r.gen()).unwrap())
            .collect();
        let region = r.gen_range(5..w.min(h));
        assert_eq!(
            select_comparison_region(&stack, region).unwrap(),
            naive_region(&stack, region),
            "trial {trial}"
        );
    }
}

#[test]
fn table_one_conservative_order() {
    let table = [
        ("SRResNet", 1336.408, 64.796),
        ("SRGAN", 1494.593, 62.901),
        ("Lapsrn", 1194.190, 69.350),
        ("RCAN", 1541.713, 63.197),
        ("EDSR", 1494.451, 62.911),
        ("EPSR", 1534.584, 63.280),
        ("ESRGAN(PSNR)", 1526.869, 62.257),
        ("ESRGAN(GAN)", 1759.780, 65.555),
        ("ProSR(PSNR)", 1438.452, 62.598),
        ("ProSR(GAN)", 1665.900, 64.605),
    ];
    let ratings: Vec<PlayerRating> = table.iter().map(|&(m, r, s)| PlayerRating::new(m, r, s)).collect();
    let ranked = conservative_ranking(&ratings);
    assert_eq!(ranked[0].0, "ESRGAN(GAN)");
    assert!((ranked[0].1 - 1631.2922).abs() < 1e-6);
    assert_eq!(ranked[1].0, "ProSR(GAN)");
    assert_eq!(ranked.last().unwrap().0, "Lapsrn");
}
