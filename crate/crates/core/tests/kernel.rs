use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};
use textrbl_core::features::FeaturePatch;
use textrbl_core::imgproc::{fft2, ifft2, Fft2};
use textrbl_core::tracker::{gaussian_correlation, train};
use textrbl_core::{BoundingBox, ComplexPlane, Frame, RealPlane, TrackerParams, TrackerState};

/// Small deterministic generator so oracles see fixed inputs.
struct Lcg(u64);

impl Lcg {
    fn unit(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, n: usize) -> usize {
        (self.unit() * n as f64) as usize % n
    }
}

fn random_patch(rng: &mut Lcg, w: usize, h: usize, channels: usize) -> FeaturePatch {
    let planes = (0..channels)
        .map(|_| RealPlane::from_fn(w, h, |_, _| rng.unit() - 0.5).unwrap())
        .collect();
    FeaturePatch::new(planes, 1.0).unwrap()
}

/// Spatial-domain kernel: explicit shift enumeration and dot products.
fn brute_force_kernel(a: &FeaturePatch, b: &FeaturePatch, sigma: f64) -> Vec<f64> {
    let (w, h) = a.dims();
    let n = (w * h * a.channels()) as f64;
    let norm = |p: &FeaturePatch| p.planes().iter().flat_map(|q| q.data()).map(|v| v * v).sum::<f64>();
    let (na, nb) = (norm(a), norm(b));
    let mut out = vec![0.0; w * h];
    for ty in 0..h {
        for tx in 0..w {
            let mut dot = 0.0;
            for (pa, pb) in a.planes().iter().zip(b.planes()) {
                for y in 0..h {
                    for x in 0..w {
                        dot += pa.get(x, y) * pb.get((x + tx) % w, (y + ty) % h);
                    }
                }
            }
            out[ty * w + tx] = (-((na + nb - 2.0 * dot).max(0.0)) / (sigma * sigma * n)).exp();
        }
    }
    out
}

fn naive_dft(plane: &RealPlane) -> Vec<(f64, f64)> {
    let (w, h) = plane.dims();
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0 * std::f64::consts::PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                    re += plane.get(x, y) * phase.cos();
                    im += plane.get(x, y) * phase.sin();
                }
            }
            out.push((re, im));
        }
    }
    out
}

fn rms(diffs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = diffs.collect();
    (v.iter().map(|d| d * d).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn kernel_matches_spatial_oracle_on_random_patches() {
    let mut rng = Lcg(0x5eed);
    let started = std::time::Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w = 1 + rng.below(16);
        let h = 1 + rng.below(16);
        let c = 1 + rng.below(3);
        let a = random_patch(&mut rng, w, h, c);
        let b = random_patch(&mut rng, w, h, c);
        let sigma = 0.2 + rng.unit();
        let fast = gaussian_correlation(&a, &b, sigma).unwrap();
        let slow = brute_force_kernel(&a, &b, sigma);
        for (f, s) in fast.data().iter().zip(&slow) {
            worst = worst.max((f - s).abs());
        }
    }
    assert!(worst < 1e-6, "max abs error {worst}");
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn kernel_on_12x10_matches_oracle() {
    let mut rng = Lcg(12);
    let a = random_patch(&mut rng, 12, 10, 1);
    let b = random_patch(&mut rng, 12, 10, 1);
    let fast = gaussian_correlation(&a, &b, 0.5).unwrap();
    for (f, s) in fast.data().iter().zip(brute_force_kernel(&a, &b, 0.5)) {
        assert!((f - s).abs() < 1e-6);
    }
}

#[test]
fn self_kernel_peaks_at_origin_and_follows_shifts() {
    let mut rng = Lcg(3);
    let a = random_patch(&mut rng, 14, 9, 2);
    let k = gaussian_correlation(&a, &a, 0.5).unwrap();
    assert!((k.get(0, 0) - 1.0).abs() < 1e-12);
    let (dx, dy) = (3, 5);
    let shifted = FeaturePatch::new(
        a.planes()
            .iter()
            .map(|p| RealPlane::from_fn(14, 9, |x, y| p.get((x + 14 - dx) % 14, (y + 9 - dy) % 9)).unwrap())
            .collect(),
        1.0,
    )
    .unwrap();
    let k = gaussian_correlation(&a, &shifted, 0.5).unwrap();
    let (px, py, _) = k.argmax();
    assert_eq!((px, py), (dx, dy));
    assert!(gaussian_correlation(&a, &random_patch(&mut rng, 9, 14, 2), 0.5).is_err());
}

#[test]
fn fft_matches_direct_dft_and_roundtrips() {
    let mut rng = Lcg(16);
    let plane = RealPlane::from_fn(16, 16, |_, _| rng.unit() * 2.0 - 1.0).unwrap();
    let spec = fft2(&plane).unwrap();
    let oracle = naive_dft(&plane);
    let err = rms(spec
        .data()
        .iter()
        .zip(&oracle)
        .map(|(c, (re, im))| ((c.re - re).powi(2) + (c.im - im).powi(2)).sqrt()));
    assert!(err < 1e-9, "rms {err}");
    for (w, h) in [(16, 16), (13, 7), (30, 24)] {
        let p = RealPlane::from_fn(w, h, |_, _| rng.unit()).unwrap();
        let back = ifft2(&fft2(&p).unwrap()).unwrap();
        let err = rms(p.data().iter().zip(back.data()).map(|(a, b)| a - b));
        assert!(err < 1e-6, "{w}x{h} roundtrip rms {err}");
    }
}

#[test]
fn ridge_shrinks_to_zero_for_huge_lambda() {
    let mut rng = Lcg(9);
    let patch = random_patch(&mut rng, 16, 8, 1);
    let params = TrackerParams {
        lambda: 1e6,
        ..TrackerParams::kcf()
    };
    let model = train(&patch, &params).unwrap();
    let label = textrbl_core::tracker::gaussian_label(16, 8, (16.0f64 / 2.0 * 8.0 / 2.0).sqrt() * 0.1).unwrap();
    let yf = Fft2::new(16, 8).unwrap().forward(&label).unwrap();
    let max_y = yf.data().iter().map(|c| c.norm_sqr().sqrt()).fold(0.0, f64::max);
    let max_a = model.alphaf.data().iter().map(|c| c.norm_sqr().sqrt()).fold(0.0, f64::max);
    assert!(max_a < 1e-5 * max_y, "{max_a} vs {max_y}");
    assert_eq!(model.label_peak, 1.0);
}

#[test]
fn identical_training_is_bit_identical() {
    let mut rng = Lcg(21);
    let patch = random_patch(&mut rng, 12, 12, 1);
    let a = train(&patch, &TrackerParams::kcf()).unwrap();
    let b = train(&patch.clone(), &TrackerParams::kcf()).unwrap();
    assert_eq!(a, b);
}

fn noise_frame(seed: u64, w: usize, h: usize) -> Frame {
    let mut rng = Lcg(seed);
    // Block noise on 2x2 cells keeps a broad spectrum after sampling.
    let cells: Vec<f32> = (0..(w / 2 + 1) * (h / 2 + 1)).map(|_| 0.2 + 0.6 * rng.unit() as f32).collect();
    let px = (0..w * h).map(|i| cells[(i / w / 2) * (w / 2 + 1) + (i % w) / 2]).collect();
    Frame::new(0, w, h, 1, px).unwrap()
}

#[test]
fn detection_on_training_frame_peaks_at_origin() {
    let frame = noise_frame(1, 120, 80);
    let tracker = TrackerState::init(&frame, BoundingBox::new(40.0, 30.0, 32.0, 16.0), TrackerParams::kcf()).unwrap();
    let det = tracker.detect(&frame).unwrap();
    assert_eq!(det.response.peak_cell, (0, 0));
    assert!((0.8..=1.0).contains(&det.response.peak), "peak {}", det.response.peak);
}

#[test]
fn circular_shifts_up_to_a_quarter_are_recovered_exactly() {
    let frame = noise_frame(2, 120, 80);
    let tracker = TrackerState::init(&frame, BoundingBox::new(40.0, 30.0, 32.0, 16.0), TrackerParams::kcf()).unwrap();
    let template = tracker.template();
    let (w, h) = template.dims();
    for dy in -(h as isize / 4)..=(h as isize / 4) {
        for dx in -(w as isize / 4)..=(w as isize / 4) {
            let shifted = FeaturePatch::new(
                template
                    .planes()
                    .iter()
                    .map(|p| {
                        RealPlane::from_fn(w, h, |x, y| {
                            p.get(
                                (x as isize - dx).rem_euclid(w as isize) as usize,
                                (y as isize - dy).rem_euclid(h as isize) as usize,
                            )
                        })
                        .unwrap()
                    })
                    .collect(),
                template.cell_size(),
            )
            .unwrap();
            let r = tracker.respond(&shifted).unwrap();
            let cell = (dx.rem_euclid(w as isize) as usize, dy.rem_euclid(h as isize) as usize);
            assert_eq!(r.peak_cell, cell, "shift ({dx}, {dy})");
            assert!((r.shift.0 - dx as f64).abs() < 0.5 && (r.shift.1 - dy as f64).abs() < 0.5);
        }
    }
}

#[test]
fn unchanged_scene_response_is_bounded() {
    for seed in 0..10 {
        let frame = noise_frame(100 + seed, 120, 80);
        let mut tracker =
            TrackerState::init(&frame, BoundingBox::new(30.0, 25.0, 40.0, 20.0), TrackerParams::kcf()).unwrap();
        for _ in 0..5 {
            let det = tracker.detect(&frame).unwrap();
            assert!(det.response.peak > 0.0 && det.response.peak <= 1.2, "{}", det.response.peak);
            tracker.update(&frame, &det).unwrap();
        }
    }
}

fn distance(a: &ComplexPlane, b: &ComplexPlane) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn patch_distance(a: &FeaturePatch, b: &FeaturePatch) -> f64 {
    a.planes()[0].data().iter().zip(b.planes()[0].data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn interpolation_factor_blends_geometrically() {
    let a = noise_frame(5, 120, 80);
    let b = noise_frame(6, 120, 80);
    let bbox = BoundingBox::new(40.0, 30.0, 32.0, 16.0);
    let fresh = TrackerState::init(&b, bbox, TrackerParams::kcf()).unwrap();

    let params = TrackerParams {
        interp_factor: 1.0,
        ..TrackerParams::kcf()
    };
    let mut t = TrackerState::init(&a, bbox, params).unwrap();
    t.update_with(&b, bbox, 0.5).unwrap();
    assert!(distance(t.alphaf(), fresh.alphaf()) < 1e-9);
    assert!(patch_distance(t.template(), fresh.template()) < 1e-12);

    // A zero rate is rejected by the params, but the blend itself is the
    // identity there.
    assert!(TrackerParams { interp_factor: 0.0, ..TrackerParams::kcf() }.validate().is_err());
    let before = TrackerState::init(&a, bbox, TrackerParams::kcf()).unwrap().template().clone();
    let mut kept = before.clone();
    kept.blend(fresh.template(), 0.0);
    assert_eq!(kept, before);

    let mut t = TrackerState::init(&a, bbox, TrackerParams::kcf()).unwrap();
    let mut prev = distance(t.alphaf(), fresh.alphaf());
    let mut prev_t = patch_distance(t.template(), fresh.template());
    for _ in 0..10 {
        t.update_with(&b, bbox, 0.5).unwrap();
        let d = distance(t.alphaf(), fresh.alphaf());
        let dt = patch_distance(t.template(), fresh.template());
        assert!((d - 0.98 * prev).abs() < 1e-9 * prev.max(1.0), "{d} vs {}", 0.98 * prev);
        assert!((dt - 0.98 * prev_t).abs() < 1e-9, "{dt} vs {}", 0.98 * prev_t);
        prev = d;
        prev_t = dt;
    }
}

#[test]
fn reference_peak_is_set_once() {
    let frame = noise_frame(8, 120, 80);
    let bbox = BoundingBox::new(40.0, 30.0, 32.0, 16.0);
    let mut t = TrackerState::init(&frame, bbox, TrackerParams::kcf()).unwrap();
    assert_eq!(t.first_response_max(), None);
    t.update_with(&frame, bbox, 0.7).unwrap();
    t.update_with(&frame, bbox, 0.4).unwrap();
    assert_eq!(t.first_response_max(), Some(0.7));
    assert_eq!(t.last_response_max(), Some(0.4));
}

#[test]
fn fft_linearity_property() {
    let mut runner = TestRunner::new_with_rng(Config::with_cases(64), TestRng::deterministic_rng(Default::default()));
    let strategy = (1usize..12, 1usize..12, any::<u64>(), -3.0f64..3.0);
    runner
        .run(&strategy, |(w, h, seed, k)| {
            let mut rng = Lcg(seed);
            let a = RealPlane::from_fn(w, h, |_, _| rng.unit()).unwrap();
            let b = RealPlane::from_fn(w, h, |_, _| rng.unit()).unwrap();
            let sum = RealPlane::from_fn(w, h, |x, y| a.get(x, y) + k * b.get(x, y)).unwrap();
            let (fa, fb, fs) = (fft2(&a).unwrap(), fft2(&b).unwrap(), fft2(&sum).unwrap());
            for ((x, y), s) in fa.data().iter().zip(fb.data()).zip(fs.data()) {
                prop_assert!((x + y * k - s).norm_sqr().sqrt() < 1e-9);
            }
            Ok(())
        })
        .unwrap();
}
