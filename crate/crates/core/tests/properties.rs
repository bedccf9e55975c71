use num_complex::Complex64;
use proptest::prelude::*;
use skelfreq::agcn::gradcheck::random_toy_problem;
use skelfreq::frequency::{bin_widths, dft_naive, extract_features, fft_bluestein};
use skelfreq::pose::{
    interpolate_missing, normalize_sequence, parse_keypoint_frame, serialize_keypoint_frame,
};
use skelfreq::{BinSpec, FeatureGraph, Keypoint, Model, ModelSpec, PoseFrame, PoseSequence, SkeletonTopology};

fn complex_signal(max_len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..max_len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

/// `frames x joints` gap-free toy5 sequences with spread-out coordinates.
fn toy5_sequence(frames: std::ops::Range<usize>) -> impl Strategy<Value = PoseSequence> {
    prop::collection::vec(prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 5), frames).prop_map(|rows| {
        let frames = rows
            .into_iter()
            .enumerate()
            .map(|(i, joints)| PoseFrame {
                joints: joints.into_iter().map(|(x, y)| Keypoint { x, y, confidence: 0.9 }).collect(),
                frame_index: i,
            })
            .collect();
        PoseSequence::new(frames, 30.0, "prop").unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bluestein_matches_naive(signal in complex_signal(200)) {
        let scale = signal.len() as f64;
        prop_assert!(max_diff(&fft_bluestein(&signal), &dft_naive(&signal)) < 1e-9 * scale);
    }

    #[test]
    fn fft_is_linear(pair in (1usize..120).prop_flat_map(|n| (
        prop::collection::vec(-5.0..5.0f64, n),
        prop::collection::vec(-5.0..5.0f64, n),
    )), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let x: Vec<Complex64> = pair.0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let y: Vec<Complex64> = pair.1.iter().map(|&v| Complex64::new(0.0, v)).collect();
        let combined: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| p * a + q * b).collect();
        let expected: Vec<Complex64> = fft_bluestein(&x)
            .iter()
            .zip(fft_bluestein(&y))
            .map(|(p, q)| p * a + q * b)
            .collect();
        prop_assert!(max_diff(&fft_bluestein(&combined), &expected) < 1e-9);
    }

    #[test]
    fn fft_preserves_energy(signal in complex_signal(300)) {
        let t = signal.len() as f64;
        let time: f64 = signal.iter().map(|z| z.norm_sqr()).sum();
        let freq: f64 = fft_bluestein(&signal).iter().map(|z| z.norm_sqr()).sum::<f64>() / t;
        prop_assert!((time - freq).abs() <= 1e-9 * time.max(1.0));
    }

    #[test]
    fn bins_partition_the_spectrum(c in 1.0001..3.0f64, b in 1usize..19) {
        let spec = BinSpec::new(c, b).unwrap();
        let widths = bin_widths(&spec);
        let edges = spec.edges();
        prop_assert_eq!(widths.len(), b);
        prop_assert_eq!(edges[0], 1);
        prop_assert!(widths.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(widths.iter().all(|&w| w >= 1));
        for (k, w) in widths.iter().enumerate() {
            prop_assert_eq!(edges[k + 1] - edges[k], *w);
        }
        prop_assert_eq!(spec.required_coefficients(), edges[b]);
    }

    #[test]
    fn keypoint_documents_round_trip(
        points in prop::collection::vec((any::<f64>(), any::<f64>(), 0.0..=1.0f64), 1..30),
        index in 0usize..10_000,
    ) {
        let joints: Vec<Keypoint> = points
            .iter()
            .map(|&(x, y, c)| {
                let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
                Keypoint { x: finite(x), y: finite(y), confidence: c }
            })
            .collect();
        let frame = PoseFrame { joints, frame_index: index };
        let text = serialize_keypoint_frame(&frame);
        let parsed = parse_keypoint_frame(text.as_bytes(), frame.joints.len(), index).unwrap();
        for (a, b) in frame.joints.iter().zip(&parsed.joints) {
            prop_assert_eq!(a.x.to_bits(), b.x.to_bits());
            prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
            prop_assert_eq!(a.confidence.to_bits(), b.confidence.to_bits());
        }
    }

    #[test]
    fn interpolation_is_idempotent(
        seq in toy5_sequence(2..25),
        holes in prop::collection::vec(any::<bool>(), 125),
    ) {
        let mut gappy = seq.clone();
        let t = gappy.num_frames();
        for (f, frame) in gappy.frames.iter_mut().enumerate() {
            for (j, kp) in frame.joints.iter_mut().enumerate() {
                // Frame 0 keeps every joint so no joint is missing throughout.
                if f > 0 && holes[(f * 5 + j) % holes.len()] {
                    *kp = Keypoint::MISSING;
                }
            }
        }
        let once = interpolate_missing(&gappy).unwrap();
        prop_assert!(once.is_gap_free());
        prop_assert_eq!(once.num_frames(), t);
        prop_assert_eq!(interpolate_missing(&once).unwrap(), once);
    }

    #[test]
    fn normalization_ignores_translation_and_scale(
        seq in toy5_sequence(2..20),
        a in 0.05..20.0f64,
        tx in -1e3..1e3f64,
        ty in -1e3..1e3f64,
    ) {
        let topology = SkeletonTopology::builtin("toy5").unwrap();
        let Ok(base) = normalize_sequence(&seq, &topology) else {
            return Err(TestCaseError::reject("degenerate torso"));
        };
        let mut moved = seq.clone();
        for frame in &mut moved.frames {
            for kp in &mut frame.joints {
                kp.x = a * kp.x + tx;
                kp.y = a * kp.y + ty;
            }
        }
        let moved = normalize_sequence(&moved, &topology).unwrap();
        for (f, g) in base.frames.iter().zip(&moved.frames) {
            for (p, q) in f.joints.iter().zip(&g.joints) {
                prop_assert!((p.x - q.x).abs() <= 1e-9 && (p.y - q.y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn features_ignore_constant_offsets(
        seq in toy5_sequence(40..80),
        joint in 0usize..5,
        dx in -100.0..100.0f64,
        dy in -100.0..100.0f64,
    ) {
        let spec = BinSpec::new(1.5, 4).unwrap();
        let base = extract_features(&seq, &spec).unwrap();
        let mut shifted = seq.clone();
        for frame in &mut shifted.frames {
            frame.joints[joint].x += dx;
            frame.joints[joint].y += dy;
        }
        let moved = extract_features(&shifted, &spec).unwrap();
        for (p, q) in base.as_slice().iter().zip(moved.as_slice()) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn feature_graph_commutes_with_relabeling(perm in permutation(5), bins in 1usize..5) {
        let topology = SkeletonTopology::builtin("toy5").unwrap();
        let g = FeatureGraph::build(&topology, bins).unwrap();
        let h = FeatureGraph::build(&topology.permuted(&perm).unwrap(), bins).unwrap();
        prop_assert_eq!(g.num_edges(), h.num_edges());
        for (b1, b2) in (0..bins).flat_map(|x| (0..bins).map(move |y| (x, y))) {
            for i in 0..5 {
                for j in 0..5 {
                    let (u, v) = (g.node_index(b1, i), g.node_index(b2, j));
                    let (pu, pv) = (h.node_index(b1, perm[i]), h.node_index(b2, perm[j]));
                    prop_assert_eq!(g.adjacency()[(u, v)], h.adjacency()[(pu, pv)]);
                    prop_assert!((g.normalized()[(u, v)] - h.normalized()[(pu, pv)]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn logits_are_invariant_to_joint_relabeling(perm in permutation(5), seed in 0u64..1000) {
        let (model, features, _) = random_toy_problem(seed, &[8, 6]).unwrap();
        let spec = ModelSpec {
            topology: model.spec.topology.permuted(&perm).unwrap(),
            ..model.spec.clone()
        };
        let relabeled = Model::new(spec, model.params.clone()).unwrap();
        let a = model.predict(&features).unwrap().logits;
        let b = relabeled.predict(&features.permuted(&perm)).unwrap().logits;
        prop_assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    }
}
