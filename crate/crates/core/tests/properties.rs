use encgan::data::{
    anomaly_count, augment_rotations, contaminate, generate_synthetic, AnomalyFamily, ContaminationSpec, Label,
    LabeledDataset, NormalFamily, SyntheticCorpusConfig,
};
use encgan::evaluation::{compute_roc, latent_analysis_from};
use encgan::model::{ModelBundle, ModelConfig, Phase};
use encgan::scoring::{minmax_normalize, origin_distance, residual_normalized, residual_raw, ScoreConfig};
use encgan::tensor::Tensor;
use encgan::training::losses::gradient_penalty;
use proptest::collection::vec;
use proptest::prelude::*;

fn mann_whitney(scores: &[(f64, Label)]) -> f64 {
    let pos: Vec<f64> = scores.iter().filter(|s| s.1 == Label::Anomaly).map(|s| s.0).collect();
    let neg: Vec<f64> = scores.iter().filter(|s| s.1 == Label::Normal).map(|s| s.0).collect();
    let mut wins = 0.0;
    for &a in &pos {
        for &n in &neg {
            if a > n {
                wins += 1.0;
            } else if a == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Score/label sets with both classes present; scores on a coarse grid so ties are common.
fn scored_sets() -> impl Strategy<Value = Vec<(f64, Label)>> {
    (vec(0u8..12, 1..100), vec(0u8..12, 1..100)).prop_map(|(n, a)| {
        let mut out: Vec<(f64, Label)> = n.into_iter().map(|s| (s as f64 * 0.25, Label::Normal)).collect();
        out.extend(a.into_iter().map(|s| (s as f64 * 0.25 + 0.1, Label::Anomaly)));
        out
    })
}

fn varied_image() -> impl Strategy<Value = Vec<f64>> {
    vec(-3.0f64..3.0, 2..64).prop_filter("needs contrast", |v| {
        let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(l, h), &x| (l.min(x), h.max(x)));
        hi - lo > 1e-3
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_matches_pairwise_statistic(scores in scored_sets()) {
        let roc = compute_roc(&scores).unwrap();
        prop_assert!((roc.auc - mann_whitney(&scores)).abs() <= 1e-9);
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn auc_ignores_increasing_transforms(scores in scored_sets()) {
        let base = compute_roc(&scores).unwrap().auc;
        let warped: Vec<_> = scores.iter().map(|&(s, l)| ((3.0 * s).exp() - 7.0, l)).collect();
        prop_assert!((compute_roc(&warped).unwrap().auc - base).abs() <= 1e-12);
    }

    #[test]
    fn swapping_labels_complements_auc(scores in scored_sets()) {
        let base = compute_roc(&scores).unwrap().auc;
        let swapped: Vec<_> = scores
            .iter()
            .map(|&(s, l)| (s, if l == Label::Normal { Label::Anomaly } else { Label::Normal }))
            .collect();
        prop_assert!((compute_roc(&swapped).unwrap().auc - (1.0 - base)).abs() <= 1e-12);
    }

    #[test]
    fn contamination_fraction_is_within_one_sample(gamma in 0.0f64..=0.5, normals in 1usize..5000) {
        let na = anomaly_count(gamma, normals).unwrap();
        let total = (normals + na) as f64;
        prop_assert!((na as f64 / total - gamma).abs() <= 1.0 / total);
    }

    #[test]
    fn minmax_is_affine_invariant(x in varied_image(), scale in 0.01f64..50.0, shift in -10.0f64..10.0) {
        let moved: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        for (a, b) in minmax_normalize(&x).iter().zip(minmax_normalize(&moved)) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn minmax_is_idempotent(x in varied_image()) {
        let once = minmax_normalize(&x);
        for (a, b) in once.iter().zip(minmax_normalize(&once)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn residuals_are_symmetric_and_bounded(pair in vec((-1.0f64..1.0, -1.0f64..1.0), 1..200)) {
        let (q, r): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
        let ln = residual_normalized(&q, &r).unwrap();
        prop_assert_eq!(ln, residual_normalized(&r, &q).unwrap());
        prop_assert_eq!(residual_raw(&q, &r).unwrap(), residual_raw(&r, &q).unwrap());
        prop_assert!((0.0..=1.0 / (q.len() as f64).sqrt() + 1e-12).contains(&ln));
    }

    #[test]
    fn normalized_residual_ignores_query_contrast(
        pair in vec((-1.0f64..1.0, -1.0f64..1.0), 2..100),
        scale in 0.05f64..20.0,
        shift in -5.0f64..5.0,
    ) {
        let (q, r): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
        prop_assume!(q.iter().cloned().fold(f64::MIN, f64::max) - q.iter().cloned().fold(f64::MAX, f64::min) > 1e-3);
        let moved: Vec<f64> = q.iter().map(|v| scale * v + shift).collect();
        let a = residual_normalized(&q, &r).unwrap();
        let b = residual_normalized(&moved, &r).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn origin_distance_is_absolutely_homogeneous(z in vec(-4.0f64..4.0, 1..64), c in -10.0f64..10.0) {
        let scaled: Vec<f64> = z.iter().map(|v| c * v).collect();
        let lo = origin_distance(&z);
        prop_assert!(lo <= 0.0);
        prop_assert!((origin_distance(&scaled) - c.abs() * lo).abs() <= 1e-9 * (1.0 + c.abs() * lo.abs()));
    }

    #[test]
    fn anomaly_set_shrinks_as_threshold_rises(
        pairs in vec((0.0f64..0.1, -1.0f64..0.0), 1..50),
        lambda in 0.0f64..=1.0,
        a1 in -1.0f64..1.0,
        gap in 0.0f64..1.0,
    ) {
        let low = ScoreConfig::new(lambda, a1).unwrap();
        let high = ScoreConfig::new(lambda, a1 + gap).unwrap();
        for (ln, lo) in pairs {
            let a = low.combine(ln, lo);
            prop_assert_eq!(a, high.combine(ln, lo));
            if a > high.alpha() {
                prop_assert!(a > low.alpha());
            }
        }
    }

    #[test]
    fn gradient_penalty_is_nonnegative(norms in vec(0.0f64..10.0, 1..64)) {
        let gp = gradient_penalty(&norms);
        prop_assert!(gp >= 0.0);
        prop_assert_eq!(gp == 0.0, norms.iter().all(|&n| n == 1.0));
    }

    #[test]
    fn histogram_counts_every_coefficient(n in 1usize..12, dim in 1usize..9, seed in any::<u64>()) {
        let cfg = SyntheticCorpusConfig { resolution: 8, normals: n, anomalies: n, seed, ..Default::default() };
        let set = generate_synthetic(&cfg).unwrap();
        let latents: Vec<Vec<f64>> = (0..set.len())
            .map(|i| (0..dim).map(|j| ((i * 31 + j * 7 + seed as usize % 13) % 17) as f64 - 8.0).collect())
            .collect();
        let analysis = latent_analysis_from(&set, latents, 10).unwrap();
        for s in &analysis.per_label {
            prop_assert_eq!(s.histogram.total(), set.count(s.label) * dim);
        }
    }
}

fn assert_in_range(set: &LabeledDataset) {
    for s in &set.samples {
        assert!(s.image.values().iter().all(|v| (-1.0..=1.0).contains(v)), "{} out of range", s.source_id);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn synthetic_images_stay_in_range_and_repeat(
        resolution in prop::sample::select(vec![8usize, 16, 32]),
        channels in 1usize..4,
        normals in 1usize..6,
        anomalies in 0usize..6,
        noise in 0.0f64..0.5,
        seed in any::<u64>(),
        squares in any::<bool>(),
    ) {
        let cfg = SyntheticCorpusConfig {
            resolution,
            channels,
            normal_family: NormalFamily::Disc,
            anomaly_family: if squares { AnomalyFamily::HollowSquare } else { AnomalyFamily::CrossOrSquare },
            normals,
            anomalies: anomalies.max(1),
            noise,
            seed,
        };
        let a = generate_synthetic(&cfg).unwrap();
        assert_in_range(&a);
        prop_assert_eq!(a.count(Label::Normal), normals);
        prop_assert_eq!(a.count(Label::Anomaly), anomalies.max(1));
        prop_assert_eq!(&a, &generate_synthetic(&cfg).unwrap());

        let rotated = augment_rotations(&a, 2, seed ^ 1).unwrap();
        assert_in_range(&rotated);
        prop_assert_eq!(rotated.len(), 3 * a.len());
        prop_assert_eq!(&rotated, &augment_rotations(&a, 2, seed ^ 1).unwrap());
    }

    #[test]
    fn contaminated_stream_is_seeded(gamma in 0.0f64..0.3, seed in any::<u64>()) {
        let cfg = SyntheticCorpusConfig { resolution: 8, normals: 30, anomalies: 20, seed, ..Default::default() };
        let set = generate_synthetic(&cfg).unwrap();
        let (normals, anomalies) = (set.images_with(Label::Normal), set.images_with(Label::Anomaly));
        let spec = ContaminationSpec::new(gamma, normals.len(), seed).unwrap();
        let (s1, log1) = contaminate(&normals, &anomalies, &spec).unwrap();
        let (s2, log2) = contaminate(&normals, &anomalies, &spec).unwrap();
        prop_assert_eq!(s1.images(), s2.images());
        prop_assert_eq!(log1, log2);
        prop_assert_eq!(s1.len(), normals.len() + spec.anomalies());
    }

    #[test]
    fn generator_output_is_bounded(seed in any::<u64>(), gain in 0.1f64..20.0, fade in 0.0f64..=1.0) {
        let cfg = ModelConfig { latent_dim: 6, channels: 3, image_channels: 2, resolution: 16, init_seed: seed };
        let mut bundle = ModelBundle::<f64>::new(cfg).unwrap();
        for p in bundle.generator.params_mut() {
            p.scale(gain);
        }
        let z = Tensor::from_vec(&[4, 6], (0..24).map(|i| ((i as f64 + seed as f64 % 5.0) * 0.77).sin() * gain).collect()).unwrap();
        let x = bundle.generator.forward(&z, Phase::new(16, fade).unwrap());
        prop_assert!(x.data().iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v)));
    }
}
