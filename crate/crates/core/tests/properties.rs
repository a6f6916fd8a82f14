use chanorder_core::baselines::{channel_histogram, softmax_entropy, SoftmaxOutput};
use chanorder_core::detectors::{detect_near_gray, predict_order, restore_rgb};
use chanorder_core::ranking::{pair_probability, pair_targets, ranking_loss};
use chanorder_core::{
    permute_channels, ChannelPermutation, ChannelScorer, MaskStack, Plane, RankingConfig, ScoreTriple, ScorerModel,
    TriChannelImage, UNetConfig,
};
use proptest::prelude::*;

fn perm() -> impl Strategy<Value = ChannelPermutation> {
    (0..6usize).prop_map(|i| ChannelPermutation::from_index(i).unwrap())
}

fn image(h: usize, w: usize) -> impl Strategy<Value = TriChannelImage> {
    prop::collection::vec(0u8..=255, 3 * h * w).prop_map(move |bytes| TriChannelImage::from_rgb8(h, w, &bytes).unwrap())
}

fn scores() -> impl Strategy<Value = ScoreTriple> {
    prop::array::uniform3(-3.0f64..3.0).prop_map(ScoreTriple)
}

proptest! {
    #[test]
    fn pair_probability_is_antisymmetric(delta in -50.0f64..50.0) {
        let cfg = RankingConfig::default();
        let s = pair_probability(delta, &cfg).unwrap() + pair_probability(-delta, &cfg).unwrap();
        prop_assert!((s - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn pair_probability_is_monotone(a in -0.3f64..0.3, gap in 1e-6f64..0.3) {
        // Within tanh's unsaturated range the logistic cannot round to equality.
        let cfg = RankingConfig::default();
        prop_assert!(pair_probability(a, &cfg).unwrap() < pair_probability(a + gap, &cfg).unwrap());
    }

    #[test]
    fn ranking_loss_is_nonnegative_and_relabeling_consistent(s in scores(), p in perm(), sigma in perm()) {
        let cfg = RankingConfig::default();
        let base = ranking_loss(&s, &pair_targets(p), &cfg).unwrap();
        let moved = ranking_loss(&ScoreTriple(sigma.apply(s.0)), &pair_targets(p.then(sigma)), &cfg).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((base - moved).abs() <= 1e-12 * base.max(1.0), "{base} vs {moved}");
    }

    #[test]
    fn permute_channels_is_a_group_action(img in image(3, 4), a in perm(), b in perm()) {
        let twice = permute_channels(&permute_channels(&img, a), b);
        prop_assert_eq!(&twice, &permute_channels(&img, a.then(b)));
        prop_assert_eq!(&permute_channels(&permute_channels(&img, a), a.inverse()), &img);
        prop_assert_eq!(&permute_channels(&img, ChannelPermutation::Rgb), &img);
    }

    #[test]
    fn predict_order_depends_only_on_rank(s in scores(), shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let moved = ScoreTriple(s.0.map(|v| (scale * v + shift).exp()));
        prop_assert_eq!(predict_order(&s).unwrap().permutation, predict_order(&moved).unwrap().permutation);
    }

    #[test]
    fn histogram_mass_is_one(values in prop::collection::vec(0.0f32..=1.0, 1..200), bins in 2usize..300) {
        let n = values.len();
        let h = channel_histogram(&Plane::new(1, n, values).unwrap(), bins).unwrap();
        prop_assert!((h.bins.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_bounded_and_order_free(logits in prop::array::uniform6(-20.0f64..20.0), sigma in 0usize..720) {
        let out = SoftmaxOutput::from_logits(&ChannelPermutation::ALL, &logits);
        let h = softmax_entropy(&out);
        prop_assert!(h >= -1e-15 && h <= 6f64.ln() + 1e-12);
        let mut shuffled = logits;
        // Decode sigma as a permutation of six entries (Lehmer code).
        let mut pool: Vec<f64> = logits.to_vec();
        let mut code = sigma;
        for (k, slot) in shuffled.iter_mut().enumerate() {
            let radix = 6 - k;
            *slot = pool.remove(code % radix);
            code /= radix;
        }
        let h2 = softmax_entropy(&SoftmaxOutput::from_logits(&ChannelPermutation::ALL, &shuffled));
        prop_assert!((h - h2).abs() < 1e-12);
    }
}

#[test]
fn entropy_extremes() {
    let uniform = SoftmaxOutput::from_logits(&ChannelPermutation::ALL, &[0.0; 6]);
    assert!((softmax_entropy(&uniform) - 6f64.ln()).abs() < 1e-12);
    let one_hot = SoftmaxOutput::from_logits(&ChannelPermutation::ALL, &[1e4, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(softmax_entropy(&one_hot), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scorer_is_equivariant_and_restoration_agrees(img in image(9, 11), seed in 0u64..1000, p in perm()) {
        let vocab = vec!["a".to_string(), "b".to_string()];
        let labels: Vec<u8> = (0..99).map(|i| (i % 3) as u8).collect();
        let masks = MaskStack::from_label_map(9, 11, &labels, vocab.clone()).unwrap();
        let model = ScorerModel::new(UNetConfig { encoder: vec![2, 3], decoder: vec![2, 1] }, vocab, seed).unwrap();
        let s = model.score_image(&img, &masks).unwrap();
        let permuted = permute_channels(&img, p);
        let sp = model.score_image(&permuted, &masks).unwrap();
        prop_assert_eq!(sp.0.map(f64::to_bits), p.apply(s.0).map(f64::to_bits));
        let a = predict_order(&s).unwrap();
        let b = predict_order(&sp).unwrap();
        if !a.tie {
            prop_assert_eq!(restore_rgb(&img, &a), restore_rgb(&permuted, &b));
        }
    }

    #[test]
    fn gray_images_are_near_gray_for_every_positive_tau(v in prop::collection::vec(0u8..=255, 99), seed in 0u64..1000, tau in 1e-12f64..10.0) {
        let plane = Plane::new(9, 11, v.iter().map(|&b| b as f32 / 255.0).collect()).unwrap();
        let img = TriChannelImage::from_planes([plane.clone(), plane.clone(), plane]).unwrap();
        let masks = MaskStack::whole_image(9, 11);
        let model = ScorerModel::new(UNetConfig { encoder: vec![2, 3], decoder: vec![2, 1] }, masks.vocab().to_vec(), seed).unwrap();
        let s = model.score_image(&img, &masks).unwrap();
        let d = detect_near_gray(&s, tau).unwrap();
        prop_assert!(d.is_near_gray);
        prop_assert_eq!(d.statistic, 0.0);
    }
}
