use std::fs;
use std::path::Path;

use chanorder_core::checkpoint::{Checkpoint, Model};
use chanorder_core::data::{generate_synthetic, load_corpus, save_corpus, SynthSpec};
use chanorder_core::train::{train_orderer, TrainConfig};
use chanorder_core::{ChannelScorer, Error, Exec, RankingConfig, TriChannelImage, UNetConfig};
use tempfile::TempDir;

fn write_sample(root: &Path, id: &str, labels: &[u8], side: u32) {
    fs::create_dir_all(root.join("images")).unwrap();
    fs::create_dir_all(root.join("masks")).unwrap();
    let rgb: Vec<u8> = (0..side * side * 3).map(|i| (i * 7 % 256) as u8).collect();
    image::RgbImage::from_raw(side, side, rgb)
        .unwrap()
        .save(root.join("images").join(format!("{id}.png")))
        .unwrap();
    image::GrayImage::from_raw(side, side, labels.to_vec())
        .unwrap()
        .save(root.join("masks").join(format!("{id}.png")))
        .unwrap();
}

#[test]
fn empty_directory_is_an_empty_corpus() {
    let tmp = TempDir::new().unwrap();
    assert!(load_corpus(tmp.path(), Exec::Parallel).unwrap().is_empty());
    fs::create_dir(tmp.path().join("images")).unwrap();
    assert!(load_corpus(tmp.path(), Exec::Parallel).unwrap().is_empty());
}

#[test]
fn one_sample_with_three_classes() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("classes.txt"), "sky\ntree\nface\n").unwrap();
    write_sample(tmp.path(), "only2", &[2, 2, 0, 2], 2);
    let corpus = load_corpus(tmp.path(), Exec::Sequential).unwrap();
    assert_eq!(corpus.len(), 1);
    let masks = &corpus.samples[0].masks;
    assert_eq!(masks.len(), 3);
    assert_eq!(masks.mask(1), &[1, 1, 0, 1]);
    assert!(masks.mask(0).iter().all(|&m| m == 0));
    assert!(masks.mask(2).iter().all(|&m| m == 0));
}

#[test]
fn load_errors_name_the_sample() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("classes.txt"), "a\nb\n").unwrap();
    write_sample(tmp.path(), "good", &[1, 2, 0, 1], 2);
    write_sample(tmp.path(), "bad-index", &[1, 3, 0, 1], 2);
    match load_corpus(tmp.path(), Exec::Parallel) {
        Err(Error::Load { id, .. }) => assert_eq!(id, "bad-index"),
        other => panic!("{other:?}"),
    }
    fs::remove_file(tmp.path().join("images/bad-index.png")).unwrap();
    fs::remove_file(tmp.path().join("masks/good.png")).unwrap();
    match load_corpus(tmp.path(), Exec::Parallel) {
        Err(Error::Load { id, reason }) => {
            assert_eq!(id, "good");
            assert!(reason.contains("missing mask"), "{reason}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn save_then_load_is_lossless_and_order_stable() {
    let tmp = TempDir::new().unwrap();
    let spec = SynthSpec {
        height: 20,
        width: 24,
        seed: 4,
        ..SynthSpec::default()
    };
    let corpus = generate_synthetic(&spec, 9, Exec::Parallel).unwrap();
    save_corpus(&corpus, tmp.path()).unwrap();
    let a = load_corpus(tmp.path(), Exec::Parallel).unwrap();
    let b = load_corpus(tmp.path(), Exec::Sequential).unwrap();
    assert_eq!(a.vocab, corpus.vocab);
    for ((x, y), z) in a.samples.iter().zip(&b.samples).zip(&corpus.samples) {
        assert_eq!(x.id, z.id);
        assert_eq!(x.id, y.id);
        assert_eq!(x.image, z.image);
        assert_eq!(x.masks, z.masks);
    }
}

#[test]
fn saved_checkpoint_reproduces_scores_bit_exactly() {
    let tmp = TempDir::new().unwrap();
    let spec = SynthSpec {
        height: 16,
        width: 16,
        seed: 9,
        ..SynthSpec::default()
    };
    let corpus = generate_synthetic(&spec, 6, Exec::Parallel).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 3,
        unet: UNetConfig {
            encoder: vec![2, 4],
            decoder: vec![2, 1],
        },
        ..TrainConfig::desk()
    };
    let (model, _) = train_orderer(&corpus, &cfg, Exec::Parallel, |_| {}).unwrap();
    let path = tmp.path().join("m.ckpt");
    Checkpoint::new(Model::Orderer(model.clone()), cfg.seed, RankingConfig::default(), Some(cfg))
        .save(&path)
        .unwrap();
    let Model::Orderer(loaded) = Checkpoint::load(&path).unwrap().model else {
        panic!("wrong kind");
    };
    for s in &corpus.samples {
        let a = model.score_image(&s.image, &s.masks).unwrap();
        let b = loaded.score_image(&s.image, &s.masks).unwrap();
        assert_eq!(a.0.map(f64::to_bits), b.0.map(f64::to_bits));
    }
}

#[test]
fn png_round_trip_is_exact() {
    let tmp = TempDir::new().unwrap();
    let bytes: Vec<u8> = (0..5 * 7 * 3).map(|i| (i * 37 % 256) as u8).collect();
    let img = TriChannelImage::from_rgb8(5, 7, &bytes).unwrap();
    let path = tmp.path().join("x.png");
    img.save(&path).unwrap();
    assert_eq!(TriChannelImage::load(&path).unwrap().to_rgb8(), bytes);
}
