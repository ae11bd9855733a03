//! Trainability and evaluation behavior on small synthetic corpora.

use magicnet::audio::{synth_corpus, MixSpec};
use magicnet::eval::{evaluate, prepare_clip, segment, train, train_segments, LabeledClip, ThresholdPolicy, TrainConfig};
use magicnet::features::{fit_normalizer, FeatureConfig};
use magicnet::model::{MagicNetConfig, ModelWeights};

fn corpus(seed: u64, n: usize, secs: f64) -> Vec<LabeledClip> {
    let spec = MixSpec { seed, segment_len_s: secs, ..MixSpec::default() };
    synth_corpus(&spec, n).unwrap().into_iter().map(LabeledClip::from).collect()
}

#[test]
fn speech_fraction_over_100_clips_is_in_band() {
    let clips = synth_corpus(&MixSpec { seed: 42, ..MixSpec::default() }, 100).unwrap();
    let (mut speech, mut total) = (0usize, 0usize);
    let mut per_clip = Vec::new();
    for c in &clips {
        let labels = c.clip.labels().unwrap();
        let s = labels.iter().filter(|&&l| l).count();
        speech += s;
        total += labels.len();
        per_clip.push(s as f64 / labels.len() as f64);
    }
    let fraction = speech as f64 / total as f64;
    assert!((0.15..=0.70).contains(&fraction), "corpus speech fraction {fraction}");
    assert!(per_clip.iter().all(|&f| f > 0.0 && f < 1.0));
}

#[test]
fn overfits_a_single_segment_in_200_steps() {
    let features = FeatureConfig::default();
    let clip = &corpus(77, 1, 20.0)[0];
    let prep = prepare_clip::<f32>(clip, &features).unwrap();
    let norm = fit_normalizer(std::slice::from_ref(&prep.features)).unwrap();
    let segs = segment(&prep, &norm, 2000, 8).unwrap();
    assert_eq!(segs.len(), 1);
    let config = TrainConfig {
        lr: 1e-3,
        batch_segments: 1,
        max_epochs: 200,
        patience_epochs: 200,
        seed: 4,
        ..TrainConfig::default()
    };
    let mut weights = ModelWeights::<f32>::build(MagicNetConfig::default(), 4).unwrap();
    weights.norm = norm;
    let out = train_segments(&config, weights, &segs, &segs, |_| {}).unwrap();
    assert_eq!(out.history.len(), 200);
    let first = out.history[0].train_loss;
    let last = out.history.last().unwrap().train_loss;
    let best_val = out.history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    assert!(last < 0.1, "BCE after 200 steps {last} (started at {first})");
    assert!(best_val < 0.1, "best inference-mode BCE {best_val}");
}

#[test]
fn early_epochs_reduce_training_loss() {
    let tr = corpus(10, 16, 20.0);
    let va = corpus(11, 4, 20.0);
    let config = TrainConfig { max_epochs: 10, patience_epochs: 10, seed: 2, ..TrainConfig::default() };
    let out = train::<f32>(&config, &tr, &va, |_| {}).unwrap();
    let loss: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
    assert!(loss[4] < loss[0], "epoch 5 {} vs epoch 1 {}", loss[4], loss[0]);
    let window = |r: std::ops::Range<usize>| loss[r.clone()].iter().sum::<f64>() / r.len() as f64;
    assert!(window(5..10) < window(0..5));
}

#[test]
fn training_raises_auc_on_the_training_corpus() {
    let features = FeatureConfig::default();
    let tr = corpus(20, 16, 20.0);
    let va = corpus(21, 4, 20.0);
    let config = TrainConfig { max_epochs: 15, patience_epochs: 15, seed: 6, ..TrainConfig::default() };
    let out = train::<f32>(&config, &tr, &va, |_| {}).unwrap();

    let mut before = ModelWeights::<f32>::build(MagicNetConfig::default(), config.seed).unwrap();
    before.norm = out.weights.norm.clone();
    let auc = |w: &ModelWeights<f32>| evaluate(w, &tr, &features, ThresholdPolicy::Fixed(0.5), 2).unwrap().auc;
    let (a0, a1) = (auc(&before), auc(&out.weights));
    assert!(a1 > a0, "AUC before {a0:.4}, after {a1:.4}");
}

#[test]
fn untrained_models_score_near_chance_on_balanced_data() {
    let features = FeatureConfig::default();
    // Equal utterance and gap distributions give about half speech.
    let spec = MixSpec { seed: 30, utterance_s: (2.0, 5.0), silence_gap_s: (2.0, 5.0), ..MixSpec::default() };
    let clips: Vec<LabeledClip> = synth_corpus(&spec, 20).unwrap().into_iter().map(LabeledClip::from).collect();
    let (speech, total) = clips.iter().fold((0, 0), |(s, t), c| {
        let l = c.clip.labels().unwrap();
        (s + l.iter().filter(|&&x| x).count(), t + l.len())
    });
    let balance = speech as f64 / total as f64;
    assert!((0.4..=0.6).contains(&balance), "speech fraction {balance}");

    let prepared: Vec<_> = clips.iter().map(|c| prepare_clip::<f32>(c, &features).unwrap().features).collect();
    let norm = fit_normalizer(&prepared).unwrap();
    let mut aucs = Vec::new();
    for seed in 0..8 {
        let mut w = ModelWeights::<f32>::build(MagicNetConfig::default(), seed).unwrap();
        w.norm = norm.clone();
        aucs.push(evaluate(&w, &clips, &features, ThresholdPolicy::Fixed(0.5), 2).unwrap().auc);
    }
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    println!("speech fraction {balance:.3}; untrained AUCs {aucs:.3?}, mean {mean:.3}");
    // A random network is a fixed function of the input, so single seeds can
    // correlate with energy either way; the band applies to the model a
    // default training run starts from and to the seed average.
    let default_seed = TrainConfig::default().seed as usize;
    assert!((0.3..=0.7).contains(&aucs[default_seed]), "default init AUC {:.4}", aucs[default_seed]);
    assert!((0.3..=0.7).contains(&mean), "mean untrained AUC {mean:.4}");
}
