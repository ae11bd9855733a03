//! Impulse-perturbation sweeps over the convolution stack and the full model.

use magicnet::model::{MagicNetConfig, ModelWeights};
use magicnet::nn::{BnMode, Tensor2D};
use magicnet::rng::seeded_rng;
use rand::Rng;

const FRAMES: usize = 480;

fn random_input(seed: u64) -> Tensor2D<f64> {
    let mut rng = seeded_rng(seed, 7);
    let data = (0..40 * FRAMES).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor2D::from_vec(40, FRAMES, data).unwrap()
}

fn model(seed: u64, linear: bool) -> ModelWeights<f64> {
    let mut m = ModelWeights::<f64>::build(MagicNetConfig::default(), seed).unwrap();
    let mut rng = seeded_rng(seed, 9);
    for u in &mut m.units {
        u.relu &= !linear;
        for v in u.bn.running_mean.iter_mut() {
            *v = rng.gen_range(-0.2..0.2);
        }
        for v in u.bn.running_var.iter_mut() {
            *v = rng.gen_range(0.5..2.0);
        }
    }
    m
}

/// For every output step, the first and last input frame whose perturbation
/// changes it.
fn influence(m: &ModelWeights<f64>, x: &Tensor2D<f64>) -> Vec<Option<(usize, usize)>> {
    let base = m.conv_stack(x, BnMode::Infer).unwrap();
    let mut spans: Vec<Option<(usize, usize)>> = vec![None; base.time()];
    for t in 0..x.time() {
        let mut xp = x.clone();
        for c in 0..40 {
            xp.set(c, t, x.get(c, t) + 0.5);
        }
        let y = m.conv_stack(&xp, BnMode::Infer).unwrap();
        for (j, span) in spans.iter_mut().enumerate() {
            let changed = (0..y.channels()).any(|c| y.get(c, j) != base.get(c, j));
            if changed {
                *span = Some(match *span {
                    None => (t, t),
                    Some((lo, _)) => (lo, t),
                });
            }
        }
    }
    spans
}

#[test]
fn linearized_conv_stack_sees_exactly_200_frames_ending_at_8j() {
    let m = model(3, true);
    let rf = m.config.receptive_field().unwrap().conv_frames;
    assert_eq!(rf, 200);
    let spans = influence(&m, &random_input(1));
    assert_eq!(spans.len(), FRAMES / 8);
    for (j, span) in spans.iter().enumerate() {
        let (lo, hi) = span.unwrap_or_else(|| panic!("step {j} depends on nothing"));
        assert_eq!(hi, 8 * j, "step {j}");
        assert_eq!(lo, (8 * j).saturating_sub(rf - 1), "step {j}");
    }
    // Once the window is fully inside the input it spans exactly rf frames.
    let (lo, hi) = spans[40].unwrap();
    assert_eq!(hi - lo + 1, rf);
}

#[test]
fn conv_stack_with_relu_stays_inside_the_window() {
    for seed in 0..3 {
        let m = model(seed, false);
        let spans = influence(&m, &random_input(seed + 10));
        for (j, span) in spans.iter().enumerate() {
            if let Some((lo, hi)) = *span {
                assert!(hi <= 8 * j, "seed {seed} step {j}: depends on frame {hi}");
                assert!(lo + 199 >= 8 * j, "seed {seed} step {j}: depends on frame {lo}");
            }
        }
        assert!(spans.iter().filter(|s| s.is_some()).count() > spans.len() / 2);
    }
}

#[test]
fn full_model_output_j_depends_on_frames_up_to_8j_only() {
    let m = model(5, false);
    let x = random_input(2);
    let base = m.forward_batch(&x, BnMode::Infer).unwrap();
    for t in (0..FRAMES).step_by(3) {
        let mut xp = x.clone();
        for c in 0..40 {
            xp.set(c, t, x.get(c, t) - 0.75);
        }
        let y = m.forward_batch(&xp, BnMode::Infer).unwrap();
        for j in 0..y.len() {
            if 8 * j < t {
                assert_eq!(y[j], base[j], "frame {t} leaked into step {j}");
            }
        }
        // Through the recurrence the perturbation reaches some later step.
        let first = t.div_ceil(8);
        if first < y.len() {
            assert!((first..y.len()).any(|j| y[j] != base[j]), "frame {t} had no effect");
        }
    }
}
