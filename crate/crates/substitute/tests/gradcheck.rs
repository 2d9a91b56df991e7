//! Backprop gradients against central finite differences, plus
//! behavioural checks of the forward pass and training loop.

use fcg_core::testutil::{permute_node_ids, random_graph, random_insertions, TestGraphSpec};
use fcg_core::FunctionCallGraph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use substitute::GcnModel;

const EPS: f64 = 1e-4;

/// Max relative error between backprop and central finite differences
/// over every parameter of the model, on the given batch.
fn max_grad_relative_error(
    model: &GcnModel,
    batch: &[(&FunctionCallGraph, &[(u32, u32)], bool)],
) -> f64 {
    let (_, grads) = model.batch_grads(batch).unwrap();

    let mut flat_grads: Vec<f64> = Vec::new();
    flat_grads.extend(&grads.stack.w1);
    flat_grads.extend(&grads.stack.w2);
    flat_grads.extend(&grads.w_out);
    flat_grads.push(grads.b_out);

    // parameter accessors by flat index
    let n_params = flat_grads.len();
    let read = |m: &GcnModel, i: usize| -> f64 {
        let (w1, w2, wo) = (m.stack.w1.len(), m.stack.w2.len(), m.w_out.len());
        if i < w1 {
            m.stack.w1[i]
        } else if i < w1 + w2 {
            m.stack.w2[i - w1]
        } else if i < w1 + w2 + wo {
            m.w_out[i - w1 - w2]
        } else {
            m.b_out
        }
    };
    let write = |m: &mut GcnModel, i: usize, v: f64| {
        let (w1, w2, wo) = (m.stack.w1.len(), m.stack.w2.len(), m.w_out.len());
        if i < w1 {
            m.stack.w1[i] = v;
        } else if i < w1 + w2 {
            m.stack.w2[i - w1] = v;
        } else if i < w1 + w2 + wo {
            m.w_out[i - w1 - w2] = v;
        } else {
            m.b_out = v;
        }
    };

    let mut worst = 0.0f64;
    for i in 0..n_params {
        let orig = read(model, i);
        let mut plus = model.clone();
        write(&mut plus, i, orig + EPS);
        let mut minus = model.clone();
        write(&mut minus, i, orig - EPS);
        let numeric = (plus.batch_loss(batch).unwrap() - minus.batch_loss(batch).unwrap())
            / (2.0 * EPS);
        let analytic = flat_grads[i];
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    // Central differences are invalid where a rectifier input crosses
    // zero inside the probe step, so configurations with a tiny kink
    // margin are rejected and redrawn, not asserted on.
    let mut checked = 0u32;
    let mut seed = 0u64;
    while checked < 6 {
        seed += 1;
        let spec = TestGraphSpec {
            user_nodes: 3,
            api_nodes: 4,
            calls_min: 1,
            calls_max: 3,
            internal_call_prob: 0.3,
        };
        let g = random_graph(seed, &spec);
        let insertions = random_insertions(&g, 2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
        let model = GcnModel::init(5, &mut rng);
        if model.min_kink_margin(&g, &insertions).unwrap() < 1e-3 {
            continue;
        }
        let batch: Vec<(&FunctionCallGraph, &[(u32, u32)], bool)> =
            vec![(&g, insertions.as_slice(), seed % 2 == 0)];
        let err = max_grad_relative_error(&model, &batch);
        assert!(err <= 1e-4, "seed {seed}: max relative error {err}");
        checked += 1;
    }
}

#[test]
fn score_is_permutation_invariant_and_in_unit_interval() {
    for seed in 0..10u64 {
        let g = random_graph(seed, &TestGraphSpec::default());
        let h = permute_node_ids(&g, seed ^ 0x51);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = GcnModel::init(8, &mut rng);
        let a = model.score(&g, &[]).unwrap();
        let b = model.score(&h, &[]).unwrap();
        assert!((a - b).abs() < 1e-12, "seed {seed}: {a} vs {b}");
        assert!(a > 0.0 && a < 1.0);
    }
}

#[test]
fn memorizes_a_single_example() {
    let g = random_graph(11, &TestGraphSpec::default());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut model = GcnModel::init(8, &mut rng);
    let insertions: &[(u32, u32)] = &[];
    let mut loss = f64::INFINITY;
    for _ in 0..500 {
        loss = model.train_epoch(&[(&g, insertions, true)], 0.5).unwrap();
    }
    assert!(loss < 0.01, "final loss {loss}");
}

#[test]
fn separable_degree_classes_reach_high_accuracy() {
    // two classes distinguishable by density: sparse benign graphs
    // vs dense malicious graphs
    let sparse = TestGraphSpec {
        user_nodes: 6,
        api_nodes: 10,
        calls_min: 1,
        calls_max: 2,
        internal_call_prob: 0.2,
    };
    let dense = TestGraphSpec {
        user_nodes: 6,
        api_nodes: 10,
        calls_min: 6,
        calls_max: 9,
        internal_call_prob: 0.2,
    };
    let benign: Vec<_> = (0..30).map(|s| random_graph(s, &sparse)).collect();
    let malicious: Vec<_> = (100..130).map(|s| random_graph(s, &dense)).collect();
    let no_ins: &[(u32, u32)] = &[];
    let batch: Vec<(&FunctionCallGraph, &[(u32, u32)], bool)> = benign
        .iter()
        .map(|g| (g, no_ins, false))
        .chain(malicious.iter().map(|g| (g, no_ins, true)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut model = GcnModel::init(8, &mut rng);
    for _ in 0..300 {
        model.train_epoch(&batch, 0.5).unwrap();
    }
    let correct = batch
        .iter()
        .filter(|(g, ins, y)| (model.score(g, ins).unwrap() > 0.5) == *y)
        .count();
    let acc = correct as f64 / batch.len() as f64;
    assert!(acc >= 0.95, "training accuracy {acc}");
}
