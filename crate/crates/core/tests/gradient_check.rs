//! Full-model gradient verification: every analytic gradient is compared
//! against central finite differences at 64-bit precision.
//!
//! The finite-difference oracle only ever calls the forward pass, so it is
//! independent of the backward implementation it checks.

use ornate_core::neural::{
    forward_loss_batch, AttentionKind, Graph, Model, ModelConfig, PaddedBatch,
};

fn tiny_cfg(attention: AttentionKind) -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        hidden_size: 8,
        embedding_size: 8,
        vocab_size: 20,
        dropout_rate: 0.0,
        attention,
        finetune_embeddings: true,
    }
}

/// Sequences ≤ 5 ids, different lengths so padding, masking and the
/// final-state gather are all on the differentiated path.
fn tiny_batch() -> PaddedBatch {
    PaddedBatch::from_pairs(&[
        (vec![1, 4, 7, 9, 2], vec![1, 5, 6, 2]),
        (vec![1, 11, 2], vec![1, 12, 13, 14, 2]),
    ])
}

fn batch_loss(model: &Model<f64>, batch: &PaddedBatch) -> f64 {
    let mut g = Graph::attached(model);
    let fwd = forward_loss_batch(&mut g, model, batch, None).unwrap();
    g.value(fwd.loss).item()
}

fn check_all_params(attention: AttentionKind) -> (usize, f64) {
    let mut model = Model::<f64>::init(tiny_cfg(attention), 1234).unwrap();
    let batch = tiny_batch();

    let mut g = Graph::attached(&model);
    let fwd = forward_loss_batch(&mut g, &model, &batch, None).unwrap();
    let grads = g.backward(fwd.loss).unwrap();
    drop(g);
    model.accumulate_grads(grads);

    let analytic: Vec<(String, Vec<f64>)> = model
        .params()
        .map(|p| (p.name.to_string(), p.grad.data().to_vec()))
        .collect();

    let eps = 1e-5;
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let param_ids: Vec<_> = model.param_ids().collect();
    for (pi, pid) in param_ids.iter().enumerate() {
        let entries = model.param_value(*pid).len();
        for k in 0..entries {
            let original = model.param_value(*pid).data()[k];

            model.param_value_mut(*pid).data_mut()[k] = original + eps;
            let plus = batch_loss(&model, &batch);
            model.param_value_mut(*pid).data_mut()[k] = original - eps;
            let minus = batch_loss(&model, &batch);
            model.param_value_mut(*pid).data_mut()[k] = original;

            let fd = (plus - minus) / (2.0 * eps);
            let a = analytic[pi].1[k];
            // The denominator floor keeps the relative error well-defined
            // where the true gradient is ~0 and finite differences see only
            // roundoff (loss ≈ 3, so 1e-6 is far below any real signal).
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(
                rel <= 1e-4,
                "{} entry {k}: analytic {a:e} vs fd {fd:e} (rel {rel:e})",
                analytic[pi].0
            );
            checked += 1;
        }
    }
    (checked, worst)
}

#[test]
fn every_parameter_matches_central_differences_general_attention() {
    let (checked, worst) = check_all_params(AttentionKind::General);
    println!("checked {checked} parameter entries, worst relative error {worst:.3e}");
    assert!(
        checked > 2500,
        "expected a few thousand entries, got {checked}"
    );
}

#[test]
fn every_parameter_matches_central_differences_dot_attention() {
    let (checked, worst) = check_all_params(AttentionKind::Dot);
    println!("checked {checked} parameter entries, worst relative error {worst:.3e}");
    assert!(
        checked > 2500,
        "expected a few thousand entries, got {checked}"
    );
}
