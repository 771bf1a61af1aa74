//! Training objectives: per-sentence classification cross-entropy and the
//! step-wise contrastive selection loss, as tape programs (for gradients)
//! and as plain-scalar reference implementations (for reporting and
//! oracle tests).

use ndarray::Array2;

use crate::error::{KcsError, Result};
use crate::nn::tape::NodeId;
use crate::nn::Graph;

use super::Denominator;

/// Mean over sentences of -log p(label_i), from raw 2-way logits.
/// Computed as logsumexp(row) - logit[label] for stability.
pub fn cls_loss_node(g: &mut Graph, cls_logits: NodeId, labels: &[u8]) -> NodeId {
    let m = g.tape.value(cls_logits).nrows();
    assert_eq!(labels.len(), m, "label count must equal sentence count");
    let mut terms = Vec::with_capacity(m);
    for (i, &label) in labels.iter().enumerate() {
        let lse = g.tape.log_sum_exp_row(cls_logits, i, &[true, true]);
        let hit = g.tape.pick(cls_logits, i, label as usize);
        terms.push(g.tape.sub(lse, hit));
    }
    g.tape.mean_scalars(&terms)
}

/// Mean over steps of the contrastive selection loss. Row k of `logits`
/// scores every sentence against the step-k prediction representation
/// (already temperature-scaled). Candidates exclude gold selections from
/// earlier steps; `denominator` controls whether the positive itself
/// stays in the normalizer.
pub fn seq_loss_node(
    g: &mut Graph,
    logits: NodeId,
    gold_idx: &[usize],
    denominator: Denominator,
) -> Result<NodeId> {
    let (k_steps, m) = g.tape.value(logits).dim();
    assert_eq!(gold_idx.len(), k_steps, "one gold index per step");
    let mut terms = Vec::with_capacity(k_steps);
    let mut available = vec![true; m];
    for (k, &pos) in gold_idx.iter().enumerate() {
        debug_assert!(available[pos], "gold composition repeats a sentence");
        let mut allowed = available.clone();
        if denominator == Denominator::ExcludePositive {
            allowed[pos] = false;
        }
        if allowed.iter().all(|&a| !a) {
            return Err(KcsError::Data(
                "exclude-positive denominator is empty (single remaining candidate)".into(),
            ));
        }
        let lse = g.tape.log_sum_exp_row(logits, k, &allowed);
        let hit = g.tape.pick(logits, k, pos);
        terms.push(g.tape.sub(lse, hit));
        available[pos] = false;
    }
    Ok(g.tape.mean_scalars(&terms))
}

/// Combined objective on scalar loss values: L = L_cls + lambda * L_seq.
pub fn total_loss(cls: f64, seq: f64, lambda: f64) -> f64 {
    cls + lambda * seq
}

/// Scalar reference: mean -ln Z[i, label_i] from probabilities.
pub fn cls_loss_scalar(z: &Array2<f64>, labels: &[u8]) -> f64 {
    assert_eq!(z.nrows(), labels.len());
    let total: f64 =
        labels.iter().enumerate().map(|(i, &l)| -z[[i, l as usize]].ln()).sum();
    total / labels.len() as f64
}

/// Scalar reference for the contrastive loss from a raw (unscaled) MI
/// matrix; applies the temperature, masks earlier selections, and
/// normalizes per `denominator`.
pub fn seq_loss_scalar(
    mi: &Array2<f64>,
    gold_idx: &[usize],
    temperature: f64,
    denominator: Denominator,
) -> f64 {
    let (k_steps, m) = mi.dim();
    assert_eq!(gold_idx.len(), k_steps);
    let mut available = vec![true; m];
    let mut total = 0.0;
    for (k, &pos) in gold_idx.iter().enumerate() {
        let mut denom = 0.0;
        for i in 0..m {
            if available[i] && (denominator == Denominator::IncludePositive || i != pos) {
                denom += (mi[[k, i]] / temperature).exp();
            }
        }
        total += -((mi[[k, pos]] / temperature).exp() / denom).ln();
        available[pos] = false;
    }
    total / k_steps as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn empty_params() -> ParamSet {
        ParamSet::new()
    }

    #[test]
    fn single_candidate_include_positive_costs_nothing() {
        let ps = empty_params();
        let mut g = Graph::new(&ps);
        let logits = g.tape.leaf(Array2::from_elem((1, 1), 0.37));
        let loss = seq_loss_node(&mut g, logits, &[0], Denominator::IncludePositive).unwrap();
        assert_eq!(g.tape.scalar(loss), 0.0);
    }

    #[test]
    fn single_candidate_exclude_positive_is_an_error() {
        let ps = empty_params();
        let mut g = Graph::new(&ps);
        let logits = g.tape.leaf(Array2::from_elem((1, 1), 0.37));
        let r = seq_loss_node(&mut g, logits, &[0], Denominator::ExcludePositive);
        assert!(matches!(r, Err(KcsError::Data(_))));
    }

    #[test]
    fn seq_loss_matches_hand_computed_oracle() {
        // Two steps over M=3 with fixed scores; brute-force softmax by hand.
        let scores =
            Array2::from_shape_vec((2, 3), vec![0.9, 0.1, -0.4, 0.2, 0.8, 0.3]).unwrap();
        let gold = [0usize, 2usize];
        // Step 1: -ln(e^0.9 / (e^0.9 + e^0.1 + e^-0.4)).
        let d1 = (0.9f64).exp() + (0.1f64).exp() + (-0.4f64).exp();
        let t1 = -((0.9f64).exp() / d1).ln();
        // Step 2: sentence 0 is consumed; candidates {1, 2}.
        let d2 = (0.8f64).exp() + (0.3f64).exp();
        let t2 = -((0.3f64).exp() / d2).ln();
        let expect = (t1 + t2) / 2.0;

        let got = seq_loss_scalar(&scores, &gold, 1.0, Denominator::IncludePositive);
        assert!((got - expect).abs() < 1e-6, "scalar {got} vs oracle {expect}");

        let ps = empty_params();
        let mut g = Graph::new(&ps);
        let logits = g.tape.leaf(scores);
        let node = seq_loss_node(&mut g, logits, &gold, Denominator::IncludePositive).unwrap();
        assert!((g.tape.scalar(node) - expect).abs() < 1e-6);
    }

    #[test]
    fn exclude_positive_matches_literal_formula() {
        let scores =
            Array2::from_shape_vec((1, 3), vec![0.5, -0.2, 0.1]).unwrap();
        let gold = [1usize];
        // Denominator sums over s != gold: positions 0 and 2.
        let d = (0.5f64).exp() + (0.1f64).exp();
        let expect = -((-0.2f64).exp() / d).ln();
        let got = seq_loss_scalar(&scores, &gold, 1.0, Denominator::ExcludePositive);
        assert!((got - expect).abs() < 1e-9);

        let ps = empty_params();
        let mut g = Graph::new(&ps);
        let logits = g.tape.leaf(scores);
        let node = seq_loss_node(&mut g, logits, &gold, Denominator::ExcludePositive).unwrap();
        assert!((g.tape.scalar(node) - expect).abs() < 1e-9);
    }

    #[test]
    fn raising_the_positive_score_lowers_the_loss() {
        let base = Array2::from_shape_vec((1, 3), vec![0.1, 0.4, -0.3]).unwrap();
        let mut boosted = base.clone();
        boosted[[0, 0]] += 0.5;
        let lo = seq_loss_scalar(&base, &[0], 1.0, Denominator::IncludePositive);
        let hi = seq_loss_scalar(&boosted, &[0], 1.0, Denominator::IncludePositive);
        assert!(hi < lo);
    }

    #[test]
    fn node_and_scalar_seq_losses_agree_on_random_inputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..20 {
            let k = rng.random_range(1..4usize);
            // Keep at least one non-gold sentence so the exclude-positive
            // denominator is never empty at the final step.
            let m = rng.random_range((k + 1)..8usize);
            let scores =
                Array2::from_shape_fn((k, m), |_| rng.random::<f64>() * 4.0 - 2.0);
            let mut pool: Vec<usize> = (0..m).collect();
            let mut gold = Vec::with_capacity(k);
            for _ in 0..k {
                let pick = rng.random_range(0..pool.len());
                gold.push(pool.swap_remove(pick));
            }
            for denom in [Denominator::IncludePositive, Denominator::ExcludePositive] {
                let expect = seq_loss_scalar(&scores, &gold, 1.0, denom);
                let ps = empty_params();
                let mut g = Graph::new(&ps);
                let logits = g.tape.leaf(scores.clone());
                let node = seq_loss_node(&mut g, logits, &gold, denom).unwrap();
                assert!((g.tape.scalar(node) - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn perfect_classifier_loss_approaches_zero() {
        let logits =
            Array2::from_shape_vec((2, 2), vec![30.0, 0.0, 0.0, 30.0]).unwrap();
        let ps = empty_params();
        let mut g = Graph::new(&ps);
        let node = g.tape.leaf(logits);
        let loss = cls_loss_node(&mut g, node, &[0, 1]);
        assert!(g.tape.scalar(loss) < 1e-9);
    }

    #[test]
    fn uniform_classifier_loss_is_ln_two() {
        let logits = Array2::zeros((3, 2));
        let ps = empty_params();
        let mut g = Graph::new(&ps);
        let node = g.tape.leaf(logits);
        let loss = cls_loss_node(&mut g, node, &[0, 1, 1]);
        assert!((g.tape.scalar(loss) - (2.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn node_and_scalar_cls_losses_agree_on_random_inputs() {
        let mut rng = ChaCha12Rng::seed_from_u64(4242);
        for _ in 0..20 {
            let m = rng.random_range(1..8usize);
            let logits = Array2::from_shape_fn((m, 2), |_| rng.random::<f64>() * 3.0 - 1.5);
            let labels: Vec<u8> = (0..m).map(|_| rng.random_range(0..2u8)).collect();
            // Independent oracle: softmax each row, take -ln of the hit.
            let mut z = Array2::zeros((m, 2));
            for i in 0..m {
                let mx = logits[[i, 0]].max(logits[[i, 1]]);
                let e0 = (logits[[i, 0]] - mx).exp();
                let e1 = (logits[[i, 1]] - mx).exp();
                z[[i, 0]] = e0 / (e0 + e1);
                z[[i, 1]] = e1 / (e0 + e1);
            }
            let expect = cls_loss_scalar(&z, &labels);
            let ps = empty_params();
            let mut g = Graph::new(&ps);
            let node = g.tape.leaf(logits);
            let loss = cls_loss_node(&mut g, node, &labels);
            assert!((g.tape.scalar(loss) - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn total_loss_is_the_weighted_sum() {
        assert_eq!(total_loss(1.0, 2.0, 1.0), 3.0);
        assert_eq!(total_loss(1.0, 2.0, 0.5), 2.0);
        for x in [0.0, 0.7, 3.1] {
            for lambda in [0.0, 0.5, 1.0, 2.0] {
                assert_eq!(total_loss(0.0, x, lambda), lambda * x);
                // Decomposition: subtracting the seq-free loss isolates
                // exactly lambda times the seq term.
                let c = 1.3;
                assert!(
                    (total_loss(c, x, lambda) - total_loss(c, 0.0, lambda) - lambda * x).abs()
                        < 1e-15
                );
            }
        }
    }
}
