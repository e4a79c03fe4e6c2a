use morphdis::seq2seq::{gradient_check, CellKind, ModelConfig};
use morphdis::TokenSequence;

// With small init ranges the lower encoder weights get gradients near 1e-9,
// where central differences are dominated by rounding in the loss.
fn tiny(seed: u64, cell: CellKind) -> ModelConfig {
    ModelConfig {
        emb_dim: 4,
        hidden_dim: 5,
        cell,
        seed,
        init_range: 0.5,
        ..ModelConfig::default()
    }
}

fn sample() -> (TokenSequence, TokenSequence) {
    (
        "Adv Subqst _ Adv _ IV Ind Prs Sg3 V".parse().unwrap(),
        "Adv _ Adv _ Mood=Ind Number=Sing V".parse().unwrap(),
    )
}

fn check(cell: CellKind) {
    let (s, t) = sample();
    for seed in 0..8 {
        let r = gradient_check(&tiny(seed, cell), (&s, &t)).unwrap();
        eprintln!(
            "{cell:?} seed {seed}: max relative error {:e}",
            r.max_rel_error
        );
        assert!(r.max_rel_error < 1e-3, "seed {seed}: {:?}", r.per_tensor);
        assert_eq!(r.per_tensor.len(), 22);
    }
}

#[test]
fn lstm_gradients_match_finite_differences() {
    check(CellKind::Lstm);
}

#[test]
fn gru_gradients_match_finite_differences() {
    check(CellKind::Gru);
}

#[test]
fn single_layer_gradients_match() {
    let (s, t) = sample();
    for cell in [CellKind::Lstm, CellKind::Gru] {
        let mc = ModelConfig {
            enc_layers: 1,
            dec_layers: 1,
            ..tiny(3, cell)
        };
        let r = gradient_check(&mc, (&s, &t)).unwrap();
        assert!(r.max_rel_error < 1e-3, "{cell:?}: {:?}", r.per_tensor);
    }
}
