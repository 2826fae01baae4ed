use dyle::corpus::{build_vocab, chunk_snippets, synth_corpus, BOS};
use dyle::extractor::{extractor_distribution, hybrid_select, top_k};
use dyle::generator::{decode_step, marginal_next_token, teacher_forced_forward, GenInput, GeneratorNet, StepOutput, WeightMode};
use dyle::losses::{consistency_loss, generation_loss, kl_divergence, oracle_loss};
use dyle::metrics::{oracle_score, rouge_l, rouge_n, Prf, TokenSeq};
use dyle::neural::ParamStore;
use dyle::oracle::{exhaustive_oracle, greedy_oracle, OracleSet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ALPHABET: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

fn seq(max: usize) -> impl Strategy<Value = TokenSeq> {
    prop::collection::vec(0..ALPHABET.len(), 0..=max)
        .prop_map(|ids| TokenSeq::new(ids.into_iter().map(|i| ALPHABET[i].to_string()).collect::<Vec<_>>()))
}

fn nonempty_seq(max: usize) -> impl Strategy<Value = TokenSeq> {
    prop::collection::vec(0..ALPHABET.len(), 1..=max)
        .prop_map(|ids| TokenSeq::new(ids.into_iter().map(|i| ALPHABET[i].to_string()).collect::<Vec<_>>()))
}

fn in_unit(p: &Prf) -> bool {
    [p.precision, p.recall, p.f1].iter().all(|v| (0.0..=1.0).contains(v))
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn step_output(k: usize, v: usize) -> impl Strategy<Value = StepOutput> {
    (
        prop::collection::vec(-4.0..4.0f64, k),
        prop::collection::vec(prop::collection::vec(-6.0..6.0f64, v), k),
    )
        .prop_map(|(wl, dl)| StepOutput {
            dynamic_weights: softmax(&wl),
            per_snippet_dists: dl.iter().map(|l| softmax(l)).collect(),
            per_snippet_logits: wl,
        })
}

fn tiny_generator(seed: u64, vocab: usize) -> (ParamStore, GeneratorNet) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = GeneratorNet::new(&mut store, vocab, 4, 5, 3, &mut rng).unwrap();
    (store, net)
}

proptest! {
    #[test]
    fn rouge_scores_lie_in_unit_interval(c in seq(12), r in seq(12), n in 1usize..4, split in any::<bool>()) {
        prop_assert!(in_unit(&rouge_n(&c, &r, n)));
        prop_assert!(in_unit(&rouge_l(&c, &r, split)));
        let s = oracle_score(&c, &r);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn rouge_self_comparison_is_perfect(x in nonempty_seq(10), n in 1usize..4) {
        prop_assume!(n <= x.len());
        prop_assert_eq!(rouge_n(&x, &x, n).f1, 1.0);
        prop_assert_eq!(rouge_l(&x, &x, false).f1, 1.0);
    }

    #[test]
    fn appending_a_reference_token_never_lowers_recall(c in seq(10), r in nonempty_seq(10), pick in any::<prop::sample::Index>()) {
        let before = rouge_n(&c, &r, 1).recall;
        let mut longer = c.tokens().to_vec();
        longer.push(r[pick.index(r.len())].clone());
        prop_assert!(rouge_n(&TokenSeq::new(longer), &r, 1).recall >= before);
    }

    #[test]
    fn greedy_oracle_bounds(
        snippets in prop::collection::vec(nonempty_seq(4), 1..=8),
        gold in nonempty_seq(8),
        budget in 1usize..=3,
    ) {
        let g = greedy_oracle(&snippets, &gold, budget);
        prop_assert!(g.len() <= budget);
        prop_assert!(g.score_trajectory.windows(2).all(|w| w[1] > w[0]));
        let best_single = snippets.iter().map(|s| oracle_score(s, &gold)).fold(0.0, f64::max);
        if g.is_empty() {
            prop_assert!(best_single <= 1e-12);
        } else {
            prop_assert!(g.final_score() >= best_single);
        }
        let optimum = exhaustive_oracle(&snippets, &gold, budget).unwrap();
        prop_assert!(g.final_score() <= optimum.final_score() + 1e-12);
        let single = exhaustive_oracle(&snippets, &gold, 1).unwrap();
        prop_assert_eq!(greedy_oracle(&snippets, &gold, 1).final_score(), single.final_score());
    }

    #[test]
    fn exact_match_is_chosen_first(
        mut snippets in prop::collection::vec(nonempty_seq(4), 1..=7),
        gold in nonempty_seq(6),
        at in any::<prop::sample::Index>(),
    ) {
        let pos = at.index(snippets.len() + 1);
        snippets.insert(pos, gold.clone());
        let g = greedy_oracle(&snippets, &gold, 3);
        prop_assert_eq!(&snippets[g.indices[0]], &gold);
    }

    #[test]
    fn chunks_partition_the_document(lens in prop::collection::vec(1usize..10, 1..20), budget in 1usize..20) {
        let snippets: Vec<TokenSeq> = lens.iter().map(|&n| TokenSeq::new(vec!["w".to_string(); n])).collect();
        let chunks = chunk_snippets(&snippets, budget);
        let mut next = 0;
        for c in &chunks {
            prop_assert_eq!(c.snippet_range.start, next);
            prop_assert!(c.snippet_range.end > c.snippet_range.start);
            let tokens: usize = lens[c.snippet_range.clone()].iter().sum();
            prop_assert!(tokens <= budget || c.snippet_range.len() == 1);
            next = c.snippet_range.end;
        }
        prop_assert_eq!(next, lens.len());
    }

    #[test]
    fn vocab_round_trip(seed in 0u64..50, picks in prop::collection::vec(any::<prop::sample::Index>(), 0..15)) {
        let docs = synth_corpus(seed, 3, 6, 2).unwrap();
        let vocab = build_vocab(&docs, 1);
        let entries = vocab.entries();
        let tokens = TokenSeq::new(picks.iter().map(|i| entries[i.index(entries.len())].clone()).collect::<Vec<_>>());
        prop_assert_eq!(vocab.decode(&vocab.encode(&tokens)), tokens);
    }

    #[test]
    fn synthetic_oracles_are_near_perfect(seed in 0u64..1000, l in 1usize..=12, s in any::<prop::sample::Index>()) {
        let salient = 1 + s.index(l);
        for d in synth_corpus(seed, 2, l, salient).unwrap() {
            let o = greedy_oracle(&d.snippets, &d.gold, l);
            prop_assert!(o.final_score() >= 0.9, "{} {:?}", d.id, o);
        }
    }

    #[test]
    fn top_k_ignores_score_translation(ints in prop::collection::vec(-5i32..5, 1..12), shift in -20i32..20, k in 1usize..6) {
        let s: Vec<f64> = ints.iter().map(|&v| v as f64).collect();
        let t: Vec<f64> = ints.iter().map(|&v| (v + shift) as f64).collect();
        prop_assert_eq!(top_k(&s, k).indices, top_k(&t, k).indices);
    }

    #[test]
    fn extractor_distribution_normalized_and_translation_invariant(
        s in prop::collection::vec(-10.0..10.0f64, 1..10),
        shift in -50.0..50.0f64,
    ) {
        let subset: Vec<usize> = (0..s.len()).step_by(2).collect();
        let p = extractor_distribution(&s, &subset);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let t: Vec<f64> = s.iter().map(|v| v + shift).collect();
        for (a, b) in p.iter().zip(extractor_distribution(&t, &subset)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hybrid_select_size_and_coverage(
        s in prop::collection::vec(-3.0..3.0f64, 1..12),
        oracle_picks in prop::collection::vec(any::<prop::sample::Index>(), 0..5),
        k in 1usize..8,
    ) {
        let mut indices: Vec<usize> = Vec::new();
        for p in oracle_picks {
            let i = p.index(s.len());
            if !indices.contains(&i) {
                indices.push(i);
            }
        }
        let oracle = OracleSet { score_trajectory: vec![0.5; indices.len()], indices };
        let sel = hybrid_select(&oracle, &s, k);
        prop_assert_eq!(sel.indices.len(), k.min(s.len()));
        prop_assert!(sel.indices.windows(2).all(|w| w[0] < w[1]));
        if oracle.len() < k {
            prop_assert!(oracle.indices.iter().all(|i| sel.indices.contains(i)));
        }
    }

    #[test]
    fn marginal_is_a_bounded_distribution(step in (1usize..5, 2usize..9).prop_flat_map(|(k, v)| step_output(k, v))) {
        let m = marginal_next_token(&step);
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (y, &p) in m.iter().enumerate() {
            let col = step.per_snippet_dists.iter().map(|d| d[y]);
            let lo = col.clone().fold(f64::INFINITY, f64::min);
            let hi = col.fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo - 1e-15 <= p && p <= hi + 1e-15);
        }
    }

    #[test]
    fn kl_is_non_negative_and_zero_on_the_diagonal(a in prop::collection::vec(-5.0..5.0f64, 1..6), b in prop::collection::vec(-5.0..5.0f64, 1..6)) {
        let n = a.len().min(b.len());
        let (p, q) = (softmax(&a[..n]), softmax(&b[..n]));
        prop_assert!(kl_divergence(&p, &q) >= 0.0);
        let steps = vec![StepOutput { per_snippet_dists: vec![vec![1.0]; n], dynamic_weights: p.clone(), per_snippet_logits: vec![0.0; n] }];
        prop_assert_eq!(consistency_loss(&steps, &p), 0.0);
    }

    #[test]
    fn generation_loss_falls_as_gold_probability_rises(base in 0.01..0.9f64, bump in 0.001..0.09f64, others in prop::collection::vec(0.01..1.0f64, 0..4)) {
        let step = |p: f64| StepOutput {
            per_snippet_dists: vec![vec![p, 1.0 - p]],
            dynamic_weights: vec![1.0],
            per_snippet_logits: vec![0.0],
        };
        let mut low: Vec<StepOutput> = others.iter().map(|&p| step(p)).collect();
        let mut high = low.clone();
        low.push(step(base));
        high.push(step(base + bump));
        let targets = vec![0; low.len()];
        prop_assert!(generation_loss(&high, &targets) < generation_loss(&low, &targets));
    }

    #[test]
    fn oracle_loss_ignores_score_translation(s in prop::collection::vec(-5.0..5.0f64, 1..10), shift in -30.0..30.0f64, pick in any::<prop::sample::Index>()) {
        let oracle = OracleSet { indices: vec![pick.index(s.len())], score_trajectory: vec![1.0] };
        let t: Vec<f64> = s.iter().map(|v| v + shift).collect();
        prop_assert!((oracle_loss(&s, &oracle) - oracle_loss(&t, &oracle)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generator_weights_are_a_softmax_of_logits(seed in 0u64..1000, k in 1usize..4, shift in -10.0..10.0f64) {
        let (store, net) = tiny_generator(seed, 10);
        let snippets: Vec<Vec<usize>> = (0..k).map(|i| vec![5 + i, 6 + (i % 3)]).collect();
        let input = GenInput { query: &[], snippets: snippets.iter().map(Vec::as_slice).collect() };
        let out = decode_step(&net, &store, &input, &[BOS, 7]).unwrap();
        prop_assert!((marginal_next_token(&out).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f64> = out.per_snippet_logits.iter().map(|l| l + shift).collect();
        for (w, s) in out.dynamic_weights.iter().zip(softmax(&shifted)) {
            prop_assert!((w - s).abs() < 1e-12);
        }
    }

    #[test]
    fn decoding_is_causal(seed in 0u64..1000, gold in prop::collection::vec(5usize..10, 1..6), cut in any::<prop::sample::Index>()) {
        let (store, net) = tiny_generator(seed, 10);
        let (a, b) = (vec![5usize, 6, 7], vec![8usize, 9]);
        let input = GenInput { query: &[9], snippets: vec![&a, &b] };
        let mut target = vec![BOS];
        target.extend(&gold);
        let full = teacher_forced_forward(&net, &store, &input, &target).unwrap();
        let t = 1 + cut.index(gold.len());
        prop_assert_eq!(&decode_step(&net, &store, &input, &target[..t]).unwrap(), &full[t - 1]);
    }

    #[test]
    fn single_snippet_modes_agree(seed in 0u64..1000, len in 1usize..5) {
        let (store, net) = tiny_generator(seed, 10);
        let snip: Vec<usize> = (0..len).map(|i| 5 + (i * 3) % 5).collect();
        let input = GenInput { query: &[], snippets: vec![&snip] };
        let d = net.generate(&store, &input, 6, WeightMode::Dynamic, None).unwrap();
        let s = net.generate(&store, &input, 6, WeightMode::Static, Some(&[1.0])).unwrap();
        prop_assert_eq!(d, s);
    }
}
