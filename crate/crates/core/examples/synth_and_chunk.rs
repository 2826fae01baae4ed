//! Builds a synthetic corpus, packs one document into encoder chunks and
//! shows its vocabulary encoding.
//!
//!     cargo run --example synth_and_chunk -- [token_budget]

use dyle::corpus::{build_vocab, chunk_snippets, synth_corpus};
use dyle::oracle::greedy_oracle;

fn main() -> dyle::Result<()> {
    let budget: usize = std::env::args().nth(1).map_or(16, |s| s.parse().expect("token budget"));
    let docs = synth_corpus(0, 8, 12, 3)?;
    let vocab = build_vocab(&docs, 1);
    println!("{} documents, vocabulary of {}", docs.len(), vocab.len());

    let doc = &docs[0];
    println!("document {} gold: {}", doc.id, doc.gold.to_text());
    for (i, s) in doc.snippets.iter().enumerate() {
        println!("  [{i:2}] {}", s.to_text());
    }
    for c in chunk_snippets(&doc.snippets, budget) {
        let tokens: usize = doc.snippets[c.snippet_range.clone()].iter().map(|s| s.len()).sum();
        println!("chunk {:?}: {tokens} tokens (budget {budget})", c.snippet_range);
    }
    let oracle = greedy_oracle(&doc.snippets, &doc.gold, 6);
    println!("oracle {:?} score {:.3}", oracle.sorted_indices(), oracle.final_score());
    println!("gold ids {:?}", vocab.encode(&doc.gold));
    Ok(())
}
