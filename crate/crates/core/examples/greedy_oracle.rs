//! Greedy extractive oracle against the exhaustive optimum on one document.
//!
//!     cargo run --example greedy_oracle

use dyle::metrics::tokenize;
use dyle::oracle::{exhaustive_oracle, greedy_oracle};

fn main() -> dyle::Result<()> {
    let snippets: Vec<_> = [
        "The council met on Tuesday.",
        "Members approved the new budget for schools.",
        "Lunch was served at noon.",
        "The budget raises teacher pay by four percent.",
        "A vote on parking was postponed.",
        "Several residents spoke about traffic.",
    ]
    .iter()
    .map(|s| tokenize(s))
    .collect();
    let gold = tokenize("The council approved a school budget that raises teacher pay. Parking was postponed.");

    let greedy = greedy_oracle(&snippets, &gold, 3);
    println!("greedy picks (selection order):");
    for (i, s) in greedy.indices.iter().zip(&greedy.score_trajectory) {
        println!("  {i}: {s:.4}  {}", snippets[*i].to_text());
    }
    let best = exhaustive_oracle(&snippets, &gold, 3)?;
    println!("exhaustive optimum {:?} -> {:.4}", best.sorted_indices(), best.final_score());
    println!("greedy final      {:?} -> {:.4}", greedy.sorted_indices(), greedy.final_score());
    Ok(())
}
