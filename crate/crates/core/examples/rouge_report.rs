//! Scores a candidate against a reference with ROUGE-1/2/L.
//!
//!     cargo run --example rouge_report -- "candidate text" "reference text"

use dyle::metrics::{oracle_score, tokenize, RougeReport};

fn main() {
    let mut args = std::env::args().skip(1);
    let candidate = args.next().unwrap_or_else(|| "police killed the gunman. the siege ended.".into());
    let reference = args.next().unwrap_or_else(|| "the gunman was shot by police. the siege is over.".into());
    let (c, r) = (tokenize(&candidate), tokenize(&reference));

    println!("candidate tokens: {:?}", c.tokens());
    println!("reference tokens: {:?}", r.tokens());
    for split in [false, true] {
        let rep = RougeReport::compute(&c, &r, split);
        println!("sentence split {split:5}: {rep}");
        println!("  average F1 {:.4}", rep.avg_f1());
    }
    println!("oracle score {:.4}", oracle_score(&c, &r));
}
