//! Dice word overlap and rank correlation on a handful of sentence pairs.
//!
//! Run with `cargo run --example lexical_overlap`.

use sentcompare::corpus::{dice, tokenize};
use sentcompare::numstat::{pearson, ranks_with_ties, spearman};

fn main() -> sentcompare::Result<()> {
    let base = "A man is playing a guitar.";
    let others = [
        ("The man is playing the guitar.", 4.909),
        ("A guy is playing an instrument.", 3.800),
        ("A man is playing a guitar and singing.", 3.200),
        ("The girl is playing the guitar.", 2.250),
        ("A woman is cutting vegetable.", 0.000),
    ];
    println!("tokens: {:?}\n", tokenize(base));
    println!("{:<40} {:>6} {:>6}", "sentence 2", "gold", "dice");
    let mut golds = Vec::new();
    let mut dices = Vec::new();
    for (s, gold) in others {
        let d = dice(base, s)?;
        println!("{s:<40} {gold:>6.3} {d:>6.3}");
        golds.push(gold);
        dices.push(d);
    }
    println!("\nranks of dice (ties averaged): {:?}", ranks_with_ties(&dices)?);
    println!("spearman(dice, gold) = {:.3}", spearman(&dices, &golds)?);
    println!("pearson(dice, gold)  = {:.3}", pearson(&dices, &golds)?);
    Ok(())
}
