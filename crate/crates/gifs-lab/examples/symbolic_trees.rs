//! Symbolic trees: truncated boundaries of `Λ^(α,n)` and their
//! Cantor–Bendixson ranks.

use gifs_lab::symbolic::{
    cb_height_symbolic, cb_rank_bruteforce, enumerate_boundary, rank_summary, OrdinalIndex,
    TreeSpec,
};

fn main() -> anyhow::Result<()> {
    let tree = TreeSpec::alpha_n(OrdinalIndex::Fin(2), 2);
    let boundary = enumerate_boundary(&tree, 3, 4)?;
    println!(
        "Λ^(2,2) truncated at depth 3, width 4: {} boundary addresses",
        boundary.len()
    );
    for b in boundary.iter().take(8) {
        println!("  {} ({:?})", b.addr, b.exactness);
    }

    let ranks = cb_rank_bruteforce(&boundary, &tree)?;
    let (height, top) = rank_summary(&ranks);
    let (alpha, n) = cb_height_symbolic(&tree)?;
    println!("brute-force height {height} with {top} top points; symbolic ({alpha}, {n})");

    let ladder: Vec<String> = (1..=4)
        .map(|k| OrdinalIndex::Omega.ladder(k).unwrap().to_string())
        .collect();
    println!("ladder of ω: {}", ladder.join(", "));
    Ok(())
}
