//! Approximates a finite set by an attractor: every point is replaced by a
//! small separated copy of a scattered attractor.

use gifs_lab::constructions::{densify, gifs_scattered};
use gifs_lab::gifs_engine::check_exact_attractor;
use gifs_lab::scales::geometric_good;
use gifs_lab::symbolic::OrdinalIndex;

fn main() -> anyhow::Result<()> {
    let b = geometric_good(1.0 / 30.0, 1.0 / 30.0)?;
    let template = gifs_scattered(OrdinalIndex::Fin(1), 1, &b, 4, 6)?;
    let k = vec![vec![0.0, 0.0], vec![3.0, 1.0], vec![-2.0, 5.0]];
    let d = densify(&k, 0.5, &template.space, &template.gifs)?;
    println!(
        "{} points in {} copies of diameter {:.3}; h(K, result) = {:.3}",
        d.space.len(),
        k.len(),
        d.copy_diam,
        d.hausdorff_to_k
    );
    println!(
        "attractor exact = {}",
        check_exact_attractor(&d.gifs, &d.space.pts())?.exact
    );
    Ok(())
}
