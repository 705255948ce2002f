//! Writes a verified bundle directory and rebuilds it from disk.

use gifs_lab::constructions::BundleRecipe;
use gifs_lab::io::{build_bundle_dir, read_bundle};
use gifs_lab::scales::geometric_good;
use gifs_lab::symbolic::OrdinalIndex;

fn main() -> anyhow::Result<()> {
    let recipe = BundleRecipe::Scattered {
        alpha: OrdinalIndex::Fin(2),
        n: 2,
        b: geometric_good(1.0 / 30.0, 1.0 / 30.0)?,
        depth: 4,
        width: 5,
    };
    let dir = std::env::temp_dir().join("gifs-lab-bundle");
    let (_, report) = build_bundle_dir(&recipe, &dir, true, 0)?;
    println!(
        "built {} with {} points, pass = {}",
        recipe.kind(),
        report.points,
        report.pass
    );
    let back = read_bundle(&dir)?;
    println!(
        "reloaded {} maps of order {} from {}",
        back.gifs().maps.len(),
        back.gifs().order(),
        dir.display()
    );
    Ok(())
}
