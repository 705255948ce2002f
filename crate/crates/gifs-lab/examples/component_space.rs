//! Copies of the segment `[0, 1]` on the leaves of `Λ^ω`: a space whose
//! components form a scattered set, with the quotient checked against the
//! matching `(Λ^ω, b, s)`-space.

use gifs_lab::constructions::{quotient_check, AffineGifs, BundleRecipe};
use gifs_lab::realization::TemplateCloud;
use gifs_lab::scales::geometric_good;

fn main() -> anyhow::Result<()> {
    let recipe = BundleRecipe::ComponentSpace {
        template: TemplateCloud::segment_grid(16),
        template_gifs: AffineGifs::quarters(),
        b: geometric_good(1.0 / 30.0, 1.0 / 30.0)?,
        depth: 3,
        width: 5,
    };
    let bundle = match recipe.build()? {
        gifs_lab::constructions::Bundle::Scattered(s) => s,
        gifs_lab::constructions::Bundle::Mixed(_) => unreachable!(),
    };
    println!(
        "{} points, {} maps",
        bundle.space.len(),
        bundle.gifs.maps.len()
    );
    let q = quotient_check(&bundle)?;
    println!(
        "{} components; quotient attractor exact = {}, matches the s-space = {}",
        q.components, q.attractor_exact, q.matches_s_space
    );
    Ok(())
}
