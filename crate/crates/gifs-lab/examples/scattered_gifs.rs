//! The two-map GIFS of order 2 on a scattered space of height ω, with its
//! attractor equation and Lipschitz constants.

use gifs_lab::constructions::{gifs_scattered, verify_bundle, Bundle};
use gifs_lab::scales::geometric_good;
use gifs_lab::symbolic::OrdinalIndex;

fn main() -> anyhow::Result<()> {
    let b = geometric_good(1.0 / 30.0, 1.0 / 30.0)?;
    for n in [1, 2] {
        let bundle = Bundle::Scattered(gifs_scattered(OrdinalIndex::Omega, n, &b, 4, 6)?);
        let report = verify_bundle(&bundle, true, 0)?;
        println!(
            "Λ^(ω,{n}): {} points, attractor pass = {}",
            report.points,
            report.attractor.pass()
        );
        for lip in &report.lipschitz {
            println!(
                "  Lip({}) = {:.4} (claimed {:.4})",
                lip.name,
                lip.value,
                lip.claimed.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
