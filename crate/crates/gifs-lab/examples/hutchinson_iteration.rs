//! Iterates the Hutchinson operator from a single point and records the
//! geometric decay of consecutive steps.

use gifs_lab::constructions::gifs_scattered;
use gifs_lab::gifs_engine::{hausdorff, iterate_to_attractor};
use gifs_lab::io::write_history_csv;
use gifs_lab::realization::Label;
use gifs_lab::scales::geometric_good;
use gifs_lab::symbolic::{Address, OrdinalIndex};

fn main() -> anyhow::Result<()> {
    let b = geometric_good(1.0 / 30.0, 1.0 / 30.0)?;
    let bundle = gifs_scattered(OrdinalIndex::Fin(2), 1, &b, 4, 6)?;
    let space = &bundle.space;
    let start = space.pt_of(&Label::Addr(Address::omega())).unwrap().clone();
    let result = iterate_to_attractor(&bundle.gifs, &[start], &space.geometry, 1e-9, 100, 0.0)?;
    for row in &result.history {
        println!(
            "step {:>2}: h = {:.3e}, |A| = {}",
            row.iter, row.hausdorff_step, row.set_size
        );
    }
    let h = hausdorff(&result.set, &space.pts(), &space.geometry)?;
    println!(
        "converged = {}, h(A, X) = {h:.3e}, certificate {:.3e}",
        result.converged, result.certificate
    );
    let path = std::env::temp_dir().join("gifs-lab-history.csv");
    write_history_csv(&result.history, &path)?;
    println!("history written to {}", path.display());
    Ok(())
}
