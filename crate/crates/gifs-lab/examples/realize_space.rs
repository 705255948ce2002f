//! Realizes a truncated `(Λ_max, b, s)`-space on the line, checks the
//! separation and diameter conditions, and exports JSON, CSV and SVG.

use gifs_lab::io::{write_cloud_csv, write_cloud_svg, write_space_json, CloudFile};
use gifs_lab::realization::{realize_s_space, verify_space_conditions};
use gifs_lab::scales::geometric_good;
use gifs_lab::symbolic::TreeSpec;

fn main() -> anyhow::Result<()> {
    let b = geometric_good(1.0 / 30.0, 1.0 / 30.0)?;
    let space = realize_s_space(&TreeSpec::LambdaMax, &b, 3, 4, 0.0)?;
    let report = verify_space_conditions(&space);
    println!(
        "{} points, error bound {:.3e}; {} conditions, pass = {}",
        space.len(),
        space.error_bound,
        report.conditions_checked,
        report.pass()
    );

    let dir = std::env::temp_dir().join("gifs-lab-realize");
    write_space_json(&space, &dir.join("space.json"))?;
    let cloud = CloudFile::of(&space);
    write_cloud_csv(&cloud, &dir.join("space.csv"))?;
    write_cloud_svg(&cloud, &dir.join("space.svg"))?;
    println!(
        "wrote space.json, space.csv and space.svg to {}",
        dir.display()
    );
    Ok(())
}
