//! The four-map GIFS on the boundary of `Λ_r`, together with the address
//! surgeries that define it.

use gifs_lab::constructions::{gifs_sandwiched, s_ik_address, s_k_address, verify_bundle, Bundle};
use gifs_lab::scales::geometric_good;
use gifs_lab::symbolic::{Address, TreeSpec};

fn main() -> anyhow::Result<()> {
    let eta: Address = "2.3.w".parse()?;
    println!("s_2{} = {}", eta, s_k_address(&eta, Some(2)));
    let xi: Address = "2.2.w".parse()?;
    println!("s^2_3{} = {}", xi, s_ik_address(2, &xi, Some(3)));

    let b = geometric_good(1.0 / 30.0, 1.0 / 30.0)?;
    let bundle = Bundle::Scattered(gifs_sandwiched(&TreeSpec::LambdaR, &b, 4, 5)?);
    let report = verify_bundle(&bundle, true, 0)?;
    println!("M = ∂Λ_r: {} points, pass = {}", report.points, report.pass);
    for lip in &report.lipschitz {
        println!("  Lip({}) = {:.4}", lip.name, lip.value);
    }
    Ok(())
}
