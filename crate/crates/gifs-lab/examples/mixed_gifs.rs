//! An order-2 GIFS on a cluster space `M ∪ Y`: the clusters grow like
//! `p_(k+1) = p_k²`, which only order 2 can keep up with.

use gifs_lab::constructions::{gifs_mixed, gifs_scattered, verify_bundle, Bundle};
use gifs_lab::realization::Label;
use gifs_lab::scales::{p_for_order, pair_b_for_p};
use gifs_lab::symbolic::OrdinalIndex;

fn main() -> anyhow::Result<()> {
    let pair = pair_b_for_p(&p_for_order(2, 2), 4)?;
    let m = gifs_scattered(OrdinalIndex::Fin(1), 1, &pair.b, 3, 4)?;
    let mixed = gifs_mixed(&m, &pair, 2, 3, 4)?;
    let space = mixed.space.clone();
    for k in 1..=4 {
        println!("Y_{k}: {} points", space.cluster_indices(k).len());
    }

    let f = &mixed.witnesses["F"];
    let a = |i| space.pt_of(&Label::Cluster { k: 1, i }).unwrap();
    let img = f.eval(&[a(1), a(2)]);
    println!("F(y_1,1, y_1,2) = {:?}", space.label_of(&img));

    println!("bound profile at order 1: {:?}", mixed.bound_profile);
    let report = verify_bundle(&Bundle::Mixed(mixed), true, 0)?;
    println!(
        "attractor pass = {}, all Lipschitz claims hold = {}",
        report.attractor.pass(),
        report.pass
    );
    Ok(())
}
