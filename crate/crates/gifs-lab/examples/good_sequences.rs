//! Scale sequences: a geometric good sequence, a good pair for an order-2
//! growth sequence, and the counting bound that rules out order 1.

use gifs_lab::scales::{
    geometric_good, nonattractor_bound, p_for_order, pair_b_for_p, rational_to_f64, validate_good,
};

fn main() -> anyhow::Result<()> {
    let b = geometric_good(1.0 / 30.0, 1.0 / 30.0)?;
    let report = validate_good(&b, 50);
    println!(
        "b = geometric(1/30, 1/30): M_b = {:.5}, λ_b = {:.5}, valid = {}",
        report.m_b,
        report.lambda_b,
        report.pass()
    );
    for k in 0..4 {
        println!("  b_{k} = {:.3e}", b.b(k));
    }

    let p = p_for_order(2, 2);
    let pair = pair_b_for_p(&p, 4)?;
    let terms: Vec<String> = pair.p_terms().iter().map(ToString::to_string).collect();
    println!(
        "good pair for p = ({}): λ_b = {:.5}",
        terms.join(", "),
        pair.b.lambda_b()
    );

    println!("counting bound c_n at order 1:");
    for (n, c) in nonattractor_bound(&p, 1, 6).iter().enumerate() {
        println!("  c_{} = {c} ≈ {:.4e}", n + 1, rational_to_f64(c));
    }
    Ok(())
}
