//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime.
//!
//! Run with `cargo test --test acceptance`. The process exits with status 1
//! when any criterion fails.

use gifs_lab::cli::{rank_check, rank_window};
use gifs_lab::constructions::{
    densify, gifs_component_space, gifs_mixed, gifs_sandwiched, gifs_scattered, quotient_check,
    verify_bundle, AffineGifs, Bundle,
};
use gifs_lab::gifs_engine::{
    attractor_residual, check_exact_attractor, hausdorff, iterate_to_attractor, lipschitz_estimate,
    GifsMap, LipRegime,
};
use gifs_lab::realization::{
    b_interval, min_difference, node_diam, realize_s_space, realize_s_space_in,
    verify_space_conditions, Label, Pt, SpaceApprox, TemplateCloud,
};
use gifs_lab::scales::{
    geometric_good, nonattractor_bound, p_for_order, pair_b_for_p, validate_good, GoodSequence,
};
use gifs_lab::symbolic::{interior_nodes, Address, Entry, OrdinalIndex, TreeSpec, Truncation};
use num_bigint::BigInt;
use num_rational::BigRational;
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Relative tolerance for closed-form identities of the scale sequence.
const REL_TOL: f64 = 1e-12;
/// Absolute tolerance for geometric margins.
const ABS_TOL: f64 = 1e-9;
/// Slack on the per-step contraction of Hutchinson iterates.
const STEP_SLACK: f64 = 1.05;
/// Stopping tolerance of the Hutchinson iteration.
const ITER_TOL: f64 = 1e-6;
/// `λ_b` for `b = geometric(1/30, 1/30)`: `25 · 1/30`.
const LAMBDA: f64 = 5.0 / 6.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn b30() -> GoodSequence {
    geometric_good(1.0 / 30.0, 1.0 / 30.0).expect("good sequence")
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

fn lip_of(f: &dyn GifsMap, pts: &[Pt], space: &SpaceApprox) -> (f64, LipRegime) {
    let r = lipschitz_estimate(f, pts, &space.geometry, 0).expect("nonempty sample");
    (r.value, r.regime)
}

/// Measures a map over all tuple pairs (exhaustively or by exact branch and
/// bound) and compares it with `bound`.
fn lip_within(f: &dyn GifsMap, space: &SpaceApprox, bound: f64, notes: &mut Vec<String>) -> bool {
    let (value, regime) = lip_of(f, &space.pts(), space);
    notes.push(format!("{}={value:.4}≤{bound:.4}", f.name()));
    regime != LipRegime::Sampled && value <= bound * (1.0 + ABS_TOL)
}

fn c1_scale_validity() -> Outcome {
    let b = b30();
    let report = validate_good(&b, 50);
    let lambda_ok = rel_close(b.lambda_b(), LAMBDA) && rel_close(b.m_b(), 1.0 / 30.0);
    // Oracle for the derived inequality, evaluated directly on b_k = 30^-(k+1).
    let direct = (1..=50u64).all(|k| {
        let bk = |j: u64| (1.0 / 30.0f64).powi(j as i32 + 1);
        bk(k) <= LAMBDA / 20.0 * (bk(k - 1) - 2.0 * bk(k) - bk(k + 1)) * (1.0 + REL_TOL)
    });
    outcome(
        report.pass() && lambda_ok && direct,
        format!(
            "M_b={:.6}, λ_b={:.6}, derived failures={}",
            report.m_b,
            report.lambda_b,
            report.derived_failures.len()
        ),
    )
}

fn c2_b_family() -> Outcome {
    let b = b30();
    let nodes = interior_nodes(&TreeSpec::LambdaMax, 4, 6);
    let (mut nesting, mut gaps, mut maxes, mut checks) = (true, true, true, 0usize);
    for eta in &nodes {
        let l = eta.int_weight();
        let d_eta = node_diam(&b, eta);
        let children: Vec<Address> = (1..=6)
            .map(|k| eta.child(Entry::Int(k)))
            .chain([eta.child(Entry::Omega)])
            .collect();
        for c in &children {
            // I_c ⊆ I_η, measured from min I_η.
            let lo = min_difference(&b, c, eta);
            let hi = lo + node_diam(&b, c);
            nesting &= lo >= -ABS_TOL * d_eta && hi <= d_eta * (1.0 + REL_TOL);
            checks += 1;
        }
        for k in 1..6u32 {
            let (a, c) = (eta.child(Entry::Int(k)), eta.child(Entry::Int(k + 1)));
            let gap = min_difference(&b, &a, &c) - node_diam(&b, &c);
            let kk = u64::from(k);
            let expected = b.b(l + kk - 1) - 2.0 * b.b(l + kk) - b.b(l + kk + 1);
            gaps &= rel_close(gap, expected);
        }
        let one = eta.child(Entry::Int(1));
        let top_one = min_difference(&b, &one, eta) + node_diam(&b, &one);
        maxes &= rel_close(top_one, d_eta);
    }
    // Absolute coordinates agree with the relative ones at the first level.
    let root = b_interval(&b, &Address::root(), 0.0);
    let first = b_interval(&b, &Address::ints(&[1]), 0.0);
    maxes &= rel_close(root.hi, first.hi);
    outcome(
        nesting && gaps && maxes,
        format!(
            "{} nodes, {checks} containments; nesting={nesting}, gaps={gaps}, max={maxes}",
            nodes.len()
        ),
    )
}

fn c3_space_conditions() -> Outcome {
    let space = realize_s_space(&TreeSpec::LambdaMax, &b30(), 4, 6, 0.0).expect("realizable");
    let report = verify_space_conditions(&space);
    // Accumulation inequalities around every x_(η⌢ω), recomputed pairwise.
    let mut pairs = 0usize;
    let mut ok = true;
    let labels: Vec<Address> = space
        .points
        .iter()
        .map(|p| p.label.addr().cloned().unwrap())
        .collect();
    for eta in interior_nodes(&TreeSpec::LambdaMax, 4, 6) {
        let w = eta.child(Entry::Omega);
        let Some(xw) = space.pt_of(&Label::Addr(w.clone())) else {
            continue;
        };
        let inside: Vec<usize> = (0..labels.len())
            .filter(|&i| w.is_prefix_of(&labels[i]))
            .collect();
        let outside: Vec<usize> = (0..labels.len())
            .filter(|&i| eta.is_prefix_of(&labels[i]) && !w.is_prefix_of(&labels[i]))
            .collect();
        for &i in &inside {
            for &j in &outside {
                let (x, y) = (&space.points[i].pt, &space.points[j].pt);
                let dxy = space.dist(x, y);
                ok &= space.dist(y, xw) <= 2.0 * dxy + ABS_TOL
                    && space.dist(x, xw) <= 3.0 * dxy + ABS_TOL;
                pairs += 1;
            }
        }
    }
    let margins =
        report.min_separation_margin >= -ABS_TOL && report.min_diameter_margin >= -ABS_TOL;
    outcome(
        report.pass() && margins && ok,
        format!(
            "{} points, {} conditions, sep margin {:.3e}, diam margin {:.3e}, {pairs} accumulation pairs",
            space.len(),
            report.conditions_checked,
            report.min_separation_margin,
            report.min_diameter_margin
        ),
    )
}

fn c4_scattered() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for alpha in [
        OrdinalIndex::Fin(1),
        OrdinalIndex::Fin(2),
        OrdinalIndex::Omega,
    ] {
        for n in 1..=2u32 {
            let start = Instant::now();
            let bundle = gifs_scattered(alpha, n, &b30(), 4, 6).expect("construction");
            let space = &bundle.space;
            let exact = check_exact_attractor(&bundle.gifs, &space.pts())
                .expect("check")
                .exact;
            let bounds: &[(&str, f64)] = if n == 1 {
                &[("F", LAMBDA / 2.0), ("G", LAMBDA / 4.0)]
            } else {
                &[("P", LAMBDA), ("Q", LAMBDA)]
            };
            let mut inner = Vec::new();
            let mut lips = true;
            for (name, bound) in bounds {
                lips &= lip_within(bundle.witnesses[*name].as_ref(), space, *bound, &mut inner);
            }
            let fast = start.elapsed() < Duration::from_secs(60);
            pass &= exact && lips && fast;
            notes.push(format!(
                "α={alpha},n={n}: {} pts, exact={exact}, {}",
                space.len(),
                inner.join(" ")
            ));
        }
    }
    outcome(pass, notes.join("; "))
}

fn c5_sandwiched() -> Outcome {
    let bundle = gifs_sandwiched(&TreeSpec::LambdaR, &b30(), 4, 5).expect("construction");
    let space = &bundle.space;
    let exact = check_exact_attractor(&bundle.gifs, &space.pts())
        .expect("check")
        .exact;
    let mut notes = Vec::new();
    let mut lips = true;
    for f in &bundle.gifs.maps {
        lips &= lip_within(f.as_ref(), space, LAMBDA, &mut notes);
    }
    let four = bundle.gifs.maps.len() == 4;
    outcome(
        exact && lips && four,
        format!("{} pts, exact={exact}, {}", space.len(), notes.join(" ")),
    )
}

fn c6_convergence() -> Outcome {
    let bundle = gifs_scattered(OrdinalIndex::Fin(1), 1, &b30(), 4, 6).expect("construction");
    let space = &bundle.space;
    let start = space
        .pt_of(&Label::Addr(Address::omega()))
        .expect("x_ω")
        .clone();
    let result = iterate_to_attractor(&bundle.gifs, &[start], &space.geometry, ITER_TOL, 200, 0.0)
        .expect("iterate");
    let steps: Vec<f64> = result.history.iter().map(|r| r.hausdorff_step).collect();
    let decay = steps.windows(2).all(|w| w[1] <= STEP_SLACK * LAMBDA * w[0]);
    let final_h = hausdorff(&result.set, &space.pts(), &space.geometry).expect("hausdorff");
    let allowed = ITER_TOL / (1.0 - LAMBDA) + space.error_bound;
    outcome(
        result.converged && decay && final_h <= allowed,
        format!(
            "{} steps, decay={decay}, h(A,X)={final_h:.3e} ≤ {allowed:.3e}",
            steps.len()
        ),
    )
}

fn c7_mixed() -> Outcome {
    let pair = pair_b_for_p(&p_for_order(2, 2), 4).expect("good pair");
    let lambda = pair.b.lambda_b();
    let m = gifs_scattered(OrdinalIndex::Fin(1), 1, &pair.b, 3, 4).expect("M bundle");
    let mb = gifs_mixed(&m, &pair, 2, 3, 4).expect("construction");
    let space = &mb.space;
    let exact = check_exact_attractor(&mb.gifs, &space.pts())
        .expect("check")
        .exact;
    let ys: Vec<Pt> = mb
        .y_indices
        .iter()
        .map(|&i| space.points[i].pt.clone())
        .collect();
    let f = &mb.witnesses["F"];
    let (lip_f, regime) = {
        let r = lipschitz_estimate(f.as_ref(), &ys, &space.geometry, 0).expect("nonempty");
        (r.value, r.regime)
    };
    let report = verify_space_conditions(space);
    let lambda_ok = rel_close(lambda, 25.0 / 144.0);
    outcome(
        exact && lip_f <= lambda * (1.0 + ABS_TOL) && regime != LipRegime::Sampled && report.pass() && lambda_ok,
        format!(
            "{} pts ({} in Y), exact={exact}, Lip(F|Y)={lip_f:.4} ≤ λ_b={lambda:.4}, conditions={} pass={}",
            space.len(),
            ys.len(),
            report.conditions_checked,
            report.pass()
        ),
    )
}

fn c8_bound_profile() -> Outcome {
    let c = nonattractor_bound(&p_for_order(2, 2), 1, 6);
    let q = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
    let values = c.len() == 6 && c[2] == q(31, 16) && c[3] == q(87, 256) && c[4] == q(439, 65536);
    let decreasing = c[3..].windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = c.iter().map(ToString::to_string).collect();
    outcome(values && decreasing, format!("c = [{}]", shown.join(", ")))
}

fn c9_component_space() -> Outcome {
    let template = TemplateCloud::segment_grid(16);
    let z = AffineGifs::quarters().to_gifs().expect("template GIFS");
    let mut bundle = gifs_component_space(&template, &z, &b30(), 3, 5).expect("construction");
    bundle.recipe = gifs_lab::constructions::BundleRecipe::ComponentSpace {
        template: template.clone(),
        template_gifs: AffineGifs::quarters(),
        b: b30(),
        depth: 3,
        width: 5,
    };
    let space = &bundle.space;
    let pts = space.pts();
    let residual = attractor_residual(&bundle.gifs, &pts, &space.geometry).expect("residual");
    let residual_ok = residual <= 2.0 * space.error_bound;
    let mut notes = Vec::new();
    let mut lips = true;
    for f in &bundle.gifs.maps {
        lips &= lip_within(f.as_ref(), space, LAMBDA.max(0.75), &mut notes);
    }
    let q = quotient_check(&bundle).expect("quotient");
    let reference = realize_s_space_in(
        &TreeSpec::alpha(OrdinalIndex::Omega),
        &b30(),
        &Truncation::weight_capped(3, 5, 5),
        0.0,
    )
    .expect("reference");
    let same_count = q.components == reference.len();
    outcome(
        template.points.len() == 17 && residual_ok && lips && q.attractor_exact && q.matches_s_space && same_count,
        format!(
            "{} pts, residual {residual:.3e} ≤ {:.3e}, {} components (reference {}), quotient exact={}, matches={}, {}",
            space.len(),
            2.0 * space.error_bound,
            q.components,
            reference.len(),
            q.attractor_exact,
            q.matches_s_space,
            notes.join(" ")
        ),
    )
}

fn c10_cantor_bendixson() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for k in 0..=3 {
        for n in 1..=3 {
            let alpha = OrdinalIndex::Fin(k);
            let (d, w) = rank_window(alpha).expect("finite α");
            let r = rank_check(alpha, n, d, w).expect("ranks");
            pass &= r.agree && r.bruteforce_height == k && r.bruteforce_top == n as usize;
            notes.push(format!(
                "({k},{n}):{}/{}",
                r.bruteforce_height, r.bruteforce_top
            ));
        }
    }
    outcome(pass, notes.join(" "))
}

fn c11_density() -> Outcome {
    let template = gifs_scattered(OrdinalIndex::Fin(1), 1, &b30(), 4, 6).expect("template");
    let k = vec![vec![0.0], vec![10.0]];
    let d = densify(&k, 1.0, &template.space, &template.gifs).expect("densify");
    let kpts: Vec<Pt> = k.iter().map(|x| Pt::plain(x.clone())).collect();
    let h = hausdorff(&kpts, &d.space.pts(), &d.space.geometry).expect("hausdorff");
    let bundle = Bundle::Scattered(gifs_lab::constructions::ScatteredGifsBundle {
        recipe: template.recipe.clone(),
        space: std::sync::Arc::new(d.space.clone()),
        gifs: d.gifs.clone(),
        witnesses: Default::default(),
    });
    let report = verify_bundle(&bundle, false, 0).expect("verify");
    outcome(
        // 0.5 < ε = 1, so this bound also gives h(K, result) < ε.
        h <= 0.5 && report.pass,
        format!(
            "{} pts, h(K, result)={h:.3e}, copy diam {:.3e}, attractor pass={}",
            d.space.len(),
            d.copy_diam,
            report.pass
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (
            "scale validity",
            Duration::from_millis(1),
            c1_scale_validity,
        ),
        ("b-family geometry", Duration::from_millis(100), c2_b_family),
        (
            "space conditions",
            Duration::from_secs(5),
            c3_space_conditions,
        ),
        (
            "two-map GIFS on scattered spaces",
            Duration::from_secs(360),
            c4_scattered,
        ),
        (
            "four-map GIFS on a sandwiched set",
            Duration::from_secs(60),
            c5_sandwiched,
        ),
        (
            "Hutchinson convergence",
            Duration::from_secs(30),
            c6_convergence,
        ),
        (
            "order-m GIFS on a cluster space",
            Duration::from_secs(60),
            c7_mixed,
        ),
        (
            "counting bound profile",
            Duration::from_millis(1),
            c8_bound_profile,
        ),
        (
            "component space and quotient",
            Duration::from_secs(120),
            c9_component_space,
        ),
        (
            "Cantor–Bendixson ranks",
            Duration::from_secs(10),
            c10_cantor_bendixson,
        ),
        (
            "density by separated copies",
            Duration::from_secs(10),
            c11_density,
        ),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name} ({:.3} s, budget {:.3} s): {}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs_f64(),
            result.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
