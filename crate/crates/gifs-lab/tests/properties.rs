//! Property tests for the invariants the constructions rely on.

use gifs_lab::constructions::{lex_rank_in_level, r_k_address};
use gifs_lab::gifs_engine::{hausdorff, project_address};
use gifs_lab::realization::{b_interval, min_difference, node_diam, realize_s_space, Geometry, Pt};
use gifs_lab::scales::{geometric_good, validate_good, GoodSequence};
use gifs_lab::symbolic::{Address, Entry, OrdinalIndex, TreeSpec};
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = Entry> {
    prop_oneof![4 => (1u32..5).prop_map(Entry::Int), 1 => Just(Entry::Omega)]
}

/// Addresses with integer entries, optionally closed by `ω`.
fn address(max_len: usize) -> impl Strategy<Value = Address> {
    (prop::collection::vec(1u32..5, 0..max_len), any::<bool>()).prop_map(|(ks, omega)| {
        let mut e: Vec<Entry> = ks.into_iter().map(Entry::Int).collect();
        if omega {
            e.push(Entry::Omega);
        }
        Address::new(e).unwrap()
    })
}

fn good() -> impl Strategy<Value = GoodSequence> {
    (0.01f64..1.0, 0.002f64..0.039).prop_map(|(c, q)| geometric_good(c, q).unwrap())
}

proptest! {
    #[test]
    fn address_paths_roundtrip(a in address(6)) {
        prop_assert_eq!(Address::parse_path(&a.to_path()).unwrap(), a);
    }

    #[test]
    fn omega_only_last(prefix in prop::collection::vec(entry(), 0..4), tail in prop::collection::vec(1u32..4, 1..3)) {
        let mut e = prefix.clone();
        e.push(Entry::Omega);
        e.extend(tail.into_iter().map(Entry::Int));
        prop_assert!(Address::new(e).is_err());
    }

    #[test]
    fn geometric_good_sequences_pass_validation(b in good()) {
        let report = validate_good(&b, 40);
        prop_assert!(report.pass(), "{:?}", report);
    }

    #[test]
    fn child_intervals_nest_and_separate(b in good(), node in address(3).prop_filter("int end", |a| !a.ends_with_omega()),
                                         j in 1u32..5, k in 1u32..5) {
        // Offsets keep their precision at depth where absolute coordinates
        // do not, so containment and separation are both checked through them.
        let slack = 1e-12 * node_diam(&b, &node);
        for c in [Entry::Int(j), Entry::Int(k), Entry::Omega] {
            let child = node.child(c);
            let below = min_difference(&b, &child, &node);
            prop_assert!(below >= -slack);
            prop_assert!(below + node_diam(&b, &child) <= node_diam(&b, &node) + slack);
        }
        let gap = |upper: &Address, lower: &Address| min_difference(&b, upper, lower) - node_diam(&b, lower);
        if j < k {
            prop_assert!(gap(&node.child(Entry::Int(j)), &node.child(Entry::Int(k))) > 0.0);
        }
        prop_assert!(gap(&node.child(Entry::Int(j.max(k))), &node.child(Entry::Omega)) > 0.0);
    }

    #[test]
    fn min_difference_agrees_with_coordinates(b in geometric_good_shallow(), p in address(3), q in address(3)) {
        let direct = b_interval(&b, &p, 0.0).lo - b_interval(&b, &q, 0.0).lo;
        let stable = min_difference(&b, &p, &q);
        prop_assert!((direct - stable).abs() <= 1e-9 * (b.b(0) + b.b(1)), "{} vs {}", direct, stable);
        prop_assert_eq!(min_difference(&b, &q, &p), -stable);
    }

    #[test]
    fn hausdorff_is_a_metric(a in cloud(), b in cloud(), c in cloud()) {
        let g = Geometry::plain(2);
        let d = |x: &[Pt], y: &[Pt]| hausdorff(x, y, &g).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn hausdorff_line_fast_path_matches_plane(xs in prop::collection::vec(-5.0f64..5.0, 1..12), ys in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let line = |v: &[f64]| v.iter().map(|&x| Pt::plain(vec![x])).collect::<Vec<_>>();
        let plane = |v: &[f64]| v.iter().map(|&x| Pt::plain(vec![x, 0.0])).collect::<Vec<_>>();
        let one = hausdorff(&line(&xs), &line(&ys), &Geometry::plain(1)).unwrap();
        let two = hausdorff(&plane(&xs), &plane(&ys), &Geometry::plain(2)).unwrap();
        prop_assert!((one - two).abs() <= 1e-12);
    }

    #[test]
    fn lex_rank_enumerates_the_level(lo in 0u128..4, extra in 1u128..3, m in 1usize..4) {
        let hi = lo + extra;
        let mut tuples = Vec::new();
        let mut t = vec![0u128; m];
        loop {
            if t.iter().any(|&x| x >= lo) {
                tuples.push(t.clone());
            }
            let mut i = m;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                t[i] += 1;
                if t[i] < hi {
                    break;
                }
                t[i] = 0;
                if i == 0 {
                    i = usize::MAX;
                    break;
                }
            }
            if i == usize::MAX {
                break;
            }
        }
        prop_assert_eq!(tuples.len() as u128, hi.pow(m as u32) - lo.pow(m as u32));
        for (n, t) in tuples.iter().enumerate() {
            prop_assert_eq!(lex_rank_in_level(t, lo, hi), n as u128);
        }
    }

    #[test]
    fn projection_lands_on_a_leaf_of_the_target(n in 0u32..4, eta in address(4)) {
        let target = TreeSpec::alpha(OrdinalIndex::Fin(n));
        let r = project_address(&target, &eta);
        prop_assert!(r.is_empty() || target.contains(r.entries()));
        prop_assert!(!target.has_child(r.entries()));
        prop_assert_eq!(project_address(&target, &r), r.clone());
    }

    #[test]
    fn r_k_lands_under_k(k in 2u32..6, xi in address(4)) {
        let out = r_k_address(k, &xi);
        prop_assert_eq!(out.first(), Some(Entry::Int(k)));
    }

    #[test]
    fn snapping_is_idempotent(eta in address(5)) {
        let space = small_space();
        let s = space.snap_addr(&eta);
        prop_assert!(space.boundary_addresses().contains(&s));
        prop_assert_eq!(space.snap_addr(&s), s);
    }
}

fn geometric_good_shallow() -> impl Strategy<Value = GoodSequence> {
    (0.1f64..1.0, 0.01f64..0.039).prop_map(|(c, q)| geometric_good(c, q).unwrap())
}

fn cloud() -> impl Strategy<Value = Vec<Pt>> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..10)
        .prop_map(|v| v.into_iter().map(|(x, y)| Pt::plain(vec![x, y])).collect())
}

fn small_space() -> &'static gifs_lab::realization::SpaceApprox {
    use std::sync::OnceLock;
    static SPACE: OnceLock<gifs_lab::realization::SpaceApprox> = OnceLock::new();
    SPACE.get_or_init(|| {
        let b = geometric_good(1.0 / 30.0, 1.0 / 30.0).unwrap();
        realize_s_space(&TreeSpec::alpha(OrdinalIndex::Omega), &b, 3, 4, 0.0).unwrap()
    })
}
