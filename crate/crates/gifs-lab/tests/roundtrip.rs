//! Serialization round trips for recipes, clouds and bundle directories.

use gifs_lab::constructions::{AffineGifs, BundleRecipe};
use gifs_lab::io::{
    build_bundle_dir, read_bundle, read_cloud, write_space_json, GifsFile, IoError,
};
use gifs_lab::realization::{realize_bp_space, realize_z_space, SpaceApprox, TemplateCloud};
use gifs_lab::scales::{geometric_good, p_for_order, pair_b_for_p, GoodSequence};
use gifs_lab::symbolic::{OrdinalIndex, TreeSpec};

fn b30() -> GoodSequence {
    geometric_good(1.0 / 30.0, 1.0 / 30.0).unwrap()
}

fn recipes() -> Vec<BundleRecipe> {
    let pair = pair_b_for_p(&p_for_order(2, 2), 3).unwrap();
    vec![
        BundleRecipe::Scattered {
            alpha: OrdinalIndex::Omega,
            n: 3,
            b: b30(),
            depth: 3,
            width: 4,
        },
        BundleRecipe::Sandwiched {
            tree: TreeSpec::LambdaS,
            b: b30(),
            depth: 3,
            width: 4,
        },
        BundleRecipe::Mixed {
            m_bundle: Box::new(BundleRecipe::Scattered {
                alpha: OrdinalIndex::Fin(1),
                n: 1,
                b: pair.b.clone(),
                depth: 2,
                width: 3,
            }),
            pair,
            m: 2,
            depth: 2,
            width: 3,
        },
        BundleRecipe::ComponentSpace {
            template: TemplateCloud::segment_grid(4),
            template_gifs: AffineGifs::quarters(),
            b: b30(),
            depth: 2,
            width: 3,
        },
        BundleRecipe::Densify {
            points: vec![vec![0.0], vec![1.0]],
            epsilon: 0.1,
            template: Box::new(BundleRecipe::Scattered {
                alpha: OrdinalIndex::Fin(1),
                n: 1,
                b: b30(),
                depth: 3,
                width: 4,
            }),
        },
    ]
}

#[test]
fn recipes_roundtrip_through_json() {
    for r in recipes() {
        let text = serde_json::to_string(&r).unwrap();
        let back: BundleRecipe = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}

#[test]
fn bundles_roundtrip_through_directories() {
    let dir = tempfile::tempdir().unwrap();
    for (i, r) in recipes().iter().enumerate() {
        let path = dir.path().join(format!("{i}"));
        let (bundle, report) = build_bundle_dir(r, &path, false, 0).unwrap();
        assert!(report.pass, "{}: {report:?}", r.kind());
        let back = read_bundle(&path).unwrap();
        assert_eq!(back.space().len(), bundle.space().len());
        assert_eq!(back.recipe(), r);
        let gifs: GifsFile =
            serde_json::from_str(&std::fs::read_to_string(path.join("gifs.json")).unwrap())
                .unwrap();
        assert_eq!(gifs.maps.len(), bundle.gifs().maps.len());
    }
}

#[test]
fn edited_recipe_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let r = &recipes()[0];
    build_bundle_dir(r, dir.path(), false, 0).unwrap();
    let path = dir.path().join("gifs.json");
    let text = std::fs::read_to_string(&path)
        .unwrap()
        .replace("\"depth\": 3", "\"depth\": 2");
    std::fs::write(&path, text).unwrap();
    assert!(matches!(read_bundle(dir.path()), Err(IoError::Mismatch(_))));
}

#[test]
fn every_space_kind_rebuilds_from_its_cloud() {
    let dir = tempfile::tempdir().unwrap();
    let pair = pair_b_for_p(&p_for_order(2, 2), 3).unwrap();
    let spaces: Vec<SpaceApprox> = vec![
        realize_bp_space(&TreeSpec::alpha(OrdinalIndex::Fin(1)), &pair, 2, 3, 0.0).unwrap(),
        realize_z_space(
            &TreeSpec::alpha(OrdinalIndex::Fin(2)),
            &b30(),
            &TemplateCloud::segment_grid(4),
            2,
            3,
            0.0,
        )
        .unwrap(),
    ];
    for (i, s) in spaces.iter().enumerate() {
        let path = dir.path().join(format!("{i}.json"));
        write_space_json(s, &path).unwrap();
        let rebuilt = read_cloud(&path).unwrap().rebuild(&path).unwrap();
        assert_eq!(rebuilt.len(), s.len());
    }
}
