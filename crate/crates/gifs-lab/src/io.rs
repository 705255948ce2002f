//! File formats: point clouds (JSON, CSV, SVG), iteration histories and
//! bundle directories.
//!
//! A bundle directory holds `space.json`, `gifs.json`, `witnesses.json` and
//! `report.json`. Maps are closures and are not serialized; `gifs.json`
//! carries the construction recipe, from which the bundle is rebuilt
//! deterministically, together with a descriptor of every map.

use crate::constructions::{verify_bundle, Bundle, BundleRecipe, BundleReport, ConstructionError};
use crate::gifs_engine::{Backend, GifsMap, HistoryRow};
use crate::realization::{Label, RealizationError, SpaceApprox, SpaceRecipe};
use crate::symbolic::Address;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SPACE_FILE: &str = "space.json";
pub const GIFS_FILE: &str = "gifs.json";
pub const WITNESS_FILE: &str = "witnesses.json";
pub const REPORT_FILE: &str = "report.json";

/// Largest coordinate drift tolerated between a stored cloud and its rebuild.
pub const REBUILD_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Realization(#[from] RealizationError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error("{0} does not carry a recipe and cannot be rebuilt")]
    NoRecipe(PathBuf),
    #[error("stored cloud differs from its recipe: {0}")]
    Mismatch(String),
    #[error("SVG export supports dimensions 1 and 2, got {0}")]
    SvgDim(usize),
}

type Result<T> = std::result::Result<T, IoError>;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_text(path, &text)
}

/// One point of an exported cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addr: Option<Address>,
    pub label: Label,
    pub x: Vec<f64>,
    pub exact: bool,
}

/// The point-cloud file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudFile {
    pub dim: usize,
    pub points: Vec<PointRecord>,
    pub error_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<SpaceRecipe>,
}

impl CloudFile {
    pub fn of(space: &SpaceApprox) -> CloudFile {
        let points = space
            .points
            .iter()
            .map(|hp| PointRecord {
                addr: match &hp.label {
                    Label::Addr(a) => Some(a.clone()),
                    _ => None,
                },
                label: hp.label.clone(),
                x: space.geometry.coords(&hp.pt),
                exact: hp.exact,
            })
            .collect();
        CloudFile {
            dim: space.dim(),
            points,
            error_bound: space.error_bound,
            recipe: Some(space.recipe.clone()),
        }
    }

    /// Rebuilds the space from the stored recipe and checks that it
    /// reproduces the stored coordinates.
    pub fn rebuild(&self, origin: &Path) -> Result<SpaceApprox> {
        let recipe = self
            .recipe
            .as_ref()
            .ok_or_else(|| IoError::NoRecipe(origin.to_path_buf()))?;
        let space = SpaceApprox::build(recipe)?;
        let fresh = CloudFile::of(&space);
        if fresh.points.len() != self.points.len() {
            return Err(IoError::Mismatch(format!(
                "{} stored points, {} rebuilt",
                self.points.len(),
                fresh.points.len()
            )));
        }
        for (a, b) in self.points.iter().zip(&fresh.points) {
            let drift =
                a.x.iter()
                    .zip(&b.x)
                    .map(|(u, v)| (u - v).abs())
                    .fold(0.0, f64::max);
            if a.label != b.label || a.x.len() != b.x.len() || drift > REBUILD_TOL {
                return Err(IoError::Mismatch(format!("point {:?}", a.label)));
            }
        }
        Ok(space)
    }
}

pub fn write_space_json(space: &SpaceApprox, path: &Path) -> Result<()> {
    write_json(path, &CloudFile::of(space))
}

pub fn read_cloud(path: &Path) -> Result<CloudFile> {
    read_json(path)
}

/// Human-readable label: the address path for tree points.
pub fn label_path(label: &Label) -> String {
    match label {
        Label::Addr(a) => a.to_path(),
        Label::Cluster { k, i } => format!("y{k}.{i}"),
        Label::Copy { addr, j } => format!("{}#{j}", addr.to_path()),
        Label::Part { part, inner } => format!("p{part}/{}", label_path(inner)),
        Label::Index(i) => format!("#{i}"),
    }
}

/// CSV with columns `addr, exact, x0, x1, …`.
pub fn cloud_csv(cloud: &CloudFile) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["addr".to_string(), "exact".to_string()];
    header.extend((0..cloud.dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for p in &cloud.points {
        let mut row = vec![label_path(&p.label), p.exact.to_string()];
        row.extend(p.x.iter().map(|x| format!("{x:e}")));
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| IoError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn write_cloud_csv(cloud: &CloudFile, path: &Path) -> Result<()> {
    write_text(path, &cloud_csv(cloud)?)
}

/// Iteration history as CSV (`iter, hausdorff_step, set_size`).
pub fn write_history_csv(history: &[HistoryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in history {
        w.serialize(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| IoError::Csv(e.into_error().into()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv is utf-8"))
}

const SVG_W: f64 = 960.0;
const ROW_H: f64 = 60.0;
const MARGIN: f64 = 40.0;
/// Each zoom row shows a window this much narrower than the previous one.
const ZOOM: f64 = 1.0 / 30.0;
const MAX_ROWS: usize = 6;

fn svg_header(h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{h}\" viewBox=\"0 0 {SVG_W} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// SVG rendering: a scatter plot in dimension 2; in dimension 1 the full
/// cloud on a line followed by zoom rows around the accumulation point, each
/// `30×` narrower than the last.
pub fn cloud_svg(cloud: &CloudFile) -> Result<String> {
    let xs: Vec<&[f64]> = cloud.points.iter().map(|p| p.x.as_slice()).collect();
    match cloud.dim {
        1 => Ok(line_svg(
            cloud,
            &xs.iter().map(|x| x[0]).collect::<Vec<_>>(),
        )),
        2 => Ok(scatter_svg(&xs)),
        d => Err(IoError::SvgDim(d)),
    }
}

fn line_svg(cloud: &CloudFile, xs: &[f64]) -> String {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let center = cloud
        .points
        .iter()
        .find(|p| p.label == Label::Addr(Address::omega()))
        .map(|p| p.x[0])
        .unwrap_or(hi);
    let mut gaps: Vec<f64> = xs.to_vec();
    gaps.sort_by(f64::total_cmp);
    let min_gap = gaps
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 0.0)
        .fold(span, f64::min);
    let mut rows = vec![(lo, hi)];
    let mut half = span;
    while rows.len() < MAX_ROWS && half * ZOOM > min_gap {
        half *= ZOOM;
        rows.push((center - half, center + half));
    }
    let height = 2.0 * MARGIN + ROW_H * rows.len() as f64;
    let mut out = svg_header(height);
    for (r, (a, b)) in rows.iter().enumerate() {
        let y = MARGIN + ROW_H * r as f64 + ROW_H / 2.0;
        let scale = (SVG_W - 2.0 * MARGIN) / (b - a);
        let _ = writeln!(
            out,
            "<line x1=\"{MARGIN}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#999\"/>\n\
             <text x=\"{MARGIN}\" y=\"{}\" font-size=\"11\" fill=\"#555\">[{a:.3e}, {b:.3e}]</text>",
            SVG_W - MARGIN,
            y - 14.0
        );
        for x in xs.iter().filter(|x| **x >= *a && **x <= *b) {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.3}\" cy=\"{y}\" r=\"2\" fill=\"black\"/>",
                MARGIN + (x - a) * scale
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn scatter_svg(xs: &[&[f64]]) -> String {
    let bound = |i: usize| {
        let lo = xs.iter().map(|x| x[i]).fold(f64::INFINITY, f64::min);
        let hi = xs.iter().map(|x| x[i]).fold(f64::NEG_INFINITY, f64::max);
        (lo, (hi - lo).max(f64::MIN_POSITIVE))
    };
    let ((x0, sx), (y0, sy)) = (bound(0), bound(1));
    let side = SVG_W - 2.0 * MARGIN;
    let s = side / sx.max(sy);
    let mut out = svg_header(SVG_W);
    for x in xs {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"2\" fill=\"black\"/>",
            MARGIN + (x[0] - x0) * s,
            SVG_W - MARGIN - (x[1] - y0) * s
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_cloud_svg(cloud: &CloudFile, path: &Path) -> Result<()> {
    write_text(path, &cloud_svg(cloud)?)
}

/// Descriptor of one map of a GIFS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapDescriptor {
    pub name: String,
    pub backend: Backend,
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed_lip: Option<f64>,
    pub host: String,
}

impl MapDescriptor {
    pub fn of(f: &dyn GifsMap) -> MapDescriptor {
        MapDescriptor {
            name: f.name().to_string(),
            backend: f.backend(),
            order: f.order(),
            claimed_lip: f.claimed_lip(),
            host: SPACE_FILE.to_string(),
        }
    }
}

/// Contents of `gifs.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GifsFile {
    pub order: usize,
    pub maps: Vec<MapDescriptor>,
    pub recipe: BundleRecipe,
}

/// Contents of `witnesses.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessFile {
    pub witnesses: Vec<MapDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_profile: Option<Vec<f64>>,
}

/// Writes `space.json`, `gifs.json` and `witnesses.json`, plus
/// `report.json` when a report is given.
pub fn write_bundle(dir: &Path, bundle: &Bundle, report: Option<&BundleReport>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| IoError::File {
        path: dir.to_path_buf(),
        source,
    })?;
    write_space_json(bundle.space(), &dir.join(SPACE_FILE))?;
    let gifs = GifsFile {
        order: bundle.gifs().order(),
        maps: bundle
            .gifs()
            .maps
            .iter()
            .map(|f| MapDescriptor::of(f.as_ref()))
            .collect(),
        recipe: bundle.recipe().clone(),
    };
    write_json(&dir.join(GIFS_FILE), &gifs)?;
    let witnesses = WitnessFile {
        witnesses: bundle
            .witnesses()
            .values()
            .map(|f| MapDescriptor::of(f.as_ref()))
            .collect(),
        bound_profile: match bundle {
            Bundle::Mixed(m) => Some(m.bound_profile.clone()),
            Bundle::Scattered(_) => None,
        },
    };
    write_json(&dir.join(WITNESS_FILE), &witnesses)?;
    if let Some(r) = report {
        write_json(&dir.join(REPORT_FILE), r)?;
    }
    Ok(())
}

/// Rebuilds a bundle from its directory and checks that the rebuilt space
/// and maps match the stored files.
pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let gifs: GifsFile = read_json(&dir.join(GIFS_FILE))?;
    let bundle = gifs.recipe.build()?;
    let stored: CloudFile = read_cloud(&dir.join(SPACE_FILE))?;
    let fresh = CloudFile::of(bundle.space());
    if stored.points.len() != fresh.points.len()
        || stored.points.iter().zip(&fresh.points).any(|(a, b)| {
            a.label != b.label
                || a.x
                    .iter()
                    .zip(&b.x)
                    .any(|(u, v)| (u - v).abs() > REBUILD_TOL)
        })
    {
        return Err(IoError::Mismatch(format!(
            "{} does not match the recipe in {GIFS_FILE}",
            SPACE_FILE
        )));
    }
    let names: Vec<&str> = bundle.gifs().maps.iter().map(|f| f.name()).collect();
    if names
        != gifs
            .maps
            .iter()
            .map(|m| m.name.as_str())
            .collect::<Vec<_>>()
        || gifs.order != bundle.gifs().order()
    {
        return Err(IoError::Mismatch(format!(
            "maps in {GIFS_FILE} differ from the recipe"
        )));
    }
    Ok(bundle)
}

/// Builds a bundle from a recipe, verifies it and writes its directory.
pub fn build_bundle_dir(
    recipe: &BundleRecipe,
    dir: &Path,
    with_lip: bool,
    seed: u64,
) -> Result<(Bundle, BundleReport)> {
    let bundle = recipe.build()?;
    let report = verify_bundle(&bundle, with_lip, seed)?;
    write_bundle(dir, &bundle, Some(&report))?;
    Ok((bundle, report))
}
