//! The `gifs-lab` command line.
//!
//! Exit codes: `0` success (all checks pass), `1` a verification failed (the
//! report is still printed), `2` usage or input error.

use crate::constructions::{quotient_check, verify_bundle, AffineGifs, Bundle, BundleRecipe};
use crate::gifs_engine::{hausdorff, iterate_to_attractor, lipschitz_estimate};
use crate::io::{self, CloudFile, PointRecord, SPACE_FILE};
use crate::realization::{verify_space_conditions, Label, SpaceApprox, SpaceRecipe, TemplateCloud};
use crate::scales::{nonattractor_bound, pair_b_for_p, GoodPair, GoodSequence, PSequence};
use crate::symbolic::{
    cb_height_symbolic, cb_rank_bruteforce, enumerate_boundary, rank_summary, Address,
    OrdinalIndex, TreeSpec,
};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "gifs-lab",
    version,
    about = "Build, iterate and verify GIFSs on countable compact spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Realize and check spaces.
    #[command(subcommand)]
    Space(SpaceCommand),
    /// Build, iterate and verify GIFS bundles.
    #[command(subcommand)]
    Gifs(GifsCommand),
    /// Compare brute-force Cantor–Bendixson ranks with the symbolic height.
    Rank(RankArgs),
    /// Collapse the copies of a component-space bundle and check the quotient GIFS.
    Quotient { dir: PathBuf },
    /// Print the counting bound c_1..c_n for a growth sequence.
    BoundProfile(BoundArgs),
    /// Export a space (a cloud file or a bundle directory).
    Export {
        #[arg(value_enum)]
        format: ExportFormat,
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum SpaceCommand {
    /// Realize a truncated space and write its cloud JSON.
    Build(SpaceBuildArgs),
    /// Rebuild a cloud from its recipe and check the space conditions.
    Verify { path: PathBuf },
}

#[derive(Args, Debug)]
pub struct SpaceBuildArgs {
    /// `max`, `s`, `r`, `alpha:<α>`, `alpha:<α>,<n>` or `file:<tree.json>`.
    #[arg(long, default_value = "max")]
    pub tree: String,
    /// `geom:<c>/<den>`, `geom:c=<c>,q=<q>`, `ratios:…` or `pair:<p-spec>`.
    #[arg(long)]
    pub b: String,
    #[arg(long)]
    pub depth: u32,
    #[arg(long)]
    pub width: u32,
    /// Cap on the sum of integer entries of enumerated addresses.
    #[arg(long)]
    pub max_weight: Option<u32>,
    /// Largest cluster index certified for `pair:` scales (defaults to the width).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Attach an `n`-segment grid template to every leaf (a component space).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub origin: f64,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum GifsCommand {
    /// Build a bundle directory from a named construction.
    #[command(subcommand)]
    Build(RecipeCommand),
    /// Iterate the Hutchinson operator of a bundle.
    Iterate(IterateArgs),
    /// Measure the Lipschitz constant of every map against its claim.
    CheckLip {
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check the attractor equation (and optionally Lipschitz claims).
    VerifyAttractor {
        dir: PathBuf,
        /// Also measure Lipschitz constants.
        #[arg(long)]
        lip: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Window {
    #[arg(long)]
    pub depth: u32,
    #[arg(long)]
    pub width: u32,
}

#[derive(Args, Debug, Clone)]
pub struct BuildOutput {
    /// Bundle directory to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also measure Lipschitz constants while building.
    #[arg(long)]
    pub lip: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum RecipeCommand {
    /// Two maps on the space of height α with n top points.
    Scattered {
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        output: BuildOutput,
    },
    /// Four maps on a tree sandwiched between Λ_s and Λ_r.
    Sandwiched {
        #[arg(long, default_value = "r")]
        tree: String,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        output: BuildOutput,
    },
    /// An order-m GIFS on M ∪ Y, with M a scattered bundle.
    Mixed {
        /// Growth sequence, e.g. `power:2:m=2`.
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value = "1")]
        alpha: String,
        #[arg(long, default_value_t = 1)]
        n: u32,
        /// Largest certified cluster index (defaults to the width).
        #[arg(long)]
        k_max: Option<usize>,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        output: BuildOutput,
    },
    /// Copies of a template attractor on the leaves of Λ^ω.
    ComponentSpace {
        /// Segment grid with `grid + 1` points.
        #[arg(long, default_value_t = 16)]
        grid: usize,
        /// Template cloud JSON (overrides `--grid`).
        #[arg(long)]
        template: Option<PathBuf>,
        /// Affine template GIFS JSON (defaults to the four quarter maps).
        #[arg(long)]
        template_gifs: Option<PathBuf>,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        output: BuildOutput,
    },
    /// Replace every point of K by a small copy of a scattered attractor.
    Densify {
        /// Points separated by `;`, coordinates by `,` (e.g. `0;10`).
        #[arg(long, allow_hyphen_values = true)]
        points: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value = "1")]
        alpha: String,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        output: BuildOutput,
    },
    /// Build from a recipe JSON file (the `recipe` field of a `gifs.json`).
    FromFile {
        recipe: PathBuf,
        #[command(flatten)]
        output: BuildOutput,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StartSet {
    /// The single point x_ω (or the first host point).
    Omega,
    /// The whole host cloud.
    Host,
}

#[derive(Args, Debug)]
pub struct IterateArgs {
    pub dir: PathBuf,
    #[arg(long, value_enum, default_value_t = StartSet::Omega)]
    pub from: StartSet,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Thin every iterate to a δ-net (0 keeps everything).
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 64)]
    pub max_iter: usize,
    /// Write the iteration history as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Write the final set as a cloud JSON.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RankArgs {
    #[arg(long)]
    pub alpha: String,
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    /// Defaults to a window large enough for finite α.
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub width: Option<u32>,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[arg(long)]
    pub p: String,
    /// The order whose counting bound is printed.
    #[arg(long, default_value_t = 1)]
    pub order: u32,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExportFormat {
    Json,
    Csv,
    Svg,
}

/// Either a good sequence or a good pair, as given by `--b`.
#[derive(Clone, Debug)]
pub enum ScaleSpec {
    Plain(GoodSequence),
    Pair(GoodPair),
}

impl ScaleSpec {
    pub fn b(&self) -> &GoodSequence {
        match self {
            ScaleSpec::Plain(b) => b,
            ScaleSpec::Pair(p) => &p.b,
        }
    }
}

pub fn parse_scale(s: &str, k_max: usize) -> Result<ScaleSpec> {
    match s.strip_prefix("pair:") {
        Some(p) => Ok(ScaleSpec::Pair(pair_b_for_p(
            &PSequence::parse_cli(p)?,
            k_max,
        )?)),
        None => Ok(ScaleSpec::Plain(GoodSequence::parse_cli(s)?)),
    }
}

pub fn parse_alpha(s: &str) -> Result<OrdinalIndex> {
    s.parse()
        .map_err(|_| anyhow!("invalid ordinal `{s}` (use a number or `w`)"))
}

pub fn parse_tree(s: &str) -> Result<TreeSpec> {
    Ok(match s {
        "max" => TreeSpec::LambdaMax,
        "s" => TreeSpec::LambdaS,
        "r" => TreeSpec::LambdaR,
        _ => {
            if let Some(path) = s.strip_prefix("file:") {
                return Ok(io::read_json(Path::new(path))?);
            }
            let body = s
                .strip_prefix("alpha:")
                .ok_or_else(|| anyhow!("unknown tree `{s}`"))?;
            match body.split_once(',') {
                Some((a, n)) => TreeSpec::alpha_n(
                    parse_alpha(a)?,
                    n.trim().parse().context("tree cardinality")?,
                ),
                None => TreeSpec::alpha(parse_alpha(body)?),
            }
        }
    })
}

pub fn parse_points(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .with_context(|| format!("invalid coordinate `{x}`"))
                })
                .collect()
        })
        .collect()
}

/// Brute-force and symbolic Cantor–Bendixson data of `Λ^(α,n)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReport {
    pub alpha: OrdinalIndex,
    pub n: u32,
    pub depth: u32,
    pub width: u32,
    pub points: usize,
    pub symbolic_height: OrdinalIndex,
    pub symbolic_top: u32,
    pub bruteforce_height: u32,
    pub bruteforce_top: usize,
    pub agree: bool,
}

/// The smallest window on which every node keeps enough children for its
/// own height: depth `α + 1`, width `α + 2`.
pub fn rank_window(alpha: OrdinalIndex) -> Option<(u32, u32)> {
    match alpha {
        OrdinalIndex::Fin(k) => Some((k + 1, k + 2)),
        OrdinalIndex::Omega => None,
    }
}

/// Ranks of a height-`α` tree with `n` top points on the given window.
pub fn rank_check(alpha: OrdinalIndex, n: u32, depth: u32, width: u32) -> Result<RankReport> {
    let tree = TreeSpec::alpha_n(alpha, n);
    let boundary = enumerate_boundary(&tree, depth, width)?;
    let ranks = cb_rank_bruteforce(&boundary, &tree)?;
    let (sym_height, sym_top) = cb_height_symbolic(&tree)?;
    let (height, top) = rank_summary(&ranks);
    let agree = sym_height == OrdinalIndex::Fin(height) && sym_top as usize == top;
    Ok(RankReport {
        alpha,
        n,
        depth,
        width,
        points: ranks.len(),
        symbolic_height: sym_height,
        symbolic_top: sym_top,
        bruteforce_height: height,
        bruteforce_top: top,
        agree,
    })
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable report")
    );
}

fn status(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Space(SpaceCommand::Build(a)) => space_build(a),
        Command::Space(SpaceCommand::Verify { path }) => {
            let cloud = io::read_cloud(&path)?;
            let space = cloud.rebuild(&path)?;
            let report = verify_space_conditions(&space);
            print_json(&report);
            Ok(status(report.pass()))
        }
        Command::Gifs(GifsCommand::Build(recipe)) => gifs_build(recipe),
        Command::Gifs(GifsCommand::Iterate(a)) => gifs_iterate(a),
        Command::Gifs(GifsCommand::CheckLip { dir, seed }) => {
            let bundle = io::read_bundle(&dir)?;
            let space = bundle.space();
            let pts = space.pts();
            let mut reports = Vec::new();
            for f in &bundle.gifs().maps {
                reports.push(lipschitz_estimate(f.as_ref(), &pts, &space.geometry, seed)?);
            }
            let pass = reports.iter().all(|r| r.within_claim());
            print_json(&reports);
            Ok(status(pass))
        }
        Command::Gifs(GifsCommand::VerifyAttractor { dir, lip, seed }) => {
            let bundle = io::read_bundle(&dir)?;
            let report = verify_bundle(&bundle, lip, seed)?;
            print_json(&report);
            Ok(status(report.pass))
        }
        Command::Rank(a) => {
            let alpha = parse_alpha(&a.alpha)?;
            let (d, w) = match (a.depth, a.width, rank_window(alpha)) {
                (Some(d), Some(w), _) => (d, w),
                (d, w, Some((dd, ww))) => (d.unwrap_or(dd), w.unwrap_or(ww)),
                _ => bail!("--depth and --width are required for α = ω"),
            };
            let report = rank_check(alpha, a.n, d, w)?;
            print_json(&report);
            Ok(status(report.agree))
        }
        Command::Quotient { dir } => {
            let bundle = io::read_bundle(&dir)?;
            let Bundle::Scattered(s) = &bundle else {
                bail!("quotient needs a component-space bundle")
            };
            if !matches!(s.recipe, BundleRecipe::ComponentSpace { .. }) {
                bail!(
                    "quotient needs a component-space bundle, got {}",
                    s.recipe.kind()
                );
            }
            let report = quotient_check(s)?;
            print_json(&report);
            Ok(status(report.attractor_exact && report.matches_s_space))
        }
        Command::BoundProfile(a) => {
            let p = PSequence::parse_cli(&a.p)?;
            for (i, c) in nonattractor_bound(&p, a.order, a.n).iter().enumerate() {
                println!(
                    "c_{} = {} ≈ {:e}",
                    i + 1,
                    c,
                    crate::scales::rational_to_f64(c)
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { format, input, out } => export(format, &input, out.as_deref()),
    }
}

fn space_build(a: SpaceBuildArgs) -> Result<ExitCode> {
    let tree = parse_tree(&a.tree)?;
    let scale = parse_scale(&a.b, a.k_max.unwrap_or(a.width as usize))?;
    let recipe = match (&scale, a.grid) {
        (ScaleSpec::Pair(pair), None) => SpaceRecipe::Bp {
            tree,
            pair: pair.clone(),
            depth: a.depth,
            width: a.width,
            max_weight: a.max_weight,
            origin: a.origin,
        },
        (ScaleSpec::Pair(_), Some(_)) => bail!("--grid cannot be combined with a pair scale"),
        (ScaleSpec::Plain(b), Some(n)) => SpaceRecipe::Z {
            tree,
            b: b.clone(),
            template: TemplateCloud::segment_grid(n),
            depth: a.depth,
            width: a.width,
            max_weight: a.max_weight,
            origin: a.origin,
        },
        (ScaleSpec::Plain(b), None) => SpaceRecipe::S {
            tree,
            b: b.clone(),
            depth: a.depth,
            width: a.width,
            max_weight: a.max_weight,
            origin: a.origin,
        },
    };
    let space = SpaceApprox::build(&recipe)?;
    io::write_space_json(&space, &a.out)?;
    eprintln!("wrote {} points to {}", space.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn plain_b(spec: &str) -> Result<GoodSequence> {
    match parse_scale(spec, 1)? {
        ScaleSpec::Plain(b) => Ok(b),
        ScaleSpec::Pair(_) => {
            bail!("this construction takes a plain scale (`geom:…`), not `{spec}`")
        }
    }
}

/// The recipe described by a `gifs build` command.
pub fn recipe_of(cmd: &RecipeCommand) -> Result<BundleRecipe> {
    Ok(match cmd {
        RecipeCommand::Scattered {
            alpha,
            n,
            b,
            window,
            ..
        } => BundleRecipe::Scattered {
            alpha: parse_alpha(alpha)?,
            n: *n,
            b: plain_b(b)?,
            depth: window.depth,
            width: window.width,
        },
        RecipeCommand::Sandwiched {
            tree, b, window, ..
        } => BundleRecipe::Sandwiched {
            tree: parse_tree(tree)?,
            b: plain_b(b)?,
            depth: window.depth,
            width: window.width,
        },
        RecipeCommand::Mixed {
            p,
            m,
            alpha,
            n,
            k_max,
            window,
            ..
        } => {
            let pair = pair_b_for_p(
                &PSequence::parse_cli(p)?,
                k_max.unwrap_or(window.width as usize),
            )?;
            BundleRecipe::Mixed {
                m_bundle: Box::new(BundleRecipe::Scattered {
                    alpha: parse_alpha(alpha)?,
                    n: *n,
                    b: pair.b.clone(),
                    depth: window.depth,
                    width: window.width,
                }),
                pair,
                m: *m,
                depth: window.depth,
                width: window.width,
            }
        }
        RecipeCommand::ComponentSpace {
            grid,
            template,
            template_gifs,
            b,
            window,
            ..
        } => BundleRecipe::ComponentSpace {
            template: match template {
                Some(path) => io::read_json(path)?,
                None => TemplateCloud::segment_grid(*grid),
            },
            template_gifs: match template_gifs {
                Some(path) => io::read_json::<AffineGifs>(path)?,
                None => AffineGifs::quarters(),
            },
            b: plain_b(b)?,
            depth: window.depth,
            width: window.width,
        },
        RecipeCommand::Densify {
            points,
            epsilon,
            alpha,
            n,
            b,
            window,
            ..
        } => BundleRecipe::Densify {
            points: parse_points(points)?,
            epsilon: *epsilon,
            template: Box::new(BundleRecipe::Scattered {
                alpha: parse_alpha(alpha)?,
                n: *n,
                b: plain_b(b)?,
                depth: window.depth,
                width: window.width,
            }),
        },
        RecipeCommand::FromFile { recipe, .. } => io::read_json(recipe)?,
    })
}

fn gifs_build(cmd: RecipeCommand) -> Result<ExitCode> {
    let recipe = recipe_of(&cmd)?;
    let output = match &cmd {
        RecipeCommand::Scattered { output, .. }
        | RecipeCommand::Sandwiched { output, .. }
        | RecipeCommand::Mixed { output, .. }
        | RecipeCommand::ComponentSpace { output, .. }
        | RecipeCommand::Densify { output, .. }
        | RecipeCommand::FromFile { output, .. } => output.clone(),
    };
    let (bundle, report) = io::build_bundle_dir(&recipe, &output.out, output.lip, output.seed)?;
    eprintln!(
        "wrote {} ({} points, {} maps of order {}) to {}",
        recipe.kind(),
        bundle.space().len(),
        bundle.gifs().maps.len(),
        bundle.gifs().order(),
        output.out.display()
    );
    print_json(&report);
    Ok(status(report.pass))
}

#[derive(Serialize)]
struct IterateSummary {
    iterations: usize,
    converged: bool,
    final_step: f64,
    final_size: usize,
    certificate: f64,
    hausdorff_to_host: f64,
    error_bound: f64,
}

fn gifs_iterate(a: IterateArgs) -> Result<ExitCode> {
    let bundle = io::read_bundle(&a.dir)?;
    let space = bundle.space();
    let host = space.pts();
    let seed = match a.from {
        StartSet::Host => host.clone(),
        StartSet::Omega => {
            let p = space
                .pt_of(&Label::Addr(Address::omega()))
                .unwrap_or(&space.points[0].pt);
            vec![p.clone()]
        }
    };
    let result = iterate_to_attractor(
        bundle.gifs(),
        &seed,
        &space.geometry,
        a.tol,
        a.max_iter,
        a.delta,
    )?;
    let summary = IterateSummary {
        iterations: result.history.len(),
        converged: result.converged,
        final_step: result.history.last().map_or(0.0, |r| r.hausdorff_step),
        final_size: result.set.len(),
        certificate: result.certificate,
        hausdorff_to_host: hausdorff(&result.set, &host, &space.geometry)?,
        error_bound: space.error_bound,
    };
    if let Some(path) = &a.history {
        io::write_history_csv(&result.history, path)?;
    }
    if let Some(path) = &a.out {
        let points = result
            .set
            .iter()
            .enumerate()
            .map(|(i, p)| PointRecord {
                addr: None,
                label: space.label_of(p).cloned().unwrap_or(Label::Index(i as u32)),
                x: space.geometry.coords(p),
                exact: false,
            })
            .collect();
        let cloud = CloudFile {
            dim: space.dim(),
            points,
            error_bound: summary.certificate,
            recipe: None,
        };
        io::write_json(path, &cloud)?;
    }
    print_json(&summary);
    Ok(status(summary.converged))
}

fn export(format: ExportFormat, input: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let path = if input.is_dir() {
        input.join(SPACE_FILE)
    } else {
        input.to_path_buf()
    };
    let cloud = io::read_cloud(&path)?;
    let text = match format {
        ExportFormat::Json => serde_json::to_string_pretty(&cloud)? + "\n",
        ExportFormat::Csv => io::cloud_csv(&cloud)?,
        ExportFormat::Svg => io::cloud_svg(&cloud)?,
    };
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
