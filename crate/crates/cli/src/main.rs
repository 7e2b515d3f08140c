use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use cisca_core::grid::{Grid, LabelMap, MagProfile, Magnification};
use cisca_core::gt;
use cisca_core::io;
use cisca_core::loss::{total_loss, LossInputs, LossWeights};
use cisca_core::metrics::{self, ImageEval, R2Mode};
use cisca_core::postprocess::{postprocess, InstanceTypeTable, PostprocessConfig};
use cisca_core::sampling::{oversample_counts, Alphas, DatasetManifest};
use cisca_core::stain::{self, AugmentPolicy, JitterParams, MacenkoParams, RgbImage, StainMatrix, Strategy};
use cisca_core::tensor::Tensor;
use cisca_core::tiling::{self, Tile, TileGrid};

/// Cell instance segmentation toolkit: ground-truth encoding, loss
/// evaluation, post-processing, tiling, metrics, sampling plans and stain
/// transforms.
#[derive(Parser)]
#[command(name = "cisca-kit", version)]
struct Cli {
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true, env = "CISCA_KIT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a label map into ternary map, distance maps and weight mask.
    Encode(EncodeArgs),
    /// Turn network outputs into an instance label map.
    Postprocess(PostprocessArgs),
    /// Cut an image into overlapping tiles.
    Tile(TileArgs),
    /// Blend tiles (or per-tile predictions) back into one raster.
    Untile(UntileArgs),
    /// Evaluate predicted label maps against ground truth.
    Metrics(MetricsArgs),
    /// Evaluate the training loss for one image.
    Loss(LossArgs),
    /// Compute an oversampling plan from per-image class counts.
    SamplePlan(SamplePlanArgs),
    /// Stain normalization and augmentation.
    #[command(subcommand)]
    Stain(StainCommand),
}

#[derive(Args)]
struct EncodeArgs {
    /// 16-bit instance label PNG (0 = background).
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "20x")]
    mag: Magnification,
    #[arg(long)]
    out_dir: PathBuf,
    /// Optional per-pixel type-id PNG, one-hot encoded into types.f32.
    #[arg(long, requires = "n_types")]
    type_map: Option<PathBuf>,
    /// Type channels including background.
    #[arg(long)]
    n_types: Option<usize>,
}

#[derive(Args)]
struct PostprocessArgs {
    /// Ternary probabilities (BD, CB, BG), H×W×3.
    #[arg(long)]
    prob: PathBuf,
    /// Distance maps, H×W×4.
    #[arg(long)]
    dist: PathBuf,
    /// Optional type probabilities, H×W×K with channel 0 = background.
    #[arg(long)]
    types: Option<PathBuf>,
    #[arg(long, default_value = "20x")]
    mag: Magnification,
    #[arg(long, default_value_t = PostprocessConfig::DEFAULT_THETA1)]
    theta1: f64,
    /// Minimum instance area (default from the magnification profile).
    #[arg(long)]
    theta2: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, requires = "types")]
    types_out: Option<PathBuf>,
}

#[derive(Args)]
struct TileArgs {
    /// RGB PNG or raw f32 tensor (with sidecar).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = tiling::DEFAULT_TILE)]
    size: usize,
    /// Fraction of the tile shared with its neighbour.
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
}

#[derive(Args)]
struct UntileArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory with one `<tile stem>.f32` prediction per tile; the tiles
    /// themselves are blended when omitted.
    #[arg(long)]
    pred_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Ground-truth label PNGs.
    #[arg(long)]
    gt_dir: PathBuf,
    /// Predicted label PNGs with the same file names.
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long, default_value = "20x")]
    mag: Magnification,
    /// Directory of `<stem>.json` GT type tables.
    #[arg(long, requires = "pred_types")]
    gt_types: Option<PathBuf>,
    /// Directory of `<stem>.json` predicted type tables.
    #[arg(long, requires = "gt_types")]
    pred_types: Option<PathBuf>,
    /// JSON object mapping image stem to tissue name.
    #[arg(long)]
    tissue_map: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = R2Arg::Ols)]
    r2: R2Arg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum R2Arg {
    Ols,
    Identity,
}

#[derive(Args)]
struct LossArgs {
    #[arg(long)]
    gt_prob: PathBuf,
    #[arg(long)]
    pred_prob: PathBuf,
    #[arg(long)]
    gt_dist: PathBuf,
    #[arg(long)]
    pred_dist: PathBuf,
    /// Weight mask, H×W×1.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, requires = "pred_types")]
    gt_types: Option<PathBuf>,
    #[arg(long, requires = "gt_types")]
    pred_types: Option<PathBuf>,
    /// JSON file with lambda1..lambda6, tversky_alpha, epsilon.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SamplePlanArgs {
    /// CSV: image_id, then one count column per class.
    #[arg(long)]
    manifest: PathBuf,
    /// JSON object class -> alpha, optional "default".
    #[arg(long)]
    alphas: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum StainCommand {
    Normalize(NormalizeArgs),
    Augment(AugmentArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Macenko,
    Reinhard,
    Ruifrok,
    Style,
}

#[derive(Args)]
struct NormalizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Target template; for `style`, repeat to list the style templates.
    #[arg(long, required = true)]
    template: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fixed normalization template.
    #[arg(long)]
    template: Option<PathBuf>,
    /// Templates for the style model (at least two).
    #[arg(long)]
    style_template: Vec<PathBuf>,
    /// Strategies to choose from (default: all with their inputs given).
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<StrategyArg>,
    #[arg(long, default_value_t = JitterParams::default().brightness)]
    brightness: f64,
    #[arg(long, default_value_t = JitterParams::default().contrast)]
    contrast: f64,
    #[arg(long, default_value_t = JitterParams::default().saturation)]
    saturation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Style,
    Jitter,
    Template,
}

/// Argument combinations rejected after parsing (exit code 2).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Encode(a) => encode(a),
        Command::Postprocess(a) => run_postprocess(a),
        Command::Tile(a) => tile(a),
        Command::Untile(a) => untile(a),
        Command::Metrics(a) => run_metrics(a),
        Command::Loss(a) => run_loss(a),
        Command::SamplePlan(a) => sample_plan(a),
        Command::Stain(StainCommand::Normalize(a)) => normalize(a),
        Command::Stain(StainCommand::Augment(a)) => augment(a),
    }
}

fn read_tensor(path: &Path) -> Result<Tensor> {
    io::read_tensor(path).with_context(|| format!("reading {}", path.display()))
}

fn read_labels(path: &Path) -> Result<LabelMap> {
    io::read_label_png(path).with_context(|| format!("reading {}", path.display()))
}

fn read_rgb(path: &Path) -> Result<RgbImage> {
    io::read_rgb_png(path).with_context(|| format!("reading {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Rounds every non-integer number to 6 decimals.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            let r = (x * 1e6).round() / 1e6;
            *v = serde_json::Number::from_f64(if r == 0.0 { 0.0 } else { r })
                .map(Value::Number)
                .unwrap_or(Value::Null);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn to_json<T: Serialize>(value: &T, round: bool) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    if round {
        round_floats(&mut v);
    }
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Writes JSON to `out`, or stdout when absent.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>, round: bool) -> Result<()> {
    let text = to_json(value, round)?;
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn encode(a: EncodeArgs) -> Result<()> {
    let labels = read_labels(&a.labels)?;
    let type_map = match &a.type_map {
        Some(p) => Some(io::read_code_png(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let profile = MagProfile::new(a.mag);
    let ternary = gt::ternary_from_labels(&labels, &profile);
    let dist = gt::distance_maps_from_labels(&labels);
    let mask = gt::weight_mask(&ternary, &profile);
    let prob = gt::one_hot_ternary(&ternary);
    let types = match (type_map, a.n_types) {
        (Some(tm), Some(k)) => {
            if tm.shape() != labels.shape() {
                bail!("type map {:?} vs labels {:?}", tm.shape(), labels.shape());
            }
            Some(gt::one_hot_types(&tm, k)?)
        }
        _ => None,
    };

    create_dir(&a.out_dir)?;
    io::write_code_png(&a.out_dir.join("ternary.png"), &ternary)?;
    io::write_tensor(&a.out_dir.join("dist.f32"), &dist)?;
    io::write_tensor(&a.out_dir.join("mask.f32"), &Tensor::from_channels(&[mask])?)?;
    io::write_tensor(&a.out_dir.join("prob.f32"), &prob)?;
    if let Some(t) = types {
        io::write_tensor(&a.out_dir.join("types.f32"), &t)?;
    }
    Ok(())
}

fn run_postprocess(a: PostprocessArgs) -> Result<()> {
    let prob = read_tensor(&a.prob)?;
    let dist = read_tensor(&a.dist)?;
    let types = a.types.as_deref().map(read_tensor).transpose()?;
    let mut cfg = PostprocessConfig::new(MagProfile::new(a.mag));
    cfg.theta1 = a.theta1;
    if let Some(t2) = a.theta2 {
        cfg.theta2 = t2;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let out = postprocess(&prob, &dist, types.as_ref(), &cfg)?;
    io::write_label_png(&a.out, &out.labels)?;
    if let (Some(path), Some(table)) = (&a.types_out, &out.types) {
        emit_json(table, Some(path), true)?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TileFormat {
    Png,
    F32,
}

#[derive(Serialize, Deserialize)]
struct TileEntry {
    row: usize,
    col: usize,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct TileManifest {
    source: String,
    format: TileFormat,
    channels: usize,
    grid: TileGrid,
    tiles: Vec<TileEntry>,
}

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn rgb_to_tensor(img: &RgbImage) -> Tensor {
    let (h, w) = img.shape();
    let data = img.as_slice().iter().flat_map(|p| p.map(f32::from)).collect();
    Tensor::from_vec(h, w, 3, data).expect("rgb shape")
}

fn tensor_to_rgb(t: &Tensor) -> Result<RgbImage> {
    if t.channels() != 3 {
        bail!("expected 3 channels, got {}", t.channels());
    }
    let data = (0..t.pixels())
        .map(|i| {
            let p = t.pixel(i);
            [0, 1, 2].map(|k| p[k].round().clamp(0.0, 255.0) as u8)
        })
        .collect();
    Ok(Grid::from_vec(t.height(), t.width(), data)?)
}

fn tile(a: TileArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.overlap) {
        return Err(usage(format!("--overlap must lie in [0, 1), got {}", a.overlap)));
    }
    let stride = ((a.size as f64) * (1.0 - a.overlap)).round() as usize;
    if stride == 0 {
        return Err(usage("tile stride rounds to zero"));
    }
    let png = is_png(&a.input);
    let image = if png {
        rgb_to_tensor(&read_rgb(&a.input)?)
    } else {
        read_tensor(&a.input)?
    };
    let grid = tiling::plan_tiles(image.height(), image.width(), a.size, stride).map_err(|e| usage(e.to_string()))?;
    let tiles = tiling::extract_tiles(&image, &grid)?;

    create_dir(&a.out_dir)?;
    let mut entries = Vec::with_capacity(tiles.len());
    for t in &tiles {
        let stem = format!("tile_{:05}_{:05}", t.row, t.col);
        let file = if png {
            let name = format!("{stem}.png");
            io::write_rgb_png(&a.out_dir.join(&name), &tensor_to_rgb(&t.data)?)?;
            name
        } else {
            let name = format!("{stem}.f32");
            io::write_tensor(&a.out_dir.join(&name), &t.data)?;
            name
        };
        entries.push(TileEntry {
            row: t.row,
            col: t.col,
            file,
        });
    }
    let manifest = TileManifest {
        source: a.input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        format: if png { TileFormat::Png } else { TileFormat::F32 },
        channels: image.channels(),
        grid,
        tiles: entries,
    };
    emit_json(&manifest, Some(&a.out_dir.join("manifest.json")), false)
}

fn untile(a: UntileArgs) -> Result<()> {
    let manifest: TileManifest = read_json(&a.manifest)?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let mut tiles = Vec::with_capacity(manifest.tiles.len());
    for e in &manifest.tiles {
        let data = match &a.pred_dir {
            Some(dir) => {
                let stem = Path::new(&e.file).file_stem().unwrap_or_default();
                read_tensor(&dir.join(stem).with_extension("f32"))?
            }
            None => {
                let path = base.join(&e.file);
                match manifest.format {
                    TileFormat::Png => rgb_to_tensor(&read_rgb(&path)?),
                    TileFormat::F32 => read_tensor(&path)?,
                }
            }
        };
        tiles.push(Tile {
            row: e.row,
            col: e.col,
            data,
        });
    }
    let window = tiling::spline_window(manifest.grid.tile)?;
    let blended = tiling::blend_untile(&tiles, &manifest.grid, &window)?;
    io::write_tensor(&a.out, &blended)?;
    Ok(())
}

fn png_stems(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if is_png(&path) {
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            out.push((stem, path));
        }
    }
    out.sort();
    Ok(out)
}

fn run_metrics(a: MetricsArgs) -> Result<()> {
    let gts = png_stems(&a.gt_dir)?;
    if gts.is_empty() {
        bail!("no PNG label maps in {}", a.gt_dir.display());
    }
    let tissues: Option<std::collections::BTreeMap<String, String>> =
        a.tissue_map.as_deref().map(read_json).transpose()?;
    let mut images = Vec::with_capacity(gts.len());
    for (stem, gt_path) in gts {
        let pred_path = a.pred_dir.join(gt_path.file_name().unwrap());
        if !pred_path.exists() {
            bail!("missing prediction {}", pred_path.display());
        }
        let table = |dir: &Option<PathBuf>| -> Result<Option<InstanceTypeTable>> {
            dir.as_ref().map(|d| read_json(&d.join(format!("{stem}.json")))).transpose()
        };
        let tissue = match &tissues {
            Some(map) => Some(
                map.get(&stem)
                    .cloned()
                    .ok_or_else(|| anyhow!("tissue map has no entry for {stem}"))?,
            ),
            None => None,
        };
        images.push(ImageEval {
            gt: read_labels(&gt_path)?,
            pred: read_labels(&pred_path)?,
            gt_types: table(&a.gt_types)?,
            pred_types: table(&a.pred_types)?,
            tissue,
            name: stem,
        });
    }
    let mode = match a.r2 {
        R2Arg::Ols => R2Mode::Ols,
        R2Arg::Identity => R2Mode::Identity,
    };
    let report = metrics::evaluate(&images, MagProfile::new(a.mag).match_radius, mode)?;
    emit_json(&report, a.out.as_deref(), true)
}

fn run_loss(a: LossArgs) -> Result<()> {
    let weights: LossWeights = match &a.weights {
        Some(p) => read_json(p)?,
        None => LossWeights::default(),
    };
    weights.validate().map_err(|e| usage(e.to_string()))?;
    let gt_prob = read_tensor(&a.gt_prob)?;
    let pred_prob = read_tensor(&a.pred_prob)?;
    let gt_dist = read_tensor(&a.gt_dist)?;
    let pred_dist = read_tensor(&a.pred_dist)?;
    let mask = read_tensor(&a.mask)?;
    if mask.channels() != 1 {
        bail!("weight mask must have 1 channel, got {}", mask.channels());
    }
    let mask = mask.channel(0);
    let types = match (&a.gt_types, &a.pred_types) {
        (Some(g), Some(p)) => Some((read_tensor(g)?, read_tensor(p)?)),
        _ => None,
    };
    let inputs = LossInputs {
        gt_prob: &gt_prob,
        pred_prob: &pred_prob,
        gt_dist: &gt_dist,
        pred_dist: &pred_dist,
        mask: &mask,
        types: types.as_ref().map(|(g, p)| (g, p)),
    };
    let breakdown = total_loss(&inputs, &weights)?;
    emit_json(&breakdown, a.out.as_deref(), false)
}

fn sample_plan(a: SamplePlanArgs) -> Result<()> {
    let manifest = DatasetManifest::from_path(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let alphas = Alphas::from_path(&a.alphas).with_context(|| format!("reading {}", a.alphas.display()))?;
    let mut plan = oversample_counts(&manifest, &alphas)?;
    if let Some(seed) = a.seed {
        plan = plan.with_draws(&manifest, seed)?;
    }
    emit_json(&plan, a.out.as_deref(), false)
}

fn style_model(paths: &[PathBuf]) -> Result<stain::StainStyleModel> {
    let images = paths.iter().map(|p| read_rgb(p)).collect::<Result<Vec<_>>>()?;
    stain::StainStyleModel::from_images(&images).map_err(|e| usage(e.to_string()))
}

fn normalize(a: NormalizeArgs) -> Result<()> {
    let image = read_rgb(&a.input)?;
    let out = if a.method == Method::Style {
        let model = style_model(&a.template)?;
        stain::apply_style(&image, &stain::sample_style(&model, a.seed))?
    } else {
        let [template] = a.template.as_slice() else {
            return Err(usage(format!("--method needs exactly one --template, got {}", a.template.len())));
        };
        let template = read_rgb(template)?;
        let params = MacenkoParams::default();
        match a.method {
            Method::Reinhard => stain::reinhard_normalize(&image, &stain::LabStats::of_image(&template))?,
            Method::Ruifrok => {
                let reference = stain::MacenkoReference::with_matrix(&template, StainMatrix::he_default())?;
                stain::ruifrok_normalize(&image, &reference)?
            }
            Method::Macenko => {
                let reference =
                    stain::MacenkoReference::from_template(&template, &params).context("estimating template stains")?;
                let source = stain::macenko_estimate(&image, &params).context("estimating image stains")?;
                stain::macenko_normalize(&image, &source, &reference)?
            }
            Method::Style => unreachable!(),
        }
    };
    io::write_rgb_png(&a.out, &out)?;
    Ok(())
}

fn augment(a: AugmentArgs) -> Result<()> {
    let image = read_rgb(&a.input)?;
    let jitter = JitterParams {
        brightness: a.brightness,
        contrast: a.contrast,
        saturation: a.saturation,
    };
    let mut policy = AugmentPolicy::jitter_only(jitter);
    policy.strategies.clear();
    let wanted: Vec<StrategyArg> = if a.strategies.is_empty() {
        let mut all = Vec::new();
        if !a.style_template.is_empty() {
            all.push(StrategyArg::Style);
        }
        all.push(StrategyArg::Jitter);
        if a.template.is_some() {
            all.push(StrategyArg::Template);
        }
        all
    } else {
        a.strategies.clone()
    };
    for s in wanted {
        match s {
            StrategyArg::Style => {
                policy.style = Some(style_model(&a.style_template)?);
                policy.strategies.push(Strategy::Style);
            }
            StrategyArg::Jitter => policy.strategies.push(Strategy::Jitter),
            StrategyArg::Template => {
                let path = a.template.as_ref().ok_or_else(|| usage("template strategy needs --template"))?;
                let template = read_rgb(path)?;
                policy.template = Some(stain::TemplateReference::from_image(
                    &template,
                    StainMatrix::he_default(),
                    &policy.macenko,
                )?);
                policy.strategies.push(Strategy::Template);
            }
        }
    }
    let out = stain::augment(&image, &policy, a.seed).map_err(|e| match e {
        cisca_core::Error::InvalidArgument(msg) => usage(msg),
        other => other.into(),
    })?;
    io::write_rgb_png(&a.out, &out.image)?;
    Ok(())
}
