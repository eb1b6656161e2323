use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use rotbox::anchors::generate_pyramid;
use rotbox::dfpn::Reuse;
use rotbox::nms::{proposal_filter, POST_NMS_TOPK, PRE_NMS_TOPK, PROPOSAL_NMS_IOU};
use rotbox::perf::{run_bench, BenchConfig};
use rotbox::roi_align::DEFAULT_SAMPLES_PER_BIN;
use rotbox::{
    assign, decode, dfpn_forward, encode, evaluate, hrect, merge_scene, multiscale_pool,
    multitask_loss, plan_tiles, pr_curve, sample, AnchorConfig, AssignerConfig, Assignment,
    Criterion, DeltaVector, Detection, DfpnWeights, EvalConfig, EvalImage, HRect, LossConfig,
    LossEntry, NmsMode, RotatedBox, ScoredBox, Tensor, TileSpec,
};

use crate::error::{CliError, Result};
use crate::io::{
    create_output, envelope, finish, inline_or_file, open_input, read_csv, read_json, tile_file,
    write_json, AnchorRow, LabelRow, WindowRow, COORDINATES,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Rotated,
    Circumscribed,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Rotated => Criterion::Rotated,
            CriterionArg::Circumscribed => Criterion::Circumscribed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Rotated,
    Hrect,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReuseArg {
    Lateral,
    Smoothed,
}

fn config_or_default<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

fn io_err(path: Option<&Path>) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::File {
        path: path.map_or("<stdout>".into(), |p| p.display().to_string()),
        source,
    }
}

/// Skew IoU of two boxes given as JSON literals or files.
#[derive(Debug, Args)]
pub struct IouArgs {
    /// First box, `{"x":..,"y":..,"w":..,"h":..,"theta":..}` (degrees) or a path to one.
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long, value_enum, default_value = "rotated")]
    criterion: CriterionArg,
}

impl IouArgs {
    pub fn run(self) -> Result<()> {
        let a: RotatedBox = inline_or_file(&self.a)?;
        let b: RotatedBox = inline_or_file(&self.b)?;
        let iou = Criterion::from(self.criterion).iou(&a, &b);
        #[derive(Serialize)]
        struct Out {
            iou: f64,
        }
        write_json(None, &Out { iou })
    }
}

/// Top-K then greedy NMS over a JSON array of scored boxes.
#[derive(Debug, Args)]
pub struct NmsArgs {
    /// JSON array of `{x, y, w, h, theta, score}`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = PROPOSAL_NMS_IOU)]
    iou: f64,
    #[arg(long, default_value_t = PRE_NMS_TOPK)]
    pre_topk: usize,
    #[arg(long, default_value_t = POST_NMS_TOPK)]
    post_topk: usize,
    #[arg(long, value_enum, default_value = "rotated")]
    mode: ModeArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl NmsArgs {
    pub fn run(self) -> Result<()> {
        let dets: Vec<Detection> = read_json(&self.input)?;
        let items: Vec<ScoredBox> = dets
            .iter()
            .enumerate()
            .map(|(i, d)| ScoredBox::new(d.boxed, d.score, i))
            .collect();
        let mode = match self.mode {
            ModeArg::Rotated => NmsMode::Rotated,
            ModeArg::Hrect => NmsMode::Hrect,
        };
        let kept = proposal_filter(&items, self.pre_topk, self.post_topk, self.iou, mode);
        #[derive(Serialize)]
        struct Out {
            kept: Vec<usize>,
            detections: Vec<Detection>,
        }
        let detections = kept.iter().map(|&i| dets[i]).collect();
        write_json(self.out.as_deref(), &Out { kept, detections })
    }
}

/// Rotation anchors for every level of an image, one CSV row each.
#[derive(Debug, Args)]
pub struct AnchorsArgs {
    /// JSON anchor configuration; defaults to the standard 5 levels × 8 ratios × 6 angles.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Image height and width in pixels.
    #[arg(long, num_args = 2, value_names = ["H", "W"], required = true)]
    image_size: Vec<u32>,
    /// CSV with columns level,row,col,x,y,w,h,theta.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl AnchorsArgs {
    pub fn run(self) -> Result<()> {
        let cfg: AnchorConfig = config_or_default(self.config.as_deref())?;
        cfg.validate()?;
        let grids = cfg.grids_for_image(self.image_size[0], self.image_size[1]);
        let anchors = generate_pyramid(&cfg, &grids)?;
        let out = create_output(self.out.as_deref())?;
        let mut w = csv::Writer::from_writer(out);
        for a in &anchors {
            w.serialize(AnchorRow {
                level: a.level.to_string(),
                row: a.row,
                col: a.col,
                x: a.boxed.x(),
                y: a.boxed.y(),
                w: a.boxed.w(),
                h: a.boxed.h(),
                theta: a.boxed.theta(),
            })?;
        }
        log::info!("{} anchors", anchors.len());
        let out = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        finish(out, self.out.as_deref())
    }
}

#[derive(Debug, Args)]
pub struct LinesArgs {
    /// JSON lines; `-` reads stdin.
    #[arg(long = "in", default_value = "-")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct EncodeLine {
    anchor: RotatedBox,
    target: RotatedBox,
}

#[derive(Deserialize)]
struct DecodeLine {
    anchor: RotatedBox,
    delta: DeltaVector,
}

/// Apply `f` to each non-blank JSON line of the input and write one JSON line per result.
fn map_lines<I, O, F>(args: &LinesArgs, mut f: F) -> Result<()>
where
    I: for<'de> Deserialize<'de>,
    O: Serialize,
    F: FnMut(I) -> Result<O>,
{
    let input = open_input(&args.input)?;
    let path = args.out.as_deref();
    let mut out = create_output(path)?;
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|source| CliError::File {
            path: args.input.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wrap = |message: String| CliError::Line {
            line: n + 1,
            message,
        };
        let record: I = serde_json::from_str(&line).map_err(|e| wrap(e.to_string()))?;
        let result = f(record).map_err(|e| wrap(e.to_string()))?;
        serde_json::to_writer(&mut out, &envelope(&result))?;
        writeln!(out).map_err(io_err(path))?;
    }
    finish(out, path)
}

/// Regression targets for `{"anchor": box, "target": box}` lines.
#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    io: LinesArgs,
}

impl EncodeArgs {
    pub fn run(self) -> Result<()> {
        #[derive(Serialize)]
        struct Out {
            delta: DeltaVector,
        }
        map_lines(&self.io, |l: EncodeLine| {
            Ok(Out {
                delta: encode(&l.anchor, &l.target),
            })
        })
    }
}

/// Boxes for `{"anchor": box, "delta": {t_x, t_y, t_w, t_h, t_theta}}` lines.
#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    io: LinesArgs,
}

impl DecodeArgs {
    pub fn run(self) -> Result<()> {
        #[derive(Serialize)]
        struct Out {
            #[serde(rename = "box")]
            boxed: RotatedBox,
        }
        map_lines(&self.io, |l: DecodeLine| {
            Ok(Out {
                boxed: decode(&l.anchor, &l.delta)?,
            })
        })
    }
}

/// Label every anchor against the ground truth.
#[derive(Debug, Args)]
pub struct AssignArgs {
    /// CSV as written by `anchors`.
    #[arg(long)]
    anchors: PathBuf,
    /// JSON array of boxes.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV with columns index,label,matched_gt,iou.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl AssignArgs {
    pub fn run(self) -> Result<()> {
        let cfg: AssignerConfig = config_or_default(self.config.as_deref())?;
        cfg.validate()?;
        let rows: Vec<AnchorRow> = read_csv(&self.anchors)?;
        let anchors = rows
            .iter()
            .map(|r| RotatedBox::new(r.x, r.y, r.w, r.h, r.theta))
            .collect::<rotbox::Result<Vec<_>>>()?;
        let gts: Vec<RotatedBox> = read_json(&self.gt)?;
        let labels = assign(&anchors, &gts, &cfg);
        let out = create_output(self.out.as_deref())?;
        let mut w = csv::Writer::from_writer(out);
        for (index, a) in labels.iter().enumerate() {
            w.serialize(LabelRow {
                index,
                label: a.label,
                matched_gt: a.matched_gt,
                iou: a.iou,
            })?;
        }
        let out = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        finish(out, self.out.as_deref())
    }
}

/// Seeded positive/negative mini-batch from `assign` output.
#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SampleArgs {
    pub fn run(self) -> Result<()> {
        let cfg: AssignerConfig = config_or_default(self.config.as_deref())?;
        cfg.validate()?;
        let rows: Vec<LabelRow> = read_csv(&self.labels)?;
        if let Some((n, r)) = rows.iter().enumerate().find(|(n, r)| r.index != *n) {
            return Err(CliError::Line {
                line: n + 2,
                message: format!("expected index {n}, found {}", r.index),
            });
        }
        let assignments: Vec<Assignment> = rows
            .iter()
            .map(|r| Assignment {
                label: r.label,
                matched_gt: r.matched_gt,
                iou: r.iou,
            })
            .collect();
        let batch = sample(&assignments, &cfg, self.seed);
        write_json(self.out.as_deref(), &batch)
    }
}

/// Multitask loss of a JSON batch.
#[derive(Debug, Args)]
pub struct LossArgs {
    /// JSON array of `{probs, label, predicted, target, is_positive}`.
    #[arg(long)]
    batch: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl LossArgs {
    pub fn run(self) -> Result<()> {
        let cfg: LossConfig = config_or_default(self.config.as_deref())?;
        let batch: Vec<LossEntry> = read_json(&self.batch)?;
        write_json(self.out.as_deref(), &multitask_loss(&batch, &cfg)?)
    }
}

/// Dense pyramid from C2..C5 tensor files; writes `<prefix>2.rbt` .. `<prefix>6.rbt`.
#[derive(Debug, Args)]
pub struct DfpnArgs {
    #[arg(long, num_args = 4, value_names = ["C2", "C3", "C4", "C5"], required = true)]
    features: Vec<PathBuf>,
    /// Directory with lateral{i}.rbt, lateral{i}_bias.rbt, smooth{i}.rbt, smooth{i}_bias.rbt for i in 2..=5.
    #[arg(long, conflicts_with = "seed")]
    weights: Option<PathBuf>,
    /// Draw random weights from this seed instead of loading them.
    #[arg(long)]
    seed: Option<u64>,
    /// Pyramid width when drawing random weights.
    #[arg(long, default_value_t = rotbox::dfpn::PYRAMID_CHANNELS)]
    width: usize,
    #[arg(long, value_enum, default_value = "lateral")]
    reuse: ReuseArg,
    #[arg(long)]
    out_prefix: String,
}

impl DfpnArgs {
    pub fn run(self) -> Result<()> {
        let loaded = self
            .features
            .iter()
            .map(Tensor::load)
            .collect::<rotbox::Result<Vec<_>>>()?;
        let features: [Tensor; 4] = loaded
            .try_into()
            .map_err(|_| CliError::Usage("need exactly four feature maps".into()))?;
        let mut weights = match (&self.weights, self.seed) {
            (Some(dir), _) => DfpnWeights::load_dir(dir)?,
            (None, Some(seed)) => {
                let mut ch = [0; 4];
                for (c, f) in ch.iter_mut().zip(&features) {
                    *c = f.chw()?.0;
                }
                DfpnWeights::random(seed, ch, self.width)
            }
            (None, None) => return Err(CliError::Usage("pass --weights DIR or --seed N".into())),
        };
        weights.reuse = match self.reuse {
            ReuseArg::Lateral => Reuse::Lateral,
            ReuseArg::Smoothed => Reuse::Smoothed,
        };
        let pyramid = dfpn_forward(&features, &weights)?;
        #[derive(Serialize)]
        struct LevelOut {
            level: String,
            dims: Vec<usize>,
            path: String,
        }
        let mut levels = Vec::new();
        for (i, t) in pyramid.levels.iter().enumerate() {
            let path = format!("{}{}.rbt", self.out_prefix, i + 2);
            t.save(&path)?;
            levels.push(LevelOut {
                level: format!("P{}", i + 2),
                dims: t.dims().to_vec(),
                path,
            });
        }
        #[derive(Serialize)]
        struct Out {
            levels: Vec<LevelOut>,
        }
        write_json(None, &Out { levels })
    }
}

/// Multi-shape ROI Align of one proposal; the output is a rank-1 tensor of 145·C values
/// (7×7, then 3×16, then 16×3, each channel-major).
#[derive(Debug, Args)]
pub struct RoiAlignArgs {
    #[arg(long)]
    feature: PathBuf,
    /// Box JSON literal or file, in image pixels.
    #[arg(long)]
    proposal: String,
    #[arg(long, default_value_t = 4.0)]
    stride: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_BIN)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

impl RoiAlignArgs {
    pub fn run(self) -> Result<()> {
        let feature = Tensor::load(&self.feature)?;
        let proposal: RotatedBox = inline_or_file(&self.proposal)?;
        let pooled = multiscale_pool(&feature, &proposal, self.stride, self.samples)?;
        let flat = pooled.flattened();
        let t = Tensor::new(vec![flat.len()], flat)?;
        t.save(&self.out)?;
        #[derive(Serialize)]
        struct Out {
            roi: HRect,
            dims: Vec<usize>,
            parts: Vec<Vec<usize>>,
        }
        write_json(
            None,
            &Out {
                roi: hrect(&proposal),
                dims: t.dims().to_vec(),
                parts: pooled.parts.iter().map(|p| p.dims().to_vec()).collect(),
            },
        )
    }
}

#[derive(Debug, Deserialize)]
struct EvalInput {
    images: Vec<EvalImage>,
}

/// Recall, precision and F-measure over `{"images": [...]}`.
#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, default_value_t = 0.5)]
    score: f64,
    #[arg(long, value_enum, default_value = "rotated")]
    criterion: CriterionArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl EvalArgs {
    pub fn run(self) -> Result<()> {
        let input: EvalInput = read_json(&self.input)?;
        let cfg = EvalConfig {
            iou_threshold: self.iou,
            score_threshold: self.score,
            criterion: self.criterion.into(),
        };
        write_json(self.out.as_deref(), &evaluate(&input.images, &cfg))
    }
}

/// Precision and recall at a list of score thresholds, as CSV.
#[derive(Debug, Args)]
pub struct PrCurveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, value_enum, default_value = "rotated")]
    criterion: CriterionArg,
    /// Comma-separated score thresholds; defaults to 0, 0.05, .., 1.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    /// CSV with columns threshold,precision,recall.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl PrCurveArgs {
    pub fn run(self) -> Result<()> {
        let input: EvalInput = read_json(&self.input)?;
        let thresholds = if self.thresholds.is_empty() {
            (0..=20).map(|i| i as f64 / 20.0).collect()
        } else {
            self.thresholds
        };
        let cfg = EvalConfig {
            iou_threshold: self.iou,
            criterion: self.criterion.into(),
            ..Default::default()
        };
        let out = create_output(self.out.as_deref())?;
        let mut w = csv::Writer::from_writer(out);
        for p in pr_curve(&input.images, &cfg, &thresholds) {
            w.serialize(p)?;
        }
        let out = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        finish(out, self.out.as_deref())
    }
}

/// Overlapping windows covering a large scene, as CSV.
#[derive(Debug, Args)]
pub struct TilePlanArgs {
    #[arg(long)]
    scene_h: u32,
    #[arg(long)]
    scene_w: u32,
    #[arg(long, default_value_t = 600)]
    tile_h: u32,
    #[arg(long, default_value_t = 1000)]
    tile_w: u32,
    #[arg(long, default_value_t = 0.1)]
    overlap: f64,
    /// CSV with columns index,xmin,ymin,xmax,ymax after a `#` line stating the axis convention.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl TilePlanArgs {
    pub fn run(self) -> Result<()> {
        let spec = TileSpec {
            tile_h: self.tile_h,
            tile_w: self.tile_w,
            overlap_fraction: self.overlap,
            scene_h: self.scene_h,
            scene_w: self.scene_w,
        };
        let windows = plan_tiles(&spec)?;
        let path = self.out.as_deref();
        let mut out = create_output(path)?;
        writeln!(
            out,
            "# {COORDINATES}; windows span [xmin, xmax) x [ymin, ymax)"
        )
        .map_err(io_err(path))?;
        let mut w = csv::Writer::from_writer(out);
        for (index, r) in windows.iter().enumerate() {
            w.serialize(WindowRow {
                index,
                xmin: r.xmin,
                ymin: r.ymin,
                xmax: r.xmax,
                ymax: r.ymax,
            })?;
        }
        let out = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
        finish(out, path)
    }
}

/// Translate per-tile detections into the scene and suppress cross-tile duplicates.
#[derive(Debug, Args)]
pub struct MergeArgs {
    /// CSV as written by `tile-plan`.
    #[arg(long)]
    windows: PathBuf,
    /// Directory of `tile_<index>.json` files, each a JSON array of scored boxes in tile
    /// coordinates. Missing files mean no detections.
    #[arg(long)]
    dets_dir: PathBuf,
    #[arg(long, default_value_t = rotbox::nms::DETECTION_NMS_IOU)]
    iou: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl MergeArgs {
    pub fn run(self) -> Result<()> {
        let rows: Vec<WindowRow> = read_csv(&self.windows)?;
        let mut by_index = BTreeMap::new();
        for r in &rows {
            let rect = HRect::new(r.xmin, r.ymin, r.xmax, r.ymax)?;
            if by_index.insert(r.index, rect).is_some() {
                return Err(CliError::Usage(format!("window {} listed twice", r.index)));
            }
        }
        let mut windows = Vec::with_capacity(by_index.len());
        let mut per_tile = Vec::with_capacity(by_index.len());
        for (index, rect) in by_index {
            let file = tile_file(&self.dets_dir, index);
            let dets: Vec<Detection> = if file.exists() {
                read_json(&file)?
            } else {
                Vec::new()
            };
            windows.push(rect);
            per_tile.push(dets);
        }
        let detections = merge_scene(&per_tile, &windows, self.iou)?;
        #[derive(Serialize)]
        struct Out {
            coordinates: &'static str,
            detections: Vec<Detection>,
        }
        write_json(
            self.out.as_deref(),
            &Out {
                coordinates: COORDINATES,
                detections,
            },
        )
    }
}

/// Time skew IoU and rotated NMS on generated workloads.
#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 200_000)]
    iou_pairs: usize,
    #[arg(long, default_value_t = 10_000)]
    nms_boxes: usize,
    #[arg(long, default_value_t = 0.5)]
    nms_iou: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BenchArgs {
    pub fn run(self) -> Result<()> {
        let report = run_bench(&BenchConfig {
            iou_pairs: self.iou_pairs,
            nms_boxes: self.nms_boxes,
            nms_iou: self.nms_iou,
            seed: self.seed,
        });
        write_json(self.out.as_deref(), &report)
    }
}
