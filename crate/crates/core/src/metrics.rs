//! Segmentation, detection, classification and counting metrics over pairs
//! of label maps.
//!
//! Empty-image conventions:
//!
//! * Dice, AJI and PQ of an empty GT against an empty prediction are 1.
//! * P/R/F1 with nothing to detect and nothing detected are (1, 1, 1); with
//!   no detections P is 1, with no GT instances R is 1.
//! * PQ with no true positives but some FP/FN is 0 (as are DQ and SQ).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::min_cost_assignment;
use crate::error::{arg_err, shape_err, Result};
use crate::grid::{instance_centroids, LabelMap};
use crate::postprocess::InstanceTypeTable;

/// Strict IoU threshold for panoptic matching.
pub const IOU_THRESHOLD: f64 = 0.5;

fn check_shapes(gt: &LabelMap, pred: &LabelMap) -> Result<()> {
    if gt.shape() != pred.shape() {
        return shape_err(format!("gt {:?} vs pred {:?}", gt.shape(), pred.shape()));
    }
    Ok(())
}

/// Areas and pairwise intersections of two label maps.
#[derive(Debug, Clone)]
pub struct Overlap {
    pub gt_ids: Vec<u32>,
    pub pred_ids: Vec<u32>,
    pub gt_area: Vec<u64>,
    pub pred_area: Vec<u64>,
    /// Per GT index: `(pred index, intersection)` sorted by pred index.
    pub intersections: Vec<Vec<(usize, u64)>>,
}

impl Overlap {
    pub fn new(gt: &LabelMap, pred: &LabelMap) -> Result<Self> {
        check_shapes(gt, pred)?;
        let gt_ids = gt.ids();
        let pred_ids = pred.ids();
        let mut gt_area = vec![0u64; gt_ids.len()];
        let mut pred_area = vec![0u64; pred_ids.len()];
        let mut pairs: HashMap<(usize, usize), u64> = HashMap::new();
        for (&g, &p) in gt.as_slice().iter().zip(pred.as_slice()) {
            let gi = (g != 0).then(|| gt_ids.binary_search(&g).unwrap());
            let pi = (p != 0).then(|| pred_ids.binary_search(&p).unwrap());
            if let Some(gi) = gi {
                gt_area[gi] += 1;
            }
            if let Some(pi) = pi {
                pred_area[pi] += 1;
            }
            if let (Some(gi), Some(pi)) = (gi, pi) {
                *pairs.entry((gi, pi)).or_insert(0) += 1;
            }
        }
        let mut intersections = vec![Vec::new(); gt_ids.len()];
        for ((gi, pi), n) in pairs {
            intersections[gi].push((pi, n));
        }
        for row in &mut intersections {
            row.sort_unstable();
        }
        Ok(Overlap {
            gt_ids,
            pred_ids,
            gt_area,
            pred_area,
            intersections,
        })
    }

    pub fn union(&self, gi: usize, pi: usize, inter: u64) -> u64 {
        self.gt_area[gi] + self.pred_area[pi] - inter
    }
}

/// Foreground Dice of the binarized maps; 1 when both are empty.
pub fn dice_fg(gt: &LabelMap, pred: &LabelMap) -> Result<f64> {
    check_shapes(gt, pred)?;
    let (mut a, mut b, mut both) = (0u64, 0u64, 0u64);
    for (&g, &p) in gt.as_slice().iter().zip(pred.as_slice()) {
        a += (g != 0) as u64;
        b += (p != 0) as u64;
        both += (g != 0 && p != 0) as u64;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (a + b) as f64)
}

/// Aggregated Jaccard Index.
///
/// GT instances are visited in ascending id order; each takes the
/// predicted instance of highest IoU (ties to the lower pred id, predicted
/// instances may be reused). Matched intersections form the numerator,
/// matched unions plus unmatched GT areas plus the areas of predicted
/// instances never chosen form the denominator.
pub fn aji(gt: &LabelMap, pred: &LabelMap) -> Result<f64> {
    let ov = Overlap::new(gt, pred)?;
    let mut used = vec![false; ov.pred_ids.len()];
    let (mut num, mut den) = (0u64, 0u64);
    for (gi, row) in ov.intersections.iter().enumerate() {
        let mut best: Option<(usize, u64, u64)> = None;
        for &(pi, inter) in row {
            let uni = ov.union(gi, pi, inter);
            let better = match best {
                None => true,
                // inter/uni > b_inter/b_uni, exact
                Some((_, bi, bu)) => (inter as u128) * (bu as u128) > (bi as u128) * (uni as u128),
            };
            if better {
                best = Some((pi, inter, uni));
            }
        }
        match best {
            Some((pi, inter, uni)) => {
                num += inter;
                den += uni;
                used[pi] = true;
            }
            None => den += ov.gt_area[gi],
        }
    }
    den += ov
        .pred_area
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(&a, _)| a)
        .sum::<u64>();
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub gt: u32,
    pub pred: u32,
    /// IoU or centroid distance, depending on the matcher.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_gt: Vec<u32>,
    pub unmatched_pred: Vec<u32>,
}

impl MatchResult {
    fn from_pairs(mut pairs: Vec<MatchPair>, gt_ids: &[u32], pred_ids: &[u32]) -> Self {
        pairs.sort_by_key(|p| p.gt);
        let gset: BTreeSet<u32> = pairs.iter().map(|p| p.gt).collect();
        let pset: BTreeSet<u32> = pairs.iter().map(|p| p.pred).collect();
        MatchResult {
            unmatched_gt: gt_ids.iter().copied().filter(|g| !gset.contains(g)).collect(),
            unmatched_pred: pred_ids.iter().copied().filter(|p| !pset.contains(p)).collect(),
            pairs,
        }
    }

    pub fn tp(&self) -> usize {
        self.pairs.len()
    }

    pub fn fp(&self) -> usize {
        self.unmatched_pred.len()
    }

    pub fn fn_(&self) -> usize {
        self.unmatched_gt.len()
    }

    pub fn score_sum(&self) -> f64 {
        self.pairs.iter().map(|p| p.score).sum()
    }
}

/// All pairs with IoU strictly above 0.5; such pairs are necessarily
/// one-to-one.
pub fn match_by_iou(gt: &LabelMap, pred: &LabelMap) -> Result<MatchResult> {
    let ov = Overlap::new(gt, pred)?;
    let mut pairs = Vec::new();
    for (gi, row) in ov.intersections.iter().enumerate() {
        for &(pi, inter) in row {
            let uni = ov.union(gi, pi, inter);
            if 2 * inter > uni {
                pairs.push(MatchPair {
                    gt: ov.gt_ids[gi],
                    pred: ov.pred_ids[pi],
                    score: inter as f64 / uni as f64,
                });
            }
        }
    }
    debug_assert!({
        let preds: BTreeSet<u32> = pairs.iter().map(|p| p.pred).collect();
        preds.len() == pairs.len()
    });
    Ok(MatchResult::from_pairs(pairs, &ov.gt_ids, &ov.pred_ids))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// One-to-one centroid matching: among all matchings that only use pairs
/// at distance ≤ `radius`, the one with the most pairs and, among those,
/// the smallest total distance.
pub fn match_by_centroid(gt: &LabelMap, pred: &LabelMap, radius: f64) -> Result<MatchResult> {
    check_shapes(gt, pred)?;
    if !(radius > 0.0) {
        return arg_err(format!("match radius must be positive, got {radius}"));
    }
    let gs = instance_centroids(gt);
    let ps = instance_centroids(pred);
    let (n, m) = (gs.len(), ps.len());
    let r2 = radius * radius;

    // bipartite candidate graph; nodes 0..n are GT, n..n+m predictions
    let mut parent: Vec<usize> = (0..n + m).collect();
    let mut edges = Vec::new();
    for (i, g) in gs.iter().enumerate() {
        for (j, p) in ps.iter().enumerate() {
            let d2 = (g.row - p.row).powi(2) + (g.col - p.col).powi(2);
            if d2 <= r2 {
                edges.push((i, j, d2.sqrt()));
                let (a, b) = (find(&mut parent, i), find(&mut parent, n + j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for &(i, j, _) in &edges {
        let root = find(&mut parent, i);
        let entry = groups.entry(root).or_default();
        entry.0.push(i);
        entry.1.push(j);
    }
    let dist: HashMap<(usize, usize), f64> = edges.iter().map(|&(i, j, d)| ((i, j), d)).collect();

    let mut pairs = Vec::new();
    for (_, (mut rows, mut cols)) in groups {
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        let transpose = rows.len() > cols.len();
        let (a, b) = if transpose { (&cols, &rows) } else { (&rows, &cols) };
        let big = (a.len() as f64 + 1.0) * radius + 1.0;
        let mut costs = Vec::with_capacity(a.len() * b.len());
        for &x in a.iter() {
            for &y in b.iter() {
                let key = if transpose { (y, x) } else { (x, y) };
                costs.push(dist.get(&key).copied().unwrap_or(big));
            }
        }
        for (ai, bi) in min_cost_assignment(&costs, a.len(), b.len()).into_iter().enumerate() {
            let key = if transpose { (b[bi], a[ai]) } else { (a[ai], b[bi]) };
            if let Some(&d) = dist.get(&key) {
                pairs.push(MatchPair {
                    gt: gs[key.0].id,
                    pred: ps[key.1].id,
                    score: d,
                });
            }
        }
    }
    let gt_ids: Vec<u32> = gs.iter().map(|s| s.id).collect();
    let pred_ids: Vec<u32> = ps.iter().map(|s| s.id).collect();
    Ok(MatchResult::from_pairs(pairs, &gt_ids, &pred_ids))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

pub fn prf1_counts(tp: usize, fp: usize, fn_: usize) -> Prf1 {
    let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
    let p = if tp + fp == 0.0 { 1.0 } else { tp / (tp + fp) };
    let r = if tp + fn_ == 0.0 { 1.0 } else { tp / (tp + fn_) };
    let f1 = if tp + fp + fn_ == 0.0 {
        1.0
    } else {
        tp / (tp + 0.5 * (fp + fn_))
    };
    Prf1 { p, r, f1 }
}

pub fn prf1(m: &MatchResult) -> Prf1 {
    prf1_counts(m.tp(), m.fp(), m.fn_())
}

/// Poolable panoptic-quality counts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PqCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub iou_sum: f64,
}

impl PqCounts {
    pub fn from_match(m: &MatchResult) -> Self {
        PqCounts {
            tp: m.tp(),
            fp: m.fp(),
            fn_: m.fn_(),
            iou_sum: m.score_sum(),
        }
    }

    pub fn merge(self, o: PqCounts) -> PqCounts {
        PqCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            iou_sum: self.iou_sum + o.iou_sum,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }

    pub fn scores(&self) -> Pq {
        if self.is_empty() {
            return Pq { dq: 1.0, sq: 1.0, pq: 1.0 };
        }
        if self.tp == 0 {
            return Pq { dq: 0.0, sq: 0.0, pq: 0.0 };
        }
        let tp = self.tp as f64;
        let dq = tp / (tp + 0.5 * (self.fp + self.fn_) as f64);
        let sq = self.iou_sum / tp;
        Pq { dq, sq, pq: dq * sq }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pq {
    pub dq: f64,
    pub sq: f64,
    pub pq: f64,
}

pub fn pq_counts(gt: &LabelMap, pred: &LabelMap) -> Result<PqCounts> {
    Ok(PqCounts::from_match(&match_by_iou(gt, pred)?))
}

pub fn pq(gt: &LabelMap, pred: &LabelMap) -> Result<Pq> {
    Ok(pq_counts(gt, pred)?.scores())
}

/// Keeps only the instances whose type is `class`.
pub fn restrict_to_class(labels: &LabelMap, types: &InstanceTypeTable, class: u32) -> LabelMap {
    let mut keep: Vec<u32> = types
        .instances
        .iter()
        .filter(|row| row.type_id == class)
        .map(|row| row.id)
        .collect();
    keep.sort_unstable();
    labels.retain_ids(&keep)
}

/// One image of an evaluation set.
#[derive(Debug, Clone)]
pub struct ImageEval {
    pub name: String,
    pub gt: LabelMap,
    pub pred: LabelMap,
    pub gt_types: Option<InstanceTypeTable>,
    pub pred_types: Option<InstanceTypeTable>,
    pub tissue: Option<String>,
}

impl ImageEval {
    pub fn untyped(name: impl Into<String>, gt: LabelMap, pred: LabelMap) -> Self {
        ImageEval {
            name: name.into(),
            gt,
            pred,
            gt_types: None,
            pred_types: None,
            tissue: None,
        }
    }

    fn typed(&self) -> Option<(&InstanceTypeTable, &InstanceTypeTable)> {
        Some((self.gt_types.as_ref()?, self.pred_types.as_ref()?))
    }

    fn class_counts(&self, class: u32) -> Result<PqCounts> {
        let (gtt, prt) = self.typed().expect("typed image");
        pq_counts(
            &restrict_to_class(&self.gt, gtt, class),
            &restrict_to_class(&self.pred, prt, class),
        )
    }
}

/// Class-wise PQ with TP/FP/FN and IoU sums pooled over the whole set;
/// `None` if the class never occurs in GT or predictions.
pub fn pq_plus_per_class(images: &[ImageEval], class: u32) -> Result<Option<f64>> {
    let pooled = images
        .par_iter()
        .map(|im| im.class_counts(class))
        .try_reduce(PqCounts::default, |a, b| Ok(a.merge(b)))?;
    Ok((!pooled.is_empty()).then(|| pooled.scores().pq))
}

/// Tissue-balanced multi-class and binary PQ.
///
/// Per image, mPQ is the mean PQ over classes present in the GT (images
/// without any GT class are left out) and bPQ is the class-agnostic PQ.
/// Both are averaged per tissue, then across tissues.
pub fn mpq_pannuke(images: &[ImageEval]) -> Result<(Option<f64>, f64)> {
    let per_image: Vec<(String, Option<f64>, f64)> = images
        .par_iter()
        .map(|im| {
            let bpq = pq(&im.gt, &im.pred)?.pq;
            let mpq = match (im.typed(), &im.gt_types) {
                (Some(_), Some(gtt)) => {
                    let present: BTreeSet<u32> = gtt
                        .instances
                        .iter()
                        .filter(|row| im.gt.as_slice().contains(&row.id))
                        .map(|row| row.type_id)
                        .collect();
                    if present.is_empty() {
                        None
                    } else {
                        let mut sum = 0.0;
                        for &c in &present {
                            sum += im.class_counts(c)?.scores().pq;
                        }
                        Some(sum / present.len() as f64)
                    }
                }
                _ => None,
            };
            Ok((im.tissue.clone().unwrap_or_default(), mpq, bpq))
        })
        .collect::<Result<_>>()?;

    let mut by_tissue: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (tissue, mpq, bpq) in &per_image {
        let e = by_tissue.entry(tissue.as_str()).or_default();
        if let Some(v) = mpq {
            e.0.push(*v);
        }
        e.1.push(*bpq);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mpq_tissues: Vec<f64> = by_tissue.values().filter(|e| !e.0.is_empty()).map(|e| mean(&e.0)).collect();
    let bpq_tissues: Vec<f64> = by_tissue.values().map(|e| mean(&e.1)).collect();
    let mpq = (!mpq_tissues.is_empty()).then(|| mean(&mpq_tissues));
    let bpq = if bpq_tissues.is_empty() { 1.0 } else { mean(&bpq_tissues) };
    Ok((mpq, bpq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum R2Mode {
    /// Coefficient of determination of the least-squares line fitted to
    /// (true, predicted) counts.
    #[default]
    Ols,
    /// `1 − Σ(true − pred)² / Σ(true − mean)²`, i.e. scored against the
    /// identity line.
    Identity,
}

/// R² between true and predicted counts.
///
/// With constant true counts (zero total sum of squares) the value is 1
/// when the predictions equal the true counts and 0 otherwise.
pub fn r2_counts(truth: &[f64], predicted: &[f64], mode: R2Mode) -> Result<f64> {
    if truth.len() != predicted.len() {
        return shape_err(format!("{} true vs {} predicted counts", truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return arg_err("no counts");
    }
    let n = truth.len() as f64;
    let mx = truth.iter().sum::<f64>() / n;
    let sxx: f64 = truth.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        let equal = truth.iter().zip(predicted).all(|(a, b)| a == b);
        return Ok(if equal { 1.0 } else { 0.0 });
    }
    match mode {
        R2Mode::Identity => {
            let rss: f64 = truth.iter().zip(predicted).map(|(a, b)| (a - b).powi(2)).sum();
            Ok(1.0 - rss / sxx)
        }
        R2Mode::Ols => {
            let my = predicted.iter().sum::<f64>() / n;
            let syy: f64 = predicted.iter().map(|y| (y - my).powi(2)).sum();
            if syy == 0.0 {
                return Ok(0.0);
            }
            let sxy: f64 = truth.iter().zip(predicted).map(|(x, y)| (x - mx) * (y - my)).sum();
            let slope = sxy / sxx;
            let intercept = my - slope * mx;
            let rss: f64 = truth
                .iter()
                .zip(predicted)
                .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
                .sum();
            Ok(1.0 - rss / syy)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScores {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tissue: Option<String>,
    pub dice: f64,
    pub aji: f64,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub dq: f64,
    pub sq: f64,
    pub pq: f64,
    /// Centroid-matching counts.
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n_gt: usize,
    pub n_pred: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: u32,
    pub pq_plus: Option<f64>,
    pub r2: Option<f64>,
    pub counts: PqCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub dice: f64,
    pub aji: f64,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub dq: f64,
    pub sq: f64,
    pub pq: f64,
    pub mpq_plus: Option<f64>,
    pub mpq: Option<f64>,
    pub bpq: f64,
    pub r2: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub images: usize,
    pub match_radius: f64,
    pub iou_threshold: f64,
    pub r2_mode: R2Mode,
    pub conventions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub meta: ReportMeta,
    pub per_image: Vec<ImageScores>,
    pub per_class: Vec<ClassScores>,
    pub aggregate: Aggregates,
}

pub fn score_image(im: &ImageEval, radius: f64) -> Result<ImageScores> {
    let centroid = match_by_centroid(&im.gt, &im.pred, radius)?;
    let det = prf1(&centroid);
    let seg = pq(&im.gt, &im.pred)?;
    Ok(ImageScores {
        name: im.name.clone(),
        tissue: im.tissue.clone(),
        dice: dice_fg(&im.gt, &im.pred)?,
        aji: aji(&im.gt, &im.pred)?,
        p: det.p,
        r: det.r,
        f1: det.f1,
        dq: seg.dq,
        sq: seg.sq,
        pq: seg.pq,
        tp: centroid.tp(),
        fp: centroid.fp(),
        fn_: centroid.fn_(),
        n_gt: im.gt.instance_count(),
        n_pred: im.pred.instance_count(),
    })
}

fn class_count(labels: &LabelMap, types: &InstanceTypeTable, class: u32) -> f64 {
    restrict_to_class(labels, types, class).instance_count() as f64
}

/// Evaluates a set of images. Classification metrics are computed when
/// every image carries both GT and predicted type tables.
pub fn evaluate(images: &[ImageEval], radius: f64, r2_mode: R2Mode) -> Result<MetricsReport> {
    let per_image: Vec<ImageScores> = images
        .par_iter()
        .map(|im| score_image(im, radius))
        .collect::<Result<_>>()?;

    let typed = !images.is_empty() && images.iter().all(|im| im.typed().is_some());
    let mut per_class = Vec::new();
    if typed {
        let classes: BTreeSet<u32> = images
            .iter()
            .flat_map(|im| {
                let (g, p) = im.typed().unwrap();
                g.instances.iter().chain(&p.instances).map(|row| row.type_id)
            })
            .collect();
        for &class in &classes {
            let counts = images
                .par_iter()
                .map(|im| im.class_counts(class))
                .try_reduce(PqCounts::default, |a, b| Ok(a.merge(b)))?;
            let (truth, predicted): (Vec<f64>, Vec<f64>) = images
                .iter()
                .map(|im| {
                    let (g, p) = im.typed().unwrap();
                    (class_count(&im.gt, g, class), class_count(&im.pred, p, class))
                })
                .unzip();
            per_class.push(ClassScores {
                class,
                pq_plus: (!counts.is_empty()).then(|| counts.scores().pq),
                r2: Some(r2_counts(&truth, &predicted, r2_mode)?),
                counts,
            });
        }
    }

    let mean = |f: &dyn Fn(&ImageScores) -> f64| -> f64 {
        if per_image.is_empty() {
            0.0
        } else {
            per_image.iter().map(f).sum::<f64>() / per_image.len() as f64
        }
    };
    let mean_opt = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);

    let (mpq, bpq) = mpq_pannuke(images)?;
    let r2 = if typed {
        mean_opt(per_class.iter().filter_map(|c| c.r2).collect())
    } else if images.is_empty() {
        None
    } else {
        let (truth, predicted): (Vec<f64>, Vec<f64>) = per_image
            .iter()
            .map(|s| (s.n_gt as f64, s.n_pred as f64))
            .unzip();
        Some(r2_counts(&truth, &predicted, r2_mode)?)
    };

    let aggregate = Aggregates {
        dice: mean(&|s| s.dice),
        aji: mean(&|s| s.aji),
        p: mean(&|s| s.p),
        r: mean(&|s| s.r),
        f1: mean(&|s| s.f1),
        dq: mean(&|s| s.dq),
        sq: mean(&|s| s.sq),
        pq: mean(&|s| s.pq),
        mpq_plus: mean_opt(per_class.iter().filter_map(|c| c.pq_plus).collect()),
        mpq: if typed { mpq } else { None },
        bpq,
        r2,
        tp: per_image.iter().map(|s| s.tp).sum(),
        fp: per_image.iter().map(|s| s.fp).sum(),
        fn_: per_image.iter().map(|s| s.fn_).sum(),
    };

    Ok(MetricsReport {
        meta: ReportMeta {
            images: images.len(),
            match_radius: radius,
            iou_threshold: IOU_THRESHOLD,
            r2_mode,
            conventions: vec![
                "dice, aji and pq are 1 for an empty prediction of an empty ground truth".into(),
                "p = 1 without detections, r = 1 without ground-truth instances".into(),
                "per-image scores are averaged over all images, empty ones included".into(),
                "centroid matching maximises matched pairs within the radius, then minimises total distance".into(),
                "iou matching is strict (iou > 0.5)".into(),
            ],
        },
        per_image,
        per_class,
        aggregate,
    })
}
