//! Damage-level detection metrics.
//!
//! A ground truth counts as detected when its IoU with the *union* of one or
//! more predictions reaches the threshold. The union is grown greedily:
//! start from the best single prediction, then keep adding whichever
//! prediction raises the union-IoU the most until nothing improves it.
//! [`best_subset_oracle`] enumerates all subsets and is used to check the
//! greedy rule on small cases.
//!
//! Damage recall is `matched ground truths / ground truths`; damage
//! precision is `predictions contributing to any matched ground truth /
//! predictions`. One prediction may contribute to several ground truths.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polygon, SpanMask};
use crate::mask::RleMask;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.3;
pub const ORACLE_MAX_CANDIDATES: usize = 12;

fn default_score() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPrediction {
    pub id: String,
    #[serde(default = "default_score")]
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<RleMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Polygon>,
}

impl EvalPrediction {
    pub fn from_polygon(id: impl Into<String>, polygon: Polygon) -> Self {
        Self { id: id.into(), score: 1.0, mask: None, polygon: Some(polygon) }
    }

    pub fn from_mask(id: impl Into<String>, mask: RleMask) -> Self {
        Self { id: id.into(), score: 1.0, mask: Some(mask), polygon: None }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    fn spans(&self, width: u32, height: u32) -> Result<SpanMask> {
        match (&self.mask, &self.polygon) {
            (Some(m), None) => {
                if m.width != width || m.height != height {
                    return Err(Error::invalid(format!(
                        "prediction {}: mask is {}x{}, frame is {width}x{height}",
                        self.id, m.width, m.height
                    )));
                }
                SpanMask::from_rle(m)
            }
            (None, Some(p)) => SpanMask::from_polygon(p, width, height)
                .map_err(|e| Error::invalid(format!("prediction {}: {e}", self.id))),
            _ => Err(Error::invalid(format!(
                "prediction {}: exactly one of `mask` or `polygon` is required",
                self.id
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalImage {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub ground_truths: Vec<Polygon>,
    #[serde(default)]
    pub predictions: Vec<EvalPrediction>,
}

impl EvalImage {
    /// Drops predictions scoring below `min_score`.
    pub fn filter_by_score(&self, min_score: f64) -> EvalImage {
        EvalImage {
            predictions: self.predictions.iter().filter(|p| p.score >= min_score).cloned().collect(),
            ..self.clone()
        }
    }

    fn rasterize(&self) -> Result<(Vec<SpanMask>, Vec<SpanMask>)> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!("image {}: empty frame", self.image_id)));
        }
        let gts = self
            .ground_truths
            .iter()
            .enumerate()
            .map(|(k, g)| {
                SpanMask::from_polygon(g, self.width, self.height)
                    .map_err(|e| Error::invalid(format!("image {} ground truth {k}: {e}", self.image_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let preds = self
            .predictions
            .iter()
            .map(|p| p.spans(self.width, self.height))
            .collect::<Result<Vec<_>>>()?;
        Ok((gts, preds))
    }
}

/// Exact non-negative fraction, compared by cross-multiplication.
#[derive(Debug, Clone, Copy)]
struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    const ZERO: Ratio = Ratio { num: 0, den: 1 };

    fn iou(g: &SpanMask, u: &SpanMask) -> Ratio {
        let inter = g.intersection_area(u);
        let union = g.area() + u.area() - inter;
        if union == 0 {
            Ratio::ZERO
        } else {
            Ratio { num: inter, den: union }
        }
    }

    fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn cmp(self, o: Ratio) -> Ordering {
        (u128::from(self.num) * u128::from(o.den)).cmp(&(u128::from(o.num) * u128::from(self.den)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMatch {
    pub index: usize,
    pub matched: bool,
    pub union_iou: f64,
    pub best_single_iou: f64,
    /// Predictions selected for the union (empty when nothing overlaps).
    pub contributors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatch {
    pub id: String,
    pub is_true_positive: bool,
    /// Number of matched ground truths this prediction contributes to.
    pub matched_ground_truths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub image_id: String,
    pub iou_threshold: f64,
    pub ground_truths: Vec<GroundTruthMatch>,
    pub predictions: Vec<PredictionMatch>,
}

/// Threshold-independent result of greedy union growth for one ground truth.
#[derive(Debug, Clone)]
struct GrownUnion {
    selected: Vec<usize>,
    union_iou: Ratio,
    best_single: Ratio,
}

fn grow_union(g: &SpanMask, preds: &[SpanMask]) -> GrownUnion {
    let candidates: Vec<usize> = (0..preds.len()).filter(|&k| g.intersects(&preds[k])).collect();
    let mut best: Option<(usize, Ratio)> = None;
    for &k in &candidates {
        let r = Ratio::iou(g, &preds[k]);
        if best.is_none_or(|(_, b)| r.cmp(b) == Ordering::Greater) {
            best = Some((k, r));
        }
    }
    let Some((first, best_single)) = best else {
        return GrownUnion { selected: Vec::new(), union_iou: Ratio::ZERO, best_single: Ratio::ZERO };
    };
    let mut selected = vec![first];
    let mut union = preds[first].clone();
    let mut current = best_single;
    loop {
        let mut step: Option<(usize, Ratio, SpanMask)> = None;
        for &k in &candidates {
            if selected.contains(&k) {
                continue;
            }
            let grown = union.union(&preds[k]);
            let r = Ratio::iou(g, &grown);
            if r.cmp(current) == Ordering::Greater
                && step.as_ref().is_none_or(|(_, s, _)| r.cmp(*s) == Ordering::Greater)
            {
                step = Some((k, r, grown));
            }
        }
        match step {
            Some((k, r, grown)) => {
                selected.push(k);
                union = grown;
                current = r;
            }
            None => break,
        }
    }
    GrownUnion { selected, union_iou: current, best_single }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("IoU threshold {t} outside (0, 1]")))
    }
}

struct ImageUnions {
    image: EvalImage,
    unions: Vec<GrownUnion>,
}

fn image_unions(img: &EvalImage) -> Result<ImageUnions> {
    let (gts, preds) = img.rasterize()?;
    let unions = gts.iter().map(|g| grow_union(g, &preds)).collect();
    Ok(ImageUnions { image: img.clone(), unions })
}

fn classify(u: &ImageUnions, t: f64) -> MatchResult {
    let mut contributions = vec![0usize; u.image.predictions.len()];
    let ground_truths = u
        .unions
        .iter()
        .enumerate()
        .map(|(index, gu)| {
            let matched = gu.union_iou.value() >= t;
            if matched {
                for &k in &gu.selected {
                    contributions[k] += 1;
                }
            }
            GroundTruthMatch {
                index,
                matched,
                union_iou: gu.union_iou.value(),
                best_single_iou: gu.best_single.value(),
                contributors: gu.selected.iter().map(|&k| u.image.predictions[k].id.clone()).collect(),
            }
        })
        .collect();
    let predictions = u
        .image
        .predictions
        .iter()
        .zip(&contributions)
        .map(|(p, &c)| PredictionMatch {
            id: p.id.clone(),
            is_true_positive: c > 0,
            matched_ground_truths: c,
        })
        .collect();
    MatchResult { image_id: u.image.image_id.clone(), iou_threshold: t, ground_truths, predictions }
}

/// Matches every ground truth of one image against its predictions.
pub fn match_image(img: &EvalImage, iou_threshold: f64) -> Result<MatchResult> {
    check_threshold(iou_threshold)?;
    Ok(classify(&image_unions(img)?, iou_threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou_threshold: f64,
    pub n_images: usize,
    pub n_ground_truths: usize,
    pub n_predictions: usize,
    pub tp_ground_truths: usize,
    pub tp_predictions: usize,
    /// `None` when there are no ground truths.
    pub damage_recall: Option<f64>,
    /// `None` when there are no predictions.
    pub damage_precision: Option<f64>,
    /// True-positive predictions credited to more than one matched ground truth.
    pub shared_predictions: usize,
}

impl MetricsReport {
    fn from_matches(t: f64, matches: &[MatchResult]) -> Self {
        let n_ground_truths = matches.iter().map(|m| m.ground_truths.len()).sum();
        let n_predictions = matches.iter().map(|m| m.predictions.len()).sum();
        let tp_ground_truths =
            matches.iter().flat_map(|m| &m.ground_truths).filter(|g| g.matched).count();
        let tp_predictions =
            matches.iter().flat_map(|m| &m.predictions).filter(|p| p.is_true_positive).count();
        let shared_predictions =
            matches.iter().flat_map(|m| &m.predictions).filter(|p| p.matched_ground_truths > 1).count();
        let frac = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        MetricsReport {
            iou_threshold: t,
            n_images: matches.len(),
            n_ground_truths,
            n_predictions,
            tp_ground_truths,
            tp_predictions,
            damage_recall: frac(tp_ground_truths, n_ground_truths),
            damage_precision: frac(tp_predictions, n_predictions),
            shared_predictions,
        }
    }
}

fn all_unions(images: &[EvalImage]) -> Result<Vec<ImageUnions>> {
    if images.is_empty() {
        return Err(Error::invalid("evaluation needs at least one image"));
    }
    images.par_iter().map(image_unions).collect()
}

/// Micro-averaged damage recall and precision over a dataset.
pub fn evaluate_dataset(images: &[EvalImage], iou_threshold: f64) -> Result<MetricsReport> {
    Ok(evaluate_with_matches(images, iou_threshold)?.0)
}

/// Like [`evaluate_dataset`], also returning the per-image match dump.
pub fn evaluate_with_matches(
    images: &[EvalImage],
    iou_threshold: f64,
) -> Result<(MetricsReport, Vec<MatchResult>)> {
    check_threshold(iou_threshold)?;
    let unions = all_unions(images)?;
    let matches: Vec<MatchResult> = unions.iter().map(|u| classify(u, iou_threshold)).collect();
    Ok((MetricsReport::from_matches(iou_threshold, &matches), matches))
}

/// One report per threshold; thresholds must be strictly increasing in `(0, 1]`.
pub fn threshold_sweep(images: &[EvalImage], thresholds: &[f64]) -> Result<Vec<(f64, MetricsReport)>> {
    for &t in thresholds {
        check_threshold(t)?;
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sweep thresholds must be strictly increasing"));
    }
    let unions = all_unions(images)?;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let matches: Vec<MatchResult> = unions.iter().map(|u| classify(u, t)).collect();
            (t, MetricsReport::from_matches(t, &matches))
        })
        .collect())
}

/// An evaluation job as accepted by the CLI and the HTTP API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub images: Vec<EvalImage>,
    #[serde(default)]
    pub iou_threshold: Option<f64>,
    /// Predictions below this score are dropped before matching.
    #[serde(default)]
    pub score_threshold: Option<f64>,
}

impl EvalRequest {
    /// Accepts either a full request document or a bare list of images.
    pub fn from_json(doc: &str) -> Result<Self> {
        if doc.trim_start().starts_with('[') {
            let images = serde_json::from_str(doc)?;
            return Ok(EvalRequest { images, iou_threshold: None, score_threshold: None });
        }
        Ok(serde_json::from_str(doc)?)
    }

    pub fn evaluate(&self) -> Result<MetricsReport> {
        let t = self.iou_threshold.unwrap_or(DEFAULT_IOU_THRESHOLD);
        match self.score_threshold {
            None => evaluate_dataset(&self.images, t),
            Some(s) if (0.0..=1.0).contains(&s) => {
                let filtered: Vec<EvalImage> = self.images.iter().map(|i| i.filter_by_score(s)).collect();
                evaluate_dataset(&filtered, t)
            }
            Some(s) => Err(Error::invalid(format!("score threshold {s} outside [0, 1]"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Indices into the candidate list, ascending.
    pub subset: Vec<usize>,
    pub union_iou: f64,
}

/// Exhaustive search for the candidate subset maximizing union-IoU with `g`.
///
/// Pixels are bucketed by membership pattern (in `g`?, which candidates
/// cover it) with a per-row sweep, after which every subset is scored from
/// the pattern histogram alone. Ties prefer fewer candidates, then the
/// lexicographically smallest subset.
pub fn best_subset_oracle(
    g: &Polygon,
    candidates: &[EvalPrediction],
    width: u32,
    height: u32,
) -> Result<OracleResult> {
    if candidates.len() > ORACLE_MAX_CANDIDATES {
        return Err(Error::invalid(format!(
            "oracle supports at most {ORACLE_MAX_CANDIDATES} candidates, got {}",
            candidates.len()
        )));
    }
    let gm = SpanMask::from_polygon(g, width, height)?;
    let masks = candidates.iter().map(|c| c.spans(width, height)).collect::<Result<Vec<_>>>()?;

    let mut histogram: HashMap<(bool, u32), u64> = HashMap::new();
    let mut all_rows: Vec<u32> = gm.rows().map(|(y, _)| y).collect();
    for m in &masks {
        all_rows.extend(m.rows().map(|(y, _)| y));
    }
    all_rows.sort_unstable();
    all_rows.dedup();
    for y in all_rows {
        let g_row = gm.row(y);
        let c_rows: Vec<&[(u32, u32)]> = masks.iter().map(|m| m.row(y)).collect();
        let mut cuts: Vec<u32> = g_row.iter().flat_map(|&(a, b)| [a, b]).collect();
        for r in &c_rows {
            cuts.extend(r.iter().flat_map(|&(a, b)| [a, b]));
        }
        cuts.sort_unstable();
        cuts.dedup();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let covered = |spans: &[(u32, u32)]| spans.iter().any(|&(a, b)| a <= lo && hi <= b);
            let in_g = covered(g_row);
            let pattern = c_rows
                .iter()
                .enumerate()
                .filter(|(_, r)| covered(r))
                .fold(0u32, |acc, (k, _)| acc | (1 << k));
            if in_g || pattern != 0 {
                *histogram.entry((in_g, pattern)).or_default() += u64::from(hi - lo);
            }
        }
    }

    let mut best_set: u32 = 0;
    let mut best = Ratio::ZERO;
    for set in 1u32..(1u32 << candidates.len()) {
        let (mut inter, mut union) = (0u64, 0u64);
        for (&(in_g, pattern), &count) in &histogram {
            let hit = pattern & set != 0;
            if in_g && hit {
                inter += count;
            }
            if in_g || hit {
                union += count;
            }
        }
        let r = if union == 0 { Ratio::ZERO } else { Ratio { num: inter, den: union } };
        let better = match r.cmp(best) {
            Ordering::Greater => true,
            Ordering::Equal => {
                let (a, b) = (set.count_ones(), best_set.count_ones());
                best_set != 0 && (a < b || (a == b && subset_key(set) < subset_key(best_set)))
            }
            Ordering::Less => false,
        };
        if better {
            best = r;
            best_set = set;
        }
    }
    if best.num == 0 {
        return Ok(OracleResult { subset: Vec::new(), union_iou: 0.0 });
    }
    Ok(OracleResult { subset: subset_key(best_set), union_iou: best.value() })
}

fn subset_key(set: u32) -> Vec<usize> {
    (0..32).filter(|k| set & (1 << k) != 0).collect()
}
