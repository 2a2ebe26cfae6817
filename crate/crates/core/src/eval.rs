//! Benchmark metrics over line-delimited prediction/ground-truth files:
//! Acc@t for REC, COCO-style mAP for OVD, and Pass@1 for VQA.
//!
//! Records are one JSON object per line:
//!
//! ```text
//! {"id": "r1", "task": "REC", "pred": [x1,y1,x2,y2] | null, "gt": [x1,y1,x2,y2]}
//! {"id": "o1", "task": "OVD", "pred": [{"bbox": [...], "label": "..."}, ...] | null, "gt": [...]}
//! {"id": "v1", "task": "VQA", "pred": "text" | null, "gt": "text"}
//! ```
//!
//! Detections carry no confidence scores, so COCO ranking treats the list
//! order within each prediction as the confidence order (earlier entries
//! rank higher). Detections in different records that share a rank share a
//! confidence level and are evaluated as one precision/recall point, which
//! makes the metric independent of record order.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, Detection};
use crate::rewards::{vqa_reward, TaskPayload, TaskType};

/// Thresholds 0.5, 0.55, …, 0.95 used by the averaged mAP metric.
pub fn coco_threshold_range() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

/// One evaluation item: a prediction (absent on parse failure) and its
/// ground truth, both in the payload shape of the record's task.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub id: String,
    pub task: TaskType,
    pub pred: Option<TaskPayload>,
    pub gt: TaskPayload,
}

impl Serialize for EvalRecord {
    fn serialize<T: serde::Serializer>(&self, serializer: T) -> Result<T::Ok, T::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("EvalRecord", 4)?;
        s.serialize_field("id", &self.id)?;
        s.serialize_field("task", &self.task)?;
        s.serialize_field("pred", &self.pred)?;
        s.serialize_field("gt", &self.gt)?;
        s.end()
    }
}

impl EvalRecord {
    /// Parse one record from its JSON line, validating payload shapes
    /// against the declared task.
    pub fn from_json_line(line: &str) -> Result<Self, String> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            id: String,
            task: TaskType,
            pred: serde_json::Value,
            gt: serde_json::Value,
        }
        let wire: Wire = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let pred = if wire.pred.is_null() {
            None
        } else {
            Some(
                TaskPayload::from_value(wire.task, wire.pred)
                    .map_err(|e| format!("pred: {e}"))?,
            )
        };
        let gt = TaskPayload::from_value(wire.task, wire.gt).map_err(|e| format!("gt: {e}"))?;
        Ok(Self {
            id: wire.id,
            task: wire.task,
            pred,
            gt,
        })
    }
}

/// A malformed line, reported with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

/// Loaded records plus any lines skipped in lenient mode.
#[derive(Debug, Clone, Default)]
pub struct EvalLoad {
    pub records: Vec<EvalRecord>,
    pub skipped: Vec<LineIssue>,
}

/// File loading failure.
#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate record id `{id}`")]
    DuplicateId { line: usize, id: String },
}

/// Load a line-delimited record file.
///
/// Blank lines are ignored. In strict mode the first malformed line or
/// duplicate id aborts the load; in lenient mode offending lines are
/// skipped and reported in [`EvalLoad::skipped`].
pub fn load_eval_file(path: &Path, strict: bool) -> Result<EvalLoad, EvalError> {
    let file = File::open(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_eval_reader(BufReader::new(file), strict)
}

/// Loader over any buffered reader; see [`load_eval_file`].
pub fn load_eval_reader<R: BufRead>(reader: R, strict: bool) -> Result<EvalLoad, EvalError> {
    let mut load = EvalLoad::default();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| EvalError::Io {
            path: format!("<line {line_no}>"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match EvalRecord::from_json_line(&line) {
            Ok(record) => {
                if !seen_ids.insert(record.id.clone()) {
                    if strict {
                        return Err(EvalError::DuplicateId {
                            line: line_no,
                            id: record.id,
                        });
                    }
                    load.skipped.push(LineIssue {
                        line: line_no,
                        message: format!("duplicate record id `{}`", record.id),
                    });
                    continue;
                }
                load.records.push(record);
            }
            Err(message) => {
                if strict {
                    return Err(EvalError::Malformed {
                        line: line_no,
                        message,
                    });
                }
                load.skipped.push(LineIssue {
                    line: line_no,
                    message,
                });
            }
        }
    }
    Ok(load)
}

/// Metric computation failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("record `{id}` is {found}, expected {expected}")]
    TaskMismatch {
        id: String,
        expected: TaskType,
        found: TaskType,
    },
}

fn require_task(records: &[EvalRecord], expected: TaskType) -> Result<(), MetricError> {
    for r in records {
        if r.task != expected {
            return Err(MetricError::TaskMismatch {
                id: r.id.clone(),
                expected,
                found: r.task,
            });
        }
    }
    Ok(())
}

/// Percentage of REC records whose prediction IoU strictly exceeds `t`.
/// Parse failures count as misses; an empty record set scores 0.
pub fn acc_at_t(records: &[EvalRecord], t: f64) -> Result<f64, MetricError> {
    require_task(records, TaskType::Rec)?;
    if records.is_empty() {
        return Ok(0.0);
    }
    let hits = records
        .iter()
        .filter(|r| match (&r.pred, &r.gt) {
            (Some(TaskPayload::Box(p)), TaskPayload::Box(g)) => iou(p, g) > t,
            _ => false,
        })
        .count();
    Ok(100.0 * hits as f64 / records.len() as f64)
}

/// Percentage of VQA records whose prediction exactly matches the ground
/// truth after normalization.
pub fn pass_at_1(records: &[EvalRecord]) -> Result<f64, MetricError> {
    require_task(records, TaskType::Vqa)?;
    if records.is_empty() {
        return Ok(0.0);
    }
    let hits = records
        .iter()
        .filter(|r| match (&r.pred, &r.gt) {
            (Some(TaskPayload::Text(p)), TaskPayload::Text(g)) => vqa_reward::<f64>(p, g) == 1.0,
            _ => false,
        })
        .count();
    Ok(100.0 * hits as f64 / records.len() as f64)
}

/// One ranked detection of a single category, ready for matching.
struct RankedDetection<'a> {
    record_idx: usize,
    /// Position within its prediction list; lower ranks first.
    rank: usize,
    det: &'a Detection<f64>,
}

/// Cumulative true-positive and detection counts per confidence level, in
/// descending confidence order. Detections that share a confidence level
/// (the same list rank in different records) are evaluated together, which
/// keeps the metric independent of record order.
fn confidence_levels(ranked: &[RankedDetection<'_>], tp_flags: &[bool]) -> Vec<(usize, usize)> {
    let mut levels = Vec::new();
    let mut idx = 0;
    while idx < ranked.len() {
        let rank = ranked[idx].rank;
        let mut tp = 0usize;
        let mut n = 0usize;
        while idx < ranked.len() && ranked[idx].rank == rank {
            n += 1;
            if tp_flags[idx] {
                tp += 1;
            }
            idx += 1;
        }
        levels.push((tp, n));
    }
    levels
}

/// Average precision with 101-point interpolation (the COCO convention):
/// the mean over recall grid points 0.00, 0.01, …, 1.00 of the maximum
/// precision at or beyond each recall, over one precision/recall point per
/// confidence level.
fn average_precision_101(levels: &[(usize, usize)], num_gt: usize) -> f64 {
    debug_assert!(num_gt > 0);
    if levels.is_empty() {
        return 0.0;
    }
    let mut precisions = Vec::with_capacity(levels.len());
    let mut recalls = Vec::with_capacity(levels.len());
    let mut tp = 0usize;
    let mut seen = 0usize;
    for &(level_tp, level_n) in levels {
        tp += level_tp;
        seen += level_n;
        precisions.push(tp as f64 / seen as f64);
        recalls.push(tp as f64 / num_gt as f64);
    }
    // Monotone envelope: best precision at or beyond each cut.
    for k in (0..precisions.len().saturating_sub(1)).rev() {
        precisions[k] = precisions[k].max(precisions[k + 1]);
    }
    let mut total = 0.0;
    let mut cursor = 0usize;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        while cursor < recalls.len() && recalls[cursor] < r {
            cursor += 1;
        }
        if cursor < precisions.len() {
            total += precisions[cursor];
        }
    }
    total / 101.0
}

/// Match one category's ranked detections against its ground truths at one
/// IoU threshold, COCO-style: in confidence order, each detection claims
/// the unmatched same-image ground truth with the highest IoU at or above
/// the threshold.
fn tp_flags_at_threshold(
    ranked: &[RankedDetection<'_>],
    gts_by_record: &BTreeMap<usize, Vec<&Detection<f64>>>,
    threshold: f64,
) -> Vec<bool> {
    let mut matched: BTreeMap<usize, Vec<bool>> = gts_by_record
        .iter()
        .map(|(&rec, gts)| (rec, vec![false; gts.len()]))
        .collect();
    ranked
        .iter()
        .map(|rd| {
            let Some(gts) = gts_by_record.get(&rd.record_idx) else {
                return false;
            };
            let taken = matched.get_mut(&rd.record_idx).expect("keys mirror gts");
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if taken[gi] {
                    continue;
                }
                let overlap = iou(&rd.det.bbox, &gt.bbox);
                if overlap >= threshold && best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((gi, overlap));
                }
            }
            match best {
                Some((gi, _)) => {
                    taken[gi] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// Per-threshold mAP values for an OVD record set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapReport {
    /// `(threshold, mAP)` pairs in ascending threshold order.
    pub per_threshold: Vec<(f64, f64)>,
    /// Mean over the thresholds (the `mAP@[lo:hi]` aggregate).
    pub mean_over_range: f64,
    /// Ground-truth categories, in the normalized form used for matching.
    pub categories: Vec<String>,
}

/// COCO-style mAP over OVD records at the given IoU thresholds.
///
/// Categories come from the ground truth only; predictions with labels
/// absent from every ground truth do not create categories (they still hurt
/// nothing, as they belong to no evaluated category).
pub fn coco_map(records: &[EvalRecord], thresholds: &[f64]) -> Result<MapReport, MetricError> {
    require_task(records, TaskType::Ovd)?;

    let gts: Vec<&[Detection<f64>]> = records
        .iter()
        .map(|r| match &r.gt {
            TaskPayload::Detections(d) => d.as_slice(),
            _ => &[],
        })
        .collect();
    let preds: Vec<&[Detection<f64>]> = records
        .iter()
        .map(|r| match &r.pred {
            Some(TaskPayload::Detections(d)) => d.as_slice(),
            _ => &[],
        })
        .collect();

    let categories: BTreeSet<String> = gts
        .iter()
        .flat_map(|ds| ds.iter().map(|d| d.normalized_label()))
        .collect();

    let mut per_threshold = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut ap_sum = 0.0;
        for cat in &categories {
            let gts_by_record: BTreeMap<usize, Vec<&Detection<f64>>> = gts
                .iter()
                .enumerate()
                .map(|(ri, ds)| {
                    (
                        ri,
                        ds.iter().filter(|d| d.normalized_label() == *cat).collect(),
                    )
                })
                .filter(|(_, ds): &(usize, Vec<_>)| !ds.is_empty())
                .collect();
            let num_gt: usize = gts_by_record.values().map(Vec::len).sum();

            let mut ranked: Vec<RankedDetection<'_>> = preds
                .iter()
                .enumerate()
                .flat_map(|(ri, ds)| {
                    ds.iter()
                        .enumerate()
                        .filter(|(_, d)| d.normalized_label() == *cat)
                        .map(move |(rank, det)| RankedDetection {
                            record_idx: ri,
                            rank,
                            det,
                        })
                })
                .collect();
            // Confidence order: list position first, record order on ties
            // (the tie order cannot affect matching — tied detections live
            // in different records — and tied levels share one PR point).
            ranked.sort_by_key(|rd| (rd.rank, rd.record_idx));

            let flags = tp_flags_at_threshold(&ranked, &gts_by_record, t);
            ap_sum += average_precision_101(&confidence_levels(&ranked, &flags), num_gt);
        }
        let map = if categories.is_empty() {
            0.0
        } else {
            ap_sum / categories.len() as f64
        };
        per_threshold.push((t, map));
    }

    let mean_over_range = if per_threshold.is_empty() {
        0.0
    } else {
        per_threshold.iter().map(|(_, v)| v).sum::<f64>() / per_threshold.len() as f64
    };

    Ok(MapReport {
        per_threshold,
        mean_over_range,
        categories: categories.into_iter().collect(),
    })
}

/// Unified metric report for one task over one record file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub task: TaskType,
    pub n_items: usize,
    /// REC: threshold key (e.g. `"0.50"`) to Acc@t percentage.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub acc_at: BTreeMap<String, f64>,
    /// OVD: threshold key or range key (e.g. `"0.50:0.95"`) to mAP in [0,1].
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub map_values: BTreeMap<String, f64>,
    /// VQA: Pass@1 percentage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass_at_1: Option<f64>,
}

fn threshold_key(t: f64) -> String {
    format!("{t:.2}")
}

/// Compute the metric report for `records`, which must all carry `task`.
///
/// `thresholds` applies to REC (Acc@t cut-offs, default 0.5 and 0.7) and
/// OVD (mAP IoU thresholds, default 0.5:0.05:0.95); VQA ignores it.
pub fn evaluate(
    records: &[EvalRecord],
    task: TaskType,
    thresholds: Option<&[f64]>,
) -> Result<MetricReport, MetricError> {
    let mut report = MetricReport {
        task,
        n_items: records.len(),
        acc_at: BTreeMap::new(),
        map_values: BTreeMap::new(),
        pass_at_1: None,
    };
    match task {
        TaskType::Rec => {
            let default = [0.5, 0.7];
            let ts = thresholds.unwrap_or(&default);
            for &t in ts {
                report.acc_at.insert(threshold_key(t), acc_at_t(records, t)?);
            }
        }
        TaskType::Ovd => {
            let default = coco_threshold_range();
            let ts = thresholds.unwrap_or(&default);
            let map = coco_map(records, ts)?;
            for &(t, v) in &map.per_threshold {
                report.map_values.insert(threshold_key(t), v);
            }
            if let (Some((lo, _)), Some((hi, _))) =
                (map.per_threshold.first(), map.per_threshold.last())
            {
                if map.per_threshold.len() > 1 {
                    report.map_values.insert(
                        format!("{}:{}", threshold_key(*lo), threshold_key(*hi)),
                        map.mean_over_range,
                    );
                }
            }
        }
        TaskType::Vqa => {
            report.pass_at_1 = Some(pass_at_1(records)?);
        }
    }
    Ok(report)
}

impl MetricReport {
    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task: {}    items: {}", self.task, self.n_items);
        let _ = writeln!(out, "{:<16} {:>12}", "metric", "value");
        let _ = writeln!(out, "{}", "-".repeat(29));
        for (k, v) in &self.acc_at {
            let _ = writeln!(out, "{:<16} {:>11.2}%", format!("Acc@{k}"), v);
        }
        for (k, v) in &self.map_values {
            let name = if k.contains(':') {
                format!("mAP@[{k}]")
            } else {
                format!("mAP@{k}")
            };
            let _ = writeln!(out, "{name:<16} {v:>12.4}");
        }
        if let Some(p) = self.pass_at_1 {
            let _ = writeln!(out, "{:<16} {:>11.2}%", "Pass@1", p);
        }
        out
    }
}
