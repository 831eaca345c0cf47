//! Metrics for unsupervised segmentation and forgotten-action detection.
//!
//! Topics carry no labels, so a topic-to-class mapping is first built from
//! frame overlap on the training side and then applied to held-out videos.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::corpus::{Corpus, GroundTruth, VideoDocument};
use crate::detection::{extract_segments, ForgottenReport, Verdict};
use crate::error::{write_string, Error, Result};
use crate::geom::interval_iou;
use crate::gibbs::TrainedModel;
use crate::model::AssignmentState;

const MATCH_IOU: f64 = 0.4;

/// Per-frame action topic implied by the clip assignment: majority vote over
/// the clips covering each frame, ties to the lowest topic id. Frames past
/// the last clip (window truncation) inherit the preceding label.
pub fn frame_topics(doc: &VideoDocument, z1: &[usize]) -> Vec<usize> {
    let n_frames = doc.clips.iter().map(|c| c.end_frame + 1).max().unwrap_or(0);
    if n_frames == 0 {
        return Vec::new();
    }
    let k = z1.iter().copied().max().unwrap_or(0) + 1;
    let mut votes = vec![vec![0u32; k]; n_frames];
    for (clip, &z) in doc.clips.iter().zip(z1) {
        for f in clip.start_frame..=clip.end_frame {
            votes[f][z] += 1;
        }
    }
    let mut out = vec![0usize; n_frames];
    let mut last = 0usize;
    for f in 0..n_frames {
        let total: u32 = votes[f].iter().sum();
        if total == 0 {
            out[f] = last;
            continue;
        }
        let mut best = 0usize;
        for t in 1..k {
            if votes[f][t] > votes[f][best] {
                best = t;
            }
        }
        out[f] = best;
        last = best;
    }
    out
}

/// Topic-to-class assignment learned by frame overlap. Topics that never
/// cover a labeled frame map to nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMapping {
    pub topic_to_class: Vec<Option<usize>>,
}

impl ClusterMapping {
    pub fn apply(&self, topic: usize) -> Option<usize> {
        self.topic_to_class.get(topic).copied().flatten()
    }
}

/// Builds the mapping by counting frame overlap between predicted topics and
/// labels; each topic takes its most-overlapped class, ties to the lower
/// class label. Videos without labels contribute nothing.
pub fn map_clusters(
    frame_topics: &[Vec<usize>],
    ground_truth: &[Option<GroundTruth>],
    k: usize,
) -> ClusterMapping {
    let max_class = ground_truth
        .iter()
        .flatten()
        .flat_map(|g| g.action_frames.iter())
        .copied()
        .max();
    let Some(max_class) = max_class else {
        return ClusterMapping {
            topic_to_class: vec![None; k],
        };
    };
    let mut overlap = vec![vec![0u64; max_class + 1]; k];
    for (pred, gt) in frame_topics.iter().zip(ground_truth) {
        let Some(gt) = gt else { continue };
        for (p, &c) in pred.iter().zip(&gt.action_frames) {
            overlap[*p][c] += 1;
        }
    }
    let topic_to_class = overlap
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return None;
            }
            let mut best = 0usize;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            Some(best)
        })
        .collect();
    ClusterMapping { topic_to_class }
}

/// Maximal constant-label runs of a ground-truth frame sequence:
/// (start_frame, end_frame, class).
pub fn label_segments(labels: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let c = labels[start];
        let mut end = start;
        while end + 1 < labels.len() && labels[end + 1] == c {
            end += 1;
        }
        out.push((start, end, c));
        start = end + 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: usize,
    pub frame_acc: f64,
    pub seg_acc: f64,
    pub seg_ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Means over the classes present in the ground truth.
    pub frame_acc: f64,
    pub seg_acc: f64,
    pub seg_ap: f64,
    /// Forgotten-action accuracy over all graded videos, when reports exist.
    pub fa_acc: Option<f64>,
    /// Object-localization accuracy over videos with a ground-truth box.
    pub fo_acc: Option<f64>,
    pub per_class: Vec<ClassRow>,
}

struct PredSegment {
    doc: usize,
    start: usize,
    end: usize,
    class: usize,
    confidence: f64,
    order: usize,
}

/// Segmentation metrics of held-out videos under a trained mapping.
pub fn segmentation_metrics(
    docs: &[VideoDocument],
    states: &[AssignmentState],
    mapping: &ClusterMapping,
    k: usize,
) -> Vec<ClassRow> {
    let mut classes: Vec<usize> = Vec::new();
    for doc in docs {
        if let Some(gt) = &doc.ground_truth {
            for &c in &gt.action_frames {
                if !classes.contains(&c) {
                    classes.push(c);
                }
            }
        }
    }
    classes.sort_unstable();

    // Predicted segments with mapped classes and confidences, corpus order.
    let mut preds: Vec<PredSegment> = Vec::new();
    let mut gt_segs: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut per_frame: Vec<(Vec<usize>, Vec<Option<usize>>)> = Vec::new();
    for (i, (doc, state)) in docs.iter().zip(states).enumerate() {
        let Some(gt) = &doc.ground_truth else { continue };
        let pred_frames = frame_topics(doc, &state.z1);
        let graded = pred_frames.len().min(gt.action_frames.len());
        per_frame.push((
            gt.action_frames[..graded].to_vec(),
            pred_frames[..graded]
                .iter()
                .map(|&t| mapping.apply(t))
                .collect(),
        ));
        for (s, e, c) in label_segments(&gt.action_frames) {
            gt_segs.push((i, s, e, c));
        }
        for seg in extract_segments(doc, i, state) {
            let Some(class) = mapping.apply(seg.action_topic) else {
                continue;
            };
            let conf = if state.z1_prob.is_empty() {
                1.0 / k as f64
            } else {
                let span = &state.z1_prob[seg.start_clip..=seg.end_clip];
                span.iter().sum::<f64>() / span.len() as f64
            };
            preds.push(PredSegment {
                doc: i,
                start: seg.start_frame,
                end: seg.end_frame,
                class,
                confidence: conf,
                order: preds.len(),
            });
        }
    }

    classes
        .iter()
        .map(|&c| {
            let mut frames_total = 0u64;
            let mut frames_hit = 0u64;
            for (gt, pred) in &per_frame {
                for (g, p) in gt.iter().zip(pred) {
                    if *g == c {
                        frames_total += 1;
                        if *p == Some(c) {
                            frames_hit += 1;
                        }
                    }
                }
            }
            let frame_acc = if frames_total > 0 {
                frames_hit as f64 / frames_total as f64
            } else {
                0.0
            };

            let class_gt: Vec<&(usize, usize, usize, usize)> =
                gt_segs.iter().filter(|g| g.3 == c).collect();
            let class_pred: Vec<&PredSegment> = preds.iter().filter(|p| p.class == c).collect();

            let hit = class_gt
                .iter()
                .filter(|(doc, s, e, _)| {
                    class_pred.iter().any(|p| {
                        p.doc == *doc && interval_iou((p.start, p.end), (*s, *e)) >= MATCH_IOU
                    })
                })
                .count();
            let seg_acc = if class_gt.is_empty() {
                0.0
            } else {
                hit as f64 / class_gt.len() as f64
            };

            // Average precision: rank by confidence, greedily claim the best
            // still-unmatched ground-truth segment in the same video.
            let mut ranked = class_pred.clone();
            ranked.sort_by(|a, b| {
                b.confidence
                    .partial_cmp(&a.confidence)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.order.cmp(&b.order))
            });
            let mut claimed = vec![false; class_gt.len()];
            let mut tp = 0u64;
            let mut ap_sum = 0.0;
            for (rank, p) in ranked.iter().enumerate() {
                let mut best: Option<(usize, f64)> = None;
                for (gi, (doc, s, e, _)) in class_gt.iter().enumerate() {
                    if claimed[gi] || *doc != p.doc {
                        continue;
                    }
                    let iou = interval_iou((p.start, p.end), (*s, *e));
                    if iou >= MATCH_IOU && best.map_or(true, |(_, b)| iou > b) {
                        best = Some((gi, iou));
                    }
                }
                if let Some((gi, _)) = best {
                    claimed[gi] = true;
                    tp += 1;
                    ap_sum += tp as f64 / (rank + 1) as f64;
                }
            }
            let seg_ap = if class_gt.is_empty() {
                0.0
            } else {
                ap_sum / class_gt.len() as f64
            };

            ClassRow {
                class: c,
                frame_acc,
                seg_acc,
                seg_ap,
            }
        })
        .collect()
}

/// A forgotten-action verdict is correct when it matches the ground truth;
/// for a true positive the retrieved training segment must also be at least
/// half covered by frames labeled with a forgotten class of this video.
pub fn fa_accuracy(
    reports: &[&ForgottenReport],
    ground_truth: &[Option<GroundTruth>],
    model: &TrainedModel,
) -> Option<f64> {
    let mut graded = 0u64;
    let mut correct = 0u64;
    for (report, gt) in reports.iter().zip(ground_truth) {
        let Some(gt) = gt else { continue };
        graded += 1;
        if gt.forgotten.is_empty() {
            if report.verdict == Verdict::NoneForgotten {
                correct += 1;
            }
            continue;
        }
        if report.verdict != Verdict::Forgotten {
            continue;
        }
        let Some(seg) = &report.retrieved else { continue };
        let Some(Some(train_gt)) = model.train_ground_truth.get(seg.doc_index) else {
            continue;
        };
        let labels = &train_gt.action_frames;
        let hi = seg.end_frame.min(labels.len().saturating_sub(1));
        if seg.start_frame > hi {
            continue;
        }
        let span = &labels[seg.start_frame..=hi];
        let covered = gt.forgotten.iter().any(|f| {
            let hits = span.iter().filter(|&&c| c == f.action_class).count();
            hits as f64 / span.len() as f64 >= 0.5
        });
        if covered {
            correct += 1;
        }
    }
    (graded > 0).then(|| correct as f64 / graded as f64)
}

/// Localization accuracy over videos whose ground truth includes a box for a
/// forgotten action: the reported box must overlap it with IoU >= 0.4.
pub fn fo_accuracy(
    reports: &[&ForgottenReport],
    ground_truth: &[Option<GroundTruth>],
) -> Option<f64> {
    let mut graded = 0u64;
    let mut correct = 0u64;
    for (report, gt) in reports.iter().zip(ground_truth) {
        let Some(gt) = gt else { continue };
        let boxes: Vec<_> = gt.forgotten.iter().filter_map(|f| f.object_box).collect();
        if boxes.is_empty() {
            continue;
        }
        graded += 1;
        if report.verdict != Verdict::Forgotten {
            continue;
        }
        let Some(pred) = report.object_box else { continue };
        if boxes.iter().any(|b| pred.iou(b) >= MATCH_IOU) {
            correct += 1;
        }
    }
    (graded > 0).then(|| correct as f64 / graded as f64)
}

/// Full evaluation of a held-out corpus: segmentation metrics through the
/// training-side mapping, plus detection accuracies when reports are given
/// (aligned with the corpus, or empty to skip).
pub fn evaluate(
    model: &TrainedModel,
    test: &Corpus,
    states: &[AssignmentState],
    reports: &[ForgottenReport],
) -> Result<MetricsReport> {
    if states.len() != test.docs.len() {
        return Err(Error::invalid("one assignment state per test video required"));
    }
    if !reports.is_empty() && reports.len() != test.docs.len() {
        return Err(Error::invalid("reports must align with the test corpus"));
    }
    let mapping = map_clusters(
        &model.train_frame_topics,
        &model.train_ground_truth,
        model.params.k,
    );
    let per_class = segmentation_metrics(&test.docs, states, &mapping, model.params.k);
    let mean = |f: fn(&ClassRow) -> f64| -> f64 {
        if per_class.is_empty() {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / per_class.len() as f64
        }
    };
    let gt: Vec<Option<GroundTruth>> = test.docs.iter().map(|d| d.ground_truth.clone()).collect();
    let (fa, fo) = if reports.is_empty() {
        (None, None)
    } else {
        let refs: Vec<&ForgottenReport> = reports.iter().collect();
        (fa_accuracy(&refs, &gt, model), fo_accuracy(&refs, &gt))
    };
    Ok(MetricsReport {
        frame_acc: mean(|r| r.frame_acc),
        seg_acc: mean(|r| r.seg_acc),
        seg_ap: mean(|r| r.seg_ap),
        fa_acc: fa,
        fo_acc: fo,
        per_class,
    })
}

/// Writes the metrics table as `metric,class,value` rows.
pub fn write_metrics_csv(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut out = String::from("metric,class,value\n");
    for (name, field) in [
        ("frame_acc", 0usize),
        ("seg_acc", 1),
        ("seg_ap", 2),
    ] {
        for row in &report.per_class {
            let v = match field {
                0 => row.frame_acc,
                1 => row.seg_acc,
                _ => row.seg_ap,
            };
            out.push_str(&format!("{name},{},{v}\n", row.class));
        }
        let v = match field {
            0 => report.frame_acc,
            1 => report.seg_acc,
            _ => report.seg_ap,
        };
        out.push_str(&format!("{name},mean,{v}\n"));
    }
    if let Some(fa) = report.fa_acc {
        out.push_str(&format!("fa_acc,all,{fa}\n"));
    }
    if let Some(fo) = report.fo_acc {
        out.push_str(&format!("fo_acc,all,{fo}\n"));
    }
    write_string(path, &out)
}

/// Clip accuracy of unsupervised assignments against true topics, maximized
/// over all relabelings. Exhaustive over k! permutations, so k is capped at 8.
/// Returns the accuracy and the best map from predicted to true topic.
pub fn best_permutation_accuracy(
    pred: &[Vec<usize>],
    truth: &[Vec<usize>],
    k: usize,
) -> Result<(f64, Vec<usize>)> {
    if k == 0 || k > 8 {
        return Err(Error::invalid("permutation search supports 1..=8 topics"));
    }
    let mut confusion = vec![vec![0u64; k]; k];
    let mut total = 0u64;
    for (p_doc, t_doc) in pred.iter().zip(truth) {
        for (&p, &t) in p_doc.iter().zip(t_doc) {
            confusion[p][t] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::invalid("no clips to grade"));
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best_perm = perm.clone();
    let mut best = 0u64;
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; k];
    let score = |perm: &[usize], conf: &[Vec<u64>]| -> u64 {
        (0..k).map(|p| conf[p][perm[p]]).sum()
    };
    let mut s = score(&perm, &confusion);
    if s > best {
        best = s;
        best_perm = perm.clone();
    }
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            s = score(&perm, &confusion);
            if s > best {
                best = s;
                best_perm = perm.clone();
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok((best as f64 / total as f64, best_perm))
}
