//! Forgotten-action detection.
//!
//! A query video is segmented by its action-topic assignment. If some topic
//! never appears, each (missing action, object topic, boundary time) tuple is
//! scored under the model; the top tuples pull matching training segments,
//! and an appearance check around the candidate boundary decides whether the
//! action was actually skipped or the video simply never needed it.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::corpus::VideoDocument;
use crate::error::{from_json_str, read_to_string, write_string, Error, Result};
use crate::geom::Rect;
use crate::gibbs::{infer, TrainConfig, TrainedModel};
use crate::model::{omega_log_pdf_floored, AssignmentState, ModelParams};
use crate::numeric::{euclidean, logsumexp};

/// An image region proposal with its pooled appearance feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    #[serde(flatten)]
    pub rect: Rect,
    pub feature: Vec<f64>,
}

/// Clip-feature windows at the two ends and the middle of a segment, used by
/// the appearance check. Each window holds the concatenated human and object
/// features of `max(1, round(0.2 * len))` clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameWindows {
    pub front: Vec<Vec<f64>>,
    pub middle: Vec<Vec<f64>>,
    pub tail: Vec<Vec<f64>>,
}

/// A maximal run of clips sharing one action topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_index: usize,
    pub video_id: String,
    pub start_clip: usize,
    pub end_clip: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    pub action_topic: usize,
    /// Majority object topic over the run; ties break to the lowest id.
    pub object_topic: usize,
    pub start_t: f64,
    pub end_t: f64,
    /// Mean object feature over the run's clips.
    pub object_feature: Vec<f64>,
    pub windows: FrameWindows,
}

fn clip_feature(doc: &VideoDocument, idx: usize) -> Vec<f64> {
    let c = &doc.clips[idx];
    let mut f = Vec::with_capacity(c.human_feat.len() + c.object_feat.len());
    f.extend_from_slice(&c.human_feat);
    f.extend_from_slice(&c.object_feat);
    f
}

fn window_len(len: usize) -> usize {
    ((0.2 * len as f64).round() as usize).max(1)
}

fn windows_for(doc: &VideoDocument, start: usize, end: usize) -> FrameWindows {
    let len = end - start + 1;
    let w = window_len(len);
    let gather = |lo: usize| -> Vec<Vec<f64>> {
        (lo..lo + w).map(|i| clip_feature(doc, i)).collect()
    };
    FrameWindows {
        front: gather(start),
        middle: gather(start + (len - w) / 2),
        tail: gather(start + len - w),
    }
}

/// Splits a document into maximal constant-action-topic runs.
pub fn extract_segments(doc: &VideoDocument, doc_index: usize, state: &AssignmentState) -> Vec<Segment> {
    let n = doc.clips.len();
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let topic = state.z1[start];
        let mut end = start;
        while end + 1 < n && state.z1[end + 1] == topic {
            end += 1;
        }
        let members = end - start + 1;
        let dim = doc.clips[start].object_feat.len();
        let mut object_feature = vec![0.0; dim];
        let mut z2_counts = vec![0usize; state.z2.iter().copied().max().unwrap_or(0) + 1];
        for i in start..=end {
            for (j, x) in doc.clips[i].object_feat.iter().enumerate() {
                object_feature[j] += x;
            }
            z2_counts[state.z2[i]] += 1;
        }
        for x in &mut object_feature {
            *x /= members as f64;
        }
        let object_topic = z2_counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(p, _)| p)
            .unwrap_or(0);
        out.push(Segment {
            doc_index,
            video_id: doc.video_id.clone(),
            start_clip: start,
            end_clip: end,
            start_frame: doc.clips[start].start_frame,
            end_frame: doc.clips[end].end_frame,
            action_topic: topic,
            object_topic,
            start_t: doc.clips[start].t,
            end_t: doc.clips[end].t,
            object_feature,
            windows: windows_for(doc, start, end),
        });
        start = end + 1;
    }
    out
}

// ── appearance score ──

fn window_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    debug_assert!(!a.is_empty() && !b.is_empty());
    let mut total = 0.0;
    for x in a {
        for y in b {
            total += euclidean(x, y);
        }
    }
    total / (a.len() * b.len()) as f64
}

/// Appearance evidence that the candidate training segment's action is absent
/// around the query boundary: its middle should look unlike the query context
/// while its entry/exit match the surrounding query segments.
pub fn forget_score(
    candidate: &FrameWindows,
    query_tail_before: &[Vec<f64>],
    query_front_after: &[Vec<f64>],
) -> f64 {
    let d_mid = 0.5
        * (window_distance(&candidate.middle, query_front_after)
            + window_distance(&candidate.middle, query_tail_before));
    let d_ctx = window_distance(&candidate.front, query_tail_before)
        .max(window_distance(&candidate.tail, query_front_after));
    d_mid - d_ctx
}

// ── model score for a missing tuple ──

/// Log score (unnormalized) of inserting missing action topic `k_m` with
/// object topic `p_m` at boundary time `t_s`, under the query's assignment
/// and the trained parameters. Errors if `k_m` already appears in the query.
pub fn missing_topic_score(
    doc: &VideoDocument,
    state: &AssignmentState,
    params: &ModelParams,
    k_m: usize,
    p_m: usize,
    t_s: f64,
    cfg: &TrainConfig,
) -> Result<f64> {
    if k_m >= params.k || p_m >= params.p {
        return Err(Error::invalid("topic index out of range"));
    }
    if state.z1.contains(&k_m) {
        return Err(Error::invalid(format!(
            "action topic {k_m} is present in the query"
        )));
    }
    let mut score = state.pi1[k_m].ln() + state.pi2[p_m].ln();
    if !cfg.ablate_time {
        let log_floor = cfg.density_floor.ln();
        for (n, clip) in doc.clips.iter().enumerate() {
            let a = state.z1[n];
            score += omega_log_pdf_floored(clip.t - t_s, &params.theta[a][k_m], log_floor);
            score += omega_log_pdf_floored(t_s - clip.t, &params.theta[k_m][a], log_floor);
        }
    }
    let nw = params.counts.n_human_words();
    let no = params.counts.n_object_words();
    let mut h_sum = 0.0;
    for w in 0..nw {
        h_sum += params.word_prob_h(k_m, w);
    }
    let mut o_sum = 0.0;
    for w in 0..no {
        o_sum += params.word_prob_o(k_m, p_m, w);
    }
    debug_assert!(
        (h_sum - 1.0).abs() < 1e-9 && (o_sum - 1.0).abs() < 1e-9,
        "word tables out of balance: {h_sum} {o_sum}"
    );
    score += h_sum.ln() + o_sum.ln();
    Ok(score)
}

// ── region localization ──

/// Picks the region group best matching a target appearance feature: regions
/// within 1.5x the minimum feature distance are kept, touching or overlapping
/// survivors merge into groups, and the largest group's bounding box wins.
pub fn locate_object(regions: &[Region], target_feature: &[f64]) -> Result<Rect> {
    if regions.is_empty() {
        return Err(Error::invalid("no regions to search"));
    }
    for r in regions {
        if r.feature.len() != target_feature.len() {
            return Err(Error::invalid(format!(
                "region feature dimension {} does not match target {}",
                r.feature.len(),
                target_feature.len()
            )));
        }
    }
    let dists: Vec<f64> = regions
        .iter()
        .map(|r| euclidean(&r.feature, target_feature))
        .collect();
    let d_min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let kept: Vec<usize> = (0..regions.len())
        .filter(|&i| dists[i] <= 1.5 * d_min)
        .collect();
    let mut visited = vec![false; kept.len()];
    let mut best: Option<Rect> = None;
    for s in 0..kept.len() {
        if visited[s] {
            continue;
        }
        let mut stack = vec![s];
        visited[s] = true;
        let mut bounds = regions[kept[s]].rect;
        while let Some(i) = stack.pop() {
            for j in 0..kept.len() {
                if !visited[j] && regions[kept[i]].rect.touches(&regions[kept[j]].rect) {
                    visited[j] = true;
                    bounds = bounds.union_bounds(&regions[kept[j]].rect);
                    stack.push(j);
                }
            }
        }
        let better = match &best {
            None => true,
            Some(b) => bounds.area() > b.area(),
        };
        if better {
            best = Some(bounds);
        }
    }
    Ok(best.expect("at least one region survives"))
}

// ── detection driver ──

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    /// Minimum appearance score to call an action forgotten.
    pub threshold: f64,
    pub infer_iters: usize,
    pub seed: u64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            threshold: 0.0,
            infer_iters: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Forgotten,
    NoneForgotten,
}

/// One scored (missing action, object topic, boundary) tuple. `score` is the
/// probability after normalizing over all tuples of the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgottenCandidate {
    pub action_topic: usize,
    pub object_topic: usize,
    pub t_s: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgottenReport {
    pub video_id: String,
    pub verdict: Verdict,
    /// Why the verdict is none-forgotten, when it is.
    pub reason: Option<String>,
    /// Top tuples considered, best first.
    pub candidates: Vec<ForgottenCandidate>,
    /// The tuple whose retrieval won, when retrieval ran.
    pub best: Option<ForgottenCandidate>,
    /// Training segment retrieved for the winning tuple.
    pub retrieved: Option<Segment>,
    pub forget_score: Option<f64>,
    pub object_box: Option<Rect>,
}

impl ForgottenReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::runtime(format!("serialize report: {e}")))?;
        write_string(path, &body)
    }

    pub fn load(path: &Path) -> Result<ForgottenReport> {
        let body = read_to_string(path)?;
        from_json_str(&body, path)
    }

    fn none(video_id: &str, reason: &str, candidates: Vec<ForgottenCandidate>) -> ForgottenReport {
        ForgottenReport {
            video_id: video_id.to_string(),
            verdict: Verdict::NoneForgotten,
            reason: Some(reason.to_string()),
            candidates,
            best: None,
            retrieved: None,
            forget_score: None,
            object_box: None,
        }
    }
}

const TOP_TUPLES: usize = 3;

/// Runs inference on the query and then the detection decision.
pub fn detect(model: &TrainedModel, doc: &VideoDocument, opts: &DetectOptions) -> Result<ForgottenReport> {
    let state = infer(model, doc, opts.infer_iters, opts.seed)?;
    detect_with_state(model, doc, &state, opts)
}

/// Detection decision for a query whose assignment was already inferred.
pub fn detect_with_state(
    model: &TrainedModel,
    doc: &VideoDocument,
    state: &AssignmentState,
    opts: &DetectOptions,
) -> Result<ForgottenReport> {
    let params = &model.params;
    let segments = extract_segments(doc, 0, state);
    let mut present = vec![false; params.k];
    for &z in &state.z1 {
        present[z] = true;
    }
    let missing: Vec<usize> = (0..params.k).filter(|&k| !present[k]).collect();
    if missing.is_empty() {
        return Ok(ForgottenReport::none(&doc.video_id, "all-topics-present", Vec::new()));
    }
    if segments.len() < 2 {
        return Ok(ForgottenReport::none(&doc.video_id, "no-candidates", Vec::new()));
    }

    // Boundary times: midpoints between adjacent segments, remembering the
    // segment on each side for the appearance windows.
    let boundaries: Vec<(f64, usize)> = (0..segments.len() - 1)
        .map(|i| ((segments[i].end_t + segments[i + 1].start_t) / 2.0, i))
        .collect();

    struct Tuple {
        k: usize,
        p: usize,
        t_s: f64,
        left: usize,
        log_score: f64,
        prob: f64,
    }
    let mut tuples = Vec::new();
    for &k_m in &missing {
        for p_m in 0..params.p {
            for &(t_s, left) in &boundaries {
                let log_score =
                    missing_topic_score(doc, state, params, k_m, p_m, t_s, &model.config)?;
                tuples.push(Tuple {
                    k: k_m,
                    p: p_m,
                    t_s,
                    left,
                    log_score,
                    prob: 0.0,
                });
            }
        }
    }
    let logs: Vec<f64> = tuples.iter().map(|t| t.log_score).collect();
    let lse = logsumexp(&logs);
    for t in &mut tuples {
        t.prob = if lse.is_finite() {
            (t.log_score - lse).exp()
        } else {
            1.0 / logs.len() as f64
        };
    }
    tuples.sort_by(|a, b| {
        b.prob
            .partial_cmp(&a.prob)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.t_s.partial_cmp(&b.t_s).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.k.cmp(&b.k))
            .then(a.p.cmp(&b.p))
    });
    tuples.truncate(TOP_TUPLES);
    let candidates: Vec<ForgottenCandidate> = tuples
        .iter()
        .map(|t| ForgottenCandidate {
            action_topic: t.k,
            object_topic: t.p,
            t_s: t.t_s,
            score: t.prob,
        })
        .collect();

    // Retrieval: training segments matching a top tuple's topic pair, scored
    // by the appearance check at that tuple's boundary. First strict maximum
    // wins, scanning tuples by rank and training segments in corpus order.
    let mut best_score = f64::NEG_INFINITY;
    let mut best_pair: Option<(usize, &Segment)> = None;
    for (rank, t) in tuples.iter().enumerate() {
        let qt = &segments[t.left].windows.tail;
        let qf = &segments[t.left + 1].windows.front;
        for seg in model.train_segments.iter().flatten() {
            if seg.action_topic == t.k && seg.object_topic == t.p {
                let score = forget_score(&seg.windows, qt, qf);
                if score > best_score {
                    best_score = score;
                    best_pair = Some((rank, seg));
                }
            }
        }
    }
    let (rank, retrieved) = match best_pair {
        Some(x) => x,
        None => return Ok(ForgottenReport::none(&doc.video_id, "no-candidates", candidates)),
    };
    let best = candidates[rank].clone();
    if !(best_score >= opts.threshold) {
        return Ok(ForgottenReport {
            video_id: doc.video_id.clone(),
            verdict: Verdict::NoneForgotten,
            reason: Some("below-threshold".to_string()),
            candidates,
            best: Some(best),
            retrieved: Some(retrieved.clone()),
            forget_score: Some(best_score),
            object_box: None,
        });
    }
    let object_box = if doc.regions.is_empty() {
        None
    } else {
        Some(locate_object(&doc.regions, &retrieved.object_feature)?)
    };
    Ok(ForgottenReport {
        video_id: doc.video_id.clone(),
        verdict: Verdict::Forgotten,
        reason: None,
        candidates,
        best: Some(best),
        retrieved: Some(retrieved.clone()),
        forget_score: Some(best_score),
        object_box,
    })
}
