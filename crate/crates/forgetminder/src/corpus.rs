//! Raw videos to discrete documents.
//!
//! A video arrives as per-frame feature pairs (human pose descriptor, object
//! appearance descriptor). Overlapping fixed-length windows pool those frames
//! into clips, each clip is quantized against a k-means dictionary per
//! channel, and the result is a document of (human word, object word,
//! timestamp) triples ready for the sampler.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::detection::Region;
use crate::error::{from_json_str, read_to_string, write_string, Error, Result};
use crate::geom::Rect;
use crate::numeric::euclidean;

// ── frame and clip types ──

/// One frame's feature pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub human: Vec<f64>,
    pub object: Vec<f64>,
}

/// A pooled window of consecutive frames. `t` is the clip's normalized
/// center time, strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub start_frame: usize,
    pub end_frame: usize,
    pub human_feat: Vec<f64>,
    pub object_feat: Vec<f64>,
    pub t: f64,
}

/// Quantization codebook: one center per word id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    pub centers: Vec<Vec<f64>>,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_string(path, &serde_json::to_string_pretty(self).expect("dictionary serializes"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let dict: Dictionary = from_json_str(&text, path)?;
        if dict.centers.is_empty() {
            return Err(Error::invalid(format!(
                "dictionary {} has no centers",
                path.display()
            )));
        }
        Ok(dict)
    }
}

// ── ground truth ──

/// Annotation for one dropped action in a video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgottenTruth {
    pub action_class: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_box: Option<Rect>,
}

/// Evaluation-only labels; never consulted by training or inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Action class per frame.
    pub action_frames: Vec<usize>,
    /// Object class per clip, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_clips: Option<Vec<usize>>,
    /// Actions dropped from this video (empty means nothing was forgotten).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forgotten: Vec<ForgottenTruth>,
}

// ── documents ──

/// A quantized video: parallel clip, human-word and object-word sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoDocument {
    pub video_id: String,
    pub clips: Vec<Clip>,
    pub human_words: Vec<usize>,
    pub object_words: Vec<usize>,
    pub ground_truth: Option<GroundTruth>,
    /// Candidate object regions in this video's scene, for localization.
    pub regions: Vec<Region>,
}

impl VideoDocument {
    pub fn n_clips(&self) -> usize {
        self.clips.len()
    }
}

/// A set of documents plus the vocabulary sizes they were quantized with.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub docs: Vec<VideoDocument>,
    pub n_human_words: usize,
    pub n_object_words: usize,
}

impl Corpus {
    pub fn total_clips(&self) -> usize {
        self.docs.iter().map(|d| d.n_clips()).sum()
    }

    /// Every word id must fall inside the declared vocabularies.
    pub fn validate_words(&self) -> Result<()> {
        for doc in &self.docs {
            if doc.human_words.len() != doc.clips.len() || doc.object_words.len() != doc.clips.len()
            {
                return Err(Error::invalid(format!(
                    "video {}: clip/word sequences have unequal lengths",
                    doc.video_id
                )));
            }
            if let Some(w) = doc.human_words.iter().find(|&&w| w >= self.n_human_words) {
                return Err(Error::invalid(format!(
                    "video {}: human word {} out of range (vocabulary {})",
                    doc.video_id, w, self.n_human_words
                )));
            }
            if let Some(w) = doc.object_words.iter().find(|&&w| w >= self.n_object_words) {
                return Err(Error::invalid(format!(
                    "video {}: object word {} out of range (vocabulary {})",
                    doc.video_id, w, self.n_object_words
                )));
            }
        }
        Ok(())
    }
}

// ── corpus files ──

/// On-disk form of one video: raw frames plus optional labels and regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub frames: Vec<FrameFeatures>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<GroundTruth>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<Region>,
}

pub fn save_records(records: &[VideoRecord], path: &Path) -> Result<()> {
    write_string(path, &serde_json::to_string(records).expect("records serialize"))
}

pub fn load_records(path: &Path) -> Result<Vec<VideoRecord>> {
    let text = read_to_string(path)?;
    from_json_str(&text, path)
}

// ── clip windowing ──

/// Slides a window of `clip_len` frames with stride `step` and mean-pools
/// each channel. A video shorter than one window yields a single truncated
/// clip covering every frame.
pub fn window_clips(frames: &[FrameFeatures], clip_len: usize, step: usize) -> Result<Vec<Clip>> {
    if frames.is_empty() {
        return Err(Error::invalid("cannot window an empty frame sequence"));
    }
    if clip_len == 0 || step == 0 {
        return Err(Error::invalid("clip_len and step must be positive"));
    }
    let dh = frames[0].human.len();
    let do_ = frames[0].object.len();
    for (i, f) in frames.iter().enumerate() {
        if f.human.len() != dh || f.object.len() != do_ {
            return Err(Error::invalid(format!(
                "frame {i} feature dimensions differ from frame 0"
            )));
        }
        if f.human.iter().chain(&f.object).any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("frame {i} has non-finite features")));
        }
    }

    let n = frames.len();
    let spans: Vec<(usize, usize)> = if n < clip_len {
        vec![(0, n - 1)]
    } else {
        (0..=(n - clip_len))
            .step_by(step)
            .map(|s| (s, s + clip_len - 1))
            .collect()
    };

    let pool = |lo: usize, hi: usize, pick: fn(&FrameFeatures) -> &Vec<f64>, dim: usize| {
        let mut acc = vec![0.0; dim];
        for f in &frames[lo..=hi] {
            for (a, x) in acc.iter_mut().zip(pick(f)) {
                *a += x;
            }
        }
        let m = (hi - lo + 1) as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    };

    Ok(spans
        .into_iter()
        .map(|(lo, hi)| Clip {
            start_frame: lo,
            end_frame: hi,
            human_feat: pool(lo, hi, |f| &f.human, dh),
            object_feat: pool(lo, hi, |f| &f.object, do_),
            // Frame f occupies [f, f+1), so the clip's center time is the
            // midpoint of [lo, hi+1] over the video's n frame slots.
            t: (lo + hi + 1) as f64 / (2.0 * n as f64),
        })
        .collect())
}

// ── k-means ──

/// Lloyd's algorithm with k-means++ seeding. Deterministic for a given seed.
/// Returns fewer than `k` centers only when the data has fewer distinct
/// points; empty clusters are re-seeded from the current farthest point.
pub fn kmeans_fit(
    vectors: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Dictionary> {
    if vectors.is_empty() {
        return Err(Error::invalid("kmeans_fit requires at least one vector"));
    }
    if k == 0 {
        return Err(Error::invalid("kmeans_fit requires k >= 1"));
    }
    let dim = vectors[0].len();
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::invalid(format!(
                "vector {i} has dimension {} but vector 0 has {}",
                v.len(),
                dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("vector {i} has non-finite entries")));
        }
    }

    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        if !distinct.iter().any(|d| d == v) {
            distinct.push(v.clone());
        }
        if distinct.len() > k {
            break;
        }
    }
    if distinct.len() <= k {
        return Ok(Dictionary { centers: distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(vectors[rng.gen_range(0..vectors.len())].clone());
    let mut d2: Vec<f64> = vectors
        .iter()
        .map(|v| euclidean(v, &centers[0]).powi(2))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = d2.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.gen_range(0..vectors.len())
        };
        centers.push(vectors[next].clone());
        let c = centers.last().unwrap();
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(euclidean(v, c).powi(2));
        }
    }

    let mut assign = vec![usize::MAX; vectors.len()];
    for _ in 0..max_iters {
        let mut changed = false;
        let mut dist = vec![0.0; vectors.len()];
        for (i, v) in vectors.iter().enumerate() {
            let (best, bd) = nearest_center(v, &centers);
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
            dist[i] = bd;
        }
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (i, v) in vectors.iter().enumerate() {
            counts[assign[i]] += 1;
            for (a, x) in sums[assign[i]].iter_mut().zip(v) {
                *a += x;
            }
        }
        for (c, (sum, count)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if *count > 0 {
                *c = sum.iter().map(|s| s / *count as f64).collect();
            }
        }
        for j in 0..centers.len() {
            if counts[j] == 0 {
                // Move the dead center onto the point that is currently worst
                // served, then claim that point so a second empty cluster
                // picks a different one.
                let far = (0..vectors.len())
                    .max_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap())
                    .unwrap();
                centers[j] = vectors[far].clone();
                assign[far] = j;
                dist[far] = 0.0;
            }
        }
    }

    Ok(Dictionary { centers })
}

fn nearest_center(v: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = euclidean(v, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Sum of squared point-to-assigned-center distances.
pub fn kmeans_objective(vectors: &[Vec<f64>], dict: &Dictionary) -> f64 {
    vectors
        .iter()
        .map(|v| nearest_center(v, &dict.centers).1.powi(2))
        .sum()
}

/// Nearest-center word id; ties resolve to the lowest index.
pub fn quantize(v: &[f64], dict: &Dictionary) -> Result<usize> {
    if dict.centers.is_empty() {
        return Err(Error::invalid("cannot quantize against an empty dictionary"));
    }
    if v.len() != dict.centers[0].len() {
        return Err(Error::invalid(format!(
            "vector dimension {} does not match dictionary dimension {}",
            v.len(),
            dict.centers[0].len()
        )));
    }
    Ok(nearest_center(v, &dict.centers).0)
}

// ── document assembly ──

/// Windows and quantizes one on-disk video record.
pub fn build_document(
    record: &VideoRecord,
    human_dict: &Dictionary,
    object_dict: &Dictionary,
    clip_len: usize,
    step: usize,
) -> Result<VideoDocument> {
    let clips = window_clips(&record.frames, clip_len, step)?;
    if let Some(gt) = &record.labels {
        if gt.action_frames.len() != record.frames.len() {
            return Err(Error::invalid(format!(
                "video {}: {} frame labels for {} frames",
                record.video_id,
                gt.action_frames.len(),
                record.frames.len()
            )));
        }
    }
    let human_words = clips
        .iter()
        .map(|c| quantize(&c.human_feat, human_dict))
        .collect::<Result<Vec<_>>>()?;
    let object_words = clips
        .iter()
        .map(|c| quantize(&c.object_feat, object_dict))
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoDocument {
        video_id: record.video_id.clone(),
        clips,
        human_words,
        object_words,
        ground_truth: record.labels.clone(),
        regions: record.regions.clone(),
    })
}

/// Builds a full corpus from records with shared dictionaries.
pub fn build_corpus(
    records: &[VideoRecord],
    human_dict: &Dictionary,
    object_dict: &Dictionary,
    clip_len: usize,
    step: usize,
) -> Result<Corpus> {
    let docs = records
        .iter()
        .map(|r| build_document(r, human_dict, object_dict, clip_len, step))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        docs,
        n_human_words: human_dict.len(),
        n_object_words: object_dict.len(),
    })
}

/// Pooled clip features for each channel over a whole record set, in video
/// order: the training set for the dictionaries.
pub fn pooled_clip_features(
    records: &[VideoRecord],
    clip_len: usize,
    step: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut human = Vec::new();
    let mut object = Vec::new();
    for r in records {
        for clip in window_clips(&r.frames, clip_len, step)? {
            human.push(clip.human_feat);
            object.push(clip.object_feat);
        }
    }
    Ok((human, object))
}
