//! Synthetic corpora with known ground truth.
//!
//! Two generators: scripted activity videos (feature trajectories through
//! class centers with crossfaded transitions, optional steps that can be
//! skipped) and word-level documents drawn straight from the generative
//! model. A third builds block-structured documents with planted ordering
//! biases for checking that the gap densities are recovered.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    Corpus, FrameFeatures, ForgottenTruth, GroundTruth, VideoDocument, VideoRecord,
};
use crate::detection::Region;
use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::model::{GeneratedDoc, GenerativeModel};
use crate::numeric::euclidean;

/// One action vocabulary entry of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionClass {
    pub id: usize,
    pub name: String,
    pub human_center: Vec<f64>,
    pub object_center: Vec<f64>,
    pub noise_sd: f64,
    /// Inclusive range of instance lengths, in clips.
    pub duration_clips: (usize, usize),
    /// Which object category this action manipulates.
    pub object_class: usize,
}

/// A step of the routine. Optional steps are independently skipped with
/// `forget_prob`, and every skip is recorded in the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub class_id: usize,
    #[serde(default)]
    pub optional: bool,
    #[serde(default)]
    pub forget_prob: f64,
}

/// A fixed region proposal in the observer view, tagged with the object
/// category whose appearance it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub rect: Rect,
    pub object_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub classes: Vec<ActionClass>,
    pub slots: Vec<Slot>,
    /// (a, b): slot a must be performed before slot b.
    pub order_constraints: Vec<(usize, usize)>,
    pub regions: Vec<RegionSpec>,
    pub frames_per_clip: usize,
    /// Width of the linear blend straddling each instance boundary.
    pub crossfade_frames: usize,
    /// Enforce the center-separation margin at validation time.
    pub well_separated: bool,
}

impl Scenario {
    /// Copy of the scenario whose optional steps are always performed, for
    /// generating demonstration videos with nothing forgotten.
    pub fn always_complete(&self) -> Scenario {
        let mut s = self.clone();
        for slot in &mut s.slots {
            slot.forget_prob = 0.0;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.slots.is_empty() {
            return Err(Error::invalid("scenario needs classes and slots"));
        }
        if self.frames_per_clip == 0 {
            return Err(Error::invalid("frames_per_clip must be positive"));
        }
        let dh = self.classes[0].human_center.len();
        let do_ = self.classes[0].object_center.len();
        for (i, c) in self.classes.iter().enumerate() {
            if c.id != i {
                return Err(Error::invalid(format!(
                    "class id {} at position {i}; ids must be dense",
                    c.id
                )));
            }
            if c.human_center.len() != dh || c.object_center.len() != do_ {
                return Err(Error::invalid("inconsistent center dimensions"));
            }
            if !(c.noise_sd > 0.0) {
                return Err(Error::invalid("noise_sd must be positive"));
            }
            if c.duration_clips.0 == 0 || c.duration_clips.0 > c.duration_clips.1 {
                return Err(Error::invalid("bad duration range"));
            }
        }
        for s in &self.slots {
            if s.class_id >= self.classes.len() {
                return Err(Error::invalid("slot references unknown class"));
            }
            if !(0.0..=1.0).contains(&s.forget_prob) {
                return Err(Error::invalid("forget_prob must be in [0, 1]"));
            }
        }
        for &(a, b) in &self.order_constraints {
            if a >= self.slots.len() || b >= self.slots.len() || a == b {
                return Err(Error::invalid("bad ordering constraint"));
            }
        }
        // The linear-extension sampler needs an acyclic constraint set.
        let n = self.slots.len();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.order_constraints {
            indeg[b] += 1;
        }
        let mut placed = 0;
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut indeg_work = indeg.clone();
        while let Some(i) = ready.pop() {
            placed += 1;
            for &(a, b) in &self.order_constraints {
                if a == i {
                    indeg_work[b] -= 1;
                    if indeg_work[b] == 0 {
                        ready.push(b);
                    }
                }
            }
        }
        if placed != n {
            return Err(Error::invalid("ordering constraints contain a cycle"));
        }
        for r in &self.regions {
            if self.region_feature(r.object_class).is_none() {
                return Err(Error::invalid(format!(
                    "region references object class {} that no action uses",
                    r.object_class
                )));
            }
        }
        if self.well_separated {
            for i in 0..self.classes.len() {
                for j in i + 1..self.classes.len() {
                    let a = &self.classes[i];
                    let b = &self.classes[j];
                    let margin = 4.0 * a.noise_sd.max(b.noise_sd);
                    if euclidean(&a.human_center, &b.human_center) < margin {
                        return Err(Error::invalid(format!(
                            "human centers of {} and {} closer than {margin}",
                            a.name, b.name
                        )));
                    }
                    if a.object_class != b.object_class
                        && euclidean(&a.object_center, &b.object_center) < margin
                    {
                        return Err(Error::invalid(format!(
                            "object centers of {} and {} closer than {margin}",
                            a.name, b.name
                        )));
                    }
                }
                let c = &self.classes[i];
                if c.duration_clips.0 * self.frames_per_clip < self.crossfade_frames {
                    return Err(Error::invalid(format!(
                        "instances of {} can be shorter than the crossfade",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    fn region_feature(&self, object_class: usize) -> Option<&[f64]> {
        self.classes
            .iter()
            .find(|c| c.object_class == object_class)
            .map(|c| c.object_center.as_slice())
    }

    fn region_for(&self, object_class: usize) -> Option<Rect> {
        self.regions
            .iter()
            .find(|r| r.object_class == object_class)
            .map(|r| r.rect)
    }
}

/// Samples a slot order uniformly among those respecting the constraints:
/// repeatedly pick one of the currently available slots.
fn sample_order(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = scenario.slots.len();
    let mut indeg = vec![0usize; n];
    for &(_, b) in &scenario.order_constraints {
        indeg[b] += 1;
    }
    let mut available: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !available.is_empty() {
        let pick = rng.gen_range(0..available.len());
        let slot = available.remove(pick);
        order.push(slot);
        for &(a, b) in &scenario.order_constraints {
            if a == slot {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    available.push(b);
                }
            }
        }
    }
    order
}

/// Generates scripted activity videos. Each video performs the slots in a
/// random constraint-respecting order, drops optional slots independently,
/// and emits per-frame features as class centers with linear crossfades at
/// boundaries plus Gaussian noise.
pub fn gen_scripted(
    scenario: &Scenario,
    n_videos: usize,
    seed: u64,
    id_prefix: &str,
) -> Result<Vec<VideoRecord>> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_videos);
    for v in 0..n_videos {
        let order = sample_order(scenario, &mut rng);
        // Drop decisions follow canonical slot order to keep the stream
        // stable regardless of the sampled ordering.
        let mut dropped = vec![false; scenario.slots.len()];
        for (i, slot) in scenario.slots.iter().enumerate() {
            if slot.optional && rng.gen::<f64>() < slot.forget_prob {
                dropped[i] = true;
            }
        }
        let kept: Vec<usize> = order.iter().copied().filter(|&s| !dropped[s]).collect();
        let instances: Vec<(usize, usize)> = kept
            .iter()
            .map(|&s| {
                let class = &scenario.classes[scenario.slots[s].class_id];
                let dur = rng.gen_range(class.duration_clips.0..=class.duration_clips.1);
                (class.id, dur * scenario.frames_per_clip)
            })
            .collect();
        let total: usize = instances.iter().map(|&(_, f)| f).sum();

        let mut owner = vec![0usize; total];
        let mut f = 0;
        for &(class_id, frames) in &instances {
            for _ in 0..frames {
                owner[f] = class_id;
                f += 1;
            }
        }
        let dh = scenario.classes[0].human_center.len();
        let do_ = scenario.classes[0].object_center.len();
        let mut traj_h: Vec<Vec<f64>> = owner
            .iter()
            .map(|&c| scenario.classes[c].human_center.clone())
            .collect();
        let mut traj_o: Vec<Vec<f64>> = owner
            .iter()
            .map(|&c| scenario.classes[c].object_center.clone())
            .collect();
        let half = scenario.crossfade_frames / 2;
        if scenario.crossfade_frames > 0 {
            let mut boundary = 0;
            for w in instances.windows(2) {
                boundary += w[0].1;
                let (prev, next) = (w[0].0, w[1].0);
                let lo = boundary.saturating_sub(half);
                let hi = (boundary + half).min(total);
                for f in lo..hi {
                    let alpha = ((f - lo) as f64 + 0.5) / scenario.crossfade_frames as f64;
                    for d in 0..dh {
                        traj_h[f][d] = (1.0 - alpha) * scenario.classes[prev].human_center[d]
                            + alpha * scenario.classes[next].human_center[d];
                    }
                    for d in 0..do_ {
                        traj_o[f][d] = (1.0 - alpha) * scenario.classes[prev].object_center[d]
                            + alpha * scenario.classes[next].object_center[d];
                    }
                }
            }
        }
        let frames: Vec<FrameFeatures> = (0..total)
            .map(|f| {
                let sd = scenario.classes[owner[f]].noise_sd;
                FrameFeatures {
                    human: traj_h[f]
                        .iter()
                        .map(|&x| x + sd * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                    object: traj_o[f]
                        .iter()
                        .map(|&x| x + sd * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                }
            })
            .collect();

        let forgotten: Vec<ForgottenTruth> = (0..scenario.slots.len())
            .filter(|&i| dropped[i])
            .map(|i| {
                let class = &scenario.classes[scenario.slots[i].class_id];
                ForgottenTruth {
                    action_class: class.id,
                    object_box: scenario.region_for(class.object_class),
                }
            })
            .collect();
        let regions: Vec<Region> = scenario
            .regions
            .iter()
            .map(|r| Region {
                rect: r.rect,
                feature: scenario
                    .region_feature(r.object_class)
                    .expect("validated")
                    .to_vec(),
            })
            .collect();

        out.push(VideoRecord {
            video_id: format!("{id_prefix}-{v:04}"),
            frames,
            labels: Some(GroundTruth {
                action_frames: owner,
                object_clips: None,
                forgotten,
            }),
            regions,
        });
    }
    Ok(out)
}

/// Draws word-level documents straight from a generative model. Each clip is
/// one frame whose features are the word's center when the model carries
/// centers, or the word index itself otherwise. Ground-truth frame labels are
/// the sampled action topics.
pub fn gen_word_corpus(
    gm: &GenerativeModel,
    n_docs: usize,
    n_clips: usize,
    seed: u64,
    id_prefix: &str,
) -> Result<(Corpus, Vec<GeneratedDoc>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generated = gm.generate(n_docs, n_clips, &mut rng)?;
    let n_human_words = gm.phi1.first().map_or(0, |r| r.len());
    let n_object_words = gm
        .phi12
        .first()
        .and_then(|p| p.first())
        .map_or(0, |r| r.len());
    let docs = generated
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let clips = (0..n_clips)
                .map(|n| crate::corpus::Clip {
                    start_frame: n,
                    end_frame: n,
                    human_feat: match &gm.word_centers {
                        Some((h, _)) => h[g.human_words[n]].clone(),
                        None => vec![g.human_words[n] as f64],
                    },
                    object_feat: match &gm.word_centers {
                        Some((_, o)) => o[g.object_words[n]].clone(),
                        None => vec![g.object_words[n] as f64],
                    },
                    t: g.t[n],
                })
                .collect();
            VideoDocument {
                video_id: format!("{id_prefix}-{i:04}"),
                clips,
                human_words: g.human_words.clone(),
                object_words: g.object_words.clone(),
                ground_truth: Some(GroundTruth {
                    action_frames: g.z1.clone(),
                    object_clips: Some(g.z2.clone()),
                    forgotten: Vec::new(),
                }),
                regions: Vec::new(),
            }
        })
        .collect();
    Ok((
        Corpus {
            docs,
            n_human_words,
            n_object_words,
        },
        generated,
    ))
}

/// Block-structured corpus with planted ordering biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCorpusSpec {
    pub k: usize,
    pub p: usize,
    pub n_human_words: usize,
    pub n_object_words: usize,
    /// Block length when every topic appears; the per-document clip budget is
    /// `k * clips_per_block` regardless of how many blocks are present.
    pub clips_per_block: usize,
    /// Probability that each topic's block appears in a document. Documents
    /// keep the same total length, so with fewer blocks each one stretches.
    /// Must be positive; at 1.0 every document contains every block.
    pub present_prob: f64,
    /// (a, b, q): topic a's block precedes topic b's with probability q when
    /// both appear. Biases are applied in order; pairs sharing a topic
    /// interact.
    pub order_biases: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTruth {
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
}

/// Each document holds a random subset of the K topic blocks in a random
/// order, stretched to a fixed clip budget; topic k draws human words
/// uniformly from its own band of the vocabulary, and object topics
/// (uniform per clip) own bands of the object vocabulary.
pub fn gen_block_corpus(
    spec: &BlockCorpusSpec,
    n_docs: usize,
    seed: u64,
) -> Result<(Corpus, Vec<BlockTruth>)> {
    if spec.k == 0 || spec.p == 0 || spec.clips_per_block == 0 {
        return Err(Error::invalid("block corpus needs positive k, p and block length"));
    }
    if spec.n_human_words < spec.k || spec.n_object_words < spec.p {
        return Err(Error::invalid("vocabulary smaller than the topic count"));
    }
    if !(spec.present_prob > 0.0 && spec.present_prob <= 1.0) {
        return Err(Error::invalid("present_prob must be in (0, 1]"));
    }
    for &(a, b, q) in &spec.order_biases {
        if a >= spec.k || b >= spec.k || a == b || !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid("bad ordering bias"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_band = spec.n_human_words / spec.k;
    let o_band = spec.n_object_words / spec.p;
    let mut docs = Vec::with_capacity(n_docs);
    let mut truths = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let mut blocks: Vec<usize> = loop {
            let picked: Vec<usize> = (0..spec.k)
                .filter(|_| rng.gen::<f64>() < spec.present_prob)
                .collect();
            if !picked.is_empty() {
                break picked;
            }
        };
        for j in (1..blocks.len()).rev() {
            let pick = rng.gen_range(0..=j);
            blocks.swap(j, pick);
        }
        for &(a, b, q) in &spec.order_biases {
            let (Some(pos_a), Some(pos_b)) = (
                blocks.iter().position(|&x| x == a),
                blocks.iter().position(|&x| x == b),
            ) else {
                continue;
            };
            let want_before = rng.gen::<f64>() < q;
            if (pos_a < pos_b) != want_before {
                blocks.swap(pos_a, pos_b);
            }
        }
        let n = spec.k * spec.clips_per_block;
        let base = n / blocks.len();
        let extra = n % blocks.len();
        let mut z1 = Vec::with_capacity(n);
        for (slot, &topic) in blocks.iter().enumerate() {
            let len = base + usize::from(slot < extra);
            z1.extend(std::iter::repeat(topic).take(len));
        }
        let z2: Vec<usize> = (0..n).map(|_| rng.gen_range(0..spec.p)).collect();
        let human_words: Vec<usize> = z1
            .iter()
            .map(|&z| {
                let lo = z * h_band;
                let hi = if z + 1 == spec.k { spec.n_human_words } else { lo + h_band };
                rng.gen_range(lo..hi)
            })
            .collect();
        let object_words: Vec<usize> = z2
            .iter()
            .map(|&z| {
                let lo = z * o_band;
                let hi = if z + 1 == spec.p { spec.n_object_words } else { lo + o_band };
                rng.gen_range(lo..hi)
            })
            .collect();
        let clips = (0..n)
            .map(|j| crate::corpus::Clip {
                start_frame: j,
                end_frame: j,
                human_feat: vec![human_words[j] as f64],
                object_feat: vec![object_words[j] as f64],
                t: (2 * j + 1) as f64 / (2 * n) as f64,
            })
            .collect();
        docs.push(VideoDocument {
            video_id: format!("block-{i:04}"),
            clips,
            human_words,
            object_words,
            ground_truth: Some(GroundTruth {
                action_frames: z1.clone(),
                object_clips: Some(z2.clone()),
                forgotten: Vec::new(),
            }),
            regions: Vec::new(),
        });
        truths.push(BlockTruth { z1, z2 });
    }
    Ok((
        Corpus {
            docs,
            n_human_words: spec.n_human_words,
            n_object_words: spec.n_object_words,
        },
        truths,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class_scenario(forget_prob: f64) -> Scenario {
        Scenario {
            name: "toy".into(),
            classes: vec![
                ActionClass {
                    id: 0,
                    name: "first".into(),
                    human_center: vec![4.0, 0.0],
                    object_center: vec![4.0, 0.0],
                    noise_sd: 0.5,
                    duration_clips: (3, 3),
                    object_class: 0,
                },
                ActionClass {
                    id: 1,
                    name: "second".into(),
                    human_center: vec![0.0, 4.0],
                    object_center: vec![0.0, 4.0],
                    noise_sd: 0.5,
                    duration_clips: (3, 3),
                    object_class: 1,
                },
            ],
            slots: vec![
                Slot {
                    class_id: 0,
                    optional: false,
                    forget_prob: 0.0,
                },
                Slot {
                    class_id: 1,
                    optional: true,
                    forget_prob,
                },
            ],
            order_constraints: vec![(0, 1)],
            regions: vec![
                RegionSpec {
                    rect: Rect {
                        x: 0.0,
                        y: 0.0,
                        w: 10.0,
                        h: 10.0,
                    },
                    object_class: 0,
                },
                RegionSpec {
                    rect: Rect {
                        x: 40.0,
                        y: 0.0,
                        w: 10.0,
                        h: 10.0,
                    },
                    object_class: 1,
                },
            ],
            frames_per_clip: 10,
            crossfade_frames: 4,
            well_separated: true,
        }
    }

    #[test]
    fn forget_prob_extremes_are_exact() {
        let never = gen_scripted(&two_class_scenario(0.0), 20, 1, "a").unwrap();
        assert!(never
            .iter()
            .all(|r| r.labels.as_ref().unwrap().forgotten.is_empty()));
        let always = gen_scripted(&two_class_scenario(1.0), 20, 1, "b").unwrap();
        for r in &always {
            let gt = r.labels.as_ref().unwrap();
            assert_eq!(gt.forgotten.len(), 1);
            assert_eq!(gt.forgotten[0].action_class, 1);
            assert_eq!(
                gt.forgotten[0].object_box,
                Some(Rect {
                    x: 40.0,
                    y: 0.0,
                    w: 10.0,
                    h: 10.0
                })
            );
            // The dropped class leaves no frames behind.
            assert!(gt.action_frames.iter().all(|&c| c == 0));
        }
    }

    #[test]
    fn forget_fraction_tracks_probability() {
        let records = gen_scripted(&two_class_scenario(0.3), 1000, 7, "c").unwrap();
        let dropped = records
            .iter()
            .filter(|r| !r.labels.as_ref().unwrap().forgotten.is_empty())
            .count();
        let frac = dropped as f64 / 1000.0;
        assert!((0.26..=0.34).contains(&frac), "fraction {frac}");
    }

    fn chain_scenario(n: usize) -> Scenario {
        let classes = (0..n)
            .map(|i| {
                let mut hc = vec![0.0; n];
                hc[i] = 4.0;
                ActionClass {
                    id: i,
                    name: format!("step-{i}"),
                    human_center: hc.clone(),
                    object_center: hc,
                    noise_sd: 0.5,
                    duration_clips: (2, 4),
                    object_class: i,
                }
            })
            .collect();
        let slots = (0..n)
            .map(|i| Slot {
                class_id: i,
                optional: false,
                forget_prob: 0.0,
            })
            .collect();
        Scenario {
            name: "chain".into(),
            classes,
            slots,
            order_constraints: (0..n - 1).map(|i| (i, i + 1)).collect(),
            regions: Vec::new(),
            frames_per_clip: 5,
            crossfade_frames: 0,
            well_separated: false,
        }
    }

    #[test]
    fn order_constraints_hold_in_every_video() {
        let mut scenario = chain_scenario(5);
        // Leave slot 2 floating: only 0<1, 1<3, 3<4 remain.
        scenario.order_constraints = vec![(0, 1), (1, 3), (3, 4)];
        let records = gen_scripted(&scenario, 60, 3, "v").unwrap();
        let mut saw_slot2_moved = false;
        for r in &records {
            let frames = &r.labels.as_ref().unwrap().action_frames;
            let first_pos = |c: usize| frames.iter().position(|&x| x == c).unwrap();
            assert!(first_pos(0) < first_pos(1));
            assert!(first_pos(1) < first_pos(3));
            assert!(first_pos(3) < first_pos(4));
            if first_pos(2) < first_pos(1) || first_pos(2) > first_pos(3) {
                saw_slot2_moved = true;
            }
        }
        assert!(saw_slot2_moved, "free slot never moved; sampler looks stuck");
    }

    #[test]
    fn cyclic_constraints_are_rejected() {
        let mut scenario = chain_scenario(3);
        scenario.order_constraints = vec![(0, 1), (1, 2), (2, 0)];
        assert!(gen_scripted(&scenario, 1, 0, "x").is_err());
    }

    #[test]
    fn crossfade_blends_only_the_boundary_zone() {
        let mut scenario = two_class_scenario(0.0);
        for c in &mut scenario.classes {
            c.noise_sd = 1e-9;
        }
        scenario.well_separated = false;
        let records = gen_scripted(&scenario, 1, 0, "cf").unwrap();
        let frames = &records[0].frames;
        // 30 frames per instance, crossfade 4 => frames 28..32 blend.
        assert!((frames[27].human[0] - 4.0).abs() < 1e-6);
        assert!((frames[32].human[0] - 0.0).abs() < 1e-6);
        let f28 = frames[28].human[0];
        let f31 = frames[31].human[0];
        assert!(f28 > 3.0 && f28 < 4.0, "f28 {f28}");
        assert!(f31 > 0.0 && f31 < 1.0, "f31 {f31}");
        // Symmetric blend: weights at 28 and 31 mirror each other.
        assert!((f28 + f31 - 4.0).abs() < 1e-6);
    }

    #[test]
    fn well_separated_features_quantize_cleanly() {
        let scenario = two_class_scenario(0.0);
        let records = gen_scripted(&scenario, 30, 11, "q").unwrap();
        let centers: Vec<&[f64]> = scenario
            .classes
            .iter()
            .map(|c| c.human_center.as_slice())
            .collect();
        let mut total = 0u64;
        let mut hits = 0u64;
        for r in &records {
            let gt = &r.labels.as_ref().unwrap().action_frames;
            for (f, frame) in r.frames.iter().enumerate() {
                let mut best = 0;
                for c in 1..centers.len() {
                    if euclidean(&frame.human, centers[c]) < euclidean(&frame.human, centers[best])
                    {
                        best = c;
                    }
                }
                total += 1;
                if best == gt[f] {
                    hits += 1;
                }
            }
        }
        assert!(hits as f64 / total as f64 >= 0.99);
    }

    #[test]
    fn duration_shorter_than_crossfade_fails_validation() {
        let mut scenario = two_class_scenario(0.0);
        scenario.crossfade_frames = 40;
        assert!(scenario.validate().is_err());
    }

    #[test]
    fn word_corpus_is_deterministic_and_bounded() {
        let gm = GenerativeModel {
            k: 2,
            p: 2,
            mu: vec![0.0, 0.0],
            sigma: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            phi1: vec![vec![0.9, 0.1, 0.0], vec![0.0, 0.1, 0.9]],
            phi12: vec![
                vec![vec![1.0, 0.0], vec![0.5, 0.5]],
                vec![vec![0.0, 1.0], vec![0.5, 0.5]],
            ],
            word_centers: None,
        };
        let (c1, g1) = gen_word_corpus(&gm, 5, 8, 42, "w").unwrap();
        let (c2, _) = gen_word_corpus(&gm, 5, 8, 42, "w").unwrap();
        assert_eq!(
            serde_json::to_string(&c1.docs[0].human_words).unwrap(),
            serde_json::to_string(&c2.docs[0].human_words).unwrap()
        );
        assert!(c1.validate_words().is_ok());
        assert_eq!(g1.len(), 5);
        let (empty, _) = gen_word_corpus(&gm, 0, 8, 0, "w").unwrap();
        assert!(empty.docs.is_empty());
    }

    #[test]
    fn block_corpus_plants_hard_order() {
        let spec = BlockCorpusSpec {
            k: 3,
            p: 2,
            n_human_words: 30,
            n_object_words: 10,
            clips_per_block: 4,
            present_prob: 1.0,
            order_biases: vec![(0, 1, 1.0)],
        };
        let (corpus, truths) = gen_block_corpus(&spec, 40, 5).unwrap();
        for (doc, truth) in corpus.docs.iter().zip(&truths) {
            assert_eq!(doc.clips.len(), 12);
            let pos0 = truth.z1.iter().position(|&z| z == 0).unwrap();
            let pos1 = truth.z1.iter().position(|&z| z == 1).unwrap();
            assert!(pos0 < pos1, "bias q=1 must force block 0 first");
            for (j, &w) in doc.human_words.iter().enumerate() {
                let z = truth.z1[j];
                assert!(w >= z * 10 && w < (z + 1) * 10, "word {w} outside band of {z}");
            }
        }
    }

    #[test]
    fn block_corpus_subsets_keep_budget() {
        let spec = BlockCorpusSpec {
            k: 4,
            p: 2,
            n_human_words: 40,
            n_object_words: 10,
            clips_per_block: 6,
            present_prob: 0.5,
            order_biases: vec![(0, 1, 1.0)],
        };
        let (corpus, truths) = gen_block_corpus(&spec, 60, 9).unwrap();
        let mut saw_partial = false;
        for (doc, truth) in corpus.docs.iter().zip(&truths) {
            assert_eq!(doc.clips.len(), 24);
            let mut seen: Vec<usize> = Vec::new();
            for &z in &truth.z1 {
                match seen.last() {
                    Some(&last) if last == z => {}
                    _ => {
                        assert!(!seen.contains(&z), "block {z} split in two");
                        seen.push(z);
                    }
                }
            }
            if seen.len() < 4 {
                saw_partial = true;
            }
            if seen.contains(&0) && seen.contains(&1) {
                let pos0 = seen.iter().position(|&z| z == 0).unwrap();
                let pos1 = seen.iter().position(|&z| z == 1).unwrap();
                assert!(pos0 < pos1, "bias q=1 must force block 0 first");
            }
        }
        assert!(saw_partial, "present_prob 0.5 should drop blocks somewhere");
    }
}
