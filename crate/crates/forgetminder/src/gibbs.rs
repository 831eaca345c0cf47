//! Collapsed Gibbs training and inference.
//!
//! Word distributions are integrated out, so a sweep only touches the count
//! tables. Per-document mixing weights are updated by an independence
//! Metropolis-Hastings step whose proposal is the learned Gaussian prior over
//! stick variables, and the prior plus the gap densities are refit by method
//! of moments once per iteration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::corpus::{Corpus, GroundTruth, VideoDocument};
use crate::detection::{extract_segments, Segment};
use crate::error::{from_json_str, read_to_string, write_string, Error, Result};
use crate::eval::frame_topics;
use crate::model::{
    cholesky_with_ridge, gaussian_log_pdf, omega_log_pdf_floored, sample_categorical,
    stick_break_log, AssignmentState, CountTables, ModelParams, TimeParams, DEFAULT_BETA,
    DENSITY_FLOOR, SD_FLOOR,
};
use crate::numeric::rescaled_weights;

/// Knobs for a training run. The ablation flags travel with the trained model
/// so that inference and detection replay the same variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub p: usize,
    pub iters: usize,
    /// Kept for interface stability; estimates use the final sample either way.
    pub burn_in: usize,
    pub mh_proposals_per_doc: usize,
    pub seed: u64,
    /// Drop the pairwise gap factor everywhere (plain-LDA variant).
    pub ablate_time: bool,
    /// Zero the off-diagonal of the stick covariance each refit.
    pub ablate_correlation: bool,
    pub sd_floor: f64,
    pub density_floor: f64,
    /// Sweeps before this iteration sample action topics from the word
    /// channels alone. The pairwise gap factor sums over every other clip, so
    /// from an unstructured start it can out-vote the words and lock the run
    /// into a purely positional clustering before any word structure forms;
    /// a word-only warm-up lets the words organize first. Zero disables it.
    #[serde(default)]
    pub warmup_iters: usize,
}

impl TrainConfig {
    pub fn new(k: usize, p: usize) -> Self {
        TrainConfig {
            k,
            p,
            iters: 500,
            burn_in: 100,
            mh_proposals_per_doc: 5,
            seed: 0,
            ablate_time: false,
            ablate_correlation: false,
            sd_floor: SD_FLOOR,
            density_floor: DENSITY_FLOOR,
            warmup_iters: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p == 0 {
            return Err(Error::invalid("topic counts must be at least 1"));
        }
        if self.iters == 0 {
            return Err(Error::invalid("iters must be at least 1"));
        }
        if self.burn_in >= self.iters {
            return Err(Error::invalid(format!(
                "burn_in ({}) must be below iters ({})",
                self.burn_in, self.iters
            )));
        }
        if !(self.sd_floor > 0.0) || !(self.density_floor > 0.0) {
            return Err(Error::invalid("floors must be positive"));
        }
        Ok(())
    }
}

/// One row of the per-iteration diagnostics trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub loglik: f64,
    pub mh_accept_rate: f64,
}

/// Where the word dictionaries for this model came from, plus the windowing
/// that produced the clips. Empty paths mean the corpus was built in memory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DictRefs {
    pub human: String,
    pub object: String,
    pub clip_len: usize,
    pub step: usize,
}

/// Everything needed to run inference, detection and evaluation later:
/// global parameters, the final per-document assignments, the segment table
/// of the training corpus, and the training labels when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    #[serde(flatten)]
    pub params: ModelParams,
    pub config: TrainConfig,
    pub dict_refs: DictRefs,
    pub states: Vec<AssignmentState>,
    pub train_segments: Vec<Vec<Segment>>,
    pub train_frame_topics: Vec<Vec<usize>>,
    pub train_ground_truth: Vec<Option<GroundTruth>>,
}

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string(self)
            .map_err(|e| Error::runtime(format!("serialize model: {e}")))?;
        write_string(path, &body)
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let body = read_to_string(path)?;
        let model: TrainedModel = from_json_str(&body, path)?;
        model.params.validate()?;
        Ok(model)
    }
}

// ── gap density cache ──

/// Per-document table of log gap densities. When the clip timestamps are
/// evenly spaced (the usual case for fixed-stride windows) every pairwise gap
/// is an integer multiple of the stride, so one table of size K*K*(2N-1)
/// replaces N^2 density evaluations per sweep. Uneven timestamps fall back to
/// direct evaluation.
pub(crate) struct GapCache {
    k: usize,
    n: usize,
    equispaced: bool,
    /// fwd[(g*K + a)*K + b] = log omega(gap_g | theta[a][b]), g = m - n + N - 1.
    fwd: Vec<f64>,
    /// rev[(g*K + a)*K + b] = fwd[(g*K + b)*K + a].
    rev: Vec<f64>,
    log_floor: f64,
}

impl GapCache {
    pub(crate) fn build(ts: &[f64], theta: &[Vec<TimeParams>], log_floor: f64) -> GapCache {
        let n = ts.len();
        let k = theta.len();
        let equispaced = is_equispaced(ts);
        let mut fwd = Vec::new();
        let mut rev = Vec::new();
        if equispaced && n >= 2 {
            let delta = (ts[n - 1] - ts[0]) / (n - 1) as f64;
            let gaps = 2 * n - 1;
            fwd = vec![0.0; gaps * k * k];
            rev = vec![0.0; gaps * k * k];
            for g in 0..gaps {
                let gap = (g as f64 - (n - 1) as f64) * delta;
                for a in 0..k {
                    for b in 0..k {
                        let v = omega_log_pdf_floored(gap, &theta[a][b], log_floor);
                        fwd[(g * k + a) * k + b] = v;
                        rev[(g * k + b) * k + a] = v;
                    }
                }
            }
        }
        GapCache {
            k,
            n,
            equispaced: equispaced && n >= 2,
            fwd,
            rev,
            log_floor,
        }
    }

    /// Adds, for every topic b, the pair terms
    /// log omega(t_m - t_n | theta[a][b]) + log omega(t_n - t_m | theta[b][a])
    /// to `acc`, where a = z1[m].
    fn accumulate_pair_terms(
        &self,
        theta: &[Vec<TimeParams>],
        ts: &[f64],
        a: usize,
        m: usize,
        n: usize,
        acc: &mut [f64],
    ) {
        let k = self.k;
        if self.equispaced {
            let g1 = m + self.n - 1 - n;
            let g2 = n + self.n - 1 - m;
            let row_f = &self.fwd[(g1 * k + a) * k..(g1 * k + a) * k + k];
            let row_r = &self.rev[(g2 * k + a) * k..(g2 * k + a) * k + k];
            for b in 0..k {
                acc[b] += row_f[b] + row_r[b];
            }
        } else {
            let fwd_gap = ts[m] - ts[n];
            for b in 0..k {
                acc[b] += omega_log_pdf_floored(fwd_gap, &theta[a][b], self.log_floor)
                    + omega_log_pdf_floored(-fwd_gap, &theta[b][a], self.log_floor);
            }
        }
    }
}

fn is_equispaced(ts: &[f64]) -> bool {
    if ts.len() < 3 {
        return ts.len() == 2;
    }
    let n = ts.len();
    let delta = (ts[n - 1] - ts[0]) / (n - 1) as f64;
    ts.iter()
        .enumerate()
        .all(|(i, &t)| (t - ts[0] - i as f64 * delta).abs() <= 1e-9)
}

// ── conditionals ──

fn z2_log_weights(
    doc: &VideoDocument,
    n: usize,
    state: &AssignmentState,
    counts: &CountTables,
    params: &ModelParams,
    log_pi2: &[f64],
    acc: &mut Vec<f64>,
) {
    let p = params.p;
    let wo = doc.object_words[n];
    let k_n = state.z1[n];
    let no = counts.n_object_words() as f64;
    acc.clear();
    acc.resize(p, 0.0);
    for pp in 0..p {
        let w_o = (counts.n_kpw[k_n][pp][wo] as f64 + params.beta12)
            / (counts.n_kp[k_n][pp] as f64 + no * params.beta12);
        acc[pp] = log_pi2[pp] + w_o.ln();
    }
}

fn times_of(doc: &VideoDocument, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend(doc.clips.iter().map(|c| c.t));
}

/// Resampling weights for the action topic of clip `n`, with the clip's
/// current assignment removed from the counts (training semantics). Returned
/// weights are exponentials rescaled by their maximum, not normalized.
pub fn z1_conditional(
    doc: &VideoDocument,
    n: usize,
    state: &AssignmentState,
    params: &ModelParams,
    cfg: &TrainConfig,
) -> Vec<f64> {
    conditional_z1(doc, n, state, params, cfg, true)
}

/// Same weights computed against frozen counts that do not contain the clip
/// (inference semantics).
pub fn z1_conditional_frozen(
    doc: &VideoDocument,
    n: usize,
    state: &AssignmentState,
    params: &ModelParams,
    cfg: &TrainConfig,
) -> Vec<f64> {
    conditional_z1(doc, n, state, params, cfg, false)
}

fn conditional_z1(
    doc: &VideoDocument,
    n: usize,
    state: &AssignmentState,
    params: &ModelParams,
    cfg: &TrainConfig,
    exclude_self: bool,
) -> Vec<f64> {
    let mut counts = params.counts.clone();
    if exclude_self {
        counts.remove_clip(state.z1[n], state.z2[n], doc.human_words[n], doc.object_words[n]);
    }
    let mut ts = Vec::new();
    times_of(doc, &mut ts);
    let cache = GapCache::build(&ts, &params.theta, cfg.density_floor.ln());
    let log_pi1: Vec<f64> = state.pi1.iter().map(|x| x.ln()).collect();
    let mut acc = Vec::new();
    z1_log_weights_ts(
        doc, &ts, n, state, &counts, params, &params.theta, &cache, cfg.ablate_time, &log_pi1,
        &mut acc,
    );
    rescaled_weights(&acc)
}

/// Resampling weights for the object topic of clip `n` (training semantics:
/// the clip's object counts are removed first).
pub fn z2_conditional(
    doc: &VideoDocument,
    n: usize,
    state: &AssignmentState,
    params: &ModelParams,
    _cfg: &TrainConfig,
) -> Vec<f64> {
    let mut counts = params.counts.clone();
    counts.remove_object(state.z1[n], state.z2[n], doc.object_words[n]);
    conditional_z2_with(doc, n, state, &counts, params)
}

/// Object-topic weights against frozen counts (inference semantics).
pub fn z2_conditional_frozen(
    doc: &VideoDocument,
    n: usize,
    state: &AssignmentState,
    params: &ModelParams,
    _cfg: &TrainConfig,
) -> Vec<f64> {
    conditional_z2_with(doc, n, state, &params.counts, params)
}

fn conditional_z2_with(
    doc: &VideoDocument,
    n: usize,
    state: &AssignmentState,
    counts: &CountTables,
    params: &ModelParams,
) -> Vec<f64> {
    let log_pi2: Vec<f64> = state.pi2.iter().map(|x| x.ln()).collect();
    let mut acc = Vec::new();
    z2_log_weights(doc, n, state, counts, params, &log_pi2, &mut acc);
    rescaled_weights(&acc)
}

fn z1_log_weights_ts(
    doc: &VideoDocument,
    ts: &[f64],
    n: usize,
    state: &AssignmentState,
    counts: &CountTables,
    params: &ModelParams,
    theta: &[Vec<TimeParams>],
    cache: &GapCache,
    ablate_time: bool,
    log_pi1: &[f64],
    acc: &mut Vec<f64>,
) {
    let k = params.k;
    let wh = doc.human_words[n];
    let wo = doc.object_words[n];
    let p_n = state.z2[n];
    acc.clear();
    acc.resize(k, 0.0);
    if !ablate_time {
        for m in 0..doc.clips.len() {
            if m != n {
                cache.accumulate_pair_terms(theta, ts, state.z1[m], m, n, acc);
            }
        }
    }
    let nw = counts.n_human_words() as f64;
    let no = counts.n_object_words() as f64;
    for kk in 0..k {
        let w_h = (counts.n_kw[kk][wh] as f64 + params.beta1)
            / (counts.n_k[kk] as f64 + nw * params.beta1);
        let w_o = (counts.n_kpw[kk][p_n][wo] as f64 + params.beta12)
            / (counts.n_kp[kk][p_n] as f64 + no * params.beta12);
        acc[kk] += log_pi1[kk] + w_h.ln() + w_o.ln();
    }
}

// ── Metropolis-Hastings update of per-document sticks ──

/// Log acceptance ratio for replacing a document's stick variables with
/// `v_new`. The proposal equals the prior, so the prior terms cancel and only
/// the topic-assignment likelihood remains. An empty document yields 0.
pub fn mh_log_accept_ratio(state: &AssignmentState, v_new: &[f64], k: usize, p: usize) -> f64 {
    let split = k.saturating_sub(1);
    let (old1, old2) = state.v.split_at(split.min(state.v.len()));
    let (new1, new2) = v_new.split_at(split.min(v_new.len()));
    let lp1_old = stick_break_log(old1);
    let lp2_old = stick_break_log(old2);
    let lp1_new = stick_break_log(new1);
    let lp2_new = stick_break_log(new2);
    let mut c1 = vec![0usize; k];
    let mut c2 = vec![0usize; p];
    for &z in &state.z1 {
        c1[z] += 1;
    }
    for &z in &state.z2 {
        c2[z] += 1;
    }
    let mut ratio = 0.0;
    for kk in 0..k {
        if c1[kk] > 0 {
            ratio += c1[kk] as f64 * (lp1_new[kk] - lp1_old[kk]);
        }
    }
    for pp in 0..p {
        if c2[pp] > 0 {
            ratio += c2[pp] as f64 * (lp2_new[pp] - lp2_old[pp]);
        }
    }
    ratio
}

/// Runs `proposals` independence-MH steps on one document's stick variables,
/// drawing proposals from N(mu, Sigma) via the supplied Cholesky factor.
/// Returns the number of accepted proposals.
pub fn mh_update_v(
    state: &mut AssignmentState,
    mu: &[f64],
    chol: &nalgebra::DMatrix<f64>,
    k: usize,
    p: usize,
    proposals: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    let dim = mu.len();
    let mut accepted = 0;
    let mut proposal = vec![0.0; dim];
    for _ in 0..proposals {
        let eps: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..dim {
            let mut x = mu[i];
            for j in 0..=i {
                x += chol[(i, j)] * eps[j];
            }
            proposal[i] = x;
        }
        let log_ratio = mh_log_accept_ratio(state, &proposal, k, p);
        let u: f64 = rng.gen();
        if u.ln() < log_ratio {
            state.v.copy_from_slice(&proposal);
            accepted += 1;
        }
    }
    state.refresh_pi(k);
    accepted
}

// ── moment updates ──

/// Refits the stick prior and the gap densities from the current assignments:
/// sample mean and population covariance of the stick variables (plus a small
/// diagonal ridge), and per topic pair the two-sided truncated-Gaussian
/// moments of all co-assigned ordered clip gaps.
pub fn update_moments(
    states: &[AssignmentState],
    docs: &[VideoDocument],
    k: usize,
    _p: usize,
    sd_floor: f64,
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<TimeParams>>) {
    let d = states.len();
    let dim = states.first().map_or(0, |s| s.v.len());
    let mut mu = vec![0.0; dim];
    for s in states {
        for i in 0..dim {
            mu[i] += s.v[i];
        }
    }
    if d > 0 {
        for x in &mut mu {
            *x /= d as f64;
        }
    }
    let mut sigma = vec![vec![0.0; dim]; dim];
    for s in states {
        for i in 0..dim {
            let di = s.v[i] - mu[i];
            for j in 0..dim {
                sigma[i][j] += di * (s.v[j] - mu[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            if d > 0 {
                sigma[i][j] /= d as f64;
            }
        }
        sigma[i][i] += 1e-6;
    }

    #[derive(Clone, Default)]
    struct SideAcc {
        n: u64,
        sum: f64,
        sumsq: f64,
    }
    let mut pos = vec![vec![SideAcc::default(); k]; k];
    let mut neg = vec![vec![SideAcc::default(); k]; k];
    for (s, doc) in states.iter().zip(docs) {
        let nn = doc.clips.len();
        for m in 0..nn {
            for n in 0..nn {
                if m == n {
                    continue;
                }
                let gap = doc.clips[m].t - doc.clips[n].t;
                let acc = if gap >= 0.0 {
                    &mut pos[s.z1[m]][s.z1[n]]
                } else {
                    &mut neg[s.z1[m]][s.z1[n]]
                };
                acc.n += 1;
                acc.sum += gap;
                acc.sumsq += gap * gap;
            }
        }
    }
    let defaults = TimeParams::default_prior();
    let side = |acc: &SideAcc, dmean: f64, dsd: f64| -> (f64, f64) {
        if acc.n == 0 {
            return (dmean, dsd);
        }
        let mean = acc.sum / acc.n as f64;
        let var = (acc.sumsq / acc.n as f64 - mean * mean).max(0.0);
        (mean, var.sqrt().max(sd_floor))
    };
    let mut theta = vec![vec![defaults.clone(); k]; k];
    for a in 0..k {
        for b in 0..k {
            let np = pos[a][b].n;
            let nn = neg[a][b].n;
            if np + nn == 0 {
                continue;
            }
            let (mean_pos, sd_pos) = side(&pos[a][b], defaults.mean_pos, defaults.sd_pos);
            let (mean_neg, sd_neg) = side(&neg[a][b], defaults.mean_neg, defaults.sd_neg);
            theta[a][b] = TimeParams {
                b: np as f64 / (np + nn) as f64,
                mean_pos,
                sd_pos,
                mean_neg,
                sd_neg,
            };
        }
    }
    (mu, sigma, theta)
}

// ── likelihood trace ──

fn joint_log_likelihood(
    docs: &[VideoDocument],
    states: &[AssignmentState],
    params: &ModelParams,
    ablate_time: bool,
    log_floor: f64,
) -> f64 {
    let split = params.k.saturating_sub(1);
    let mut ll = 0.0;
    for (doc, state) in docs.iter().zip(states) {
        let (v1, v2) = state.v.split_at(split.min(state.v.len()));
        let lp1 = stick_break_log(v1);
        let lp2 = stick_break_log(v2);
        for n in 0..doc.clips.len() {
            ll += lp1[state.z1[n]] + lp2[state.z2[n]];
            ll += params.word_prob_h(state.z1[n], doc.human_words[n]).ln();
            ll += params
                .word_prob_o(state.z1[n], state.z2[n], doc.object_words[n])
                .ln();
        }
        if !ablate_time {
            let nn = doc.clips.len();
            for m in 0..nn {
                for n in 0..nn {
                    if m != n {
                        let gap = doc.clips[m].t - doc.clips[n].t;
                        ll += omega_log_pdf_floored(
                            gap,
                            &params.theta[state.z1[m]][state.z1[n]],
                            log_floor,
                        );
                    }
                }
            }
        }
        if !state.v.is_empty() {
            ll += gaussian_log_pdf(&state.v, &params.mu, &params.sigma);
        }
    }
    ll
}

// ── training ──

fn recount(
    docs: &[VideoDocument],
    states: &[AssignmentState],
    k: usize,
    p: usize,
    nw: usize,
    no: usize,
) -> CountTables {
    let mut counts = CountTables::new(k, p, nw, no);
    for (doc, state) in docs.iter().zip(states) {
        for n in 0..doc.clips.len() {
            counts.add_clip(state.z1[n], state.z2[n], doc.human_words[n], doc.object_words[n]);
        }
    }
    counts
}

/// Fits the model to a corpus by collapsed Gibbs sampling. Deterministic for
/// a fixed config: one seeded generator drives every random choice.
pub fn train(corpus: &Corpus, cfg: &TrainConfig) -> Result<(TrainedModel, Vec<TraceRow>)> {
    cfg.validate()?;
    corpus.validate_words()?;
    if corpus.docs.is_empty() {
        return Err(Error::invalid("corpus has no documents"));
    }
    let total_clips = corpus.total_clips();
    if cfg.k > total_clips {
        return Err(Error::invalid(format!(
            "more action topics ({}) than clips ({})",
            cfg.k, total_clips
        )));
    }
    let (k, p) = (cfg.k, cfg.p);
    let (nw, no) = (corpus.n_human_words, corpus.n_object_words);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::new(k, p, DEFAULT_BETA, DEFAULT_BETA, nw, no);
    let mut states: Vec<AssignmentState> = corpus
        .docs
        .iter()
        .map(|doc| AssignmentState::init(doc.clips.len(), k, p, &mut rng))
        .collect();
    // Word-identity seeding: every clip sharing a human word starts in the
    // same topic, so word ownership begins concentrated. A sweep reassigns
    // whole words far faster than it can assemble them token by token out of
    // an evenly spread start.
    for (doc, state) in corpus.docs.iter().zip(states.iter_mut()) {
        for n in 0..doc.clips.len() {
            state.z1[n] = doc.human_words[n] % k;
        }
    }
    params.counts = recount(&corpus.docs, &states, k, p, nw, no);

    let log_floor = cfg.density_floor.ln();
    let dim = params.v_dim();
    let mut trace = Vec::with_capacity(cfg.iters);
    let mut ts_buf = Vec::new();
    let mut acc1 = Vec::new();
    let mut acc2 = Vec::new();

    for iter in 0..cfg.iters {
        let words_only = cfg.ablate_time || iter < cfg.warmup_iters;
        let chol = cholesky_with_ridge(&params.sigma)
            .ok_or_else(|| Error::runtime("stick covariance lost positive definiteness"))?;
        let mut proposed = 0usize;
        let mut accepted = 0usize;
        for (doc, state) in corpus.docs.iter().zip(states.iter_mut()) {
            times_of(doc, &mut ts_buf);
            let cache = if words_only {
                GapCache::build(&[], &params.theta, log_floor)
            } else {
                GapCache::build(&ts_buf, &params.theta, log_floor)
            };
            let split = k.saturating_sub(1);
            let (v1, v2) = state.v.split_at(split.min(state.v.len()));
            let log_pi1 = stick_break_log(v1);
            let log_pi2 = stick_break_log(v2);
            for n in 0..doc.clips.len() {
                let (wh, wo) = (doc.human_words[n], doc.object_words[n]);
                params.counts.remove_clip(state.z1[n], state.z2[n], wh, wo);
                z1_log_weights_ts(
                    doc,
                    &ts_buf,
                    n,
                    state,
                    &params.counts,
                    &params,
                    &params.theta,
                    &cache,
                    words_only,
                    &log_pi1,
                    &mut acc1,
                );
                let w = rescaled_weights(&acc1);
                state.z1[n] = sample_categorical(&w, &mut rng);
                params.counts.add_clip(state.z1[n], state.z2[n], wh, wo);

                params.counts.remove_object(state.z1[n], state.z2[n], wo);
                z2_log_weights(doc, n, state, &params.counts, &params, &log_pi2, &mut acc2);
                let w = rescaled_weights(&acc2);
                state.z2[n] = sample_categorical(&w, &mut rng);
                params.counts.add_object(state.z1[n], state.z2[n], wo);
            }
            let acc = mh_update_v(
                state,
                &params.mu,
                &chol,
                k,
                p,
                cfg.mh_proposals_per_doc,
                &mut rng,
            );
            accepted += acc;
            proposed += cfg.mh_proposals_per_doc;
        }
        let (mu, mut sigma, theta) = update_moments(&states, &corpus.docs, k, p, cfg.sd_floor);
        if cfg.ablate_correlation {
            for i in 0..dim {
                for j in 0..dim {
                    if i != j {
                        sigma[i][j] = 0.0;
                    }
                }
            }
        }
        params.mu = mu;
        params.sigma = sigma;
        params.theta = theta;

        debug_assert_eq!(params.counts, recount(&corpus.docs, &states, k, p, nw, no));

        let loglik =
            joint_log_likelihood(&corpus.docs, &states, &params, cfg.ablate_time, log_floor);
        let rate = if proposed > 0 {
            accepted as f64 / proposed as f64
        } else {
            0.0
        };
        trace.push(TraceRow {
            iter,
            loglik,
            mh_accept_rate: rate,
        });
    }

    let train_segments: Vec<Vec<Segment>> = corpus
        .docs
        .iter()
        .zip(&states)
        .enumerate()
        .map(|(i, (doc, state))| extract_segments(doc, i, state))
        .collect();
    let train_frame_topics: Vec<Vec<usize>> = corpus
        .docs
        .iter()
        .zip(&states)
        .map(|(doc, state)| frame_topics(doc, &state.z1))
        .collect();
    let train_ground_truth = corpus.docs.iter().map(|d| d.ground_truth.clone()).collect();

    Ok((
        TrainedModel {
            params,
            config: cfg.clone(),
            dict_refs: DictRefs::default(),
            states,
            train_segments,
            train_frame_topics,
            train_ground_truth,
        },
        trace,
    ))
}

// ── inference ──

/// One Gibbs sweep over a held-out document against frozen counts: the
/// document's own assignments never enter the tables. Used by inference and
/// by the small-chain statistical checks.
pub fn gibbs_sweep_frozen(
    doc: &VideoDocument,
    state: &mut AssignmentState,
    params: &ModelParams,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) {
    let mut ts = Vec::new();
    times_of(doc, &mut ts);
    let cache = if cfg.ablate_time {
        GapCache::build(&[], &params.theta, cfg.density_floor.ln())
    } else {
        GapCache::build(&ts, &params.theta, cfg.density_floor.ln())
    };
    let split = params.k.saturating_sub(1);
    let (v1, v2) = state.v.split_at(split.min(state.v.len()));
    let log_pi1 = stick_break_log(v1);
    let log_pi2 = stick_break_log(v2);
    let mut acc = Vec::new();
    for n in 0..doc.clips.len() {
        z1_log_weights_ts(
            doc,
            &ts,
            n,
            state,
            &params.counts,
            params,
            &params.theta,
            &cache,
            cfg.ablate_time,
            &log_pi1,
            &mut acc,
        );
        let w = rescaled_weights(&acc);
        state.z1[n] = sample_categorical(&w, rng);
        z2_log_weights(doc, n, state, &params.counts, params, &log_pi2, &mut acc);
        let w = rescaled_weights(&acc);
        state.z2[n] = sample_categorical(&w, rng);
    }
}

/// Assigns topics to a held-out video under a trained model. Counts stay
/// frozen; the document's sticks are refreshed by the same MH step used in
/// training, against the trained prior. Fills `z1_prob` with the final
/// normalized conditional probability of each clip's assigned topic.
pub fn infer(
    model: &TrainedModel,
    doc: &VideoDocument,
    iters: usize,
    seed: u64,
) -> Result<AssignmentState> {
    let params = &model.params;
    let cfg = &model.config;
    if iters == 0 {
        return Err(Error::invalid("iters must be at least 1"));
    }
    for &w in &doc.human_words {
        if w >= params.counts.n_human_words() {
            return Err(Error::invalid(format!(
                "human word {} outside dictionary of size {}",
                w,
                params.counts.n_human_words()
            )));
        }
    }
    for &w in &doc.object_words {
        if w >= params.counts.n_object_words() {
            return Err(Error::invalid(format!(
                "object word {} outside dictionary of size {}",
                w,
                params.counts.n_object_words()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = AssignmentState::init(doc.clips.len(), params.k, params.p, &mut rng);
    if doc.clips.is_empty() {
        return Ok(state);
    }
    let chol = cholesky_with_ridge(&params.sigma)
        .ok_or_else(|| Error::runtime("stick covariance lost positive definiteness"))?;
    for _ in 0..iters {
        gibbs_sweep_frozen(doc, &mut state, params, cfg, &mut rng);
        mh_update_v(
            &mut state,
            &params.mu,
            &chol,
            params.k,
            params.p,
            cfg.mh_proposals_per_doc,
            &mut rng,
        );
    }
    state.z1_prob = (0..doc.clips.len())
        .map(|n| {
            let w = z1_conditional_frozen(doc, n, &state, params, cfg);
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                w[state.z1[n]] / total
            } else {
                1.0 / params.k as f64
            }
        })
        .collect();
    Ok(state)
}

/// Writes the per-iteration diagnostics trace as CSV.
pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut out = String::from("iter,loglik,mh_accept_rate\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.iter, r.loglik, r.mh_accept_rate));
    }
    write_string(path, &out)
}
