//! Model state shared by the trainer, the detector and the generator.
//!
//! Each video d draws a real vector v_d from a shared Gaussian N(mu, Sigma).
//! The first K-1 entries map to a distribution pi1 over K action topics via
//! logistic stick-breaking, the remaining P-1 entries map to pi2 over P
//! object topics. Because action sticks and object sticks sit in one jointly
//! Gaussian vector, topics that tend to co-occur become correlated through
//! Sigma. Each clip n in the video draws an action topic z1 ~ pi1 and an
//! object topic z2 ~ pi2; its human word comes from the topic's word
//! distribution and its object word from a distribution indexed by the
//! (action topic, object topic) pair. Word distributions are collapsed out
//! under symmetric Dirichlet smoothing and only their counts are kept.
//!
//! Time enters through pairwise gaps: for clips m, n the signed gap
//! t_m - t_n follows a two-sided density indexed by the topic pair
//! (z1_m, z1_n): a Bernoulli weight b on the non-negative side times a
//! Gaussian truncated to [0, inf), plus (1-b) times a Gaussian truncated to
//! (-inf, 0), each renormalized so the density integrates to one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    log_sigmoid, sigmoid, standard_normal_cdf, standard_normal_log_pdf, LOG_INV_SQRT_2PI,
};

/// Hard floor applied to every evaluated time density.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Default floor for the truncated-Gaussian standard deviations.
pub const SD_FLOOR: f64 = 0.01;

/// Default Dirichlet smoothing for both word channels.
pub const DEFAULT_BETA: f64 = 0.01;

// ── stick-breaking ──

/// Maps an unconstrained vector of length n-1 to a point on the n-simplex:
/// pi_k = sigmoid(v_k) * prod_{l<k} sigmoid(-v_l), with the last component
/// absorbing the remaining stick so the entries sum to one exactly.
pub fn stick_break(v: &[f64]) -> Vec<f64> {
    let n = v.len() + 1;
    let mut pi = Vec::with_capacity(n);
    let mut tail = 1.0;
    for &vk in v {
        pi.push(sigmoid(vk) * tail);
        tail *= sigmoid(-vk);
    }
    pi.push(tail);
    pi
}

/// log(stick_break(v)); stays finite even when a component underflows.
pub fn stick_break_log(v: &[f64]) -> Vec<f64> {
    let n = v.len() + 1;
    let mut log_pi = Vec::with_capacity(n);
    let mut log_tail = 0.0;
    for &vk in v {
        log_pi.push(log_sigmoid(vk) + log_tail);
        log_tail += log_sigmoid(-vk);
    }
    log_pi.push(log_tail);
    log_pi
}

/// Stick vector of length n-1 whose image is the uniform n-simplex point;
/// the neutral starting point for per-document sticks and their prior mean.
pub fn uniform_sticks(n: usize) -> Vec<f64> {
    (0..n.saturating_sub(1))
        .map(|j| -(((n - 1 - j) as f64).ln()))
        .collect()
}

// ── relative-time density ──

/// Parameters of the two-sided gap density for one ordered topic pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeParams {
    /// Probability mass on gaps >= 0.
    pub b: f64,
    pub mean_pos: f64,
    pub sd_pos: f64,
    pub mean_neg: f64,
    pub sd_neg: f64,
}

impl TimeParams {
    pub fn new(b: f64, mean_pos: f64, sd_pos: f64, mean_neg: f64, sd_neg: f64) -> Self {
        TimeParams {
            b: b.clamp(0.0, 1.0),
            mean_pos,
            sd_pos: sd_pos.max(SD_FLOOR),
            mean_neg,
            sd_neg: sd_neg.max(SD_FLOOR),
        }
    }

    /// Uninformative starting point: even sides, gentle quarter-offset modes.
    pub fn default_prior() -> Self {
        TimeParams::new(0.5, 0.25, 0.5, -0.25, 0.5)
    }
}

/// Density of a signed time gap under `tp`, floored at `DENSITY_FLOOR`.
pub fn omega_time_pdf(t: f64, tp: &TimeParams) -> f64 {
    omega_time_log_pdf(t, tp).exp()
}

/// Log density of a signed time gap. The positive branch is a Gaussian
/// truncated to [0, inf) and renormalized by its surviving mass; likewise
/// the negative branch on (-inf, 0).
pub fn omega_time_log_pdf(t: f64, tp: &TimeParams) -> f64 {
    omega_log_pdf_floored(t, tp, DENSITY_FLOOR.ln())
}

pub(crate) fn omega_log_pdf_floored(t: f64, tp: &TimeParams, log_floor: f64) -> f64 {
    let (side_mass, mean, sd) = if t >= 0.0 {
        (tp.b, tp.mean_pos, tp.sd_pos)
    } else {
        (1.0 - tp.b, tp.mean_neg, tp.sd_neg)
    };
    if side_mass <= 0.0 {
        return log_floor;
    }
    // Mass surviving truncation: P(X >= 0) on the positive side, P(X < 0)
    // on the negative side.
    let surviving = if t >= 0.0 {
        standard_normal_cdf(mean / sd)
    } else {
        standard_normal_cdf(-mean / sd)
    };
    let z = (t - mean) / sd;
    let log_pdf =
        side_mass.ln() + standard_normal_log_pdf(z) - sd.ln() - surviving.max(1e-300).ln();
    log_pdf.max(log_floor)
}

// ── collapsed word counts ──

/// Assignment counts backing the collapsed word distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTables {
    /// n_kw[k][w]: clips with action topic k and human word w.
    pub n_kw: Vec<Vec<u32>>,
    /// n_k[k]: clips with action topic k.
    pub n_k: Vec<u32>,
    /// n_kpw[k][p][w]: clips with topic pair (k, p) and object word w.
    pub n_kpw: Vec<Vec<Vec<u32>>>,
    /// n_kp[k][p]: clips with topic pair (k, p).
    pub n_kp: Vec<Vec<u32>>,
}

impl CountTables {
    pub fn new(k: usize, p: usize, n_human_words: usize, n_object_words: usize) -> Self {
        CountTables {
            n_kw: vec![vec![0; n_human_words]; k],
            n_k: vec![0; k],
            n_kpw: vec![vec![vec![0; n_object_words]; p]; k],
            n_kp: vec![vec![0; p]; k],
        }
    }

    pub fn n_human_words(&self) -> usize {
        self.n_kw.first().map_or(0, |r| r.len())
    }

    pub fn n_object_words(&self) -> usize {
        self.n_kpw
            .first()
            .and_then(|p| p.first())
            .map_or(0, |r| r.len())
    }

    pub fn add_clip(&mut self, k: usize, p: usize, wh: usize, wo: usize) {
        self.n_kw[k][wh] += 1;
        self.n_k[k] += 1;
        self.n_kpw[k][p][wo] += 1;
        self.n_kp[k][p] += 1;
    }

    pub fn remove_clip(&mut self, k: usize, p: usize, wh: usize, wo: usize) {
        debug_assert!(self.n_kw[k][wh] > 0 && self.n_kpw[k][p][wo] > 0);
        self.n_kw[k][wh] -= 1;
        self.n_k[k] -= 1;
        self.n_kpw[k][p][wo] -= 1;
        self.n_kp[k][p] -= 1;
    }

    pub fn add_object(&mut self, k: usize, p: usize, wo: usize) {
        self.n_kpw[k][p][wo] += 1;
        self.n_kp[k][p] += 1;
    }

    pub fn remove_object(&mut self, k: usize, p: usize, wo: usize) {
        debug_assert!(self.n_kpw[k][p][wo] > 0);
        self.n_kpw[k][p][wo] -= 1;
        self.n_kp[k][p] -= 1;
    }

    /// Marginals must agree with their per-word tables.
    pub fn is_consistent(&self) -> bool {
        self.n_k
            .iter()
            .zip(&self.n_kw)
            .all(|(&nk, row)| row.iter().sum::<u32>() == nk)
            && self
                .n_kp
                .iter()
                .zip(&self.n_kpw)
                .all(|(row_kp, row_kpw)| {
                    row_kp
                        .iter()
                        .zip(row_kpw)
                        .all(|(&nkp, wrow)| wrow.iter().sum::<u32>() == nkp)
                })
    }
}

// ── model parameters ──

/// Everything the sampler and detector need besides per-video states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub beta1: f64,
    pub beta12: f64,
    /// Mean of the shared stick Gaussian, length (K-1)+(P-1).
    pub mu: Vec<f64>,
    /// Covariance of the shared stick Gaussian, row-major square matrix.
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<f64>>,
    /// theta[k][l]: gap density for an ordered action-topic pair (k, l).
    pub theta: Vec<Vec<TimeParams>>,
    pub counts: CountTables,
}

impl ModelParams {
    pub fn new(k: usize, p: usize, beta1: f64, beta12: f64, n_human: usize, n_object: usize) -> Self {
        let mut mu = uniform_sticks(k);
        mu.extend(uniform_sticks(p));
        let dim = (k - 1) + (p - 1);
        ModelParams {
            k,
            p,
            beta1,
            beta12,
            mu,
            sigma: identity(dim),
            theta: vec![vec![TimeParams::default_prior(); k]; k],
            counts: CountTables::new(k, p, n_human, n_object),
        }
    }

    pub fn v_dim(&self) -> usize {
        (self.k - 1) + (self.p - 1)
    }

    pub fn split_v<'a>(&self, v: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        v.split_at(self.k - 1)
    }

    /// Smoothed probability of human word `w` under action topic `k`.
    pub fn word_prob_h(&self, k: usize, w: usize) -> f64 {
        let nw = self.counts.n_human_words() as f64;
        (self.counts.n_kw[k][w] as f64 + self.beta1)
            / (self.counts.n_k[k] as f64 + nw * self.beta1)
    }

    /// Smoothed probability of object word `w` under topic pair (k, p).
    pub fn word_prob_o(&self, k: usize, p: usize, w: usize) -> f64 {
        let no = self.counts.n_object_words() as f64;
        (self.counts.n_kpw[k][p][w] as f64 + self.beta12)
            / (self.counts.n_kp[k][p] as f64 + no * self.beta12)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.p < 1 {
            return Err(Error::invalid("K and P must be at least 1"));
        }
        if self.mu.len() != self.v_dim() {
            return Err(Error::invalid(format!(
                "mu has length {} but (K-1)+(P-1) = {}",
                self.mu.len(),
                self.v_dim()
            )));
        }
        if self.sigma.len() != self.v_dim()
            || self.sigma.iter().any(|row| row.len() != self.v_dim())
        {
            return Err(Error::invalid("Sigma must be square of side (K-1)+(P-1)"));
        }
        if self.theta.len() != self.k || self.theta.iter().any(|row| row.len() != self.k) {
            return Err(Error::invalid("theta must be a K x K table"));
        }
        if self.counts.n_kw.len() != self.k || self.counts.n_kpw.len() != self.k {
            return Err(Error::invalid("count tables do not match K"));
        }
        Ok(())
    }
}

pub(crate) fn identity(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

// ── per-video assignments ──

/// Sampler state for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentState {
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
    /// Packed stick vector, length (K-1)+(P-1).
    pub v: Vec<f64>,
    pub pi1: Vec<f64>,
    pub pi2: Vec<f64>,
    /// Conditional probability of each clip's final z1 assignment, filled in
    /// after the last sweep; used as segment confidence downstream.
    #[serde(default)]
    pub z1_prob: Vec<f64>,
}

impl AssignmentState {
    pub fn init(n_clips: usize, k: usize, p: usize, rng: &mut impl Rng) -> Self {
        // Action topics start as contiguous equal runs: clips of one action
        // are adjacent, and a sweep can merge runs far more easily than it
        // can carve structure out of a uniform scatter.
        let z1 = (0..n_clips).map(|n| (n * k / n_clips.max(1)).min(k - 1)).collect();
        let z2 = (0..n_clips).map(|_| rng.gen_range(0..p)).collect();
        // Unit-normal scatter around the uniform stick point. The stick prior
        // is refit from the per-video vectors each sweep, so identical starts
        // would collapse its covariance to the ridge and the independence-MH
        // proposals could never differentiate the videos.
        let mut v = uniform_sticks(k);
        v.extend(uniform_sticks(p));
        for x in &mut v {
            *x += rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let pi1 = stick_break(&v[..k - 1]);
        let pi2 = stick_break(&v[k - 1..]);
        AssignmentState {
            z1,
            z2,
            v,
            pi1,
            pi2,
            z1_prob: Vec::new(),
        }
    }

    pub fn refresh_pi(&mut self, k: usize) {
        self.pi1 = stick_break(&self.v[..k - 1]);
        self.pi2 = stick_break(&self.v[k - 1..]);
    }
}

// ── generative model ──

/// Explicit-parameter counterpart of the collapsed model, for synthesizing
/// corpora with known structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub k: usize,
    pub p: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    /// phi1[k][w]: human-word distribution of action topic k.
    pub phi1: Vec<Vec<f64>>,
    /// phi12[k][p][w]: object-word distribution of topic pair (k, p).
    pub phi12: Vec<Vec<Vec<f64>>>,
    /// Optional per-word feature centers (human, object); when present,
    /// generated clips carry these centers as their pooled features.
    pub word_centers: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
}

/// One generated video with its latent assignments attached.
#[derive(Debug, Clone)]
pub struct GeneratedDoc {
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
    pub human_words: Vec<usize>,
    pub object_words: Vec<usize>,
    /// Equi-spaced clip times (n + 0.5) / n_clips.
    pub t: Vec<f64>,
}

impl GenerativeModel {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.p < 1 {
            return Err(Error::invalid("K and P must be at least 1"));
        }
        let dim = (self.k - 1) + (self.p - 1);
        if self.mu.len() != dim || self.sigma.len() != dim {
            return Err(Error::invalid("mu/Sigma dimensions must be (K-1)+(P-1)"));
        }
        let simplex = |row: &[f64]| -> bool {
            row.iter().all(|&x| x >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        };
        if self.phi1.len() != self.k || self.phi1.iter().any(|r| !simplex(r)) {
            return Err(Error::invalid("phi1 rows must be distributions"));
        }
        if self.phi12.len() != self.k
            || self
                .phi12
                .iter()
                .any(|pk| pk.len() != self.p || pk.iter().any(|r| !simplex(r)))
        {
            return Err(Error::invalid("phi12 rows must be distributions"));
        }
        Ok(())
    }

    /// Draws `n_docs` videos of `n_clips` clips each. Timestamps are induced
    /// by clip order (equi-spaced), not sampled.
    pub fn generate(&self, n_docs: usize, n_clips: usize, rng: &mut impl Rng) -> Result<Vec<GeneratedDoc>> {
        self.validate()?;
        let chol = cholesky_with_ridge(&self.sigma)
            .ok_or_else(|| Error::invalid("Sigma is not positive semi-definite"))?;
        let dim = self.mu.len();
        let mut docs = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let eps: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let mut v = self.mu.clone();
            for i in 0..dim {
                for j in 0..=i {
                    v[i] += chol[(i, j)] * eps[j];
                }
            }
            let pi1 = stick_break(&v[..self.k - 1]);
            let pi2 = stick_break(&v[self.k - 1..]);
            let mut doc = GeneratedDoc {
                z1: Vec::with_capacity(n_clips),
                z2: Vec::with_capacity(n_clips),
                human_words: Vec::with_capacity(n_clips),
                object_words: Vec::with_capacity(n_clips),
                t: (0..n_clips).map(|n| (n as f64 + 0.5) / n_clips as f64).collect(),
            };
            for _ in 0..n_clips {
                let k = sample_categorical(&pi1, rng);
                let p = sample_categorical(&pi2, rng);
                doc.z1.push(k);
                doc.z2.push(p);
                doc.human_words.push(sample_categorical(&self.phi1[k], rng));
                doc.object_words
                    .push(sample_categorical(&self.phi12[k][p], rng));
            }
            docs.push(doc);
        }
        Ok(docs)
    }
}

/// Cholesky factor of a symmetric matrix; retries once with a small ridge
/// before giving up.
pub(crate) fn cholesky_with_ridge(m: &[Vec<f64>]) -> Option<nalgebra::DMatrix<f64>> {
    let dim = m.len();
    let dm = nalgebra::DMatrix::from_fn(dim, dim, |i, j| m[i][j]);
    if let Some(c) = dm.clone().cholesky() {
        return Some(c.l());
    }
    let ridged = dm + nalgebra::DMatrix::identity(dim, dim) * 1e-8;
    ridged.cholesky().map(|c| c.l())
}

pub(crate) fn sample_categorical(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Gaussian log density of `v` under (mu, Sigma); used by the trace.
pub(crate) fn gaussian_log_pdf(v: &[f64], mu: &[f64], sigma: &[Vec<f64>]) -> f64 {
    let dim = v.len();
    let Some(l) = cholesky_with_ridge(sigma) else {
        return f64::NEG_INFINITY;
    };
    // Solve L y = (v - mu); log det = 2 sum log L_ii.
    let mut y = vec![0.0; dim];
    for i in 0..dim {
        let mut s = v[i] - mu[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    let log_det: f64 = (0..dim).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    let quad: f64 = y.iter().map(|x| x * x).sum();
    dim as f64 * LOG_INV_SQRT_2PI - 0.5 * log_det - 0.5 * quad
}
