//! Permutation test for label structure in latent positions.
//!
//! The statistic contrasts mean within-label and mean cross-label distances
//! between latent vectors. Its null distribution is built from "k-flips":
//! label perturbations that move vertices across spatial boundaries while
//! keeping every label's size fixed.

use std::collections::{BTreeMap, VecDeque};

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{check_finite, check_square, check_symmetric};
use crate::rng::{self, tag};

pub const DEFAULT_RETRY_BUDGET: usize = 10_000;

/// Label of every vertex, as indices into `names`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelAssignment {
    labels: Vec<usize>,
    names: Vec<String>,
}

impl LabelAssignment {
    /// Every label in `0..names.len()` must be used at least once.
    pub fn new(labels: Vec<usize>, names: Vec<String>) -> Result<Self> {
        let mut counts = vec![0usize; names.len()];
        for (i, &l) in labels.iter().enumerate() {
            if l >= names.len() {
                return Err(Error::invalid(format!("vertex {i} has label index {l} outside the label set")));
            }
            counts[l] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!("label '{}' has no members", names[empty])));
        }
        Ok(LabelAssignment { labels, names })
    }

    /// Labels `0..k` named by their index.
    pub fn from_indices(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        LabelAssignment::new(labels, (0..k).map(|i| i.to_string()).collect())
    }

    /// Label set in order of first appearance.
    pub fn from_names<S: AsRef<str>>(per_vertex: &[S]) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut index = BTreeMap::new();
        let labels = per_vertex
            .iter()
            .map(|s| {
                let s = s.as_ref();
                *index.entry(s.to_string()).or_insert_with(|| {
                    names.push(s.to_string());
                    names.len() - 1
                })
            })
            .collect();
        LabelAssignment::new(labels, names)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn num_labels(&self) -> usize {
        self.names.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.names.len()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }
}

/// Binary symmetric hollow adjacency between vertices, stored as neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialAdjacency {
    neighbors: Vec<Vec<usize>>,
}

impl SpatialAdjacency {
    pub fn new(s: &Array2<f64>) -> Result<Self> {
        let view = s.view();
        let n = check_square(&view)?;
        check_finite(&view)?;
        check_symmetric(&view, 0.0)?;
        for ((row, col), &value) in s.indexed_iter() {
            if value != 0.0 && value != 1.0 {
                return Err(Error::NotBinary { row, col, value });
            }
            if row == col && value != 0.0 {
                return Err(Error::NonZeroDiagonal { index: row, value });
            }
        }
        let neighbors = (0..n).map(|i| (0..n).filter(|&j| s[[i, j]] == 1.0).collect()).collect();
        Ok(SpatialAdjacency { neighbors })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut s = Array2::zeros((n, n));
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::invalid(format!("invalid spatial edge ({i}, {j}) for n = {n}")));
            }
            s[[i, j]] = 1.0;
            s[[j, i]] = 1.0;
        }
        SpatialAdjacency::new(&s)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Number of connected components of each label's induced subgraph.
    pub fn label_components(&self, labels: &[usize], num_labels: usize) -> Vec<usize> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut components = vec![0; num_labels];
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let l = labels[start];
            components[l] += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in &self.neighbors[v] {
                    if !seen[w] && labels[w] == l {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        components
    }

    /// Labels whose induced subgraph is disconnected.
    pub fn disconnected_labels(&self, assignment: &LabelAssignment) -> Vec<usize> {
        self.label_components(assignment.labels(), assignment.num_labels())
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 1)
            .map(|(l, _)| l)
            .collect()
    }
}

fn check_alignment(n: usize, l: &LabelAssignment) -> Result<()> {
    if l.n() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: l.n() });
    }
    Ok(())
}

/// Euclidean distances between the rows of `x`.
pub fn pairwise_distances(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (&x.row(i) - &x.row(j)).mapv(|e| e * e).sum().sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Statistic from a precomputed distance matrix.
pub fn statistic_from_distances(dist: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    let n = dist.nrows();
    let (mut within, mut nw, mut across, mut na) = (0.0, 0u64, 0.0, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            if labels[i] == labels[j] {
                within += dist[[i, j]];
                nw += 1;
            } else {
                across += dist[[i, j]];
                na += 1;
            }
        }
    }
    if nw == 0 {
        return Err(Error::invalid("no two vertices share a label"));
    }
    if na == 0 {
        return Err(Error::invalid("all vertices share one label"));
    }
    Ok(within / nw as f64 - across / na as f64)
}

/// Mean within-label distance minus mean cross-label distance between rows of `x`.
pub fn test_statistic(x: &Array2<f64>, l: &LabelAssignment) -> Result<f64> {
    check_alignment(x.nrows(), l)?;
    check_finite(&x.view())?;
    statistic_from_distances(&pairwise_distances(x), l.labels())
}

/// The vertices touched by one flip: `j1` takes the label of `i1` and `i2`
/// takes the label of `j2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OneFlip {
    pub i1: usize,
    pub j1: usize,
    pub i2: usize,
    pub j2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlipOptions {
    /// Reject flips that split a label into more spatial components.
    pub contiguity: bool,
    /// First-pair draws allowed per flip.
    pub retry_budget: usize,
}

impl Default for FlipOptions {
    fn default() -> Self {
        FlipOptions { contiguity: true, retry_budget: DEFAULT_RETRY_BUDGET }
    }
}

/// Ordered adjacent pairs `(i, j)` with different labels.
fn boundary_pairs(labels: &[usize], s: &SpatialAdjacency) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..s.n() {
        for &j in s.neighbors(i) {
            if labels[i] != labels[j] {
                out.push((i, j));
            }
        }
    }
    out
}

/// Second pairs admissible after choosing `(i1, j1)`.
fn second_pairs(labels: &[usize], s: &SpatialAdjacency, i1: usize, j1: usize) -> Vec<(usize, usize)> {
    let (a, b) = (labels[i1], labels[j1]);
    let mut out = Vec::new();
    for i2 in 0..s.n() {
        if labels[i2] != a || i2 == i1 {
            continue;
        }
        for &j2 in s.neighbors(i2) {
            if labels[j2] == b && j2 != j1 {
                out.push((i2, j2));
            }
        }
    }
    out
}

fn apply(labels: &mut [usize], f: &OneFlip) {
    let (a, b) = (labels[f.i1], labels[f.j1]);
    labels[f.j1] = a;
    labels[f.i2] = b;
}

/// One uniform flip applied in place; returns the chosen vertices.
pub fn one_flip_in_place<R: Rng + ?Sized>(
    labels: &mut [usize],
    num_labels: usize,
    s: &SpatialAdjacency,
    options: &FlipOptions,
    rng: &mut R,
) -> Result<OneFlip> {
    let first = boundary_pairs(labels, s);
    if first.is_empty() {
        return Err(Error::FlipExhausted { attempts: 0 });
    }
    let before = if options.contiguity { Some(s.label_components(labels, num_labels)) } else { None };
    for _ in 0..options.retry_budget {
        let (i1, j1) = first[rng.random_range(0..first.len())];
        let second = second_pairs(labels, s, i1, j1);
        if second.is_empty() {
            continue;
        }
        let (i2, j2) = second[rng.random_range(0..second.len())];
        let flip = OneFlip { i1, j1, i2, j2 };
        if let Some(before) = &before {
            let mut trial = labels.to_vec();
            apply(&mut trial, &flip);
            let after = s.label_components(&trial, num_labels);
            if after.iter().zip(before).any(|(a, b)| a > b) {
                continue;
            }
        }
        apply(labels, &flip);
        return Ok(flip);
    }
    Err(Error::FlipExhausted { attempts: options.retry_budget })
}

fn check_spatial(l: &LabelAssignment, s: &SpatialAdjacency) -> Result<()> {
    if s.n() != l.n() {
        return Err(Error::DimensionMismatch { expected: l.n(), actual: s.n() });
    }
    Ok(())
}

/// A uniform 1-flip of `l` along the spatial adjacency `s`.
pub fn uniform_one_flip<R: Rng + ?Sized>(
    l: &LabelAssignment,
    s: &SpatialAdjacency,
    options: &FlipOptions,
    rng: &mut R,
) -> Result<(LabelAssignment, OneFlip)> {
    check_spatial(l, s)?;
    let mut labels = l.labels.clone();
    let flip = one_flip_in_place(&mut labels, l.num_labels(), s, options, rng)?;
    Ok((LabelAssignment { labels, names: l.names.clone() }, flip))
}

/// `k` sequential uniform 1-flips.
pub fn uniform_k_flip<R: Rng + ?Sized>(
    l: &LabelAssignment,
    s: &SpatialAdjacency,
    k: usize,
    options: &FlipOptions,
    rng: &mut R,
) -> Result<LabelAssignment> {
    if k == 0 {
        return Err(Error::invalid("number of flips must be >= 1"));
    }
    check_spatial(l, s)?;
    let mut labels = l.labels.clone();
    for _ in 0..k {
        one_flip_in_place(&mut labels, l.num_labels(), s, options, rng)?;
    }
    Ok(LabelAssignment { labels, names: l.names.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermTestConfig {
    pub k: usize,
    pub replicates: usize,
    pub seed: u64,
    pub flip: FlipOptions,
    /// Report `(count + 1) / (R + 1)` instead of `count / R`.
    pub smoothed: bool,
}

impl PermTestConfig {
    pub fn new(k: usize, replicates: usize, seed: u64) -> Self {
        PermTestConfig { k, replicates, seed, flip: FlipOptions::default(), smoothed: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermTestResult {
    pub k: usize,
    pub replicates: usize,
    pub t_observed: f64,
    pub p_value: f64,
    /// Null replicates with a strictly smaller statistic.
    pub count_below: usize,
    pub null_samples: Vec<f64>,
}

/// Compares `T(X, l)` against `T(X, l')` for independent k-flips `l'` of `l`.
pub fn perm_test(x: &Array2<f64>, l: &LabelAssignment, s: &SpatialAdjacency, config: &PermTestConfig) -> Result<PermTestResult> {
    if config.replicates == 0 {
        return Err(Error::invalid("replicate count must be >= 1"));
    }
    if config.k == 0 {
        return Err(Error::invalid("number of flips must be >= 1"));
    }
    check_alignment(x.nrows(), l)?;
    check_spatial(l, s)?;
    check_finite(&x.view())?;
    let dist = pairwise_distances(x);
    let t_observed = statistic_from_distances(&dist, l.labels())?;
    let null_samples: Vec<f64> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(config.seed, &[tag::PERMUTATION, config.k as u64, r as u64]);
            let flipped = uniform_k_flip(l, s, config.k, &config.flip, &mut rng)?;
            statistic_from_distances(&dist, flipped.labels())
        })
        .collect::<Result<_>>()?;
    let count_below = null_samples.iter().filter(|&&t| t < t_observed).count();
    let p_value = if config.smoothed {
        (count_below + 1) as f64 / (config.replicates + 1) as f64
    } else {
        count_below as f64 / config.replicates as f64
    };
    Ok(PermTestResult { k: config.k, replicates: config.replicates, t_observed, p_value, count_below, null_samples })
}
