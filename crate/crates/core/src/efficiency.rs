//! Mean squared error and relative efficiency of the sample mean versus the
//! low-rank estimator: closed-form approximations, Monte Carlo experiments on
//! stochastic blockmodels, and cross-validation on observed batches.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dimselect::DimSelectMethod;
use crate::error::{Error, Result};
use crate::estimator::estimate_from_mean;
use crate::graph::{offdiag_mse, sample_mean, GraphBatch, ProbabilityMatrix};
use crate::models::{sample_iem_mean, sample_memberships, sbm_probability_matrix, validate_rho, SbmParams};
use crate::rng::{self, tag};
use crate::spectral;

/// Floor for relative-efficiency denominators.
pub const RE_EPSILON: f64 = 1e-12;
pub const DEFAULT_BOOTSTRAP: usize = 500;

/// Header shared by experiment and cross-validation CSV reports.
pub const REPORT_CSV_HEADER: &str = "n,m,block_s,block_t,mse_abar,mse_phat,re,scaled_re,theory_scaled_re,ci_halfwidth";

/// `E[(Abar_ij - P_ij)^2] = p (1 - p) / m`.
pub fn abar_mse_theory(p: f64, m: usize) -> f64 {
    p * (1.0 - p) / m as f64
}

fn inverse_rho_sum(rho: &[f64], s: usize, t: usize) -> Result<f64> {
    if s >= rho.len() || t >= rho.len() {
        return Err(Error::invalid(format!("block index out of range for K = {}", rho.len())));
    }
    if rho[s] <= 0.0 || rho[t] <= 0.0 {
        return Err(Error::invalid("block proportions must be positive"));
    }
    Ok(1.0 / rho[s] + 1.0 / rho[t])
}

/// Large-`N` mean squared error of the low-rank estimate for a pair in
/// blocks `(s, t)`: `(1/rho_s + 1/rho_t) p (1 - p) / (m n)`.
pub fn phat_mse_theory(rho: &[f64], s: usize, t: usize, p: f64, m: usize, n: usize) -> Result<f64> {
    Ok(inverse_rho_sum(rho, s, t)? * p * (1.0 - p) / (m * n) as f64)
}

/// Approximate relative efficiency `(1/rho_s + 1/rho_t) / n`.
pub fn approx_re_theory(rho: &[f64], s: usize, t: usize, n: usize) -> Result<f64> {
    Ok(inverse_rho_sum(rho, s, t)? / n as f64)
}

/// Second moment `Delta = sum_k rho_k nu_k nu_k^T` of the latent-position
/// mixture.
pub fn delta_matrix(nu: &Array2<f64>, rho: &[f64]) -> Result<Array2<f64>> {
    if nu.nrows() != rho.len() {
        return Err(Error::DimensionMismatch { expected: nu.nrows(), actual: rho.len() });
    }
    let d = nu.ncols();
    let mut delta = Array2::zeros((d, d));
    for (row, &r) in nu.rows().into_iter().zip(rho) {
        let v = row.to_owned().insert_axis(ndarray::Axis(1));
        delta = delta + r * v.dot(&v.t());
    }
    Ok(delta)
}

/// Limiting covariance of a latent-position estimate at `x`:
/// `Delta^-1 (sum_k rho_k nu_k nu_k^T (x.nu_k - (x.nu_k)^2)) Delta^-1`.
pub fn sigma_matrix(nu: &Array2<f64>, rho: &[f64], x: &Array1<f64>) -> Result<Array2<f64>> {
    validate_rho(rho)?;
    if x.len() != nu.ncols() {
        return Err(Error::DimensionMismatch { expected: nu.ncols(), actual: x.len() });
    }
    let delta = delta_matrix(nu, rho)?;
    let pairs = spectral::eig_sym(&delta)?;
    let scale = pairs.values[0].abs().max(f64::MIN_POSITIVE);
    if pairs.values[pairs.len() - 1] <= 1e-12 * scale {
        return Err(Error::Singular);
    }
    let inv_values = pairs.values.mapv(|v| 1.0 / v);
    let delta_inv = spectral::EigenPairs { values: inv_values, vectors: pairs.vectors }.recompose();

    let d = nu.ncols();
    let mut inner = Array2::zeros((d, d));
    for (row, &r) in nu.rows().into_iter().zip(rho) {
        let ip = x.dot(&row);
        let v = row.to_owned().insert_axis(ndarray::Axis(1));
        inner = inner + (r * (ip - ip * ip)) * v.dot(&v.t());
    }
    let sigma = delta_inv.dot(&inner).dot(&delta_inv);
    Ok((&sigma + &sigma.t()) / 2.0)
}

/// Largest deviation over block pairs `(s, t)` of
/// `nu_s' Sigma(nu_t) nu_s` from `nu_s'nu_t (1 - nu_s'nu_t) / rho_s`.
/// The identity holds when `nu` is square and invertible.
pub fn sigma_identity_residual(nu: &Array2<f64>, rho: &[f64]) -> Result<f64> {
    let k = nu.nrows();
    let mut worst: f64 = 0.0;
    for s in 0..k {
        let ns = nu.row(s).to_owned();
        for t in 0..k {
            let nt = nu.row(t).to_owned();
            let sigma = sigma_matrix(nu, rho, &nt)?;
            let lhs = ns.dot(&sigma.dot(&ns));
            let ip = ns.dot(&nt);
            worst = worst.max((lhs - ip * (1.0 - ip) / rho[s]).abs());
        }
    }
    Ok(worst)
}

/// Configuration of a Monte Carlo relative-efficiency sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SbmExperimentConfig {
    pub params: SbmParams,
    pub n_values: Vec<usize>,
    pub m: usize,
    pub replicates: usize,
    /// Defaults to the true rank of `B`.
    pub method: Option<DimSelectMethod>,
    pub seed: u64,
    pub bootstrap: usize,
}

impl SbmExperimentConfig {
    pub fn new(params: SbmParams, n_values: Vec<usize>, m: usize, replicates: usize, seed: u64) -> Self {
        SbmExperimentConfig { params, n_values, m, replicates, method: None, seed, bootstrap: DEFAULT_BOOTSTRAP }
    }

    pub fn method(&self) -> DimSelectMethod {
        self.method.unwrap_or(DimSelectMethod::Fixed(self.params.rank().max(1)))
    }

    fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::invalid("the N grid is empty"));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(Error::invalid(format!("N = {n} is too small; need N >= 2")));
        }
        if self.m == 0 || self.replicates == 0 {
            return Err(Error::invalid("M and the replicate count must be positive"));
        }
        self.method().validate()
    }
}

/// Squared-error sums over the vertex pairs `i < j` with blocks `{s, t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockPairSums {
    pub block_s: usize,
    pub block_t: usize,
    pub pairs: u64,
    pub sse_abar: f64,
    pub sse_phat: f64,
    /// Sum of signed errors of the low-rank estimate.
    pub err_phat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub n: usize,
    pub m: usize,
    pub d_selected: usize,
    /// Ordered as `(0,0), (0,1), .., (0,K-1), (1,1), ..`.
    pub block_pairs: Vec<BlockPairSums>,
}

/// Aggregated statistics for one `(N, block pair)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub n: usize,
    pub m: usize,
    pub block_s: usize,
    pub block_t: usize,
    pub p: f64,
    pub pairs: u64,
    pub mse_abar: f64,
    pub mse_phat: f64,
    pub re: f64,
    pub scaled_re: f64,
    pub theory_scaled_re: f64,
    /// Half-width of the 95% bootstrap percentile interval of `scaled_re`.
    pub ci_halfwidth: f64,
    /// Bootstrap standard error of `mse_abar`.
    pub mse_abar_se: f64,
    pub theory_mse_abar: f64,
    /// `N M (mse_phat - bias^2)`.
    pub scaled_var_phat: f64,
    /// `(1/rho_s + 1/rho_t) p (1 - p)`.
    pub theory_scaled_var_phat: f64,
    pub mean_d_selected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: SbmExperimentConfig,
    pub cells: Vec<CellReport>,
    pub replicates: Vec<ReplicateRecord>,
}

fn block_pair_index(s: usize, t: usize, k: usize) -> usize {
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    s * k - s * s.saturating_sub(1) / 2 + (t - s)
}

fn block_pair_list(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|s| (s..k).map(move |t| (s, t))).collect()
}

/// One replicate: draw memberships, sample `m` graphs, estimate, and sum the
/// squared errors per block pair.
pub fn run_replicate(
    params: &SbmParams,
    n: usize,
    m: usize,
    method: DimSelectMethod,
    seed: u64,
    replicate: usize,
) -> Result<ReplicateRecord> {
    let mut rng = rng::stream(seed, &[tag::SBM_REPLICATE, n as u64, m as u64, replicate as u64]);
    let tau = sample_memberships(params.rho(), n, &mut rng)?;
    let p = sbm_probability_matrix(params, &tau)?;
    let abar = sample_iem_mean(&p, m, &mut rng);
    let est = estimate_from_mean(&abar, m, method)?;

    let k = params.k();
    let mut sums: Vec<BlockPairSums> = block_pair_list(k)
        .into_iter()
        .map(|(s, t)| BlockPairSums { block_s: s, block_t: t, pairs: 0, sse_abar: 0.0, sse_phat: 0.0, err_phat: 0.0 })
        .collect();
    let labels = tau.labels();
    let (pd, ad, hd) = (p.data(), abar.data(), est.phat.data());
    for i in 0..n {
        for j in (i + 1)..n {
            let cell = &mut sums[block_pair_index(labels[i], labels[j], k)];
            let ea = ad[[i, j]] - pd[[i, j]];
            let eh = hd[[i, j]] - pd[[i, j]];
            cell.pairs += 1;
            cell.sse_abar += ea * ea;
            cell.sse_phat += eh * eh;
            cell.err_phat += eh;
        }
    }
    Ok(ReplicateRecord { replicate, n, m, d_selected: est.d_selected, block_pairs: sums })
}

#[derive(Clone, Copy, Default)]
struct Totals {
    pairs: u64,
    sse_abar: f64,
    sse_phat: f64,
    err_phat: f64,
}

impl Totals {
    fn add(&mut self, b: &BlockPairSums) {
        self.pairs += b.pairs;
        self.sse_abar += b.sse_abar;
        self.sse_phat += b.sse_phat;
        self.err_phat += b.err_phat;
    }

    fn re(&self) -> f64 {
        self.sse_phat / self.sse_abar.max(RE_EPSILON)
    }

    fn mse_abar(&self) -> f64 {
        self.sse_abar / self.pairs.max(1) as f64
    }
}

/// 95% percentile half-width and standard deviation of a bootstrap sample.
fn bootstrap_summary(mut values: Vec<f64>) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mean = finite.iter().sum::<f64>() / finite.len() as f64;
    let sd = (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (finite.len() - 1) as f64).sqrt();
    values.retain(|v| v.is_finite());
    values.sort_by(f64::total_cmp);
    let q = |p: f64| values[((p * (values.len() - 1) as f64).round() as usize).min(values.len() - 1)];
    ((q(0.975) - q(0.025)) / 2.0, sd)
}

fn aggregate_cells(
    params: &SbmParams,
    n: usize,
    m: usize,
    records: &[ReplicateRecord],
    bootstrap: usize,
    seed: u64,
) -> Result<Vec<CellReport>> {
    let pairs = block_pair_list(params.k());
    let mut cells = Vec::with_capacity(pairs.len());
    for (idx, &(s, t)) in pairs.iter().enumerate() {
        let mut total = Totals::default();
        for r in records {
            total.add(&r.block_pairs[idx]);
        }
        let mut boot_re = Vec::with_capacity(bootstrap);
        let mut boot_mse = Vec::with_capacity(bootstrap);
        let mut rng = rng::stream(seed, &[tag::BOOTSTRAP, n as u64, m as u64, idx as u64]);
        for _ in 0..bootstrap {
            let mut b = Totals::default();
            for _ in 0..records.len() {
                b.add(&records[rng.random_range(0..records.len())].block_pairs[idx]);
            }
            if b.pairs > 0 {
                boot_re.push(n as f64 * b.re());
                boot_mse.push(b.mse_abar());
            }
        }
        let (ci_halfwidth, _) = bootstrap_summary(boot_re);
        let (_, mse_abar_se) = bootstrap_summary(boot_mse);

        let p = params.b()[[s, t]];
        let count = total.pairs.max(1) as f64;
        let mse_abar = total.sse_abar / count;
        let mse_phat = total.sse_phat / count;
        let bias = total.err_phat / count;
        let re = total.re();
        cells.push(CellReport {
            n,
            m,
            block_s: s,
            block_t: t,
            p,
            pairs: total.pairs,
            mse_abar,
            mse_phat,
            re,
            scaled_re: n as f64 * re,
            theory_scaled_re: n as f64 * approx_re_theory(params.rho(), s, t, n)?,
            ci_halfwidth,
            mse_abar_se,
            theory_mse_abar: abar_mse_theory(p, m),
            scaled_var_phat: (n * m) as f64 * (mse_phat - bias * bias),
            theory_scaled_var_phat: inverse_rho_sum(params.rho(), s, t)? * p * (1.0 - p),
            mean_d_selected: records.iter().map(|r| r.d_selected as f64).sum::<f64>() / records.len() as f64,
        });
    }
    Ok(cells)
}

/// Runs the sweep. Replicates run in parallel on the current rayon pool;
/// results are reduced in replicate order, so the report does not depend on
/// the thread count.
pub fn run_sbm_experiment(config: &SbmExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let method = config.method();
    let mut cells = Vec::new();
    let mut replicates = Vec::new();
    for &n in &config.n_values {
        if let DimSelectMethod::Fixed(d) = method {
            if d > n {
                return Err(Error::DimensionOutOfRange { d, max: n });
            }
        }
        let records: Vec<ReplicateRecord> = (0..config.replicates)
            .into_par_iter()
            .map(|r| run_replicate(&config.params, n, config.m, method, config.seed, r))
            .collect::<Result<_>>()?;
        cells.extend(aggregate_cells(&config.params, n, config.m, &records, config.bootstrap, config.seed)?);
        replicates.extend(records);
    }
    Ok(ExperimentReport { config: config.clone(), cells, replicates })
}

fn csv_float(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

impl ExperimentReport {
    pub fn cell(&self, n: usize, s: usize, t: usize) -> Option<&CellReport> {
        let (s, t) = (s.min(t), s.max(t));
        self.cells.iter().find(|c| c.n == n && c.block_s == s && c.block_t == t)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.n,
                c.m,
                c.block_s,
                c.block_t,
                csv_float(c.mse_abar),
                csv_float(c.mse_phat),
                csv_float(c.re),
                csv_float(c.scaled_re),
                csv_float(c.theory_scaled_re),
                csv_float(c.ci_halfwidth)
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Cross-validation settings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CvConfig {
    pub m: usize,
    /// Ignored when `m = 1`, which enumerates every graph.
    pub replicates: usize,
    pub method: DimSelectMethod,
    pub seed: u64,
    /// Compare against the mean of the whole batch instead of the held-out graphs.
    pub include_sample_in_truth: bool,
    pub bootstrap: usize,
}

impl CvConfig {
    pub fn new(m: usize, replicates: usize, method: DimSelectMethod, seed: u64) -> Self {
        CvConfig { m, replicates, method, seed, include_sample_in_truth: false, bootstrap: DEFAULT_BOOTSTRAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReplicate {
    pub replicate: usize,
    pub indices: Vec<usize>,
    pub d_selected: usize,
    pub mse_abar: f64,
    pub mse_phat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    pub config: CvConfig,
    pub n: usize,
    pub batch_size: usize,
    pub mean_mse_abar: f64,
    pub mean_mse_phat: f64,
    pub re: f64,
    /// The mean sample-mean error was below [`RE_EPSILON`].
    pub degenerate: bool,
    /// Half-width of the 95% bootstrap interval of `n * re`.
    pub ci_halfwidth: f64,
    pub replicates: Vec<CvReplicate>,
}

/// Index sets used by cross-validation: every singleton when `m = 1`,
/// otherwise `replicates` uniform subsets drawn without replacement.
pub fn cv_subsets(batch_size: usize, m: usize, replicates: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if m == 0 || m >= batch_size {
        return Err(Error::invalid(format!("need 1 <= m < batch size ({batch_size}), got m = {m}")));
    }
    if m == 1 {
        return Ok((0..batch_size).map(|i| vec![i]).collect());
    }
    if replicates == 0 {
        return Err(Error::invalid("replicate count must be positive"));
    }
    Ok((0..replicates)
        .map(|r| {
            let mut rng = rng::stream(seed, &[tag::CROSS_VALIDATION, r as u64]);
            let mut idx = index::sample(&mut rng, batch_size, m).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect())
}

/// Subsample `m` graphs, estimate the population mean from them with both
/// estimators, and score each against the mean of the graphs left out.
pub fn cross_validate(batch: &GraphBatch, config: &CvConfig) -> Result<CvReport> {
    config.method.validate()?;
    let total_mean = sample_mean(batch)?;
    let b = batch.len();
    let n = total_mean.n();
    let subsets = cv_subsets(b, config.m, config.replicates, config.seed)?;
    let total_sum = total_mean.data() * b as f64;

    let records: Vec<CvReplicate> = subsets
        .into_par_iter()
        .enumerate()
        .map(|(replicate, indices)| {
            let mut sum = Array2::<f64>::zeros((n, n));
            for &i in &indices {
                sum += batch.graphs()[i].data();
            }
            let abar = sum.mapv(|v| v / config.m as f64);
            let truth = if config.include_sample_in_truth {
                total_mean.data().clone()
            } else {
                (&total_sum - &sum).mapv(|v| v / (b - config.m) as f64)
            };
            let est = estimate_from_mean(&ProbabilityMatrix::from_trusted(abar.clone(), false), config.m, config.method)?;
            Ok(CvReplicate {
                replicate,
                indices,
                d_selected: est.d_selected,
                mse_abar: offdiag_mse(&abar, &truth)?,
                mse_phat: offdiag_mse(est.phat.data(), &truth)?,
            })
        })
        .collect::<Result<_>>()?;

    let count = records.len() as f64;
    let mean_mse_abar = records.iter().map(|r| r.mse_abar).sum::<f64>() / count;
    let mean_mse_phat = records.iter().map(|r| r.mse_phat).sum::<f64>() / count;
    let degenerate = mean_mse_abar < RE_EPSILON;
    let re = mean_mse_phat / mean_mse_abar.max(RE_EPSILON);

    let mut rng = rng::stream(config.seed, &[tag::BOOTSTRAP, tag::CROSS_VALIDATION]);
    let boot: Vec<f64> = (0..config.bootstrap)
        .map(|_| {
            let (mut a, mut p) = (0.0, 0.0);
            for _ in 0..records.len() {
                let r = &records[rng.random_range(0..records.len())];
                a += r.mse_abar;
                p += r.mse_phat;
            }
            n as f64 * p / a.max(RE_EPSILON)
        })
        .collect();
    let (ci_halfwidth, _) = bootstrap_summary(boot);
    if degenerate {
        log::warn!("sample-mean error is zero; relative efficiency uses the {RE_EPSILON} floor");
    }
    Ok(CvReport {
        config: *config,
        n,
        batch_size: b,
        mean_mse_abar,
        mean_mse_phat,
        re,
        degenerate,
        ci_halfwidth,
        replicates: records,
    })
}

impl CvReport {
    pub fn to_csv(&self) -> String {
        format!(
            "{REPORT_CSV_HEADER}\n{},{},all,all,{},{},{},{},NA,{}\n",
            self.n,
            self.config.m,
            csv_float(self.mean_mse_abar),
            csv_float(self.mean_mse_phat),
            csv_float(self.re),
            csv_float(self.n as f64 * self.re),
            csv_float(self.ci_halfwidth)
        )
    }

    pub fn replicates_csv(&self) -> String {
        let mut out = String::from("replicate,indices,d_selected,mse_abar,mse_phat\n");
        for r in &self.replicates {
            let idx: Vec<String> = r.indices.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.replicate,
                idx.join(" "),
                r.d_selected,
                csv_float(r.mse_abar),
                csv_float(r.mse_phat)
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
