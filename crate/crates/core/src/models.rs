//! Generative graph models: independent-edge sampling, stochastic blockmodels
//! and random dot product graphs.

use ndarray::{Array1, Array2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_finite, check_square, check_symmetric, AdjacencyMatrix, ProbabilityMatrix};
use crate::spectral;

/// Eigenvalue threshold for PSD checks and numerical rank.
pub const EIGEN_TOL: f64 = 1e-10;
const RHO_SUM_TOL: f64 = 1e-9;
const INNER_PRODUCT_TOL: f64 = 1e-12;

/// Stochastic blockmodel parameters: block probabilities `B` and block
/// proportions `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SbmParamsFile", into = "SbmParamsFile")]
pub struct SbmParams {
    b: Array2<f64>,
    rho: Vec<f64>,
    requires_psd: bool,
}

/// JSON form: `{"B": [[...]], "rho": [...]}`.
#[derive(Serialize, Deserialize)]
struct SbmParamsFile {
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    rho: Vec<f64>,
    #[serde(default = "default_true")]
    requires_psd: bool,
}

fn default_true() -> bool {
    true
}

impl TryFrom<SbmParamsFile> for SbmParams {
    type Error = Error;

    fn try_from(f: SbmParamsFile) -> Result<Self> {
        let k = f.b.len();
        if f.b.iter().any(|row| row.len() != k) {
            return Err(Error::invalid("B must be a square matrix"));
        }
        let b = Array2::from_shape_vec((k, k), f.b.into_iter().flatten().collect())
            .map_err(|e| Error::invalid(e.to_string()))?;
        SbmParams::new(b, f.rho, f.requires_psd)
    }
}

impl From<SbmParams> for SbmParamsFile {
    fn from(p: SbmParams) -> Self {
        SbmParamsFile {
            b: p.b.rows().into_iter().map(|r| r.to_vec()).collect(),
            rho: p.rho,
            requires_psd: p.requires_psd,
        }
    }
}

impl SbmParams {
    pub fn new(b: Array2<f64>, rho: Vec<f64>, requires_psd: bool) -> Result<Self> {
        let view = b.view();
        let k = check_square(&view)?;
        if k == 0 {
            return Err(Error::invalid("SBM needs at least one block"));
        }
        check_finite(&view)?;
        check_symmetric(&view, 0.0)?;
        for ((row, col), &value) in b.indexed_iter() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfUnitInterval { row, col, value });
            }
        }
        if rho.len() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: rho.len() });
        }
        validate_rho(&rho)?;
        if requires_psd {
            let min = spectral::eig_sym(&b)?.values[k - 1];
            if min < -EIGEN_TOL {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
        }
        Ok(SbmParams { b, rho, requires_psd })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("SBM parameters serialize")
    }

    pub fn k(&self) -> usize {
        self.rho.len()
    }

    pub fn b(&self) -> &Array2<f64> {
        &self.b
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Same block matrix with different proportions.
    pub fn with_rho(&self, rho: Vec<f64>) -> Result<Self> {
        SbmParams::new(self.b.clone(), rho, self.requires_psd)
    }

    /// Numerical rank of `B` (eigenvalues above [`EIGEN_TOL`]).
    pub fn rank(&self) -> usize {
        spectral::eig_sym(&self.b)
            .map(|p| p.values.iter().filter(|&&v| v > EIGEN_TOL).count())
            .unwrap_or(0)
    }
}

/// Proportions must be strictly positive and sum to one.
pub fn validate_rho(rho: &[f64]) -> Result<()> {
    if rho.is_empty() {
        return Err(Error::invalid("rho is empty"));
    }
    if let Some(bad) = rho.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::invalid(format!("block proportion {bad} is not positive")));
    }
    let sum: f64 = rho.iter().sum();
    if (sum - 1.0).abs() > RHO_SUM_TOL {
        return Err(Error::invalid(format!("block proportions sum to {sum}, not 1")));
    }
    Ok(())
}

/// Block label of every vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    tau: Vec<usize>,
}

impl Membership {
    pub fn new(tau: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((i, &t)) = tau.iter().enumerate().find(|(_, &t)| t >= k) {
            return Err(Error::invalid(format!("vertex {i} has block label {t} >= K = {k}")));
        }
        Ok(Membership { tau })
    }

    pub fn labels(&self) -> &[usize] {
        &self.tau
    }

    pub fn n(&self) -> usize {
        self.tau.len()
    }

    pub fn block_sizes(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &t in &self.tau {
            counts[t] += 1;
        }
        counts
    }
}

/// Rows are per-vertex latent vectors.
///
/// Model positions satisfy `x_i . x_j in [0, 1]` for all pairs; estimates
/// (from [`LatentPositions::estimate`]) are not checked.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPositions {
    x: Array2<f64>,
}

impl LatentPositions {
    pub fn new(x: Array2<f64>) -> Result<Self> {
        check_finite(&x.view())?;
        let gram = x.dot(&x.t());
        for ((row, col), &value) in gram.indexed_iter() {
            if row != col && !(-INNER_PRODUCT_TOL..=1.0 + INNER_PRODUCT_TOL).contains(&value) {
                return Err(Error::OutOfUnitInterval { row, col, value });
            }
        }
        Ok(LatentPositions { x })
    }

    pub fn estimate(x: Array2<f64>) -> Self {
        LatentPositions { x }
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Draws `n` iid block labels from the categorical distribution `rho`.
pub fn sample_memberships<R: Rng + ?Sized>(rho: &[f64], n: usize, rng: &mut R) -> Result<Membership> {
    validate_rho(rho)?;
    if n == 0 {
        return Err(Error::invalid("need at least one vertex"));
    }
    let dist = WeightedIndex::new(rho).map_err(|e| Error::invalid(e.to_string()))?;
    let tau = (0..n).map(|_| dist.sample(rng)).collect();
    Ok(Membership { tau })
}

/// `P_ij = B[tau_i][tau_j]` off the diagonal, zero on it.
pub fn sbm_probability_matrix(params: &SbmParams, tau: &Membership) -> Result<ProbabilityMatrix> {
    let mut p = sbm_mean_with_diagonal(params, tau)?;
    p.diag_mut().fill(0.0);
    Ok(ProbabilityMatrix::from_trusted(p, false))
}

/// `P_ij = B[tau_i][tau_j]` including the diagonal; rank at most `K`.
pub fn sbm_mean_with_diagonal(params: &SbmParams, tau: &Membership) -> Result<Array2<f64>> {
    let k = params.k();
    Membership::new(tau.labels().to_vec(), k)?;
    let t = tau.labels();
    let b = params.b();
    Ok(Array2::from_shape_fn((t.len(), t.len()), |(i, j)| b[[t[i], t[j]]]))
}

/// `P = X X^T` with the diagonal zeroed.
pub fn rdpg_probability_matrix(x: &LatentPositions) -> Result<ProbabilityMatrix> {
    let gram = x.x().dot(&x.x().t());
    for ((row, col), &value) in gram.indexed_iter() {
        if row != col && !(-INNER_PRODUCT_TOL..=1.0 + INNER_PRODUCT_TOL).contains(&value) {
            return Err(Error::OutOfUnitInterval { row, col, value });
        }
    }
    let n = gram.nrows();
    let mut p = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            gram[[i.min(j), i.max(j)]].clamp(0.0, 1.0)
        }
    });
    p.diag_mut().fill(0.0);
    Ok(ProbabilityMatrix::from_trusted(p, false))
}

/// One undirected graph with independent `Bernoulli(P_ij)` edges for `i < j`.
pub fn sample_iem_graph<R: Rng + ?Sized>(p: &ProbabilityMatrix, rng: &mut R) -> AdjacencyMatrix {
    let n = p.n();
    let mut a = Array2::zeros((n, n));
    add_iem_sample(p.data(), &mut a, rng);
    AdjacencyMatrix::new(a, false).expect("IEM sample is a valid adjacency matrix")
}

/// Adds one IEM draw (upper and lower triangle) into `acc`.
pub(crate) fn add_iem_sample<R: Rng + ?Sized>(p: &Array2<f64>, acc: &mut Array2<f64>, rng: &mut R) {
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p[[i, j]] {
                acc[[i, j]] += 1.0;
                acc[[j, i]] += 1.0;
            }
        }
    }
}

/// Entry-wise mean of `m` IEM draws from `p`, without materialising the
/// individual graphs.
pub fn sample_iem_mean<R: Rng + ?Sized>(p: &ProbabilityMatrix, m: usize, rng: &mut R) -> ProbabilityMatrix {
    let n = p.n();
    let mut acc = Array2::zeros((n, n));
    for _ in 0..m {
        add_iem_sample(p.data(), &mut acc, rng);
    }
    acc.mapv_inplace(|v| v / m as f64);
    ProbabilityMatrix::from_trusted(acc, false)
}

/// Factorises a PSD block matrix as `B = nu nu^T` with `nu` of shape
/// `K x rank(B)`.
pub fn psd_factorize(b: &Array2<f64>) -> Result<Array2<f64>> {
    let pairs = spectral::eig_sym(b)?;
    let min = pairs.values[pairs.len() - 1];
    if min < -EIGEN_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let d = pairs.values.iter().filter(|&&v| v > EIGEN_TOL).count();
    let scale: Array1<f64> = pairs.values.iter().take(d).map(|v| v.sqrt()).collect();
    let u = pairs.vectors.slice(ndarray::s![.., ..d]).to_owned();
    Ok(&u * &scale.view().insert_axis(Axis(0)))
}

/// Latent positions of an SBM: row `i` is `nu[tau_i]`.
pub fn sbm_latent_positions(nu: &Array2<f64>, tau: &Membership) -> Result<LatentPositions> {
    let k = nu.nrows();
    Membership::new(tau.labels().to_vec(), k)?;
    let x = nu.select(Axis(0), tau.labels());
    LatentPositions::new(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::{sample_mean, GraphBatch};
    use crate::rng;
    use ndarray::array;
    use proptest::prelude::*;

    fn frob(a: &Array2<f64>) -> f64 {
        a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn memberships() {
        let mut r = rng::seeded(1);
        assert_eq!(sample_memberships(&[1.0], 5, &mut r).unwrap().labels(), &[0; 5]);

        let tau = sample_memberships(&[0.5, 0.5], 10_000, &mut r).unwrap();
        let zeros = tau.block_sizes(2)[0] as f64;
        assert!((zeros - 5000.0).abs() <= 3.0 * (10_000.0f64 * 0.25).sqrt());

        let a = sample_memberships(&[0.2, 0.3, 0.5], 50, &mut rng::seeded(9)).unwrap();
        let b = sample_memberships(&[0.2, 0.3, 0.5], 50, &mut rng::seeded(9)).unwrap();
        assert_eq!(a, b);

        assert!(sample_memberships(&[0.5, 0.6], 3, &mut r).is_err());
        assert!(sample_memberships(&[1.0, 0.0], 3, &mut r).is_err());
    }

    #[test]
    fn sbm_probabilities_match_fixture_values() {
        let two = fixtures::two_block();
        let p = sbm_probability_matrix(&two, &Membership::new(vec![0, 1], 2).unwrap()).unwrap();
        assert_eq!(p.data()[[0, 1]], 0.2);
        let p = sbm_probability_matrix(&two, &Membership::new(vec![0, 0], 2).unwrap()).unwrap();
        assert_eq!(p.data()[[0, 1]], 0.42);
        assert_eq!(p.data()[[0, 0]], 0.0);
        let five = fixtures::five_block();
        let p = sbm_probability_matrix(&five, &Membership::new(vec![0, 4], 5).unwrap()).unwrap();
        assert_eq!(p.data()[[0, 1]], 0.30);
        assert!(Membership::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn rdpg_examples() {
        let row = array![0.3f64.sqrt() / 2.0f64.sqrt(), 0.3f64.sqrt() / 2.0f64.sqrt()];
        let x = Array2::from_shape_fn((4, 2), |(_, k)| row[k]);
        let p = rdpg_probability_matrix(&LatentPositions::new(x).unwrap()).unwrap();
        for ((i, j), &v) in p.data().indexed_iter() {
            if i != j {
                assert!((v - 0.3).abs() < 1e-15);
            }
        }

        let x = LatentPositions::new(array![[0.5], [0.8]]).unwrap();
        assert!((rdpg_probability_matrix(&x).unwrap().data()[[0, 1]] - 0.4).abs() < 1e-15);

        assert!(LatentPositions::new(array![[1.5], [0.8]]).is_err());
        assert!(LatentPositions::new(array![[1.0], [-0.5]]).is_err());
    }

    #[test]
    fn rdpg_from_factorized_sbm_matches_sbm() {
        let two = fixtures::two_block();
        let nu = psd_factorize(two.b()).unwrap();
        let tau = sample_memberships(two.rho(), 40, &mut rng::seeded(3)).unwrap();
        let x = sbm_latent_positions(&nu, &tau).unwrap();
        let via_rdpg = rdpg_probability_matrix(&x).unwrap();
        let via_sbm = sbm_probability_matrix(&two, &tau).unwrap();
        let max = (via_rdpg.data() - via_sbm.data()).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(max < 1e-12);
    }

    #[test]
    fn iem_examples() {
        let mut r = rng::seeded(4);
        let zeros = ProbabilityMatrix::new(Array2::zeros((6, 6))).unwrap();
        assert!(sample_iem_graph(&zeros, &mut r).data().iter().all(|&v| v == 0.0));

        let mut ones = Array2::ones((6, 6));
        ones.diag_mut().fill(0.0);
        let complete = sample_iem_graph(&ProbabilityMatrix::new(ones.clone()).unwrap(), &mut r);
        assert_eq!(complete.data(), &ones);

        let n = 100;
        let mut p = Array2::from_elem((n, n), 0.3);
        p.diag_mut().fill(0.0);
        let g = sample_iem_graph(&ProbabilityMatrix::new(p).unwrap(), &mut r);
        let edges = g.data().sum() / 2.0;
        let pairs = (n * (n - 1) / 2) as f64;
        assert!((edges - 0.3 * pairs).abs() <= 3.0 * (pairs * 0.21).sqrt());
        assert!(g.is_binary());
    }

    #[test]
    fn iem_sampling_is_deterministic_per_seed() {
        let p = fixtures::two_block();
        let tau = sample_memberships(p.rho(), 30, &mut rng::seeded(0)).unwrap();
        let pm = sbm_probability_matrix(&p, &tau).unwrap();
        assert_eq!(sample_iem_graph(&pm, &mut rng::seeded(5)), sample_iem_graph(&pm, &mut rng::seeded(5)));
    }

    #[test]
    fn empirical_mean_is_unbiased_under_iem() {
        let params = fixtures::two_block();
        let tau = sample_memberships(params.rho(), 20, &mut rng::seeded(2)).unwrap();
        let p = sbm_probability_matrix(&params, &tau).unwrap();
        let (reps, m) = (400, 5);
        let mut grand = Array2::<f64>::zeros((20, 20));
        for r in 0..reps {
            let mut stream = rng::stream(10, &[r]);
            let graphs = (0..m).map(|_| sample_iem_graph(&p, &mut stream)).collect();
            grand += sample_mean(&GraphBatch::new(graphs).unwrap()).unwrap().data();
        }
        grand.mapv_inplace(|v| v / reps as f64);
        let max_dev = (&grand - p.data()).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(max_dev < 3.0 * (0.25 / (reps * m as u64) as f64).sqrt() * 1.5, "max deviation {max_dev}");
    }

    #[test]
    fn psd_factorize_examples() {
        let id = Array2::<f64>::eye(2);
        let nu = psd_factorize(&id).unwrap();
        assert!(frob(&(nu.dot(&nu.t()) - &id)) < 1e-10);

        let two = fixtures::two_block();
        let nu = psd_factorize(two.b()).unwrap();
        assert_eq!(nu.ncols(), 2);
        assert!(frob(&(nu.dot(&nu.t()) - two.b())) < 1e-10);

        let five = fixtures::five_block();
        let nu = psd_factorize(five.b()).unwrap();
        assert_eq!(nu.ncols(), 5);
        assert!(frob(&(nu.dot(&nu.t()) - five.b())) < 1e-10);

        let rank_one = array![[0.25, 0.25], [0.25, 0.25]];
        assert_eq!(psd_factorize(&rank_one).unwrap().ncols(), 1);

        assert!(matches!(psd_factorize(&array![[0.1, 0.9], [0.9, 0.1]]), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn sbm_params_validation_and_json() {
        assert!(SbmParams::new(array![[0.1, 0.9], [0.9, 0.1]], vec![0.5, 0.5], true).is_err());
        assert!(SbmParams::new(array![[0.1, 0.9], [0.9, 0.1]], vec![0.5, 0.5], false).is_ok());
        assert!(SbmParams::new(array![[0.5, 0.2], [0.2, 0.5]], vec![0.5, 0.6], true).is_err());
        assert!(SbmParams::new(array![[0.5, 0.2], [0.2, 0.5]], vec![1.0, 0.0], true).is_err());
        assert!(SbmParams::new(array![[1.5]], vec![1.0], true).is_err());

        let parsed = SbmParams::from_json(r#"{"B": [[0.42, 0.2], [0.2, 0.7]], "rho": [0.5, 0.5]}"#).unwrap();
        assert_eq!(parsed, fixtures::two_block());
        assert_eq!(SbmParams::from_json(&parsed.to_json()).unwrap(), parsed);
        assert!(SbmParams::from_json(r#"{"B": [[0.42, 0.2]], "rho": [1.0]}"#).is_err());
    }

    proptest! {
        #[test]
        fn sbm_structure(seed in 0u64..1000, n in 2usize..40) {
            let params = fixtures::five_block();
            let tau = sample_memberships(params.rho(), n, &mut rng::seeded(seed)).unwrap();
            let p = sbm_probability_matrix(&params, &tau).unwrap();
            let mut distinct: Vec<f64> = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = p.data()[[i, j]];
                    if !distinct.contains(&v) {
                        distinct.push(v);
                    }
                }
            }
            prop_assert!(distinct.len() <= 15);

            let full = sbm_mean_with_diagonal(&params, &tau).unwrap();
            let eig = crate::spectral::eig_sym(&full).unwrap();
            let scale = eig.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let rank = eig.values.iter().filter(|v| v.abs() > 1e-9 * scale).count();
            prop_assert!(rank <= 5);
        }
    }
}
