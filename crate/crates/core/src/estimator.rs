//! The low-rank mean-graph estimator.
//!
//! Steps, for a batch of `M` graphs on `N` vertices:
//!
//! 1. `Abar`, the entry-wise sample mean;
//! 2. `D0 = diag(row sums of Abar) / (N - 1)`;
//! 3. `d = dimselect(Abar + D0)`;
//! 4. `P0 = lowrank(Abar + D0, d)`;
//! 5. `D1 = diag(P0)`;
//! 6. `P1 = lowrank(Abar + D1, d)`;
//! 7. clamp `P1` to `[0, 1]`, then zero the diagonal.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::dimselect::{self, DimSelectMethod, Selection};
use crate::error::{Error, Result};
use crate::graph::{check_square, check_symmetric, sample_mean, weighted_mean, GraphBatch, ProbabilityMatrix};
use crate::models::LatentPositions;
use crate::spectral::{self, EigenPairs};

/// Intermediate quantities kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub d_selected: usize,
    /// Spectrum of `Abar + D0`: complete when a selector ran, leading `d`
    /// values for a fixed dimension.
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
    /// Row-mean diagonal `D0`.
    pub rowmean_diagonal: Vec<f64>,
    /// Refined diagonal `D1`.
    pub iterative_diagonal: Vec<f64>,
    /// Diagonal of the clamped final approximation.
    pub augmented_diagonal: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PhatResult {
    /// Clamped estimate with zero diagonal.
    pub phat: ProbabilityMatrix,
    pub d_selected: usize,
    /// Embedding from the final low-rank step.
    pub latent: LatentPositions,
    pub diagnostics: Diagnostics,
}

/// Estimate from a weighted batch; only negative values are clamped.
#[derive(Debug, Clone)]
pub struct WeightedResult {
    pub estimate: Array2<f64>,
    pub d_selected: usize,
    pub latent: LatentPositions,
    pub diagnostics: Diagnostics,
}

/// `D0_ii = sum_j Abar_ij / (N - 1)`.
pub fn diag_augment_rowmean(abar: &Array2<f64>) -> Result<Array1<f64>> {
    let n = check_square(&abar.view())?;
    if n < 2 {
        return Err(Error::invalid(format!("diagonal augmentation needs N >= 2, got {n}")));
    }
    Ok(abar.rows().into_iter().map(|r| r.sum() / (n - 1) as f64).collect())
}

/// `D1_ii = P0_ii`: one refinement step from the first low-rank pass.
pub fn diag_augment_iterative(p_tilde_0: &Array2<f64>) -> Array1<f64> {
    p_tilde_0.diag().to_owned()
}

fn with_diagonal(m: &Array2<f64>, diag: &Array1<f64>) -> Array2<f64> {
    let mut out = m.clone();
    out.diag_mut().assign(diag);
    out
}

struct LowRankFit {
    p_tilde: Array2<f64>,
    latent: LatentPositions,
    diagnostics: Diagnostics,
}

/// Steps 2 to 6 on a symmetric hollow mean matrix.
fn fit(mean: &Array2<f64>, m: usize, method: DimSelectMethod) -> Result<LowRankFit> {
    let n = check_square(&mean.view())?;
    check_symmetric(&mean.view(), spectral::SYMMETRY_TOL)?;
    method.validate()?;
    let d0 = diag_augment_rowmean(mean)?;
    let aug0 = with_diagonal(mean, &d0);

    let (selection, first): (Selection, EigenPairs) = if method.needs_spectrum() {
        let full = spectral::eig_sym(&aug0)?;
        let sel = dimselect::select_from_spectrum(&full, method, m)?;
        (sel, full)
    } else {
        let sel = dimselect::select_dimension(&aug0, method, m)?;
        let top = spectral::top_eigenpairs(&aug0, sel.d)?;
        (sel, top)
    };
    let d = selection.d;
    if d > n {
        return Err(Error::DimensionOutOfRange { d, max: n });
    }
    let eigenvalues = first.values.to_vec();
    let p0 = first.truncated(d).recompose();
    let d1 = diag_augment_iterative(&p0);

    let second = spectral::top_eigenpairs(&with_diagonal(mean, &d1), d)?;
    let p1 = second.recompose();
    let mut warnings = selection.warnings;
    let latent = match spectral::embedding_from_pairs(&second) {
        Ok(x) => x,
        Err(Error::NegativeEigenvalues { requested, nonnegative }) => {
            warnings.push(format!(
                "{} of the top {requested} eigenvalues are negative; latent positions use their nonnegative part",
                requested - nonnegative
            ));
            LatentPositions::estimate(spectral::scaled_columns(&second))
        }
        Err(e) => return Err(e),
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(LowRankFit {
        p_tilde: p1,
        latent,
        diagnostics: Diagnostics {
            d_selected: d,
            eigenvalues,
            warnings,
            rowmean_diagonal: d0.to_vec(),
            iterative_diagonal: d1.to_vec(),
            augmented_diagonal: Vec::new(),
        },
    })
}

/// Low-rank estimate from a precomputed sample mean of `m` binary graphs.
pub fn estimate_from_mean(abar: &ProbabilityMatrix, m: usize, method: DimSelectMethod) -> Result<PhatResult> {
    if m == 0 {
        return Err(Error::EmptyBatch);
    }
    let abar = abar.hollowed();
    let LowRankFit { p_tilde, latent, mut diagnostics } = fit(abar.data(), m, method)?;
    let mut clamped = p_tilde.mapv(|x| x.clamp(0.0, 1.0));
    diagnostics.augmented_diagonal = clamped.diag().to_vec();
    clamped.diag_mut().fill(0.0);
    Ok(PhatResult {
        phat: ProbabilityMatrix::from_trusted(clamped, false),
        d_selected: diagnostics.d_selected,
        latent,
        diagnostics,
    })
}

/// The low-rank estimator for a batch of binary undirected graphs.
pub fn estimate_phat(batch: &GraphBatch, method: DimSelectMethod) -> Result<PhatResult> {
    let abar = sample_mean(batch)?;
    estimate_from_mean(&abar, batch.len(), method)
}

/// Same pipeline for nonnegative weighted undirected graphs. Values are only
/// clamped below at 0 since weights have no upper bound.
pub fn estimate_weighted(batch: &GraphBatch, method: DimSelectMethod) -> Result<WeightedResult> {
    for g in batch.graphs() {
        if g.directed() {
            return Err(Error::invalid("the weighted estimator requires undirected graphs"));
        }
        if let Some(((row, col), &value)) = g.data().indexed_iter().find(|(_, &v)| v < 0.0) {
            return Err(Error::NegativeWeight { row, col, value });
        }
    }
    let mean = weighted_mean(batch)?;
    let LowRankFit { p_tilde, latent, mut diagnostics } = fit(&mean, batch.len(), method)?;
    let mut estimate = p_tilde.mapv(|x| x.max(0.0));
    diagnostics.augmented_diagonal = estimate.diag().to_vec();
    estimate.diag_mut().fill(0.0);
    Ok(WeightedResult { estimate, d_selected: diagnostics.d_selected, latent, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::{clamp01, mse, AdjacencyMatrix};
    use crate::models::{sample_iem_graph, sample_memberships, sbm_probability_matrix};
    use crate::rng;
    use ndarray::array;
    use proptest::prelude::*;

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (a - b).mapv(f64::abs).fold(0.0f64, |x, &y| x.max(y))
    }

    fn sbm_batch(n: usize, m: usize, seed: u64) -> (GraphBatch, ProbabilityMatrix) {
        let params = fixtures::two_block();
        let tau = sample_memberships(params.rho(), n, &mut rng::stream(seed, &[0])).unwrap();
        let p = sbm_probability_matrix(&params, &tau).unwrap();
        let mut r = rng::stream(seed, &[1]);
        let graphs = (0..m).map(|_| sample_iem_graph(&p, &mut r)).collect();
        (GraphBatch::new(graphs).unwrap(), p)
    }

    #[test]
    fn rowmean_examples() {
        assert_eq!(diag_augment_rowmean(&array![[0.0, 0.5], [0.5, 0.0]]).unwrap(), array![0.5, 0.5]);
        assert_eq!(diag_augment_rowmean(&Array2::zeros((4, 4))).unwrap(), Array1::<f64>::zeros(4));
        let a = array![[0.0, 0.7, 0.5], [0.7, 0.0, 0.1], [0.5, 0.1, 0.0]];
        let d = diag_augment_rowmean(&a).unwrap();
        for (got, want) in d.iter().zip([0.6, 0.4, 0.3]) {
            assert!((got - want).abs() < 1e-15);
        }
        let b = array![[0.0, 0.6, 0.6], [0.6, 0.0, 0.2], [0.6, 0.2, 0.0]];
        let d = diag_augment_rowmean(&b).unwrap();
        for (got, want) in d.iter().zip([0.6, 0.4, 0.4]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(diag_augment_rowmean(&array![[0.0]]).is_err());
    }

    #[test]
    fn iterative_examples() {
        let p0 = array![[0.3, 0.1], [0.1, 0.4]];
        assert_eq!(diag_augment_iterative(&p0), array![0.3, 0.4]);

        let x = array![0.2, 0.5, 0.7, 0.9];
        let xxt = Array2::from_shape_fn((4, 4), |(i, j)| x[i] * x[j]);
        let p0 = spectral::lowrank(&xxt, 1).unwrap();
        let d1 = diag_augment_iterative(&p0);
        for i in 0..4 {
            assert!((d1[i] - x[i] * x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_graph_is_reproduced_exactly() {
        // Abar + D0 is the all-ones matrix, which is exactly rank one.
        let n = 12;
        let mut a = Array2::ones((n, n));
        a.diag_mut().fill(0.0);
        let g = AdjacencyMatrix::binary(a.clone()).unwrap();
        let batch = GraphBatch::new(vec![g.clone(), g.clone(), g]).unwrap();
        let res = estimate_phat(&batch, DimSelectMethod::Fixed(1)).unwrap();
        assert!(max_abs_diff(res.phat.data(), &a) < 1e-8);
        assert_eq!(res.d_selected, 1);
    }

    #[test]
    fn full_dimension_reduces_to_clamped_mean() {
        let (batch, _) = sbm_batch(20, 500, 3);
        let abar = sample_mean(&batch).unwrap();
        let res = estimate_phat(&batch, DimSelectMethod::Fixed(20)).unwrap();
        let expected = clamp01(abar.data()).unwrap();
        assert!(max_abs_diff(res.phat.data(), expected.data()) < 1e-8);
    }

    #[test]
    fn one_block_concentration() {
        let (n, m, p) = (500, 5, 0.3);
        let mut pm = Array2::from_elem((n, n), p);
        pm.diag_mut().fill(0.0);
        let pm = ProbabilityMatrix::new(pm).unwrap();
        let mut r = rng::seeded(21);
        let graphs = (0..m).map(|_| sample_iem_graph(&pm, &mut r)).collect();
        let res = estimate_phat(&GraphBatch::new(graphs).unwrap(), DimSelectMethod::Fixed(1)).unwrap();
        let bound = 5.0 * (2.0 * p * (1.0 - p) / (m * n) as f64).sqrt();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max((res.phat.data()[[i, j]] - p).abs());
                }
            }
        }
        assert!(worst < bound, "max deviation {worst} >= {bound}");
    }

    #[test]
    fn output_contract() {
        let (batch, _) = sbm_batch(40, 4, 8);
        for method in [DimSelectMethod::Zg(3), DimSelectMethod::Usvt(0.7), DimSelectMethod::Fixed(2)] {
            let res = estimate_phat(&batch, method).unwrap();
            let p = res.phat.data();
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(p, &p.t().to_owned());
            assert!(p.diag().iter().all(|&v| v == 0.0));
            assert_eq!(res.latent.dim(), res.d_selected);
            assert_eq!(res.diagnostics.augmented_diagonal.len(), 40);
            let expected_eigs = if method.needs_spectrum() { 40 } else { 2 };
            assert_eq!(res.diagnostics.eigenvalues.len(), expected_eigs);
        }
    }

    #[test]
    fn beats_sample_mean_on_two_block_sbm() {
        let (batch, p) = sbm_batch(200, 3, 5);
        let abar = sample_mean(&batch).unwrap();
        let res = estimate_phat(&batch, DimSelectMethod::Fixed(2)).unwrap();
        assert!(mse(&res.phat, &p).unwrap() < mse(&abar, &p).unwrap());
    }

    #[test]
    fn negative_top_eigenvalue_falls_back_with_warning() {
        // A perfect matching: Abar + D0 has eigenvalues of both signs.
        let a = array![
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0]
        ];
        let batch = GraphBatch::new(vec![AdjacencyMatrix::binary(a).unwrap()]).unwrap();
        let res = estimate_phat(&batch, DimSelectMethod::Fixed(4)).unwrap();
        assert!(!res.diagnostics.warnings.is_empty());
        assert!(res.latent.x().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn weighted_estimate_keeps_large_values() {
        let w = array![[0.0, 5.0, 5.0], [5.0, 0.0, 5.0], [5.0, 5.0, 0.0]];
        let g = AdjacencyMatrix::new(w.clone(), false).unwrap();
        let res = estimate_weighted(&GraphBatch::new(vec![g]).unwrap(), DimSelectMethod::Fixed(1)).unwrap();
        assert!(max_abs_diff(&res.estimate, &w) < 1e-10);
        let neg = AdjacencyMatrix::new(array![[0.0, -1.0], [-1.0, 0.0]], false).unwrap();
        assert!(estimate_weighted(&GraphBatch::new(vec![neg]).unwrap(), DimSelectMethod::Fixed(1)).is_err());
        let empty = GraphBatch::default();
        assert!(matches!(estimate_phat(&empty, DimSelectMethod::Fixed(1)), Err(Error::EmptyBatch)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fuzz_output_is_a_probability_matrix(seed in 0u64..10_000, n in 3usize..25, m in 1usize..6, which in 0usize..3) {
            let mut r = rng::seeded(seed);
            let graphs = (0..m).map(|_| {
                let mut p = Array2::from_shape_fn((n, n), |_| rand::Rng::random::<f64>(&mut r));
                p = (&p + &p.t()) / 2.0;
                p.diag_mut().fill(0.0);
                sample_iem_graph(&ProbabilityMatrix::new(p).unwrap(), &mut r)
            }).collect();
            let method = [DimSelectMethod::Zg(2), DimSelectMethod::Usvt(0.7), DimSelectMethod::Fixed(n.min(3))][which];
            let res = estimate_phat(&GraphBatch::new(graphs).unwrap(), method).unwrap();
            let p = res.phat.data();
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(p, &p.t().to_owned());
        }

        #[test]
        fn permutation_equivariance(seed in 0u64..10_000) {
            let (batch, _) = sbm_batch(30, 3, seed);
            let mut perm: Vec<usize> = (0..30).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng::seeded(seed ^ 0xabc));
            let direct = estimate_phat(&batch, DimSelectMethod::Fixed(2)).unwrap();
            let permuted = estimate_phat(&batch.permuted(&perm), DimSelectMethod::Fixed(2)).unwrap();
            prop_assert!(max_abs_diff(&direct.phat.permuted(&perm).into_data(), permuted.phat.data()) < 1e-8);
        }
    }
}
