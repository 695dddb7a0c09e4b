//! Matrix containers for observed graphs and edge-probability matrices, and
//! the entry-wise operations defined on them.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};

pub(crate) fn check_square(data: &ArrayView2<f64>) -> Result<usize> {
    let (rows, cols) = data.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    Ok(rows)
}

pub(crate) fn check_finite(data: &ArrayView2<f64>) -> Result<()> {
    for ((row, col), v) in data.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Largest asymmetry `|a_ij - a_ji|` and where it occurs.
pub(crate) fn max_asymmetry(data: &ArrayView2<f64>) -> (usize, usize, f64) {
    let n = data.nrows();
    let mut worst = (0, 0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (data[[i, j]] - data[[j, i]]).abs();
            if gap > worst.2 {
                worst = (i, j, gap);
            }
        }
    }
    worst
}

pub(crate) fn check_symmetric(data: &ArrayView2<f64>, tol: f64) -> Result<()> {
    let (row, col, gap) = max_asymmetry(data);
    if gap > tol {
        return Err(Error::NotSymmetric { row, col, gap });
    }
    Ok(())
}

fn check_hollow(data: &ArrayView2<f64>) -> Result<()> {
    for (index, &value) in data.diag().iter().enumerate() {
        if value != 0.0 {
            return Err(Error::NonZeroDiagonal { index, value });
        }
    }
    Ok(())
}

/// One observed graph: a hollow square matrix of edge indicators or weights.
///
/// Undirected matrices are exactly symmetric. Binary-ness is a checked
/// property ([`AdjacencyMatrix::is_binary`]) rather than a separate type so
/// that weighted graphs share the container.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    data: Array2<f64>,
    directed: bool,
}

impl AdjacencyMatrix {
    /// Validates finiteness, hollowness and (for undirected graphs) exact
    /// symmetry.
    pub fn new(data: Array2<f64>, directed: bool) -> Result<Self> {
        let view = data.view();
        check_square(&view)?;
        check_finite(&view)?;
        check_hollow(&view)?;
        if !directed {
            check_symmetric(&view, 0.0)?;
        }
        Ok(AdjacencyMatrix { data, directed })
    }

    /// Undirected graph whose entries must all be 0 or 1.
    pub fn binary(data: Array2<f64>) -> Result<Self> {
        let a = Self::new(data, false)?;
        a.require_binary()?;
        Ok(a)
    }

    /// Undirected graph on `n` vertices with the given 0-based edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut data = Array2::zeros((n, n));
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::NonZeroDiagonal { index: i, value: 1.0 });
            }
            data[[i, j]] = 1.0;
            data[[j, i]] = 1.0;
        }
        Ok(AdjacencyMatrix { data, directed: false })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn require_binary(&self) -> Result<()> {
        for ((row, col), &value) in self.data.indexed_iter() {
            if value != 0.0 && value != 1.0 {
                return Err(Error::NotBinary { row, col, value });
            }
        }
        Ok(())
    }

    /// Any positive weight becomes an edge.
    pub fn binarized(&self) -> AdjacencyMatrix {
        AdjacencyMatrix {
            data: self.data.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            directed: self.directed,
        }
    }

    /// Relabels vertices so that new vertex `k` is old vertex `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> AdjacencyMatrix {
        AdjacencyMatrix { data: permute(&self.data, perm), directed: self.directed }
    }
}

/// Symmetric matrix of edge probabilities (or an estimate of one).
///
/// The diagonal is zero unless `augmented` is set, which happens only for
/// intermediate matrices whose diagonal was imputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    data: Array2<f64>,
    augmented: bool,
}

impl ProbabilityMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        Self::validate(&data, false)?;
        Ok(ProbabilityMatrix { data, augmented: false })
    }

    /// A probability matrix whose diagonal may be nonzero.
    pub fn augmented(data: Array2<f64>) -> Result<Self> {
        Self::validate(&data, true)?;
        Ok(ProbabilityMatrix { data, augmented: true })
    }

    fn validate(data: &Array2<f64>, allow_diagonal: bool) -> Result<()> {
        let view = data.view();
        check_square(&view)?;
        check_finite(&view)?;
        check_symmetric(&view, 0.0)?;
        for ((row, col), &value) in data.indexed_iter() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfUnitInterval { row, col, value });
            }
        }
        if !allow_diagonal {
            check_hollow(&view)?;
        }
        Ok(())
    }

    pub(crate) fn from_trusted(data: Array2<f64>, augmented: bool) -> Self {
        ProbabilityMatrix { data, augmented }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    /// Copy with the diagonal set to zero.
    pub fn hollowed(&self) -> ProbabilityMatrix {
        let mut data = self.data.clone();
        data.diag_mut().fill(0.0);
        ProbabilityMatrix { data, augmented: false }
    }

    pub fn permuted(&self, perm: &[usize]) -> ProbabilityMatrix {
        ProbabilityMatrix { data: permute(&self.data, perm), augmented: self.augmented }
    }
}

/// Ordered collection of graphs on a shared, aligned vertex set.
#[derive(Debug, Clone, Default)]
pub struct GraphBatch {
    graphs: Vec<AdjacencyMatrix>,
    sources: Vec<String>,
}

impl GraphBatch {
    pub fn new(graphs: Vec<AdjacencyMatrix>) -> Result<Self> {
        let sources = (0..graphs.len()).map(|i| format!("graph-{i}")).collect();
        Self::with_sources(graphs, sources)
    }

    pub fn with_sources(graphs: Vec<AdjacencyMatrix>, sources: Vec<String>) -> Result<Self> {
        if sources.len() != graphs.len() {
            return Err(Error::DimensionMismatch { expected: graphs.len(), actual: sources.len() });
        }
        if let Some(first) = graphs.first() {
            let n = first.n();
            if let Some(bad) = graphs.iter().find(|g| g.n() != n) {
                return Err(Error::DimensionMismatch { expected: n, actual: bad.n() });
            }
        }
        Ok(GraphBatch { graphs, sources })
    }

    pub fn graphs(&self) -> &[AdjacencyMatrix] {
        &self.graphs
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Vertex count, or `None` for an empty batch.
    pub fn n(&self) -> Option<usize> {
        self.graphs.first().map(AdjacencyMatrix::n)
    }

    /// Sub-batch holding the graphs at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> GraphBatch {
        GraphBatch {
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
            sources: indices.iter().map(|&i| self.sources[i].clone()).collect(),
        }
    }

    pub fn permuted(&self, perm: &[usize]) -> GraphBatch {
        GraphBatch {
            graphs: self.graphs.iter().map(|g| g.permuted(perm)).collect(),
            sources: self.sources.clone(),
        }
    }
}

fn permute(data: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
    let n = data.nrows();
    assert_eq!(perm.len(), n, "permutation length must match matrix size");
    Array2::from_shape_fn((n, n), |(i, j)| data[[perm[i], perm[j]]])
}

/// Entry-wise mean of a batch of binary undirected graphs.
pub fn sample_mean(batch: &GraphBatch) -> Result<ProbabilityMatrix> {
    for g in batch.graphs() {
        if g.directed() {
            return Err(Error::invalid("sample mean requires undirected graphs"));
        }
        g.require_binary()?;
    }
    let mean = mean_of(batch)?;
    Ok(ProbabilityMatrix::from_trusted(mean, false))
}

/// Entry-wise mean without the binary requirement (weighted graphs).
pub fn weighted_mean(batch: &GraphBatch) -> Result<Array2<f64>> {
    mean_of(batch)
}

fn mean_of(batch: &GraphBatch) -> Result<Array2<f64>> {
    let n = batch.n().ok_or(Error::EmptyBatch)?;
    let mut sum = Array2::<f64>::zeros((n, n));
    for g in batch.graphs() {
        sum += g.data();
    }
    let m = batch.len() as f64;
    sum.mapv_inplace(|v| v / m);
    Ok(sum)
}

/// Entry-wise projection onto `[0, 1]`.
///
/// The input must be square and symmetric; a nonzero diagonal survives and
/// marks the result as augmented.
pub fn clamp01(m: &Array2<f64>) -> Result<ProbabilityMatrix> {
    let view = m.view();
    check_square(&view)?;
    check_finite(&view)?;
    check_symmetric(&view, 0.0)?;
    let data = m.mapv(|x| x.clamp(0.0, 1.0));
    let augmented = data.diag().iter().any(|&v| v != 0.0);
    Ok(ProbabilityMatrix::from_trusted(data, augmented))
}

/// Mean squared error over the `C(n, 2)` off-diagonal pairs `i < j`.
pub fn mse(estimate: &ProbabilityMatrix, truth: &ProbabilityMatrix) -> Result<f64> {
    offdiag_mse(estimate.data(), truth.data())
}

pub(crate) fn offdiag_mse(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    let n = a.nrows();
    if b.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: n, actual: b.nrows() });
    }
    if n < 2 {
        return Err(Error::invalid("mse needs at least two vertices"));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let e = a[[i, j]] - b[[i, j]];
            total += e * e;
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// `w -> ln(w + 1)` for heavy-tailed nonnegative edge weights.
pub fn log1p_transform(w: &AdjacencyMatrix) -> Result<AdjacencyMatrix> {
    for ((row, col), &value) in w.data().indexed_iter() {
        if value < 0.0 {
            return Err(Error::NegativeWeight { row, col, value });
        }
    }
    let mut data = w.data().clone();
    Zip::from(&mut data).for_each(|v| *v = v.ln_1p());
    Ok(AdjacencyMatrix { data, directed: w.directed() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn complement(a: &AdjacencyMatrix) -> AdjacencyMatrix {
        let mut data = a.data().mapv(|v| 1.0 - v);
        data.diag_mut().fill(0.0);
        AdjacencyMatrix::binary(data).unwrap()
    }

    #[test]
    fn mean_of_single_graph_is_the_graph() {
        let a = AdjacencyMatrix::from_edges(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
        let batch = GraphBatch::new(vec![a.clone()]).unwrap();
        assert_eq!(sample_mean(&batch).unwrap().data(), a.data());
    }

    #[test]
    fn graph_and_complement_average_to_one_half() {
        let a = AdjacencyMatrix::from_edges(5, &[(0, 1), (2, 4), (3, 1)]).unwrap();
        let batch = GraphBatch::new(vec![a.clone(), complement(&a)]).unwrap();
        let mean = sample_mean(&batch).unwrap();
        for ((i, j), &v) in mean.data().indexed_iter() {
            assert_eq!(v, if i == j { 0.0 } else { 0.5 });
        }
    }

    #[test]
    fn edge_in_two_of_three_graphs() {
        let g1 = AdjacencyMatrix::from_edges(4, &[(1, 2), (0, 3)]).unwrap();
        let g2 = AdjacencyMatrix::from_edges(4, &[(1, 2)]).unwrap();
        let g3 = AdjacencyMatrix::from_edges(4, &[(0, 1)]).unwrap();
        let mean = sample_mean(&GraphBatch::new(vec![g1, g2, g3]).unwrap()).unwrap();
        assert!((mean.data()[[1, 2]] - 2.0 / 3.0).abs() < 1e-15);
        assert!((mean.data()[[2, 1]] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sample_mean_errors() {
        assert!(matches!(sample_mean(&GraphBatch::default()), Err(Error::EmptyBatch)));
        let a = AdjacencyMatrix::from_edges(3, &[]).unwrap();
        let b = AdjacencyMatrix::from_edges(4, &[]).unwrap();
        assert!(matches!(GraphBatch::new(vec![a, b]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn constructors_reject_bad_matrices() {
        assert!(matches!(
            AdjacencyMatrix::new(array![[1.0, 0.0], [0.0, 0.0]], false),
            Err(Error::NonZeroDiagonal { index: 0, .. })
        ));
        assert!(matches!(
            AdjacencyMatrix::new(array![[0.0, 1.0], [0.0, 0.0]], false),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(AdjacencyMatrix::new(array![[0.0, 1.0], [0.0, 0.0]], true).is_ok());
        assert!(matches!(
            AdjacencyMatrix::new(array![[0.0, f64::NAN], [f64::NAN, 0.0]], false),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            AdjacencyMatrix::binary(array![[0.0, 1.5], [1.5, 0.0]]),
            Err(Error::NotBinary { .. })
        ));
        assert!(matches!(
            ProbabilityMatrix::new(array![[0.0, 1.2], [1.2, 0.0]]),
            Err(Error::OutOfUnitInterval { .. })
        ));
    }

    #[test]
    fn clamp_examples() {
        let m = array![[0.0, 1.2, -0.05], [1.2, 0.0, 0.37], [-0.05, 0.37, 0.0]];
        let c = clamp01(&m).unwrap();
        assert_eq!(c.data()[[0, 1]], 1.0);
        assert_eq!(c.data()[[0, 2]], 0.0);
        assert_eq!(c.data()[[1, 2]], 0.37);
        assert!(!c.is_augmented());
        assert!(clamp01(&array![[0.0, 1.0], [0.5, 0.0]]).is_err());
    }

    #[test]
    fn mse_examples() {
        let p = ProbabilityMatrix::new(array![[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let e = ProbabilityMatrix::new(array![[0.0, 0.5], [0.5, 0.0]]).unwrap();
        assert_eq!(mse(&p, &p).unwrap(), 0.0);
        assert!((mse(&e, &p).unwrap() - 0.25).abs() < 1e-15);

        let truth = ProbabilityMatrix::new(array![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
            .unwrap();
        let est = ProbabilityMatrix::new(array![[0.0, 0.6, 0.7], [0.6, 0.0, 0.8], [0.7, 0.8, 0.0]])
            .unwrap();
        assert!((mse(&est, &truth).unwrap() - 0.14 / 3.0).abs() < 1e-12);

        let small = ProbabilityMatrix::new(Array2::zeros((3, 3))).unwrap();
        assert!(matches!(mse(&small, &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn log1p_examples() {
        let e = std::f64::consts::E;
        let w = AdjacencyMatrix::new(array![[0.0, e - 1.0, 1e4], [0.0, 0.0, 0.0], [0.0, 3.0, 0.0]], true)
            .unwrap();
        let t = log1p_transform(&w).unwrap();
        assert_eq!(t.data()[[1, 0]], 0.0);
        assert!((t.data()[[0, 1]] - 1.0).abs() < 1e-15);
        let max = t.data().iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - 9.2104).abs() < 1e-4);
        assert!(t.directed());
        let neg = AdjacencyMatrix::new(array![[0.0, -1.0], [-1.0, 0.0]], false).unwrap();
        assert!(matches!(log1p_transform(&neg), Err(Error::NegativeWeight { .. })));
    }

    fn random_binary(n: usize) -> impl Strategy<Value = AdjacencyMatrix> {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut data = Array2::zeros((n, n));
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if bits[k] {
                        data[[i, j]] = 1.0;
                        data[[j, i]] = 1.0;
                    }
                    k += 1;
                }
            }
            AdjacencyMatrix::binary(data).unwrap()
        })
    }

    fn random_probability(n: usize) -> impl Strategy<Value = ProbabilityMatrix> {
        proptest::collection::vec(-0.5f64..1.5, n * n).prop_map(move |v| {
            let raw = Array2::from_shape_vec((n, n), v).unwrap();
            let mut sym = &raw + &raw.t();
            sym.mapv_inplace(|x| x / 2.0);
            sym.diag_mut().fill(0.0);
            clamp01(&sym).unwrap()
        })
    }

    proptest! {
        #[test]
        fn sample_mean_commutes_with_permutation(
            graphs in proptest::collection::vec(random_binary(6), 1..5),
            perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        ) {
            let batch = GraphBatch::new(graphs).unwrap();
            let lhs = sample_mean(&batch.permuted(&perm)).unwrap();
            let rhs = sample_mean(&batch).unwrap().permuted(&perm);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn mse_is_symmetric_and_zero_iff_equal(x in random_probability(5), y in random_probability(5)) {
            let xy = mse(&x, &y).unwrap();
            prop_assert_eq!(xy, mse(&y, &x).unwrap());
            prop_assert!(xy >= 0.0);
            prop_assert_eq!(xy == 0.0, x.data() == y.data());
            prop_assert_eq!(mse(&x, &x).unwrap(), 0.0);
        }

        #[test]
        fn clamp_is_idempotent(x in random_probability(5)) {
            let again = clamp01(x.data()).unwrap();
            prop_assert_eq!(again.data(), x.data());
        }
    }
}
