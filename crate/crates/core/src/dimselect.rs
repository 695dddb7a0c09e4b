//! Embedding dimension selection: the Zhu-Ghodsi profile-likelihood elbow
//! and universal singular value thresholding (USVT).

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, EigenPairs};

/// How the estimator picks its rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DimSelectMethod {
    /// The `s`-th Zhu-Ghodsi elbow of the algebraic eigenvalues.
    Zg(usize),
    /// Number of singular values above `c * sqrt(n / m)`.
    Usvt(f64),
    Fixed(usize),
}

impl Default for DimSelectMethod {
    fn default() -> Self {
        DimSelectMethod::Zg(3)
    }
}

impl DimSelectMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DimSelectMethod::Zg(0) => Err(Error::invalid("ZG elbow index must be >= 1")),
            DimSelectMethod::Usvt(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::invalid(format!("USVT constant must be positive, got {c}")))
            }
            DimSelectMethod::Fixed(0) => Err(Error::DimensionOutOfRange { d: 0, max: usize::MAX }),
            _ => Ok(()),
        }
    }

    /// Whether selection needs the full spectrum.
    pub fn needs_spectrum(&self) -> bool {
        !matches!(self, DimSelectMethod::Fixed(_))
    }
}

impl FromStr for DimSelectMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let bad = || Error::invalid(format!("invalid dimension method '{s}' (expected zg:S, usvt:C or fixed:D)"));
        let method = match (kind.to_ascii_lowercase().as_str(), arg) {
            ("zg", None) => DimSelectMethod::Zg(3),
            ("zg", Some(a)) => DimSelectMethod::Zg(a.parse().map_err(|_| bad())?),
            ("usvt", None) => DimSelectMethod::Usvt(0.7),
            ("usvt", Some(a)) => DimSelectMethod::Usvt(a.parse().map_err(|_| bad())?),
            ("fixed", Some(a)) => DimSelectMethod::Fixed(a.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        method.validate()?;
        Ok(method)
    }
}

impl fmt::Display for DimSelectMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimSelectMethod::Zg(s) => write!(f, "zg:{s}"),
            DimSelectMethod::Usvt(c) => write!(f, "usvt:{c}"),
            DimSelectMethod::Fixed(d) => write!(f, "fixed:{d}"),
        }
    }
}

impl TryFrom<String> for DimSelectMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DimSelectMethod> for String {
    fn from(m: DimSelectMethod) -> String {
        m.to_string()
    }
}

/// A selected dimension plus any warnings raised on the way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Selection {
    pub d: usize,
    pub warnings: Vec<String>,
}

/// Residual sum of squares of the two-group split after the first `q` values.
fn split_rss(values: &[f64], q: usize) -> f64 {
    let rss = |group: &[f64]| {
        let mean = group.iter().sum::<f64>() / group.len() as f64;
        group.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
    };
    rss(&values[..q]) + rss(&values[q..])
}

/// First elbow: the split `q in 1..p` maximising the two-mean, pooled-variance
/// Gaussian profile likelihood. With the MLE variance `RSS / p` that is the
/// split with the smallest residual sum of squares; ties go to the smaller q.
fn first_elbow(values: &[f64]) -> usize {
    let mut best = (1, f64::INFINITY);
    for q in 1..values.len() {
        let rss = split_rss(values, q);
        if rss < best.1 {
            best = (q, rss);
        }
    }
    best.0
}

/// Cumulative position of the `s`-th Zhu-Ghodsi elbow of `values`
/// (nonincreasing). Stops early, with a warning, once the tail has fewer
/// than two values.
pub fn zg_elbow(values: &[f64], s: usize) -> Result<Selection> {
    if s == 0 {
        return Err(Error::invalid("ZG elbow index must be >= 1"));
    }
    if values.len() < 2 {
        return Err(Error::invalid(format!("ZG elbow needs at least 2 values, got {}", values.len())));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("eigenvalue {i} is not finite")));
    }
    if values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("ZG elbow needs values sorted in nonincreasing order"));
    }
    let mut d = 0;
    let mut warnings = Vec::new();
    for i in 1..=s {
        let tail = &values[d..];
        if tail.len() < 2 {
            warnings.push(format!(
                "elbow {i} of {s} not computable: {} value(s) left after elbow {}; using d = {d}",
                tail.len(),
                i - 1
            ));
            break;
        }
        d += first_elbow(tail);
    }
    Ok(Selection { d, warnings })
}

/// USVT threshold `c * sqrt(n / m)`.
pub fn usvt_threshold(n: usize, m: usize, c: f64) -> f64 {
    c * (n as f64 / m as f64).sqrt()
}

/// Count of singular values strictly above the USVT threshold, floored at 1.
pub fn usvt_dim(values: &[f64], n: usize, m: usize, c: f64) -> Result<Selection> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("USVT needs n, m >= 1"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("USVT constant must be positive, got {c}")));
    }
    let threshold = usvt_threshold(n, m, c);
    let d = values.iter().filter(|&&v| v > threshold).count();
    if d == 0 {
        return Ok(Selection {
            d: 1,
            warnings: vec![format!("no singular value exceeds the USVT threshold {threshold}; using d = 1")],
        });
    }
    Ok(Selection { d, warnings: Vec::new() })
}

/// Dimension choice from a precomputed full spectrum (algebraically descending).
pub fn select_from_spectrum(pairs: &EigenPairs, method: DimSelectMethod, m: usize) -> Result<Selection> {
    method.validate()?;
    let n = pairs.len();
    match method {
        DimSelectMethod::Zg(s) => zg_elbow(pairs.values.as_slice().expect("contiguous eigenvalues"), s),
        DimSelectMethod::Usvt(c) => usvt_dim(&spectral::symmetric_singular_values(pairs), n, m, c),
        DimSelectMethod::Fixed(d) => fixed(d, n),
    }
}

fn fixed(d: usize, n: usize) -> Result<Selection> {
    if d == 0 || d > n {
        return Err(Error::DimensionOutOfRange { d, max: n });
    }
    Ok(Selection { d, warnings: Vec::new() })
}

/// Selects the embedding dimension of a symmetric matrix (normally the
/// diagonally augmented mean of `m` graphs).
pub fn select_dimension(matrix: &Array2<f64>, method: DimSelectMethod, m: usize) -> Result<Selection> {
    method.validate()?;
    match method {
        DimSelectMethod::Fixed(d) => fixed(d, matrix.nrows()),
        _ => select_from_spectrum(&spectral::eig_sym(matrix)?, method, m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    /// Independent formulation: explicit Gaussian log-likelihood with pooled
    /// MLE variance, maximised over splits (first maximum wins).
    fn oracle_first_elbow(values: &[f64]) -> usize {
        let p = values.len();
        let mut best = (0, f64::NEG_INFINITY);
        for q in 1..p {
            let (a, b) = values.split_at(q);
            let mu1 = a.iter().sum::<f64>() / a.len() as f64;
            let mu2 = b.iter().sum::<f64>() / b.len() as f64;
            let ss: f64 = a.iter().map(|v| (v - mu1).powi(2)).sum::<f64>()
                + b.iter().map(|v| (v - mu2).powi(2)).sum::<f64>();
            let var = ss / p as f64;
            let ll = if var == 0.0 {
                f64::INFINITY
            } else {
                values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let mu = if i < q { mu1 } else { mu2 };
                        -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - mu).powi(2) / (2.0 * var)
                    })
                    .sum()
            };
            if ll > best.1 {
                best = (q, ll);
            }
        }
        best.0
    }

    fn oracle_elbow(values: &[f64], s: usize) -> usize {
        let mut d = 0;
        for _ in 0..s {
            if values.len() - d < 2 {
                break;
            }
            d += oracle_first_elbow(&values[d..]);
        }
        d
    }

    #[test]
    fn zg_examples() {
        assert_eq!(zg_elbow(&[10.0, 9.0, 1.0, 0.9, 0.8], 1).unwrap().d, 2);
        assert_eq!(oracle_first_elbow(&[10.0, 9.0, 1.0, 0.9, 0.8]), 2);
        assert_eq!(zg_elbow(&[100.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1).unwrap().d, 1);
        assert_eq!(oracle_first_elbow(&[100.0, 1.0, 1.0, 1.0, 1.0, 1.0]), 1);
        let constant = [5.0, 5.0, 5.0, 5.0];
        assert_eq!(zg_elbow(&constant, 1).unwrap().d, oracle_first_elbow(&constant));
    }

    #[test]
    fn zg_tail_exhaustion_warns() {
        let sel = zg_elbow(&[10.0, 9.0, 1.0], 5).unwrap();
        assert!(!sel.warnings.is_empty());
        assert!(sel.d >= 1 && sel.d <= 3);
        assert!(zg_elbow(&[1.0], 1).is_err());
        assert!(zg_elbow(&[1.0, 2.0], 1).is_err());
        assert!(zg_elbow(&[2.0, 1.0], 0).is_err());
    }

    #[test]
    fn zg_exact_gap() {
        let mut values = vec![9.0, 8.0, 7.5];
        values.extend((0..40).map(|i| 1e-6 * (40 - i) as f64));
        assert_eq!(zg_elbow(&values, 1).unwrap().d, 3);
    }

    #[test]
    fn usvt_examples() {
        assert!((usvt_threshold(100, 1, 0.7) - 7.0).abs() < 1e-12);
        assert_eq!(usvt_dim(&[10.0, 8.0, 6.9], 100, 1, 0.7).unwrap().d, 2);
        let floor = usvt_dim(&[1.0, 0.5], 100, 1, 0.7).unwrap();
        assert_eq!(floor.d, 1);
        assert_eq!(floor.warnings.len(), 1);
        assert!(usvt_dim(&[1.0], 10, 1, 0.0).is_err());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("zg:3".parse::<DimSelectMethod>().unwrap(), DimSelectMethod::Zg(3));
        assert_eq!("usvt:0.7".parse::<DimSelectMethod>().unwrap(), DimSelectMethod::Usvt(0.7));
        assert_eq!("fixed:11".parse::<DimSelectMethod>().unwrap(), DimSelectMethod::Fixed(11));
        assert_eq!("ZG".parse::<DimSelectMethod>().unwrap(), DimSelectMethod::Zg(3));
        for bad in ["zg:0", "usvt:-1", "fixed:0", "fixed", "pca:2", "zg:x"] {
            assert!(bad.parse::<DimSelectMethod>().is_err(), "{bad}");
        }
        for m in [DimSelectMethod::Zg(2), DimSelectMethod::Usvt(0.7), DimSelectMethod::Fixed(4)] {
            assert_eq!(m.to_string().parse::<DimSelectMethod>().unwrap(), m);
        }
    }

    #[test]
    fn select_dispatch() {
        let a = array![[3.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(select_dimension(&a, DimSelectMethod::Fixed(2), 1).unwrap().d, 2);
        assert!(select_dimension(&a, DimSelectMethod::Fixed(4), 1).is_err());
        // Singular values (3, 2, 1) against threshold 0.9 * sqrt(3 / 1).
        assert_eq!(select_dimension(&a, DimSelectMethod::Usvt(0.9), 1).unwrap().d, 2);
        // Algebraic spectrum (3, 1, -2).
        assert_eq!(select_dimension(&a, DimSelectMethod::Zg(1), 1).unwrap().d, oracle_first_elbow(&[3.0, 1.0, -2.0]));
    }

    fn descending(v: Vec<f64>) -> Vec<f64> {
        let mut v = v;
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }

    proptest! {
        #[test]
        fn zg_matches_oracle(v in prop::collection::vec(-10.0f64..10.0, 2..30), s in 1usize..5) {
            let v = descending(v);
            prop_assert_eq!(zg_elbow(&v, s).unwrap().d, oracle_elbow(&v, s));
        }

        #[test]
        fn zg_scale_invariant(v in prop::collection::vec(-10.0f64..10.0, 2..30), s in 1usize..4, k in -8i32..8) {
            let v = descending(v);
            let alpha = 2f64.powi(k);
            let scaled: Vec<f64> = v.iter().map(|x| x * alpha).collect();
            prop_assert_eq!(zg_elbow(&v, s).unwrap().d, zg_elbow(&scaled, s).unwrap().d);
        }

        #[test]
        fn zg_strictly_increasing_in_s(v in prop::collection::vec(0.0f64..10.0, 2..30), s in 1usize..5) {
            let v = descending(v);
            let a = zg_elbow(&v, s).unwrap();
            let b = zg_elbow(&v, s + 1).unwrap();
            if a.warnings.is_empty() && v.len() - a.d >= 2 {
                prop_assert!(b.d > a.d);
            } else {
                prop_assert_eq!(b.d, a.d);
            }
        }

        #[test]
        fn usvt_monotone(v in prop::collection::vec(0.0f64..20.0, 1..30), c1 in 0.1f64..3.0, c2 in 0.1f64..3.0,
                         n in 1usize..500, m in 1usize..50) {
            let v = descending(v);
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            prop_assert!(usvt_dim(&v, n, m, hi).unwrap().d <= usvt_dim(&v, n, m, lo).unwrap().d);
            prop_assert!(usvt_dim(&v, n, m + 1, lo).unwrap().d >= usvt_dim(&v, n, m, lo).unwrap().d);
        }
    }
}
