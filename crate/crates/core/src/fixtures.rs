//! Built-in parameter sets.

use ndarray::{array, Array2};

use crate::graph::ProbabilityMatrix;
use crate::io;
use crate::models::SbmParams;

const SYNTHETIC_P70: &str = include_str!("../fixtures/synthetic_p70.csv");

/// Names accepted by [`by_name`].
pub const SBM_FIXTURES: [&str; 2] = ["two-block-4.2", "five-block-E"];

/// Two-block SBM used in the relative-efficiency experiments.
pub fn two_block() -> SbmParams {
    SbmParams::new(array![[0.42, 0.2], [0.2, 0.7]], vec![0.5, 0.5], true).expect("valid fixture")
}

/// Five-block SBM with unequal block sizes.
pub fn five_block() -> SbmParams {
    let b = array![
        [0.90, 0.27, 0.05, 0.10, 0.30],
        [0.27, 0.67, 0.02, 0.26, 0.14],
        [0.05, 0.02, 0.44, 0.25, 0.33],
        [0.10, 0.26, 0.25, 0.70, 0.18],
        [0.30, 0.14, 0.33, 0.18, 0.58],
    ];
    SbmParams::new(b, vec![0.22, 0.39, 0.05, 0.16, 0.18], true).expect("valid fixture")
}

pub fn by_name(name: &str) -> Option<SbmParams> {
    match name {
        "two-block-4.2" | "two-block" => Some(two_block()),
        "five-block-E" | "five-block" => Some(five_block()),
        _ => None,
    }
}

/// Full-rank 70-vertex probability matrix: a degree-corrected eight-block
/// structure plus a dense symmetric perturbation, clamped to [0, 1]. Regenerate with
/// `cargo run -p graphmean-core --example make_synthetic_fixture`.
pub fn synthetic_full_rank() -> ProbabilityMatrix {
    let data: Array2<f64> = io::parse_dense_csv("synthetic_p70.csv".as_ref(), SYNTHETIC_P70)
        .expect("synthetic fixture parses");
    ProbabilityMatrix::new(data).expect("synthetic fixture is a probability matrix")
}
