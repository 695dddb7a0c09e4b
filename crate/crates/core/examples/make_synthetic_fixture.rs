//! Regenerates `fixtures/synthetic_p70.csv`, the full-rank 70-vertex
//! probability matrix used by the cross-validation checks.
//!
//! Construction, loosely shaped like a cortical atlas: two hemispheres of
//! four lobes each. The block part has a sparse background, denser
//! connections within a hemisphere, dense lobes, and strong homotopic
//! (same lobe, other hemisphere) links. Vertex degree factors `exp(z_i)`
//! scale it to `D B D`, still of rank at most eight. A dense symmetric
//! Gaussian perturbation makes it full rank, and clamping to `[0, 1]` leaves
//! a share of entries at exactly 0 or 1.
//!
//! Usage: `cargo run -p graphmean-core --example make_synthetic_fixture [OUT]`

use std::path::PathBuf;

use graphmean::efficiency::{cross_validate, CvConfig};
use graphmean::graph::{clamp01, GraphBatch};
use graphmean::models::sample_iem_graph;
use graphmean::{io, rng, spectral, DimSelectMethod};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const LOBE_SIZES: [usize; 4] = [9, 9, 9, 8];
const WITHIN_HEMISPHERE: f64 = 0.1;
const ACROSS_HEMISPHERES: f64 = 0.01;
const WITHIN_LOBE: f64 = 0.98;
const HOMOTOPIC: f64 = 0.7;
const DEGREE_SD: f64 = 0.1;
const NOISE_SD: f64 = 0.03;
const SEED: u64 = 70;

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic_p70.csv"));
    let mut rng = rng::seeded(SEED);

    let lobes = LOBE_SIZES.len();
    let strength: Vec<f64> = (0..lobes).map(|_| rng.random_range(0.8..1.0)).collect();
    let (hemisphere, lobe): (Vec<usize>, Vec<usize>) = (0..2)
        .flat_map(|h| LOBE_SIZES.iter().enumerate().flat_map(move |(l, &s)| std::iter::repeat_n((h, l), s)))
        .unzip();
    let n = lobe.len();

    let degree = Normal::new(0.0, DEGREE_SD).unwrap();
    let z: Vec<f64> = (0..n).map(|_| degree.sample(&mut rng)).collect();
    let noise = Normal::new(0.0, NOISE_SD).unwrap();
    let mut p = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let same_half = hemisphere[i] == hemisphere[j];
            let block = match (lobe[i] == lobe[j], same_half) {
                (true, true) => WITHIN_LOBE * strength[lobe[i]],
                (true, false) => HOMOTOPIC * strength[lobe[i]],
                (false, true) => WITHIN_HEMISPHERE,
                (false, false) => ACROSS_HEMISPHERES,
            };
            let v = block * (z[i] + z[j]).exp() + noise.sample(&mut rng);
            // Four decimals keep the file readable.
            let v = (v * 1e4).round() / 1e4;
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
    }
    let p = clamp01(&p).expect("symmetric");

    let eig = spectral::eig_sym(p.data()).unwrap();
    let min_abs = eig.values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let pairs = (n * (n - 1)) as f64;
    let ones = p.data().iter().filter(|&&v| v == 1.0).count() as f64 / pairs;
    let zeros = (p.data().iter().filter(|&&v| v == 0.0).count() - n) as f64 / pairs;
    println!("leading eigenvalues: {:?}", &eig.values.to_vec()[..10]);
    println!("smallest |eigenvalue| {min_abs:e}; share of ones {ones:.3}, zeros {zeros:.3}");

    let mut sample_rng = rng::seeded(SEED + 1);
    let graphs = (0..100).map(|_| sample_iem_graph(&p, &mut sample_rng)).collect();
    let batch = GraphBatch::new(graphs).unwrap();
    let report = cross_validate(&batch, &CvConfig::new(1, 0, DimSelectMethod::Zg(3), SEED)).unwrap();
    let mean_d = report.replicates.iter().map(|r| r.d_selected as f64).sum::<f64>() / report.replicates.len() as f64;
    println!(
        "m = 1 cross-validation on 100 draws: mse_abar {:.4}, mse_phat {:.4}, RE {:.3}, mean d {mean_d:.1}",
        report.mean_mse_abar, report.mean_mse_phat, report.re
    );

    let header = format!("# synthetic full-rank probability matrix, N = {n}; see examples/make_synthetic_fixture.rs\n");
    io::write_text(&out, &(header + &io::dense_csv_string(p.data()))).unwrap();
    println!("wrote {}", out.display());
}
