//! Criterion benchmarks for the thermoform workspace.
//!
//! Run with `cargo bench -p thermoform-bench`. Fixtures shared by the
//! benchmark targets are defined here.

use thermoform::{build_pair_symbolic, build_perturbed_cookie_cutter, MapModel, PotentialPair, SubshiftSpec};

/// The perturbed two-branch map used throughout the benchmarks.
pub fn perturbed() -> MapModel {
    build_perturbed_cookie_cutter(0.5).expect("eps = 0.5 is expanding")
}

/// Reversal-dual pair on the full 3-shift with fixed non-balanced weights.
pub fn three_shift_pair() -> (SubshiftSpec, PotentialPair) {
    let shift = SubshiftSpec::full_shift(3);
    let weights: Vec<Vec<f64>> = [[0.3, 0.6, 0.3], [0.4, 0.3, 0.3], [0.4, 0.2, 0.5]]
        .iter()
        .map(|r| r.iter().map(|v: &f64| v.ln()).collect())
        .collect();
    let pair = build_pair_symbolic(&shift, &weights).expect("full shift is symmetric");
    (shift, pair)
}
