//! Entropy production, its cumulant generating function and fluctuation relations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{stream_rng, ChainSampler, CHUNK};
use crate::error::{Error, Result};
use crate::io::Table;
use crate::model::Model;
use crate::operator::{doob_transitions, DEFAULT_TOL};
use crate::potential::{EvalMode, PotentialSpec};
use crate::pressure::{
    legendre, uniform_grid, Equilibrium, PressureCurve, RateFunction, TiltedFamily, MAX_EXACT_HORIZON,
};
use crate::symbolic::SubshiftSpec;

/// Forward and reversed weights with entropy production `σ = φ_u − φ_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    pub phi_u: PotentialSpec,
    pub phi_s: PotentialSpec,
    pub sigma: PotentialSpec,
    /// `∫σ dμ⁺` with `μ⁺` the equilibrium state of `φ_u`.
    pub sigma_mean: f64,
}

impl PotentialPair {
    /// Pair from two user potentials on a common model.
    pub fn new(model: &Model, phi_u: PotentialSpec, phi_s: PotentialSpec, depth: usize) -> Result<Self> {
        let n = model.coding().alphabet_size();
        let sigma = phi_u.combine(1.0, &phi_s, -1.0, n);
        let depth = depth.max(sigma.required_depth());
        let sigma_mean = Equilibrium::new(model, &phi_u, depth, DEFAULT_TOL)?.integrate(model, &sigma)?;
        Ok(PotentialPair {
            phi_u,
            phi_s,
            sigma,
            sigma_mean,
        })
    }

    fn depth(&self, depth: usize) -> usize {
        depth
            .max(self.phi_u.required_depth())
            .max(self.phi_s.required_depth())
            .max(self.sigma.required_depth())
    }

    fn family(&self, model: &Model, depth: usize) -> Result<TiltedFamily> {
        TiltedFamily::new(model, &self.phi_u, &self.sigma, self.depth(depth))
    }
}

/// Reversal-dual pair from pair weights `w[i][j]` on a symmetric SFT.
///
/// `φ_u = w − P(w)` and `φ_s(i,j) = φ_u(j,i)`.
pub fn build_pair_symbolic(shift: &SubshiftSpec, weights: &[Vec<f64>]) -> Result<PotentialPair> {
    if !shift.is_symmetric() {
        return Err(Error::AdmissibilityMismatch);
    }
    let n = shift.alphabet_size();
    if weights.len() != n || weights.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidPotential(format!("pair weights must be {n}x{n}")));
    }
    let mut table = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if shift.allowed(i as u8, j as u8) {
                if !weights[i][j].is_finite() {
                    return Err(Error::InvalidPotential(format!("weight ({i},{j}) is not finite")));
                }
                table[i * n + j] = weights[i][j];
            }
        }
    }
    let model = Model::Shift(shift.clone());
    let w = PotentialSpec::cylinder_table(2, table.clone());
    let p = Equilibrium::new(&model, &w, 2, DEFAULT_TOL)?.pressure();
    let u: Vec<f64> = table.iter().map(|v| v - p).collect();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if shift.allowed(i as u8, j as u8) {
                s[i * n + j] = u[j * n + i];
            }
        }
    }
    PotentialPair::new(
        &model,
        PotentialSpec::cylinder_table(2, u),
        PotentialSpec::cylinder_table(2, s),
        2,
    )
}

/// `Λ(t) = P(φ_u + tσ) − P(φ_u)` on a grid.
pub fn scgf(pair: &PotentialPair, model: &Model, t_grid: &[f64], depth: usize) -> Result<PressureCurve> {
    let fam = pair.family(model, depth)?;
    let p0 = fam.pressure(0.0, DEFAULT_TOL)?;
    let values = t_grid
        .par_iter()
        .map(|&t| Ok(fam.pressure(t, DEFAULT_TOL)? - p0))
        .collect::<Result<Vec<_>>>()?;
    Ok(PressureCurve {
        grid: t_grid.to_vec(),
        values,
        depth: fam.depth(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JarzynskiCheck {
    pub n: usize,
    /// `(1/n) log ∫ exp(−S_nσ) dμ⁺`.
    pub lhs_rate: f64,
    /// `P(φ_s)`.
    pub rhs: f64,
    pub gap: f64,
    /// `Λ(−1)`, the limit of `lhs_rate`.
    pub lambda_minus_one: f64,
}

/// Exact evaluation of the exponential average of `−S_nσ` by propagating along the Doob chain.
pub fn jarzynski_check(pair: &PotentialPair, model: &Model, n: usize, depth: usize) -> Result<JarzynskiCheck> {
    if n > MAX_EXACT_HORIZON {
        return Err(Error::HorizonCap {
            horizon: n,
            cap: MAX_EXACT_HORIZON,
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let depth = pair.depth(depth);
    let eq = Equilibrium::new(model, &pair.phi_u, depth, DEFAULT_TOL)?;
    let sigma = pair.sigma.cylinder_values(model, eq.basis(), EvalMode::Midpoint)?;
    let weight: Vec<f64> = sigma.iter().map(|s| (-s).exp()).collect();
    let w = &eq.matrix;
    let doob = doob_transitions(w, &eq.triple);
    let mut m: Vec<f64> = eq.measure.masses.iter().zip(&weight).map(|(p, e)| p * e).collect();
    let mut log_scale = 0.0;
    let mut next = vec![0.0; m.len()];
    for _ in 1..n {
        let s: f64 = m.iter().sum();
        log_scale += s.ln();
        m.iter_mut().for_each(|v| *v /= s);
        next.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m.len() {
            for (&j, q) in w.successors(i).iter().zip(&doob[i]) {
                next[j] += m[i] * q;
            }
        }
        for j in 0..m.len() {
            m[j] = next[j] * weight[j];
        }
    }
    let lhs_rate = (log_scale + m.iter().sum::<f64>().ln()) / n as f64;
    let rhs = Equilibrium::new(model, &pair.phi_s, depth, DEFAULT_TOL)?.pressure();
    let fam = pair.family(model, depth)?;
    let lambda_minus_one = fam.pressure(-1.0, DEFAULT_TOL)? - fam.pressure(0.0, DEFAULT_TOL)?;
    Ok(JarzynskiCheck {
        n,
        lhs_rate,
        rhs,
        gap: (lhs_rate - rhs).abs(),
        lambda_minus_one,
    })
}

/// `∫σ dμ⁺` beside `−P(φ_s)`; the two agree only when `μ⁺` is also an equilibrium state of `φ_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyProduction {
    pub integral: f64,
    pub minus_pressure_s: f64,
    pub difference: f64,
}

pub fn entropy_production_mean(pair: &PotentialPair, model: &Model, depth: usize) -> Result<EntropyProduction> {
    let depth = pair.depth(depth);
    let integral = Equilibrium::new(model, &pair.phi_u, depth, DEFAULT_TOL)?.integrate(model, &pair.sigma)?;
    let minus_pressure_s = -Equilibrium::new(model, &pair.phi_s, depth, DEFAULT_TOL)?.pressure();
    Ok(EntropyProduction {
        integral,
        minus_pressure_s,
        difference: integral - minus_pressure_s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCReport {
    pub lambda: PressureCurve,
    pub rate: RateFunction,
    /// `(a, I(a) − I(−a) + a)` where both `±a` lie in the rate domain.
    pub symmetry_defect: Vec<[f64; 2]>,
    pub max_symmetry_defect: f64,
    /// `sup |I(a) − I(−a) − a|`, the opposite sign convention.
    pub max_opposite_defect: f64,
    /// `(t, Λ(t) − Λ(−1−t))`.
    pub reflection: Vec<[f64; 2]>,
    pub lambda_reflection_defect: f64,
    pub sigma_mean: f64,
    pub jarzynski: JarzynskiCheck,
    /// True when the rate function lives on a single point.
    pub degenerate: bool,
}

pub const GC_JARZYNSKI_HORIZON: usize = 12;

pub fn gc_symmetry(
    pair: &PotentialPair,
    model: &Model,
    t_grid: &[f64],
    a_grid: Option<&[f64]>,
    depth: usize,
) -> Result<GCReport> {
    let lambda = scgf(pair, model, t_grid, depth)?;
    let fam = pair.family(model, depth)?;
    let p0 = fam.pressure(0.0, DEFAULT_TOL)?;
    let reflection = t_grid
        .par_iter()
        .zip(&lambda.values)
        .map(|(&t, &v)| Ok([t, v - (fam.pressure(-1.0 - t, DEFAULT_TOL)? - p0)]))
        .collect::<Result<Vec<_>>>()?;
    let lambda_reflection_defect = reflection.iter().map(|r| r[1].abs()).fold(0.0, f64::max);

    let probe = legendre(&lambda.grid, &lambda.values, Some(&[0.0]))?;
    let [lo, hi] = probe.domain;
    let degenerate = hi - lo < 1e-12;
    let default_grid;
    let a_grid = match a_grid {
        Some(g) => g,
        None => {
            let m = if lo < 0.0 && hi > 0.0 { (-lo).min(hi) } else { 0.0 };
            default_grid = if m > 0.0 { uniform_grid(-m, m, 201) } else { vec![0.0] };
            &default_grid
        }
    };
    let mut both = a_grid.to_vec();
    both.extend(a_grid.iter().map(|a| -a));
    let paired = legendre(&lambda.grid, &lambda.values, Some(&both))?;
    let k = a_grid.len();
    let mut symmetry_defect = Vec::new();
    let mut max_opposite_defect: f64 = 0.0;
    for (i, &a) in a_grid.iter().enumerate() {
        let (ip, im) = (paired.values[i], paired.values[k + i]);
        if ip.is_finite() && im.is_finite() {
            symmetry_defect.push([a, ip - im + a]);
            max_opposite_defect = max_opposite_defect.max((ip - im - a).abs());
        }
    }
    let max_symmetry_defect = symmetry_defect.iter().map(|d| d[1].abs()).fold(0.0, f64::max);
    let rate = RateFunction {
        a: a_grid.to_vec(),
        values: paired.values[..k].to_vec(),
        domain: paired.domain,
        grid_tolerance: paired.grid_tolerance,
    };
    let jarzynski = jarzynski_check(pair, model, GC_JARZYNSKI_HORIZON, depth)?;
    Ok(GCReport {
        lambda,
        rate,
        symmetry_defect,
        max_symmetry_defect,
        max_opposite_defect,
        reflection,
        lambda_reflection_defect,
        sigma_mean: pair.sigma_mean,
        jarzynski,
        degenerate,
    })
}

impl GCReport {
    pub fn tables(&self) -> Vec<Table> {
        let mut l = Table::new("scgf", &["t", "lambda"]);
        for (t, v) in self.lambda.grid.iter().zip(&self.lambda.values) {
            l.push_floats(&[*t, *v]);
        }
        let mut r = Table::new("rate", &["a", "rate"]);
        for (a, v) in self.rate.a.iter().zip(&self.rate.values) {
            r.push_floats(&[*a, *v]);
        }
        let mut d = Table::new("symmetry_defect", &["a", "defect"]);
        for p in &self.symmetry_defect {
            d.push_floats(p);
        }
        vec![l, r, d]
    }
}

/// Symmetric histogram: bin `k` collects values rounding to `k·width`, for `|k| ≤ pairs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub width: f64,
    pub pairs: usize,
}

pub const MIN_BIN_COUNT: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientBin {
    pub a: f64,
    pub count_pos: u64,
    pub count_neg: u64,
    /// `log(count(A)/count(−A))`.
    pub log_ratio: f64,
    /// One-sigma binomial error of `log_ratio`.
    pub error: f64,
    /// Mean of `log ρ₀(x) − log ρ₀(Tⁿx)` over the `+A` bin, `ρ₀ = dμ₀/dμ⁺`.
    pub correction: f64,
    pub predicted: f64,
    /// `(log_ratio − predicted)/error`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub bins: BinSpec,
    pub zero_count: u64,
    pub overflow: u64,
    pub rows: Vec<TransientBin>,
    /// Weighted least-squares fit `log_ratio ≈ slope·A + intercept`.
    pub slope: Option<f64>,
    pub slope_error: Option<f64>,
    pub intercept: Option<f64>,
    pub mean_correction: f64,
    pub degenerate: bool,
}

#[derive(Clone)]
struct Tally {
    counts: Vec<u64>,
    corr: Vec<f64>,
    overflow: u64,
    total_corr: f64,
}

impl Tally {
    fn new(bins: usize) -> Self {
        Tally {
            counts: vec![0; bins],
            corr: vec![0.0; bins],
            overflow: 0,
            total_corr: 0.0,
        }
    }

    fn merge(mut self, o: Tally) -> Self {
        for k in 0..self.counts.len() {
            self.counts[k] += o.counts[k];
            self.corr[k] += o.corr[k];
        }
        self.overflow += o.overflow;
        self.total_corr += o.total_corr;
        self
    }
}

/// Monte Carlo test of the finite-time fluctuation relation for `S_nσ` under `μ₀`.
///
/// `density0` holds one nonnegative weight per cylinder of the depth used for `φ_u`.
#[allow(clippy::too_many_arguments)]
pub fn transient_ft(
    pair: &PotentialPair,
    model: &Model,
    density0: &[f64],
    n: usize,
    bins: BinSpec,
    samples: usize,
    seed: u64,
    depth: usize,
) -> Result<TransientReport> {
    if !(bins.width > 0.0) || bins.pairs == 0 {
        return Err(Error::InvalidArgument(
            "bins need positive width and at least one pair".into(),
        ));
    }
    let depth = pair.depth(depth);
    let eq = Equilibrium::new(model, &pair.phi_u, depth, DEFAULT_TOL)?;
    if density0.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument(
            "initial density must be positive on every cylinder".into(),
        ));
    }
    let chain = ChainSampler::with_initial(&eq, density0)?;
    let sigma = pair.sigma.cylinder_values(model, eq.basis(), EvalMode::Midpoint)?;
    let total0: f64 = density0.iter().sum();
    let log_rho: Vec<f64> = density0
        .iter()
        .zip(&eq.measure.masses)
        .map(|(d, m)| (d / total0 / m).ln())
        .collect();
    let nb = 2 * bins.pairs + 1;
    let tally = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let end = ((c + 1) * CHUNK).min(samples);
            let mut t = Tally::new(nb);
            for _ in c * CHUNK..end {
                let path = chain.path(n + 1, &mut rng);
                let s: f64 = path[..n].iter().map(|&i| sigma[i]).sum();
                let corr = log_rho[path[0]] - log_rho[path[n]];
                t.total_corr += corr;
                let k = (s / bins.width).round();
                if k.abs() > bins.pairs as f64 {
                    t.overflow += 1;
                    continue;
                }
                let idx = (k as i64 + bins.pairs as i64) as usize;
                t.counts[idx] += 1;
                t.corr[idx] += corr;
            }
            t
        })
        .reduce(|| Tally::new(nb), Tally::merge);
    let zero_count = tally.counts[bins.pairs];
    let mean_correction = if samples > 0 {
        tally.total_corr / samples as f64
    } else {
        0.0
    };
    let nonzero = tally.counts.iter().sum::<u64>() + tally.overflow - zero_count;
    let mut report = TransientReport {
        n,
        samples,
        seed,
        bins,
        zero_count,
        overflow: tally.overflow,
        rows: Vec::new(),
        slope: None,
        slope_error: None,
        intercept: None,
        mean_correction,
        degenerate: nonzero == 0,
    };
    if report.degenerate {
        return Ok(report);
    }
    for k in 1..=bins.pairs {
        let pos = tally.counts[bins.pairs + k];
        let neg = tally.counts[bins.pairs - k];
        let a = k as f64 * bins.width;
        if pos.min(neg) < MIN_BIN_COUNT {
            return Err(Error::InsufficientSamples { a, count: pos.min(neg) });
        }
        let log_ratio = (pos as f64 / neg as f64).ln();
        let error = (1.0 / pos as f64 + 1.0 / neg as f64).sqrt();
        let correction = tally.corr[bins.pairs + k] / pos as f64;
        let predicted = a + correction;
        report.rows.push(TransientBin {
            a,
            count_pos: pos,
            count_neg: neg,
            log_ratio,
            error,
            correction,
            predicted,
            deviation: (log_ratio - predicted) / error,
        });
    }
    if let Some((slope, se, icpt)) = weighted_fit(&report.rows) {
        report.slope = Some(slope);
        report.slope_error = Some(se);
        report.intercept = Some(icpt);
    }
    Ok(report)
}

fn weighted_fit(rows: &[TransientBin]) -> Option<(f64, f64, f64)> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in rows {
        let w = 1.0 / (r.error * r.error);
        sw += w;
        sx += w * r.a;
        sy += w * r.log_ratio;
        sxx += w * r.a * r.a;
        sxy += w * r.a * r.log_ratio;
    }
    let det = sw * sxx - sx * sx;
    if rows.len() < 2 || det <= 0.0 {
        return None;
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    Some((slope, (sw / det).sqrt(), intercept))
}

impl TransientReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "transient_bins",
            &[
                "a",
                "count_pos",
                "count_neg",
                "log_ratio",
                "error",
                "correction",
                "predicted",
                "deviation",
            ],
        );
        for r in &self.rows {
            t.push_floats(&[
                r.a,
                r.count_pos as f64,
                r.count_neg as f64,
                r.log_ratio,
                r.error,
                r.correction,
                r.predicted,
                r.deviation,
            ]);
        }
        t
    }
}
