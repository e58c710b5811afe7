//! Periodic-orbit obstructions and constructive solutions of the cohomological equation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::potential::PotentialSpec;
use crate::symbolic::{encode, periodic_orbits, SubshiftSpec};

/// Largest period for exhaustive orbit scans.
pub const MAX_OBSTRUCTION_PERIOD: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSum {
    pub word: Vec<u8>,
    pub period: usize,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodStat {
    pub period: usize,
    pub orbits: usize,
    /// `max |S_nφ(p)|/n` over primitive orbits of this period.
    pub max_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CoboundaryCandidate,
    Obstructed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub per_period: Vec<PeriodStat>,
    pub max_mean: f64,
    pub verdict: Verdict,
    pub witness: Option<OrbitSum>,
    /// Every primitive orbit sum, ordered by period then canonical word.
    pub sums: Vec<OrbitSum>,
    pub tol: f64,
}

fn check_period(n_max: usize) -> Result<()> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if n_max > MAX_OBSTRUCTION_PERIOD {
        return Err(Error::HorizonCap {
            horizon: n_max,
            cap: MAX_OBSTRUCTION_PERIOD,
        });
    }
    Ok(())
}

fn orbit_sums(model: &Model, phi: &PotentialSpec, n_max: usize) -> Result<Vec<OrbitSum>> {
    phi.validate(model)?;
    let mut out = Vec::new();
    for n in 1..=n_max {
        let orbits = periodic_orbits(model.coding(), n, true)?;
        let sums = orbits
            .par_iter()
            .map(|o| {
                Ok(OrbitSum {
                    word: o.symbols().to_vec(),
                    period: n,
                    sum: phi.periodic_sum(model, o.symbols())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(sums);
    }
    Ok(out)
}

/// Scans `S_nφ` over all primitive periodic orbits of period `≤ n_max`.
pub fn periodic_obstruction(model: &Model, phi: &PotentialSpec, n_max: usize, tol: f64) -> Result<ObstructionReport> {
    check_period(n_max)?;
    let sums = orbit_sums(model, phi, n_max)?;
    let mut per_period: Vec<PeriodStat> = (1..=n_max)
        .map(|period| PeriodStat {
            period,
            orbits: 0,
            max_mean: 0.0,
        })
        .collect();
    let mut witness: Option<&OrbitSum> = None;
    for s in &sums {
        let stat = &mut per_period[s.period - 1];
        stat.orbits += 1;
        let m = s.sum.abs() / s.period as f64;
        stat.max_mean = stat.max_mean.max(m);
        if witness.is_none_or(|w| m > w.sum.abs() / w.period as f64) {
            witness = Some(s);
        }
    }
    let max_mean = per_period.iter().map(|p| p.max_mean).fold(0.0, f64::max);
    let verdict = if max_mean <= tol {
        Verdict::CoboundaryCandidate
    } else {
        Verdict::Obstructed
    };
    Ok(ObstructionReport {
        per_period,
        max_mean,
        witness: (verdict == Verdict::Obstructed).then(|| witness.cloned()).flatten(),
        verdict,
        sums,
        tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderBound {
    pub seminorm_bound: f64,
    pub full_bound: f64,
    /// Set when `α < 1e-3`, where the bounds blow up.
    pub diverged: bool,
}

/// Hölder bounds for the transfer function `u`, with `C₀ = 2(1 + diam^α)` and `diam = 1`.
pub fn holder_bound(lambda_contraction: f64, alpha: f64, phi_norm: f64) -> Result<HolderBound> {
    if !(lambda_contraction > 0.0 && lambda_contraction < 1.0) {
        return Err(Error::OutOfRange {
            value: lambda_contraction,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::OutOfRange {
            value: alpha,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !(phi_norm >= 0.0) {
        return Err(Error::InvalidArgument("norm must be nonnegative".into()));
    }
    let c0 = 4.0;
    let q = 1.0 - lambda_contraction.powf(alpha);
    Ok(HolderBound {
        seminorm_bound: 2.0 * phi_norm / q,
        full_bound: c0 * phi_norm / (q * q),
        diverged: alpha < 1e-3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoboundarySolution {
    pub depth: usize,
    pub orbit_length: usize,
    /// `x₀, T x₀, …` (symbolic models store 0.5 throughout).
    pub orbit_points: Vec<f64>,
    /// `u(T^j x₀) = S_jφ(x₀)`.
    pub u_values: Vec<f64>,
    /// Value of `u` on each depth-k cylinder, indexed by the base-N code.
    pub extension: Vec<f64>,
    /// Orbit point of the last visit to each cylinder.
    pub representatives: Vec<f64>,
    pub residual: f64,
    pub norm_bound: f64,
    pub seminorm_estimate: f64,
    pub seed: u64,
    pub attempts: usize,
}

pub struct CoboundaryOptions {
    pub orbit_length: usize,
    pub depth: usize,
    pub tol: f64,
    pub seed: u64,
    /// Period bound for the obstruction gate.
    pub gate_period: usize,
    pub test_points: usize,
    pub max_attempts: usize,
}

impl Default for CoboundaryOptions {
    fn default() -> Self {
        CoboundaryOptions {
            orbit_length: 100_000,
            depth: 10,
            tol: 1e-8,
            seed: 0,
            gate_period: 8,
            test_points: 1000,
            max_attempts: 5,
        }
    }
}

/// Extra symbols appended after the orbit so every stored point is pinned to the repeller.
const TAIL: usize = 64;

fn random_word(shift: &SubshiftSpec, len: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = shift.alphabet_size() as u8;
    let mut w = Vec::with_capacity(len);
    let mut last = rng.random_range(0..n);
    w.push(last);
    let mut succ: Vec<u8> = Vec::with_capacity(n as usize);
    while w.len() < len {
        succ.clear();
        succ.extend((0..n).filter(|&b| shift.allowed(last, b)));
        last = succ[rng.random_range(0..succ.len())];
        w.push(last);
    }
    w
}

/// Points `x_j` whose forward coding is `symbols[j..]`, obtained by backward pull-back.
pub(crate) fn orbit_from_symbols(model: &Model, symbols: &[u8]) -> Vec<f64> {
    match model.as_map() {
        None => vec![0.5; symbols.len()],
        Some(map) => {
            let mut pts = vec![0.0; symbols.len()];
            let (a, b) = map.domain(*symbols.last().expect("non-empty") as usize);
            let mut x = 0.5 * (a + b);
            for j in (0..symbols.len()).rev() {
                x = map.inverse_unchecked(symbols[j] as usize, x);
                pts[j] = x;
            }
            pts
        }
    }
}

/// Builds `u` with `φ = u∘T − u` along a seeded pseudo-dense orbit and extends it to depth-k cylinders.
pub fn solve_coboundary(model: &Model, phi: &PotentialSpec, opts: &CoboundaryOptions) -> Result<CoboundarySolution> {
    let gate = periodic_obstruction(model, phi, opts.gate_period.clamp(1, MAX_OBSTRUCTION_PERIOD), opts.tol)?;
    if gate.verdict == Verdict::Obstructed {
        return Err(Error::ObstructedInput {
            max_mean: gate.max_mean,
        });
    }
    let shift = model.coding();
    let k = opts.depth.max(1);
    let r = phi.required_depth();
    let n = shift.alphabet_size();
    let slots = n
        .checked_pow(k as u32)
        .filter(|s| *s <= 1 << 24)
        .ok_or(Error::DepthCap {
            depth: k,
            cap: crate::symbolic::MAX_WORD_DEPTH,
        })?;
    let admissible = crate::symbolic::CylinderBasis::new(shift, k)?;
    let len = opts.orbit_length;

    let mut attempt = 0;
    let (symbols, last_visit) = loop {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(attempt as u64));
        let symbols = random_word(shift, len + k.max(r) + TAIL, &mut rng);
        let mut last_visit = vec![usize::MAX; slots];
        for j in 0..len {
            last_visit[encode(&symbols[j..j + k], n) as usize] = j;
        }
        let missing = (0..admissible.len())
            .filter(|&i| last_visit[admissible.code(i) as usize] == usize::MAX)
            .count();
        attempt += 1;
        if missing == 0 {
            break (symbols, last_visit);
        }
        if attempt >= opts.max_attempts {
            return Err(Error::CoverageFailure { depth: k, missing });
        }
    };

    let points = orbit_from_symbols(model, &symbols);
    let mut u_values = Vec::with_capacity(len + 1);
    u_values.push(0.0);
    for j in 0..len {
        let v = phi.eval_word(model, &symbols[j..], points[j])?;
        u_values.push(u_values[j] + v);
    }
    let mut extension = vec![0.0; slots];
    let mut representatives = vec![f64::NAN; slots];
    for (c, &j) in last_visit.iter().enumerate() {
        if j != usize::MAX {
            extension[c] = u_values[j];
            representatives[c] = points[j];
        }
    }

    // fresh test points from an independent stream
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut residual = 0.0f64;
    for _ in 0..opts.test_points {
        let w = random_word(shift, (k + 1).max(r) + TAIL, &mut rng);
        let pts = orbit_from_symbols(model, &w);
        let v = phi.eval_word(model, &w, pts[0])?;
        let u0 = extension[encode(&w[..k], n) as usize];
        let u1 = extension[encode(&w[1..k + 1], n) as usize];
        residual = residual.max((v - (u1 - u0)).abs());
    }

    let holder = phi.holder(model);
    let contraction = match model.as_map() {
        Some(m) => 1.0 / m.expansion_min(),
        None => crate::potential::SYMBOLIC_THETA,
    };
    let norm_bound = holder_bound(contraction, holder.alpha, holder.norm())?.seminorm_bound;
    let seminorm_estimate = estimate_seminorm(model, &admissible, &extension, &representatives, holder.alpha);

    Ok(CoboundarySolution {
        depth: k,
        orbit_length: len,
        orbit_points: points[..len].to_vec(),
        u_values: u_values[..len].to_vec(),
        extension,
        representatives,
        residual,
        norm_bound,
        seminorm_estimate,
        seed: opts.seed,
        attempts: attempt,
    })
}

/// `max |u(c) − u(c')| / d(c, c')^α` over pairs of cylinder representatives.
fn estimate_seminorm(
    model: &Model,
    basis: &crate::symbolic::CylinderBasis,
    extension: &[f64],
    reps: &[f64],
    alpha: f64,
) -> f64 {
    let codes: Vec<usize> = (0..basis.len()).map(|i| basis.code(i) as usize).collect();
    let words: Vec<Vec<u8>> = (0..basis.len()).map(|i| basis.word(i)).collect();
    (0..codes.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in i + 1..codes.len() {
                let d = match model.as_map() {
                    Some(_) => (reps[codes[i]] - reps[codes[j]]).abs(),
                    None => {
                        let agree = words[i].iter().zip(&words[j]).take_while(|(a, b)| a == b).count();
                        crate::potential::SYMBOLIC_THETA.powi(agree as i32)
                    }
                };
                if d > 0.0 {
                    best = best.max((extension[codes[i]] - extension[codes[j]]).abs() / d.powf(alpha));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohomologyReport {
    pub equivalent: bool,
    /// Estimate of `c` in `φ − ψ = c + u∘T − u`.
    pub c: f64,
    /// Spread of the fixed-point estimates of `c`.
    pub c_spread: f64,
    pub max_deviation: f64,
    pub witness: Option<OrbitSum>,
}

/// Tests whether `φ − ψ` is cohomologous to a constant.
pub fn cohomologous_test(
    model: &Model,
    phi: &PotentialSpec,
    psi: &PotentialSpec,
    n_max: usize,
    tol: f64,
) -> Result<CohomologyReport> {
    check_period(n_max)?;
    let delta = phi.combine(1.0, psi, -1.0, model.coding().alphabet_size());
    let sums = orbit_sums(model, &delta, n_max)?;
    let fixed: Vec<f64> = sums.iter().filter(|s| s.period == 1).map(|s| s.sum).collect();
    if fixed.is_empty() {
        return Err(Error::InvalidArgument("model has no fixed points".into()));
    }
    let c = fixed.iter().sum::<f64>() / fixed.len() as f64;
    let c_spread = fixed.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
    let mut max_deviation = 0.0f64;
    let mut witness = None;
    for s in &sums {
        let dev = (s.sum - s.period as f64 * c).abs() / s.period as f64;
        if dev > max_deviation {
            max_deviation = dev;
            witness = Some(s.clone());
        }
    }
    let equivalent = max_deviation <= tol && c_spread <= tol;
    Ok(CohomologyReport {
        equivalent,
        c,
        c_spread,
        max_deviation,
        witness: if equivalent { None } else { witness },
    })
}
