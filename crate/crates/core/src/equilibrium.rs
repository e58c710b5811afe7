//! Sampling from Gibbs states, entropy, and the Pesin and SRB density checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, Table};
use crate::livsic::orbit_from_symbols;
use crate::maps::{geometric_potential, log_derivative, MapModel};
use crate::model::Model;
use crate::operator::{doob_transitions, DEFAULT_TOL};
use crate::potential::{EvalMode, PotentialSpec};
use crate::pressure::Equilibrium;

/// Samples per random stream. Stream `c` serves samples `c*CHUNK..(c+1)*CHUNK`,
/// so results do not depend on the thread count.
pub(crate) const CHUNK: usize = 4096;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(rng, index)` for `index in 0..count`, seed-partitioned and in parallel.
pub(crate) fn seeded_map<T, F>(count: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let end = ((c + 1) * CHUNK).min(count);
            (c * CHUNK..end).map(|i| f(&mut rng, i)).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Markov chain on depth-k cylinders with Doob-normalized transitions.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    succ: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
    initial: Vec<f64>,
}

fn cumulate(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|v| {
            acc += v / total;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn draw(cum: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

impl ChainSampler {
    /// Stationary chain started from the Gibbs masses.
    pub fn new(eq: &Equilibrium) -> Self {
        Self::with_initial(eq, &eq.measure.masses).expect("Gibbs masses are a valid start")
    }

    /// Chain started from `initial`, a nonnegative weight per cylinder.
    pub fn with_initial(eq: &Equilibrium, initial: &[f64]) -> Result<Self> {
        let w = &eq.matrix;
        if initial.len() != w.len() {
            return Err(Error::InvalidArgument(format!(
                "initial distribution has {} entries for {} cylinders",
                initial.len(),
                w.len()
            )));
        }
        if initial.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || initial.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument(
                "initial distribution must be nonnegative with positive mass".into(),
            ));
        }
        let doob = doob_transitions(w, &eq.triple);
        Ok(ChainSampler {
            succ: (0..w.len()).map(|i| w.successors(i).to_vec()).collect(),
            cumulative: doob.iter().map(|r| cumulate(r)).collect(),
            initial: cumulate(initial),
        })
    }

    pub fn draw_initial(&self, rng: &mut ChaCha8Rng) -> usize {
        draw(&self.initial, rng)
    }

    pub fn step(&self, i: usize, rng: &mut ChaCha8Rng) -> usize {
        self.succ[i][draw(&self.cumulative[i], rng)]
    }

    /// `len` consecutive states.
    pub fn path(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return out;
        }
        let mut s = self.draw_initial(rng);
        out.push(s);
        while out.len() < len {
            s = self.step(s, rng);
            out.push(s);
        }
        out
    }
}

/// One sampled orbit segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub index: usize,
    pub seed: u64,
    pub symbols: Vec<u8>,
    /// Trajectory `x, Tx, …` for map models.
    pub points: Option<Vec<f64>>,
    /// `S_n g` for each registered observable.
    pub birkhoff: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SampleOptions {
    pub observables: Vec<PotentialSpec>,
    pub points: bool,
}

/// `count` orbit segments of length `n` distributed by the equilibrium state.
pub fn sample(
    model: &Model,
    eq: &Equilibrium,
    n: usize,
    count: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<Vec<OrbitSample>> {
    let basis = eq.basis();
    let obs = opts
        .observables
        .iter()
        .map(|g| g.cylinder_values(model, basis, EvalMode::Midpoint))
        .collect::<Result<Vec<_>>>()?;
    let chain = ChainSampler::new(eq);
    let want_points = opts.points && model.as_map().is_some();
    Ok(seeded_map(count, seed, |rng, index| {
        let states = chain.path(n, rng);
        let mut symbols: Vec<u8> = states.iter().map(|&s| basis.first_symbol(s)).collect();
        let birkhoff = obs.iter().map(|v| states.iter().map(|&s| v[s]).sum()).collect();
        let points = want_points.then(|| {
            let mut full = symbols.clone();
            if let Some(&last) = states.last() {
                full.extend_from_slice(&basis.word(last)[1..]);
            }
            let mut pts = orbit_from_symbols(model, &full);
            pts.truncate(n);
            pts
        });
        symbols.truncate(n);
        OrbitSample {
            index,
            seed,
            symbols,
            points,
            birkhoff,
        }
    }))
}

/// Long-form CSV: one row per step with running Birkhoff sums recomputed from the observables.
pub fn samples_table(model: &Model, samples: &[OrbitSample], observables: &[PotentialSpec]) -> Result<Table> {
    let mut header = vec!["sample".to_string(), "step".into(), "symbol".into(), "point".into()];
    header.extend((0..observables.len()).map(|j| format!("birkhoff_{j}")));
    let mut t = Table {
        name: "orbit_samples".into(),
        header,
        rows: Vec::new(),
    };
    let depth = observables.iter().map(|g| g.required_depth()).max().unwrap_or(1);
    for s in samples {
        let mut running = vec![0.0; observables.len()];
        for (k, &sym) in s.symbols.iter().enumerate() {
            let x = s.points.as_ref().map(|p| p[k]).unwrap_or(f64::NAN);
            let mut row = vec![s.index.to_string(), k.to_string(), sym.to_string(), fmt_f64(x)];
            for (j, g) in observables.iter().enumerate() {
                let end = (k + depth).min(s.symbols.len());
                if end - k >= g.required_depth() {
                    running[j] += g.eval_word(model, &s.symbols[k..end], x)?;
                    row.push(fmt_f64(running[j]));
                } else {
                    row.push(String::new());
                }
            }
            t.push(row);
        }
    }
    Ok(t)
}

/// Measure-theoretic entropy `h = P(φ) − ∫φ dμ_φ`.
pub fn entropy(model: &Model, phi: &PotentialSpec, depth: usize) -> Result<f64> {
    let eq = Equilibrium::new(model, phi, depth, DEFAULT_TOL)?;
    Ok(eq.pressure() - eq.integrate(model, phi)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PesinReport {
    pub entropy: f64,
    pub lyapunov: f64,
    /// `P(−log|T'|)`.
    pub pressure: f64,
    /// `|h − χ − P|`.
    pub gap: f64,
    /// `|h − χ|`, zero only when no mass escapes.
    pub attractor_gap: f64,
    pub depth: usize,
}

pub fn pesin_check(map: &MapModel, depth: usize) -> Result<PesinReport> {
    let model = Model::Map(map.clone());
    let phi = geometric_potential(map, 1.0);
    let p = Equilibrium::new(&model, &phi, depth, DEFAULT_TOL)?.pressure();
    let normalized = phi.plus_constant(-p);
    let h = entropy(&model, &normalized, depth)?;
    let chi = Equilibrium::new(&model, &normalized, depth, DEFAULT_TOL)?.integrate(&model, &log_derivative(map))?;
    Ok(PesinReport {
        entropy: h,
        lyapunov: chi,
        pressure: p,
        gap: (h - chi - p).abs(),
        attractor_gap: (h - chi).abs(),
        depth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrbRatio {
    /// `∏_{k<K} |T'(T^k x)| / |T'(T^k y)|`.
    pub value: f64,
    pub log_value: f64,
    /// Bound on the neglected part of the log-product.
    pub tail_bound: f64,
    /// `|T^K x − T^K y|`.
    pub separation: f64,
    pub depth: usize,
}

/// Truncated conditional density ratio for two points of a common depth-`k` cylinder.
pub fn srb_density_ratio(map: &MapModel, x: f64, y: f64, k: usize) -> Result<SrbRatio> {
    let cx = map.coding_of(x, k).ok_or(Error::CylinderMismatch { depth: k })?;
    let cy = map.coding_of(y, k).ok_or(Error::CylinderMismatch { depth: k })?;
    if cx != cy {
        return Err(Error::CylinderMismatch { depth: k });
    }
    let (mut a, mut b) = (x, y);
    let mut log_value = 0.0;
    for &s in &cx {
        let s = s as usize;
        log_value += map.derivative(s, a).ln() - map.derivative(s, b).ln();
        a = map.apply(s, a);
        b = map.apply(s, b);
    }
    let separation = (a - b).abs();
    let alpha = 1.0;
    let tail_bound = map.log_derivative_lipschitz() * separation.powf(alpha) / (1.0 - map.expansion_min().powf(-alpha));
    Ok(SrbRatio {
        value: log_value.exp(),
        log_value,
        tail_bound,
        separation,
        depth: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{build_cookie_cutter, build_doubling, build_perturbed_cookie_cutter};
    use crate::symbolic::SubshiftSpec;

    fn full2() -> Model {
        Model::Shift(SubshiftSpec::full_shift(2))
    }

    #[test]
    fn fair_coin_frequencies() {
        let m = full2();
        let eq = Equilibrium::new(&m, &PotentialSpec::constant(0.0), 1, DEFAULT_TOL).unwrap();
        let s = sample(&m, &eq, 100_000, 1, 7, &SampleOptions::default()).unwrap();
        let ones = s[0].symbols.iter().filter(|&&b| b == 1).count() as f64;
        let n = 1e5;
        assert!((ones / n - 0.5).abs() <= 3.0 * (0.25 / n).sqrt());
    }

    #[test]
    fn bernoulli_frequencies_and_birkhoff_average() {
        let m = full2();
        let phi = PotentialSpec::branch_constant(vec![(2.0f64 / 3.0).ln(), (1.0f64 / 3.0).ln()]);
        let eq = Equilibrium::new(&m, &phi, 2, DEFAULT_TOL).unwrap();
        let g = PotentialSpec::branch_constant(vec![1.0, 0.0]);
        let opts = SampleOptions {
            observables: vec![g.clone()],
            points: false,
        };
        let n = 100_000usize;
        let s = sample(&m, &eq, n, 1, 11, &opts).unwrap();
        let zeros = s[0].symbols.iter().filter(|&&b| b == 0).count() as f64;
        let p = 2.0 / 3.0;
        assert!((zeros / n as f64 - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt());
        assert_eq!(s[0].birkhoff[0], zeros);
        let var = crate::pressure::pressure_variance(&m, &phi, &g, 2, 12).unwrap().sigma2;
        let avg = s[0].birkhoff[0] / n as f64;
        assert!((avg - p).abs() <= 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let m = Model::Shift(SubshiftSpec::golden_mean());
        let eq = Equilibrium::new(&m, &PotentialSpec::constant(0.0), 3, DEFAULT_TOL).unwrap();
        let a = sample(&m, &eq, 50, 9000, 3, &SampleOptions::default()).unwrap();
        let b = sample(&m, &eq, 50, 9000, 3, &SampleOptions::default()).unwrap();
        assert_eq!(a, b);
        let shift = SubshiftSpec::golden_mean();
        assert!(a.iter().all(|s| shift.is_admissible(&s.symbols)));
        let c = sample(&m, &eq, 50, 9000, 4, &SampleOptions::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn depth_two_frequencies_match_gibbs() {
        let m = Model::Shift(SubshiftSpec::golden_mean());
        let phi = PotentialSpec::cylinder_table(2, vec![0.3, -0.2, 0.5, 0.0]);
        let eq = Equilibrium::new(&m, &phi, 2, DEFAULT_TOL).unwrap();
        let chain = ChainSampler::new(&eq);
        let mut rng = stream_rng(5, 0);
        let n = 1_000_000;
        let mut counts = vec![0usize; eq.matrix.len()];
        for s in chain.path(n, &mut rng) {
            counts[s] += 1;
        }
        for (c, p) in counts.iter().zip(&eq.measure.masses) {
            let f = *c as f64 / n as f64;
            // Correlated samples: allow a generous multiple of the i.i.d. bar.
            assert!(
                (f - p).abs() <= 4.0 * 3.0 * (p * (1.0 - p) / n as f64).sqrt(),
                "{f} vs {p}"
            );
        }
    }

    #[test]
    fn points_follow_symbols() {
        let map = build_perturbed_cookie_cutter(0.5).unwrap();
        let m = Model::Map(map.clone());
        let phi = geometric_potential(&map, 0.6);
        let eq = Equilibrium::new(&m, &phi, 6, DEFAULT_TOL).unwrap();
        let opts = SampleOptions {
            observables: vec![],
            points: true,
        };
        let s = sample(&m, &eq, 30, 3, 1, &opts).unwrap();
        for o in &s {
            let pts = o.points.as_ref().unwrap();
            for (x, &sym) in pts.iter().zip(&o.symbols) {
                assert_eq!(map.branch_of(*x), Some(sym as usize));
            }
            for w in pts.windows(2).take(10) {
                assert!((map.apply_point(w[0]).unwrap() - w[1]).abs() < 1e-9);
            }
        }
        let table = samples_table(&m, &s, &[PotentialSpec::constant(1.0)]).unwrap();
        assert_eq!(table.rows.len(), 90);
        assert_eq!(table.rows[29][4], "30.0");
    }

    #[test]
    fn entropy_values() {
        let m = full2();
        assert!((entropy(&m, &PotentialSpec::constant(0.0), 4).unwrap() - 2f64.ln()).abs() < 1e-12);
        let p: f64 = 0.3;
        let phi = PotentialSpec::branch_constant(vec![p.ln(), (1.0 - p).ln()]);
        let h = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
        assert!((entropy(&m, &phi, 4).unwrap() - h).abs() < 1e-12);
        assert!((entropy(&m, &phi.plus_constant(2.5), 4).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn variational_identity_closes() {
        let m = Model::Shift(SubshiftSpec::golden_mean());
        let phi = PotentialSpec::cylinder_table(2, vec![0.1, 0.7, -0.4, 0.0]);
        let h = entropy(&m, &phi, 4).unwrap();
        let eq = Equilibrium::new(&m, &phi, 4, DEFAULT_TOL).unwrap();
        assert!((h + eq.integrate(&m, &phi).unwrap() - eq.pressure()).abs() < 1e-10);
    }

    #[test]
    fn pesin_affine_and_doubling() {
        let r = pesin_check(&build_cookie_cutter(), 6).unwrap();
        assert!(r.gap < 1e-9);
        assert!((r.entropy - 2f64.ln()).abs() < 1e-12);
        assert!((r.lyapunov - 3f64.ln()).abs() < 1e-12);
        assert!((r.attractor_gap - 1.5f64.ln()).abs() < 1e-12);
        let d = pesin_check(&build_doubling(), 6).unwrap();
        assert!((d.entropy - 2f64.ln()).abs() < 1e-9);
        assert!((d.lyapunov - 2f64.ln()).abs() < 1e-9);
        assert!(d.attractor_gap < 1e-9);
    }

    #[test]
    fn pesin_perturbed() {
        let r = pesin_check(&build_perturbed_cookie_cutter(0.5).unwrap(), 10).unwrap();
        assert!(r.gap < 1e-8, "{r:?}");
        assert!(r.pressure < 0.0);
    }

    #[test]
    fn srb_ratio_cases() {
        let a = build_cookie_cutter();
        let r = srb_density_ratio(&a, 0.01, 0.02, 3).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.tail_bound, 0.0);
        assert!(matches!(
            srb_density_ratio(&a, 0.01, 0.9, 2),
            Err(Error::CylinderMismatch { depth: 2 })
        ));
        let p = build_perturbed_cookie_cutter(0.5).unwrap();
        let x = p.point_from_coding(&[0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1, 0], 0.2);
        assert_eq!(srb_density_ratio(&p, x, x, 8).unwrap().value, 1.0);
    }

    #[test]
    fn srb_ratio_against_eigenfunction() {
        let p = build_perturbed_cookie_cutter(0.5).unwrap();
        let m = Model::Map(p.clone());
        let word = [0u8, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1];
        let x = p.point_from_coding(&word, 0.05);
        let y = p.point_from_coding(&word, 0.95);
        let r = srb_density_ratio(&p, x, y, 12).unwrap();
        let eq = Equilibrium::new(&m, &geometric_potential(&p, 1.0), 12, DEFAULT_TOL).unwrap();
        let basis = eq.basis();
        let ix = basis.index_of_word(&p.coding_of(x, 12).unwrap()).unwrap();
        let iy = basis.index_of_word(&p.coding_of(y, 12).unwrap()).unwrap();
        let eig = (eq.triple.h[iy] / eq.triple.h[ix]).ln();
        assert!((r.log_value - eig).abs() <= r.tail_bound + 1e-12, "{r:?}");
        let half = srb_density_ratio(&p, x, y, 6).unwrap();
        assert!((r.log_value - half.log_value).abs() <= r.tail_bound);
    }
}
