//! Hausdorff dimension of cookie-cutter repellers: Bowen equation, bounds,
//! multifractal and Lyapunov spectra, local dimension.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{log_derivative, MapModel};
use crate::model::Model;
use crate::operator::{perron_eigenvalue, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::potential::{EvalMode, PotentialSpec};
use crate::pressure::{Equilibrium, TiltedFamily};
use crate::symbolic::CylinderBasis;

pub const MAX_NEWTON_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub t: f64,
    pub f: f64,
    pub df: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenResult {
    pub t_star: f64,
    /// Roots of the Bowen equation in the infimum and supremum modes.
    pub bracket: [f64; 2],
    pub newton_trace: Vec<NewtonStep>,
    pub bounds: [f64; 2],
    pub depth: usize,
    /// `|F''(t*)| / (2|F'(t*)|)`.
    pub quadratic_constant: f64,
    /// Whether the last iterates satisfy `|e_{n+1}| ≤ 10 C |e_n|²`.
    pub quadratic_tail: bool,
}

impl BowenResult {
    /// Number of Newton updates performed.
    pub fn newton_steps(&self) -> usize {
        self.newton_trace.len().saturating_sub(1)
    }
}

/// `F(t) = P(-t log|T'|)` on a fixed basis, with `F'(t) = -∫log|T'| dμ_t`.
struct BowenFunction {
    family: TiltedFamily,
    tol: f64,
}

impl BowenFunction {
    fn new(model: &Model, map: &MapModel, depth: usize, mode: EvalMode, tol: f64) -> Result<Self> {
        let basis = CylinderBasis::new(map.coding(), depth.max(1))?;
        let log_d = log_derivative(map);
        // the infimum of -t·log|T'| uses the supremum of log|T'| when t > 0
        let flip = match mode {
            EvalMode::Infimum => EvalMode::Supremum,
            EvalMode::Supremum => EvalMode::Infimum,
            EvalMode::Midpoint => EvalMode::Midpoint,
        };
        let dir: Vec<f64> = log_d
            .cylinder_values(model, &basis, flip)?
            .into_iter()
            .map(|v| -v)
            .collect();
        let base = vec![0.0; basis.len()];
        Ok(BowenFunction {
            family: TiltedFamily::from_parts(basis, base, dir),
            tol,
        })
    }

    fn eval(&self, t: f64) -> Result<NewtonStep> {
        let eq = self.family.equilibrium(t, self.tol)?;
        Ok(NewtonStep {
            t,
            f: eq.pressure(),
            df: eq.measure.integrate(self.family.direction()),
        })
    }

    fn newton(&self, t0: f64, tol: f64, t_max: f64) -> Result<Vec<NewtonStep>> {
        let mut trace = vec![self.eval(t0)?];
        loop {
            let s = *trace.last().expect("trace is non-empty");
            if s.f.abs() <= tol * s.df.abs() {
                return Ok(trace);
            }
            if trace.len() > MAX_NEWTON_ITER {
                return Err(Error::NoConvergence {
                    max_iter: MAX_NEWTON_ITER,
                    residual: s.f.abs(),
                });
            }
            let next = (s.t - s.f / s.df).clamp(0.0, t_max);
            trace.push(self.eval(next)?);
        }
    }
}

/// Root of the Bowen equation `P(-t log|T'|) = 0` by Newton's method.
pub fn bowen_dimension(map: &MapModel, tol: f64, depth: usize) -> Result<BowenResult> {
    let h_top = map.coding().topological_entropy();
    let t0 = h_top / (0.5 * (map.expansion_min().ln() + map.expansion_max().ln()));
    bowen_dimension_from(map, t0, tol, depth)
}

/// As [`bowen_dimension`], starting Newton's method at `t0`.
pub fn bowen_dimension_from(map: &MapModel, t0: f64, tol: f64, depth: usize) -> Result<BowenResult> {
    if !(map.expansion_min() > 1.0) {
        return Err(Error::ExpansionViolation {
            eps: map.expansion_min(),
        });
    }
    let model = Model::Map(map.clone());
    let h_top = map.coding().topological_entropy();
    let t_max = 2.0 * h_top / map.expansion_min().ln();
    let mid = BowenFunction::new(&model, map, depth, EvalMode::Midpoint, DEFAULT_TOL)?;
    let trace = mid.newton(t0, tol, t_max)?;
    let last = *trace.last().expect("trace is non-empty");
    let t_star = last.t;

    let bracket = if map.is_affine() {
        [t_star, t_star]
    } else {
        let lo = BowenFunction::new(&model, map, depth, EvalMode::Infimum, DEFAULT_TOL)?;
        let hi = BowenFunction::new(&model, map, depth, EvalMode::Supremum, DEFAULT_TOL)?;
        let t_lo = lo.newton(t_star, tol, t_max)?.last().expect("non-empty").t;
        let t_hi = hi.newton(t_star, tol, t_max)?.last().expect("non-empty").t;
        [t_lo.min(t_star), t_hi.max(t_star)]
    };

    let h = 1e-3;
    let f2 = (mid.eval(t_star + h)?.df - mid.eval(t_star - h)?.df) / (2.0 * h);
    let quadratic_constant = f2.abs() / (2.0 * last.df.abs());
    let quadratic_tail = check_quadratic_tail(&trace, t_star, quadratic_constant);

    Ok(BowenResult {
        t_star,
        bracket,
        newton_trace: trace,
        bounds: dimension_bounds(map),
        depth,
        quadratic_constant,
        quadratic_tail,
    })
}

/// Checks `|e_{n+1}| ≤ 10·C·|e_n|²` on the final three iterates, ignoring errors at roundoff level.
fn check_quadratic_tail(trace: &[NewtonStep], t_star: f64, c: f64) -> bool {
    let errs: Vec<f64> = trace.iter().map(|s| (s.t - t_star).abs()).collect();
    let start = errs.len().saturating_sub(3);
    errs[start..]
        .windows(2)
        .all(|w| w[1] <= 1e-13 || w[1] <= 10.0 * c * w[0] * w[0])
}

/// `[h_top/log λ_max, h_top/log λ_min]`.
pub fn dimension_bounds(map: &MapModel) -> [f64; 2] {
    let h = map.coding().topological_entropy();
    [h / map.expansion_max().ln(), h / map.expansion_min().ln()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub d: Vec<f64>,
    pub entropy: Vec<f64>,
    pub lyapunov: Vec<f64>,
    pub domain: [f64; 2],
    pub t_star: f64,
    pub depth: usize,
    /// Largest amount by which an interior sample falls below the chord of its neighbours.
    pub concavity_defect: f64,
    pub monotone: bool,
}

pub const CONCAVITY_TOL: f64 = 1e-9;

impl SpectrumCurve {
    fn assemble(t: Vec<f64>, a: Vec<f64>, d: Vec<f64>, h: Vec<f64>, chi: Vec<f64>, t_star: f64, depth: usize) -> Self {
        let domain = [
            a.iter().cloned().fold(f64::INFINITY, f64::min),
            a.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ];
        let inc = a.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        let dec = a.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let concavity_defect = concavity_defect(&a, &d);
        SpectrumCurve {
            t,
            a,
            d,
            entropy: h,
            lyapunov: chi,
            domain,
            t_star,
            depth,
            concavity_defect,
            monotone: inc || dec,
        }
    }

    pub fn is_concave(&self) -> bool {
        self.concavity_defect <= CONCAVITY_TOL
    }

    pub fn max_dimension(&self) -> f64 {
        self.d.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `max (chord − D_mid)` over consecutive triples sorted by `a`, skipping coincident abscissae.
fn concavity_defect(a: &[f64], d: &[f64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = a.iter().cloned().zip(d.iter().cloned()).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let scale = (pts.last().map_or(0.0, |p| p.0) - pts.first().map_or(0.0, |p| p.0))
        .abs()
        .max(1e-300);
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        match kept.last() {
            Some(q) if p.0 - q.0 <= 1e-9 * scale => {}
            _ => kept.push(p),
        }
    }
    kept.windows(3)
        .map(|w| {
            let s = (w[1].0 - w[0].0) / (w[2].0 - w[0].0);
            let chord = w[0].1 + s * (w[2].1 - w[0].1);
            chord - w[1].1
        })
        .fold(0.0, f64::max)
}

/// Parametric multifractal spectrum of Birkhoff averages of `g`.
///
/// For each `t`, `μ_t` is the equilibrium state of `-t* log|T'| + t g`; the sample
/// is `a = ∫g dμ_t` and `D = h(μ_t)/χ(μ_t)`.
pub fn multifractal_spectrum(map: &MapModel, g: &PotentialSpec, t_grid: &[f64], depth: usize) -> Result<SpectrumCurve> {
    let model = Model::Map(map.clone());
    g.validate(&model)?;
    let t_star = bowen_dimension(map, 1e-12, depth)?.t_star;
    let depth = depth.max(g.required_depth());
    let basis = CylinderBasis::new(map.coding(), depth)?;
    let log_d = log_derivative(map).cylinder_values(&model, &basis, EvalMode::Midpoint)?;
    let gv = g.cylinder_values(&model, &basis, EvalMode::Midpoint)?;
    let base: Vec<f64> = log_d.iter().map(|l| -t_star * l).collect();
    let family = TiltedFamily::from_parts(basis, base, gv);
    let samples = t_grid
        .par_iter()
        .map(|&t| {
            let eq = family.equilibrium(t, DEFAULT_TOL)?;
            let a = eq.measure.integrate(family.direction());
            let phi_int = eq.measure.integrate(eq.matrix.potential());
            let h = eq.pressure() - phi_int;
            let chi = eq.measure.integrate(&log_d);
            Ok((a, h / chi, h, chi))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut a, mut d, mut h, mut chi) = (vec![], vec![], vec![], vec![]);
    for (x, y, z, w) in samples {
        a.push(x);
        d.push(y);
        h.push(z);
        chi.push(w);
    }
    Ok(SpectrumCurve::assemble(t_grid.to_vec(), a, d, h, chi, t_star, depth))
}

/// Default multifractal grid: 321 points on `[-8, 8]`.
pub fn default_t_grid() -> Vec<f64> {
    crate::pressure::uniform_grid(-8.0, 8.0, 321)
}

/// Dimension of the level sets `{χ(x) = χ}` from `(1/χ) inf_q [P(-q log|T'|) + qχ]`.
pub fn lyapunov_level_sets(map: &MapModel, chi_grid: &[f64], depth: usize) -> Result<SpectrumCurve> {
    let (lo, hi) = (map.expansion_min().ln(), map.expansion_max().ln());
    for &chi in chi_grid {
        let degenerate = lo == hi && (chi - lo).abs() <= 1e-12;
        if !degenerate && !(chi > lo && chi < hi) {
            return Err(Error::OutOfRange { value: chi, lo, hi });
        }
    }
    let model = Model::Map(map.clone());
    let basis = CylinderBasis::new(map.coding(), depth.max(1))?;
    let log_d = log_derivative(map).cylinder_values(&model, &basis, EvalMode::Midpoint)?;
    let dir: Vec<f64> = log_d.iter().map(|v| -v).collect();
    let family = TiltedFamily::from_parts(basis, vec![0.0; log_d.len()], dir);
    let p = |q: f64| -> Result<f64> { family.pressure(q, DEFAULT_TOL) };
    let t_star = bowen_dimension(map, 1e-12, depth)?.t_star;

    let q_grid = crate::pressure::uniform_grid(-60.0, 60.0, 241);
    let p_grid = q_grid.par_iter().map(|&q| p(q)).collect::<Result<Vec<_>>>()?;
    let samples = chi_grid
        .par_iter()
        .map(|&chi| {
            let f = |q: f64, pq: f64| pq + q * chi;
            let (mut best, mut best_v) = (0, f64::INFINITY);
            for (j, (&q, &pq)) in q_grid.iter().zip(&p_grid).enumerate() {
                let v = f(q, pq);
                if v < best_v {
                    best = j;
                    best_v = v;
                }
            }
            if lo != hi && (best == 0 || best == q_grid.len() - 1) {
                return Err(Error::OutOfRange { value: chi, lo, hi });
            }
            let (mut a, mut b) = (q_grid[best.saturating_sub(1)], q_grid[(best + 1).min(q_grid.len() - 1)]);
            let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
            let mut c = b - inv_phi * (b - a);
            let mut d = a + inv_phi * (b - a);
            let (mut fc, mut fd) = (f(c, p(c)?), f(d, p(d)?));
            while b - a > 1e-9 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = f(c, p(c)?);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = f(d, p(d)?);
                }
            }
            let q = 0.5 * (a + b);
            let v = f(q, p(q)?).min(best_v);
            // v = h(μ_q) at the minimizer
            Ok((q, chi, v / chi, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let t: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let a: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let d: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let h: Vec<f64> = samples.iter().map(|s| s.3).collect();
    Ok(SpectrumCurve::assemble(t, a.clone(), d, h, a, t_star, depth.max(1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalDimension {
    /// `h(μ_φ)/χ(μ_φ)`.
    pub value: f64,
    /// `P(φ)/χ(μ_φ)`.
    pub pressure_ratio: f64,
    pub entropy: f64,
    pub lyapunov: f64,
    pub pressure: f64,
}

/// Pointwise dimension of the equilibrium state of `phi`.
pub fn local_dimension(model: &Model, phi: &PotentialSpec, depth: usize) -> Result<LocalDimension> {
    let map = model.require_map()?;
    let eq = Equilibrium::new(model, phi, depth, DEFAULT_TOL)?;
    let pressure = eq.pressure();
    let entropy = pressure - eq.measure.integrate(eq.matrix.potential());
    let lyapunov = eq.integrate(model, &log_derivative(map))?;
    Ok(LocalDimension {
        value: entropy / lyapunov,
        pressure_ratio: pressure / lyapunov,
        entropy,
        lyapunov,
        pressure,
    })
}

/// `P(-t log|T'|)` at one depth.
pub fn geometric_pressure(map: &MapModel, t: f64, depth: usize) -> Result<f64> {
    let model = Model::Map(map.clone());
    let w = crate::operator::discretize(
        &model,
        &crate::maps::geometric_potential(map, t),
        depth,
        EvalMode::Midpoint,
    )?;
    Ok(perron_eigenvalue(&w, DEFAULT_TOL, DEFAULT_MAX_ITER)?.ln())
}
