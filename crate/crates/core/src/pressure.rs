//! Topological pressure, its derivatives, pressure curves and the Legendre transform.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::operator::{
    discretize, doob_push, doob_transitions, gibbs_measure, perron, perron_eigenvalue, GibbsCylinderMeasure,
    PerronTriple, TransferMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::potential::{EvalMode, PotentialSpec};
use crate::symbolic::{periodic_orbits, CylinderBasis};

/// Largest horizon for exact variance and Jarzynski enumeration.
pub const MAX_EXACT_HORIZON: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureMethod {
    Spectral,
    PeriodicOrbit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureOptions {
    pub depth: usize,
    pub tol: f64,
    pub method: PressureMethod,
    pub max_iter: usize,
    /// Also run the other method and report the difference.
    pub cross_check: bool,
}

impl Default for PressureOptions {
    fn default() -> Self {
        PressureOptions {
            depth: 10,
            tol: DEFAULT_TOL,
            method: PressureMethod::Spectral,
            max_iter: DEFAULT_MAX_ITER,
            cross_check: false,
        }
    }
}

impl PressureOptions {
    pub fn at_depth(depth: usize) -> Self {
        PressureOptions {
            depth,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureResult {
    pub value: f64,
    /// `[P_inf, P_sup]` from the bracket modes; degenerate for the periodic-orbit method.
    pub bracket: [f64; 2],
    pub depth: usize,
    pub method: PressureMethod,
    pub cross_check_delta: Option<f64>,
    pub gap: Option<f64>,
    pub residual: Option<f64>,
}

pub fn pressure(model: &Model, phi: &PotentialSpec, opts: &PressureOptions) -> Result<PressureResult> {
    let mut res = match opts.method {
        PressureMethod::Spectral => spectral_pressure(model, phi, opts)?,
        PressureMethod::PeriodicOrbit => periodic_result(model, phi, opts.depth)?,
    };
    if opts.cross_check {
        let other = match opts.method {
            PressureMethod::Spectral => periodic_orbit_pressure(model, phi, opts.depth)?,
            PressureMethod::PeriodicOrbit => spectral_pressure(model, phi, opts)?.value,
        };
        res.cross_check_delta = Some((res.value - other).abs());
    }
    Ok(res)
}

fn solve(
    model: &Model,
    phi: &PotentialSpec,
    depth: usize,
    mode: EvalMode,
    opts: &PressureOptions,
) -> Result<PerronTriple> {
    let w = discretize(model, phi, depth, mode)?;
    perron(&w, opts.tol, opts.max_iter)
}

fn spectral_pressure(model: &Model, phi: &PotentialSpec, opts: &PressureOptions) -> Result<PressureResult> {
    let depth = opts.depth.max(phi.required_depth());
    let mid = solve(model, phi, depth, EvalMode::Midpoint, opts)?;
    let value = mid.pressure();
    let bracket = if phi.needs_geometry() {
        let lo = solve(model, phi, depth, EvalMode::Infimum, opts)?.pressure();
        let hi = solve(model, phi, depth, EvalMode::Supremum, opts)?.pressure();
        [lo.min(value), hi.max(value)]
    } else {
        [value, value]
    };
    Ok(PressureResult {
        value,
        bracket,
        depth,
        method: PressureMethod::Spectral,
        cross_check_delta: None,
        gap: Some(mid.gap),
        residual: Some(mid.residual),
    })
}

fn periodic_result(model: &Model, phi: &PotentialSpec, n: usize) -> Result<PressureResult> {
    let value = periodic_orbit_pressure(model, phi, n)?;
    Ok(PressureResult {
        value,
        bracket: [value, value],
        depth: n,
        method: PressureMethod::PeriodicOrbit,
        cross_check_delta: None,
        gap: None,
        residual: None,
    })
}

/// `(1/n) log Σ_{σⁿp = p} exp(S_nφ(p))`.
pub fn periodic_orbit_pressure(model: &Model, phi: &PotentialSpec, n: usize) -> Result<f64> {
    phi.validate(model)?;
    let orbits = periodic_orbits(model.coding(), n, false)?;
    let terms: Vec<(f64, f64)> = orbits
        .par_iter()
        .map(|o| Ok((o.least_period as f64, phi.periodic_sum(model, o.symbols())?)))
        .collect::<Result<_>>()?;
    let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|(k, v)| k * (v - m).exp()).sum();
    Ok((m + s.ln()) / n as f64)
}

/// Aitken extrapolation of the spectral pressure over depths `k-1, k, k+1`.
pub fn extrapolated_pressure(model: &Model, phi: &PotentialSpec, depth: usize, tol: f64) -> Result<f64> {
    let k = depth.max(phi.required_depth() + 1);
    let opts = PressureOptions {
        tol,
        ..Default::default()
    };
    let p: Vec<f64> = (k - 1..=k + 1)
        .map(|d| Ok(solve(model, phi, d, EvalMode::Midpoint, &opts)?.pressure()))
        .collect::<Result<_>>()?;
    let d1 = p[2] - p[1];
    let d2 = p[2] - 2.0 * p[1] + p[0];
    if d2.abs() < 1e-15 || (d1 * d1 / d2).abs() > (p[2] - p[0]).abs() {
        return Ok(p[2]);
    }
    Ok(p[2] - d1 * d1 / d2)
}

/// Equilibrium state of `phi` on depth-k cylinders with the discretization that produced it.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub matrix: TransferMatrix,
    pub triple: PerronTriple,
    pub measure: GibbsCylinderMeasure,
}

impl Equilibrium {
    pub fn new(model: &Model, phi: &PotentialSpec, depth: usize, tol: f64) -> Result<Self> {
        let w = discretize(model, phi, depth.max(phi.required_depth()), EvalMode::Midpoint)?;
        Self::from_matrix(w, tol)
    }

    pub fn from_matrix(matrix: TransferMatrix, tol: f64) -> Result<Self> {
        let triple = perron(&matrix, tol, DEFAULT_MAX_ITER)?;
        let measure = gibbs_measure(&triple, &matrix);
        Ok(Equilibrium {
            matrix,
            triple,
            measure,
        })
    }

    pub fn pressure(&self) -> f64 {
        self.triple.pressure()
    }

    pub fn basis(&self) -> &CylinderBasis {
        self.matrix.basis()
    }

    /// `∫ψ dμ` with `ψ` sampled at the cylinder midpoints.
    pub fn integrate(&self, model: &Model, psi: &PotentialSpec) -> Result<f64> {
        let v = psi.cylinder_values(model, self.basis(), EvalMode::Midpoint)?;
        Ok(self.measure.integrate(&v))
    }
}

/// `d/dz P(φ + zψ)` at `z = 0`, i.e. `∫ψ dμ_φ`.
pub fn pressure_derivative(model: &Model, phi: &PotentialSpec, psi: &PotentialSpec, depth: usize) -> Result<f64> {
    let depth = depth.max(phi.required_depth()).max(psi.required_depth());
    Equilibrium::new(model, phi, depth, DEFAULT_TOL)?.integrate(model, psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceResult {
    /// `Σ_k Cov(ψ, ψ∘σ^k)` over all lags, summed along the Doob chain until the terms vanish.
    pub sigma2: f64,
    /// `Var(S_nψ) - Var(S_{n-1}ψ)`, the same sum truncated at lag `n-1`.
    pub increment: f64,
    /// `Var(S_nψ)/n`.
    pub raw: f64,
    /// Second divided difference of `s ↦ P(φ + sψ)` at `s = 0`.
    pub curvature: f64,
    pub horizon: usize,
    pub depth: usize,
}

/// Asymptotic variance of `ψ` under `μ_φ` from exact moments of the Doob chain.
pub fn pressure_variance(
    model: &Model,
    phi: &PotentialSpec,
    psi: &PotentialSpec,
    depth: usize,
    horizon: usize,
) -> Result<VarianceResult> {
    if horizon > MAX_EXACT_HORIZON {
        return Err(Error::HorizonCap {
            horizon,
            cap: MAX_EXACT_HORIZON,
        });
    }
    if horizon < 2 {
        return Err(Error::InvalidArgument("horizon must be at least 2".into()));
    }
    let depth = depth.max(phi.required_depth()).max(psi.required_depth());
    let eq = Equilibrium::new(model, phi, depth, DEFAULT_TOL)?;
    let psi_v = psi.cylinder_values(model, eq.basis(), EvalMode::Midpoint)?;
    let vars = birkhoff_variances(&eq, &psi_v, horizon);
    let h = 1e-2;
    let opts = PressureOptions::at_depth(depth);
    let p = |s: f64| -> Result<f64> {
        let tilted = phi.combine(1.0, psi, s, model.coding().alphabet_size());
        Ok(solve(model, &tilted, depth, EvalMode::Midpoint, &opts)?.pressure())
    };
    let curvature = (p(h)? - 2.0 * eq.pressure() + p(-h)?) / (h * h);
    Ok(VarianceResult {
        sigma2: green_kubo(&eq, &psi_v)?,
        increment: vars[horizon] - vars[horizon - 1],
        raw: vars[horizon] / horizon as f64,
        curvature,
        horizon,
        depth,
    })
}

/// Correlation sum `Var ψ + 2 Σ_{k≥1} Cov(ψ, ψ∘σ^k)` for the stationary Doob chain.
fn green_kubo(eq: &Equilibrium, psi: &[f64]) -> Result<f64> {
    const MAX_LAG: usize = 100_000;
    let w = &eq.matrix;
    let doob = doob_transitions(w, &eq.triple);
    let mean = eq.measure.integrate(psi);
    let c: Vec<f64> = psi.iter().map(|v| v - mean).collect();
    let mut m: Vec<f64> = eq.measure.masses.iter().zip(&c).map(|(p, v)| p * v).collect();
    let var: f64 = m.iter().zip(&c).map(|(a, b)| a * b).sum();
    let cmax = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut next = vec![0.0; m.len()];
    let bound = |m: &[f64]| m.iter().map(|v| v.abs()).sum::<f64>() * cmax;
    let start = bound(&m);
    let mut total = var;
    for _ in 0..MAX_LAG {
        // every later lag is bounded by the remaining mass times sup|ψ − mean|
        if bound(&m) <= 1e-13 * start {
            return Ok(total);
        }
        doob_push(w, &doob, &m, &mut next);
        std::mem::swap(&mut m, &mut next);
        total += 2.0 * m.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    }
    Err(Error::NoConvergence {
        max_iter: MAX_LAG,
        residual: m.iter().map(|v| v.abs()).sum(),
    })
}

/// `Var(S_jψ)` for `j = 0..=n` along the stationary Doob chain.
pub(crate) fn birkhoff_variances(eq: &Equilibrium, psi: &[f64], n: usize) -> Vec<f64> {
    let w = &eq.matrix;
    let doob = doob_transitions(w, &eq.triple);
    let mean = eq.measure.integrate(psi);
    let c: Vec<f64> = psi.iter().map(|v| v - mean).collect();
    let len = w.len();
    let m0 = eq.measure.masses.clone();
    let mut m1: Vec<f64> = m0.iter().zip(&c).map(|(p, v)| p * v).collect();
    let mut m2: Vec<f64> = m0.iter().zip(&c).map(|(p, v)| p * v * v).collect();
    let mut out = vec![0.0, m2.iter().sum()];
    let mut a1 = vec![0.0; len];
    let mut a2 = vec![0.0; len];
    for _ in 2..=n {
        a1.iter_mut().for_each(|v| *v = 0.0);
        a2.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..len {
            for (&j, q) in w.successors(i).iter().zip(&doob[i]) {
                a1[j] += m1[i] * q;
                a2[j] += m2[i] * q;
            }
        }
        for j in 0..len {
            m2[j] = a2[j] + 2.0 * c[j] * a1[j] + c[j] * c[j] * m0[j];
            m1[j] = a1[j] + c[j] * m0[j];
        }
        out.push(m2.iter().sum());
    }
    out
}

/// Samples of `t ↦ P(φ₀ + tψ)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub depth: usize,
}

impl PressureCurve {
    pub fn first_differences(&self) -> Vec<f64> {
        secant_slopes(&self.grid, &self.values)
    }

    pub fn second_differences(&self) -> Vec<f64> {
        second_differences(&self.grid, &self.values)
    }

    pub fn min_second_difference(&self) -> f64 {
        self.second_differences().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        self.min_second_difference() >= -tol
    }
}

/// Values of `φ₀` and `ψ` on a basis, reused across a whole tilt grid.
pub(crate) struct TiltedFamily {
    basis: CylinderBasis,
    base: Vec<f64>,
    dir: Vec<f64>,
}

impl TiltedFamily {
    pub fn new(model: &Model, phi0: &PotentialSpec, psi: &PotentialSpec, depth: usize) -> Result<Self> {
        let depth = depth.max(phi0.required_depth()).max(psi.required_depth());
        let basis = CylinderBasis::new(model.coding(), depth)?;
        let base = phi0.cylinder_values(model, &basis, EvalMode::Midpoint)?;
        let dir = psi.cylinder_values(model, &basis, EvalMode::Midpoint)?;
        Ok(TiltedFamily { basis, base, dir })
    }

    pub fn from_parts(basis: CylinderBasis, base: Vec<f64>, dir: Vec<f64>) -> Self {
        TiltedFamily { basis, base, dir }
    }

    pub fn depth(&self) -> usize {
        self.basis.depth()
    }

    pub fn direction(&self) -> &[f64] {
        &self.dir
    }

    pub fn matrix(&self, t: f64) -> Result<TransferMatrix> {
        let v = self.base.iter().zip(&self.dir).map(|(a, b)| a + t * b).collect();
        TransferMatrix::from_values(self.basis.clone(), v, EvalMode::Midpoint)
    }

    pub fn equilibrium(&self, t: f64, tol: f64) -> Result<Equilibrium> {
        Equilibrium::from_matrix(self.matrix(t)?, tol)
    }

    pub fn pressure(&self, t: f64, tol: f64) -> Result<f64> {
        Ok(perron_eigenvalue(&self.matrix(t)?, tol, DEFAULT_MAX_ITER)?.ln())
    }
}

pub fn pressure_curve(
    model: &Model,
    phi0: &PotentialSpec,
    psi: &PotentialSpec,
    grid: &[f64],
    depth: usize,
    tol: f64,
) -> Result<PressureCurve> {
    let fam = TiltedFamily::new(model, phi0, psi, depth)?;
    let values = grid
        .par_iter()
        .map(|&t| fam.pressure(t, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(PressureCurve {
        grid: grid.to_vec(),
        values,
        depth: fam.depth(),
    })
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

fn secant_slopes(t: &[f64], v: &[f64]) -> Vec<f64> {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
        .collect()
}

fn second_differences(t: &[f64], v: &[f64]) -> Vec<f64> {
    let s = secant_slopes(t, v);
    s.windows(2)
        .zip(t.windows(3))
        .map(|(s, t)| 2.0 * (s[1] - s[0]) / (t[2] - t[0]))
        .collect()
}

/// Discrete Legendre–Fenchel transform `I(a) = sup_j (a t_j − Λ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunction {
    pub a: Vec<f64>,
    /// `+∞` outside `domain`, written as `null` in JSON.
    #[serde(with = "infinite_as_null")]
    pub values: Vec<f64>,
    pub domain: [f64; 2],
    /// Bound on the discretization error of the transform.
    pub grid_tolerance: f64,
}

impl RateFunction {
    pub fn in_domain(&self, a: f64) -> bool {
        a >= self.domain[0] - 1e-12 && a <= self.domain[1] + 1e-12
    }

    /// Finite samples only.
    pub fn finite(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.a
            .iter()
            .cloned()
            .zip(self.values.iter().cloned())
            .filter(|p| p.1.is_finite())
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

pub const CONVEXITY_TOL: f64 = 1e-7;

/// Legendre transform of the sampled convex function `(t, values)`.
///
/// `a_grid` defaults to 201 uniform points across the slope domain.
pub fn legendre(t: &[f64], values: &[f64], a_grid: Option<&[f64]>) -> Result<RateFunction> {
    if t.len() != values.len() || t.len() < 3 {
        return Err(Error::InvalidArgument(
            "legendre needs at least three matching samples".into(),
        ));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("t grid must be strictly increasing".into()));
    }
    for (i, d) in second_differences(t, values).into_iter().enumerate() {
        if d < -CONVEXITY_TOL {
            return Err(Error::NonConvexInput { index: i + 1, value: d });
        }
    }
    let s = secant_slopes(t, values);
    let last = s.len() - 1;
    let lo = s[0] - 0.5 * (s[1] - s[0]).max(0.0);
    let hi = s[last] + 0.5 * (s[last] - s[last - 1]).max(0.0);
    let grid_tolerance = (0..last)
        .map(|j| 0.25 * (t[j + 2] - t[j]) * (s[j + 1] - s[j]).max(0.0))
        .fold(0.0, f64::max);
    let a: Vec<f64> = match a_grid {
        Some(g) => g.to_vec(),
        None => uniform_grid(lo, hi, 201),
    };
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut out = vec![f64::INFINITY; a.len()];
    let mut j = 0;
    for &k in &order {
        let x = a[k];
        if !(x >= lo - 1e-12 && x <= hi + 1e-12) {
            continue;
        }
        while j + 1 < t.len() && x * t[j + 1] - values[j + 1] >= x * t[j] - values[j] {
            j += 1;
        }
        out[k] = x * t[j] - values[j];
    }
    Ok(RateFunction {
        a,
        values: out,
        domain: [lo, hi],
        grid_tolerance,
    })
}

/// Legendre transform of a pressure curve.
pub fn legendre_curve(curve: &PressureCurve, a_grid: Option<&[f64]>) -> Result<RateFunction> {
    legendre(&curve.grid, &curve.values, a_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{build_cookie_cutter, build_perturbed_cookie_cutter, geometric_potential, log_derivative};
    use crate::symbolic::SubshiftSpec;
    use proptest::prelude::*;

    fn full2() -> Model {
        Model::Shift(SubshiftSpec::full_shift(2))
    }

    fn bernoulli(p: f64) -> PotentialSpec {
        PotentialSpec::branch_constant(vec![p.ln(), (1.0 - p).ln()])
    }

    #[test]
    fn constants_on_full_shift() {
        for c in [-1.0, 0.0, 0.37] {
            let r = pressure(&full2(), &PotentialSpec::constant(c), &PressureOptions::at_depth(3)).unwrap();
            assert!((r.value - (2f64.ln() + c)).abs() < 1e-12);
            assert_eq!(r.bracket, [r.value, r.value]);
        }
    }

    #[test]
    fn golden_mean_entropy() {
        let m = Model::Shift(SubshiftSpec::golden_mean());
        let r = pressure(&m, &PotentialSpec::constant(0.0), &PressureOptions::at_depth(4)).unwrap();
        assert!((r.value - ((1.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-10);
    }

    #[test]
    fn affine_geometric_pressure() {
        let map = build_cookie_cutter();
        let model = Model::Map(map.clone());
        for t in [0.0, 0.5, 1.0, 2.0] {
            let r = pressure(&model, &geometric_potential(&map, t), &PressureOptions::at_depth(5)).unwrap();
            assert!((r.value - (2f64.ln() - t * 3f64.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_orbit_cross_check() {
        let map = build_perturbed_cookie_cutter(0.5).unwrap();
        let model = Model::Map(map.clone());
        let opts = PressureOptions {
            cross_check: true,
            ..PressureOptions::at_depth(10)
        };
        let r = pressure(&model, &geometric_potential(&map, 0.6), &opts).unwrap();
        assert!(r.cross_check_delta.unwrap() < 1e-5);
        assert!(r.bracket[0] <= r.value && r.value <= r.bracket[1]);
        let m = Model::Shift(SubshiftSpec::golden_mean());
        let p = periodic_orbit_pressure(&m, &PotentialSpec::constant(0.0), 12).unwrap();
        let lam = (1.0 + 5f64.sqrt()) / 2.0;
        let trace = lam.powi(12) + (-1.0 / lam).powi(12);
        assert!((p - trace.ln() / 12.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_cases() {
        let m = full2();
        let phi = bernoulli(2.0 / 3.0);
        let d = pressure_derivative(&m, &phi, &PotentialSpec::constant(1.7), 3).unwrap();
        assert!((d - 1.7).abs() < 1e-14);
        let map = build_cookie_cutter();
        let model = Model::Map(map.clone());
        let d = pressure_derivative(&model, &geometric_potential(&map, 1.0), &log_derivative(&map), 4).unwrap();
        assert!((d - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn bernoulli_variance() {
        let psi = PotentialSpec::branch_constant(vec![1.0, 0.0]);
        let v = pressure_variance(&full2(), &bernoulli(2.0 / 3.0), &psi, 1, 12).unwrap();
        assert!((v.sigma2 - 2.0 / 9.0).abs() < 1e-12);
        assert!((v.raw - 2.0 / 9.0).abs() < 1.0 / 12.0);
        assert!((v.curvature - 2.0 / 9.0).abs() < 1e-4);
        assert_eq!(
            pressure_variance(&full2(), &bernoulli(0.5), &psi, 1, 15).unwrap_err(),
            Error::HorizonCap { horizon: 15, cap: 14 }
        );
    }

    #[test]
    fn coboundary_variance_vanishes() {
        let m = Model::Shift(SubshiftSpec::full_shift(3));
        let phi = PotentialSpec::cylinder_table(2, vec![0.1, -0.4, 0.3, 0.9, 0.0, -0.2, 0.5, 0.25, -0.7]);
        let u = [0.3, -1.2, 0.8, 0.0, 2.0, -0.5, 1.1, 0.4, -0.9];
        let cob = PotentialSpec::coboundary_table(3, 2, &u);
        let v = pressure_variance(&m, &phi, &cob, 3, 12).unwrap();
        assert!(v.sigma2.abs() <= 1e-8, "{}", v.sigma2);
        let c = pressure_variance(&m, &phi, &PotentialSpec::constant(2.0), 3, 12).unwrap();
        assert!(c.sigma2.abs() < 1e-12);
    }

    #[test]
    fn pressure_invariances() {
        let m = Model::Shift(SubshiftSpec::full_shift(3));
        let phi = PotentialSpec::cylinder_table(2, vec![0.1, -0.4, 0.3, 0.9, 0.0, -0.2, 0.5, 0.25, -0.7]);
        let o = PressureOptions::at_depth(4);
        let p = pressure(&m, &phi, &o).unwrap().value;
        let shifted = pressure(&m, &phi.plus_constant(0.8), &o).unwrap().value;
        assert!((shifted - p - 0.8).abs() < 1e-12);
        let u = [0.3, -1.2, 0.8];
        let cob = PotentialSpec::coboundary_table(3, 1, &u);
        let q = pressure(&m, &phi.add(&cob, 3), &o).unwrap().value;
        assert!((q - p).abs() < 1e-9);
    }

    #[test]
    fn curves_are_convex() {
        let map = build_perturbed_cookie_cutter(0.5).unwrap();
        let model = Model::Map(map.clone());
        let c = pressure_curve(
            &model,
            &PotentialSpec::constant(0.0),
            &geometric_potential(&map, 1.0),
            &uniform_grid(-2.0, 3.0, 51),
            8,
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(c.is_convex(1e-9));
        assert!(c.first_differences().iter().all(|s| *s < 0.0));
    }

    #[test]
    fn legendre_quadratic_and_linear() {
        let t = uniform_grid(-3.0, 3.0, 601);
        let v: Vec<f64> = t.iter().map(|x| x * x / 2.0).collect();
        let r = legendre(&t, &v, Some(&uniform_grid(-3.0, 3.0, 101))).unwrap();
        let dt: f64 = 0.01;
        for (a, i) in r.finite() {
            assert!((i - a * a / 2.0).abs() <= dt * dt);
        }
        assert!((r.domain[0] + 3.0).abs() < 1e-9 && (r.domain[1] - 3.0).abs() < 1e-9);

        let lin: Vec<f64> = t.iter().map(|x| 0.7 * x).collect();
        let r = legendre(&t, &lin, Some(&[0.7, 0.2, 1.0])).unwrap();
        assert!(r.values[0].abs() < 1e-12);
        assert!(r.values[1].is_infinite() && r.values[2].is_infinite());
    }

    #[test]
    fn legendre_bernoulli_kl() {
        let p: f64 = 2.0 / 3.0;
        let t = uniform_grid(-3.0, 3.0, 6001);
        let v: Vec<f64> = t.iter().map(|x| (p * x.exp() + 1.0 - p).ln()).collect();
        let a = uniform_grid(0.1, 0.9, 81);
        let r = legendre(&t, &v, Some(&a)).unwrap();
        for (a, i) in r.finite() {
            let kl = a * (a / p).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - p)).ln();
            assert!((i - kl).abs() < 1e-6, "a={a}");
        }
        assert_eq!(r.finite().count(), 81);
    }

    #[test]
    fn rate_function_json_keeps_infinity() {
        let r = legendre(&[-1.0, 0.0, 1.0], &[1.0, 0.0, 1.0], Some(&[0.0, 5.0])).unwrap();
        assert!(r.values[1].is_infinite());
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("null"));
        assert_eq!(serde_json::from_str::<RateFunction>(&s).unwrap(), r);
    }

    #[test]
    fn legendre_rejects_concave() {
        let t = uniform_grid(-1.0, 1.0, 11);
        let v: Vec<f64> = t.iter().map(|x| -x * x).collect();
        assert!(matches!(legendre(&t, &v, None), Err(Error::NonConvexInput { .. })));
    }

    proptest! {
        #[test]
        fn double_legendre_is_involutive(c2 in 0.2f64..2.0, c1 in -1.0f64..1.0, c4 in 0.0f64..0.3) {
            let t = uniform_grid(-2.0, 2.0, 401);
            let v: Vec<f64> = t.iter().map(|x| c2 * x * x + c1 * x + c4 * x.powi(4)).collect();
            let r = legendre(&t, &v, Some(&uniform_grid(-40.0, 40.0, 4001))).unwrap();
            let (a, i): (Vec<f64>, Vec<f64>) = r.finite().unzip();
            let back = legendre(&a, &i, Some(&t[50..351])).unwrap();
            for (k, x) in back.values.iter().enumerate() {
                prop_assert!((x - v[50 + k]).abs() < 1e-3);
            }
        }

        #[test]
        fn pressure_shift_by_constant(c in -3.0f64..3.0) {
            let m = Model::Shift(SubshiftSpec::golden_mean());
            let phi = PotentialSpec::branch_constant(vec![0.3, -0.8]);
            let o = PressureOptions::at_depth(2);
            let a = pressure(&m, &phi, &o).unwrap().value;
            let b = pressure(&m, &phi.plus_constant(c), &o).unwrap().value;
            prop_assert!((b - a - c).abs() < 1e-12);
        }
    }
}
