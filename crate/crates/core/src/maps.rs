//! Piecewise expanding interval maps (cookie-cutters) and their geometric potentials.
//!
//! Every branch is increasing and maps its domain onto `[0, 1]`; the coding
//! subshift selects which branch compositions are admissible.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Expr, HolderData, PotentialSpec};
use crate::symbolic::{CylinderBasis, SubshiftSpec};

/// Residual tolerance for branch inversion.
pub const INVERSE_TOL: f64 = 1e-13;

/// Serializable description of a bundled or user-defined map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// `T(x) = 3x` on `[0,1/3]`, `3x - 2` on `[2/3,1]`.
    CookieCutter {},
    /// Two branches with `|T'(x)| = 3 + eps cos(2πx)`.
    Perturbed { eps: f64 },
    /// `T(x) = 2x mod 1`, Lebesgue-preserving.
    Doubling {},
    /// The affine cookie-cutter restricted to the golden-mean coding (`11` forbidden).
    GoldenCookieCutter {},
    /// Increasing affine branches on the given domains; full coding unless `A` is given.
    Affine {
        domains: Vec<[f64; 2]>,
        #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
        transition: Option<Vec<Vec<u8>>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Branches {
    /// `(a, b, slope)` per branch.
    Affine(Vec<(f64, f64, f64)>),
    /// Branch 0 is `G` on `[0, split]`, branch 1 is `G - 2` on `[1 - split, 1]`
    /// with `G(x) = 3x + eps sin(2πx)/(2π)`.
    Perturbed { eps: f64, split: f64 },
}

/// A uniformly expanding Markov interval map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapModel {
    spec: MapSpec,
    branches: Branches,
    coding: SubshiftSpec,
    expansion_min: f64,
    expansion_max: f64,
    stable_dim: usize,
}

impl Serialize for MapModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MapModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = MapSpec::deserialize(d)?;
        MapModel::from_spec(spec).map_err(serde::de::Error::custom)
    }
}

impl MapModel {
    pub fn from_spec(spec: MapSpec) -> Result<Self> {
        match &spec {
            MapSpec::CookieCutter {} => Ok(build_cookie_cutter()),
            MapSpec::Perturbed { eps } => build_perturbed_cookie_cutter(*eps),
            MapSpec::Doubling {} => Ok(build_doubling()),
            MapSpec::GoldenCookieCutter {} => Ok(build_golden_cookie_cutter()),
            MapSpec::Affine { domains, transition } => {
                let domains: Vec<(f64, f64)> = domains.iter().map(|d| (d[0], d[1])).collect();
                let coding = match transition {
                    Some(a) => SubshiftSpec::new(a.clone())?,
                    None => SubshiftSpec::full_shift(domains.len()),
                };
                MapModel::affine(domains, coding)
            }
        }
    }

    /// Affine branches `x ↦ (x - a)/(b - a)` on each domain `[a, b]`.
    pub fn affine(domains: Vec<(f64, f64)>, coding: SubshiftSpec) -> Result<Self> {
        if domains.len() != coding.alphabet_size() {
            return Err(Error::InvalidModel(format!(
                "{} branches but the coding has {} symbols",
                domains.len(),
                coding.alphabet_size()
            )));
        }
        for (i, &(a, b)) in domains.iter().enumerate() {
            if !(0.0..1.0).contains(&a) || !(a < b && b <= 1.0) {
                return Err(Error::InvalidModel(format!(
                    "branch {i} domain [{a}, {b}] is not inside [0,1]"
                )));
            }
            if b - a >= 1.0 {
                return Err(Error::InvalidModel(format!("branch {i} is not expanding")));
            }
        }
        let mut sorted = domains.clone();
        sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
        if sorted.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::InvalidModel("branch domains overlap".into()));
        }
        let slopes: Vec<f64> = domains.iter().map(|&(a, b)| snap(1.0 / (b - a))).collect();
        let expansion_min = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        let expansion_max = slopes.iter().cloned().fold(0.0, f64::max);
        let spec = MapSpec::Affine {
            domains: domains.iter().map(|&(a, b)| [a, b]).collect(),
            transition: if coding.is_full() {
                None
            } else {
                Some(coding.transition().to_vec())
            },
        };
        Ok(MapModel {
            spec,
            branches: Branches::Affine(domains.iter().zip(&slopes).map(|(&(a, b), &s)| (a, b, s)).collect()),
            coding,
            expansion_min,
            expansion_max,
            stable_dim: 0,
        })
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn coding(&self) -> &SubshiftSpec {
        &self.coding
    }

    pub fn expansion_min(&self) -> f64 {
        self.expansion_min
    }

    pub fn expansion_max(&self) -> f64 {
        self.expansion_max
    }

    pub fn stable_dim(&self) -> usize {
        self.stable_dim
    }

    pub fn branch_count(&self) -> usize {
        self.coding.alphabet_size()
    }

    /// True when every branch has constant derivative.
    pub fn is_affine(&self) -> bool {
        match self.branches {
            Branches::Affine(_) => true,
            Branches::Perturbed { eps, .. } => eps == 0.0,
        }
    }

    pub fn domain(&self, branch: usize) -> (f64, f64) {
        match &self.branches {
            Branches::Affine(d) => (d[branch].0, d[branch].1),
            Branches::Perturbed { split, .. } => {
                if branch == 0 {
                    (0.0, *split)
                } else {
                    (1.0 - split, 1.0)
                }
            }
        }
    }

    pub fn branch_of(&self, x: f64) -> Option<usize> {
        (0..self.branch_count()).find(|&i| {
            let (a, b) = self.domain(i);
            x >= a && x <= b
        })
    }

    /// Branch map `T_i(x)`.
    pub fn apply(&self, branch: usize, x: f64) -> f64 {
        match &self.branches {
            Branches::Affine(d) => {
                let (a, _, s) = d[branch];
                (x - a) * s
            }
            Branches::Perturbed { eps, .. } => perturbed_primitive(*eps, x) - 2.0 * branch as f64,
        }
    }

    /// `T(x)` using the branch whose domain contains `x`.
    pub fn apply_point(&self, x: f64) -> Option<f64> {
        self.branch_of(x).map(|i| self.apply(i, x))
    }

    /// `|T_i'(x)|`. Perturbed branches use the closed form on all of `[0,1]`.
    pub fn derivative(&self, branch: usize, x: f64) -> f64 {
        match &self.branches {
            Branches::Affine(d) => d[branch].2,
            Branches::Perturbed { eps, .. } => 3.0 + eps * (2.0 * PI * x).cos(),
        }
    }

    /// Derivative at `x`, using the nearest branch when `x` lies in a gap.
    pub fn derivative_at(&self, x: f64) -> f64 {
        let branch = self.branch_of(x).unwrap_or_else(|| self.nearest_branch(x));
        self.derivative(branch, x)
    }

    fn nearest_branch(&self, x: f64) -> usize {
        (0..self.branch_count())
            .min_by(|&i, &j| {
                let di = interval_distance(self.domain(i), x);
                let dj = interval_distance(self.domain(j), x);
                di.total_cmp(&dj)
            })
            .unwrap_or(0)
    }

    /// Enclosure of `log|T_i'|` on `[lo, hi]`.
    pub fn log_derivative_range(&self, branch: usize, lo: f64, hi: f64) -> (f64, f64) {
        match &self.branches {
            Branches::Affine(_) => {
                let v = self.derivative(branch, lo).ln();
                (v, v)
            }
            Branches::Perturbed { eps, .. } => {
                let (c_lo, c_hi) = cos_range(2.0 * PI * lo, 2.0 * PI * hi);
                let (d1, d2) = (3.0 + eps * c_lo, 3.0 + eps * c_hi);
                (d1.min(d2).ln(), d1.max(d2).ln())
            }
        }
    }

    /// Lipschitz constant of `log|T'|` on the branch domains.
    pub fn log_derivative_lipschitz(&self) -> f64 {
        match &self.branches {
            Branches::Affine(_) => 0.0,
            Branches::Perturbed { eps, .. } => 2.0 * PI * eps.abs() / (3.0 - eps.abs()),
        }
    }

    /// Solves `T_i(x) = y` for `x` in the branch domain.
    pub fn branch_inverse(&self, branch: usize, y: f64) -> Result<f64> {
        if branch >= self.branch_count() {
            return Err(Error::InvalidArgument(format!("no branch {branch}")));
        }
        if !(0.0..=1.0).contains(&y) || y.is_nan() {
            return Err(Error::OutOfImage { branch, y });
        }
        Ok(self.inverse_unchecked(branch, y))
    }

    pub(crate) fn inverse_unchecked(&self, branch: usize, y: f64) -> f64 {
        match &self.branches {
            Branches::Affine(d) => {
                let (a, _, s) = d[branch];
                a + y / s
            }
            Branches::Perturbed { eps, split } => {
                let (a, b) = if branch == 0 { (0.0, *split) } else { (1.0 - split, 1.0) };
                let target = y + 2.0 * branch as f64;
                solve_increasing(
                    |x| perturbed_primitive(*eps, x) - target,
                    |x| 3.0 + eps * (2.0 * PI * x).cos(),
                    a,
                    b,
                    a + (b - a) * y,
                )
            }
        }
    }

    /// Interval of every depth-k cylinder of `basis`, built by pulling back
    /// the depth-(k-1) intervals through the inverse branches.
    pub fn cylinder_intervals(&self, basis: &CylinderBasis) -> Result<Vec<(f64, f64)>> {
        let depth = basis.depth();
        let mut prev_basis = CylinderBasis::new(&self.coding, 0)?;
        let mut prev: Vec<(f64, f64)> = vec![(0.0, 1.0)];
        for d in 1..=depth {
            let cur_basis = CylinderBasis::new(&self.coding, d)?;
            let cur: Vec<(f64, f64)> = (0..cur_basis.len())
                .map(|i| {
                    let first = cur_basis.first_symbol(i) as usize;
                    let tail = if d == 1 {
                        0
                    } else {
                        cur_basis.shift_index(i, &prev_basis)
                    };
                    let (lo, hi) = prev[tail];
                    (self.inverse_unchecked(first, lo), self.inverse_unchecked(first, hi))
                })
                .collect();
            prev = cur;
            prev_basis = cur_basis;
        }
        Ok(prev)
    }

    /// Symbolic coding of the first `len` iterates of `x`, or `None` if the orbit leaves the domains.
    pub fn coding_of(&self, mut x: f64, len: usize) -> Option<Vec<u8>> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let i = self.branch_of(x)?;
            if let Some(&prev) = out.last() {
                if !self.coding.allowed(prev, i as u8) {
                    return None;
                }
            }
            out.push(i as u8);
            x = self.apply(i, x);
        }
        Some(out)
    }

    /// The point whose forward coding begins with `symbols`, pulled back from `tail`.
    pub fn point_from_coding(&self, symbols: &[u8], tail: f64) -> f64 {
        symbols
            .iter()
            .rev()
            .fold(tail, |y, &s| self.inverse_unchecked(s as usize, y))
    }

    /// Orbit `p, T p, .., T^{n-1} p` of the periodic point coded by `word` repeated.
    ///
    /// Computed as the fixed point of the contracting inverse-branch composition.
    pub fn periodic_orbit_points(&self, word: &[u8]) -> Vec<f64> {
        let n = word.len();
        let mut pts = vec![0.5; n];
        let mut x = 0.5;
        for _ in 0..200 {
            let prev = x;
            for j in (0..n).rev() {
                x = self.inverse_unchecked(word[j] as usize, x);
                pts[j] = x;
            }
            if (x - prev).abs() <= 1e-16 {
                break;
            }
        }
        // One final sweep so that every stored point is the image of its predecessor.
        let mut y = pts[0];
        for j in (0..n).rev() {
            y = self.inverse_unchecked(word[j] as usize, y);
            pts[j] = y;
        }
        pts
    }
}

/// Rounds slopes that are integers up to representation error.
fn snap(s: f64) -> f64 {
    if (s - s.round()).abs() < 1e-9 {
        s.round()
    } else {
        s
    }
}

fn interval_distance((a, b): (f64, f64), x: f64) -> f64 {
    if x < a {
        a - x
    } else if x > b {
        x - b
    } else {
        0.0
    }
}

fn perturbed_primitive(eps: f64, x: f64) -> f64 {
    3.0 * x + eps * (2.0 * PI * x).sin() / (2.0 * PI)
}

/// Safeguarded Newton for an increasing function with a sign change on `[lo, hi]`.
fn solve_increasing(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, x0: f64) -> f64 {
    let mut x = x0.clamp(lo, hi);
    for _ in 0..100 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / df(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-17 || hi - lo <= 4.0 * f64::EPSILON {
            return next;
        }
        x = next;
    }
    x
}

/// Range of `cos` on `[a, b]`.
pub(crate) fn cos_range(a: f64, b: f64) -> (f64, f64) {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let (ca, cb) = (a.cos(), b.cos());
    let mut lo = ca.min(cb);
    let mut hi = ca.max(cb);
    let two_pi = 2.0 * PI;
    // maxima at 2πk, minima at π + 2πk
    let k = (a / two_pi).ceil();
    if k * two_pi <= b {
        hi = 1.0;
    }
    let k = ((a - PI) / two_pi).ceil();
    if PI + k * two_pi <= b {
        lo = -1.0;
    }
    (lo, hi)
}

/// Range of `sin` on `[a, b]`.
pub(crate) fn sin_range(a: f64, b: f64) -> (f64, f64) {
    cos_range(a - PI / 2.0, b - PI / 2.0)
}

/// The affine middle-thirds cookie-cutter.
pub fn build_cookie_cutter() -> MapModel {
    let mut m = MapModel::affine(vec![(0.0, 1.0 / 3.0), (2.0 / 3.0, 1.0)], SubshiftSpec::full_shift(2))
        .expect("cookie-cutter is valid");
    m.spec = MapSpec::CookieCutter {};
    m
}

/// Two-branch map with `|T'(x)| = 3 + eps cos(2πx)`, each branch onto `[0,1]`.
///
/// The branch maps are `G(x) = 3x + eps sin(2πx)/(2π)` and `G(x) - 2`; the
/// domains `[0, s]` and `[1 - s, 1]` are fixed by `G(s) = 1`.
pub fn build_perturbed_cookie_cutter(eps: f64) -> Result<MapModel> {
    if !eps.is_finite() || eps.abs() >= 2.0 {
        return Err(Error::ExpansionViolation { eps });
    }
    let split = solve_increasing(
        |x| perturbed_primitive(eps, x) - 1.0,
        |x| 3.0 + eps * (2.0 * PI * x).cos(),
        0.0,
        0.5,
        1.0 / 3.0,
    );
    Ok(MapModel {
        spec: MapSpec::Perturbed { eps },
        branches: Branches::Perturbed { eps, split },
        coding: SubshiftSpec::full_shift(2),
        expansion_min: 3.0 - eps.abs(),
        expansion_max: 3.0 + eps.abs(),
        stable_dim: 0,
    })
}

pub fn build_doubling() -> MapModel {
    let mut m =
        MapModel::affine(vec![(0.0, 0.5), (0.5, 1.0)], SubshiftSpec::full_shift(2)).expect("doubling map is valid");
    m.spec = MapSpec::Doubling {};
    m
}

pub fn build_golden_cookie_cutter() -> MapModel {
    let mut m = MapModel::affine(vec![(0.0, 1.0 / 3.0), (2.0 / 3.0, 1.0)], SubshiftSpec::golden_mean())
        .expect("golden cookie-cutter is valid");
    m.spec = MapSpec::GoldenCookieCutter {};
    m
}

/// `φ_t(x) = -t log|T'(x)|` with Hölder data from the derivative bounds.
pub fn geometric_potential(map: &MapModel, t: f64) -> PotentialSpec {
    let sup_norm = t.abs() * map.expansion_max().ln().abs().max(map.expansion_min().ln().abs());
    if map.is_affine() {
        let values = (0..map.branch_count())
            .map(|i| {
                let (a, b) = map.domain(i);
                -t * map.derivative(i, 0.5 * (a + b)).ln()
            })
            .collect();
        return PotentialSpec::branch_constant(values).with_holder(HolderData {
            alpha: 1.0,
            seminorm: 0.0,
            sup_norm,
        });
    }
    PotentialSpec::closed_form(Expr::LogAbsDerivative.scaled(-t)).with_holder(HolderData {
        alpha: 1.0,
        seminorm: t.abs() * map.log_derivative_lipschitz(),
        sup_norm,
    })
}

/// `log|T'|`, the integrand of the Lyapunov exponent.
pub fn log_derivative(map: &MapModel) -> PotentialSpec {
    geometric_potential(map, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    #[test]
    fn affine_cookie_cutter() {
        let m = build_cookie_cutter();
        assert!((m.apply(0, 0.2) - 0.6).abs() < 1e-15);
        assert_eq!(m.derivative(0, 0.1), 3.0);
        assert_eq!(m.derivative(1, 0.9), 3.0);
        assert_eq!(m.coding(), &SubshiftSpec::full_shift(2));
        assert!((m.branch_inverse(0, 0.6).unwrap() - 0.2).abs() < 1e-15);
        assert!((m.branch_inverse(1, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perturbed_expansion_and_derivative() {
        let m = build_perturbed_cookie_cutter(0.5).unwrap();
        assert_eq!((m.expansion_min(), m.expansion_max()), (2.5, 3.5));
        assert_eq!(m.derivative(0, 0.0), 3.5);
        assert!((m.apply(0, m.domain(0).1) - 1.0).abs() < 1e-15);
        assert!(m.apply(1, m.domain(1).0).abs() < 1e-15);
        assert!((m.apply(1, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perturbed_rejects_weak_expansion() {
        assert_eq!(
            build_perturbed_cookie_cutter(2.0).unwrap_err(),
            Error::ExpansionViolation { eps: 2.0 }
        );
        assert!(build_perturbed_cookie_cutter(-2.5).is_err());
    }

    #[test]
    fn zero_perturbation_matches_affine() {
        let p = build_perturbed_cookie_cutter(0.0).unwrap();
        let a = build_cookie_cutter();
        for &x in &[0.0, 0.1, 0.25, 1.0 / 3.0] {
            assert!((p.apply(0, x) - a.apply(0, x)).abs() < 1e-14);
            assert_eq!(p.derivative(0, x), 3.0);
        }
        for &x in &[2.0 / 3.0, 0.8, 1.0] {
            assert!((p.apply(1, x) - a.apply(1, x)).abs() < 1e-14);
        }
        assert!((p.domain(0).1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perturbed_inverse_residual() {
        let m = build_perturbed_cookie_cutter(0.5).unwrap();
        let x = m.branch_inverse(0, 0.5).unwrap();
        assert!((m.apply(0, x) - 0.5).abs() <= INVERSE_TOL);
        let (a, b) = m.domain(0);
        assert!(x >= a && x <= b);
        assert_eq!(m.branch_inverse(0, 1.5), Err(Error::OutOfImage { branch: 0, y: 1.5 }));
    }

    #[test]
    fn geometric_potential_values() {
        let a = build_cookie_cutter();
        let phi = geometric_potential(&a, 1.0);
        assert_eq!(phi.branch_values().unwrap(), &[-(3f64.ln()), -(3f64.ln())]);
        let zero = geometric_potential(&a, 0.0);
        assert!(zero.branch_values().unwrap().iter().all(|&v| v == 0.0));

        let p = build_perturbed_cookie_cutter(0.5).unwrap();
        let model = Model::Map(p.clone());
        let phi = geometric_potential(&p, 1.0);
        assert!((phi.eval_point(&model, 0.0).unwrap() + 3.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cylinder_intervals_nest() {
        let m = build_perturbed_cookie_cutter(0.5).unwrap();
        let b3 = CylinderBasis::new(m.coding(), 3).unwrap();
        let b2 = CylinderBasis::new(m.coding(), 2).unwrap();
        let i3 = m.cylinder_intervals(&b3).unwrap();
        let i2 = m.cylinder_intervals(&b2).unwrap();
        for i in 0..b3.len() {
            let (lo, hi) = i3[i];
            let (plo, phi) = i2[b3.prefix_index(i, &b2)];
            assert!(lo < hi && lo >= plo && hi <= phi);
            let mid = 0.5 * (lo + hi);
            assert_eq!(m.coding_of(mid, 3).unwrap(), b3.word(i));
        }
    }

    #[test]
    fn periodic_points_are_periodic() {
        let m = build_perturbed_cookie_cutter(0.5).unwrap();
        let word = [0u8, 1, 1, 0, 1];
        let pts = m.periodic_orbit_points(&word);
        for j in 0..word.len() {
            let next = m.apply(word[j] as usize, pts[j]);
            assert!((next - pts[(j + 1) % word.len()]).abs() < 1e-13);
        }
    }

    #[test]
    fn trig_ranges() {
        assert_eq!(cos_range(-0.1, 0.1).1, 1.0);
        assert_eq!(cos_range(3.0, 3.3).0, -1.0);
        let (lo, hi) = cos_range(0.2, 0.4);
        assert!((lo - 0.4f64.cos()).abs() < 1e-15 && (hi - 0.2f64.cos()).abs() < 1e-15);
        assert_eq!(sin_range(1.5, 1.6).1, 1.0);
    }

    #[test]
    fn map_json() {
        let m: MapModel = serde_json::from_str(r#"{"kind":"perturbed","eps":0.5}"#).unwrap();
        assert_eq!(m.expansion_max(), 3.5);
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"kind":"perturbed","eps":0.5}"#);
        let c: MapModel = serde_json::from_str(r#"{"kind":"cookie_cutter"}"#).unwrap();
        assert_eq!(c, build_cookie_cutter());
        assert!(serde_json::from_str::<MapModel>(r#"{"kind":"perturbed","eps":3.0}"#).is_err());
        assert!(serde_json::from_str::<MapModel>(r#"{"kind":"cookie_cutter","x":1}"#).is_err());
    }
}
