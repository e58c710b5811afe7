//! Hölder potentials: branch-constant vectors, cylinder tables and closed-form expressions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{cos_range, sin_range, MapModel};
use crate::model::Model;
use crate::symbolic::{encode, CylinderBasis};

/// Contraction ratio of the symbolic metric `d(x, y) = θ^n`, `n` the first disagreement.
pub const SYMBOLIC_THETA: f64 = 0.5;

/// How a potential is sampled on each cylinder of a discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Midpoint,
    Infimum,
    Supremum,
}

/// Closed-form potential on an interval map, as an expression tree.
///
/// Leaves read the point `x`, the branch derivative at `x`, or a cylinder
/// table indexed by the forward coding of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Const {
        value: f64,
    },
    X,
    LogAbsDerivative,
    Sin {
        arg: Box<Expr>,
    },
    Cos {
        arg: Box<Expr>,
    },
    Add {
        terms: Vec<Expr>,
    },
    Mul {
        terms: Vec<Expr>,
    },
    Scale {
        factor: f64,
        arg: Box<Expr>,
    },
    /// `e(T x)`: the argument evaluated one step along the orbit.
    AfterMap {
        arg: Box<Expr>,
    },
    Table {
        depth: usize,
        values: Vec<f64>,
    },
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const { value }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Expr::Scale {
            factor,
            arg: Box::new(self),
        }
    }

    pub fn sin(self) -> Self {
        Expr::Sin { arg: Box::new(self) }
    }

    pub fn cos(self) -> Self {
        Expr::Cos { arg: Box::new(self) }
    }

    pub fn after_map(self) -> Self {
        Expr::AfterMap { arg: Box::new(self) }
    }

    pub fn sum(terms: Vec<Expr>) -> Self {
        Expr::Add { terms }
    }

    /// `sin(2π k x)`.
    pub fn sin_mode(k: f64) -> Self {
        Expr::X.scaled(2.0 * PI * k).sin()
    }

    /// `e∘T - e`.
    pub fn coboundary_of(self) -> Self {
        Expr::sum(vec![self.clone().after_map(), self.scaled(-1.0)])
    }

    fn depth(&self) -> usize {
        match self {
            Expr::Const { .. } | Expr::X => 0,
            Expr::LogAbsDerivative => 1,
            Expr::Table { depth, .. } => *depth,
            Expr::Sin { arg } | Expr::Cos { arg } | Expr::Scale { arg, .. } => arg.depth(),
            Expr::Add { terms } | Expr::Mul { terms } => terms.iter().map(Expr::depth).max().unwrap_or(0),
            Expr::AfterMap { arg } => 1 + arg.depth(),
        }
    }

    fn needs_geometry(&self) -> bool {
        match self {
            Expr::Const { .. } | Expr::Table { .. } => false,
            Expr::X | Expr::LogAbsDerivative => true,
            Expr::Sin { arg } | Expr::Cos { arg } | Expr::Scale { arg, .. } | Expr::AfterMap { arg } => {
                arg.needs_geometry()
            }
            Expr::Add { terms } | Expr::Mul { terms } => terms.iter().any(Expr::needs_geometry),
        }
    }

    fn validate(&self, alphabet: usize) -> Result<()> {
        match self {
            Expr::Const { value } if !value.is_finite() => Err(Error::InvalidPotential("non-finite constant".into())),
            Expr::Scale { factor, .. } if !factor.is_finite() => {
                Err(Error::InvalidPotential("non-finite scale factor".into()))
            }
            Expr::Table { depth, values } => check_table(*depth, values, alphabet),
            Expr::Sin { arg } | Expr::Cos { arg } | Expr::Scale { arg, .. } | Expr::AfterMap { arg } => {
                arg.validate(alphabet)
            }
            Expr::Add { terms } | Expr::Mul { terms } => terms.iter().try_for_each(|t| t.validate(alphabet)),
            _ => Ok(()),
        }
    }

    /// Value at `x` whose coding starts with `symbols`.
    fn eval(&self, map: Option<&MapModel>, alphabet: usize, x: f64, symbols: &[u8]) -> f64 {
        match self {
            Expr::Const { value } => *value,
            Expr::X => x,
            Expr::LogAbsDerivative => {
                let map = map.expect("geometry checked at validation");
                map.derivative(symbols[0] as usize, x).ln()
            }
            Expr::Table { depth, values } => values[encode(&symbols[..*depth], alphabet) as usize],
            Expr::Sin { arg } => arg.eval(map, alphabet, x, symbols).sin(),
            Expr::Cos { arg } => arg.eval(map, alphabet, x, symbols).cos(),
            Expr::Scale { factor, arg } => factor * arg.eval(map, alphabet, x, symbols),
            Expr::Add { terms } => terms.iter().map(|t| t.eval(map, alphabet, x, symbols)).sum(),
            Expr::Mul { terms } => terms.iter().map(|t| t.eval(map, alphabet, x, symbols)).product(),
            Expr::AfterMap { arg } => {
                let y = map.map_or(x, |m| m.apply(symbols[0] as usize, x));
                arg.eval(map, alphabet, y, &symbols[1..])
            }
        }
    }

    /// Interval enclosure over `x ∈ [lo, hi]` with a fixed coding prefix.
    fn enclose(&self, map: Option<&MapModel>, alphabet: usize, lo: f64, hi: f64, symbols: &[u8]) -> (f64, f64) {
        match self {
            Expr::Const { value } => (*value, *value),
            Expr::X => (lo, hi),
            Expr::LogAbsDerivative => {
                let map = map.expect("geometry checked at validation");
                map.log_derivative_range(symbols[0] as usize, lo, hi)
            }
            Expr::Table { .. } => {
                let v = self.eval(map, alphabet, lo, symbols);
                (v, v)
            }
            Expr::Sin { arg } => {
                let (a, b) = arg.enclose(map, alphabet, lo, hi, symbols);
                sin_range(a, b)
            }
            Expr::Cos { arg } => {
                let (a, b) = arg.enclose(map, alphabet, lo, hi, symbols);
                cos_range(a, b)
            }
            Expr::Scale { factor, arg } => {
                let (a, b) = arg.enclose(map, alphabet, lo, hi, symbols);
                let (p, q) = (factor * a, factor * b);
                (p.min(q), p.max(q))
            }
            Expr::Add { terms } => terms.iter().fold((0.0, 0.0), |(a, b), t| {
                let (c, d) = t.enclose(map, alphabet, lo, hi, symbols);
                (a + c, b + d)
            }),
            Expr::Mul { terms } => terms.iter().fold((1.0, 1.0), |(a, b), t| {
                let (c, d) = t.enclose(map, alphabet, lo, hi, symbols);
                let p = [a * c, a * d, b * c, b * d];
                (
                    p.iter().cloned().fold(f64::INFINITY, f64::min),
                    p.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                )
            }),
            Expr::AfterMap { arg } => match map {
                Some(m) => {
                    let s = symbols[0] as usize;
                    let (a, b) = (m.apply(s, lo), m.apply(s, hi));
                    arg.enclose(map, alphabet, a.min(b), a.max(b), &symbols[1..])
                }
                None => arg.enclose(map, alphabet, lo, hi, &symbols[1..]),
            },
        }
    }
}

fn check_table(depth: usize, values: &[f64], alphabet: usize) -> Result<()> {
    let expected = alphabet.checked_pow(depth as u32).unwrap_or(usize::MAX);
    if values.len() != expected {
        return Err(Error::InvalidPotential(format!(
            "depth-{depth} table over {alphabet} symbols needs {expected} values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPotential("table contains non-finite values".into()));
    }
    Ok(())
}

/// The three supported representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Representation {
    BranchConstant {
        values: Vec<f64>,
    },
    /// Dense table over all `N^depth` words, indexed by the base-N code; non-admissible slots are ignored.
    CylinderTable {
        depth: usize,
        values: Vec<f64>,
    },
    ClosedForm {
        expr: Expr,
    },
}

/// Hölder exponent, seminorm and sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderData {
    pub alpha: f64,
    pub seminorm: f64,
    pub sup_norm: f64,
}

impl HolderData {
    /// `|φ|_α + ‖φ‖_∞`.
    pub fn norm(&self) -> f64 {
        self.seminorm + self.sup_norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub representation: Representation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_seminorm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_norm: Option<f64>,
}

impl PotentialSpec {
    pub fn new(representation: Representation) -> Self {
        PotentialSpec {
            representation,
            holder_alpha: None,
            holder_seminorm: None,
            sup_norm: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::closed_form(Expr::constant(c))
    }

    pub fn branch_constant(values: Vec<f64>) -> Self {
        Self::new(Representation::BranchConstant { values })
    }

    pub fn cylinder_table(depth: usize, values: Vec<f64>) -> Self {
        Self::new(Representation::CylinderTable { depth, values })
    }

    pub fn closed_form(expr: Expr) -> Self {
        Self::new(Representation::ClosedForm { expr })
    }

    pub fn with_holder(mut self, h: HolderData) -> Self {
        self.holder_alpha = Some(h.alpha);
        self.holder_seminorm = Some(h.seminorm);
        self.sup_norm = Some(h.sup_norm);
        self
    }

    pub fn branch_values(&self) -> Option<&[f64]> {
        match &self.representation {
            Representation::BranchConstant { values } => Some(values),
            _ => None,
        }
    }

    /// Number of leading symbols the value depends on (at least 1).
    pub fn required_depth(&self) -> usize {
        let d = match &self.representation {
            Representation::BranchConstant { .. } => 1,
            Representation::CylinderTable { depth, .. } => *depth,
            Representation::ClosedForm { expr } => expr.depth(),
        };
        d.max(1)
    }

    /// True when evaluation needs the point `x`, not just its coding.
    pub fn needs_geometry(&self) -> bool {
        match &self.representation {
            Representation::ClosedForm { expr } => expr.needs_geometry(),
            _ => false,
        }
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        let n = model.coding().alphabet_size();
        match &self.representation {
            Representation::BranchConstant { values } => check_table(1, values, n)?,
            Representation::CylinderTable { depth, values } => check_table(*depth, values, n)?,
            Representation::ClosedForm { expr } => {
                expr.validate(n)?;
                if expr.needs_geometry() && model.as_map().is_none() {
                    return Err(Error::InvalidPotential(
                        "closed-form potential reads x but the model is symbolic".into(),
                    ));
                }
            }
        }
        if let Some(a) = self.holder_alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidPotential(format!("holder_alpha {a} not in (0,1]")));
            }
        }
        if self.holder_seminorm.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::InvalidPotential("negative holder_seminorm".into()));
        }
        Ok(())
    }

    fn as_expr(&self) -> Expr {
        match &self.representation {
            Representation::BranchConstant { values } => Expr::Table {
                depth: 1,
                values: values.clone(),
            },
            Representation::CylinderTable { depth, values } => Expr::Table {
                depth: *depth,
                values: values.clone(),
            },
            Representation::ClosedForm { expr } => expr.clone(),
        }
    }

    /// Value on the word `symbols` at point `x` (ignored for symbolic potentials).
    pub fn eval_word(&self, model: &Model, symbols: &[u8], x: f64) -> Result<f64> {
        let need = self.required_depth();
        if symbols.len() < need {
            return Err(Error::NonAdmissiblePotential {
                needed: need,
                depth: symbols.len(),
            });
        }
        let n = model.coding().alphabet_size();
        Ok(match &self.representation {
            Representation::BranchConstant { values } => values[symbols[0] as usize],
            Representation::CylinderTable { depth, values } => values[encode(&symbols[..*depth], n) as usize],
            Representation::ClosedForm { expr } => expr.eval(model.as_map(), n, x, symbols),
        })
    }

    /// Value at a point of a map model, following the branch that contains each iterate.
    pub fn eval_point(&self, model: &Model, x: f64) -> Result<f64> {
        let map = model
            .as_map()
            .ok_or_else(|| Error::InvalidArgument("point evaluation needs a map model".into()))?;
        let symbols = point_coding(map, x, self.required_depth());
        self.eval_word(model, &symbols, x)
    }

    /// `S_nφ` along the orbit coded by `symbols`, starting at `x0` for map models.
    ///
    /// `symbols` must cover `n - 1 + required_depth()` steps.
    pub fn birkhoff_sum(&self, model: &Model, symbols: &[u8], x0: f64, n: usize) -> Result<f64> {
        let need = n.saturating_sub(1) + self.required_depth();
        if symbols.len() < need {
            return Err(Error::NonAdmissiblePotential {
                needed: need,
                depth: symbols.len(),
            });
        }
        let map = model.as_map();
        let mut x = x0;
        let mut s = 0.0;
        for j in 0..n {
            s += self.eval_word(model, &symbols[j..], x)?;
            if let Some(m) = map {
                x = m.apply(symbols[j] as usize, x);
            }
        }
        Ok(s)
    }

    /// `S_nφ(p)` at the period-`n` point coded by `word` repeated.
    pub fn periodic_sum(&self, model: &Model, word: &[u8]) -> Result<f64> {
        let n = word.len();
        let r = self.required_depth();
        let symbols: Vec<u8> = word.iter().cycle().take(n + r).cloned().collect();
        match model.as_map() {
            Some(map) => {
                let pts = map.periodic_orbit_points(word);
                (0..n).map(|j| self.eval_word(model, &symbols[j..], pts[j])).sum()
            }
            None => self.birkhoff_sum(model, &symbols, 0.5, n),
        }
    }

    /// Per-cylinder values on `basis` in the requested mode.
    pub fn cylinder_values(&self, model: &Model, basis: &CylinderBasis, mode: EvalMode) -> Result<Vec<f64>> {
        self.validate(model)?;
        let need = self.required_depth();
        if basis.depth() < need {
            return Err(Error::NonAdmissiblePotential {
                needed: need,
                depth: basis.depth(),
            });
        }
        let n = model.coding().alphabet_size();
        match (&self.representation, model.as_map()) {
            (Representation::ClosedForm { expr }, Some(map)) if expr.needs_geometry() => {
                let intervals = map.cylinder_intervals(basis)?;
                use rayon::prelude::*;
                Ok((0..basis.len())
                    .into_par_iter()
                    .map(|i| {
                        let w = basis.word(i);
                        let (lo, hi) = intervals[i];
                        match mode {
                            EvalMode::Midpoint => expr.eval(Some(map), n, 0.5 * (lo + hi), &w),
                            EvalMode::Infimum => expr.enclose(Some(map), n, lo, hi, &w).0,
                            EvalMode::Supremum => expr.enclose(Some(map), n, lo, hi, &w).1,
                        }
                    })
                    .collect())
            }
            _ => (0..basis.len())
                .map(|i| self.eval_word(model, &basis.word(i), 0.5))
                .collect(),
        }
    }

    /// Hölder data: supplied values take precedence over estimates.
    ///
    /// Tables use the symbolic metric with ratio [`SYMBOLIC_THETA`]; closed forms
    /// are estimated over sampled pairs of points near the repeller.
    pub fn holder(&self, model: &Model) -> HolderData {
        let estimate = || match (&self.representation, model.as_map()) {
            (Representation::ClosedForm { expr }, Some(map)) if expr.needs_geometry() => {
                sampled_holder(self, model, map)
            }
            _ => {
                let depth = self.required_depth();
                let n = model.coding().alphabet_size();
                let values: Vec<f64> = (0..n.pow(depth as u32))
                    .map(|c| {
                        let w = crate::symbolic::decode(c as u64, n, depth);
                        self.eval_word(model, &w, 0.5).unwrap_or(0.0)
                    })
                    .collect();
                table_holder(&values, n, depth)
            }
        };
        match (self.holder_alpha, self.holder_seminorm, self.sup_norm) {
            (Some(alpha), Some(seminorm), Some(sup_norm)) => HolderData {
                alpha,
                seminorm,
                sup_norm,
            },
            (a, s, m) => {
                let e = estimate();
                HolderData {
                    alpha: a.unwrap_or(e.alpha),
                    seminorm: s.unwrap_or(e.seminorm),
                    sup_norm: m.unwrap_or(e.sup_norm),
                }
            }
        }
    }

    /// `a·self + b·other`; tables are lifted to a common depth.
    pub fn combine(&self, a: f64, other: &PotentialSpec, b: f64, alphabet: usize) -> PotentialSpec {
        use Representation::*;
        match (&self.representation, &other.representation) {
            (BranchConstant { values: u }, BranchConstant { values: v }) => {
                Self::branch_constant(u.iter().zip(v).map(|(x, y)| a * x + b * y).collect())
            }
            (BranchConstant { .. } | CylinderTable { .. }, BranchConstant { .. } | CylinderTable { .. }) => {
                let depth = self.required_depth().max(other.required_depth());
                let u = self.lifted_table(depth, alphabet);
                let v = other.lifted_table(depth, alphabet);
                Self::cylinder_table(depth, u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect())
            }
            _ => Self::closed_form(Expr::sum(vec![self.as_expr().scaled(a), other.as_expr().scaled(b)])),
        }
    }

    pub fn add(&self, other: &PotentialSpec, alphabet: usize) -> PotentialSpec {
        self.combine(1.0, other, 1.0, alphabet)
    }

    pub fn scale(&self, factor: f64) -> PotentialSpec {
        let mut out = match &self.representation {
            Representation::BranchConstant { values } => {
                Self::branch_constant(values.iter().map(|v| factor * v).collect())
            }
            Representation::CylinderTable { depth, values } => {
                Self::cylinder_table(*depth, values.iter().map(|v| factor * v).collect())
            }
            Representation::ClosedForm { expr } => Self::closed_form(expr.clone().scaled(factor)),
        };
        if let (Some(alpha), Some(s), Some(m)) = (self.holder_alpha, self.holder_seminorm, self.sup_norm) {
            out = out.with_holder(HolderData {
                alpha,
                seminorm: factor.abs() * s,
                sup_norm: factor.abs() * m,
            });
        }
        out
    }

    pub fn plus_constant(&self, c: f64) -> PotentialSpec {
        let mut out = match &self.representation {
            Representation::BranchConstant { values } => Self::branch_constant(values.iter().map(|v| v + c).collect()),
            Representation::CylinderTable { depth, values } => {
                Self::cylinder_table(*depth, values.iter().map(|v| v + c).collect())
            }
            Representation::ClosedForm { expr } => Self::closed_form(Expr::sum(vec![expr.clone(), Expr::constant(c)])),
        };
        if let (Some(alpha), Some(s), Some(m)) = (self.holder_alpha, self.holder_seminorm, self.sup_norm) {
            out = out.with_holder(HolderData {
                alpha,
                seminorm: s,
                sup_norm: m + c.abs(),
            });
        }
        out
    }

    /// Dense table of depth `depth ≥ required_depth()`; symbolic potentials only.
    pub fn lifted_table(&self, depth: usize, alphabet: usize) -> Vec<f64> {
        let size = alphabet.pow(depth as u32);
        match &self.representation {
            Representation::BranchConstant { values } => {
                let stride = alphabet.pow(depth as u32 - 1);
                (0..size).map(|c| values[c / stride]).collect()
            }
            Representation::CylinderTable { depth: d, values } => {
                let stride = alphabet.pow((depth - d) as u32);
                (0..size).map(|c| values[c / stride]).collect()
            }
            Representation::ClosedForm { expr } => (0..size)
                .map(|c| {
                    let w = crate::symbolic::decode(c as u64, alphabet, depth);
                    expr.eval(None, alphabet, 0.5, &w)
                })
                .collect(),
        }
    }

    /// The coboundary `u∘σ - u` of a depth-k table `u`, as a depth-(k+1) table.
    pub fn coboundary_table(alphabet: usize, depth: usize, u: &[f64]) -> PotentialSpec {
        let size = alphabet.pow(depth as u32 + 1);
        let high = alphabet.pow(depth as u32);
        let values = (0..size).map(|c| u[c % high] - u[c / alphabet]).collect();
        Self::cylinder_table(depth + 1, values)
    }
}

/// Coding of the first `len` iterates of `x`, using the nearest branch in gaps.
pub fn point_coding(map: &MapModel, mut x: f64, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let b = map.branch_of(x).unwrap_or_else(|| {
            (0..map.branch_count())
                .min_by(|&i, &j| {
                    let (a1, b1) = map.domain(i);
                    let (a2, b2) = map.domain(j);
                    let d1 = (a1 - x).max(x - b1).max(0.0);
                    let d2 = (a2 - x).max(x - b2).max(0.0);
                    d1.total_cmp(&d2)
                })
                .unwrap_or(0)
        });
        out.push(b as u8);
        x = map.apply(b, x).clamp(0.0, 1.0);
    }
    out
}

fn table_holder(values: &[f64], alphabet: usize, depth: usize) -> HolderData {
    let sup_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut seminorm = 0.0f64;
    for n in 0..depth {
        let block = alphabet.pow((depth - n) as u32);
        let var = values
            .chunks(block)
            .map(|c| {
                let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max);
        seminorm = seminorm.max(var / SYMBOLIC_THETA.powi(n as i32));
    }
    HolderData {
        alpha: 1.0,
        seminorm,
        sup_norm,
    }
}

fn sampled_holder(phi: &PotentialSpec, model: &Model, map: &MapModel) -> HolderData {
    let depth = 8.max(phi.required_depth());
    let Ok(basis) = CylinderBasis::new(map.coding(), depth) else {
        return HolderData {
            alpha: 1.0,
            seminorm: f64::INFINITY,
            sup_norm: f64::INFINITY,
        };
    };
    let intervals = map.cylinder_intervals(&basis).unwrap_or_default();
    let step = (basis.len() / 256).max(1);
    let pts: Vec<(f64, f64)> = (0..basis.len())
        .step_by(step)
        .map(|i| {
            let (lo, hi) = intervals[i];
            let x = 0.5 * (lo + hi);
            (x, phi.eval_word(model, &basis.word(i), x).unwrap_or(0.0))
        })
        .collect();
    let sup_norm = pts.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    let mut seminorm = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            let d = (p.0 - q.0).abs();
            if d > 0.0 {
                seminorm = seminorm.max((p.1 - q.1).abs() / d);
            }
        }
    }
    HolderData {
        alpha: 1.0,
        seminorm,
        sup_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{build_cookie_cutter, build_perturbed_cookie_cutter, geometric_potential};
    use crate::symbolic::SubshiftSpec;
    use proptest::prelude::*;

    fn shift2() -> Model {
        Model::Shift(SubshiftSpec::full_shift(2))
    }

    #[test]
    fn table_lookup_and_depth() {
        let phi = PotentialSpec::cylinder_table(2, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(phi.required_depth(), 2);
        assert_eq!(phi.eval_word(&shift2(), &[1, 0, 1], 0.0).unwrap(), 2.0);
        assert_eq!(
            phi.eval_word(&shift2(), &[1], 0.0),
            Err(Error::NonAdmissiblePotential { needed: 2, depth: 1 })
        );
    }

    #[test]
    fn rejects_wrong_table_size() {
        let phi = PotentialSpec::cylinder_table(2, vec![0.0; 3]);
        assert!(matches!(phi.validate(&shift2()), Err(Error::InvalidPotential(_))));
        let geo = PotentialSpec::closed_form(Expr::X);
        assert!(geo.validate(&shift2()).is_err());
    }

    #[test]
    fn coboundary_table_telescopes() {
        let u = [0.3, -1.0, 2.0];
        let cob = PotentialSpec::coboundary_table(3, 1, &u);
        let m = Model::Shift(SubshiftSpec::full_shift(3));
        let word = [0u8, 2, 1, 1, 0];
        let s: f64 = (0..4).map(|j| cob.eval_word(&m, &word[j..], 0.0).unwrap()).sum();
        assert!((s - (u[0] - u[0])).abs() < 1e-15);
    }

    #[test]
    fn holder_zero_for_constants() {
        let h = PotentialSpec::branch_constant(vec![1.5, 1.5]).holder(&shift2());
        assert_eq!(h.seminorm, 0.0);
        assert_eq!(h.sup_norm, 1.5);
        let h = PotentialSpec::branch_constant(vec![1.0, 0.0]).holder(&shift2());
        assert_eq!(h.seminorm, 1.0);
    }

    #[test]
    fn combine_lifts_tables() {
        let a = PotentialSpec::branch_constant(vec![1.0, 2.0]);
        let b = PotentialSpec::cylinder_table(2, vec![0.0, 0.5, 1.0, 1.5]);
        let c = a.combine(2.0, &b, -1.0, 2);
        match c.representation {
            Representation::CylinderTable { depth, values } => {
                assert_eq!(depth, 2);
                assert_eq!(values, vec![2.0, 1.5, 3.0, 2.5]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn enclosure_contains_midpoint() {
        let map = build_perturbed_cookie_cutter(0.5).unwrap();
        let model = Model::Map(map.clone());
        let phi = PotentialSpec::closed_form(Expr::sum(vec![
            Expr::sin_mode(1.0).after_map(),
            Expr::LogAbsDerivative.scaled(-0.7),
            Expr::X.cos(),
        ]));
        let basis = CylinderBasis::new(map.coding(), 4).unwrap();
        let lo = phi.cylinder_values(&model, &basis, EvalMode::Infimum).unwrap();
        let mid = phi.cylinder_values(&model, &basis, EvalMode::Midpoint).unwrap();
        let hi = phi.cylinder_values(&model, &basis, EvalMode::Supremum).unwrap();
        for i in 0..basis.len() {
            assert!(lo[i] <= mid[i] && mid[i] <= hi[i]);
        }
    }

    #[test]
    fn json_round_trip() {
        let phi = PotentialSpec::closed_form(Expr::sin_mode(1.0).coboundary_of());
        let s = serde_json::to_string(&phi).unwrap();
        let back: PotentialSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(phi, back);
        let t: PotentialSpec =
            serde_json::from_str(r#"{"representation":{"kind":"branch_constant","values":[1,2]},"holder_alpha":1}"#)
                .unwrap();
        assert_eq!(t.branch_values().unwrap(), &[1.0, 2.0]);
        assert!(serde_json::from_str::<PotentialSpec>(
            r#"{"representation":{"kind":"branch_constant","values":[1]},"extra":0}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn geometric_potential_is_linear_in_t(s in -3.0f64..3.0, t in -3.0f64..3.0, x in 0.0f64..1.0) {
            for map in [build_cookie_cutter(), build_perturbed_cookie_cutter(0.5).unwrap()] {
                let model = Model::Map(map.clone());
                let a = geometric_potential(&map, s).eval_point(&model, x).unwrap();
                let b = geometric_potential(&map, t).eval_point(&model, x).unwrap();
                let c = geometric_potential(&map, s + t).eval_point(&model, x).unwrap();
                prop_assert!((a + b - c).abs() <= 1e-13 * (1.0 + c.abs()));
            }
        }

        #[test]
        fn enclosure_brackets_samples(x in 0.0f64..1.0, w in 0.0f64..0.05) {
            let map = build_perturbed_cookie_cutter(0.5).unwrap();
            let e = Expr::sum(vec![Expr::sin_mode(2.0), Expr::X.scaled(3.0).cos()]);
            let (lo, hi) = e.enclose(Some(&map), 2, x, x + w, &[0]);
            for k in 0..=10 {
                let y = x + w * k as f64 / 10.0;
                let v = e.eval(Some(&map), 2, y, &[0]);
                prop_assert!(lo - 1e-12 <= v && v <= hi + 1e-12);
            }
        }
    }
}
