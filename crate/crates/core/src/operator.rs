//! Cylinder discretization of the transfer operator and its Perron eigendata.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::potential::{EvalMode, PotentialSpec};
use crate::symbolic::CylinderBasis;

pub const DEFAULT_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Sparse weighted de Bruijn matrix on depth-k cylinders.
///
/// Edge `w → w[1..]b` carries weight `exp(φ(x_w))`, so every row has a
/// single weight and at most `N` entries. The transfer operator acts as the
/// transpose.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    basis: CylinderBasis,
    mode: EvalMode,
    phi: Vec<f64>,
    weight: Vec<f64>,
    succ_ptr: Vec<usize>,
    succ: Vec<usize>,
    pred_ptr: Vec<usize>,
    pred: Vec<usize>,
}

pub fn discretize(model: &Model, phi: &PotentialSpec, depth: usize, mode: EvalMode) -> Result<TransferMatrix> {
    if depth == 0 {
        return Err(Error::NonAdmissiblePotential {
            needed: phi.required_depth(),
            depth,
        });
    }
    let basis = CylinderBasis::new(model.coding(), depth)?;
    let values = phi.cylinder_values(model, &basis, mode)?;
    TransferMatrix::from_values(basis, values, mode)
}

impl TransferMatrix {
    /// Builds the matrix from one potential value per cylinder of `basis`.
    pub fn from_values(basis: CylinderBasis, phi: Vec<f64>, mode: EvalMode) -> Result<Self> {
        if phi.len() != basis.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} cylinders",
                phi.len(),
                basis.len()
            )));
        }
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential(format!("non-finite value on cylinder {i}")));
        }
        let n = basis.len();
        let mut succ_ptr = Vec::with_capacity(n + 1);
        let mut succ = Vec::with_capacity(2 * n);
        succ_ptr.push(0);
        for i in 0..n {
            succ.extend(basis.successors(i));
            succ_ptr.push(succ.len());
        }
        let mut indegree = vec![0usize; n + 1];
        for &j in &succ {
            indegree[j + 1] += 1;
        }
        for j in 0..n {
            indegree[j + 1] += indegree[j];
        }
        let pred_ptr = indegree.clone();
        let mut fill = indegree;
        let mut pred = vec![0usize; succ.len()];
        for i in 0..n {
            for &j in &succ[succ_ptr[i]..succ_ptr[i + 1]] {
                pred[fill[j]] = i;
                fill[j] += 1;
            }
        }
        let weight = phi.iter().map(|v| v.exp()).collect();
        Ok(TransferMatrix {
            basis,
            mode,
            phi,
            weight,
            succ_ptr,
            succ,
            pred_ptr,
            pred,
        })
    }

    pub fn depth(&self) -> usize {
        self.basis.depth()
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn basis(&self) -> &CylinderBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Potential value on each cylinder.
    pub fn potential(&self) -> &[f64] {
        &self.phi
    }

    /// Weight `exp(φ)` on edges leaving cylinder `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.weight[i]
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[self.succ_ptr[i]..self.succ_ptr[i + 1]]
    }

    pub fn predecessors(&self, j: usize) -> &[usize] {
        &self.pred[self.pred_ptr[j]..self.pred_ptr[j + 1]]
    }

    /// `y = W x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let s: f64 = self.successors(i).iter().map(|&j| x[j]).sum();
            *yi = self.weight[i] * s;
        }
    }

    /// `y = Wᵀ x`.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.predecessors(j).iter().map(|&i| self.weight[i] * x[i]).sum();
        }
    }

    /// Dense copy, for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for &j in self.successors(i) {
                row[j] = self.weight[i];
            }
        }
        m
    }
}

/// Leading eigenvalue with right (`W h = λ h`) and left (`νᵀ W = λ νᵀ`) eigenvectors.
///
/// Normalized so that `Σ ν = 1` and `⟨h, ν⟩ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronTriple {
    pub lambda: f64,
    pub h: Vec<f64>,
    pub nu: Vec<f64>,
    /// Estimate of `|λ₂|/λ`.
    pub gap: f64,
    pub residual: f64,
    pub depth: usize,
    pub mode: EvalMode,
    pub tol: f64,
    pub iterations: usize,
}

impl PerronTriple {
    pub fn pressure(&self) -> f64 {
        self.lambda.ln()
    }
}

fn power_iterate(
    n: usize,
    tol: f64,
    max_iter: usize,
    mut step: impl FnMut(&[f64], &mut [f64]),
) -> Result<(Vec<f64>, f64, usize)> {
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        step(&x, &mut y);
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        if !(sy > 0.0) || !sy.is_finite() {
            return Err(Error::NoConvergence { max_iter: it, residual });
        }
        let lam = sy / sx;
        let xmax = x.iter().cloned().fold(0.0, f64::max);
        residual = x.iter().zip(&y).map(|(a, b)| (b - lam * a).abs()).fold(0.0, f64::max) / (lam * xmax);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / sy;
        }
        if residual <= tol {
            return Ok((x, residual, it));
        }
    }
    Err(Error::NoConvergence { max_iter, residual })
}

pub fn perron(w: &TransferMatrix, tol: f64, max_iter: usize) -> Result<PerronTriple> {
    let n = w.len();
    let (mut h, rh, ih) = power_iterate(n, tol, max_iter, |x, y| w.apply(x, y))?;
    let (mut nu, rn, inu) = power_iterate(n, tol, max_iter, |x, y| w.apply_transpose(x, y))?;
    let mut wh = vec![0.0; n];
    w.apply(&h, &mut wh);
    let lambda = dot(&nu, &wh) / dot(&nu, &h);

    let s: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|v| *v /= s);
    let c = dot(&h, &nu);
    h.iter_mut().for_each(|v| *v /= c);

    let gap = deflated_gap(w, lambda, &h, &nu);
    Ok(PerronTriple {
        lambda,
        h,
        nu,
        gap,
        residual: rh.max(rn),
        depth: w.depth(),
        mode: w.mode(),
        tol,
        iterations: ih.max(inu),
    })
}

/// Leading eigenvalue only, from the right iteration.
pub fn perron_eigenvalue(w: &TransferMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    let n = w.len();
    let (h, _, _) = power_iterate(n, tol, max_iter, |x, y| w.apply(x, y))?;
    let mut wh = vec![0.0; n];
    w.apply(&h, &mut wh);
    Ok(wh.iter().sum::<f64>() / h.iter().sum::<f64>())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Power iteration on `W` restricted to the complement of the Perron direction.
fn deflated_gap(w: &TransferMatrix, lambda: f64, h: &[f64], nu: &[f64]) -> f64 {
    let n = w.len();
    if n == 1 {
        return 0.0;
    }
    // Deterministic non-symmetric start vector.
    let mut x: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5)
        .collect();
    let project = |x: &mut Vec<f64>| {
        let c = dot(nu, x);
        x.iter_mut().zip(h).for_each(|(xi, hi)| *xi -= c * hi);
    };
    project(&mut x);
    let mut norm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if norm == 0.0 {
        return 0.0;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    let mut y = vec![0.0; n];
    let mut logs = Vec::new();
    let mut decay = 0.0f64;
    for _ in 0..2000 {
        w.apply(&x, &mut y);
        std::mem::swap(&mut x, &mut y);
        project(&mut x);
        norm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if norm <= 1e-300 {
            logs.push(f64::NEG_INFINITY);
            break;
        }
        let g = (norm / lambda).ln();
        logs.push(g);
        decay += g;
        x.iter_mut().for_each(|v| *v /= norm);
        if decay < (1e-13f64).ln() {
            break;
        }
    }
    let tail = &logs[logs.len() / 2..];
    if tail.iter().any(|g| g.is_infinite()) {
        return 0.0;
    }
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    mean.exp().min(1.0)
}

/// Equilibrium-state masses `μ[w] ∝ h[w] ν[w]` on depth-k cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsCylinderMeasure {
    pub depth: usize,
    pub masses: Vec<f64>,
    pub pressure: f64,
}

pub fn gibbs_measure(triple: &PerronTriple, w: &TransferMatrix) -> GibbsCylinderMeasure {
    let mut masses: Vec<f64> = triple.h.iter().zip(&triple.nu).map(|(a, b)| a * b).collect();
    let s: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= s);
    GibbsCylinderMeasure {
        depth: w.depth(),
        masses,
        pressure: triple.pressure(),
    }
}

impl GibbsCylinderMeasure {
    pub fn integrate(&self, values: &[f64]) -> f64 {
        dot(&self.masses, values)
    }

    /// Masses of the depth-`d` prefixes, `d ≤ depth`.
    pub fn marginal(&self, basis: &CylinderBasis, d: usize) -> Vec<f64> {
        let n = basis.alphabet() as u64;
        let div = n.pow((basis.depth() - d) as u32);
        let mut out = std::collections::BTreeMap::new();
        for (i, m) in self.masses.iter().enumerate() {
            *out.entry(basis.code(i) / div).or_insert(0.0) += m;
        }
        out.into_values().collect()
    }
}

/// Doob transition probabilities `W[w,w'] h[w'] / (λ h[w])`, aligned with the successor lists.
pub fn doob_transitions(w: &TransferMatrix, triple: &PerronTriple) -> Vec<Vec<f64>> {
    (0..w.len())
        .map(|i| {
            let row: Vec<f64> = w
                .successors(i)
                .iter()
                .map(|&j| w.weight(i) * triple.h[j] / (triple.lambda * triple.h[i]))
                .collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|p| p / s).collect()
        })
        .collect()
}

/// One step of the Doob chain applied to a distribution over cylinders.
pub fn doob_push(w: &TransferMatrix, doob: &[Vec<f64>], p: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, pi) in p.iter().enumerate() {
        if *pi == 0.0 {
            continue;
        }
        for (&j, q) in w.successors(i).iter().zip(&doob[i]) {
            out[j] += pi * q;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    /// Total-variation distance to the Gibbs measure after `n = 1..=n_max` steps.
    pub distances: Vec<f64>,
    /// Geometric decay factor per step fitted to the tail of `distances`.
    pub fitted_rate: f64,
    pub gap: f64,
}

pub fn mixing_rate(w: &TransferMatrix, triple: &PerronTriple, density0: &[f64], n_max: usize) -> Result<MixingReport> {
    if density0.len() != w.len() {
        return Err(Error::InvalidArgument(format!(
            "density has {} entries, basis has {}",
            density0.len(),
            w.len()
        )));
    }
    if density0.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("density must be nonnegative".into()));
    }
    let total: f64 = density0.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("density has zero mass".into()));
    }
    let mu = gibbs_measure(triple, w).masses;
    let doob = doob_transitions(w, triple);
    let mut p: Vec<f64> = density0.iter().map(|v| v / total).collect();
    let mut q = vec![0.0; p.len()];
    let mut distances = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        doob_push(w, &doob, &p, &mut q);
        std::mem::swap(&mut p, &mut q);
        let tv = 0.5 * p.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum::<f64>();
        distances.push(tv);
    }
    Ok(MixingReport {
        fitted_rate: fit_rate(&distances),
        distances,
        gap: triple.gap,
    })
}

/// `exp` of the least-squares slope of `log d_n` over the latter half of points above 1e-13.
fn fit_rate(d: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = d
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 1e-13)
        .map(|(i, v)| ((i + 1) as f64, v.ln()))
        .collect();
    let tail = &pts[pts.len() / 2..];
    if tail.len() < 2 {
        return 0.0;
    }
    let m = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

/// Two-sided Gibbs bound `c₁ ≤ μ[w] / exp(-nP + S_nφ(x_w)) ≤ c₂` at depth `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConstants {
    pub depth: usize,
    pub c1: f64,
    pub c2: f64,
}

pub fn gibbs_constants(model: &Model, phi: &PotentialSpec, depth: usize, tol: f64) -> Result<GibbsConstants> {
    let w = discretize(model, phi, depth.max(phi.required_depth()), EvalMode::Midpoint)?;
    let triple = perron(&w, tol, DEFAULT_MAX_ITER)?;
    let mu = gibbs_measure(&triple, &w);
    let basis = w.basis();
    let p = triple.pressure();
    let r = phi.required_depth();
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for i in 0..basis.len() {
        let word = basis.word(i);
        let n = word.len();
        let (symbols, x) = representative(model, &word, r);
        let s = phi.birkhoff_sum(model, &symbols, x, n)?;
        let ratio = mu.masses[i] / (s - n as f64 * p).exp();
        c1 = c1.min(ratio);
        c2 = c2.max(ratio);
    }
    Ok(GibbsConstants { depth, c1, c2 })
}

/// A word extended by its minimal admissible continuation, with a point coded by it.
pub fn representative(model: &Model, word: &[u8], extra: usize) -> (Vec<u8>, f64) {
    let shift = model.coding();
    let mut symbols = word.to_vec();
    for _ in 0..extra {
        let last = *symbols.last().unwrap_or(&0);
        let b = (0..shift.alphabet_size() as u8)
            .find(|&b| shift.allowed(last, b))
            .unwrap_or(0);
        symbols.push(b);
    }
    let x = model.as_map().map_or(0.5, |m| {
        let (a, b) = m.domain(*symbols.last().unwrap_or(&0) as usize);
        m.point_from_coding(&symbols, 0.5 * (a + b))
    });
    (symbols, x)
}
