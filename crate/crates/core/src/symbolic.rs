//! Subshifts of finite type: admissible words, cylinder bases, periodic orbits
//! and primitivity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest word length handled by the cylinder enumerators.
pub const MAX_WORD_DEPTH: usize = 24;

/// A one-sided subshift of finite type on the alphabet `{0, .., N-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawShift", into = "RawShift")]
pub struct SubshiftSpec {
    alphabet_size: usize,
    transition: Vec<Vec<u8>>,
    mixing_time: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShift {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<u8>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
}

impl TryFrom<RawShift> for SubshiftSpec {
    type Error = Error;

    fn try_from(raw: RawShift) -> Result<Self> {
        let shift = SubshiftSpec::new(raw.a)?;
        if shift.alphabet_size != raw.n {
            return Err(Error::InvalidShift(format!(
                "N = {} but A has {} rows",
                raw.n, shift.alphabet_size
            )));
        }
        match raw.m {
            Some(m) => shift.with_mixing_time(m),
            None => Ok(shift),
        }
    }
}

impl From<SubshiftSpec> for RawShift {
    fn from(s: SubshiftSpec) -> Self {
        RawShift {
            n: s.alphabet_size,
            a: s.transition,
            m: s.mixing_time,
        }
    }
}

impl SubshiftSpec {
    pub fn new(transition: Vec<Vec<u8>>) -> Result<Self> {
        let n = transition.len();
        if n < 2 {
            return Err(Error::InvalidShift("alphabet size must be at least 2".into()));
        }
        if n > u8::MAX as usize {
            return Err(Error::InvalidShift("alphabet size must fit in a byte".into()));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidShift(format!("row {i} has length {}", row.len())));
            }
            if row.iter().any(|&v| v > 1) {
                return Err(Error::InvalidShift(format!("row {i} has entries outside {{0,1}}")));
            }
            if row.iter().all(|&v| v == 0) {
                return Err(Error::InvalidShift(format!("symbol {i} has no successor")));
            }
        }
        for j in 0..n {
            if transition.iter().all(|row| row[j] == 0) {
                return Err(Error::InvalidShift(format!("symbol {j} has no predecessor")));
            }
        }
        Ok(SubshiftSpec {
            alphabet_size: n,
            transition,
            mixing_time: None,
        })
    }

    /// Attaches a declared mixing time, checking that `A^m` is strictly positive.
    pub fn with_mixing_time(mut self, m: usize) -> Result<Self> {
        if m == 0 || !self.power_positive(m) {
            return Err(Error::InvalidShift(format!("A^{m} is not strictly positive")));
        }
        self.mixing_time = Some(m);
        Ok(self)
    }

    pub fn full_shift(n: usize) -> Self {
        SubshiftSpec::new(vec![vec![1; n]; n])
            .expect("full shift is valid")
            .with_mixing_time(1)
            .expect("full shift mixes in one step")
    }

    /// The golden-mean shift: the word `11` is forbidden.
    pub fn golden_mean() -> Self {
        SubshiftSpec::new(vec![vec![1, 1], vec![1, 0]]).expect("golden mean shift is valid")
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn transition(&self) -> &[Vec<u8>] {
        &self.transition
    }

    pub fn declared_mixing_time(&self) -> Option<usize> {
        self.mixing_time
    }

    #[inline]
    pub fn allowed(&self, a: u8, b: u8) -> bool {
        self.transition[a as usize][b as usize] == 1
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.alphabet_size;
        (0..n).all(|i| (0..n).all(|j| self.transition[i][j] == self.transition[j][i]))
    }

    pub fn is_full(&self) -> bool {
        self.transition.iter().all(|r| r.iter().all(|&v| v == 1))
    }

    pub fn is_admissible(&self, symbols: &[u8]) -> bool {
        symbols.iter().all(|&s| (s as usize) < self.alphabet_size)
            && symbols.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    /// Integer matrix power `A^p` (entries may grow, u128 keeps exactness for p <= 40 on small alphabets).
    pub fn matrix_power(&self, p: usize) -> Vec<Vec<u128>> {
        let n = self.alphabet_size;
        let mut acc: Vec<Vec<u128>> = (0..n).map(|i| (0..n).map(|j| u128::from(i == j)).collect()).collect();
        for _ in 0..p {
            let mut next = vec![vec![0u128; n]; n];
            for i in 0..n {
                for k in 0..n {
                    if acc[i][k] == 0 {
                        continue;
                    }
                    for j in 0..n {
                        if self.transition[k][j] == 1 {
                            next[i][j] += acc[i][k];
                        }
                    }
                }
            }
            acc = next;
        }
        acc
    }

    pub fn trace_power(&self, p: usize) -> u128 {
        let m = self.matrix_power(p);
        (0..self.alphabet_size).map(|i| m[i][i]).sum()
    }

    fn power_positive(&self, p: usize) -> bool {
        let n = self.alphabet_size;
        let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
        for _ in 0..p {
            reach = step_reach(&reach, &self.transition);
        }
        reach.iter().all(|r| r.iter().all(|&b| b))
    }

    /// Perron root of the 0/1 transition matrix; `log` of it is the topological entropy.
    pub fn perron_root(&self) -> f64 {
        let n = self.alphabet_size;
        let mut v = vec![1.0; n];
        let mut lambda = 0.0;
        // Averaging with the identity removes periodicity without moving the Perron vector.
        for _ in 0..10_000 {
            let mut w = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    if self.transition[i][j] == 1 {
                        w[i] += v[j];
                    }
                }
                w[i] = 0.5 * (w[i] + v[i]);
            }
            let norm = w.iter().cloned().fold(0.0, f64::max);
            w.iter_mut().for_each(|x| *x /= norm);
            let next = 2.0 * norm - 1.0;
            let done = (next - lambda).abs() <= 1e-15 * next.abs();
            lambda = next;
            v = w;
            if done {
                break;
            }
        }
        lambda
    }

    pub fn topological_entropy(&self) -> f64 {
        self.perron_root().ln()
    }
}

fn step_reach(reach: &[Vec<bool>], a: &[Vec<u8>]) -> Vec<Vec<bool>> {
    let n = a.len();
    let mut next = vec![vec![false; n]; n];
    for i in 0..n {
        for k in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if a[k][j] == 1 {
                        next[i][j] = true;
                    }
                }
            }
        }
    }
    next
}

/// A finite word together with its admissibility certificate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    pub symbols: Vec<u8>,
    pub admissible: bool,
}

impl Word {
    pub fn new(shift: &SubshiftSpec, symbols: Vec<u8>) -> Self {
        let admissible = shift.is_admissible(&symbols);
        Word { symbols, admissible }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.symbols.is_empty() {
            return f.write_str("ε");
        }
        if self.symbols.iter().all(|&s| s < 10) {
            for s in &self.symbols {
                write!(f, "{s}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.symbols.iter().map(|s| s.to_string()).collect();
            f.write_str(&parts.join("."))
        }
    }
}

/// Lexicographically ordered admissible words of length `depth`.
pub fn cylinders(shift: &SubshiftSpec, depth: usize) -> Result<Vec<Word>> {
    let basis = CylinderBasis::new(shift, depth)?;
    Ok((0..basis.len())
        .map(|i| Word {
            symbols: basis.word(i),
            admissible: true,
        })
        .collect())
}

/// Admissible depth-k words encoded as base-N integers, sorted.
///
/// Lexicographic order on words coincides with numeric order on codes, so
/// lookups are binary searches.
#[derive(Debug, Clone)]
pub struct CylinderBasis {
    depth: usize,
    alphabet: usize,
    codes: Vec<u64>,
    transition: Vec<Vec<u8>>,
}

impl CylinderBasis {
    pub fn new(shift: &SubshiftSpec, depth: usize) -> Result<Self> {
        if depth > MAX_WORD_DEPTH {
            return Err(Error::DepthCap {
                depth,
                cap: MAX_WORD_DEPTH,
            });
        }
        let n = shift.alphabet_size() as u64;
        let mut codes: Vec<u64> = vec![0];
        let mut last: Vec<u8> = vec![0];
        if depth > 0 {
            codes = (0..n).collect();
            last = (0..n as u8).collect();
            for _ in 1..depth {
                let mut next_codes = Vec::with_capacity(codes.len() * 2);
                let mut next_last = Vec::with_capacity(codes.len() * 2);
                for (&c, &l) in codes.iter().zip(&last) {
                    for b in 0..n as u8 {
                        if shift.allowed(l, b) {
                            next_codes.push(c * n + b as u64);
                            next_last.push(b);
                        }
                    }
                }
                if next_codes.len() > 1 << 24 {
                    return Err(Error::DepthCap {
                        depth,
                        cap: MAX_WORD_DEPTH,
                    });
                }
                codes = next_codes;
                last = next_last;
            }
        }
        Ok(CylinderBasis {
            depth,
            alphabet: n as usize,
            codes,
            transition: shift.transition().to_vec(),
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, i: usize) -> u64 {
        self.codes[i]
    }

    pub fn index_of(&self, code: u64) -> Option<usize> {
        self.codes.binary_search(&code).ok()
    }

    pub fn index_of_word(&self, symbols: &[u8]) -> Option<usize> {
        if symbols.len() != self.depth {
            return None;
        }
        self.index_of(encode(symbols, self.alphabet))
    }

    pub fn word(&self, i: usize) -> Vec<u8> {
        decode(self.codes[i], self.alphabet, self.depth)
    }

    pub fn first_symbol(&self, i: usize) -> u8 {
        if self.depth == 0 {
            return 0;
        }
        (self.codes[i] / (self.alphabet as u64).pow(self.depth as u32 - 1)) as u8
    }

    pub fn last_symbol(&self, i: usize) -> u8 {
        (self.codes[i] % self.alphabet as u64) as u8
    }

    /// Indices of `w[1..] b` for every admissible symbol `b`.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.alphabet as u64;
        let high = n.pow(self.depth.saturating_sub(1) as u32);
        let base = (self.codes[i] % high) * n;
        let last = self.last_symbol(i) as usize;
        (0..n)
            .filter(move |&b| self.depth == 0 || self.transition[last][b as usize] == 1)
            .filter_map(move |b| self.index_of(base + b))
    }

    /// Index of the depth-(k-1) word `w[1..]` in `shorter`.
    pub fn shift_index(&self, i: usize, shorter: &CylinderBasis) -> usize {
        debug_assert_eq!(shorter.depth + 1, self.depth);
        let high = (self.alphabet as u64).pow(self.depth as u32 - 1);
        shorter
            .index_of(self.codes[i] % high)
            .expect("suffix of an admissible word is admissible")
    }

    /// Index of the prefix `w[..k-1]` in `shorter`.
    pub fn prefix_index(&self, i: usize, shorter: &CylinderBasis) -> usize {
        debug_assert_eq!(shorter.depth + 1, self.depth);
        shorter
            .index_of(self.codes[i] / self.alphabet as u64)
            .expect("prefix of an admissible word is admissible")
    }
}

pub fn encode(symbols: &[u8], alphabet: usize) -> u64 {
    symbols.iter().fold(0u64, |acc, &s| acc * alphabet as u64 + s as u64)
}

pub fn decode(mut code: u64, alphabet: usize, depth: usize) -> Vec<u8> {
    let mut out = vec![0u8; depth];
    for slot in out.iter_mut().rev() {
        *slot = (code % alphabet as u64) as u8;
        code /= alphabet as u64;
    }
    out
}

/// A periodic orbit of the shift, stored by its lexicographically minimal rotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub word: Word,
    pub period: usize,
    pub primitive: bool,
    /// Least period; the orbit consists of this many distinct points.
    pub least_period: usize,
}

impl PeriodicOrbit {
    pub fn symbols(&self) -> &[u8] {
        &self.word.symbols
    }

    pub fn point_count(&self) -> usize {
        self.least_period
    }
}

/// Periodic orbits of period `n` (points with `σ^n x = x`).
///
/// With `primitive_only = false` the orbits of every least period dividing
/// `n` are returned, each written as a length-`n` word.
pub fn periodic_orbits(shift: &SubshiftSpec, n: usize, primitive_only: bool) -> Result<Vec<PeriodicOrbit>> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    if n > MAX_WORD_DEPTH {
        return Err(Error::DepthCap {
            depth: n,
            cap: MAX_WORD_DEPTH,
        });
    }
    let mut out = Vec::new();
    let mut word = Vec::with_capacity(n);
    enumerate_cycles(shift, n, &mut word, &mut |w: &[u8]| {
        if !is_min_rotation(w) {
            return;
        }
        let least = least_period(w);
        let primitive = least == n;
        if primitive_only && !primitive {
            return;
        }
        out.push(PeriodicOrbit {
            word: Word {
                symbols: w.to_vec(),
                admissible: true,
            },
            period: n,
            primitive,
            least_period: least,
        });
    });
    Ok(out)
}

fn enumerate_cycles(shift: &SubshiftSpec, n: usize, word: &mut Vec<u8>, visit: &mut dyn FnMut(&[u8])) {
    if word.len() == n {
        if shift.allowed(word[n - 1], word[0]) {
            visit(word);
        }
        return;
    }
    for b in 0..shift.alphabet_size() as u8 {
        if let Some(&last) = word.last() {
            if !shift.allowed(last, b) {
                continue;
            }
        }
        // A minimal rotation never starts with a symbol larger than any later one,
        // so words beginning above the current first symbol can be pruned.
        if let Some(&first) = word.first() {
            if b < first {
                continue;
            }
        }
        word.push(b);
        enumerate_cycles(shift, n, word, visit);
        word.pop();
    }
}

pub fn is_min_rotation(w: &[u8]) -> bool {
    let n = w.len();
    (1..n).all(|r| {
        for i in 0..n {
            let a = w[i];
            let b = w[(i + r) % n];
            if a != b {
                return a < b;
            }
        }
        true
    })
}

pub fn least_period(w: &[u8]) -> usize {
    let n = w.len();
    (1..=n)
        .find(|&d| n.is_multiple_of(d) && (0..n).all(|i| w[i] == w[i % d]))
        .unwrap_or(n)
}

pub fn canonical_rotation(w: &[u8]) -> Vec<u8> {
    let n = w.len();
    (0..n.max(1))
        .map(|r| {
            let mut v = w[r..].to_vec();
            v.extend_from_slice(&w[..r]);
            v
        })
        .min()
        .unwrap_or_default()
}

/// Least `M` with `A^M` strictly positive, searched up to `N^2`.
pub fn mixing_time(shift: &SubshiftSpec) -> Result<usize> {
    let n = shift.alphabet_size();
    let bound = n * n;
    let mut reach: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j).collect()).collect();
    for m in 1..=bound {
        reach = step_reach(&reach, shift.transition());
        if reach.iter().all(|r| r.iter().all(|&b| b)) {
            return Ok(m);
        }
    }
    Err(Error::NotMixing { bound })
}
