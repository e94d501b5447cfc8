//! Discrete D-vines on binary sign sequences.
//!
//! The joint pmf is computed with the pi-matrix recursion for discrete
//! D-vines (Panagiotelis, Czado and Joe 2012). Entry `pi[t][j]` holds
//! `f_{(j-t+1):j}`, the probability of the block of `t + 1` consecutive signs
//! ending at `j` (0-based), so the last diagonal entry is the joint pmf.

use rand::Rng;

use crate::copula::{BivariateCopula, CdfPair, CornerValues, PROB_FLOOR};
use crate::error::{domain, Error, Result};

/// Triangular D-vine array. Column `t` lists the partners of variable `t` in
/// tree order, `(t-1, t-2, ..., 1)`, followed by `t` itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VineArray {
    columns: Vec<Vec<usize>>,
}

/// The D-vine array for `n` variables (1-based labels).
pub fn dvine_array(n: usize) -> Result<VineArray> {
    if n == 0 {
        return domain("a vine needs at least one variable");
    }
    let columns = (1..=n)
        .map(|t| (1..t).rev().chain(std::iter::once(t)).collect())
        .collect();
    Ok(VineArray { columns })
}

impl VineArray {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Column `t` (1-based).
    pub fn column(&self, t: usize) -> &[usize] {
        &self.columns[t - 1]
    }

    /// Entry sigma_{l t} (1-based row and column).
    pub fn entry(&self, l: usize, t: usize) -> usize {
        self.columns[t - 1][l - 1]
    }

    /// Each column must hold a permutation of `1..t` above the diagonal `t`.
    pub fn is_valid(&self) -> bool {
        self.columns.iter().enumerate().all(|(i, col)| {
            let t = i + 1;
            if col.len() != t || col[t - 1] != t {
                return false;
            }
            let mut seen = vec![false; t];
            col[..t - 1]
                .iter()
                .all(|&v| (1..t).contains(&v) && !std::mem::replace(&mut seen[v], true))
        })
    }
}

/// A D-vine on `T` binary signs with Bernoulli margins and one copula per
/// tree (stationary pair-copulas).
#[derive(Clone, Debug, PartialEq)]
pub struct VineSpec {
    array: VineArray,
    margins: Vec<f64>,
    trees: Vec<BivariateCopula>,
    truncation: usize,
}

impl VineSpec {
    /// `margins[t]` is `P[s_t = 1]`; `trees[l]` is the copula of tree `l + 1`.
    /// Trees beyond `trees.len()` are independence copulas.
    pub fn new(margins: Vec<f64>, trees: Vec<BivariateCopula>) -> Result<Self> {
        let n = margins.len();
        if n == 0 {
            return domain("vine needs at least one margin");
        }
        if trees.len() > n.saturating_sub(1) {
            return domain(format!("{} trees supplied for {n} variables", trees.len()));
        }
        let mut clamped = Vec::with_capacity(n);
        for (t, &p) in margins.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return domain(format!("margin {} out of [0,1]: {p}", t + 1));
            }
            clamped.push(p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR));
        }
        let truncation = trees.len().max(1).min(n.saturating_sub(1));
        let mut trees = trees;
        trees.resize(n.saturating_sub(1), BivariateCopula::independence());
        Ok(VineSpec {
            array: dvine_array(n)?,
            margins: clamped,
            trees,
            truncation,
        })
    }

    /// All-independence vine with the given margins.
    pub fn independent(margins: Vec<f64>) -> Result<Self> {
        VineSpec::new(margins, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.margins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.margins.is_empty()
    }

    pub fn array(&self) -> &VineArray {
        &self.array
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Copula of tree `l` (1-based).
    pub fn tree(&self, l: usize) -> &BivariateCopula {
        &self.trees[l - 1]
    }

    /// Copulas of trees `1..=truncation`.
    pub fn tree_copulas(&self) -> &[BivariateCopula] {
        &self.trees[..self.truncation.min(self.trees.len())]
    }

    /// Number of leading trees that are not independence.
    pub fn effective_depth(&self) -> usize {
        self.tree_copulas()
            .iter()
            .rposition(|c| !c.is_independence())
            .map_or(0, |i| i + 1)
    }

    /// Same trees, new margins.
    pub fn with_margins(&self, margins: Vec<f64>) -> Result<Self> {
        VineSpec::new(margins, self.tree_copulas().to_vec())
    }

    pub fn joint_pmf(&self, signs: &[bool]) -> Result<f64> {
        PmfWorkspace::new().joint_pmf(self, signs)
    }

    pub fn log_pmf(&self, signs: &[bool]) -> Result<f64> {
        PmfWorkspace::new().log_pmf(self, signs)
    }
}

/// Replaces the copulas of trees beyond `p` with independence.
pub fn truncate(spec: &VineSpec, p: usize) -> Result<VineSpec> {
    let n = spec.len();
    if p == 0 || p + 1 > n {
        return domain(format!(
            "truncation {p} outside [1, {}]",
            n.saturating_sub(1)
        ));
    }
    VineSpec::new(spec.margins.clone(), spec.trees[..p].to_vec())
}

/// Discrete pair-copula density `rectangle / (f_t f_j)`, floored at 1e-12.
pub fn discrete_pair_density(corners: &CornerValues, f_t: f64, f_j: f64) -> Result<f64> {
    let mass = corners.mass()?;
    let denom = f_t.max(PROB_FLOOR) * f_j.max(PROB_FLOOR);
    Ok((mass / denom).max(PROB_FLOOR))
}

/// Scratch space for the pi-matrix recursion. Reusing one workspace across
/// evaluations avoids reallocating in Monte Carlo loops.
#[derive(Clone, Debug, Default)]
pub struct PmfWorkspace {
    n: usize,
    pi: Vec<f64>,
    cpp: Vec<f64>,
    cpm: Vec<f64>,
    cmp: Vec<f64>,
    cmm: Vec<f64>,
    up_prime_p: Vec<f64>,
    up_prime_m: Vec<f64>,
    up_p: Vec<f64>,
    up_m: Vec<f64>,
    u_prime: Vec<f64>,
    u: Vec<f64>,
    w_prime: Vec<f64>,
    w: Vec<f64>,
    fp: Vec<f64>,
    fm: Vec<f64>,
    null_bound: Option<f64>,
    rectangle_calls: usize,
}

impl PmfWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of four-corner copula evaluations since construction.
    pub fn rectangle_calls(&self) -> usize {
        self.rectangle_calls
    }

    /// `pi[t][j]` after the last evaluation (0-based).
    pub fn pi(&self, t: usize, j: usize) -> f64 {
        self.pi[t * self.n + j]
    }

    /// `f_{j | 1..j-1}` for the last evaluation (0-based `j`).
    pub fn conditional(&self, j: usize) -> f64 {
        self.u[j]
    }

    /// Set when the last evaluation hit a block whose conditional mass fell
    /// below the probability floor. The sign vector then has probability at
    /// most the returned block probability (itself below 1e-12) and is
    /// treated as a null event.
    pub fn null_bound(&self) -> Option<f64> {
        self.null_bound
    }

    pub fn joint_pmf(&mut self, spec: &VineSpec, signs: &[bool]) -> Result<f64> {
        self.run(spec.margins(), spec.tree_copulas(), signs)?;
        if self.null_bound.is_some() {
            return Ok(0.0);
        }
        let n = self.n;
        Ok(self.pi(n - 1, n - 1))
    }

    /// Log joint pmf accumulated from the conditional factors, which stays
    /// finite when the pmf itself would underflow. Null events get the log of
    /// their probability bound.
    pub fn log_pmf(&mut self, spec: &VineSpec, signs: &[bool]) -> Result<f64> {
        self.run(spec.margins(), spec.tree_copulas(), signs)?;
        if let Some(bound) = self.null_bound {
            return Ok(bound.max(f64::MIN_POSITIVE).ln());
        }
        Ok(self.u.iter().map(|&f| f.max(PROB_FLOOR).ln()).sum())
    }

    /// Cell bounds fed to tree `trees.len() + 1` for every window of the
    /// sign vector, with the given lower trees held fixed. `None` when a lower
    /// tree already makes the sign vector a null event.
    pub fn tree_inputs(
        &mut self,
        margins: &[f64],
        trees: &[BivariateCopula],
        signs: &[bool],
    ) -> Result<Option<Vec<(CdfPair, CdfPair)>>> {
        let l = trees.len() + 1;
        let n = margins.len();
        if l >= n.max(1) {
            return domain(format!("tree {l} does not exist for {n} variables"));
        }
        self.run(margins, trees, signs)?;
        if self.null_bound.is_some() {
            return Ok(None);
        }
        let pairs = if l == 1 {
            (1..n)
                .map(|j| {
                    (
                        CdfPair::new(self.fp[j - 1], self.fm[j - 1]),
                        CdfPair::new(self.fp[j], self.fm[j]),
                    )
                })
                .collect()
        } else {
            (l..n)
                .map(|j| {
                    (
                        CdfPair::new(self.up_prime_p[j - 1], self.up_prime_m[j - 1]),
                        CdfPair::new(self.up_p[j], self.up_m[j]),
                    )
                })
                .collect()
        };
        Ok(Some(pairs))
    }

    fn resize(&mut self, n: usize) {
        self.n = n;
        self.pi.clear();
        self.pi.resize(n * n, 0.0);
        for v in [
            &mut self.cpp,
            &mut self.cpm,
            &mut self.cmp,
            &mut self.cmm,
            &mut self.up_prime_p,
            &mut self.up_prime_m,
            &mut self.up_p,
            &mut self.up_m,
            &mut self.u_prime,
            &mut self.u,
            &mut self.w_prime,
            &mut self.w,
            &mut self.fp,
            &mut self.fm,
        ] {
            v.clear();
            v.resize(n, 0.0);
        }
    }

    fn corners(&mut self, c: &BivariateCopula, a: CdfPair, b: CdfPair, j: usize) -> Result<()> {
        self.rectangle_calls += 1;
        let (k, _) = c.rectangle(a, b)?;
        self.cpp[j] = k.cpp;
        self.cpm[j] = k.cpm;
        self.cmp[j] = k.cmp;
        self.cmm[j] = k.cmm;
        Ok(())
    }

    /// Runs the recursion on `margins` / `signs` with `trees[l]` the copula of
    /// tree `l + 1`. Trees past the end of the slice are independence; they
    /// leave `f_{j|...}` unchanged and cost no copula calls.
    pub(crate) fn run(
        &mut self,
        margins: &[f64],
        trees: &[BivariateCopula],
        signs: &[bool],
    ) -> Result<()> {
        let n = margins.len();
        if n == 0 || signs.len() != n {
            return domain(format!(
                "sign vector length {} does not match {n} margins",
                signs.len()
            ));
        }
        self.resize(n);
        self.null_bound = None;

        // marginal cdf pairs; `u` doubles as f_{j|1..j-1} once complete
        for j in 0..n {
            let pair = CdfPair::bernoulli(margins[j], signs[j]);
            self.fp[j] = pair.plus;
            self.fm[j] = pair.minus;
            self.pi[j] = pair.mass();
        }
        self.u[0] = self.pi[0];
        if n == 1 {
            return Ok(());
        }

        // tree 1
        let c1 = trees
            .first()
            .copied()
            .unwrap_or(BivariateCopula::independence());
        for j in 1..n {
            let prev = CdfPair::new(self.fp[j - 1], self.fm[j - 1]);
            let cur = CdfPair::new(self.fp[j], self.fm[j]);
            self.corners(&c1, prev, cur, j)?;
            self.pi[n + j] = CornerValues {
                cpp: self.cpp[j],
                cpm: self.cpm[j],
                cmp: self.cmp[j],
                cmm: self.cmm[j],
            }
            .mass()?;
            // margins are clamped, so tree 1 never divides by less than the floor
            self.update(j, cur.mass(), prev.mass());
        }

        // trees 2 .. n-1
        for t in 2..n {
            let Some(c) = trees.get(t - 1) else {
                // every remaining tree is independence
                for tt in t..n {
                    for j in tt..n {
                        self.pi[tt * n + j] = self.pi[(tt - 1) * n + j - 1] * self.u[j];
                    }
                }
                return Ok(());
            };
            for j in t..n {
                let a = CdfPair::new(self.up_prime_p[j - 1], self.up_prime_m[j - 1]);
                let b = CdfPair::new(self.up_p[j], self.up_m[j]);
                self.corners(c, a, b, j)?;
            }
            for j in (t - 1)..n {
                self.w_prime[j] = self.u_prime[j];
                self.w[j] = self.u[j];
            }
            for j in t..n {
                if self.w[j] < PROB_FLOOR {
                    self.null_bound = Some(self.pi[(t - 1) * n + j]);
                    return Ok(());
                }
                if self.w_prime[j - 1] < PROB_FLOOR {
                    self.null_bound = Some(self.pi[(t - 1) * n + j - 1]);
                    return Ok(());
                }
                self.update(j, self.w[j], self.w_prime[j - 1]);
            }
            for j in t..n {
                self.pi[t * n + j] = self.pi[(t - 1) * n + j - 1] * self.u[j];
            }
        }
        Ok(())
    }

    // Conditional cdfs of the two ends of the current block given its
    // interior, from the corner values stored at `j`.
    fn update(&mut self, j: usize, w: f64, w_prime_prev: f64) {
        let (cpp, cpm, cmp, cmm) = (self.cpp[j], self.cpm[j], self.cmp[j], self.cmm[j]);

        let hi = ((cpp - cpm) / w).clamp(0.0, 1.0);
        let lo = ((cmp - cmm) / w).clamp(0.0, hi);
        self.up_prime_p[j] = hi;
        self.up_prime_m[j] = lo;
        self.u_prime[j] = hi - lo;

        let hi = ((cpp - cmp) / w_prime_prev).clamp(0.0, 1.0);
        let lo = ((cpm - cmm) / w_prime_prev).clamp(0.0, hi);
        self.up_p[j] = hi;
        self.up_m[j] = lo;
        self.u[j] = hi - lo;
    }
}

/// `P[s_t = 1 | s_1..s_{t-1}]` for 1-based `t`.
pub fn conditional_sign_prob(spec: &VineSpec, prefix: &[bool], t: usize) -> Result<f64> {
    if t == 0 || t > spec.len() || prefix.len() != t - 1 {
        return domain(format!(
            "conditional at t={t} needs a prefix of length {}",
            t.saturating_sub(1)
        ));
    }
    let depth = spec.tree_copulas().len().min(t - 1);
    let trees = &spec.tree_copulas()[..depth];
    let mut ws = PmfWorkspace::new();
    let mut signs = prefix.to_vec();
    signs.push(true);
    ws.run(&spec.margins[..t], trees, &signs)?;
    let one = ws.null_bound.is_none().then(|| ws.conditional(t - 1));
    signs[t - 1] = false;
    ws.run(&spec.margins[..t], trees, &signs)?;
    let zero = ws.null_bound.is_none().then(|| ws.conditional(t - 1));
    match (one, zero) {
        (Some(p), _) => Ok(p),
        (None, Some(_)) => Ok(0.0),
        (None, None) => Err(Error::DegenerateConditional {
            index: t,
            value: ws.null_bound.unwrap_or(0.0),
        }),
    }
}

/// Conditional sign probabilities of a truncated vine, tabulated by history.
///
/// In a vine truncated at depth `p` the conditional law of `s_t` depends only
/// on the `p` preceding signs, so the log pmf of any sign vector is a sum of
/// `T` table lookups.
#[derive(Clone, Debug)]
pub struct SignLikelihoodTable {
    depth: usize,
    // per t: 2^min(t,depth) histories x {log P[s_t=0|h], log P[s_t=1|h]}
    log_cond: Vec<Vec<[f64; 2]>>,
    prob_one: Vec<Vec<f64>>,
}

/// Largest truncation depth tabulated.
pub const MAX_TABLE_DEPTH: usize = 16;

impl SignLikelihoodTable {
    pub fn new(spec: &VineSpec) -> Result<Self> {
        let depth = spec.effective_depth();
        if depth > MAX_TABLE_DEPTH {
            return domain(format!("truncation depth {depth} too large to tabulate"));
        }
        let trees = &spec.tree_copulas()[..depth];
        let n = spec.len();
        let mut ws = PmfWorkspace::new();
        let mut log_cond = Vec::with_capacity(n);
        let mut prob_one = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(depth + 1);
        for t in 0..n {
            let h = t.min(depth);
            let window = &spec.margins[t - h..=t];
            let mut rows = Vec::with_capacity(1 << h);
            let mut ones = Vec::with_capacity(1 << h);
            for code in 0..(1usize << h) {
                signs.clear();
                // bit i of `code` is the sign i+1 steps back
                signs.extend((0..h).rev().map(|i| code >> i & 1 == 1));
                signs.push(false);
                let cond = |ws: &mut PmfWorkspace, signs: &[bool]| -> Result<f64> {
                    ws.run(window, &trees[..h], signs)?;
                    Ok(ws.null_bound.map_or(ws.conditional(h), |_| 0.0))
                };
                let f0 = cond(&mut ws, &signs)?;
                signs[h] = true;
                let f1 = cond(&mut ws, &signs)?;
                rows.push([f0.max(PROB_FLOOR).ln(), f1.max(PROB_FLOOR).ln()]);
                // an impossible history never occurs in a sample
                ones.push(if f0 + f1 > 0.0 { f1 / (f0 + f1) } else { 0.5 });
            }
            log_cond.push(rows);
            prob_one.push(ones);
        }
        Ok(SignLikelihoodTable {
            depth,
            log_cond,
            prob_one,
        })
    }

    pub fn len(&self) -> usize {
        self.log_cond.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_cond.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn log_pmf(&self, signs: &[bool]) -> f64 {
        debug_assert_eq!(signs.len(), self.len());
        let mask = (1usize << self.depth) - 1;
        let mut code = 0usize;
        let mut acc = 0.0;
        for (t, &s) in signs.iter().enumerate() {
            let h = t.min(self.depth);
            acc += self.log_cond[t][code & ((1 << h) - 1)][s as usize];
            code = ((code << 1) | s as usize) & mask;
        }
        acc
    }

    /// Draws a sign vector from the vine.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let mask = (1usize << self.depth) - 1;
        let mut code = 0usize;
        let mut out = Vec::with_capacity(self.len());
        for t in 0..self.len() {
            let h = t.min(self.depth);
            let p = self.prob_one[t][code & ((1 << h) - 1)];
            let s = rng.random::<f64>() < p;
            out.push(s);
            code = ((code << 1) | s as usize) & mask;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn array_small_cases() {
        let a = dvine_array(3).unwrap();
        assert_eq!(a.column(1), &[1]);
        assert_eq!(a.column(2), &[1, 2]);
        assert_eq!(a.column(3), &[2, 1, 3]);
        assert_eq!(dvine_array(1).unwrap().column(1), &[1]);
        assert!(dvine_array(0).is_err());
        let a6 = dvine_array(6).unwrap();
        assert!(a6.is_valid());
        // first row 1,1,2,3,4,5
        let row1: Vec<_> = (2..=6).map(|t| a6.entry(1, t)).collect();
        assert_eq!(row1, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn single_variable_pmf_is_margin() {
        let spec = VineSpec::independent(vec![0.3]).unwrap();
        assert!((spec.joint_pmf(&[true]).unwrap() - 0.3).abs() < 1e-15);
        assert!((spec.joint_pmf(&[false]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn pair_density_examples() {
        let half = CdfPair::bernoulli(0.5, true);
        let ind = BivariateCopula::independence();
        let (k, _) = ind.rectangle(half, half).unwrap();
        assert!((discrete_pair_density(&k, 0.5, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let g = BivariateCopula::gaussian(0.5).unwrap();
        let (k, _) = g.rectangle(half, half).unwrap();
        assert!((discrete_pair_density(&k, 0.5, 0.5).unwrap() - 4.0 / 3.0).abs() < 1e-13);
        let flat = CdfPair::new(0.4, 0.4);
        let (k, _) = g.rectangle(flat, half).unwrap();
        assert_eq!(discrete_pair_density(&k, 0.5, 0.5).unwrap(), 1e-12);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let spec = VineSpec::independent(vec![0.5; 3]).unwrap();
        assert!(spec.joint_pmf(&[true, false]).is_err());
        assert!(VineSpec::new(vec![0.5; 2], vec![BivariateCopula::independence(); 2]).is_err());
        assert!(truncate(&spec, 3).is_err());
        assert!(truncate(&spec, 0).is_err());
    }
}
