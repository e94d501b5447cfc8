#![allow(dead_code)]

use rand::Rng;
use vinesign::copula::{BivariateCopula, CdfPair};

/// Joint pmf of a D-vine by direct recursive conditioning, without the
/// pi-matrix: f(s) = prod_t f_{t | 1..t-1}, where each conditional cdf comes
/// from the identity
/// F_{g|D,h} = [C_{gh|D}(F_{g|D}, F^+_{h|D}) - C_{gh|D}(F_{g|D}, F^-_{h|D})] / f_{h|D}.
/// A conditioning event of zero mass makes the path impossible.
pub fn naive_pmf(margins: &[f64], trees: &[BivariateCopula], signs: &[bool]) -> f64 {
    let p: f64 = (0..margins.len())
        .map(|t| {
            let (hi, lo) = cond(margins, trees, signs, t, 0, t);
            hi - lo
        })
        .product();
    if p.is_nan() {
        0.0
    } else {
        p
    }
}

// (F^+, F^-) of variable g given the contiguous block [lo, hi) next to g.
fn cond(
    m: &[f64],
    trees: &[BivariateCopula],
    s: &[bool],
    g: usize,
    lo: usize,
    hi: usize,
) -> (f64, f64) {
    if lo == hi {
        let p = CdfPair::bernoulli(m[g], s[g]);
        return (p.plus, p.minus);
    }
    let c = trees
        .get(hi - lo - 1)
        .copied()
        .unwrap_or(BivariateCopula::independence());
    if g < lo {
        let h = hi - 1;
        let (gp, gm) = cond(m, trees, s, g, lo, h);
        let (hp, hm) = cond(m, trees, s, h, lo, h);
        let fh = hp - hm;
        let f = |x: f64| if fh > 0.0 && !x.is_nan() { (c.cdf(x, hp) - c.cdf(x, hm)) / fh } else { f64::NAN };
        (f(gp), f(gm))
    } else {
        let h = lo;
        let (gp, gm) = cond(m, trees, s, g, lo + 1, hi);
        let (hp, hm) = cond(m, trees, s, h, lo + 1, hi);
        let fh = hp - hm;
        let f = |x: f64| if fh > 0.0 && !x.is_nan() { (c.cdf(hp, x) - c.cdf(hm, x)) / fh } else { f64::NAN };
        (f(gp), f(gm))
    }
}

/// First-order Markov chain pmf from the tree-1 copula.
pub fn markov_pmf(margins: &[f64], c: &BivariateCopula, signs: &[bool]) -> f64 {
    let first = CdfPair::bernoulli(margins[0], signs[0]);
    let mut p = first.mass();
    for t in 1..margins.len() {
        let a = CdfPair::bernoulli(margins[t - 1], signs[t - 1]);
        let b = CdfPair::bernoulli(margins[t], signs[t]);
        let joint = c.cdf(a.plus, b.plus) - c.cdf(a.plus, b.minus) - c.cdf(a.minus, b.plus)
            + c.cdf(a.minus, b.minus);
        p *= joint / a.mass();
    }
    p
}

pub fn random_copula<R: Rng>(rng: &mut R) -> BivariateCopula {
    let base = match rng.random_range(0..4) {
        0 => BivariateCopula::independence(),
        1 => BivariateCopula::gaussian(rng.random_range(-0.9..0.9)).unwrap(),
        2 => BivariateCopula::clayton(rng.random_range(0.1..8.0)).unwrap(),
        _ => BivariateCopula::gumbel(rng.random_range(1.0..6.0)).unwrap(),
    };
    if rng.random_bool(0.25) {
        base.jointly_symmetric()
    } else {
        base
    }
}

/// All 2^n sign vectors.
pub fn all_signs(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u32 << n).map(move |code| (0..n).map(|i| code >> i & 1 == 1).collect())
}
