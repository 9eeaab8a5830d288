//! Rewriting Weyl-invariant polynomials in the elementary symmetric basis.
//!
//! A [`SymmetricPolynomial`] is an exact polynomial in `X_1 .. X_n`; the
//! descent algorithm expresses it as a polynomial in `sigma_1 .. sigma_n`
//! and then eliminates `sigma_1` (which vanishes on the trace-free Cartan
//! algebra). The resulting [`SigmaPolynomial`] in `sigma_2 .. sigma_n`
//! doubles as a cohomology class: a polynomial in the generators
//! `a_2 .. a_n`, one `a_r` per `sigma_r`, of degree `2r` each.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lie::RootData;
use crate::rational::{rat, Rational};
use crate::series::LaurentSeries;

/// Sparse exact polynomial in `X_1 .. X_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPolynomial {
    n: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl SymmetricPolynomial {
    pub fn zero(n: usize) -> Self {
        SymmetricPolynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: Rational) -> Self {
        let mut p = Self::zero(n);
        if !c.is_zero() {
            p.terms.insert(vec![0; n], c);
        }
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, rat(1))
    }

    /// The variable `X_i`, 1-based.
    pub fn var(n: usize, i: usize) -> Self {
        assert!((1..=n).contains(&i));
        let mut e = vec![0u32; n];
        e[i - 1] = 1;
        let mut p = Self::zero(n);
        p.terms.insert(e, rat(1));
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            let entry = out.terms.entry(e.clone()).or_insert_with(Rational::zero);
            *entry += c;
            if out.terms[e].is_zero() {
                out.terms.remove(e);
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.scalar_mul(&rat(-1)))
    }

    pub fn scalar_mul(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return Self::zero(self.n);
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.clone() * k;
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let mut out = Self::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                let entry = out.terms.entry(e.clone()).or_insert_with(Rational::zero);
                *entry += ca.clone() * cb;
                if out.terms[&e].is_zero() {
                    out.terms.remove(&e);
                }
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.n);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Invariance under all permutations, checked on the adjacent
    /// transpositions that generate them.
    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.n.saturating_sub(1) {
            for (e, c) in &self.terms {
                let mut swapped = e.clone();
                swapped.swap(i, i + 1);
                if self.terms.get(&swapped) != Some(c) {
                    return false;
                }
            }
        }
        true
    }

    /// Lex-largest monomial (X_1 most significant).
    fn leading(&self) -> Option<(&Vec<u32>, &Rational)> {
        self.terms.iter().max_by(|(a, _), (b, _)| a.cmp(b))
    }

    /// Substitutes the explicit `X_i(Y)` solution, landing in the series
    /// ring.
    pub fn substitute(&self, rd: &RootData) -> Result<LaurentSeries> {
        let order = rd.order();
        let mut acc = LaurentSeries::zero(order);
        for (e, c) in &self.terms {
            let mut term = LaurentSeries::constant(order, c.clone());
            for (i, k) in e.iter().enumerate() {
                term = term.mul(&rd.x(i + 1).pow(*k)?)?;
            }
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }
}

/// Elementary symmetric polynomial `sigma_r(X_1 .. X_n)` as a polynomial.
pub fn sigma_poly(n: usize, r: usize) -> SymmetricPolynomial {
    assert!(r <= n);
    let vars: Vec<SymmetricPolynomial> = (1..=n).map(|i| SymmetricPolynomial::var(n, i)).collect();
    elementary_symmetric_poly(n, &vars, r)
}

/// `e_r` of arbitrary polynomial values.
pub fn elementary_symmetric_poly(
    n: usize,
    values: &[SymmetricPolynomial],
    r: usize,
) -> SymmetricPolynomial {
    if r > values.len() {
        return SymmetricPolynomial::zero(n);
    }
    let mut e: Vec<SymmetricPolynomial> = vec![SymmetricPolynomial::zero(n); r + 1];
    e[0] = SymmetricPolynomial::one(n);
    for v in values {
        for k in (1..=r).rev() {
            let bump = e[k - 1].mul(v);
            e[k] = e[k].add(&bump);
        }
    }
    e[r].clone()
}

/// Exact polynomial in the abstract `sigma_2 .. sigma_n`; exponent vectors
/// are indexed by `r - 2`. Doubles as the cohomology class with `sigma_r`
/// read as `a_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPolynomial {
    n: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl SigmaPolynomial {
    pub fn zero(n: usize) -> Self {
        SigmaPolynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: Rational) -> Self {
        let mut p = Self::zero(n);
        if !c.is_zero() {
            p.terms.insert(vec![0; n - 1], c);
        }
        p
    }

    /// Monomial `c * prod sigma_r^{m_r}` with `exponents[r-2] = m_r`.
    pub fn monomial(n: usize, exponents: Vec<u32>, c: Rational) -> Self {
        assert_eq!(exponents.len(), n - 1);
        let mut p = Self::zero(n);
        if !c.is_zero() {
            p.terms.insert(exponents, c);
        }
        p
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterates `(exponents over sigma_2..sigma_n, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.terms.iter()
    }

    pub fn scalar_mul(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return Self::zero(self.n);
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.clone() * k;
        }
        out
    }

    /// Cohomology degree when read in the `a_r` generators, provided the
    /// class is homogeneous; the maximum term degree otherwise.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| {
                e.iter()
                    .enumerate()
                    .map(|(i, m)| 2 * (i as u32 + 2) * m)
                    .sum()
            })
            .max()
            .unwrap_or(0)
    }

    /// Back-substitution of `sigma_r(X)` in the series ring.
    pub fn substitute(&self, rd: &RootData) -> Result<LaurentSeries> {
        let order = rd.order();
        let mut acc = LaurentSeries::zero(order);
        for (e, c) in &self.terms {
            let mut term = LaurentSeries::constant(order, c.clone());
            for (i, k) in e.iter().enumerate() {
                term = term.mul(&rd.sigma(i + 2)?.pow(*k)?)?;
            }
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }
}

/// Expresses a symmetric polynomial in the elementary symmetric basis with
/// `sigma_1` eliminated.
///
/// Classical descent on leading monomials: the lex-leading exponent vector
/// of a symmetric polynomial is weakly decreasing, and subtracting the
/// matching product of elementary symmetric polynomials strictly lowers it.
pub fn to_elementary(p: &SymmetricPolynomial) -> Result<SigmaPolynomial> {
    if !p.is_symmetric() {
        return Err(Error::Domain(
            "polynomial is not symmetric in the X variables".into(),
        ));
    }
    let n = p.num_vars();
    let sigmas: Vec<SymmetricPolynomial> = (1..=n).map(|r| sigma_poly(n, r)).collect();
    let mut rest = p.clone();
    let mut full: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
    while let Some((alpha, c)) = rest.leading() {
        let alpha = alpha.clone();
        let c = c.clone();
        // sigma exponents: alpha_i - alpha_{i+1}.
        let mut sig_exp = vec![0u32; n];
        for i in 0..n {
            let next = if i + 1 < n { alpha[i + 1] } else { 0 };
            debug_assert!(alpha[i] >= next, "leading monomial not weakly decreasing");
            sig_exp[i] = alpha[i] - next;
        }
        let mut expansion = SymmetricPolynomial::one(n);
        for (i, k) in sig_exp.iter().enumerate() {
            if *k > 0 {
                expansion = expansion.mul(&sigmas[i].pow(*k));
            }
        }
        rest = rest.sub(&expansion.scalar_mul(&c));
        let entry = full.entry(sig_exp).or_insert_with(Rational::zero);
        *entry += c;
    }
    // Restrict to the trace-free locus: sigma_1 = 0.
    let mut out = SigmaPolynomial::zero(n);
    for (e, c) in full {
        if e[0] == 0 && !c.is_zero() {
            out.terms.insert(e[1..].to_vec(), c);
        }
    }
    Ok(out)
}

/// Generators of the Pontryagin ring: the elementary symmetric polynomials
/// in the squared roots `(X_i - X_j)^2`, rewritten in the `a_r` basis.
pub fn pontryagin_generators(n: usize) -> Result<Vec<SigmaPolynomial>> {
    let mut squares = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            let diff = SymmetricPolynomial::var(n, i).sub(&SymmetricPolynomial::var(n, j));
            squares.push(diff.mul(&diff));
        }
    }
    let count = squares.len();
    (1..=count)
        .map(|k| to_elementary(&elementary_symmetric_poly(n, &squares, k)))
        .collect()
}

/// The class represented by `prod_{i<j} (X_i - X_j)^{2g-2}`, of cohomology
/// degree `2n(n-1)(g-1)`.
pub fn discriminant_class(n: usize, g: usize) -> Result<SigmaPolynomial> {
    assert!(n >= 2 && g >= 2);
    let mut disc = SymmetricPolynomial::one(n);
    for i in 1..=n {
        for j in i + 1..=n {
            let diff = SymmetricPolynomial::var(n, i).sub(&SymmetricPolynomial::var(n, j));
            disc = disc.mul(&diff.pow(2 * g as u32 - 2));
        }
    }
    to_elementary(&disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::RootData;
    use crate::rational::ratio;
    use crate::series::{CapSpec, VariableOrder};

    fn root_data(n: usize) -> RootData {
        let ord = VariableOrder::new(n - 1, &[], &CapSpec::uniform(n - 1, 16, 2, 2, 2));
        RootData::new(n, &ord)
    }

    #[test]
    fn squared_root_n2() {
        // (X1 - X2)^2 -> -4 sigma_2.
        let d = SymmetricPolynomial::var(2, 1).sub(&SymmetricPolynomial::var(2, 2));
        let cls = to_elementary(&d.mul(&d)).unwrap();
        assert_eq!(cls, SigmaPolynomial::monomial(2, vec![1], rat(-4)));
    }

    #[test]
    fn sum_of_squared_roots_n3() {
        // sum_{i<j} (X_i - X_j)^2 -> -6 sigma_2.
        let mut acc = SymmetricPolynomial::zero(3);
        for i in 1..=3 {
            for j in i + 1..=3 {
                let d = SymmetricPolynomial::var(3, i).sub(&SymmetricPolynomial::var(3, j));
                acc = acc.add(&d.mul(&d));
            }
        }
        let cls = to_elementary(&acc).unwrap();
        assert_eq!(cls, SigmaPolynomial::monomial(3, vec![1, 0], rat(-6)));
    }

    #[test]
    fn constant_passes_through() {
        let one = SymmetricPolynomial::one(3);
        let cls = to_elementary(&one).unwrap();
        assert_eq!(cls, SigmaPolynomial::constant(3, rat(1)));
    }

    #[test]
    fn rejects_non_symmetric() {
        let p = SymmetricPolynomial::var(2, 1);
        assert!(matches!(to_elementary(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn substitution_round_trip_on_trace_free_locus() {
        // expand(to_elementary(p)) equals p after substituting X(Y).
        let rd3 = root_data(3);
        let power_sum = |k: u32| {
            let mut acc = SymmetricPolynomial::zero(3);
            for i in 1..=3 {
                acc = acc.add(&SymmetricPolynomial::var(3, i).pow(k));
            }
            acc
        };
        let cases = vec![
            sigma_poly(3, 2).mul(&sigma_poly(3, 3)),
            power_sum(2).mul(&power_sum(3)),
            power_sum(4),
            sigma_poly(3, 1).pow(2), // collapses to zero on the locus
        ];
        for p in cases {
            let cls = to_elementary(&p).unwrap();
            assert_eq!(
                cls.substitute(&rd3).unwrap(),
                p.substitute(&rd3).unwrap(),
                "round trip failed"
            );
        }
    }

    #[test]
    fn random_symmetrized_round_trips() {
        // Deterministic pseudo-random monomials, symmetrized by summing
        // over all permutations of the exponent vector.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for n in 2..=4usize {
            let rd = root_data(n);
            for _ in 0..(if n == 4 { 20 } else { 40 }) {
                let mut exps = vec![0u32; n];
                for e in exps.iter_mut() {
                    *e = (next() % 3) as u32;
                }
                let coeff = ratio((next() % 19) as i64 - 9, 1 + (next() % 7) as i64);
                if coeff.is_zero() {
                    continue;
                }
                let mut p = SymmetricPolynomial::zero(n);
                permute_all(&mut exps.clone(), 0, &mut |perm| {
                    let mut mono = SymmetricPolynomial::constant(n, coeff.clone());
                    for (i, k) in perm.iter().enumerate() {
                        mono = mono.mul(&SymmetricPolynomial::var(n, i + 1).pow(*k));
                    }
                    p = p.add(&mono);
                });
                if p.is_zero() {
                    continue;
                }
                assert!(p.is_symmetric());
                let cls = to_elementary(&p).unwrap();
                assert_eq!(cls.substitute(&rd).unwrap(), p.substitute(&rd).unwrap());
            }
        }
    }

    fn permute_all(exps: &mut Vec<u32>, k: usize, f: &mut impl FnMut(&[u32])) {
        if k == exps.len() {
            f(exps);
            return;
        }
        for i in k..exps.len() {
            exps.swap(k, i);
            permute_all(exps, k + 1, f);
            exps.swap(k, i);
        }
    }

    #[test]
    fn descent_is_linear_hence_order_independent() {
        // The descent processes leading monomials in a fixed order; its
        // output must nevertheless be linear, which pins uniqueness.
        let p1 = sigma_poly(3, 2).pow(2);
        let p2 = sigma_poly(3, 3).mul(&SymmetricPolynomial::var(3, 1).add(
            &SymmetricPolynomial::var(3, 2).add(&SymmetricPolynomial::var(3, 3)),
        ));
        let sum = to_elementary(&p1.add(&p2)).unwrap();
        let separate = {
            let a = to_elementary(&p1).unwrap();
            let b = to_elementary(&p2).unwrap();
            let mut terms: BTreeMap<Vec<u32>, Rational> = a.terms.clone();
            for (e, c) in &b.terms {
                let entry = terms.entry(e.clone()).or_insert_with(Rational::zero);
                *entry += c;
                if terms[e].is_zero() {
                    terms.remove(e);
                }
            }
            SigmaPolynomial { n: 3, terms }
        };
        assert_eq!(sum, separate);
    }

    #[test]
    fn pontryagin_generator_list() {
        let gens2 = pontryagin_generators(2).unwrap();
        assert_eq!(gens2.len(), 1);
        assert_eq!(gens2[0], SigmaPolynomial::monomial(2, vec![1], rat(-4)));

        let gens3 = pontryagin_generators(3).unwrap();
        assert_eq!(gens3.len(), 3);
        assert_eq!(gens3[0], SigmaPolynomial::monomial(3, vec![1, 0], rat(-6)));
        // Defining property: each generator matches its source polynomial
        // on the trace-free locus.
        let rd = root_data(3);
        let mut squares = Vec::new();
        for i in 1..=3 {
            for j in i + 1..=3 {
                let d = SymmetricPolynomial::var(3, i).sub(&SymmetricPolynomial::var(3, j));
                squares.push(d.mul(&d));
            }
        }
        for (k, gen) in gens3.iter().enumerate() {
            let src = elementary_symmetric_poly(3, &squares, k + 1);
            assert_eq!(
                gen.substitute(&rd).unwrap(),
                src.substitute(&rd).unwrap()
            );
        }
    }

    #[test]
    fn discriminant_class_values() {
        // n = 2: (-4 a_2)^{g-1}.
        for g in 2..=4usize {
            let cls = discriminant_class(2, g).unwrap();
            let mut coeff = rat(1);
            for _ in 0..g - 1 {
                coeff *= rat(-4);
            }
            assert_eq!(
                cls,
                SigmaPolynomial::monomial(2, vec![g as u32 - 1], coeff)
            );
            assert_eq!(cls.degree(), 4 * (g as u32 - 1));
        }
        // n = 3, g = 2: degree 2n(n-1)(g-1) = 12.
        let cls = discriminant_class(3, 2).unwrap();
        assert_eq!(cls.degree(), 12);
    }
}
