//! Exterior algebra on the torus generators and the Berezin integral.
//!
//! Generators `z[j][k]` for `1 <= j <= rows`, `1 <= k <= 2g` anticommute
//! and square to zero. The canonical order is `z[1][1] < z[2][1] < ... <
//! z[rows][1] < z[1][2] < ...`; elements are stored as bitmask-indexed
//! sparse maps with [`LaurentSeries`] coefficients.
//!
//! The Berezin integral returns the coefficient of the full top monomial,
//! normalised so that for every square matrix `M` over the series ring
//!
//! ```text
//! berezin(exp(-sum_{i,j,k<=g} z[i][k] z[j][k+g] M[i][j])) = det(M)^g .
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::One;

use crate::error::{Error, Result};
use crate::rational::{rat, Rational};
use crate::series::{LaurentSeries, VariableOrder};

/// The generator universe for one computation: `rows = n - 1` index rows
/// and `2g` superscripts.
#[derive(Debug)]
pub struct GrassmannAlgebra {
    rows: usize,
    genus: usize,
    orientation: i64,
}

impl GrassmannAlgebra {
    pub fn new(rows: usize, genus: usize) -> Result<Arc<Self>> {
        let gens = rows * 2 * genus;
        if gens > 64 {
            return Err(Error::Usage(format!(
                "{gens} generators exceed the 64-bit subset encoding"
            )));
        }
        let mut alg = GrassmannAlgebra {
            rows,
            genus,
            orientation: 1,
        };
        alg.orientation = alg.compute_orientation();
        Ok(Arc::new(alg))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn generators(&self) -> usize {
        self.rows * 2 * self.genus
    }

    /// Bit index of `z[j][k]`, with `j` in `1..=rows`, `k` in `1..=2g`.
    pub fn gen_index(&self, j: usize, k: usize) -> usize {
        assert!(
            (1..=self.rows).contains(&j) && (1..=2 * self.genus).contains(&k),
            "generator out of range"
        );
        (k - 1) * self.rows + (j - 1)
    }

    pub fn top_mask(&self) -> u64 {
        let gens = self.generators();
        if gens == 64 {
            u64::MAX
        } else {
            (1u64 << gens) - 1
        }
    }

    /// Sign produced when the identity-matrix quadratic exponential is
    /// expanded to the top monomial; fixes the orientation so the
    /// determinant law holds.
    fn compute_orientation(&self) -> i64 {
        let mut mask: u64 = 0;
        let mut sign: i64 = 1;
        for k in 1..=self.genus {
            for i in 1..=self.rows {
                let a = 1u64 << self.gen_index(i, k);
                let b = 1u64 << self.gen_index(i, k + self.genus);
                sign *= merge_sign(mask, a | b);
                mask |= a | b;
            }
        }
        // Natural top coefficient of prod (-z z) is (-1)^{rows*g} * sign.
        if (self.rows * self.genus) % 2 == 1 {
            sign = -sign;
        }
        sign
    }

    fn same(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other)
    }
}

/// Sign of merging two disjoint sorted generator sets; zero if they
/// intersect (a squared generator).
fn merge_sign(a: u64, b: u64) -> i64 {
    if a & b != 0 {
        return 0;
    }
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let bit = rest.trailing_zeros();
        // Generators of `a` above this element of `b` must move past it.
        if bit < 63 {
            inversions += (a >> (bit + 1)).count_ones();
        }
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Element of the exterior algebra with series coefficients.
#[derive(Clone)]
pub struct GrassmannElement {
    alg: Arc<GrassmannAlgebra>,
    order: Arc<VariableOrder>,
    terms: BTreeMap<u64, LaurentSeries>,
}

impl PartialEq for GrassmannElement {
    fn eq(&self, other: &Self) -> bool {
        self.alg.same(&other.alg) && self.terms == other.terms
    }
}

impl GrassmannElement {
    pub fn zero(alg: &Arc<GrassmannAlgebra>, order: &Arc<VariableOrder>) -> Self {
        GrassmannElement {
            alg: alg.clone(),
            order: order.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(alg: &Arc<GrassmannAlgebra>, s: LaurentSeries) -> Self {
        let order = s.order().clone();
        let mut e = Self::zero(alg, &order);
        if !s.is_zero() {
            e.terms.insert(0, s);
        }
        e
    }

    pub fn one(alg: &Arc<GrassmannAlgebra>, order: &Arc<VariableOrder>) -> Self {
        Self::scalar(alg, LaurentSeries::one(order))
    }

    /// The single generator `z[j][k]`.
    pub fn generator(
        alg: &Arc<GrassmannAlgebra>,
        order: &Arc<VariableOrder>,
        j: usize,
        k: usize,
    ) -> Self {
        let mut e = Self::zero(alg, order);
        e.terms
            .insert(1u64 << alg.gen_index(j, k), LaurentSeries::one(order));
        e
    }

    /// `sum_j coeffs[j] * z[j+1][k]`.
    pub fn linear_form(
        alg: &Arc<GrassmannAlgebra>,
        order: &Arc<VariableOrder>,
        coeffs: &[LaurentSeries],
        k: usize,
    ) -> Self {
        assert_eq!(coeffs.len(), alg.rows());
        let mut e = Self::zero(alg, order);
        for (j, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                e.terms.insert(1u64 << alg.gen_index(j + 1, k), c.clone());
            }
        }
        e
    }

    pub fn algebra(&self) -> &Arc<GrassmannAlgebra> {
        &self.alg
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn check(&self, rhs: &Self) -> Result<()> {
        if !self.alg.same(&rhs.alg) {
            return Err(Error::OrderMismatch(
                "operands use different generator universes".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check(rhs)?;
        let mut out = self.clone();
        for (m, s) in &rhs.terms {
            let merged = match out.terms.get(m) {
                Some(cur) => cur.add(s)?,
                None => s.clone(),
            };
            if merged.is_zero() {
                out.terms.remove(m);
            } else {
                out.terms.insert(*m, merged);
            }
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for s in out.terms.values_mut() {
            *s = s.neg();
        }
        out
    }

    pub fn scalar_mul(&self, s: &LaurentSeries) -> Result<Self> {
        let mut out = Self::zero(&self.alg, &self.order);
        for (m, c) in &self.terms {
            let prod = c.mul(s)?;
            if !prod.is_zero() {
                out.terms.insert(*m, prod);
            }
        }
        Ok(out)
    }

    /// Exterior product with exact sign bookkeeping.
    pub fn wedge(&self, rhs: &Self) -> Result<Self> {
        self.check(rhs)?;
        let mut out = Self::zero(&self.alg, &self.order);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let sign = merge_sign(*ma, *mb);
                if sign == 0 {
                    continue;
                }
                let mut prod = ca.mul(cb)?;
                if sign < 0 {
                    prod = prod.neg();
                }
                let mask = *ma | *mb;
                let merged = match out.terms.get(&mask) {
                    Some(cur) => cur.add(&prod)?,
                    None => prod,
                };
                if merged.is_zero() {
                    out.terms.remove(&mask);
                } else {
                    out.terms.insert(mask, merged);
                }
            }
        }
        Ok(out)
    }

    /// `exp` of an even element with zero scalar part; terminates by
    /// nilpotency.
    pub fn exp(&self) -> Result<Self> {
        for m in self.terms.keys() {
            if *m == 0 {
                return Err(Error::Domain(
                    "exterior exp requires zero scalar part".into(),
                ));
            }
            if m.count_ones() % 2 == 1 {
                return Err(Error::Domain(
                    "exterior exp requires an even-degree argument".into(),
                ));
            }
        }
        let mut acc = Self::one(&self.alg, &self.order);
        let mut term = Self::one(&self.alg, &self.order);
        let mut k: u64 = 0;
        loop {
            k += 1;
            term = term.wedge(self)?;
            if term.is_zero() {
                break;
            }
            let scaled = term.scalar_mul(&LaurentSeries::constant(
                &self.order,
                Rational::one() / crate::rational::factorial(k),
            ))?;
            acc = acc.add(&scaled)?;
            if k as usize > self.alg.generators() {
                break;
            }
        }
        Ok(acc)
    }

    /// Berezin integral: the normalised coefficient of the full top
    /// monomial. Linear over the series ring.
    pub fn berezin(&self) -> LaurentSeries {
        self.berezin_oriented(false)
    }

    /// Berezin integral with a deliberate orientation flip; used by
    /// verification tooling to prove the suite catches a wrong sign.
    pub fn berezin_oriented(&self, flip: bool) -> LaurentSeries {
        let top = self.alg.top_mask();
        match self.terms.get(&top) {
            None => LaurentSeries::zero(&self.order),
            Some(s) => {
                let mut sigma = self.alg.orientation;
                if flip {
                    sigma = -sigma;
                }
                s.scalar_mul(&rat(sigma))
            }
        }
    }

    /// The quadratic exponential `exp(-sum z[i][k] z[j][k+g] M[i][j])`
    /// built from a coefficient matrix.
    pub fn quadratic_exponential(
        alg: &Arc<GrassmannAlgebra>,
        order: &Arc<VariableOrder>,
        m: &[Vec<LaurentSeries>],
    ) -> Result<Self> {
        let rows = alg.rows();
        assert_eq!(m.len(), rows);
        let mut q = Self::zero(alg, order);
        for k in 1..=alg.genus() {
            for i in 1..=rows {
                for j in 1..=rows {
                    let c = &m[i - 1][j - 1];
                    if c.is_zero() {
                        continue;
                    }
                    let zi = Self::generator(alg, order, i, k);
                    let zj = Self::generator(alg, order, j, k + alg.genus());
                    let pair = zi.wedge(&zj)?.scalar_mul(&c.neg())?;
                    q = q.add(&pair)?;
                }
            }
        }
        q.exp()
    }

    /// Determinant shortcut for the Berezin integral of a purely quadratic
    /// exponential: `det(M)^g` computed by Laplace expansion over the
    /// series ring. Must agree with `quadratic_exponential(..).berezin()`.
    pub fn berezin_quadratic(
        alg: &Arc<GrassmannAlgebra>,
        order: &Arc<VariableOrder>,
        m: &[Vec<LaurentSeries>],
    ) -> Result<LaurentSeries> {
        let det = series_det(order, m)?;
        det.pow(alg.genus() as u32)
    }
}

/// Laplace-expansion determinant over the series ring.
fn series_det(order: &Arc<VariableOrder>, m: &[Vec<LaurentSeries>]) -> Result<LaurentSeries> {
    let n = m.len();
    if n == 0 {
        return Ok(LaurentSeries::one(order));
    }
    if n == 1 {
        return Ok(m[0][0].clone());
    }
    let mut acc = LaurentSeries::zero(order);
    for (col, top) in m[0].iter().enumerate() {
        if top.is_zero() {
            continue;
        }
        let minor: Vec<Vec<LaurentSeries>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != col)
                    .map(|(_, s)| s.clone())
                    .collect()
            })
            .collect();
        let mut contrib = top.mul(&series_det(order, &minor)?)?;
        if col % 2 == 1 {
            contrib = contrib.neg();
        }
        acc = acc.add(&contrib)?;
    }
    Ok(acc)
}

impl fmt::Debug for GrassmannElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, s) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "[{s}]")?;
            let mut rest = *m;
            while rest != 0 {
                let bit = rest.trailing_zeros() as usize;
                let k = bit / self.alg.rows() + 1;
                let j = bit % self.alg.rows() + 1;
                write!(f, "*z[{j}][{k}]")?;
                rest &= rest - 1;
            }
        }
        Ok(())
    }
}
