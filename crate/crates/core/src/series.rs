//! Iterated multivariate Laurent series with exact rational coefficients.
//!
//! A series lives over a fixed [`VariableOrder`]: residue variables
//! `Y_1, ..., Y_R` (magnitudes `|Y_1| >> ... >> |Y_R|`), the parameters
//! `t`, `eps`, `lam` (all smaller than every `Y`, with
//! `|eps| >> |lam| >> |t|`), and a tail of nilpotent variables
//! `delta_k` with `delta_k^(N_k+1) = 0`.
//!
//! Terms are kept in a sparse exponent map. Each series carries per-variable
//! upper truncation caps: coefficients of monomials whose exponents all lie
//! at or below the caps are exact, everything above is unknown. Polynomials
//! built from exact constructors carry unbounded caps; caps enter through
//! the series-producing operations (`invert`, `exp`, `pow_binomial`) and
//! propagate through arithmetic.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{binomial, rat, Rational};

/// Sentinel cap meaning "exact in this variable, no truncation".
pub const UNBOUNDED: i32 = i32::MAX / 4;

const MAX_EXPANSION_TERMS: usize = 200_000;

/// Identifies a variable inside a [`VariableOrder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub usize);

/// Upper truncation caps for the non-nilpotent variables of an order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapSpec {
    pub y: Vec<i32>,
    pub t: i32,
    pub eps: i32,
    pub lam: i32,
}

impl CapSpec {
    pub fn uniform(n_residue: usize, y: i32, t: i32, eps: i32, lam: i32) -> Self {
        CapSpec {
            y: vec![y; n_residue],
            t,
            eps,
            lam,
        }
    }

    /// Same caps with every entry raised by `extra` (used by cap-stability
    /// checks).
    pub fn widened(&self, extra: i32) -> Self {
        CapSpec {
            y: self.y.iter().map(|c| c + extra).collect(),
            t: self.t + extra,
            eps: self.eps + extra,
            lam: self.lam + extra,
        }
    }

    /// Doubles the accuracy caps (residue variables and the scaling
    /// parameter) while keeping the semantic output windows in `t` and
    /// `lam` fixed; used by the automatic retry after a cap violation.
    pub fn doubled(&self) -> Self {
        CapSpec {
            y: self.y.iter().map(|c| c * 2).collect(),
            t: self.t,
            eps: self.eps * 2,
            lam: self.lam,
        }
    }
}

/// The shared variable universe of a computation.
///
/// Layout: `Y_1 .. Y_R`, then `t`, `eps`, `lam`, then the nilpotent
/// variables in declaration order.
#[derive(Debug)]
pub struct VariableOrder {
    n_residue: usize,
    nilpotent_orders: Vec<u32>,
    working_caps: Vec<i32>,
    names: Vec<String>,
}

impl VariableOrder {
    pub fn new(n_residue: usize, nilpotent_orders: &[u32], caps: &CapSpec) -> Arc<Self> {
        assert_eq!(caps.y.len(), n_residue, "one Y cap per residue variable");
        let mut names: Vec<String> = (1..=n_residue).map(|i| format!("Y{i}")).collect();
        names.push("t".into());
        names.push("eps".into());
        names.push("lam".into());
        for (k, _) in nilpotent_orders.iter().enumerate() {
            names.push(format!("d{}", k + 3));
        }
        let mut working_caps = caps.y.clone();
        working_caps.push(caps.t);
        working_caps.push(caps.eps);
        working_caps.push(caps.lam);
        for n in nilpotent_orders {
            working_caps.push(*n as i32);
        }
        Arc::new(VariableOrder {
            n_residue,
            nilpotent_orders: nilpotent_orders.to_vec(),
            working_caps,
            names,
        })
    }

    /// Scalar universe: no residue variables, parameters capped at zero.
    pub fn scalar() -> Arc<Self> {
        Self::new(0, &[], &CapSpec::uniform(0, 0, 0, 0, 0))
    }

    pub fn num_vars(&self) -> usize {
        self.n_residue + 3 + self.nilpotent_orders.len()
    }

    pub fn residue_count(&self) -> usize {
        self.n_residue
    }

    /// `Y_{i+1}` for `i` in `0..residue_count()`.
    pub fn y(&self, i: usize) -> Var {
        assert!(i < self.n_residue);
        Var(i)
    }

    pub fn t(&self) -> Var {
        Var(self.n_residue)
    }

    pub fn eps(&self) -> Var {
        Var(self.n_residue + 1)
    }

    pub fn lam(&self) -> Var {
        Var(self.n_residue + 2)
    }

    /// `k`-th nilpotent variable, `k` in `0..nilpotent_count()`.
    pub fn nilpotent(&self, k: usize) -> Var {
        assert!(k < self.nilpotent_orders.len());
        Var(self.n_residue + 3 + k)
    }

    pub fn nilpotent_count(&self) -> usize {
        self.nilpotent_orders.len()
    }

    pub fn nilpotent_order(&self, k: usize) -> u32 {
        self.nilpotent_orders[k]
    }

    pub fn is_nilpotent(&self, v: Var) -> bool {
        v.0 >= self.n_residue + 3
    }

    pub fn name(&self, v: Var) -> &str {
        &self.names[v.0]
    }

    pub fn working_caps(&self) -> &[i32] {
        &self.working_caps
    }

    /// Total nilpotency budget: the largest number of nilpotent factors any
    /// nonzero monomial can carry.
    pub fn nilpotent_budget(&self) -> u32 {
        self.nilpotent_orders.iter().sum()
    }

    /// Significance sequence used for dominance comparisons: most
    /// significant (smallest magnitude) first. Nilpotent variables come
    /// last purely as a deterministic tiebreaker.
    fn significance(&self) -> impl Iterator<Item = usize> + '_ {
        let r = self.n_residue;
        let params = [r, r + 2, r + 1]; // t, lam, eps
        params
            .into_iter()
            .chain((0..r).rev())
            .chain(r + 3..self.num_vars())
    }

    /// Compares two exponent vectors by magnitude dominance: the smaller
    /// vector denotes the larger monomial in the expansion regime.
    fn dominance_cmp(&self, a: &[i32], b: &[i32]) -> Ordering {
        for v in self.significance() {
            match a[v].cmp(&b[v]) {
                Ordering::Equal => {}
                other => return other,
            }
        }
        Ordering::Equal
    }

    fn same(self: &Arc<Self>, other: &Arc<Self>) -> bool {
        Arc::ptr_eq(self, other)
    }
}

/// Sparse iterated Laurent series over a [`VariableOrder`].
#[derive(Clone)]
pub struct LaurentSeries {
    order: Arc<VariableOrder>,
    terms: BTreeMap<Vec<i32>, Rational>,
    caps: Vec<i32>,
}

impl PartialEq for LaurentSeries {
    /// Equality of stored content; truncation caps are not compared.
    fn eq(&self, other: &Self) -> bool {
        self.order.same(&other.order) && self.terms == other.terms
    }
}

impl LaurentSeries {
    pub fn zero(order: &Arc<VariableOrder>) -> Self {
        LaurentSeries {
            order: order.clone(),
            terms: BTreeMap::new(),
            caps: vec![UNBOUNDED; order.num_vars()],
        }
    }

    pub fn constant(order: &Arc<VariableOrder>, c: Rational) -> Self {
        let mut s = Self::zero(order);
        if !c.is_zero() {
            s.terms.insert(vec![0; order.num_vars()], c);
        }
        s
    }

    pub fn one(order: &Arc<VariableOrder>) -> Self {
        Self::constant(order, Rational::one())
    }

    pub fn int(order: &Arc<VariableOrder>, n: i64) -> Self {
        Self::constant(order, rat(n))
    }

    /// Single monomial `c * prod v^e`.
    pub fn monomial(order: &Arc<VariableOrder>, exps: &[(Var, i32)], c: Rational) -> Self {
        let mut e = vec![0i32; order.num_vars()];
        for (v, k) in exps {
            e[v.0] += k;
        }
        let mut s = Self::zero(order);
        if !c.is_zero() && !exceeds_nilpotent(order, &e) {
            s.terms.insert(e, c);
        }
        s
    }

    /// Single variable to the first power.
    pub fn var(order: &Arc<VariableOrder>, v: Var) -> Self {
        Self::monomial(order, &[(v, 1)], Rational::one())
    }

    pub fn order(&self) -> &Arc<VariableOrder> {
        &self.order
    }

    pub fn caps(&self) -> &[i32] {
        &self.caps
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &Rational)> {
        self.terms.iter()
    }

    /// Smallest stored exponent of `v`, if the series is nonzero.
    pub fn min_exp(&self, v: Var) -> Option<i32> {
        self.terms.keys().map(|e| e[v.0]).min()
    }

    pub fn max_exp(&self, v: Var) -> Option<i32> {
        self.terms.keys().map(|e| e[v.0]).max()
    }

    fn check_order(&self, rhs: &Self) -> Result<()> {
        if !self.order.same(&rhs.order) {
            return Err(Error::OrderMismatch(
                "operands use different variable orders".into(),
            ));
        }
        Ok(())
    }

    fn within_caps(caps: &[i32], e: &[i32]) -> bool {
        e.iter().zip(caps).all(|(x, c)| *x <= *c)
    }

    /// Drops terms above the caps and zero coefficients.
    fn normalize(&mut self) {
        let caps = self.caps.clone();
        let order = self.order.clone();
        self.terms
            .retain(|e, c| !c.is_zero() && Self::within_caps(&caps, e) && !exceeds_nilpotent(&order, e));
    }

    pub fn truncated(&self, caps: &[i32]) -> Self {
        let mut out = self.clone();
        out.caps = self
            .caps
            .iter()
            .zip(caps)
            .map(|(a, b)| (*a).min(*b))
            .collect();
        out.normalize();
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn scalar_mul(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return Self::zero(&self.order);
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.clone() * k;
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_order(rhs)?;
        if self.is_zero() {
            return Ok(rhs.clone());
        }
        if rhs.is_zero() {
            return Ok(self.clone());
        }
        let caps: Vec<i32> = self
            .caps
            .iter()
            .zip(&rhs.caps)
            .map(|(a, b)| (*a).min(*b))
            .collect();
        let mut terms = self.terms.clone();
        for (e, c) in &rhs.terms {
            let entry = terms.entry(e.clone()).or_insert_with(Rational::zero);
            *entry += c;
        }
        let mut out = LaurentSeries {
            order: self.order.clone(),
            terms,
            caps,
        };
        out.normalize();
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.neg())
    }

    /// Exact Cauchy product within the propagated caps.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.mul_capped(rhs, None)
    }

    /// Product with the result additionally clipped to `extra_caps`.
    ///
    /// Cap propagation shifts each operand's caps by the other's dominant
    /// monomial: exact for one Laurent variable (the dominant exponent is
    /// the pole order) and the right budget accounting in the iterated
    /// regime, where deep pole tails are always paid for by inner-variable
    /// degree. Residual corner effects are what the mandatory
    /// cap-stability recomputation exists to catch.
    fn mul_capped(&self, rhs: &Self, extra_caps: Option<&[i32]>) -> Result<Self> {
        self.check_order(rhs)?;
        if self.is_zero() || rhs.is_zero() {
            return Ok(Self::zero(&self.order));
        }
        let nv = self.order.num_vars();
        let dom_a = self.dominant_exps().expect("nonzero").clone();
        let dom_b = rhs.dominant_exps().expect("nonzero").clone();
        let mut caps = vec![UNBOUNDED; nv];
        for v in 0..nv {
            let b1 = propagate_cap(self.caps[v], dom_b[v]);
            let b2 = propagate_cap(rhs.caps[v], dom_a[v]);
            caps[v] = b1.min(b2);
            if let Some(extra) = extra_caps {
                caps[v] = caps[v].min(extra[v]);
            }
        }
        let mut terms: BTreeMap<Vec<i32>, Rational> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            'inner: for (eb, cb) in &rhs.terms {
                let mut e = Vec::with_capacity(nv);
                for v in 0..nv {
                    match ea[v].checked_add(eb[v]) {
                        Some(x) => {
                            if x > caps[v] {
                                continue 'inner;
                            }
                            e.push(x);
                        }
                        None => {
                            return Err(Error::Internal(format!(
                                "exponent overflow in {}",
                                self.order.name(Var(v))
                            )))
                        }
                    }
                }
                if exceeds_nilpotent(&self.order, &e) {
                    continue;
                }
                let c = ca.clone() * cb;
                let entry = terms.entry(e).or_insert_with(Rational::zero);
                *entry += c;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(LaurentSeries {
            order: self.order.clone(),
            terms,
            caps,
        })
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        let mut acc = Self::one(&self.order);
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Exponent vector of the magnitude-dominant stored monomial.
    pub fn dominant_exps(&self) -> Option<&Vec<i32>> {
        self.terms
            .keys()
            .min_by(|a, b| self.order.dominance_cmp(a, b))
    }

    /// Dominant monomial of the nilpotent-free part: the stored monomial of
    /// largest magnitude in the expansion regime.
    pub fn leading_unit_monomial(&self) -> Option<(&Vec<i32>, &Rational)> {
        let r = self.order.n_residue;
        let nv = self.order.num_vars();
        self.terms
            .iter()
            .filter(|(e, _)| e[r + 3..nv].iter().all(|x| *x == 0))
            .min_by(|(a, _), (b, _)| self.order.dominance_cmp(a, b))
    }

    /// Multiplicative inverse.
    ///
    /// The nilpotent-free part must be nonzero; its dominant monomial is
    /// factored out and the rest handled by a geometric expansion, followed
    /// by a Neumann series over the nilpotent remainder. The result is
    /// truncated to the working caps (tightened by what the input's caps
    /// can support).
    pub fn invert(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::Singular("cannot invert the zero series".into()));
        }
        let nv = self.order.num_vars();
        let r = self.order.n_residue;
        // Split off the nilpotent part.
        let mut unit_part = self.clone();
        let mut nil_part = Self::zero(&self.order);
        nil_part.caps = self.caps.clone();
        unit_part
            .terms
            .retain(|e, _| e[r + 3..nv].iter().all(|x| *x == 0));
        for (e, c) in &self.terms {
            if e[r + 3..nv].iter().any(|x| *x != 0) {
                nil_part.terms.insert(e.clone(), c.clone());
            }
        }
        if unit_part.is_zero() {
            return Err(Error::Singular(
                "leading coefficient is purely nilpotent".into(),
            ));
        }
        let (lead_e, lead_c) = unit_part.leading_unit_monomial().expect("nonzero");
        let lead_e = lead_e.clone();
        let lead_c = lead_c.clone();

        // Result caps: what the input knowledge supports, clipped by the
        // order's working caps.
        let mut result_caps = vec![UNBOUNDED; nv];
        for v in 0..nv {
            let own = if self.caps[v] == UNBOUNDED {
                UNBOUNDED
            } else {
                clamp_cap(self.caps[v] as i64 - 2 * lead_e[v] as i64)
            };
            result_caps[v] = own.min(self.order.working_caps[v]);
        }
        // Expansion margin: monomials slightly above the target caps can
        // re-enter the window through later negative-exponent factors; the
        // decrease per step is paid for by a t power, so the t cap bounds
        // the excursion.
        let margin = 2 + self.order.working_caps[r].clamp(0, 16);
        let mut work_caps = result_caps.clone();
        for v in 0..r + 2 {
            // Y vars and t, eps get the margin; lam and deltas are exact.
            if work_caps[v] != UNBOUNDED {
                work_caps[v] = clamp_cap(work_caps[v] as i64 + margin as i64);
            }
        }

        // u = unit_part / lead - 1, all monomials strictly below 1 in
        // magnitude.
        let inv_lead = Rational::one() / lead_c.clone();
        let neg_shift: Vec<i32> = lead_e.iter().map(|x| -x).collect();
        let mut u = unit_part.shifted(&neg_shift)?.scalar_mul(&inv_lead);
        u.terms.remove(&vec![0i32; nv]);
        debug_assert!(u
            .terms
            .keys()
            .all(|e| self.order.dominance_cmp(e, &vec![0; nv]) == Ordering::Greater));

        // (1 + u)^{-1} = sum (-u)^k, accumulated raw and claimed at the
        // result caps; the engine's cap-stability check guards optimism for
        // truncated inputs.
        let minus_u = u.neg();
        let mut acc = Self::one(&self.order);
        acc.caps = work_caps.clone();
        let mut term = Self::one(&self.order);
        term.caps = work_caps.clone();
        let mut guard = 0usize;
        while !term.is_zero() {
            term = term.mul_capped(&minus_u, Some(&work_caps))?;
            acc.terms = merge_terms(acc.terms, &term.terms);
            guard += term.num_terms().max(1);
            if guard > MAX_EXPANSION_TERMS {
                return Err(Error::Internal(
                    "geometric inversion did not terminate within the caps".into(),
                ));
            }
        }
        let used = self.used_vars();
        let mut unit_inv = acc.shifted(&neg_shift)?.scalar_mul(&inv_lead);
        unit_inv.caps = result_caps.clone();
        unit_inv.relax_unused_caps(&used);
        unit_inv.normalize();

        if nil_part.is_zero() {
            return Ok(unit_inv);
        }
        // (unit + nil)^{-1} = unit_inv * sum_k (-nil * unit_inv)^k, a finite
        // sum by nilpotency.
        let step = nil_part.mul_capped(&unit_inv, Some(&work_caps))?.neg();
        let mut total = unit_inv.clone();
        let mut power = unit_inv;
        for _ in 0..self.order.nilpotent_budget() {
            power = power.mul_capped(&step, Some(&work_caps))?;
            if power.is_zero() {
                break;
            }
            total.terms = merge_terms(total.terms, &power.terms);
        }
        total.caps = result_caps;
        total.relax_unused_caps(&used);
        total.normalize();
        Ok(total)
    }

    /// `exp` of a series with nonnegative exponents everywhere and no
    /// invertible constant term.
    pub fn exp(&self) -> Result<Self> {
        let nv = self.order.num_vars();
        let r = self.order.n_residue;
        for e in self.terms.keys() {
            if e.iter().any(|x| *x < 0) {
                return Err(Error::Domain(
                    "exp of a series with a pole is undefined".into(),
                ));
            }
            if e.iter().all(|x| *x == 0) {
                return Err(Error::Domain(
                    "exp of a series with a non-nilpotent constant term".into(),
                ));
            }
            let _ = r;
        }
        let mut caps = vec![0i32; nv];
        for v in 0..nv {
            caps[v] = self.caps[v].min(self.order.working_caps[v]);
        }
        let mut acc = Self::one(&self.order);
        acc.caps = caps.clone();
        let mut term = Self::one(&self.order);
        term.caps = caps.clone();
        let mut k: u64 = 0;
        let mut guard = 0usize;
        while !term.is_zero() {
            k += 1;
            term = term
                .mul_capped(self, Some(&caps))?
                .scalar_mul(&(Rational::one() / rat(k as i64)));
            acc.terms = merge_terms(acc.terms, &term.terms);
            guard += term.num_terms().max(1);
            if guard > MAX_EXPANSION_TERMS {
                return Err(Error::Internal("exp expansion did not terminate".into()));
            }
        }
        acc.relax_unused_caps(&self.used_vars());
        acc.normalize();
        Ok(acc)
    }

    /// `(1 + u)^alpha` via the generalized binomial series. `u` must have
    /// nonnegative exponents everywhere and no constant term.
    pub fn pow_binomial(&self, alpha: &Rational) -> Result<Self> {
        let nv = self.order.num_vars();
        for e in self.terms.keys() {
            if e.iter().any(|x| *x < 0) {
                return Err(Error::Domain(
                    "binomial series requires nonnegative valuation".into(),
                ));
            }
            if e.iter().all(|x| *x == 0) {
                return Err(Error::Domain(
                    "binomial series requires zero constant term".into(),
                ));
            }
        }
        let mut caps = vec![0i32; nv];
        for v in 0..nv {
            caps[v] = self.caps[v].min(self.order.working_caps[v]);
        }
        let mut acc = Self::one(&self.order);
        acc.caps = caps.clone();
        let mut upow = Self::one(&self.order);
        upow.caps = caps.clone();
        let mut k: u64 = 0;
        let mut guard = 0usize;
        loop {
            k += 1;
            upow = upow.mul_capped(self, Some(&caps))?;
            if upow.is_zero() {
                break;
            }
            let coeff = binomial(alpha, k);
            if !coeff.is_zero() {
                let contrib = upow.scalar_mul(&coeff);
                acc.terms = merge_terms(acc.terms, &contrib.terms);
            }
            guard += upow.num_terms().max(1);
            if guard > MAX_EXPANSION_TERMS {
                return Err(Error::Internal(
                    "binomial expansion did not terminate".into(),
                ));
            }
        }
        acc.relax_unused_caps(&self.used_vars());
        acc.normalize();
        Ok(acc)
    }

    /// Residue in `v`: the coefficient slice of `v^{-1}`.
    ///
    /// `v` must be the innermost residue variable still present; residues
    /// are taken innermost first.
    pub fn residue(&self, v: Var) -> Result<Self> {
        let r = self.order.n_residue;
        if v.0 >= r {
            return Err(Error::Usage(format!(
                "{} is not a residue variable",
                self.order.name(v)
            )));
        }
        for inner in v.0 + 1..r {
            if self.terms.keys().any(|e| e[inner] != 0) {
                return Err(Error::Usage(format!(
                    "residue in {} requested before consuming inner variable {}",
                    self.order.name(v),
                    self.order.name(Var(inner))
                )));
            }
        }
        if self.caps[v.0] < -1 {
            return Err(Error::CapViolation {
                var: self.order.name(v).into(),
                monomial: -1,
                cap: self.caps[v.0],
            });
        }
        let mut out = Self::zero(&self.order);
        out.caps = self.caps.clone();
        out.caps[v.0] = UNBOUNDED;
        for (e, c) in &self.terms {
            if e[v.0] == -1 {
                let mut e2 = e.clone();
                e2[v.0] = 0;
                out.terms.insert(e2, c.clone());
            }
        }
        Ok(out)
    }

    /// Exact coefficient of the monomial with the given exponent vector.
    pub fn coefficient(&self, exps: &[i32]) -> Result<Rational> {
        assert_eq!(exps.len(), self.order.num_vars());
        for (v, (x, cap)) in exps.iter().zip(&self.caps).enumerate() {
            if *x > *cap {
                return Err(Error::CapViolation {
                    var: self.order.name(Var(v)).into(),
                    monomial: *x,
                    cap: *cap,
                });
            }
        }
        Ok(self
            .terms
            .get(exps)
            .cloned()
            .unwrap_or_else(Rational::zero))
    }

    /// Evaluates a variable at 1 by collapsing its exponents. Fails if any
    /// stored exponent of `v` is negative, which callers use to assert
    /// polynomiality.
    pub fn collapse_var(&self, v: Var) -> Result<Self> {
        if self.terms.keys().any(|e| e[v.0] < 0) {
            return Err(Error::Domain(format!(
                "series has poles in {}; cannot evaluate at 1",
                self.order.name(v)
            )));
        }
        let mut out = Self::zero(&self.order);
        out.caps = self.caps.clone();
        out.caps[v.0] = UNBOUNDED;
        for (e, c) in &self.terms {
            let mut e2 = e.clone();
            e2[v.0] = 0;
            let entry = out.terms.entry(e2).or_insert_with(Rational::zero);
            *entry += c;
        }
        out.normalize();
        Ok(out)
    }

    /// The sub-series of all monomials with the given exponent of `v`,
    /// with that slot cleared.
    pub fn coefficient_of(&self, v: Var, k: i32) -> Self {
        let mut out = Self::zero(&self.order);
        out.caps = self.caps.clone();
        out.caps[v.0] = UNBOUNDED;
        for (e, c) in &self.terms {
            if e[v.0] == k {
                let mut e2 = e.clone();
                e2[v.0] = 0;
                out.terms.insert(e2, c.clone());
            }
        }
        out
    }

    /// Variables with a nonzero exponent somewhere in the support.
    fn used_vars(&self) -> Vec<bool> {
        let mut used = vec![false; self.order.num_vars()];
        for e in self.terms.keys() {
            for (v, x) in e.iter().enumerate() {
                if *x != 0 {
                    used[v] = true;
                }
            }
        }
        used
    }

    /// Series-producing operations cannot introduce variables their input
    /// does not involve; the result is exact to all orders there.
    fn relax_unused_caps(&mut self, used: &[bool]) {
        for (v, u) in used.iter().enumerate() {
            if !u {
                self.caps[v] = UNBOUNDED;
            }
        }
    }

    fn shifted(&self, delta: &[i32]) -> Result<Self> {
        let nv = self.order.num_vars();
        let mut out = Self::zero(&self.order);
        for v in 0..nv {
            out.caps[v] = if self.caps[v] == UNBOUNDED {
                UNBOUNDED
            } else {
                clamp_cap(self.caps[v] as i64 + delta[v] as i64)
            };
        }
        for (e, c) in &self.terms {
            let mut e2 = Vec::with_capacity(nv);
            for v in 0..nv {
                e2.push(e[v].checked_add(delta[v]).ok_or_else(|| {
                    Error::Internal("exponent overflow in monomial shift".into())
                })?);
            }
            out.terms.insert(e2, c.clone());
        }
        Ok(out)
    }

    /// The constant term (all exponents zero).
    pub fn constant_term(&self) -> Rational {
        self.terms
            .get(&vec![0i32; self.order.num_vars()])
            .cloned()
            .unwrap_or_else(Rational::zero)
    }
}

fn exceeds_nilpotent(order: &Arc<VariableOrder>, e: &[i32]) -> bool {
    let r = order.n_residue;
    order
        .nilpotent_orders
        .iter()
        .enumerate()
        .any(|(k, n)| e[r + 3 + k] > *n as i32)
}

fn propagate_cap(cap: i32, other_min: i32) -> i32 {
    if cap == UNBOUNDED {
        UNBOUNDED
    } else {
        clamp_cap(cap as i64 + other_min as i64)
    }
}

fn clamp_cap(x: i64) -> i32 {
    if x >= UNBOUNDED as i64 {
        UNBOUNDED
    } else if x <= -(UNBOUNDED as i64) {
        -UNBOUNDED
    } else {
        x as i32
    }
}

fn merge_terms(
    mut into: BTreeMap<Vec<i32>, Rational>,
    from: &BTreeMap<Vec<i32>, Rational>,
) -> BTreeMap<Vec<i32>, Rational> {
    for (e, c) in from {
        let entry = into.entry(e.clone()).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            into.remove(e);
        }
    }
    into
}

impl fmt::Display for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut keys: Vec<&Vec<i32>> = self.terms.keys().collect();
        keys.sort_by(|a, b| self.order.dominance_cmp(a, b));
        let mut first = true;
        for e in keys {
            let c = &self.terms[e];
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (v, x) in e.iter().enumerate() {
                if *x != 0 {
                    write!(f, "*{}^{}", self.order.name(Var(v)), x)?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
