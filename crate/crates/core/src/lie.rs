//! Root-system inputs for `SU(n)`: the coordinates `X_i` on the trace-free
//! Cartan algebra, elementary symmetric polynomials and their directional
//! derivatives and Hessians, the degree twist vector, and the Weyl group
//! `S_{n-1}` acting on the first `n - 1` coordinates.
//!
//! Coordinates: `Y_j = X_j - X_{j+1}` and `X_1 + ... + X_n = 0`, solved
//! explicitly as `X_i = sum_{k>=i} Y_k - (1/n) sum_k k Y_k`.

use std::sync::Arc;

use num_integer::Integer as _;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{rat, ratio, Rational};
use crate::series::{LaurentSeries, VariableOrder};

/// Validated `(n, d, g)` of the moduli problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModuliParams {
    pub n: usize,
    pub d: i64,
    pub g: usize,
}

impl ModuliParams {
    pub fn new(n: usize, d: i64, g: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Usage(format!(
                "rank must be at least 2 (got {n}); rank 1 has a trivial ring"
            )));
        }
        if g < 2 {
            return Err(Error::Usage(format!("genus must be at least 2 (got {g})")));
        }
        if (n as i64).gcd(&d) != 1 {
            return Err(Error::Usage(format!(
                "rank {n} and degree {d} must be coprime"
            )));
        }
        Ok(ModuliParams { n, d, g })
    }

    /// Real dimension of the moduli space, `2(n^2 - 1)(g - 1)`.
    pub fn real_dim(&self) -> u32 {
        2 * (self.n as u32 * self.n as u32 - 1) * (self.g as u32 - 1)
    }

    /// Vanishing threshold of the Pontryagin ring, `2n(n-1)(g-1)`.
    pub fn pontryagin_bound(&self) -> u32 {
        2 * self.n as u32 * (self.n as u32 - 1) * (self.g as u32 - 1)
    }
}

/// A Weyl group element: a permutation of `{0, .., n-2}` acting on the
/// first `n - 1` coordinates of vectors in the Cartan algebra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeylElement(pub Vec<usize>);

impl WeylElement {
    /// Permutes the first `n - 1` entries, fixing the last.
    pub fn apply(&self, v: &[Rational]) -> Vec<Rational> {
        let mut out = v.to_vec();
        for (i, &target) in self.0.iter().enumerate() {
            out[target] = v[i].clone();
        }
        out
    }
}

/// All `(n-1)!` permutations, identity first.
pub fn weyl_elements(n: usize) -> Vec<WeylElement> {
    let m = n - 1;
    let mut perms = vec![vec![]];
    for k in 0..m {
        let mut next = Vec::new();
        for p in &perms {
            for slot in 0..=p.len() {
                let mut q: Vec<usize> = p.clone();
                q.insert(slot, k);
                next.push(q);
            }
        }
        perms = next;
    }
    perms.sort();
    perms.into_iter().map(WeylElement).collect()
}

/// The degree twist: `n`-vector with `j`-th entry
/// `d/n - floor(jd/n) + floor((j-1)d/n)`; entries sum to zero.
pub fn c_tilde(n: usize, d: i64) -> Result<Vec<Rational>> {
    if (n as i64).gcd(&d) != 1 {
        return Err(Error::Usage(format!(
            "rank {n} and degree {d} must be coprime"
        )));
    }
    let nn = n as i64;
    let v: Vec<Rational> = (1..=nn)
        .map(|j| {
            let fj = num_integer::Integer::div_floor(&(j * d), &nn);
            let fjm = num_integer::Integer::div_floor(&((j - 1) * d), &nn);
            ratio(d, nn) - rat(fj) + rat(fjm)
        })
        .collect();
    debug_assert!(v.iter().cloned().sum::<Rational>().is_zero());
    Ok(v)
}

/// Lattice generator `e_hat_j` (1-based): `(0, .., 1, -1, .., 0)`.
pub fn e_hat(n: usize, j: usize) -> Vec<Rational> {
    assert!((1..n).contains(&j));
    let mut v = vec![Rational::zero(); n];
    v[j - 1] = rat(1);
    v[j] = rat(-1);
    v
}

/// All root-system data for one computation, over a shared variable
/// order whose residue variables are `Y_1 .. Y_{n-1}`.
pub struct RootData {
    pub n: usize,
    order: Arc<VariableOrder>,
    x: Vec<LaurentSeries>,
}

impl RootData {
    pub fn new(n: usize, order: &Arc<VariableOrder>) -> Self {
        assert_eq!(order.residue_count(), n - 1);
        let x = x_coordinates(n, order);
        RootData {
            n,
            order: order.clone(),
            x,
        }
    }

    pub fn order(&self) -> &Arc<VariableOrder> {
        &self.order
    }

    /// `X_i` as polynomials in the `Y` variables (1-based index).
    pub fn x(&self, i: usize) -> &LaurentSeries {
        &self.x[i - 1]
    }

    pub fn xs(&self) -> &[LaurentSeries] {
        &self.x
    }

    /// Elementary symmetric polynomial `sigma_r(X)` in the `Y` variables.
    pub fn sigma(&self, r: usize) -> Result<LaurentSeries> {
        if !(2..=self.n).contains(&r) {
            return Err(Error::Usage(format!(
                "sigma_{r} undefined for rank {}",
                self.n
            )));
        }
        elementary_symmetric(&self.order, &self.x, r)
    }

    /// Directional derivative of `sigma_r` at the symbolic point along a
    /// constant vector `v` in the Cartan algebra:
    /// `sum_i v_i e_{r-1}(X without X_i)`.
    pub fn d_sigma(&self, r: usize, v: &[Rational]) -> Result<LaurentSeries> {
        if !(2..=self.n).contains(&r) {
            return Err(Error::Usage(format!(
                "sigma_{r} undefined for rank {}",
                self.n
            )));
        }
        assert_eq!(v.len(), self.n);
        let mut acc = LaurentSeries::zero(&self.order);
        for i in 0..self.n {
            if v[i].is_zero() {
                continue;
            }
            let omitted: Vec<LaurentSeries> = self
                .x
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, s)| s.clone())
                .collect();
            let partial = elementary_symmetric(&self.order, &omitted, r - 1)?;
            acc = acc.add(&partial.scalar_mul(&v[i]))?;
        }
        Ok(acc)
    }

    /// Hessian of `sigma_r` in the lattice basis: the `(n-1) x (n-1)`
    /// matrix of `sum_{a != b} (e_i)_a (e_j)_b e_{r-2}(X without a, b)`.
    pub fn hessian_sigma(&self, r: usize) -> Result<Vec<Vec<LaurentSeries>>> {
        if !(2..=self.n).contains(&r) {
            return Err(Error::Usage(format!(
                "sigma_{r} undefined for rank {}",
                self.n
            )));
        }
        let m = self.n - 1;
        let mut out = vec![vec![LaurentSeries::zero(&self.order); m]; m];
        for i in 1..=m {
            for j in 1..=m {
                let ei = e_hat(self.n, i);
                let ej = e_hat(self.n, j);
                let mut acc = LaurentSeries::zero(&self.order);
                for a in 0..self.n {
                    if ei[a].is_zero() {
                        continue;
                    }
                    for b in 0..self.n {
                        if a == b || ej[b].is_zero() {
                            continue;
                        }
                        let omitted: Vec<LaurentSeries> = self
                            .x
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| *k != a && *k != b)
                            .map(|(_, s)| s.clone())
                            .collect();
                        let e2 = elementary_symmetric(&self.order, &omitted, r - 2)?;
                        acc = acc.add(&e2.scalar_mul(&(ei[a].clone() * &ej[b])))?;
                    }
                }
                out[i - 1][j - 1] = acc;
            }
        }
        Ok(out)
    }

    /// `prod_{i<j} (X_i - X_j)^m`.
    pub fn discriminant_power(&self, m: u32) -> Result<LaurentSeries> {
        let mut acc = LaurentSeries::one(&self.order);
        for i in 1..=self.n {
            for j in i + 1..=self.n {
                let root = self.x(i).sub(self.x(j))?;
                acc = acc.mul(&root.pow(m)?)?;
            }
        }
        Ok(acc)
    }

    /// The root `X_i - X_j` as a series (any `i != j`).
    pub fn root(&self, i: usize, j: usize) -> Result<LaurentSeries> {
        self.x(i).sub(self.x(j))
    }
}

/// `X_i = sum_{k=i}^{n-1} Y_k - (1/n) sum_{k=1}^{n-1} k Y_k`.
pub fn x_coordinates(n: usize, order: &Arc<VariableOrder>) -> Vec<LaurentSeries> {
    let mut correction = LaurentSeries::zero(order);
    for k in 1..n {
        let term = LaurentSeries::monomial(order, &[(order.y(k - 1), 1)], ratio(-(k as i64), n as i64));
        correction = correction.add(&term).expect("same order");
    }
    (1..=n)
        .map(|i| {
            let mut xi = correction.clone();
            for k in i..n {
                let term = LaurentSeries::var(order, order.y(k - 1));
                xi = xi.add(&term).expect("same order");
            }
            xi
        })
        .collect()
}

/// Elementary symmetric polynomial `e_r` of a list of series, by the
/// one-at-a-time product recurrence.
pub fn elementary_symmetric(
    order: &Arc<VariableOrder>,
    values: &[LaurentSeries],
    r: usize,
) -> Result<LaurentSeries> {
    if r > values.len() {
        return Ok(LaurentSeries::zero(order));
    }
    // e[k] after processing a prefix of the values.
    let mut e: Vec<LaurentSeries> = vec![LaurentSeries::zero(order); r + 1];
    e[0] = LaurentSeries::one(order);
    for v in values {
        for k in (1..=r).rev() {
            let bump = e[k - 1].mul(v)?;
            e[k] = e[k].add(&bump)?;
        }
    }
    Ok(e[r].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::CapSpec;

    fn order_for(n: usize) -> Arc<VariableOrder> {
        VariableOrder::new(n - 1, &[], &CapSpec::uniform(n - 1, 12, 4, 6, 3))
    }

    #[test]
    fn params_validation() {
        assert!(ModuliParams::new(2, 1, 2).is_ok());
        assert!(ModuliParams::new(2, 4, 2).is_err());
        assert!(ModuliParams::new(1, 1, 2).is_err());
        assert!(ModuliParams::new(2, 1, 1).is_err());
        let p = ModuliParams::new(3, 1, 2).unwrap();
        assert_eq!(p.real_dim(), 16);
        assert_eq!(p.pontryagin_bound(), 12);
    }

    #[test]
    fn x_coordinates_satisfy_defining_relations() {
        for n in 2..=4 {
            let ord = order_for(n);
            let rd = RootData::new(n, &ord);
            // Sum of X_i vanishes identically.
            let mut sum = LaurentSeries::zero(&ord);
            for i in 1..=n {
                sum = sum.add(rd.x(i)).unwrap();
            }
            assert!(sum.is_zero(), "sum X_i != 0 at n={n}");
            // X_j - X_{j+1} = Y_j.
            for j in 1..n {
                let diff = rd.x(j).sub(rd.x(j + 1)).unwrap();
                assert_eq!(diff, LaurentSeries::var(&ord, ord.y(j - 1)));
            }
        }
        // n = 2 explicit halves.
        let ord = order_for(2);
        let rd = RootData::new(2, &ord);
        let y = ord.y(0);
        assert_eq!(
            rd.x(1),
            &LaurentSeries::monomial(&ord, &[(y, 1)], ratio(1, 2))
        );
        assert_eq!(
            rd.x(2),
            &LaurentSeries::monomial(&ord, &[(y, 1)], ratio(-1, 2))
        );
    }

    #[test]
    fn sigma_two_is_half_norm() {
        for n in 2..=4 {
            let ord = order_for(n);
            let rd = RootData::new(n, &ord);
            // sigma_2 = -1/2 sum X_i^2.
            let mut norm = LaurentSeries::zero(&ord);
            for i in 1..=n {
                norm = norm.add(&rd.x(i).pow(2).unwrap()).unwrap();
            }
            let expect = norm.scalar_mul(&ratio(-1, 2));
            assert_eq!(rd.sigma(2).unwrap(), expect);
        }
        // n = 2: sigma_2 = -Y^2/4; vanishes at Y = 0.
        let ord = order_for(2);
        let rd = RootData::new(2, &ord);
        let y = ord.y(0);
        assert_eq!(
            rd.sigma(2).unwrap(),
            LaurentSeries::monomial(&ord, &[(y, 2)], ratio(-1, 4))
        );
        assert!(rd.sigma(2).unwrap().constant_term().is_zero());
        assert!(rd.sigma(1).is_err());
    }

    #[test]
    fn d_sigma_two_on_lattice_generators() {
        for n in 2..=4 {
            let ord = order_for(n);
            let rd = RootData::new(n, &ord);
            for j in 1..n {
                let d = rd.d_sigma(2, &e_hat(n, j)).unwrap();
                let expect = LaurentSeries::monomial(&ord, &[(ord.y(j - 1), 1)], rat(-1));
                assert_eq!(d, expect, "d sigma_2 (e_{j}) at n={n}");
            }
        }
    }

    #[test]
    fn d_sigma_matches_shift_expansion_oracle() {
        // Independent route: sigma_r(X + h v) - sigma_r(X) has h-linear
        // part equal to d_sigma(r, v). The shift parameter rides in the
        // unused t slot.
        let n = 3;
        let ord = order_for(n);
        let rd = RootData::new(n, &ord);
        let h = ord.t();
        let ct = c_tilde(n, 1).unwrap();
        for r in 2..=n {
            for v in [e_hat(n, 1), e_hat(n, 2), ct.clone()] {
                let shifted: Vec<LaurentSeries> = rd
                    .xs()
                    .iter()
                    .zip(&v)
                    .map(|(x, vi)| {
                        x.add(&LaurentSeries::monomial(&ord, &[(h, 1)], vi.clone()))
                            .unwrap()
                    })
                    .collect();
                let sig_shift = elementary_symmetric(&ord, &shifted, r).unwrap();
                let linear = sig_shift.coefficient_of(h, 1);
                assert_eq!(linear, rd.d_sigma(r, &v).unwrap(), "r={r}");
            }
        }
    }

    #[test]
    fn d_sigma_of_twist_is_linear_combination() {
        // d sigma_2 (w ct) = sum beta_j(w) Y_j with rational beta.
        let n = 3;
        let ord = order_for(n);
        let rd = RootData::new(n, &ord);
        let ct = c_tilde(3, 1).unwrap();
        for w in weyl_elements(3) {
            let d = rd.d_sigma(2, &w.apply(&ct)).unwrap();
            for (e, _) in d.terms() {
                let total: i32 = e.iter().sum();
                assert_eq!(total, 1, "degree-one monomials only");
            }
        }
    }

    #[test]
    fn hessian_sigma_two_is_negated_cartan() {
        for n in 2..=4 {
            let ord = order_for(n);
            let rd = RootData::new(n, &ord);
            let h = rd.hessian_sigma(2).unwrap();
            for i in 0..n - 1 {
                for j in 0..n - 1 {
                    let expect = match (i as i64 - j as i64).abs() {
                        0 => LaurentSeries::int(&ord, -2),
                        1 => LaurentSeries::int(&ord, 1),
                        _ => LaurentSeries::zero(&ord),
                    };
                    assert_eq!(h[i][j], expect, "entry ({i},{j}) at n={n}");
                }
            }
        }
    }

    /// Cofactor-expansion oracle on rational matrices.
    fn cofactor_det(m: &[Vec<Rational>]) -> Rational {
        match m.len() {
            0 => rat(1),
            1 => m[0][0].clone(),
            n => {
                let mut acc = Rational::zero();
                for col in 0..n {
                    if m[0][col].is_zero() {
                        continue;
                    }
                    let minor: Vec<Vec<Rational>> = m[1..]
                        .iter()
                        .map(|row| {
                            row.iter()
                                .enumerate()
                                .filter(|(c, _)| *c != col)
                                .map(|(_, x)| x.clone())
                                .collect()
                        })
                        .collect();
                    let sign = if col % 2 == 0 { rat(1) } else { rat(-1) };
                    acc += sign * m[0][col].clone() * cofactor_det(&minor);
                }
                acc
            }
        }
    }

    #[test]
    fn hessian_sigma_two_determinant() {
        // det of the (n-1)x(n-1) matrix (-2, 1)-tridiagonal is (-1)^{n-1} n.
        for n in 2..=4usize {
            let ord = order_for(n);
            let rd = RootData::new(n, &ord);
            let h = rd.hessian_sigma(2).unwrap();
            let m: Vec<Vec<Rational>> = h
                .iter()
                .map(|row| row.iter().map(|s| s.constant_term()).collect())
                .collect();
            let det = cofactor_det(&m);
            let expect = rat(if (n - 1) % 2 == 0 { n as i64 } else { -(n as i64) });
            assert_eq!(det, expect);
        }
    }

    #[test]
    fn hessian_sigma_three_is_linear_in_y() {
        let ord = order_for(3);
        let rd = RootData::new(3, &ord);
        let h = rd.hessian_sigma(3).unwrap();
        for row in &h {
            for entry in row {
                for (e, _) in entry.terms() {
                    let total: i32 = e.iter().sum();
                    assert_eq!(total, 1);
                }
            }
        }
    }

    #[test]
    fn c_tilde_values_and_telescoping() {
        assert_eq!(c_tilde(2, 1).unwrap(), vec![ratio(1, 2), ratio(-1, 2)]);
        assert_eq!(
            c_tilde(3, 1).unwrap(),
            vec![ratio(1, 3), ratio(1, 3), ratio(-2, 3)]
        );
        assert!(c_tilde(2, 4).is_err());
        for (n, d) in [(2, 1), (3, 1), (3, 2), (4, 3), (5, -2)] {
            let v = c_tilde(n, d).unwrap();
            assert!(v.iter().cloned().sum::<Rational>().is_zero(), "({n},{d})");
        }
    }

    #[test]
    fn weyl_action_preserves_zero_sum() {
        let ct = c_tilde(4, 3).unwrap();
        for w in weyl_elements(4) {
            let v = w.apply(&ct);
            assert!(v.iter().cloned().sum::<Rational>().is_zero());
            // Last coordinate fixed.
            assert_eq!(v[3], ct[3]);
        }
    }

    #[test]
    fn weyl_counts() {
        assert_eq!(weyl_elements(2).len(), 1);
        assert_eq!(weyl_elements(3).len(), 2);
        assert_eq!(weyl_elements(4).len(), 6);
        assert_eq!(weyl_elements(2)[0], WeylElement(vec![0]));
    }

    #[test]
    fn discriminant_powers() {
        // n=2, m=2: Y^2.
        let ord = order_for(2);
        let rd = RootData::new(2, &ord);
        let y = ord.y(0);
        assert_eq!(
            rd.discriminant_power(2).unwrap(),
            LaurentSeries::monomial(&ord, &[(y, 2)], rat(1))
        );
        assert_eq!(rd.discriminant_power(0).unwrap(), LaurentSeries::one(&ord));
        // n=3, m=1: Y1 Y2 (Y1 + Y2).
        let ord = order_for(3);
        let rd = RootData::new(3, &ord);
        let y1 = ord.y(0);
        let y2 = ord.y(1);
        let expect = LaurentSeries::var(&ord, y1)
            .mul(&LaurentSeries::var(&ord, y2))
            .unwrap()
            .mul(
                &LaurentSeries::var(&ord, y1)
                    .add(&LaurentSeries::var(&ord, y2))
                    .unwrap(),
            )
            .unwrap();
        assert_eq!(rd.discriminant_power(1).unwrap(), expect);
    }
}
