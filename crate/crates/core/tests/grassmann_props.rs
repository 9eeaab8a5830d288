//! Structural properties of the exterior algebra on random elements.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use respair_core::grassmann::{GrassmannAlgebra, GrassmannElement};
use respair_core::rational::ratio;
use respair_core::series::{LaurentSeries, VariableOrder};

fn random_homogeneous(
    alg: &std::sync::Arc<GrassmannAlgebra>,
    ord: &std::sync::Arc<VariableOrder>,
    rng: &mut StdRng,
    degree: usize,
) -> GrassmannElement {
    let gens = alg.generators();
    let mut acc = GrassmannElement::zero(alg, ord);
    for _ in 0..rng.random_range(1..4) {
        // A random product of `degree` distinct generators.
        let mut picks: Vec<usize> = (0..gens).collect();
        let mut factor = GrassmannElement::scalar(
            alg,
            LaurentSeries::constant(ord, ratio(rng.random_range(-5..6), rng.random_range(1..4))),
        );
        for _ in 0..degree {
            let idx = rng.random_range(0..picks.len());
            let bit = picks.swap_remove(idx);
            let j = bit % alg.rows() + 1;
            let k = bit / alg.rows() + 1;
            factor = factor
                .wedge(&GrassmannElement::generator(alg, ord, j, k))
                .unwrap();
        }
        acc = acc.add(&factor).unwrap();
    }
    acc
}

#[test]
fn wedge_is_associative() {
    let alg = GrassmannAlgebra::new(2, 2).unwrap();
    let ord = VariableOrder::scalar();
    let mut rng = StdRng::seed_from_u64(42);
    for _ in 0..30 {
        let (da, db, dc) = (
            rng.random_range(0..3usize),
            rng.random_range(0..3usize),
            rng.random_range(0..3usize),
        );
        let a = random_homogeneous(&alg, &ord, &mut rng, da);
        let b = random_homogeneous(&alg, &ord, &mut rng, db);
        let c = random_homogeneous(&alg, &ord, &mut rng, dc);
        let lhs = a.wedge(&b).unwrap().wedge(&c).unwrap();
        let rhs = a.wedge(&b.wedge(&c).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }
}

#[test]
fn wedge_is_graded_commutative() {
    let alg = GrassmannAlgebra::new(2, 2).unwrap();
    let ord = VariableOrder::scalar();
    let mut rng = StdRng::seed_from_u64(43);
    for _ in 0..40 {
        let da = rng.random_range(0..4usize);
        let db = rng.random_range(0..4usize);
        let a = random_homogeneous(&alg, &ord, &mut rng, da);
        let b = random_homogeneous(&alg, &ord, &mut rng, db);
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        let expect = if da * db % 2 == 0 { ba.clone() } else { ba.neg() };
        assert_eq!(ab, expect, "degrees {da}, {db}");
    }
}
