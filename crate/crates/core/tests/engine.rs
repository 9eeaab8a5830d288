//! Cross-module checks: the plain pairing route against the
//! Chern-decorated route, the invariant two-form grading against explicit
//! odd-generator pairs, and the scaling-parameter structure.

use respair_core::chern::f_residue;
use respair_core::lie::ModuliParams;
use respair_core::pairing::{EtaSpec, PairingEngine};
use respair_core::rational::{rat, sign_pow, two_pow, Rational};
use num_traits::Zero;

fn engine(n: usize, d: i64, g: usize) -> PairingEngine {
    PairingEngine::new(ModuliParams::new(n, d, g).unwrap())
}

#[test]
fn chern_t0_equals_plain_pairing_on_fixed_specs() {
    let eng = engine(2, 1, 2);
    let specs = vec![
        EtaSpec {
            a: [(2u32, 1u32)].into_iter().collect(),
            f: [(2u32, 1u32)].into_iter().collect(),
            ..Default::default()
        },
        EtaSpec {
            f: [(2u32, 3u32)].into_iter().collect(),
            ..Default::default()
        },
        EtaSpec {
            b: vec![(2, 1), (2, 3)],
            ..Default::default()
        },
        EtaSpec {
            b: vec![(2, 2), (2, 4)],
            f: [(2u32, 0u32)].into_iter().collect(),
            ..Default::default()
        },
    ];
    for spec in specs {
        let plain = eng.pair(&spec).unwrap().value;
        let chern = eng.chern_pair(&spec, 2).unwrap();
        assert_eq!(chern.coefficient(0, 0), plain, "spec {spec:?}");
    }
}

#[test]
fn chern_t0_equals_plain_pairing_rank_three() {
    let eng = engine(3, 1, 2);
    let spec = EtaSpec {
        a: [(2u32, 2u32)].into_iter().collect(),
        f: [(2u32, 4u32)].into_iter().collect(),
        ..Default::default()
    };
    let plain = eng.pair(&spec).unwrap().value;
    let chern = eng.chern_pair(&spec, 2).unwrap();
    assert_eq!(chern.coefficient(0, 0), plain);
}

#[test]
fn lambda_grade_matches_explicit_odd_pairs() {
    // The lam^1 t^0 coefficient of the invariant pairing equals the sum of
    // the explicit b_2^k b_2^{k+g} pairings against exp f_2.
    let g = 2usize;
    let eng = engine(2, 1, g);
    let invariant = EtaSpec {
        bb_lambda: true,
        ..Default::default()
    };
    let paired = eng.chern_pair_exp(&invariant, 0).unwrap();
    let lam_grade = paired.coefficient(0, 1);
    let mut explicit = Rational::zero();
    for k in 1..=g as u32 {
        let spec = EtaSpec {
            b: vec![(2, k), (2, k + g as u32)],
            ..Default::default()
        };
        explicit += eng.pair(&spec).unwrap().value;
    }
    assert_eq!(lam_grade, explicit);
    assert!(!explicit.is_zero());
}

#[test]
fn rank_two_closed_form_identity_with_a_factor() {
    // Engine vs (-1)^{g-1-r} 2^{g-1-2r} F(g, g-1-r) at (2,1,3), r = 1:
    // a heavier case than the unit-level g = 2 checks.
    let g = 3usize;
    let r = 1u32;
    let eng = engine(2, 1, g);
    let spec = EtaSpec {
        a: [(2u32, r)].into_iter().collect(),
        bb_lambda: true,
        ..Default::default()
    };
    let t_cap = 2 * g as i32 - 2;
    let paired = eng.chern_pair_exp(&spec, t_cap).unwrap();
    let f = f_residue(g as u32, g as i64 - 1 - r as i64).unwrap();
    let scale = sign_pow((g as i64 - 1 - r as i64).rem_euclid(2) as u64)
        * two_pow(g as i64 - 1 - 2 * r as i64);
    let closed = f.scale(&scale).to_polynomial().expect("polynomial");
    for m in 0..=t_cap {
        assert_eq!(
            paired.t_coefficient(m),
            closed.coeff(m as usize),
            "t^{m} coefficient"
        );
    }
}

#[test]
fn exp_f2_pairing_agrees_between_routes() {
    // The plain route (eps grades of the bare spec summed at eps = 1)
    // against the Chern route at t = 0, for the full exponential class.
    let eng = engine(2, 1, 2);
    let spec = EtaSpec::default();
    let caps = eng.caps_policy(eng.params().real_dim() / 2, &spec, 0, 0);
    let run = eng.canonical_series(&spec, &caps).unwrap();
    let collapsed = run.series.collapse_var(run.order.eps()).unwrap();
    let plain = collapsed.constant_term();
    let chern = eng.chern_pair_exp(&spec, 0).unwrap();
    assert_eq!(chern.coefficient(0, 0), plain);
    assert!(!plain.is_zero());
}

#[test]
fn rank_two_closed_form_identity_genus_four() {
    // Full t- and lam-graded comparison at (2,1,4), r = 0.
    let g = 4usize;
    let eng = engine(2, 1, g);
    let spec = EtaSpec {
        bb_lambda: true,
        ..Default::default()
    };
    let t_cap = 2 * g as i32 - 2;
    let paired = eng.chern_pair_exp(&spec, t_cap).unwrap();
    let f = f_residue(g as u32, g as i64 - 1).unwrap();
    let scale = sign_pow((g as i64 - 1).rem_euclid(2) as u64) * two_pow(g as i64 - 1);
    let closed = f.scale(&scale).to_polynomial().expect("polynomial");
    for m in 0..=t_cap {
        assert_eq!(paired.t_coefficient(m), closed.coeff(m as usize), "t^{m}");
    }
}

#[test]
fn rank_three_witness_is_nonzero() {
    // The discriminant class against exp f_2 at (3,1,2); the hand value
    // through the residue formula is -3 (determinant 3 eps^2 per genus
    // factor, two identical Weyl terms, prefactor -1/6).
    let eng = engine(3, 1, 2);
    let cls = respair_core::symfunc::discriminant_class(3, 2).unwrap();
    let v = eng.pair_class(&cls, true).unwrap();
    assert_eq!(v, rat(-3));
}

#[test]
fn eps_grading_respects_dimension_bounds() {
    for (n, g) in [(2usize, 2usize), (3, 2)] {
        let eng = engine(n, 1, g);
        let dim = eng.params().real_dim();
        let specs = vec![
            EtaSpec {
                a: [(2u32, 1u32)].into_iter().collect(),
                f: [(2u32, 2u32)].into_iter().collect(),
                ..Default::default()
            },
            EtaSpec {
                b: vec![(2, 1), (2, 1 + g as u32)],
                f: [(2u32, 1u32)].into_iter().collect(),
                ..Default::default()
            },
        ];
        for spec in specs {
            let caps = eng.default_caps(&spec, 0, 0);
            let run = eng.canonical_series(&spec, &caps).unwrap();
            let eps = run.order.eps();
            let a_deg: u32 = spec.a.iter().map(|(r, m)| 2 * r * m).sum();
            let b_deg: u32 = spec.b.iter().map(|(r, _)| 2 * r - 1).sum();
            let deg_bound = (dim - a_deg - b_deg) / 2;
            let val_bound =
                (2 * (n as i64 - 1) * (g as i64 - 1) - spec.b.len() as i64) / 2;
            for (e, _) in run.series.terms() {
                let k = e[eps.0] as i64;
                assert!(k >= 0, "negative eps power in {spec:?}");
                assert!(k <= deg_bound as i64, "eps degree bound in {spec:?}");
                if val_bound > 0 {
                    assert!(k >= val_bound, "eps valuation bound in {spec:?}");
                }
            }
        }
    }
}
