use std::sync::Arc;

use phigamma::lubin_tate::{LTGroup, PhiChoice};
use phigamma::{Field, FieldElem, LaurentSeries, OperatorContext, RobbaError, Window};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q3() -> Field {
    Field::make(3, 1, &[-1, 1], 1, &[-3, 1], 12).unwrap()
}

fn ctx_for(f: Field, w: Window) -> OperatorContext {
    let g = LTGroup::make(f, PhiChoice::Special, 8, w).unwrap();
    OperatorContext::new(Arc::new(g)).unwrap()
}

fn ctx() -> OperatorContext {
    ctx_for(q3(), Window::new(-40, 60))
}

fn mono(c: &OperatorContext, k: i64) -> LaurentSeries {
    LaurentSeries::monomial(c.field().one(), k, c.window())
}

fn random_poly(c: &OperatorContext, rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> LaurentSeries {
    let f = c.field();
    let terms: Vec<(i64, FieldElem)> = (lo..=hi).map(|k| (k, f.random(rng, 0, 1, 20))).collect();
    LaurentSeries::from_terms(f, c.window(), &terms).unwrap()
}

#[test]
fn psi_base_cases() {
    let c = ctx();
    let f = c.field();
    assert!(c.psi(&mono(&c, 1)).unwrap().is_zero());
    let p2 = c.psi(&mono(&c, 2)).unwrap();
    assert!(p2.coeff(0).eq_prec(&f.from_int(-2)));
    let pm1 = c.psi(&mono(&c, -1)).unwrap();
    assert!(pm1.coeff(-1).eq_prec(&f.one()));
    assert!(c.psi(&LaurentSeries::one(f, c.window())).unwrap().coeff(0).eq_prec(&f.one()));
}

#[test]
fn phi_basics() {
    let c = ctx();
    let f = c.field();
    let one = LaurentSeries::one(f, c.window());
    assert!(c.phi_q(&one).unwrap().assert_agrees(&one, 12).is_ok());
    let lhs = c.phi_q(c.t()).unwrap();
    let rhs = c.t().scale(f.pi());
    assert!(lhs.assert_agrees(&rhs, 8).is_ok());
    // annulus expansion: u^{-3} - 3u^{-5} + 9u^{-7} - ...
    let pm = c.phi_q(&mono(&c, -1)).unwrap();
    assert!(pm.coeff(-3).eq_prec(&f.one()));
    assert!(pm.coeff(-5).eq_prec(&f.from_int(-3)));
    assert!(pm.coeff(-7).eq_prec(&f.from_int(9)));
}

#[test]
fn sigma_basics() {
    let c = ctx();
    let f = c.field();
    let t = c.t().clone().truncate(40);
    for &a in c.gamma_test_set() {
        let lhs = c.sigma_a(&t, a).unwrap();
        assert!(lhs.assert_agrees(&t.scale(a), 8).is_ok());
    }
    let s = mono(&c, 5).add(&mono(&c, -2)).unwrap();
    assert!(c.sigma_a(&s, f.one()).unwrap().assert_agrees(&s, 12).is_ok());
    let xi = f.teichmuller(&[2]).unwrap();
    for k in [-3, 1, 4] {
        let lhs = c.sigma_a(&mono(&c, k), xi).unwrap();
        let rhs = mono(&c, k).scale(xi.pow(k));
        assert!(lhs.assert_agrees(&rhs, 12).is_ok());
    }
    assert_eq!(c.sigma_a(&s, f.pi()).unwrap_err(), RobbaError::NotAUnit);
}

#[test]
fn partial_and_residue() {
    let c = ctx();
    let f = c.field();
    let dt = c.partial(c.t()).unwrap();
    assert!(dt.assert_agrees(&LaurentSeries::one(f, c.window()), 8).is_ok());
    assert!(c.partial(&LaurentSeries::constant(f.from_int(7), c.window())).unwrap().is_zero());
    assert!(c.residue(&mono(&c, -1)).unwrap().eq_prec(&f.one()));
    assert!(c.residue(&LaurentSeries::one(f, c.window())).unwrap().is_zero());
    let r = c.residue(&mono(&c, -3)).unwrap();
    assert!(r.eq_prec(&f.from_ratio(-1, 8)));
    assert_eq!(r.cap_abs(3).to_int_mod(3), Some(10));
    let w = Window::new(0, 20);
    let narrow = LaurentSeries::monomial(f.one(), 2, w);
    assert!(matches!(c.residue(&narrow), Err(RobbaError::WindowTooNarrow(_))));
}

#[test]
fn anti_partial_examples() {
    let c = ctx();
    let f = c.field();
    let one = LaurentSeries::one(f, c.window());
    let t = c.anti_partial(&one).unwrap();
    assert!(t.assert_agrees(c.t(), 8).is_ok());
    let target = c.group().dmult().mul(&LaurentSeries::monomial(f.from_int(3), 2, c.window())).unwrap();
    let u3 = c.anti_partial(&target).unwrap();
    assert!(u3.assert_agrees(&mono(&c, 3), 8).is_ok());
    assert_eq!(c.anti_partial(&mono(&c, -1)).unwrap_err(), RobbaError::NonzeroResidue);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_poly(&c, &mut rng, -4, 6);
    let back = c.anti_partial(&c.partial(&s).unwrap()).unwrap();
    let diff = back.sub(&s).unwrap();
    for k in -4..=20 {
        if k != 0 {
            assert!(diff.coeff(k).is_zero(), "degree {k}");
        }
    }
}

#[test]
fn psi_left_inverse_of_phi() {
    let c = ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let s = random_poly(&c, &mut rng, -4, 8);
        let back = c.psi(&c.phi_q(&s).unwrap()).unwrap();
        assert!(back.agreement(&s).is_ok());
        assert!(back.clone().truncate(12).assert_agrees(&s, 8).is_ok(), "{back:?}");
    }
}

#[test]
fn psi_commutes_with_sigma() {
    let c = ctx();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = random_poly(&c, &mut rng, -3, 12);
    for &a in c.gamma_test_set() {
        let lhs = c.psi(&c.sigma_a(&s, a).unwrap()).unwrap();
        let rhs = c.sigma_a(&c.psi(&s).unwrap(), a).unwrap();
        assert!(lhs.agreement(&rhs).is_ok());
        assert!(lhs.clone().truncate(6).assert_agrees(&rhs, 6).is_ok(), "{lhs:?} {rhs:?}");
    }
}

#[test]
fn residue_transforms() {
    let c = ctx();
    let f = c.field();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = random_poly(&c, &mut rng, -5, 5);
    let r = c.residue(&s).unwrap();
    let rphi = c.residue(&c.phi_q(&s).unwrap()).unwrap();
    let ratio = f.from_int(f.q()) / f.pi();
    assert!((rphi - ratio * r).val_bound() >= 8, "{rphi} vs {r}");
    for &a in c.gamma_test_set() {
        let rs = c.residue(&c.sigma_a(&s, a).unwrap()).unwrap();
        assert!((rs - a.inv().unwrap() * r).val_bound() >= 8);
    }
    let rpsi = c.residue(&c.psi(&s).unwrap()).unwrap();
    assert!((rpsi - f.pi() / f.from_int(f.q()) * r).val_bound() >= 8);
    let rd = c.residue(&c.partial(&s).unwrap()).unwrap();
    assert!(rd.val_bound() >= 8);
}

#[test]
fn general_group_psi() {
    let f = q3();
    let w = Window::new(-30, 60);
    let phi = LaurentSeries::from_terms(f, w, &[(1, f.pi()), (2, f.pi()), (3, f.one())]).unwrap();
    let g = LTGroup::make(f, PhiChoice::Series(phi), 8, w).unwrap();
    let c = OperatorContext::new(Arc::new(g)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = random_poly(&c, &mut rng, -2, 6);
    let back = c.psi(&c.phi_q(&s).unwrap()).unwrap();
    assert!(back.agreement(&s).is_ok());
    assert!(back.clone().truncate(8).assert_agrees(&s, 6).is_ok(), "{back:?}");
}

mod invariants {
    use super::*;
    use proptest::prelude::*;

    fn poly(c: &OperatorContext, seed: u64, lo: i64, hi: i64) -> LaurentSeries {
        random_poly(c, &mut ChaCha8Rng::seed_from_u64(seed), lo, hi)
    }

    fn close(a: &LaurentSeries, b: &LaurentSeries, top: i64, floor: i64) -> bool {
        a.clone().truncate(top).assert_agrees(&b.clone().truncate(top), floor).is_ok()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn partial_phi(seed in any::<u64>()) {
            let c = ctx();
            let s = poly(&c, seed, -3, 8);
            let lhs = c.partial(&c.phi_q(&s).unwrap()).unwrap();
            let rhs = c.phi_q(&c.partial(&s).unwrap()).unwrap().scale(c.field().pi());
            prop_assert!(close(&lhs, &rhs, 12, 6));
        }

        #[test]
        fn partial_sigma(seed in any::<u64>(), k in 0usize..3) {
            let c = ctx();
            let s = poly(&c, seed, -3, 8).truncate(30);
            let a = c.gamma_test_set()[k % c.gamma_test_set().len()];
            let lhs = c.partial(&c.sigma_a(&s, a).unwrap()).unwrap();
            let rhs = c.sigma_a(&c.partial(&s).unwrap(), a).unwrap().scale(a);
            prop_assert!(close(&lhs, &rhs, 12, 6));
        }

        #[test]
        fn partial_psi(seed in any::<u64>()) {
            let c = ctx();
            let s = poly(&c, seed, -4, 10);
            let lhs = c.partial(&c.psi(&s).unwrap()).unwrap();
            let rhs = c.psi(&c.partial(&s).unwrap()).unwrap().scale(c.field().pi().inv().unwrap());
            prop_assert!(close(&lhs, &rhs, 3, 6));
        }

        #[test]
        fn psi_module_law(seed in any::<u64>()) {
            let c = ctx();
            let a = poly(&c, seed, -2, 4);
            let b = poly(&c, seed ^ 1, -3, 6);
            let lhs = c.psi(&c.phi_q(&a).unwrap().mul(&b).unwrap()).unwrap();
            let rhs = a.mul(&c.psi(&b).unwrap()).unwrap();
            prop_assert!(close(&lhs, &rhs, 6, 6));
        }

        #[test]
        fn pairing_equivariance(seed in any::<u64>()) {
            let c = ctx();
            let f = c.field();
            let a = poly(&c, seed, -4, 4);
            let b = poly(&c, seed ^ 1, -4, 4);
            let g = poly(&c, seed ^ 2, 0, 4);
            let base = c.pairing(&a, &b).unwrap();
            for &x in c.gamma_test_set() {
                let lhs = c.pairing(&c.sigma_a(&a, x).unwrap(), &c.sigma_a(&b, x).unwrap()).unwrap();
                prop_assert!((lhs - x.inv().unwrap() * base).val_bound() >= 6);
            }
            let qf = f.from_int(f.q());
            let lhs = c.pairing(&c.phi_q(&a).unwrap(), &c.phi_q(&g).unwrap()).unwrap();
            prop_assert!((lhs - qf / f.pi() * c.pairing(&a, &g).unwrap()).val_bound() >= 6);
            let lhs = c.pairing(&c.psi(&a).unwrap(), &b).unwrap();
            let rhs = c.pairing(&a, &c.phi_q(&b).unwrap()).unwrap();
            prop_assert!((lhs - f.pi() / qf * rhs).val_bound() >= 6);
        }
    }

    #[test]
    fn psi_kernel_element_is_mu_invariant() {
        let c = ctx();
        let f = c.field();
        let q = f.q();
        let k = f.from_int(1 - q) * f.pi() / f.from_int(q);
        let v = mono(&c, q - 1).sub(&LaurentSeries::constant(k, c.window())).unwrap();
        let p = c.psi(&v).unwrap();
        assert!(p.terms().all(|(_, x)| x.val_bound() >= 8), "{p}");
        let xi = f.teichmuller_generator();
        for j in 0..q - 1 {
            let s = c.sigma_a(&v, xi.pow(j)).unwrap();
            assert!(close(&s, &v, 40, 8));
        }
    }
}
