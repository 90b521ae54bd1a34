use std::sync::Arc;
use std::thread;

use phigamma::lubin_tate::{LTGroup, PhiChoice};
use phigamma::{BivariateSeries, Field, LaurentSeries, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q3() -> Field {
    Field::make(3, 1, &[-1, 1], 1, &[-3, 1], 12).unwrap()
}

fn unramified_q4() -> Field {
    Field::make(2, 2, &[1, 1, 1], 1, &[-2, 1], 12).unwrap()
}

fn group(f: Field, hi: i64) -> LTGroup {
    LTGroup::make(f, PhiChoice::Special, 8, Window::new(-40, hi)).unwrap()
}

fn random_integral(f: Field, rng: &mut ChaCha8Rng) -> phigamma::FieldElem {
    f.random(rng, 0, 2, 20)
}

#[test]
fn default_special_group_builds() {
    let g = LTGroup::special(q3()).unwrap();
    assert_eq!(g.degree(), 12);
    assert!(g.is_special());
    assert_eq!(g.logarithm().known_top(), 120);
}

#[test]
fn associativity() {
    for f in [q3(), unramified_q4()] {
        let g = group(f, 30);
        let d = g.degree();
        let law = g.group_law();
        let x = BivariateSeries::var(f, d, 0);
        let y = BivariateSeries::var(f, d, 1);
        // F(F(X,Y), Y) against F(X, F(Y,Y)) exercises both nestings
        let fxy = law.clone();
        let fyy = law.substitute(&y, &y);
        let left = law.substitute(&fxy, &y);
        let right = law.substitute(&x, &fyy);
        assert!(left.eq_prec(&right));
    }
}

#[test]
fn endomorphisms_compose_and_add() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for f in [q3(), unramified_q4()] {
        let g = group(f, 40);
        for _ in 0..3 {
            let a = random_integral(f, &mut rng);
            let b = random_integral(f, &mut rng);
            let fa = g.mult_by(a).unwrap();
            let fb = g.mult_by(b).unwrap();
            let fab = g.mult_by(a * b).unwrap();
            let comp = fa.compose(&fb).unwrap();
            assert!(comp.assert_agrees(&fab, 12).is_ok());
            let sum = g.eval_law(&fa, &fb).unwrap();
            let fsum = g.mult_by(a + b).unwrap().truncate(g.degree() as i64);
            assert!(sum.assert_agrees(&fsum, 12).is_ok());
        }
    }
}

#[test]
fn log_is_additive() {
    let f = q3();
    let g = group(f, 30);
    let d = g.degree();
    let log = g.logarithm().clone().truncate(d as i64);
    let lhs = g.group_law().compose_outer(&log);
    let lx = BivariateSeries::from_univariate(&log, d, 0);
    let ly = BivariateSeries::from_univariate(&log, d, 1);
    let rhs = lx.add(&ly);
    for (i, j, c) in lhs.sub(&rhs).coefficients() {
        assert!(c.val_bound() >= 8, "X^{i}Y^{j}: {c}");
    }
}

#[test]
fn log_derivative_is_reciprocal_of_g() {
    let f = q3();
    let g = group(f, 60);
    let prod = g.logarithm().derivative().mul(g.dmult()).unwrap();
    let one = LaurentSeries::one(f, g.window());
    assert!(prod.assert_agrees(&one, 10).is_ok());
}

#[test]
fn log_functional_equation() {
    let f = q3();
    let g = group(f, 60);
    let t = g.logarithm();
    let lhs = t.compose(g.phi()).unwrap();
    let rhs = t.scale(f.pi());
    assert!(lhs.assert_agrees(&rhs, 8).is_ok());
}

#[test]
fn eta_intertwines() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = q3();
    let w = Window::new(-40, 40);
    let g1 = LTGroup::make(f, PhiChoice::Special, 6, w).unwrap();
    let other = LaurentSeries::from_terms(
        f,
        w,
        &[(1, f.pi()), (2, f.pi()), (3, f.one()), (5, f.from_int(6))],
    )
    .unwrap();
    let g2 = LTGroup::make(f, PhiChoice::Series(other), 6, w).unwrap();
    assert!(!g2.is_special());
    let h = g1.eta_iso(&g2).unwrap();
    assert!(h.coeff(1).eq_prec(&f.one()));
    let lhs = h.compose(g1.phi()).unwrap();
    let rhs = g2.phi().compose(&h).unwrap();
    assert!(lhs.assert_agrees(&rhs, 12).is_ok());
    let a = f.random(&mut rng, 0, 1, 20);
    let lhs = h.compose(&g1.mult_by(a).unwrap()).unwrap();
    let rhs = g2.mult_by(a).unwrap().compose(&h).unwrap();
    assert!(lhs.assert_agrees(&rhs, 12).is_ok());
    let hinv = h.reversion().unwrap();
    let id = hinv.compose(&h).unwrap();
    assert!(id.assert_agrees(&LaurentSeries::u(f, w), 12).is_ok());
    let other_field = Field::make(3, 1, &[-1, 1], 2, &[-3, 0, 1], 12).unwrap();
    let g3 = LTGroup::make(other_field, PhiChoice::Special, 6, w).unwrap();
    assert!(g1.eta_iso(&g3).is_err());
}

#[test]
fn t_factorization() {
    let f = q3().with_precision(6).unwrap();
    let g = group(f, 60);
    assert!(g.t_factorization_check(6, 6).unwrap());
    assert!(g.t_factorization_check(0, 1).unwrap());
    // telescoping: the finite product is [π^n](u)/π^n
    let mut it = LaurentSeries::u(f, g.window());
    for _ in 0..3 {
        it = it.compose(g.phi()).unwrap();
    }
    let tele = it.scale(f.pi_pow(-3));
    assert!(g.t_product(3).unwrap().assert_agrees(&tele, 6).is_ok());
    let bumped = g
        .logarithm()
        .add(&LaurentSeries::monomial(f.one(), 2, g.window()))
        .unwrap();
    assert!(!g.t_factorization_with(&bumped, 6, 6).unwrap());
}

#[test]
fn cache_is_shared_across_threads() {
    let f = q3();
    let g = Arc::new(group(f, 30));
    let a = f.from_int(5);
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let g = Arc::clone(&g);
            thread::spawn(move || g.mult_by(a).unwrap().to_string())
        })
        .collect();
    let outs: Vec<String> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let _ = rng.gen::<u8>();
}
