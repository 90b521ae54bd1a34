use std::sync::Arc;

use phigamma::cohomology::{h0_dim, h1_dims, iota_behavior, H1Dims, IotaBehavior};
use phigamma::lubin_tate::{LTGroup, PhiChoice};
use phigamma::{
    Character, CocyclePair, CohomError, Cohomology, Field, FieldElem, LaurentSeries,
    OperatorContext, PiValue, Torsion, Window,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q3() -> Field {
    Field::make(3, 1, &[-1, 1], 1, &[-3, 1], 12).unwrap()
}

fn q4() -> Field {
    Field::make(2, 2, &[1, 1, 1], 1, &[-2, 1], 12).unwrap()
}

fn ramified() -> Field {
    Field::make(3, 1, &[-1, 1], 2, &[-3, 0, 1], 12).unwrap()
}

fn cohom(f: Field) -> Cohomology {
    let g = LTGroup::make(f, PhiChoice::Special, 8, Window::new(-40, 60)).unwrap();
    Cohomology::new(Arc::new(OperatorContext::new(Arc::new(g)).unwrap()))
}

fn series(c: &Cohomology, lo: i64, ints: &[i64]) -> LaurentSeries {
    LaurentSeries::from_ints(c.field(), c.ops().window(), lo, ints).unwrap()
}

fn random_poly(c: &Cohomology, rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> LaurentSeries {
    let f = c.field();
    let terms: Vec<(i64, FieldElem)> = (lo..=hi).map(|k| (k, f.random(rng, 0, 1, 20))).collect();
    LaurentSeries::from_terms(f, c.ops().window(), &terms).unwrap()
}

fn generic() -> Character {
    Character {
        pi_value: PiValue::new(5, 1, 0, 0),
        weight: 0,
        torsion: Torsion::Teich(1),
        analytic: true,
    }
}

#[test]
fn character_text_round_trip() {
    let s = "pi=1*pi^-1*q^0; w=-1; tors=trivial; analytic=true";
    let c: Character = s.parse().unwrap();
    assert_eq!(c, Character::x_pow(-1));
    assert_eq!(c.to_string(), s);
    let g: Character = "pi=-2/5*pi^3*q^-1; w=2; tors=teich^1; analytic=false".parse().unwrap();
    assert_eq!(g.to_string().parse::<Character>().unwrap(), g);
    assert!("pi=1*pi^x".parse::<Character>().is_err());
    assert!("w=1".parse::<Character>().is_err());
}

#[test]
fn exact_pi_value_comparisons() {
    // q = π in Q_3, q = π^2 in the other two fields
    let unr = Character::unr();
    assert_eq!(unr.pi_value.as_pi_power(q3()), Some(-1));
    assert_eq!(unr.pi_value.as_pi_power(q4()), Some(-2));
    assert_eq!(unr.pi_value.as_pi_power(ramified()), Some(-2));
    assert!(Character::x_pow_unr(1).is_x_pow_times_unr(1, q3()));
    assert!(!Character::x_pow_unr(1).is_x_pow(1, q3()));
    let e6 = Field::make(3, 1, &[-1, 1], 2, &[-6, 0, 1], 12).unwrap();
    // π^2 = 6, so q = π^2/2
    assert_eq!(unr.pi_value.canonical(e6), PiValue::new(2, 1, -2, 0));
    assert_eq!(unr.pi_value.as_pi_power(e6), None);
    let f = q3();
    let x = PiValue::new(-2, 5, 3, -1).to_elem(f) - f.from_ratio(-18, 5);
    assert!(x.is_zero());
}

#[test]
fn character_values_on_units() {
    let f = q4();
    let xi = f.teichmuller_generator();
    let c = Character { torsion: Torsion::Teich(1), ..Character::x_pow(2) };
    let a = xi * (f.one() + f.pi());
    let v = c.eval_unit(a).unwrap();
    assert!(v.eq_prec(&(a.pow(2) * xi)));
    assert!(Character::unr().eval_unit(a).unwrap().eq_prec(&f.one()));
    assert!(c.eval_unit(f.pi()).is_err());
}

#[test]
fn h0_table() {
    let f = q3();
    assert_eq!(h0_dim(&Character::x_pow(-2), f), (1, Some(2)));
    assert_eq!(h0_dim(&Character::unr(), f), (0, None));
    assert_eq!(h0_dim(&Character::trivial(), f), (1, Some(0)));
    assert_eq!(h0_dim(&Character::x_pow(1), f), (0, None));
}

#[test]
fn h1_table() {
    let f = q4();
    assert_eq!(h1_dims(&Character::x_pow(-1), f), H1Dims { an: Some(2), full: 3 });
    assert_eq!(h1_dims(&Character::x_pow_unr(1), f), H1Dims { an: Some(2), full: 2 });
    assert_eq!(h1_dims(&generic(), f), H1Dims { an: Some(1), full: 1 });
    assert_eq!(h1_dims(&Character::unr(), f), H1Dims { an: Some(1), full: 1 });
    let na = Character { analytic: false, ..generic() };
    assert_eq!(h1_dims(&na, f), H1Dims { an: None, full: 0 });
    assert_eq!(h1_dims(&Character::x_pow(-1), q3()), H1Dims { an: Some(2), full: 2 });
}

#[test]
fn iota_table() {
    let f = q3();
    let x3tau = Character { torsion: Torsion::Teich(1), ..Character::x_pow(3) };
    assert_eq!(iota_behavior(&x3tau, 3, f).unwrap(), IotaBehavior::Zero);
    assert_eq!(
        iota_behavior(&Character::x_pow_unr(1), 2, f).unwrap(),
        IotaBehavior::SurjectiveKernelLinfty
    );
    assert_eq!(iota_behavior(&Character::x_pow(2), 2, f).unwrap(), IotaBehavior::InjectiveImageLinfty);
    for k in 1..4 {
        assert_eq!(iota_behavior(&generic(), k, f).unwrap(), IotaBehavior::Isomorphism);
    }
    let na = Character { analytic: false, ..generic() };
    assert_eq!(iota_behavior(&na, 1, q4()).unwrap_err(), CohomError::NonAnalytic);
}

#[test]
fn solve_alpha_phi_examples() {
    let c = cohom(q3());
    let alpha = PiValue::new(2, 1, 0, 0);
    let b = series(&c, 1, &[5, 0, 2]);
    let sol = c.solve_alpha_phi(&b, &alpha).unwrap();
    let chk = sol.c.assert_agrees(&series(&c, 1, &[1]), 10); assert!(chk.is_ok(), "{} {:?}", sol.c, chk);
    let zero = LaurentSeries::zero(c.field(), c.ops().window());
    assert!(c.solve_alpha_phi(&zero, &alpha).unwrap().c.is_zero());
    // t_F spans the kernel of π^{-1}φ_q − 1
    let k = c.apply_alpha_phi(c.ops().t(), &PiValue::pi_pow(-1)).unwrap();
    assert!(c.negligible_series(&k));
    assert!(c.solve_alpha_phi(&series(&c, -1, &[1]), &alpha).is_err());
}

#[test]
fn solve_is_right_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for f in [q3(), q4()] {
        let c = cohom(f);
        let r = f.p() + 1;
        for alpha in [PiValue::new(r, 1, 0, 0), PiValue::new(r * r, 1, -1, 0), PiValue::new(-1, 1, -2, 0)] {
            let b = random_poly(&c, &mut rng, 0, 8);
            let sol = c.solve_alpha_phi(&b, &alpha).unwrap();
            assert!(sol.obstruction.is_none());
            let back = c.apply_alpha_phi(&sol.c, &alpha).unwrap();
            assert!(c.negligible_series(&back.sub(&b).unwrap()), "{alpha}");
        }
    }
}

#[test]
fn resonant_solve() {
    let c = cohom(q3());
    let alpha = PiValue::pi_pow(-1);
    let b = series(&c, 0, &[4, 1]);
    assert_eq!(c.solve_alpha_phi(&b, &alpha).unwrap_err(), CohomError::ObstructionNonzero);
    let b = series(&c, 0, &[4, 0, 1, 2]);
    let sol = c.solve_alpha_phi(&b, &alpha).unwrap();
    assert!(sol.obstruction.unwrap().is_zero());
    let back = c.apply_alpha_phi(&sol.c, &alpha).unwrap();
    assert!(c.negligible_series(&back.sub(&b).unwrap()));
    // obstruction is linear
    let b1 = series(&c, 0, &[1, 2, 3]);
    let b2 = series(&c, 0, &[0, 5, 0, 7]);
    let o = c.obstruction(&b1.add(&b2).unwrap(), 1).unwrap();
    let s = c.obstruction(&b1, 1).unwrap() + c.obstruction(&b2, 1).unwrap();
    assert!((o - s).is_zero());
}

#[test]
fn reduce_to_psi_zero_example() {
    let c = cohom(q3());
    let f = c.field();
    let alpha = PiValue::pi_pow(-1);
    let (cc, b) = c.reduce_to_psi_zero(&series(&c, 2, &[1]), &alpha).unwrap();
    assert!((cc.coeff(0) - f.from_int(3)).val_bound() >= 10, "{cc}");
    let r = b.assert_agrees(&series(&c, 0, &[2, 0, 1]), 10);
    assert!(r.is_ok(), "{b} {r:?}");
    assert!(c.negligible_series(&c.ops().psi(&b).unwrap()));
    let phi_x = c.ops().phi_q(&series(&c, -2, &[1, 0, 3, 1])).unwrap();
    let (_, b) = c.reduce_to_psi_zero(&phi_x, &alpha).unwrap();
    assert!(c.negligible_series(&c.ops().psi(&b).unwrap()));
    assert_eq!(
        c.reduce_to_psi_zero(&phi_x, &PiValue::pi_pow(0)).unwrap_err(),
        CohomError::SlopeConditionViolated
    );
}

fn coboundary_round_trip(c: &Cohomology, delta: Character, z: &LaurentSeries) {
    let pair = c.coboundary(z, &delta).unwrap();
    let (norm, w) = c.normalize_cocycle(&pair).unwrap();
    // output minus input is the coboundary of the witness
    let cw = c.coboundary(&w, &delta).unwrap();
    assert!(c.negligible_series(&pair.m.sub(&norm.m).unwrap().sub(&cw.m).unwrap()));
    assert!(c.negligible_series(&pair.n.sub(&norm.n).unwrap().sub(&cw.n).unwrap()));
    let wit = c.is_coboundary(&norm).unwrap().expect("coboundary");
    let back = c.coboundary(&wit, &delta).unwrap();
    assert!(c.negligible_series(&back.m.sub(&norm.m).unwrap()));
    assert!(c.negligible_series(&back.n.sub(&norm.n).unwrap()));
}

#[test]
fn coboundaries_are_recognized() {
    let c = cohom(q3());
    let z = series(&c, 1, &[1, 1]);
    for delta in [Character::unr(), Character::x_pow(-1), Character::x_pow(-2), Character {
        pi_value: PiValue::new(2, 1, -2, 0),
        weight: 1,
        torsion: Torsion::Teich(1),
        analytic: true,
    }] {
        coboundary_round_trip(&c, delta, &z);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = random_poly(&c, &mut rng, -3, 5);
    coboundary_round_trip(&c, Character::x_pow_unr(-1), &z);
    let zero = CocyclePair {
        m: LaurentSeries::zero(c.field(), c.ops().window()),
        n: LaurentSeries::zero(c.field(), c.ops().window()),
        delta: Character::unr(),
    };
    assert!(c.is_coboundary(&zero).unwrap().unwrap().is_zero());
}

#[test]
fn coboundaries_unramified_quadratic() {
    let c = cohom(q4());
    let z = series(&c, -1, &[1, 0, 2, 1]);
    coboundary_round_trip(&c, Character::unr(), &z);
    coboundary_round_trip(&c, Character::x_pow(-2), &z);
}

#[test]
fn x_pow_generators() {
    let c = cohom(q3());
    for i in 0..=2 {
        for g in c.x_pow_generators(i).unwrap() {
            assert!(c.check_z1(&g).unwrap(), "i = {i}");
        }
    }
    for i in 1..=2 {
        let [a, b] = c.x_pow_generators(i).unwrap();
        let diff = CocyclePair { m: a.m.sub(&b.m).unwrap(), n: a.n.sub(&b.n).unwrap(), delta: a.delta };
        for p in [a, b, diff] {
            let (norm, _) = c.normalize_cocycle(&p).unwrap();
            assert!(c.is_coboundary(&norm).unwrap().is_none(), "i = {i}");
        }
    }
}

#[test]
fn unr_pair_is_nontrivial_cocycle() {
    let c = cohom(q3());
    let pair = c.unr_pair().unwrap();
    assert!(c.check_z1(&pair).unwrap());
    let (norm, _) = c.normalize_cocycle(&pair).unwrap();
    assert!(c.is_coboundary(&norm).unwrap().is_none());
    let broken = CocyclePair {
        n: pair.n.add(&series(&c, 1, &[1])).unwrap(),
        ..pair
    };
    assert!(!c.check_z1(&broken).unwrap());
    assert_eq!(c.normalize_cocycle(&broken).unwrap_err(), CohomError::NotACocycle);
}

#[test]
fn partial_on_cocycles() {
    let c = cohom(q3());
    let f = c.field();
    let [tp, _] = c.x_pow_generators(1).unwrap();
    let out = c.partial_on_cocycles(&tp).unwrap();
    assert_eq!(out.delta.pi_value.as_pi_power(f), Some(0));
    assert_eq!(out.delta.weight, 0);
    assert!(out.m.assert_agrees(&LaurentSeries::one(f, c.ops().window()), 8).is_ok());
    assert!(out.n.is_zero());
    let consts = CocyclePair {
        m: LaurentSeries::zero(f, c.ops().window()),
        n: LaurentSeries::constant(f.from_int(5), c.ops().window()),
        delta: Character::x_pow(-1),
    };
    let out = c.partial_on_cocycles(&consts).unwrap();
    assert!(out.m.is_zero() && out.n.is_zero());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let z = random_poly(&c, &mut rng, -4, 6);
    let delta = Character::unr().mul(&Character::x_pow(-1));
    let pair = c.coboundary(&z, &delta).unwrap();
    let out = c.partial_on_cocycles(&pair).unwrap();
    assert!(c.relation_holds(&out).unwrap());
    assert!(c.ops().residue(&out.m).unwrap().val_bound() >= c.floor());
    assert!(c.ops().residue(&out.n).unwrap().val_bound() >= c.floor());
}
