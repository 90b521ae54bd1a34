use phigamma::triangulation::{classify, iso_partner, saturated_count, stratify, Base, Classification, Kind};
use phigamma::{Character, Field, LInvariant, PiValue, Stratum, TriError, TriParam, Torsion};
use proptest::prelude::*;

fn q3() -> Field {
    Field::make(3, 1, &[-1, 1], 1, &[-3, 1], 12).unwrap()
}

fn fields() -> Vec<Field> {
    vec![
        q3(),
        Field::make(2, 2, &[1, 1, 1], 1, &[-2, 1], 12).unwrap(),
        Field::make(3, 1, &[-1, 1], 2, &[-3, 0, 1], 12).unwrap(),
    ]
}

/// `μ_{π^n}`: value `π^n` at `π`, trivial on units.
fn mu(n: i64) -> Character {
    Character { weight: 0, ..Character::x_pow(n) }
}

fn cls(slope_zero: bool, irreducible: bool, analytic_etale: bool) -> Classification {
    Classification { slope_zero, irreducible, analytic_etale }
}

#[test]
fn crystalline_point_over_q3() {
    let f = q3();
    let s = TriParam::new(Character::x_pow_unr(1), Character::trivial(), LInvariant::Infinity);
    assert_eq!((s.w(), s.u(f)), (1, 0));
    assert_eq!(stratify(&s, f).unwrap(), Stratum::In(Base::S0, Kind::Cris));
    assert_eq!(classify(&s, f).unwrap(), cls(true, false, true));
    assert_eq!(saturated_count(&s, f), 2);
}

#[test]
fn ordinary_and_noncritical_points() {
    let f = q3();
    let s = TriParam::at_infinity(Character::x_pow(2), mu(-2), f);
    assert!(matches!(s.l, LInvariant::NotApplicable));
    assert_eq!((s.w(), s.u(f)), (2, 2));
    assert_eq!(stratify(&s, f).unwrap(), Stratum::In(Base::SStar, Kind::Ord));
    assert_eq!(classify(&s, f).unwrap(), cls(true, false, true));
    let s = TriParam::at_infinity(Character::x_pow(1).mul(&mu(1)), mu(-2), f);
    assert_eq!((s.w(), s.u(f)), (1, 2));
    assert_eq!(stratify(&s, f).unwrap(), Stratum::In(Base::SStar, Kind::Ncl));
    assert_eq!(classify(&s, f).unwrap(), cls(false, false, false));
    assert_eq!(iso_partner(&s, f).unwrap_err(), TriError::OutOfDomain);
    let s = TriParam::at_infinity(mu(1), mu(-1), f);
    assert_eq!(stratify(&s, f).unwrap(), Stratum::In(Base::SStar, Kind::Ng));
    assert_eq!(classify(&s, f).unwrap(), cls(true, true, true));
    assert_eq!(saturated_count(&s, f), 1);
    let s = TriParam::at_infinity(mu(1), mu(0), f);
    assert_eq!(stratify(&s, f).unwrap(), Stratum::NotInSPlus);
    assert_eq!(classify(&s, f).unwrap(), cls(false, false, false));
}

#[test]
fn semistable_point_and_partners() {
    let f = q3();
    let d1 = Character::x_pow_unr(3).mul(&mu(-1));
    let d2 = mu(-1);
    let st = TriParam::new(d1, d2, LInvariant::Finite(f.from_int(5)));
    assert_eq!((st.w(), st.u(f)), (3, 1));
    assert_eq!(stratify(&st, f).unwrap(), Stratum::In(Base::SStar, Kind::St));
    assert_eq!(iso_partner(&st, f).unwrap().len(), 1);
    assert_eq!(saturated_count(&st, f), 1);
    let cris = TriParam::new(d1, d2, LInvariant::Infinity);
    assert_eq!(stratify(&cris, f).unwrap(), Stratum::In(Base::SStar, Kind::Cris));
    let ps = iso_partner(&cris, f).unwrap();
    assert_eq!(ps.len(), 2);
    let p = ps[1];
    assert!(p.delta1.same(&Character::x_pow(3).mul(&d2), f));
    assert!(p.delta2.same(&Character::x_pow(-3).mul(&d1), f));
    assert_eq!((p.w(), p.u(f)), (3, 2));
    assert_eq!(stratify(&p, f).unwrap(), Stratum::In(Base::SStar, Kind::Cris));
    let back = iso_partner(&p, f).unwrap();
    assert!(back[1].delta1.same(&cris.delta1, f) && back[1].delta2.same(&cris.delta2, f));
}

#[test]
fn inconsistent_l_invariant() {
    let f = q3();
    let bad = TriParam::new(mu(1), mu(-1), LInvariant::Infinity);
    assert_eq!(stratify(&bad, f).unwrap_err(), TriError::InconsistentLInvariant);
    let bad = TriParam::new(Character::x_pow_unr(1), Character::trivial(), LInvariant::NotApplicable);
    assert_eq!(stratify(&bad, f).unwrap_err(), TriError::InconsistentLInvariant);
}

#[test]
fn non_analytic_points() {
    let f = fields()[1];
    let d1 = Character { analytic: false, ..mu(1) };
    let s = TriParam::new(d1, mu(-1), LInvariant::NotApplicable);
    assert_eq!(stratify(&s, f).unwrap_err(), TriError::NonAnalytic);
    assert_eq!(classify(&s, f).unwrap(), cls(true, true, false));
    assert_eq!(saturated_count(&s, f), 1);
}

fn character() -> impl Strategy<Value = Character> {
    (-3i64..=3, -1i64..=1, -3i64..=3, any::<bool>()).prop_map(|(n, m, k, teich)| Character {
        pi_value: PiValue::new(1, 1, n, m),
        weight: k,
        torsion: if teich { Torsion::Teich(1) } else { Torsion::Trivial },
        analytic: true,
    })
}

fn point(f: Field, d1: Character, d2: Character, finite: Option<i64>) -> TriParam {
    let mut s = TriParam::at_infinity(d1, d2, f);
    if let (LInvariant::Infinity, Some(x)) = (s.l, finite) {
        s.l = LInvariant::Finite(f.from_int(x));
    }
    s
}

proptest! {
    #[test]
    fn strata_partition(fi in 0usize..3, d1 in character(), d2 in character(), l in proptest::option::of(-5i64..5)) {
        let f = fields()[fi];
        let s = point(f, d1, d2, l);
        let st = stratify(&s, f).unwrap();
        let c = classify(&s, f).unwrap();
        prop_assert!(!c.irreducible || c.slope_zero);
        if let Stratum::In(base, kind) = st {
            prop_assert_eq!(base == Base::S0, s.u(f) == 0);
            if base == Base::S0 {
                prop_assert!(kind != Kind::Ord && kind != Kind::Ncl);
            }
        }
        prop_assert!(saturated_count(&s, f) == 1 || s.l.is_infinite() && s.w() >= 1);
    }

    #[test]
    fn partners(fi in 0usize..3, d2 in character(), w in 1i64..4, u in 0i64..4, unr in any::<bool>(), l in proptest::option::of(-5i64..5)) {
        // δ₁ chosen so that s lies in S_+ with the requested w and u
        let f = fields()[fi];
        let v2 = d2.pi_value.valuation(f);
        let d2 = Character { pi_value: PiValue::new(d2.pi_value.num, d2.pi_value.den, d2.pi_value.n - v2 - u, d2.pi_value.m), ..d2 };
        let mut d1 = Character { pi_value: PiValue::pi_pow(u), weight: d2.weight + w, torsion: d2.torsion, analytic: true };
        if unr {
            d1 = Character { torsion: Torsion::Trivial, ..d1 };
        }
        let s = point(f, d1, d2, l);
        prop_assert_eq!((s.w(), s.u(f)), (w, u));
        let c = classify(&s, f).unwrap();
        match iso_partner(&s, f) {
            Err(e) => {
                prop_assert_eq!(e, TriError::OutOfDomain);
                prop_assert!(!c.slope_zero);
            }
            Ok(ps) if ps.len() == 2 => {
                let p = ps[1];
                prop_assert_eq!(p.w(), w);
                prop_assert_eq!(p.u(f), w - u);
                prop_assert_eq!(classify(&p, f).unwrap(), c);
                let (a, b) = (stratify(&s, f).unwrap(), stratify(&p, f).unwrap());
                if let Stratum::In(_, Kind::Cris) = a {
                    if u > 0 {
                        prop_assert_eq!(b, Stratum::In(Base::SStar, Kind::Cris));
                    }
                }
                if let Stratum::In(_, Kind::Ord) = a {
                    prop_assert_eq!(b, Stratum::In(Base::S0, Kind::Cris));
                }
                let back = iso_partner(&p, f).unwrap();
                prop_assert_eq!(back.len(), 2);
                prop_assert!(back[1].delta1.same(&s.delta1, f) && back[1].delta2.same(&s.delta2, f));
            }
            Ok(ps) => {
                prop_assert_eq!(ps.len(), 1);
                prop_assert_eq!(saturated_count(&s, f), 1);
            }
        }
    }
}

proptest! {
    #[test]
    fn second_line_partners(fi in 0usize..3, d2 in character(), w in 1i64..4, finite in any::<bool>()) {
        let f = fields()[fi];
        let base = Character::x_pow_unr(w).mul(&d2).pi_value.valuation(f) + d2.pi_value.valuation(f);
        prop_assume!(base % 2 == 0);
        let k = -base / 2;
        let d1 = Character::x_pow_unr(w).mul(&d2).mul(&mu(k));
        let d2 = d2.mul(&mu(k));
        let (v1, v2) = (d1.pi_value.valuation(f), d2.pi_value.valuation(f));
        prop_assume!(v1 + v2 == 0 && v1 >= 0);
        let l = if finite { LInvariant::Finite(f.from_int(2)) } else { LInvariant::Infinity };
        let s = TriParam::new(d1, d2, l);
        let st = stratify(&s, f).unwrap();
        let ps = iso_partner(&s, f).unwrap();
        if finite || s.u(f) > w {
            prop_assert_eq!(ps.len(), 1);
            return Ok(());
        }
        prop_assert_eq!(ps.len(), 2);
        let p = ps[1];
        prop_assert_eq!((p.w(), p.u(f)), (w, w - s.u(f)));
        prop_assert_eq!(classify(&p, f).unwrap(), classify(&s, f).unwrap());
        let sp = stratify(&p, f).unwrap();
        match st {
            Stratum::In(Base::SStar, Kind::Ord) => prop_assert_eq!(sp, Stratum::In(Base::S0, Kind::Cris)),
            Stratum::In(Base::S0, Kind::Cris) => prop_assert_eq!(sp, Stratum::In(Base::SStar, Kind::Ord)),
            Stratum::In(Base::SStar, Kind::Cris) => prop_assert_eq!(sp, st),
            other => prop_assert!(false, "unexpected stratum {}", other),
        }
        let back = iso_partner(&p, f).unwrap();
        prop_assert!(back[1].delta1.same(&s.delta1, f) && back[1].delta2.same(&s.delta2, f));
        prop_assert_eq!(saturated_count(&s, f), 2);
    }
}
