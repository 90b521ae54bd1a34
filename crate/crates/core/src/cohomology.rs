//! Characters of `F^×`, the constructive solvers for `αφ_q − 1` and `ψ`,
//! cocycle normalization, coboundary tests and dimension oracles.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::padic::{Field, FieldElem, PadicError};
use crate::robba::{OperatorContext, RobbaError};
use crate::series::{significance, LaurentSeries, RingTag, SeriesError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CohomError {
    #[error("obstruction ∂^i b|_(u=0) is nonzero")]
    ObstructionNonzero,
    #[error("slope condition v(δ(π)) < 1 − v(q) fails")]
    SlopeConditionViolated,
    #[error("pair does not satisfy the cocycle relation")]
    NotACocycle,
    #[error("pair is not normalized")]
    NotNormalized,
    #[error("series has a nonzero principal part")]
    NotPlus,
    #[error("character is not locally analytic")]
    NonAnalytic,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Robba(#[from] RobbaError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

/// Extra degrees split off before summing `Σ(αφ_q)^j`.
const NEUMANN_MARGIN: i64 = 3;

pub type Result<T> = std::result::Result<T, CohomError>;

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// The exact scalar `r·π^n·q^m` with `r` a `p`-adic unit rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PiValue {
    pub num: i64,
    pub den: i64,
    pub n: i64,
    pub m: i64,
}

impl PiValue {
    pub fn new(num: i64, den: i64, n: i64, m: i64) -> PiValue {
        assert!(num != 0 && den != 0, "r must be a nonzero rational");
        let g = gcd(num as i128, den as i128) as i64;
        let s = if den < 0 { -1 } else { 1 };
        PiValue {
            num: s * num / g,
            den: s * den / g,
            n,
            m,
        }
    }

    pub fn pi_pow(n: i64) -> PiValue {
        PiValue::new(1, 1, n, 0)
    }

    pub fn one() -> PiValue {
        PiValue::pi_pow(0)
    }

    pub fn mul(&self, o: &PiValue) -> PiValue {
        let num = self.num as i128 * o.num as i128;
        let den = self.den as i128 * o.den as i128;
        let g = gcd(num, den);
        PiValue::new(
            i64::try_from(num / g).expect("numerator overflow"),
            i64::try_from(den / g).expect("denominator overflow"),
            self.n + o.n,
            self.m + o.m,
        )
    }

    pub fn inv(&self) -> PiValue {
        PiValue::new(self.den, self.num, -self.n, -self.m)
    }

    /// Rejects `r` with `p` in its numerator or denominator.
    pub fn check_unit(&self, field: Field) -> Result<()> {
        let p = field.p();
        if self.num % p == 0 || self.den % p == 0 {
            return Err(CohomError::Parse(format!("r = {}/{} is not a p-adic unit", self.num, self.den)));
        }
        Ok(())
    }

    /// Folds `q^m` into `π`-powers when `π^e` is a rational integer, so that
    /// equal scalars get equal representations.
    pub fn canonical(&self, field: Field) -> PiValue {
        let e = field.e_coeffs();
        let binomial = e.len() >= 2 && e[1..e.len() - 1].iter().all(|&c| c == 0) && e[e.len() - 1] == 1;
        if !binomial || self.m == 0 {
            return *self;
        }
        // π^e = c, so q = p^f = π^d·(p/c)^f
        let c = -e[0];
        let (mut a, mut b) = (field.p() as i128, c as i128);
        let g = gcd(a, b);
        a /= g;
        b /= g;
        let k = (field.f() as i64 * self.m.abs()) as u32;
        let (mut num, mut den) = (a.pow(k), b.pow(k));
        if self.m < 0 {
            std::mem::swap(&mut num, &mut den);
        }
        let ratio = PiValue::new(
            i64::try_from(num).expect("overflow"),
            i64::try_from(den).expect("overflow"),
            0,
            0,
        );
        let base = PiValue::new(self.num, self.den, self.n + field.d() * self.m, 0);
        base.mul(&ratio)
    }

    pub fn same(&self, other: &PiValue, field: Field) -> bool {
        self.canonical(field) == other.canonical(field)
    }

    /// `Some(i)` when the scalar is exactly `π^i`.
    pub fn as_pi_power(&self, field: Field) -> Option<i64> {
        let c = self.canonical(field);
        (c.num == 1 && c.den == 1 && c.m == 0).then_some(c.n)
    }

    pub fn valuation(&self, field: Field) -> i64 {
        self.n + self.m * field.d()
    }

    pub fn to_elem(&self, field: Field) -> FieldElem {
        field.from_ratio(self.num, self.den) * field.pi_pow(self.n) * field.from_int(field.q()).pow(self.m)
    }
}

impl fmt::Display for PiValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)?;
        } else {
            write!(f, "{}/{}", self.num, self.den)?;
        }
        write!(f, "*pi^{}*q^{}", self.n, self.m)
    }
}

impl FromStr for PiValue {
    type Err = CohomError;

    fn from_str(s: &str) -> Result<PiValue> {
        let bad = || CohomError::Parse(format!("bad scalar `{s}`"));
        let (mut num, mut den, mut n, mut m) = (1i64, 1i64, 0i64, 0i64);
        for (idx, tok) in s.split('*').map(str::trim).enumerate() {
            if let Some(e) = tok.strip_prefix("pi^") {
                n += e.trim().parse::<i64>().map_err(|_| bad())?;
            } else if tok == "pi" {
                n += 1;
            } else if let Some(e) = tok.strip_prefix("q^") {
                m += e.trim().parse::<i64>().map_err(|_| bad())?;
            } else if tok == "q" {
                m += 1;
            } else if idx == 0 {
                let (a, b) = tok.split_once('/').unwrap_or((tok, "1"));
                num = a.trim().parse().map_err(|_| bad())?;
                den = b.trim().parse().map_err(|_| bad())?;
                if num == 0 || den == 0 {
                    return Err(bad());
                }
            } else {
                return Err(bad());
            }
        }
        Ok(PiValue::new(num, den, n, m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Torsion {
    Trivial,
    /// `τ(a) = teich(ā)^j`.
    Teich(i64),
}

/// A locally algebraic character `δ` of `F^×`: `δ(π) = r·π^n·q^m` and
/// `δ(a) = a^k·τ(ā)` on units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Character {
    pub pi_value: PiValue,
    pub weight: i64,
    pub torsion: Torsion,
    pub analytic: bool,
}

impl Character {
    pub fn trivial() -> Character {
        Character::x_pow(0)
    }

    /// `x^i`: `π ↦ π^i`, `a ↦ a^i`.
    pub fn x_pow(i: i64) -> Character {
        Character {
            pi_value: PiValue::pi_pow(i),
            weight: i,
            torsion: Torsion::Trivial,
            analytic: true,
        }
    }

    /// `δ_unr`: `π ↦ q^{-1}`, trivial on units.
    pub fn unr() -> Character {
        Character {
            pi_value: PiValue::new(1, 1, 0, -1),
            weight: 0,
            torsion: Torsion::Trivial,
            analytic: true,
        }
    }

    /// `x^i·δ_unr`.
    pub fn x_pow_unr(i: i64) -> Character {
        Character::x_pow(i).mul(&Character::unr())
    }

    pub fn mul(&self, o: &Character) -> Character {
        let torsion = match (self.torsion, o.torsion) {
            (Torsion::Trivial, t) | (t, Torsion::Trivial) => t,
            (Torsion::Teich(a), Torsion::Teich(b)) => Torsion::Teich(a + b),
        };
        Character {
            pi_value: self.pi_value.mul(&o.pi_value),
            weight: self.weight + o.weight,
            torsion,
            analytic: self.analytic && o.analytic,
        }
    }

    pub fn inv(&self) -> Character {
        Character {
            pi_value: self.pi_value.inv(),
            weight: -self.weight,
            torsion: match self.torsion {
                Torsion::Trivial => Torsion::Trivial,
                Torsion::Teich(j) => Torsion::Teich(-j),
            },
            analytic: self.analytic,
        }
    }

    /// Equality as characters of `F^×`.
    pub fn same(&self, o: &Character, field: Field) -> bool {
        self.pi_value.same(&o.pi_value, field)
            && self.weight == o.weight
            && self.torsion_exponent(field) == o.torsion_exponent(field)
            && self.is_analytic(field) == o.is_analytic(field)
    }

    /// Torsion exponent reduced into `[0, q − 1)`.
    pub fn torsion_exponent(&self, field: Field) -> i64 {
        match self.torsion {
            Torsion::Trivial => 0,
            Torsion::Teich(j) => j.rem_euclid(field.q() - 1),
        }
    }

    /// Over `Q_p` every character is locally analytic.
    pub fn is_analytic(&self, field: Field) -> bool {
        self.analytic || field.d() == 1
    }

    pub fn is_x_pow(&self, i: i64, field: Field) -> bool {
        self.is_analytic(field)
            && self.torsion_exponent(field) == 0
            && self.weight == i
            && self.pi_value.as_pi_power(field) == Some(i)
    }

    pub fn is_x_pow_times_unr(&self, i: i64, field: Field) -> bool {
        self.is_analytic(field)
            && self.torsion_exponent(field) == 0
            && self.weight == i
            && self.pi_value.same(&PiValue::new(1, 1, i, -1), field)
    }

    pub fn pi_elem(&self, field: Field) -> FieldElem {
        self.pi_value.to_elem(field)
    }

    pub fn weight_elem(&self, field: Field) -> FieldElem {
        field.from_int(self.weight)
    }

    /// `δ(a)` for a unit `a`.
    pub fn eval_unit(&self, a: FieldElem) -> Result<FieldElem> {
        let field = a.field();
        if a.is_zero() || a.val_bound() != 0 {
            return Err(RobbaError::NotAUnit.into());
        }
        let mut v = a.pow(self.weight);
        let j = self.torsion_exponent(field);
        if j != 0 {
            v = v * field.teichmuller(&a.residue())?.pow(j);
        }
        Ok(v)
    }
}

impl fmt::Display for Character {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tors = match self.torsion {
            Torsion::Trivial => "trivial".to_string(),
            Torsion::Teich(j) => format!("teich^{j}"),
        };
        write!(
            f,
            "pi={}; w={}; tors={}; analytic={}",
            self.pi_value, self.weight, tors, self.analytic
        )
    }
}

impl FromStr for Character {
    type Err = CohomError;

    fn from_str(s: &str) -> Result<Character> {
        let bad = |m: &str| CohomError::Parse(format!("{m} in `{s}`"));
        let mut c = Character::trivial();
        let mut seen_pi = false;
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, val) = part.split_once('=').ok_or_else(|| bad("missing `=`"))?;
            let val = val.trim();
            match key.trim() {
                "pi" => {
                    c.pi_value = val.parse()?;
                    seen_pi = true;
                }
                "w" => c.weight = val.parse().map_err(|_| bad("bad weight"))?,
                "tors" => {
                    c.torsion = if val == "trivial" {
                        Torsion::Trivial
                    } else if let Some(j) = val.strip_prefix("teich^") {
                        Torsion::Teich(j.parse().map_err(|_| bad("bad torsion exponent"))?)
                    } else if val == "teich" {
                        Torsion::Teich(1)
                    } else {
                        return Err(bad("bad torsion"));
                    }
                }
                "analytic" => c.analytic = val.parse().map_err(|_| bad("bad flag"))?,
                k => return Err(bad(&format!("unknown key `{k}`"))),
            }
        }
        if !seen_pi {
            return Err(bad("missing `pi`"));
        }
        Ok(c)
    }
}

// ----- dimension oracles -----

/// `dim H⁰(δ)` and the exponent `i` of the generator `t_F^i` when nonzero.
pub fn h0_dim(delta: &Character, field: Field) -> (usize, Option<i64>) {
    let i = -delta.weight;
    if i >= 0 && delta.is_x_pow(-i, field) {
        (1, Some(i))
    } else {
        (0, None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct H1Dims {
    /// `None` when `δ` is not locally analytic.
    pub an: Option<usize>,
    pub full: usize,
}

pub fn h1_dims(delta: &Character, field: Field) -> H1Dims {
    if !delta.is_analytic(field) {
        return H1Dims { an: None, full: 0 };
    }
    let k = delta.weight;
    let d = field.d() as usize;
    if k <= 0 && delta.is_x_pow(k, field) {
        H1Dims { an: Some(2), full: d + 1 }
    } else if k >= 1 && delta.is_x_pow_times_unr(k, field) {
        H1Dims { an: Some(2), full: 2 }
    } else {
        H1Dims { an: Some(1), full: 1 }
    }
}

/// `dim H¹ − dim H¹_an = (d − 1)·dim H⁰`.
pub fn euler_law_holds(delta: &Character, field: Field) -> bool {
    let h1 = h1_dims(delta, field);
    let h0 = h0_dim(delta, field).0;
    h1.full as i64 - h1.an.unwrap_or(0) as i64 == (field.d() - 1) * h0 as i64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IotaBehavior {
    Isomorphism,
    Zero,
    SurjectiveKernelLinfty,
    InjectiveImageLinfty,
}

impl fmt::Display for IotaBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IotaBehavior::Isomorphism => "isomorphism",
            IotaBehavior::Zero => "zero",
            IotaBehavior::SurjectiveKernelLinfty => "surjective-kernel-L=inf",
            IotaBehavior::InjectiveImageLinfty => "injective-image-L=inf",
        };
        f.write_str(s)
    }
}

/// Behavior of `ι_k` on `H¹_an(δ)` and `H¹(δ)`.
pub fn iota_behavior(delta: &Character, k: i64, field: Field) -> Result<IotaBehavior> {
    if !delta.is_analytic(field) {
        return Err(CohomError::NonAnalytic);
    }
    let w = delta.weight;
    Ok(if !(1..=k).contains(&w) {
        IotaBehavior::Isomorphism
    } else if delta.is_x_pow(w, field) {
        IotaBehavior::InjectiveImageLinfty
    } else if delta.is_x_pow_times_unr(w, field) {
        IotaBehavior::SurjectiveKernelLinfty
    } else {
        IotaBehavior::Zero
    })
}

// ----- constructive solvers -----

/// A pair `(m, n)` for the complex of `R_L(δ)`: the relation is
/// `∇_δ m = (δ(π)φ_q − 1) n`.
#[derive(Clone, Debug)]
pub struct CocyclePair {
    pub m: LaurentSeries,
    pub n: LaurentSeries,
    pub delta: Character,
}

#[derive(Clone, Debug)]
pub struct AlphaSolution {
    pub c: LaurentSeries,
    /// `∂^i b|_{u=0}` in the resonant case `α = π^{-i}`.
    pub obstruction: Option<FieldElem>,
}

/// Solvers and tests for rank-one modules over a fixed Lubin-Tate group.
pub struct Cohomology {
    ops: Arc<OperatorContext>,
    floor: i64,
}

fn factorial(field: Field, i: i64) -> FieldElem {
    field.from_i128((1..=i as i128).product())
}

fn principal(s: &LaurentSeries) -> LaurentSeries {
    s.split_at(0, false)
}

fn plus(s: &LaurentSeries) -> LaurentSeries {
    s.split_at(0, true).with_tail_val(None).with_tag(RingTag::Plus)
}

impl Cohomology {
    pub fn new(ops: Arc<OperatorContext>) -> Cohomology {
        let floor = significance(ops.field()).max(1);
        Cohomology { ops, floor }
    }

    /// Sets the number of `π`-digits below which a coefficient counts as zero.
    pub fn with_floor(mut self, floor: i64) -> Cohomology {
        self.floor = floor;
        self
    }

    pub fn ops(&self) -> &OperatorContext {
        &self.ops
    }

    pub fn field(&self) -> Field {
        self.ops.field()
    }

    pub fn floor(&self) -> i64 {
        self.floor
    }

    pub fn negligible(&self, c: FieldElem) -> bool {
        c.is_zero() || c.val_bound() >= self.floor
    }

    pub fn negligible_series(&self, s: &LaurentSeries) -> bool {
        s.terms().all(|(_, c)| self.negligible(c)) && s.tail_val().map_or(true, |t| t >= self.floor)
    }

    fn zero(&self) -> LaurentSeries {
        LaurentSeries::zero(self.field(), self.ops.window())
    }

    fn t_pow(&self, i: i64) -> Result<LaurentSeries> {
        Ok(self.ops.t().pow(i as u32)?)
    }

    /// The `i ≥ 0` with `α = π^{-i}`, if any.
    fn resonance(&self, alpha: &PiValue) -> Option<i64> {
        alpha.as_pi_power(self.field()).map(|n| -n).filter(|&i| i >= 0)
    }

    /// `(αφ_q − 1)c`.
    pub fn apply_alpha_phi(&self, c: &LaurentSeries, alpha: &PiValue) -> Result<LaurentSeries> {
        let a = alpha.to_elem(self.field());
        Ok(self.ops.phi_q(c)?.scale(a).sub(c)?)
    }

    /// `∇_δ f`.
    pub fn nabla(&self, f: &LaurentSeries, delta: &Character) -> Result<LaurentSeries> {
        Ok(self.ops.nabla(f, delta.weight_elem(self.field()))?)
    }

    /// `∂^i b` evaluated at `u = 0`.
    pub fn obstruction(&self, b: &LaurentSeries, i: i64) -> Result<FieldElem> {
        let mut s = b.clone();
        for _ in 0..i {
            s = self.ops.partial(&s)?;
        }
        Ok(s.coeff(0))
    }

    /// `−Σ_{j≥0} (αφ_q)^j r` for `r ∈ u^k R⁺` with `k > −v(α)`.
    fn neumann(&self, r: &LaurentSeries, a: FieldElem) -> Result<LaurentSeries> {
        let prec = self.field().precision() as i64 + (-a.val_bound()).max(0);
        let mut acc = self.zero();
        let mut term = r.clone();
        let mut converged = false;
        for _ in 0..64 {
            match term.low_degree() {
                Some(l) if l <= term.known_top() && !term.is_zero() => {}
                _ => break,
            }
            if term.min_val() >= prec {
                converged = true;
                break;
            }
            acc = acc.add(&term)?;
            term = self.ops.phi_q(&term)?.scale(a);
        }
        // later terms only matter modulo π^prec
        let acc = if converged { acc.cap_abs(prec) } else { acc };
        Ok(acc.neg())
    }

    /// Solves `(αφ_q − 1)c = b` on `R⁺`.
    ///
    /// For `α = π^{-i}` the solution lives on the complement of `t_F^i` and
    /// the obstruction `∂^i b|_{u=0}` must vanish.
    pub fn solve_alpha_phi(&self, b: &LaurentSeries, alpha: &PiValue) -> Result<AlphaSolution> {
        let field = self.field();
        if !self.negligible_series(&principal(b)) {
            return Err(CohomError::NotPlus);
        }
        let b = plus(b);
        let res = self.resonance(alpha);
        let k = (1 - alpha.valuation(field)).max(0).max(res.map_or(0, |i| i + 1));
        let a = alpha.to_elem(field);
        let mut rem = b;
        let mut c = self.zero();
        let mut tp = LaurentSeries::one(field, self.ops.window());
        let mut obstruction = None;
        for j in 0..k {
            let cj = rem.coeff(j);
            if !cj.is_exact_zero() {
                rem = rem.sub(&tp.scale(cj))?;
            }
            if res == Some(j) {
                obstruction = Some(cj * factorial(field, j));
            } else {
                let den = a * field.pi_pow(j) - field.one();
                c = c.add(&tp.scale(cj.checked_div(&den)?))?;
            }
            tp = tp.mul(self.ops.t())?;
        }
        if let Some(o) = obstruction {
            if !self.negligible(o) {
                return Err(CohomError::ObstructionNonzero);
            }
        }
        let tail = self.neumann(&rem.split_at(k, true), a)?;
        Ok(AlphaSolution {
            c: c.add(&tail)?.with_tag(RingTag::Plus),
            obstruction,
        })
    }

    /// `c = Σ_{k≥1} α^{-k} ψ^k(b)` and `b' = b − (αφ_q − 1)c`, so that `ψ(b') = 0`.
    pub fn reduce_to_psi_zero(
        &self,
        b: &LaurentSeries,
        alpha: &PiValue,
    ) -> Result<(LaurentSeries, LaurentSeries)> {
        let field = self.field();
        if alpha.valuation(field) >= 1 - field.d() {
            return Err(CohomError::SlopeConditionViolated);
        }
        let ainv = alpha.inv().to_elem(field);
        // applying α afterwards costs max(0, −v(α)) digits
        let prec = field.precision() as i64 + (-alpha.valuation(field)).max(0);
        let mut c = self.zero();
        let mut term = b.clone();
        for _ in 0..(8 * prec + 64) {
            term = self.ops.psi(&term)?.scale(ainv);
            if term.is_zero() || term.min_val() >= prec {
                break;
            }
            c = c.add(&term)?;
        }
        // the omitted terms are only known to vanish modulo π^prec
        let c = c.cap_abs(prec);
        let reduced = b.sub(&self.apply_alpha_phi(&c, alpha)?)?;
        Ok((c, reduced))
    }

    /// The coboundary `((δ(π)φ_q − 1)z, ∇_δ z)`.
    pub fn coboundary(&self, z: &LaurentSeries, delta: &Character) -> Result<CocyclePair> {
        Ok(CocyclePair {
            m: self.apply_alpha_phi(z, &delta.pi_value)?,
            n: self.nabla(z, delta)?,
            delta: *delta,
        })
    }

    /// Whether `∇_δ m = (δ(π)φ_q − 1)n` holds to the working floor.
    pub fn relation_holds(&self, pair: &CocyclePair) -> Result<bool> {
        let lhs = self.nabla(&pair.m, &pair.delta)?;
        let rhs = self.apply_alpha_phi(&pair.n, &pair.delta.pi_value)?;
        Ok(self.negligible_series(&lhs.sub(&rhs)?))
    }

    /// Replaces `(a, b)` by an equivalent pair with `ψ(m) = 0` and `n ∈ R⁺`;
    /// returns it with the witness `c`, `(m, n) = (a, b) − ((δ(π)φ_q − 1)c, ∇_δ c)`.
    pub fn normalize_cocycle(&self, pair: &CocyclePair) -> Result<(CocyclePair, LaurentSeries)> {
        let field = self.field();
        let delta = pair.delta;
        let alpha = delta.pi_value;
        let va = alpha.valuation(field);
        if va >= 1 - field.d() {
            return Err(CohomError::SlopeConditionViolated);
        }
        if !self.relation_holds(pair)? {
            return Err(CohomError::NotACocycle);
        }
        let k = (1 - va).max(1) + NEUMANN_MARGIN;
        let a = alpha.to_elem(field);
        let upper = pair.m.split_at(k, true).with_tail_val(None);
        let c1 = self.neumann(&upper, a)?;
        let b1 = pair.m.sub(&self.apply_alpha_phi(&c1, &alpha)?)?;
        if !self.negligible_series(&b1.split_at(k, true).with_tail_val(None)) {
            return Err(CohomError::NotACocycle);
        }
        let (c2, m) = self.reduce_to_psi_zero(&b1.split_at(k, false), &alpha)?;
        let c = c1.add(&c2)?;
        let n = pair.n.sub(&self.nabla(&c, &delta)?)?;
        if !self.negligible_series(&principal(&n)) {
            return Err(CohomError::NotACocycle);
        }
        Ok((CocyclePair { m, n: plus(&n), delta }, c))
    }

    /// Decides membership in `B¹(δ)` for a normalized pair, returning a
    /// witness `z` with `(m, n) = ((δ(π)φ_q − 1)z, ∇_δ z)` when it is one.
    pub fn is_coboundary(&self, pair: &CocyclePair) -> Result<Option<LaurentSeries>> {
        let field = self.field();
        let delta = pair.delta;
        let alpha = delta.pi_value;
        if !self.negligible_series(&self.ops.psi(&pair.m)?)
            || !self.negligible_series(&principal(&pair.n))
        {
            return Err(CohomError::NotNormalized);
        }
        if !self.negligible_series(&principal(&pair.m)) {
            return Ok(None);
        }
        let m = plus(&pair.m);
        let n = plus(&pair.n);
        let res = self.resonance(&alpha);
        if let Some(i) = res {
            if !self.negligible(self.obstruction(&m, i)?) {
                return Ok(None);
            }
        }
        let mut z = self.solve_alpha_phi(&m, &alpha)?.c;
        if let Some(i) = res {
            // ∇_δ z − n lies in the kernel L·t_F^i
            let r = self.nabla(&z, &delta)?.sub(&n)?;
            let c = r.coeff(i);
            let wi = delta.weight + i;
            if wi != 0 {
                z = z.sub(&self.t_pow(i)?.scale(c.checked_div(&field.from_int(wi))?))?;
            } else if !self.negligible(c) {
                return Ok(None);
            }
        }
        let back = self.coboundary(&z, &delta)?;
        let ok = self.negligible_series(&back.m.sub(&m)?) && self.negligible_series(&back.n.sub(&n)?);
        Ok(ok.then_some(z))
    }

    /// `δ(a)σ_a` on both slots.
    pub fn gamma_act(&self, pair: &CocyclePair, a: FieldElem) -> Result<CocyclePair> {
        let da = pair.delta.eval_unit(a)?;
        Ok(CocyclePair {
            m: self.ops.sigma_a(&pair.m, a)?.scale(da),
            n: self.ops.sigma_a(&pair.n, a)?.scale(da),
            delta: pair.delta,
        })
    }

    /// The relation holds and `γ(m, n) − (m, n)` is a coboundary for every
    /// `γ` in the test set.
    pub fn check_z1(&self, pair: &CocyclePair) -> Result<bool> {
        if !self.relation_holds(pair)? {
            return Ok(false);
        }
        for &a in self.ops.gamma_test_set() {
            let g = self.gamma_act(pair, a)?;
            let diff = CocyclePair {
                m: g.m.sub(&pair.m)?,
                n: g.n.sub(&pair.n)?,
                delta: pair.delta,
            };
            if self.negligible_series(&diff.m) && self.negligible_series(&diff.n) {
                continue;
            }
            let (norm, _) = self.normalize_cocycle(&diff)?;
            if self.is_coboundary(&norm)?.is_none() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `(m, n) ↦ (∂m, ∂n)`, from `x^{-1}δ` to `δ`.
    pub fn partial_on_cocycles(&self, pair: &CocyclePair) -> Result<CocyclePair> {
        Ok(CocyclePair {
            m: self.ops.partial(&pair.m)?,
            n: self.ops.partial(&pair.n)?,
            delta: pair.delta.mul(&Character::x_pow(1)),
        })
    }

    /// `(t_F^i, 0)` and `(0, t_F^i)` for `x^{-i}`.
    pub fn x_pow_generators(&self, i: i64) -> Result<[CocyclePair; 2]> {
        let ti = self.t_pow(i)?;
        let delta = Character::x_pow(-i);
        Ok([
            CocyclePair { m: ti.clone(), n: self.zero(), delta },
            CocyclePair { m: self.zero(), n: ti, delta },
        ])
    }

    /// `((1/q)·log(φ_q(u)/u^q), t_F·∂u/u)` for `δ_unr`.
    pub fn unr_pair(&self) -> Result<CocyclePair> {
        let field = self.field();
        let q = field.q();
        let phi = self.ops.group().phi();
        let h = phi.shift(-q)?.sub(&LaurentSeries::one(field, self.ops.window()))?;
        let vh = h.min_val().max(1);
        let target = field.precision() as i64 + 4;
        let mut log = self.zero();
        let mut hk = h.clone();
        let mut k = 1i64;
        loop {
            let lost = (k as f64).log(field.p() as f64).floor() as i64 * field.e() as i64;
            if k * vh - lost >= target {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            log = log.add(&hk.scale(field.from_ratio(sign, k)))?;
            hk = hk.mul(&h)?;
            k += 1;
        }
        let m = log.cap_abs(target).scale(field.from_ratio(1, q)).with_tag(RingTag::Robba);
        let n = self.ops.t().mul(self.ops.group().dmult())?.shift(-1)?;
        Ok(CocyclePair {
            m,
            n: n.with_tag(RingTag::Plus),
            delta: Character::unr(),
        })
    }
}
