//! Points `(δ₁, δ₂, L)` of the parameter space of rank-2 triangulable
//! modules: strata, slope/irreducibility decisions, isomorphism partners and
//! saturated rank-one submodules.

use std::fmt;

use thiserror::Error;

use crate::cohomology::{h1_dims, Character};
use crate::padic::{Field, FieldElem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TriError {
    #[error("L-invariant does not match dim H¹_an(δ₁δ₂⁻¹)")]
    InconsistentLInvariant,
    #[error("point is outside S_+ − S_+^ncl")]
    OutOfDomain,
    #[error("character is not locally analytic")]
    NonAnalytic,
}

pub type Result<T> = std::result::Result<T, TriError>;

/// Coordinate of the extension class in `P(H¹_an(δ₁δ₂⁻¹))`.
#[derive(Clone, Copy, Debug)]
pub enum LInvariant {
    Finite(FieldElem),
    Infinity,
    /// The projective space is a point; its class counts as `L = ∞`.
    NotApplicable,
}

impl LInvariant {
    pub fn is_infinite(&self) -> bool {
        !matches!(self, LInvariant::Finite(_))
    }
}

impl fmt::Display for LInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LInvariant::Finite(x) => write!(f, "{x}"),
            LInvariant::Infinity => f.write_str("inf"),
            LInvariant::NotApplicable => f.write_str("n/a"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Base {
    S0,
    SStar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Ng,
    Cris,
    St,
    Ord,
    Ncl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stratum {
    NotInSPlus,
    In(Base, Kind),
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (b, k) = match self {
            Stratum::NotInSPlus => return f.write_str("not-in-S+"),
            Stratum::In(b, k) => (b, k),
        };
        let b = match b {
            Base::S0 => "S0",
            Base::SStar => "S*",
        };
        let k = match k {
            Kind::Ng => "ng",
            Kind::Cris => "cris",
            Kind::St => "st",
            Kind::Ord => "ord",
            Kind::Ncl => "ncl",
        };
        write!(f, "{b}^{k}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub slope_zero: bool,
    pub irreducible: bool,
    pub analytic_etale: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct TriParam {
    pub delta1: Character,
    pub delta2: Character,
    pub l: LInvariant,
}

impl TriParam {
    pub fn new(delta1: Character, delta2: Character, l: LInvariant) -> TriParam {
        TriParam { delta1, delta2, l }
    }

    /// The point with the `L`-invariant forced by `dim H¹_an`: `∞` when it is
    /// 2-dimensional, not applicable otherwise.
    pub fn at_infinity(delta1: Character, delta2: Character, field: Field) -> TriParam {
        let mut s = TriParam::new(delta1, delta2, LInvariant::Infinity);
        if s.l_dimension(field) != 2 {
            s.l = LInvariant::NotApplicable;
        }
        s
    }

    pub fn ratio(&self) -> Character {
        self.delta1.mul(&self.delta2.inv())
    }

    /// `w(s) = w_{δ₁} − w_{δ₂}`.
    pub fn w(&self) -> i64 {
        self.delta1.weight - self.delta2.weight
    }

    /// `u(s) = v_π(δ₁(π))`.
    pub fn u(&self, field: Field) -> i64 {
        self.delta1.pi_value.valuation(field)
    }

    pub fn is_analytic(&self, field: Field) -> bool {
        self.delta1.is_analytic(field) && self.delta2.is_analytic(field)
    }

    fn l_dimension(&self, field: Field) -> usize {
        h1_dims(&self.ratio(), field).an.unwrap_or(0)
    }

    pub fn check(&self, field: Field) -> Result<()> {
        let na = matches!(self.l, LInvariant::NotApplicable);
        if na != (self.l_dimension(field) != 2) {
            return Err(TriError::InconsistentLInvariant);
        }
        Ok(())
    }

    fn in_s_plus(&self, field: Field) -> bool {
        let v1 = self.delta1.pi_value.valuation(field);
        let v2 = self.delta2.pi_value.valuation(field);
        v1 + v2 == 0 && v1 >= 0
    }

    /// Whether `D(s)` has a rank-one submodule meeting `R_L(δ₁)` trivially.
    fn second_line(&self, field: Field) -> bool {
        let w = self.w();
        self.is_analytic(field) && w >= 1 && !self.ratio().is_x_pow(w, field) && self.l.is_infinite()
    }
}

impl fmt::Display for TriParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}; {}; {})", self.delta1, self.delta2, self.l)
    }
}

pub fn stratify(s: &TriParam, field: Field) -> Result<Stratum> {
    if !s.is_analytic(field) {
        return Err(TriError::NonAnalytic);
    }
    s.check(field)?;
    if !s.in_s_plus(field) {
        return Ok(Stratum::NotInSPlus);
    }
    let u = s.u(field);
    let w = s.w();
    let base = if u == 0 { Base::S0 } else { Base::SStar };
    let kind = if w < 1 {
        Kind::Ng
    } else if u < w {
        if s.l.is_infinite() {
            Kind::Cris
        } else {
            Kind::St
        }
    } else if u == w {
        Kind::Ord
    } else {
        Kind::Ncl
    };
    Ok(Stratum::In(base, kind))
}

pub fn classify(s: &TriParam, field: Field) -> Result<Classification> {
    if !s.is_analytic(field) {
        // outside S^an the ord/ncl strata are empty
        let plus = s.in_s_plus(field);
        return Ok(Classification {
            slope_zero: plus,
            irreducible: plus && s.u(field) > 0,
            analytic_etale: false,
        });
    }
    let st = stratify(s, field)?;
    let (slope_zero, irreducible) = match st {
        Stratum::NotInSPlus => (false, false),
        Stratum::In(_, Kind::Ncl) => (false, false),
        Stratum::In(Base::SStar, Kind::Ord) => (true, false),
        Stratum::In(Base::SStar, _) => (true, true),
        Stratum::In(Base::S0, _) => (true, false),
    };
    Ok(Classification {
        slope_zero,
        irreducible,
        analytic_etale: slope_zero,
    })
}

/// Every `s'` with `D(s') ≅ D(s)`, starting with `s` itself.
pub fn iso_partner(s: &TriParam, field: Field) -> Result<Vec<TriParam>> {
    let slope_zero = classify(s, field)?.slope_zero;
    if !slope_zero {
        return Err(TriError::OutOfDomain);
    }
    if !s.second_line(field) {
        return Ok(vec![*s]);
    }
    let w = s.w();
    let d1 = Character::x_pow(w).mul(&s.delta2);
    let d2 = Character::x_pow(-w).mul(&s.delta1);
    let partner = TriParam::at_infinity(d1, d2, field);
    Ok(vec![*s, partner])
}

/// Number of saturated rank-one submodules of the non-split `D(s)`.
pub fn saturated_count(s: &TriParam, field: Field) -> usize {
    if s.second_line(field) {
        2
    } else {
        1
    }
}
