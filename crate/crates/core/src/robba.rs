//! Operators on truncated Robba elements: `φ_q`, `σ_a`, `ψ`, `∂`, `∇_δ`,
//! the residue and the residue pairing.

use std::sync::{Arc, OnceLock, RwLock};

use thiserror::Error;

use crate::lubin_tate::{LTGroup, LtError, PhiChoice};
use crate::padic::{binomial, Field, FieldElem, PadicError};
use crate::series::{LaurentSeries, RingTag, SeriesError, Window};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RobbaError {
    #[error("parameter is not a unit")]
    NotAUnit,
    #[error("window too narrow around degree {0}")]
    WindowTooNarrow(i64),
    #[error("residue is nonzero")]
    NonzeroResidue,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Lt(#[from] LtError),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

pub type Result<T> = std::result::Result<T, RobbaError>;

/// `ψ(u^ℓ)` for the special group, stored densely from its lowest degree.
#[derive(Default)]
struct PsiMemo {
    pos: Vec<Vec<FieldElem>>,
    neg: Vec<Vec<FieldElem>>,
}

struct Conjugation {
    special: OperatorContext,
    h: LaurentSeries,
    h_inv: LaurentSeries,
}

pub struct OperatorContext {
    group: Arc<LTGroup>,
    gamma: Vec<FieldElem>,
    recip_g: LaurentSeries,
    psi_memo: RwLock<PsiMemo>,
    phi_neg: RwLock<Vec<LaurentSeries>>,
    conj: OnceLock<Box<Conjugation>>,
}

impl OperatorContext {
    pub fn new(group: Arc<LTGroup>) -> Result<OperatorContext> {
        let f = group.field();
        let gamma = vec![f.teichmuller_generator(), f.one() + f.pi()];
        Self::with_gamma(group, gamma)
    }

    pub fn with_gamma(group: Arc<LTGroup>, gamma: Vec<FieldElem>) -> Result<OperatorContext> {
        if gamma.iter().any(|a| a.val_bound() != 0 || a.is_zero()) {
            return Err(RobbaError::NotAUnit);
        }
        let recip_g = group.dmult().laurent_invert()?;
        Ok(OperatorContext {
            group,
            gamma,
            recip_g,
            psi_memo: RwLock::new(PsiMemo::default()),
            phi_neg: RwLock::new(Vec::new()),
            conj: OnceLock::new(),
        })
    }

    pub fn group(&self) -> &LTGroup {
        &self.group
    }
    pub fn field(&self) -> Field {
        self.group.field()
    }
    pub fn window(&self) -> Window {
        self.group.window()
    }
    /// Units standing for `Γ` through `χ_F`.
    pub fn gamma_test_set(&self) -> &[FieldElem] {
        &self.gamma
    }
    /// `t_F`.
    pub fn t(&self) -> &LaurentSeries {
        self.group.logarithm()
    }

    fn precision(&self) -> u32 {
        self.group.data_precision().max(1) as u32
    }

    // ----- φ_q and σ_a -----

    /// Window holding `φ_q(u)^{-m}` for every `m ≤ |lo|` together with the
    /// significant part of its annulus tail.
    fn phi_neg_window(&self) -> Window {
        let w = self.window();
        let q = self.field().q();
        let extra = q * (self.field().precision() as i64 + 2);
        Window { lo: q * w.lo.min(0) - extra, hi: w.hi }
    }

    /// `φ_q(u)^{-m}` on the boundary annulus, in the widened window.
    fn phi_neg_power(&self, m: usize) -> Result<LaurentSeries> {
        if let Some(s) = self.phi_neg.read().expect("memo lock").get(m) {
            return Ok(s.clone());
        }
        let wide = self.phi_neg_window();
        let mut w = self.phi_neg.write().expect("memo lock");
        if w.is_empty() {
            w.push(LaurentSeries::one(self.field(), wide));
        }
        while w.len() <= m {
            let inv = if w.len() == 1 {
                let phi = self.group.phi().clone().with_window(wide)?;
                phi.invert_dominant(self.field().q(), self.precision())?
            } else {
                w[1].clone()
            };
            let next = w.last().expect("nonempty").mul(&inv)?;
            w.push(next);
        }
        Ok(w[m].clone())
    }

    /// `f([π](u))`, expanding negative powers on the boundary annulus.
    pub fn phi_q(&self, f: &LaurentSeries) -> Result<LaurentSeries> {
        let pos = self.group.compose_phi_plus(&f.split_at(0, true))?;
        let mut neg = LaurentSeries::zero(self.field(), self.phi_neg_window());
        for (k, c) in f.terms().filter(|t| t.0 < 0) {
            let p = self.phi_neg_power((-k) as usize)?;
            neg = neg.add(&p.scale(c))?;
        }
        let mut out = pos.add(&neg.with_window(f.window())?)?;
        if let Some(t) = f.tail_val() {
            out = out.cap_abs(t).with_tail_val(Some(out.tail_val().map_or(t, |x| x.min(t))));
        }
        Ok(out.with_tag(f.tag()))
    }

    /// `f([a](u))` for a unit `a`.
    pub fn sigma_a(&self, f: &LaurentSeries, a: FieldElem) -> Result<LaurentSeries> {
        if a.is_zero() || a.val_bound() != 0 {
            return Err(RobbaError::NotAUnit);
        }
        let la = self.group.mult_by(a)?;
        let out = f.compose(&la)?;
        Ok(out.with_tag(f.tag()).with_tail_val(f.tail_val()))
    }

    // ----- ψ -----

    fn psi_pos(&self, l: usize) -> Vec<FieldElem> {
        if let Some(v) = self.psi_memo.read().expect("memo lock").pos.get(l) {
            return v.clone();
        }
        let field = self.field();
        let q = field.q() as usize;
        let pi = field.pi();
        let mut memo = self.psi_memo.write().expect("memo lock");
        while memo.pos.len() <= l {
            let n = memo.pos.len();
            let row = if n == 0 {
                vec![field.one()]
            } else if n < q - 1 {
                vec![field.zero()]
            } else if n == q - 1 {
                vec![pi * field.from_int(1 - q as i64) / field.from_int(q as i64)]
            } else {
                let a = &memo.pos[n - q];
                let b = &memo.pos[n - q + 1];
                let len = n / q + 1;
                let mut row = vec![field.zero(); len];
                for (i, x) in a.iter().enumerate() {
                    if i + 1 < len {
                        row[i + 1] += *x;
                    }
                }
                for (i, x) in b.iter().enumerate() {
                    if i < len && !x.is_exact_zero() {
                        row[i] -= pi * *x;
                    }
                }
                row
            };
            memo.pos.push(row);
        }
        memo.pos[l].clone()
    }

    /// Coefficients of `ψ(u^{-m})` from degree `-m` upwards.
    fn psi_neg(&self, m: usize) -> Vec<FieldElem> {
        if let Some(v) = self.psi_memo.read().expect("memo lock").neg.get(m) {
            if !v.is_empty() || m == 0 {
                return v.clone();
            }
        }
        let field = self.field();
        let q = field.q() as usize;
        let pi = field.pi();
        let mut row = vec![field.zero(); m + 1];
        for j in 0..=m {
            let coef = field.from_i128(binomial(m as i64, j as i64)) * pi.pow((m - j) as i64);
            for (i, a) in self.psi_pos(j * (q - 1)).iter().enumerate() {
                if !a.is_exact_zero() && i <= m {
                    row[i] += coef * *a;
                }
            }
        }
        let mut memo = self.psi_memo.write().expect("memo lock");
        if memo.neg.len() <= m {
            memo.neg.resize(m + 1, Vec::new());
        }
        memo.neg[m] = row.clone();
        row
    }

    /// `ψ(u^ℓ)` for the special group, as a Laurent polynomial.
    pub fn psi_monomial(&self, l: i64) -> LaurentSeries {
        let field = self.field();
        let wide = Window { lo: l.min(0) - 1, hi: l.max(0) + 1 };
        let (lo, row) = if l >= 0 { (0, self.psi_pos(l as usize)) } else { (l, self.psi_neg((-l) as usize)) };
        LaurentSeries::new(field, wide, lo, row, None).expect("window covers support")
    }

    /// `ψ(f)`.
    pub fn psi(&self, f: &LaurentSeries) -> Result<LaurentSeries> {
        if self.group.is_special() {
            return self.psi_special(f);
        }
        let conj = self.conjugation()?;
        let g = f.compose(&conj.h)?;
        let p = conj.special.psi_special(&g)?;
        let out = p.compose(&conj.h_inv)?;
        Ok(out.with_tag(f.tag()))
    }

    fn conjugation(&self) -> Result<&Conjugation> {
        if let Some(c) = self.conj.get() {
            return Ok(c);
        }
        // h and h^{-1} are needed beyond the window top: composing a series
        // with lowest degree lo against h loses |lo| degrees of horizon
        let g = &self.group;
        let w = g.window();
        let wide = Window { lo: w.lo, hi: w.hi + 2 * (-w.lo).max(0) };
        let special = LTGroup::make(g.field(), PhiChoice::Special, g.degree(), wide)?;
        let target = LTGroup::make(g.field(), PhiChoice::Series(g.phi().clone().with_window(wide)?), g.degree(), wide)?;
        let h = special.eta_iso(&target)?;
        let h_inv = h.reversion()?;
        let special = LTGroup::make(g.field(), PhiChoice::Special, g.degree(), w)?;
        let special = OperatorContext::with_gamma(Arc::new(special), self.gamma.clone())?;
        let _ = self.conj.set(Box::new(Conjugation { special, h, h_inv }));
        Ok(self.conj.get().expect("just set"))
    }

    fn psi_special(&self, f: &LaurentSeries) -> Result<LaurentSeries> {
        let field = self.field();
        let q = field.q();
        let d = field.d();
        let window = f.window();
        let top_in = f.top();
        let horizon = f.horizon().map(|h| h.div_euclid(q));
        let lo = f.lo().min(0);
        let top = horizon.unwrap_or_else(|| top_in.max(0).div_euclid(q));
        let mut coeffs = vec![field.zero(); (top - lo + 1).max(1) as usize];
        for (l, c) in f.terms() {
            let (start, row) = if l >= 0 { (0, self.psi_pos(l as usize)) } else { (l, self.psi_neg((-l) as usize)) };
            for (i, a) in row.iter().enumerate() {
                let k = start + i as i64;
                if k > top || a.is_exact_zero() {
                    continue;
                }
                coeffs[(k - lo) as usize] += c * *a;
            }
        }
        if let Some(h) = f.horizon() {
            // unknown terms above h are assumed bounded like the stored ones
            let vt = f.min_val_nonneg().min(f.min_val()).saturating_sub(1);
            for (i, x) in coeffs.iter_mut().enumerate() {
                let k = lo + i as i64;
                let b = vt.saturating_add((h + 1).div_euclid(q) + 1 - k - d);
                *x = x.cap_abs(b);
            }
        }
        let mut tail = None;
        if let Some(t) = f.tail_val() {
            let b = t.saturating_add(1 - d);
            let cut = (f.lo() - 1).div_euclid(q);
            for (i, x) in coeffs.iter_mut().enumerate() {
                if lo + i as i64 <= cut {
                    *x = x.cap_abs(b);
                }
            }
            tail = Some(b);
        }
        let out = LaurentSeries::new(field, window, lo, coeffs, horizon)?;
        Ok(out.with_tail_val(tail).with_tag(f.tag()))
    }

    // ----- ∂, ∇, Res -----

    /// `∂f = g(u)·f'(u)`.
    pub fn partial(&self, f: &LaurentSeries) -> Result<LaurentSeries> {
        Ok(f.derivative().mul(self.group.dmult())?.with_tag(f.tag()))
    }

    /// `∇_δ f = t_F·∂f + w·f`.
    pub fn nabla(&self, f: &LaurentSeries, w: FieldElem) -> Result<LaurentSeries> {
        let tp = self.t().mul(&self.partial(f)?)?;
        Ok(tp.add(&f.scale(w))?.with_tag(f.tag()))
    }

    /// Coefficient of `u^{-1}` in `f/g`.
    pub fn residue(&self, f: &LaurentSeries) -> Result<FieldElem> {
        let field = self.field();
        if f.window().lo > -1 || f.known_top() < -1 {
            return Err(RobbaError::WindowTooNarrow(-1));
        }
        let mut acc = field.zero();
        for (k, c) in f.terms() {
            if k > -1 {
                break;
            }
            let j = -1 - k;
            if j > self.recip_g.known_top() {
                return Err(RobbaError::WindowTooNarrow(k));
            }
            let r = self.recip_g.coeff(j);
            if !r.is_exact_zero() {
                acc += c * r;
            }
        }
        if let Some(t) = f.tail_val() {
            acc = acc.cap_abs(t);
        }
        Ok(acc)
    }

    /// `{f, g} = Res(fg)`.
    pub fn pairing(&self, f: &LaurentSeries, g: &LaurentSeries) -> Result<FieldElem> {
        self.residue(&f.mul(g)?)
    }

    /// `G` with `∂G = f` and zero constant term.
    pub fn anti_partial(&self, f: &LaurentSeries) -> Result<LaurentSeries> {
        let over_g = f.mul(&self.recip_g)?;
        match over_g.antiderivative() {
            Ok(s) => Ok(s.with_tag(f.tag().join(RingTag::Plus))),
            Err(SeriesError::ResidueObstruction) => Err(RobbaError::NonzeroResidue),
            Err(e) => Err(e.into()),
        }
    }
}
