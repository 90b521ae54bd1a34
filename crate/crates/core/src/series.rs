//! Dense truncated Laurent series over [`FieldElem`] coefficients, and
//! bivariate series truncated by total degree.
//!
//! A [`LaurentSeries`] stores coefficients for degrees `lo ..= top`.  When the
//! horizon is `None` the series is a Laurent polynomial; otherwise coefficients
//! above the horizon are unknown.  A dropped negative tail (produced by
//! expansions on the boundary annulus) is recorded by a valuation bound.

use std::fmt;

use thiserror::Error;

use crate::padic::{Field, FieldElem, PadicError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("significant terms would fall below the window at degree {0}")]
    WindowUnderflow(i64),
    #[error("inner series does not vanish at u = 0")]
    NonComposable,
    #[error("leading coefficient is zero to working precision")]
    ApparentZeroLeadingTerm,
    #[error("nonzero coefficient at u^-1 blocks integration")]
    ResidueObstruction,
    #[error("window too narrow: need degree {0}")]
    WindowTooNarrow(i64),
    #[error("series differ at degree {0}")]
    Mismatch(i64),
    #[error("precision underflow: {got} digits, floor {floor}")]
    PrecisionUnderflow { got: i64, floor: i64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

pub type Result<T> = std::result::Result<T, SeriesError>;

/// Which ring a series is meant to live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RingTag {
    /// No negative degrees (`R⁺`).
    Plus,
    /// Finitely many negative degrees, bounded coefficients (`E†`).
    Dagger,
    /// Negative degrees with coefficients of decreasing valuation.
    Robba,
}

impl RingTag {
    /// The larger of two rings.
    pub fn join(self, other: RingTag) -> RingTag {
        use RingTag::*;
        match (self, other) {
            (Robba, _) | (_, Robba) => Robba,
            (Dagger, _) | (_, Dagger) => Dagger,
            _ => Plus,
        }
    }
}

/// Admissible degree range `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Default for Window {
    fn default() -> Self {
        Window { lo: -40, hi: 120 }
    }
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Window {
        assert!(lo <= hi, "empty window");
        Window { lo, hi }
    }

    fn meet(self, other: Window) -> Window {
        Window {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    /// Parses `lo:hi`.
    pub fn parse(s: &str) -> Option<Window> {
        let (a, b) = s.split_once(':')?;
        let (lo, hi) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        (lo <= hi).then_some(Window { lo, hi })
    }
}

/// Valuation from which a coefficient may leave the window: half the working precision.
pub fn significance(field: Field) -> i64 {
    (field.precision() as i64 + 1) / 2
}

#[derive(Clone)]
pub struct LaurentSeries {
    field: Field,
    window: Window,
    lo: i64,
    coeffs: Vec<FieldElem>,
    horizon: Option<i64>,
    tail_val: Option<i64>,
    tag: RingTag,
}

impl LaurentSeries {
    /// Builds a series from coefficients starting at degree `lo`.
    ///
    /// With `horizon = Some(h)` the coefficients above `h` are unknown.
    pub fn new(
        field: Field,
        window: Window,
        lo: i64,
        coeffs: Vec<FieldElem>,
        horizon: Option<i64>,
    ) -> Result<LaurentSeries> {
        let mut s = LaurentSeries {
            field,
            window,
            lo,
            coeffs,
            horizon,
            tail_val: None,
            tag: RingTag::Plus,
        };
        s.normalize_shape();
        s.check_window()?;
        s.tag = s.natural_tag();
        Ok(s)
    }

    /// Laurent polynomial from `(degree, coefficient)` pairs.
    pub fn from_terms(
        field: Field,
        window: Window,
        terms: &[(i64, FieldElem)],
    ) -> Result<LaurentSeries> {
        if terms.is_empty() {
            return Ok(Self::zero(field, window));
        }
        let lo = terms.iter().map(|t| t.0).min().unwrap();
        let hi = terms.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![field.zero(); (hi - lo + 1) as usize];
        for (k, c) in terms {
            coeffs[(k - lo) as usize] += *c;
        }
        Self::new(field, window, lo, coeffs, None)
    }

    /// Laurent polynomial with integer coefficients starting at degree `lo`.
    pub fn from_ints(field: Field, window: Window, lo: i64, ints: &[i64]) -> Result<LaurentSeries> {
        let coeffs = ints.iter().map(|&c| field.from_int(c)).collect();
        Self::new(field, window, lo, coeffs, None)
    }

    pub fn zero(field: Field, window: Window) -> LaurentSeries {
        LaurentSeries {
            field,
            window,
            lo: 0,
            coeffs: Vec::new(),
            horizon: None,
            tail_val: None,
            tag: RingTag::Plus,
        }
    }

    pub fn constant(c: FieldElem, window: Window) -> LaurentSeries {
        Self::monomial(c, 0, window)
    }

    pub fn one(field: Field, window: Window) -> LaurentSeries {
        Self::constant(field.one(), window)
    }

    /// `c · u^k`.
    pub fn monomial(c: FieldElem, k: i64, window: Window) -> LaurentSeries {
        let mut s = LaurentSeries {
            field: c.field(),
            window,
            lo: k,
            coeffs: vec![c],
            horizon: None,
            tail_val: None,
            tag: RingTag::Plus,
        };
        s.normalize_shape();
        s.tag = s.natural_tag();
        s
    }

    /// The variable `u`.
    pub fn u(field: Field, window: Window) -> LaurentSeries {
        Self::monomial(field.one(), 1, window)
    }

    pub fn field(&self) -> Field {
        self.field
    }
    pub fn window(&self) -> Window {
        self.window
    }
    pub fn tag(&self) -> RingTag {
        self.tag
    }
    /// Lowest stored degree.
    pub fn lo(&self) -> i64 {
        self.lo
    }
    /// Highest stored degree (`lo - 1` when empty).
    pub fn top(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }
    /// Degree above which coefficients are unknown; `None` for polynomials.
    pub fn horizon(&self) -> Option<i64> {
        self.horizon
    }
    /// Highest degree with a known coefficient.
    pub fn known_top(&self) -> i64 {
        self.horizon.unwrap_or(self.window.hi)
    }
    /// Valuation bound of a dropped negative tail, if any.
    pub fn tail_val(&self) -> Option<i64> {
        self.tail_val
    }
    /// Whether any terms were dropped at either window edge.
    pub fn truncated(&self) -> bool {
        self.horizon.is_some() || self.tail_val.is_some()
    }

    pub fn with_tag(mut self, tag: RingTag) -> LaurentSeries {
        self.tag = tag;
        self
    }

    pub fn with_window(mut self, window: Window) -> Result<LaurentSeries> {
        self.window = window;
        if self.top() > window.hi {
            self.coeffs
                .truncate((window.hi - self.lo + 1).max(0) as usize);
            self.horizon = Some(self.horizon.map_or(window.hi, |h| h.min(window.hi)));
        }
        self.check_window()?;
        Ok(self)
    }

    /// Marks coefficients above degree `h` as unknown.
    pub fn truncate(mut self, h: i64) -> LaurentSeries {
        if self.horizon.map_or(true, |old| h < old) {
            if self.top() > h {
                self.coeffs.truncate((h - self.lo + 1).max(0) as usize);
            } else {
                let top = self.top();
                for _ in top..h {
                    self.coeffs.push(self.field.zero());
                }
            }
            self.horizon = Some(h);
            if self.coeffs.is_empty() {
                self.lo = h + 1;
            }
        }
        self
    }

    pub fn with_tail_val(mut self, t: Option<i64>) -> LaurentSeries {
        self.tail_val = t;
        self
    }

    /// Coefficient of `u^k`; exact zero outside the stored range.
    pub fn coeff(&self, k: i64) -> FieldElem {
        if k < self.lo || k > self.top() {
            if let Some(h) = self.horizon {
                assert!(k <= h, "coefficient of u^{k} is beyond the horizon {h}");
            }
            return self.field.zero();
        }
        self.coeffs[(k - self.lo) as usize]
    }

    /// Stored `(degree, coefficient)` pairs, skipping exact zeros.
    pub fn terms(&self) -> impl Iterator<Item = (i64, FieldElem)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_exact_zero())
            .map(move |(i, c)| (self.lo + i as i64, *c))
    }

    /// Lowest degree of a coefficient that is not exactly zero.
    pub fn low_degree(&self) -> Option<i64> {
        self.terms().next().map(|t| t.0)
    }

    /// Minimum of the valuation bounds of stored coefficients.
    pub fn min_val(&self) -> i64 {
        self.coeffs
            .iter()
            .map(|c| c.val_bound())
            .min()
            .unwrap_or(i64::MAX)
    }

    /// Minimum valuation bound over stored coefficients of degree `>= 0`.
    pub fn min_val_nonneg(&self) -> i64 {
        self.terms()
            .filter(|t| t.0 >= 0)
            .map(|t| t.1.val_bound())
            .min()
            .unwrap_or(i64::MAX)
    }

    /// Minimum relative precision over certified-nonzero coefficients.
    pub fn min_rel_precision(&self) -> Option<u32> {
        self.coeffs.iter().filter_map(|c| c.rel_precision()).min()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    fn natural_tag(&self) -> RingTag {
        match self.low_degree() {
            Some(k) if k < 0 => RingTag::Dagger,
            _ => RingTag::Plus,
        }
    }

    fn normalize_shape(&mut self) {
        while self.coeffs.first().is_some_and(|c| c.is_exact_zero()) {
            if self.horizon.is_some() && self.coeffs.len() == 1 {
                break;
            }
            self.coeffs.remove(0);
            self.lo += 1;
        }
        if self.horizon.is_none() {
            while self.coeffs.last().is_some_and(|c| c.is_exact_zero()) {
                self.coeffs.pop();
            }
            if self.coeffs.is_empty() {
                self.lo = 0;
            }
        } else if let Some(h) = self.horizon {
            let top = self.top();
            for _ in top..h {
                self.coeffs.push(self.field.zero());
            }
        }
    }

    fn check_window(&mut self) -> Result<()> {
        // terms below the window must be insignificant
        let floor = significance(self.field);
        while self.lo < self.window.lo && !self.coeffs.is_empty() {
            let c = self.coeffs.remove(0);
            if !c.is_exact_zero() {
                let v = c.val_bound();
                if v < floor {
                    return Err(SeriesError::WindowUnderflow(self.lo));
                }
                self.tail_val = Some(self.tail_val.map_or(v, |t| t.min(v)));
            }
            self.lo += 1;
        }
        if self.top() > self.window.hi {
            let keep = (self.window.hi - self.lo + 1).max(0) as usize;
            self.coeffs.truncate(keep);
            self.horizon = Some(
                self.horizon
                    .map_or(self.window.hi, |h| h.min(self.window.hi)),
            );
        }
        if let Some(h) = self.horizon {
            if h > self.window.hi {
                self.horizon = Some(self.window.hi);
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<LaurentSeries> {
        self.normalize_shape();
        self.check_window()?;
        Ok(self)
    }

    fn assert_compatible(&self, other: &LaurentSeries) {
        assert!(self.field == other.field, "series over different fields");
    }

    // ----- arithmetic -----

    pub fn add(&self, other: &LaurentSeries) -> Result<LaurentSeries> {
        self.assert_compatible(other);
        let window = self.window.meet(other.window);
        let horizon = match (self.horizon, other.horizon) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let lo = self.lo.min(other.lo);
        let top = self.top().max(other.top());
        let top = horizon.map_or(top, |h| top.min(h));
        let mut coeffs = Vec::with_capacity((top - lo + 1).max(0) as usize);
        for k in lo..=top {
            let a = if k >= self.lo && k <= self.top() {
                self.coeffs[(k - self.lo) as usize]
            } else {
                self.field.zero()
            };
            let b = if k >= other.lo && k <= other.top() {
                other.coeffs[(k - other.lo) as usize]
            } else {
                self.field.zero()
            };
            coeffs.push(a + b);
        }
        let tail_val = match (self.tail_val, other.tail_val) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let tag = self.tag.join(other.tag);
        LaurentSeries {
            field: self.field,
            window,
            lo,
            coeffs,
            horizon,
            tail_val,
            tag,
        }
        .finish()
    }

    pub fn neg(&self) -> LaurentSeries {
        let mut s = self.clone();
        for c in s.coeffs.iter_mut() {
            *c = -*c;
        }
        s
    }

    pub fn sub(&self, other: &LaurentSeries) -> Result<LaurentSeries> {
        self.add(&other.neg())
    }

    /// Multiplies every coefficient by `c`.
    pub fn scale(&self, c: FieldElem) -> LaurentSeries {
        let mut s = self.clone();
        for x in s.coeffs.iter_mut() {
            *x = *x * c;
        }
        if let Some(t) = s.tail_val {
            s.tail_val = Some(t.saturating_add(c.val_bound()));
        }
        s
    }

    /// Multiplies by `u^k`.
    pub fn shift(&self, k: i64) -> Result<LaurentSeries> {
        let mut s = self.clone();
        s.lo += k;
        s.horizon = s.horizon.map(|h| h + k);
        s.finish()
    }

    pub fn mul(&self, other: &LaurentSeries) -> Result<LaurentSeries> {
        let window = self.window.meet(other.window);
        let mut r = self.mul_capped(other, window.hi);
        r.window = window;
        r.finish()
    }

    /// Product known up to degree `cap` at most, ignoring windows.
    pub(crate) fn mul_capped(&self, other: &LaurentSeries, cap: i64) -> LaurentSeries {
        self.assert_compatible(other);
        let field = self.field;
        let lo = self.lo + other.lo;
        fn bound(horizon: &mut Option<i64>, h: i64) {
            *horizon = Some(horizon.map_or(h, |x| x.min(h)));
        }
        let mut horizon = None::<i64>;
        if let Some(h) = self.horizon {
            bound(&mut horizon, other.low_degree().unwrap_or(other.lo) + h);
        }
        if let Some(h) = other.horizon {
            bound(&mut horizon, self.low_degree().unwrap_or(self.lo) + h);
        }
        let exact_top = self.top() + other.top();
        let mut top = horizon.map_or(exact_top, |h| h.min(exact_top));
        if top > cap {
            top = cap;
            bound(&mut horizon, cap);
        }
        let len = (top - lo + 1).max(0) as usize;
        let mut coeffs = vec![field.zero(); len];
        let bt: Vec<(i64, FieldElem)> = other.terms().collect();
        for (i, a) in self.terms() {
            for &(j, b) in &bt {
                let k = i + j;
                if k > top {
                    break;
                }
                let idx = (k - lo) as usize;
                coeffs[idx] += a * b;
            }
        }
        let mut tail_val = None;
        for (t, o) in [(self.tail_val, other), (other.tail_val, self)] {
            if let Some(t) = t {
                let b = t.saturating_add(o.min_val().min(o.tail_val.unwrap_or(i64::MAX)));
                tail_val = Some(tail_val.map_or(b, |x: i64| x.min(b)));
            }
        }
        if let Some(tv) = tail_val {
            for c in coeffs.iter_mut() {
                *c = c.cap_abs(tv);
            }
        }
        let mut r = LaurentSeries {
            field,
            window: Window {
                lo: self.window.lo.min(other.window.lo).min(lo),
                hi: cap.max(self.window.hi),
            },
            lo,
            coeffs,
            horizon,
            tail_val,
            tag: self.tag.join(other.tag),
        };
        r.normalize_shape();
        r
    }

    /// `self^k` for `k >= 0`.
    pub fn pow(&self, k: u32) -> Result<LaurentSeries> {
        let mut r = Self::one(self.field, self.window);
        for _ in 0..k {
            r = r.mul(self)?;
        }
        Ok(r)
    }

    /// Termwise `d/du`.
    pub fn derivative(&self) -> LaurentSeries {
        let field = self.field;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = self.lo + i as i64;
                *c * field.from_int(k)
            })
            .collect();
        let mut s = LaurentSeries {
            coeffs,
            lo: self.lo - 1,
            horizon: self.horizon.map(|h| h - 1),
            ..self.clone()
        };
        s.normalize_shape();
        s
    }

    /// Termwise integration with zero constant term.
    pub fn antiderivative(&self) -> Result<LaurentSeries> {
        let field = self.field;
        if self.lo <= -1 && self.top() >= -1 && !self.coeff(-1).is_zero() {
            return Err(SeriesError::ResidueObstruction);
        }
        let mut terms = Vec::new();
        for (k, c) in self.terms() {
            if k == -1 {
                continue;
            }
            terms.push((k + 1, c / field.from_int(k + 1)));
        }
        let lo = terms.first().map_or(0, |t| t.0).min(0);
        let top = match self.horizon {
            Some(h) => h + 1,
            None => terms.last().map_or(0, |t| t.0),
        };
        let mut coeffs = vec![field.zero(); (top - lo + 1).max(0) as usize];
        for (k, c) in terms {
            if k <= top {
                coeffs[(k - lo) as usize] = c;
            }
        }
        LaurentSeries {
            field,
            window: self.window,
            lo,
            coeffs,
            horizon: self.horizon.map(|h| h + 1),
            tail_val: self.tail_val,
            tag: self.tag,
        }
        .finish()
    }

    /// Inverse as a Laurent series around `u = 0` (expansion in the punctured disc).
    pub fn laurent_invert(&self) -> Result<LaurentSeries> {
        let k0 = self
            .low_degree()
            .ok_or(SeriesError::ApparentZeroLeadingTerm)?;
        let c = self.coeff(k0);
        if c.is_zero() {
            return Err(SeriesError::ApparentZeroLeadingTerm);
        }
        let cap = self.window.hi;
        let h = self.shift(-k0)?;
        let inv = h.invert_unit_series(cap + k0)?;
        let mut r = inv.shift_raw(-k0);
        r.window = self.window;
        if r.lo < 0 {
            r.tag = RingTag::Robba.join(self.tag);
        }
        r.finish()
    }

    fn shift_raw(&self, k: i64) -> LaurentSeries {
        let mut s = self.clone();
        s.lo += k;
        s.horizon = s.horizon.map(|h| h + k);
        s
    }

    /// Inverse of a power series with nonzero constant term, up to degree `cap`.
    fn invert_unit_series(&self, cap: i64) -> Result<LaurentSeries> {
        let field = self.field;
        let c0 = self.coeff(0);
        let c0inv = c0.inv().map_err(|_| SeriesError::ApparentZeroLeadingTerm)?;
        let top = self.horizon.map_or(cap, |h| h.min(cap));
        let mut b = vec![field.zero(); (top + 1).max(0) as usize];
        let hs: Vec<(i64, FieldElem)> = self.terms().filter(|t| t.0 >= 1).collect();
        for n in 0..=top {
            let mut acc = if n == 0 { field.one() } else { field.zero() };
            for &(k, hk) in &hs {
                if k > n {
                    break;
                }
                acc -= hk * b[(n - k) as usize];
            }
            b[n as usize] = acc * c0inv;
        }
        let mut r = LaurentSeries {
            field,
            window: Window {
                lo: self.window.lo,
                hi: cap.max(self.window.hi),
            },
            lo: 0,
            coeffs: b,
            horizon: Some(top),
            tail_val: None,
            tag: self.tag,
        };
        r.normalize_shape();
        Ok(r)
    }

    /// Inverse on the boundary annulus, where the term of degree `k` dominates:
    /// `self = c u^k (1 + r)` with every coefficient of `r` of positive valuation.
    /// The Neumann series is summed until its terms vanish modulo `π^precision`
    /// relative to `c^{-1}`.
    pub fn invert_dominant(&self, k: i64, precision: u32) -> Result<LaurentSeries> {
        let field = self.field;
        let c = self.coeff(k);
        let cinv = c.inv().map_err(|_| SeriesError::ApparentZeroLeadingTerm)?;
        let wide = Window {
            lo: self.window.lo - k,
            hi: self.window.hi - k,
        };
        let r = self.scale(cinv).shift_raw(-k);
        let mut r = r.sub_unchecked(&Self::one(field, r.window));
        r.window = wide;
        let vr = r.min_val();
        if vr < 1 {
            return Err(SeriesError::ApparentZeroLeadingTerm);
        }
        let nterms = if vr == i64::MAX {
            0
        } else {
            (precision as i64 + vr - 1) / vr
        };
        let neg_r = r.neg();
        let mut acc = Self::one(field, wide);
        let mut term = Self::one(field, wide);
        let mut dropped = i64::MAX;
        for _ in 0..nterms {
            term = term.mul_capped(&neg_r, wide.hi);
            // peel terms below the window
            while term.lo < wide.lo && !term.coeffs.is_empty() {
                let x = term.coeffs.remove(0);
                dropped = dropped.min(x.val_bound());
                term.lo += 1;
            }
            acc = acc.add_unchecked(&term);
        }
        let omitted = (nterms + 1).saturating_mul(vr).min(dropped);
        let bound = omitted.saturating_add(cinv.val_bound());
        let mut out = acc.scale(cinv);
        for x in out.coeffs.iter_mut() {
            *x = x.cap_abs(bound);
        }
        let neg_dropped = dropped < i64::MAX || nterms > 0 && r.lo < 0;
        out.tail_val = if neg_dropped { Some(bound) } else { None };
        let mut out = out.shift_raw(-k);
        out.window = self.window;
        out.tag = RingTag::Dagger;
        out.normalize_shape();
        if out.lo < self.window.lo {
            // remaining entries below the window must be negligible
            while out.lo < self.window.lo && !out.coeffs.is_empty() {
                let x = out.coeffs.remove(0);
                if x.val_bound() < significance(field) {
                    return Err(SeriesError::WindowUnderflow(out.lo));
                }
                out.tail_val = Some(out.tail_val.map_or(x.val_bound(), |t| t.min(x.val_bound())));
                out.lo += 1;
            }
        }
        out.finish()
    }

    fn add_unchecked(&self, other: &LaurentSeries) -> LaurentSeries {
        let mut a = self.clone();
        let mut b = other.clone();
        let w = Window {
            lo: a.window.lo.min(b.window.lo),
            hi: a.window.hi.max(b.window.hi),
        };
        a.window = w;
        b.window = w;
        let mut r = a.add(&b).expect("window is the hull");
        r.window = w;
        r
    }

    fn sub_unchecked(&self, other: &LaurentSeries) -> LaurentSeries {
        self.add_unchecked(&other.neg())
    }

    /// Substitution `self(g(u))` with the punctured-disc expansion of negative powers.
    pub fn compose(&self, g: &LaurentSeries) -> Result<LaurentSeries> {
        self.assert_compatible(g);
        if g.terms().any(|(k, c)| k <= 0 && !c.is_zero()) {
            return Err(SeriesError::NonComposable);
        }
        let g = {
            let mut gg = g.clone();
            while gg.lo <= 0 && !gg.coeffs.is_empty() {
                gg.coeffs.remove(0);
                gg.lo += 1;
            }
            gg
        };
        let vg = match g.low_degree() {
            Some(k) => k,
            None => {
                // g vanishes: only the constant term of self survives
                return Self::constant(self.coeff(0), self.window)
                    .truncate_if(g.horizon.map(|h| h.max(0)))
                    .finish();
            }
        };
        let cap = self.window.hi;
        let mut horizon = cap;
        if let Some(hf) = self.horizon {
            horizon = horizon.min((hf + 1) * vg - 1);
        }
        let kmin = self.low_degree().unwrap_or(0).min(1);
        if let Some(hg) = g.horizon {
            horizon = horizon.min(kmin * vg + hg - vg);
        }
        let field = self.field;
        let work = Window {
            lo: i64::MIN / 4,
            hi: horizon,
        };
        // nonnegative part by Horner
        let mut pos = Self::zero(field, work);
        let top = self.top();
        if top >= 0 {
            let mut k = top;
            while k >= 0 {
                pos = pos.mul_capped(&g, horizon);
                pos = pos.add_unchecked(&Self::constant(self.coeff(k), work));
                k -= 1;
            }
        }
        let mut total = pos;
        let mut ginv_val = 0i64;
        if self.lo < 0 {
            let m = -self.lo;
            let extra = (m - 1) * vg;
            let mut gw = g.clone();
            gw.window = Window {
                lo: work.lo,
                hi: horizon + extra + vg,
            };
            let ginv = gw.laurent_invert()?;
            ginv_val = ginv.min_val().min(0);
            let mut acc = Self::constant(self.coeff(-m), work);
            for j in (1..m).rev() {
                acc = acc.mul_capped(&ginv, horizon + extra);
                acc = acc.add_unchecked(&Self::constant(self.coeff(-j), work));
            }
            acc = acc.mul_capped(&ginv, horizon + extra);
            total = total.add_unchecked(&acc);
        }
        let exact = self.horizon.is_none()
            && g.horizon.is_none()
            && self.lo >= 0
            && self.top() * g.top() <= horizon;
        let mut out = if exact {
            total
        } else {
            total.truncate(horizon)
        };
        out.window = self.window;
        // each dropped term c u^l (l < lo) contributes c·g^l everywhere
        out.tail_val = self.tail_val.map(|t| t.saturating_add((1 - self.lo.min(0)).saturating_mul(ginv_val)));
        if let Some(t) = out.tail_val {
            out = out.cap_abs(t);
        }
        out.tag = self.tag.join(g.tag);
        if out.low_degree().is_some_and(|k| k < 0) {
            out.tag = out.tag.join(RingTag::Robba);
        }
        out.finish()
    }

    fn truncate_if(self, h: Option<i64>) -> LaurentSeries {
        match h {
            Some(h) => self.truncate(h),
            None => self,
        }
    }

    /// Compositional inverse of a series `a u + ...` with `a` a unit, up to the horizon.
    pub fn reversion(&self) -> Result<LaurentSeries> {
        let field = self.field;
        let a = self.coeff(1);
        if a.is_zero() || self.terms().any(|(k, c)| k <= 0 && !c.is_zero()) {
            return Err(SeriesError::NonComposable);
        }
        let top = self.known_top();
        let ainv = a.inv()?;
        // h(f) = u: the u^n coefficient gives Σ_k h_k [f^k]_n = δ_{n,1}
        let mut powers = vec![Self::one(field, self.window)];
        for k in 1..=top {
            let next = powers[(k - 1) as usize].mul_capped(self, top);
            powers.push(next);
        }
        let mut h = vec![field.zero(); (top + 1).max(0) as usize];
        for n in 1..=top {
            let mut acc = if n == 1 { field.one() } else { field.zero() };
            for k in 1..n {
                let hk = h[k as usize];
                if !hk.is_exact_zero() {
                    acc -= hk * powers[k as usize].coeff_or_zero(n);
                }
            }
            h[n as usize] = acc * ainv.pow(n);
        }
        let mut r = LaurentSeries {
            field,
            window: self.window,
            lo: 0,
            coeffs: h,
            horizon: Some(top),
            tail_val: None,
            tag: RingTag::Plus,
        };
        r.normalize_shape();
        Ok(r)
    }

    /// Caps every coefficient at absolute precision `abs`.
    pub fn cap_abs(&self, abs: i64) -> LaurentSeries {
        let mut s = self.clone();
        for c in s.coeffs.iter_mut() {
            *c = c.cap_abs(abs);
        }
        s
    }

    /// Applies `f` to every stored coefficient.
    pub fn map_coeffs(&self, f: impl Fn(i64, FieldElem) -> FieldElem) -> LaurentSeries {
        let mut s = self.clone();
        let lo = s.lo;
        for (i, c) in s.coeffs.iter_mut().enumerate() {
            *c = f(lo + i as i64, *c);
        }
        s.normalize_shape();
        s
    }

    /// Part of degree `>= k` (`upper = true`) or `< k`.
    pub fn split_at(&self, k: i64, upper: bool) -> LaurentSeries {
        self.map_coeffs(|d, c| {
            if (d >= k) == upper {
                c
            } else {
                self.field.zero()
            }
        })
        .with_horizon_if(!upper)
    }

    fn with_horizon_if(mut self, drop: bool) -> LaurentSeries {
        if drop {
            self.horizon = None;
            self.normalize_shape();
        }
        self
    }

    /// Least absolute precision of `self - other` over the common known range.
    ///
    /// Returns `Ok(None)` when all compared coefficients coincide exactly.
    pub fn agreement(&self, other: &LaurentSeries) -> Result<Option<i64>> {
        let lo = self.lo.min(other.lo);
        let top = self
            .known_top()
            .min(other.known_top())
            .min(self.top().max(other.top()));
        let mut worst: Option<i64> = None;
        for k in lo..=top {
            let diff = self.coeff_or_zero(k) - other.coeff_or_zero(k);
            if diff.is_exact_zero() {
                continue;
            }
            match diff.abs_precision() {
                Some(d) if diff.is_zero() => worst = Some(worst.map_or(d, |w| w.min(d))),
                _ => return Err(SeriesError::Mismatch(k)),
            }
        }
        Ok(worst)
    }

    fn coeff_or_zero(&self, k: i64) -> FieldElem {
        if k < self.lo || k > self.top() {
            self.field.zero()
        } else {
            self.coeffs[(k - self.lo) as usize]
        }
    }

    /// Succeeds when the series agree with at least `floor` digits wherever compared.
    pub fn assert_agrees(&self, other: &LaurentSeries, floor: i64) -> Result<i64> {
        match self.agreement(other)? {
            None => Ok(i64::MAX),
            Some(d) if d >= floor => Ok(d),
            Some(d) => Err(SeriesError::PrecisionUnderflow { got: d, floor }),
        }
    }

    /// Parses the `deg:coeff` serialization.
    pub fn parse(field: Field, window: Window, text: &str) -> Result<LaurentSeries> {
        let mut terms = Vec::new();
        let mut horizon = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix("O(u^") {
                let h: i64 = rest
                    .trim_end_matches(')')
                    .parse()
                    .map_err(|_| SeriesError::Parse(line.into()))?;
                horizon = Some(h - 1);
                continue;
            }
            let (d, c) = line
                .split_once(':')
                .ok_or_else(|| SeriesError::Parse(line.into()))?;
            let d: i64 = d
                .trim()
                .parse()
                .map_err(|_| SeriesError::Parse(line.into()))?;
            terms.push((d, field.parse_elem(c)?));
        }
        let s = Self::from_terms(field, window, &terms)?;
        Ok(match horizon {
            Some(h) => s.truncate(h),
            None => s,
        })
    }
}

impl fmt::Display for LaurentSeries {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.terms() {
            writeln!(fm, "{k}:{c}")?;
        }
        if let Some(h) = self.horizon {
            writeln!(fm, "O(u^{})", h + 1)?;
        }
        Ok(())
    }
}

impl fmt::Debug for LaurentSeries {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            fm,
            "LaurentSeries[{:?}; {}..{:?}]\n{}",
            self.tag, self.lo, self.horizon, self
        )
    }
}

/// Bivariate series `Σ c_{ij} X^i Y^j` truncated at total degree `D`.
#[derive(Clone, Debug)]
pub struct BivariateSeries {
    field: Field,
    degree: usize,
    coeffs: Vec<FieldElem>,
}

impl BivariateSeries {
    fn index(i: usize, j: usize) -> usize {
        let t = i + j;
        t * (t + 1) / 2 + j
    }

    pub fn zero(field: Field, degree: usize) -> BivariateSeries {
        let n = (degree + 1) * (degree + 2) / 2;
        BivariateSeries {
            field,
            degree,
            coeffs: vec![field.zero(); n],
        }
    }

    /// `X` (`which = 0`) or `Y` (`which = 1`).
    pub fn var(field: Field, degree: usize, which: usize) -> BivariateSeries {
        let mut s = Self::zero(field, degree);
        if degree >= 1 {
            if which == 0 {
                s.set(1, 0, field.one());
            } else {
                s.set(0, 1, field.one());
            }
        }
        s
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn field(&self) -> Field {
        self.field
    }

    pub fn get(&self, i: usize, j: usize) -> FieldElem {
        if i + j > self.degree {
            return self.field.zero();
        }
        self.coeffs[Self::index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, c: FieldElem) {
        if i + j <= self.degree {
            self.coeffs[Self::index(i, j)] = c;
        }
    }

    pub fn add(&self, other: &BivariateSeries) -> BivariateSeries {
        let mut r = self.clone();
        for (a, b) in r.coeffs.iter_mut().zip(&other.coeffs) {
            *a += *b;
        }
        r
    }

    pub fn sub(&self, other: &BivariateSeries) -> BivariateSeries {
        let mut r = self.clone();
        for (a, b) in r.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= *b;
        }
        r
    }

    pub fn scale(&self, c: FieldElem) -> BivariateSeries {
        let mut r = self.clone();
        for a in r.coeffs.iter_mut() {
            *a = *a * c;
        }
        r
    }

    pub fn mul(&self, other: &BivariateSeries) -> BivariateSeries {
        let d = self.degree;
        let mut r = Self::zero(self.field, d);
        for t1 in 0..=d {
            for j1 in 0..=t1 {
                let a = self.coeffs[Self::index(t1 - j1, j1)];
                if a.is_exact_zero() {
                    continue;
                }
                for t2 in 0..=(d - t1) {
                    for j2 in 0..=t2 {
                        let b = other.coeffs[Self::index(t2 - j2, j2)];
                        if b.is_exact_zero() {
                            continue;
                        }
                        let idx = Self::index(t1 - j1 + t2 - j2, j1 + j2);
                        r.coeffs[idx] += a * b;
                    }
                }
            }
        }
        r
    }

    /// Univariate power series `f(X)` (only degrees `0..=D` used) as a bivariate series.
    pub fn from_univariate(f: &LaurentSeries, degree: usize, which: usize) -> BivariateSeries {
        let mut s = Self::zero(f.field(), degree);
        for (k, c) in f.terms() {
            if k >= 0 && (k as usize) <= degree {
                if which == 0 {
                    s.set(k as usize, 0, c);
                } else {
                    s.set(0, k as usize, c);
                }
            }
        }
        s
    }

    /// `f(self)` for a power series `f` with `f(0)` arbitrary.
    pub fn compose_outer(&self, f: &LaurentSeries) -> BivariateSeries {
        let d = self.degree as i64;
        let mut acc = Self::zero(self.field, self.degree);
        let mut k = d.min(f.top());
        while k >= 0 {
            acc = acc.mul(self);
            let c = f.coeff(k);
            acc.coeffs[0] += c;
            k -= 1;
        }
        acc
    }

    /// `self(a, b)` for bivariate `a`, `b` without constant terms.
    pub fn substitute(&self, a: &BivariateSeries, b: &BivariateSeries) -> BivariateSeries {
        let d = self.degree;
        let mut apow = vec![Self::zero(self.field, d); d + 1];
        let mut bpow = apow.clone();
        apow[0].coeffs[0] = self.field.one();
        bpow[0].coeffs[0] = self.field.one();
        for k in 1..=d {
            apow[k] = apow[k - 1].mul(a);
            bpow[k] = bpow[k - 1].mul(b);
        }
        let mut r = Self::zero(self.field, d);
        for i in 0..=d {
            for j in 0..=(d - i) {
                let c = self.get(i, j);
                if c.is_exact_zero() {
                    continue;
                }
                r = r.add(&apow[i].mul(&bpow[j]).scale(c));
            }
        }
        r
    }

    /// Homogeneous part of total degree `t` as `(i, j, coeff)` triples.
    pub fn homogeneous(&self, t: usize) -> Vec<(usize, usize, FieldElem)> {
        (0..=t).map(|j| (t - j, j, self.get(t - j, j))).collect()
    }

    /// `∂/∂Y` evaluated at `Y = 0`, as a power series in `X`.
    pub fn d_dy_at_zero(&self, window: Window) -> LaurentSeries {
        let terms: Vec<(i64, FieldElem)> = (0..self.degree)
            .map(|i| (i as i64, self.get(i, 1)))
            .collect();
        LaurentSeries::from_terms(self.field, window, &terms)
            .expect("nonnegative degrees")
            .truncate(self.degree as i64 - 1)
    }

    /// Whether all coefficients agree with `other` to precision.
    pub fn eq_prec(&self, other: &BivariateSeries) -> bool {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .all(|(a, b)| a.eq_prec(b))
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (usize, usize, FieldElem)> + '_ {
        (0..=self.degree).flat_map(move |t| (0..=t).map(move |j| (t - j, j, self.get(t - j, j))))
    }
}

impl fmt::Display for BivariateSeries {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, j, c) in self.coefficients() {
            if !c.is_exact_zero() {
                writeln!(fm, "{i},{j}:{c}")?;
            }
        }
        writeln!(fm, "O(deg {})", self.degree + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q3() -> Field {
        Field::make(3, 1, &[-1, 1], 1, &[-3, 1], 12).unwrap()
    }

    fn poly(lo: i64, c: &[i64]) -> LaurentSeries {
        LaurentSeries::from_ints(q3(), Window::default(), lo, c).unwrap()
    }

    fn r(n: i64, d: i64) -> FieldElem {
        q3().from_ratio(n, d)
    }

    #[test]
    fn product_of_binomials() {
        let a = poly(1, &[1, 1]);
        let b = poly(1, &[1, -1]);
        let c = a.mul(&b).unwrap();
        assert!(c.assert_agrees(&poly(2, &[1, 0, -1]), 30).is_ok());
        assert!(c.horizon().is_none());
    }

    #[test]
    fn compose_polynomials() {
        let f = poly(2, &[1]);
        let g = poly(1, &[1, 0, 1]);
        let c = f.compose(&g).unwrap();
        assert!(c.horizon().is_none());
        assert!(c.assert_agrees(&poly(2, &[1, 0, 2, 0, 1]), 30).is_ok());
    }

    #[test]
    fn compose_negative_power() {
        let f = poly(-1, &[1]);
        let g = poly(1, &[3, 0, 1]);
        let c = f.compose(&g).unwrap();
        assert!(c.coeff(-1).eq_prec(&r(1, 3)));
        assert!(c.coeff(0).is_zero());
        assert!(c.coeff(1).eq_prec(&r(-1, 9)));
        assert!(c.coeff(3).eq_prec(&r(1, 27)));
        assert_eq!(c.tag(), RingTag::Robba);
    }

    #[test]
    fn compose_needs_vanishing_inner() {
        let f = poly(1, &[1]);
        let g = poly(0, &[1, 1]);
        assert_eq!(f.compose(&g).unwrap_err(), SeriesError::NonComposable);
    }

    #[test]
    fn invert_unit() {
        let f = poly(0, &[3, 0, 1]);
        let g = f.laurent_invert().unwrap();
        assert!(g.coeff(0).eq_prec(&r(1, 3)));
        assert!(g.coeff(1).is_zero());
        assert!(g.coeff(2).eq_prec(&r(-1, 9)));
        let one = f.mul(&g).unwrap();
        let top = one.known_top();
        for k in 1..=top {
            assert!(one.coeff(k).is_zero(), "degree {k}");
        }
    }

    #[test]
    fn invert_apparent_zero_fails() {
        let f = q3();
        let z = FieldElem::zero_mod(f, 3);
        let s = LaurentSeries::new(f, Window::default(), 0, vec![z, f.one()], None).unwrap();
        assert_eq!(
            s.laurent_invert().unwrap_err(),
            SeriesError::ApparentZeroLeadingTerm
        );
    }

    #[test]
    fn integrate() {
        let a = poly(2, &[1]).antiderivative().unwrap();
        assert_eq!(a.low_degree(), Some(3));
        assert!(a.coeff(3).eq_prec(&r(1, 3)));
        assert_eq!(
            poly(-1, &[1]).antiderivative().unwrap_err(),
            SeriesError::ResidueObstruction
        );
        let b = poly(-3, &[2, 0, 0, 0, 5]).antiderivative().unwrap();
        assert!(b.coeff(-2).eq_prec(&r(-1, 1)));
        assert!(b.coeff(2).eq_prec(&r(5, 2)));
        assert!(b
            .derivative()
            .assert_agrees(&poly(-3, &[2, 0, 0, 0, 5]), 8)
            .is_ok());
    }

    #[test]
    fn annulus_inverse() {
        // u^3 + 3u on |u| = 1: u^{-3} (1 + 3u^{-2})^{-1}
        let f = poly(1, &[3, 0, 1]);
        let inv = f.invert_dominant(3, 12).unwrap();
        assert!(inv.coeff(-3).eq_prec(&r(1, 1)));
        assert!(inv.coeff(-5).eq_prec(&r(-3, 1)));
        assert!(inv.coeff(-7).eq_prec(&r(9, 1)));
        assert!(inv.coeff(-4).is_zero());
        let prod = f.mul(&inv).unwrap();
        assert!(prod.coeff(0).eq_prec(&r(1, 1)));
        for k in -30..=-1 {
            assert!(prod.coeff(k).is_zero(), "degree {k}");
        }
    }

    #[test]
    fn reversion_inverts_composition() {
        let f = poly(1, &[1, 1]).truncate(30);
        let h = f.reversion().unwrap();
        let id = h.compose(&f).unwrap();
        assert!(id.coeff(1).eq_prec(&r(1, 1)));
        for k in 2..=id.known_top() {
            assert!(id.coeff(k).is_zero(), "degree {k}");
        }
    }

    #[test]
    fn text_round_trip() {
        let s = poly(-2, &[1, 0, 4, 0, -7]).truncate(5);
        let t = LaurentSeries::parse(q3(), Window::default(), &s.to_string()).unwrap();
        assert_eq!(s.to_string(), t.to_string());
        assert_eq!(t.horizon(), Some(5));
    }

    #[test]
    fn window_underflow() {
        let s = poly(-2, &[1]);
        let e = s.mul(&s).unwrap().mul(&poly(-40, &[1]));
        assert!(matches!(e, Err(SeriesError::WindowUnderflow(_))));
    }

    #[test]
    fn bivariate_square() {
        let f = q3();
        let x = BivariateSeries::var(f, 4, 0);
        let y = BivariateSeries::var(f, 4, 1);
        let s = x.add(&y);
        let sq = s.mul(&s);
        assert!(sq.get(1, 1).eq_prec(&f.from_int(2)));
        assert!(sq.get(2, 0).eq_prec(&f.one()));
        let cube = s.compose_outer(&poly(3, &[1]));
        assert!(cube.get(2, 1).eq_prec(&f.from_int(3)));
    }

    fn arb_poly() -> impl Strategy<Value = LaurentSeries> {
        (-3i64..3, prop::collection::vec(-20i64..20, 1..6)).prop_map(|(lo, c)| poly(lo, &c))
    }

    proptest! {
        #[test]
        fn mul_associative(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            let l = a.mul(&b).unwrap().mul(&c).unwrap();
            let rr = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert!(l.assert_agrees(&rr, 10).is_ok());
        }

        #[test]
        fn leibniz(a in arb_poly(), b in arb_poly()) {
            let lhs = a.mul(&b).unwrap().derivative();
            let rhs = a.derivative().mul(&b).unwrap().add(&a.mul(&b.derivative()).unwrap()).unwrap();
            prop_assert!(lhs.assert_agrees(&rhs, 10).is_ok());
        }
    }
}
