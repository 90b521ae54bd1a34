//! Lubin-Tate formal groups: group law, endomorphisms, logarithm and the
//! comparison isomorphisms between groups sharing a uniformizer.
//!
//! The solvers run with every intermediate value lifted to full internal
//! precision and cap the final coefficients near `N + D` digits.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::padic::{Field, FieldElem, PadicError};
use crate::series::{BivariateSeries, LaurentSeries, SeriesError, Window};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LtError {
    #[error("not a Lubin-Tate series: {0}")]
    NotLubinTateSeries(String),
    #[error("integrality failure: {0}")]
    IntegralityFailure(String),
    #[error("endomorphism parameter is not integral")]
    NotIntegral,
    #[error("groups are over different fields or windows")]
    IncompatibleGroups,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

pub type Result<T> = std::result::Result<T, LtError>;

/// Choice of `[π](X)`.
#[derive(Clone, Debug)]
pub enum PhiChoice {
    /// `πX + X^q`.
    Special,
    Series(LaurentSeries),
}

pub const DEFAULT_DEGREE: usize = 12;

#[derive(Debug)]
pub struct LTGroup {
    field: Field,
    window: Window,
    degree: usize,
    special: bool,
    phi: LaurentSeries,
    group_law: BivariateSeries,
    dmult: LaurentSeries,
    log_series: LaurentSeries,
    q_series: LaurentSeries,
    phi_powers: Arc<Vec<LaurentSeries>>,
    cache: RwLock<HashMap<(Option<i64>, Vec<i128>), LaurentSeries>>,
}

impl Clone for LTGroup {
    fn clone(&self) -> Self {
        let cache = self.cache.read().expect("cache lock").clone();
        LTGroup {
            field: self.field,
            window: self.window,
            degree: self.degree,
            special: self.special,
            phi: self.phi.clone(),
            group_law: self.group_law.clone(),
            dmult: self.dmult.clone(),
            log_series: self.log_series.clone(),
            q_series: self.q_series.clone(),
            phi_powers: Arc::clone(&self.phi_powers),
            cache: RwLock::new(cache),
        }
    }
}

/// `N + D` less the digits the degree-by-degree solvers can lose up to degree `top`.
fn data_precision(field: Field, degree: usize, top: usize) -> i64 {
    field.precision() as i64 + degree as i64 - solver_loss(field, top)
}

fn solver_loss(field: Field, top: usize) -> i64 {
    let q = field.q() as u128;
    let mut loss = 2;
    let mut r = 1u128;
    while r <= top as u128 {
        r *= q;
        loss += 1;
    }
    loss
}

fn lift(x: FieldElem) -> FieldElem {
    x.lift_exact()
}

/// Coefficient list `c[0..=top]` of a power series (degrees below 0 ignored).
fn dense(s: &LaurentSeries, top: i64) -> Vec<FieldElem> {
    let known = s.horizon().unwrap_or(i64::MAX);
    (0..=top)
        .map(|k| {
            if k <= known && k <= s.top() {
                s.coeff(k)
            } else {
                s.field().zero()
            }
        })
        .collect()
}

/// Powers `φ^k`, `0 <= k <= top`, as dense coefficient rows up to degree `top`.
fn power_rows(phi: &[FieldElem], top: usize) -> Vec<Vec<FieldElem>> {
    let field = phi[0].field();
    let mut rows = vec![vec![field.zero(); top + 1]; top + 1];
    rows[0][0] = field.one();
    let nz: Vec<(usize, FieldElem)> = phi
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, c)| !c.is_exact_zero())
        .collect();
    for k in 1..=top {
        // φ^k has no terms below degree k
        for n in k..=top {
            let mut acc = field.zero();
            for &(j, c) in &nz {
                if j > n {
                    break;
                }
                let prev = rows[k - 1][n - j];
                if !prev.is_exact_zero() {
                    acc += c * prev;
                }
            }
            rows[k][n] = lift(acc);
        }
    }
    rows
}

/// Solves `f∘φ_in = φ_out∘f` with `f = a1·X + ...` up to degree `top`.
fn solve_commuting(
    a1: FieldElem,
    inner: &[Vec<FieldElem>],
    outer: &[FieldElem],
    top: usize,
) -> Vec<FieldElem> {
    let field = a1.field();
    let pi = outer[1];
    let out_nz: Vec<(usize, FieldElem)> = outer
        .iter()
        .copied()
        .enumerate()
        .filter(|(j, c)| *j >= 2 && !c.is_exact_zero())
        .collect();
    let jmax = out_nz.last().map_or(1, |t| t.0);
    let mut f = vec![field.zero(); top + 1];
    if top >= 1 {
        f[1] = a1;
    }
    // pw[j][n] = [f^j]_n for 1 <= j <= jmax
    let mut pw = vec![vec![field.zero(); top + 1]; jmax + 1];
    if top >= 1 {
        pw[1][1] = a1;
        let mut a_pow = a1;
        for (j, row) in pw.iter_mut().enumerate().skip(2) {
            a_pow = a_pow * a1;
            if j <= top {
                row[j] = lift(a_pow);
            }
        }
    }
    for n in 2..=top {
        for j in 2..=jmax.min(n) {
            if j == n {
                continue;
            }
            let mut acc = field.zero();
            for k in 1..n {
                let (a, b) = (f[k], pw[j - 1][n - k]);
                if !a.is_exact_zero() && !b.is_exact_zero() {
                    acc += a * b;
                }
            }
            pw[j][n] = lift(acc);
        }
        let mut lhs = field.zero();
        for k in 1..n {
            let (a, b) = (f[k], inner[k][n]);
            if !a.is_exact_zero() && !b.is_exact_zero() {
                lhs += a * b;
            }
        }
        let mut rhs = field.zero();
        for &(j, c) in &out_nz {
            if j > n {
                break;
            }
            let b = pw[j][n];
            if !b.is_exact_zero() {
                rhs += c * b;
            }
        }
        let denom = inner[n][n] - pi;
        let an = lift((rhs - lhs) / denom);
        f[n] = an;
        pw[1][n] = an;
    }
    f
}

impl LTGroup {
    /// Builds the group with `[π] = phi`, bivariate degree `degree`, and series
    /// data known up to `window.hi`.
    pub fn make(field: Field, phi: PhiChoice, degree: usize, window: Window) -> Result<LTGroup> {
        let top = window.hi.max(degree as i64 + 1).max(2) as usize;
        let q = field.q();
        let (phi_series, special) = match phi {
            PhiChoice::Special => {
                let s =
                    LaurentSeries::from_terms(field, window, &[(1, field.pi()), (q, field.one())])?;
                (s, true)
            }
            PhiChoice::Series(s) => {
                let sp =
                    LaurentSeries::from_terms(field, window, &[(1, field.pi()), (q, field.one())])?;
                let special = s.horizon().is_none()
                    && s.assert_agrees(&sp, 0)
                        .map(|d| d == i64::MAX)
                        .unwrap_or(false);
                (s, special)
            }
        };
        Self::check_lt(field, &phi_series)?;
        let phi_c: Vec<FieldElem> = dense(&phi_series, top as i64)
            .into_iter()
            .map(lift)
            .collect();
        let rows = power_rows(&phi_c, top);
        let n_out = data_precision(field, degree, top);

        let group_law = Self::solve_law(field, &phi_c, degree)?;
        let g = Self::solve_dmult(field, &phi_c, &rows, top);
        for (i, c) in g.iter().enumerate().take(degree) {
            if !(*c - group_law.get(i, 1)).cap_abs(n_out).is_zero() {
                return Err(LtError::IntegralityFailure(format!(
                    "g disagrees with dF/dY at degree {i}"
                )));
            }
        }
        let wide = Window {
            lo: window.lo,
            hi: top as i64,
        };
        let dmult = Self::finish_series(field, wide, g, n_out, top, "g")?;
        let recip = dmult.laurent_invert()?;
        let log_series = recip.antiderivative()?;
        let q_series = phi_series.shift(-1)?;
        let rows_series = rows
            .into_iter()
            .map(|r| {
                LaurentSeries::new(field, wide, 0, r, Some(top as i64))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(LTGroup {
            field,
            window,
            degree,
            special,
            phi: phi_series,
            group_law,
            dmult: dmult.with_window(window)?,
            log_series: log_series.with_window(window)?,
            q_series,
            phi_powers: Arc::new(rows_series),
            cache: RwLock::new(HashMap::new()),
        })
    }

    /// The special group over `field` with the default degree and window.
    pub fn special(field: Field) -> Result<LTGroup> {
        Self::make(field, PhiChoice::Special, DEFAULT_DEGREE, Window::default())
    }

    fn check_lt(field: Field, phi: &LaurentSeries) -> Result<()> {
        let bad = |m: &str| Err(LtError::NotLubinTateSeries(m.to_string()));
        if phi.lo() < 0 || phi.low_degree().is_some_and(|k| k < 1) {
            return bad("nonzero terms below degree 1");
        }
        if !(phi.coeff(1) - field.pi()).is_zero() {
            return bad("linear coefficient is not the uniformizer");
        }
        let q = field.q();
        for (k, c) in phi.terms() {
            let target = if k == q { c - field.one() } else { c };
            if target.val_bound() < 1 {
                return bad(&format!(
                    "coefficient of X^{k} violates the reduction X^q mod pi"
                ));
            }
        }
        if phi.known_top() < q {
            return bad("series is not known up to degree q");
        }
        Ok(())
    }

    fn solve_law(field: Field, phi: &[FieldElem], d: usize) -> Result<BivariateSeries> {
        let pi = field.pi();
        let phi_s = {
            let terms: Vec<(i64, FieldElem)> = phi
                .iter()
                .enumerate()
                .take(d + 1)
                .map(|(k, c)| (k as i64, *c))
                .collect();
            LaurentSeries::from_terms(field, Window::new(0, d as i64), &terms)?
        };
        let px = BivariateSeries::from_univariate(&phi_s, d, 0);
        let py = BivariateSeries::from_univariate(&phi_s, d, 1);
        let mut f = BivariateSeries::var(field, d, 0).add(&BivariateSeries::var(field, d, 1));
        for r in 2..=d {
            let lhs = f.compose_outer(&phi_s);
            let rhs = f.substitute(&px, &py);
            let denom = pi.pow(r as i64) - pi;
            for (i, j, c) in lhs.sub(&rhs).homogeneous(r) {
                let corr = lift(c / denom);
                f.set(i, j, lift(f.get(i, j) + corr));
            }
        }
        let n_out = data_precision(field, d, d);
        let mut out = BivariateSeries::zero(field, d);
        for (i, j, c) in f.coefficients() {
            let c = c.cap_abs(n_out);
            if c.val_bound() < 0 {
                return Err(LtError::IntegralityFailure(format!(
                    "group law coefficient X^{i}Y^{j}"
                )));
            }
            out.set(i, j, c);
        }
        Ok(out)
    }

    /// `g` from `g·φ' = π·g∘φ`, `g(0) = 1`.
    fn solve_dmult(
        field: Field,
        phi: &[FieldElem],
        rows: &[Vec<FieldElem>],
        top: usize,
    ) -> Vec<FieldElem> {
        let pi = field.pi();
        let dphi: Vec<FieldElem> = (0..=top)
            .map(|k| {
                if k < top {
                    phi[k + 1] * field.from_int(k as i64 + 1)
                } else {
                    field.zero()
                }
            })
            .collect();
        let mut b = vec![field.zero(); top + 1];
        b[0] = field.one();
        for k in 1..=top {
            let mut comp = field.zero();
            let mut prod = field.zero();
            for j in 0..k {
                if b[j].is_exact_zero() {
                    continue;
                }
                if !rows[j][k].is_exact_zero() {
                    comp += b[j] * rows[j][k];
                }
                if !dphi[k - j].is_exact_zero() {
                    prod += b[j] * dphi[k - j];
                }
            }
            let denom = pi - pi.pow(k as i64 + 1);
            b[k] = lift((pi * comp - prod) / denom);
        }
        b
    }

    fn finish_series(
        field: Field,
        window: Window,
        c: Vec<FieldElem>,
        n_out: i64,
        top: usize,
        what: &str,
    ) -> Result<LaurentSeries> {
        let c: Vec<FieldElem> = c
            .into_iter()
            .map(|x| if x.is_exact_zero() { x } else { x.cap_abs(n_out) })
            .collect();
        if let Some(k) = c.iter().position(|x| x.val_bound() < 0) {
            return Err(LtError::IntegralityFailure(format!(
                "{what}: coefficient of degree {k}"
            )));
        }
        Ok(LaurentSeries::new(field, window, 0, c, Some(top as i64))?)
    }

    pub fn field(&self) -> Field {
        self.field
    }
    pub fn window(&self) -> Window {
        self.window
    }
    pub fn degree(&self) -> usize {
        self.degree
    }
    /// Whether `[π] = πX + X^q`.
    pub fn is_special(&self) -> bool {
        self.special
    }
    /// `[π](X)`.
    pub fn phi(&self) -> &LaurentSeries {
        &self.phi
    }
    /// `F(X, Y)` modulo total degree `D + 1`.
    pub fn group_law(&self) -> &BivariateSeries {
        &self.group_law
    }
    /// `t_F = log_F(u)`.
    pub fn logarithm(&self) -> &LaurentSeries {
        &self.log_series
    }
    /// `Q = [π](u)/u`.
    pub fn q_series(&self) -> &LaurentSeries {
        &self.q_series
    }
    /// `g = ∂F/∂Y(u, 0)`.
    pub fn dmult(&self) -> &LaurentSeries {
        &self.dmult
    }
    /// Absolute digits carried by the group data.
    pub fn data_precision(&self) -> i64 {
        data_precision(self.field, self.degree, self.window.hi.max(2) as usize)
    }

    /// `[a](X)` for integral `a`, memoized.
    pub fn mult_by(&self, a: FieldElem) -> Result<LaurentSeries> {
        if !a.is_exact_zero() && a.val_bound() < 0 {
            return Err(LtError::NotIntegral);
        }
        let full = self.field.precision() as i64 + self.degree as i64;
        let a = a.cap_abs(full);
        let loss = solver_loss(self.field, self.window.hi.max(2) as usize);
        let out_prec = a.abs_precision().map_or(self.data_precision(), |p| {
            (p - loss).min(self.data_precision())
        });
        let a = a.lift_exact();
        let key = (a.valuation().ok().flatten(), {
            let mut d = a.unit_digits();
            d.push(out_prec as i128);
            d
        });
        if let Some(s) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let s = if a.is_zero() {
            LaurentSeries::zero(self.field, self.window).truncate(self.window.hi)
        } else {
            let top = self.window.hi as usize;
            let inner: Vec<Vec<FieldElem>> = self
                .phi_powers
                .iter()
                .map(|r| dense(r, top as i64))
                .collect();
            let outer: Vec<FieldElem> =
                dense(&self.phi, top as i64).into_iter().map(lift).collect();
            let c = solve_commuting(a, &inner, &outer, top);
            Self::finish_series(self.field, self.window, c, out_prec, top, "[a]")?
        };
        let mut w = self.cache.write().expect("cache lock");
        Ok(w.entry(key).or_insert(s).clone())
    }

    /// `f∘[π]` for a power series `f`, via the cached powers of `[π]`.
    pub fn compose_phi_plus(&self, f: &LaurentSeries) -> Result<LaurentSeries> {
        let top = f.known_top().min(self.window.hi);
        let mut coeffs = vec![self.field.zero(); (top + 1).max(0) as usize];
        for (k, c) in f.terms() {
            if k < 0 {
                return Err(SeriesError::NonComposable.into());
            }
            if k > top {
                break;
            }
            let row = &self.phi_powers[k as usize];
            for n in k..=top {
                let r = row.coeff(n);
                if !r.is_exact_zero() {
                    coeffs[n as usize] += c * r;
                }
            }
        }
        let h = match f.horizon() {
            // degree ≥ h+1 terms of f contribute from degree h+1 on
            Some(h) => Some(h.min(top)),
            None if f.top() <= top && f.top() * self.field.q() <= self.window.hi => None,
            None => Some(top),
        };
        Ok(LaurentSeries::new(self.field, self.window, 0, coeffs, h)?.with_tag(f.tag()))
    }

    /// `F(x, y)` for power series without constant term, up to degree `D`.
    pub fn eval_law(&self, x: &LaurentSeries, y: &LaurentSeries) -> Result<LaurentSeries> {
        let d = self.degree;
        let bx = BivariateSeries::from_univariate(x, d, 0);
        let by = BivariateSeries::from_univariate(y, d, 0);
        let r = self.group_law.substitute(&bx, &by);
        let terms: Vec<(i64, FieldElem)> = (0..=d).map(|i| (i as i64, r.get(i, 0))).collect();
        Ok(LaurentSeries::from_terms(self.field, self.window, &terms)?.truncate(d as i64))
    }

    /// The isomorphism `h` with `h∘[π]_self = [π]_other∘h`, `h = X + ...`.
    pub fn eta_iso(&self, other: &LTGroup) -> Result<LaurentSeries> {
        if self.field != other.field || self.window != other.window {
            return Err(LtError::IncompatibleGroups);
        }
        let top = self.window.hi as usize;
        let inner: Vec<Vec<FieldElem>> = self
            .phi_powers
            .iter()
            .map(|r| dense(r, top as i64))
            .collect();
        let outer: Vec<FieldElem> = dense(&other.phi, top as i64)
            .into_iter()
            .map(lift)
            .collect();
        let c = solve_commuting(self.field.one(), &inner, &outer, top);
        Self::finish_series(
            self.field,
            self.window,
            c,
            self.data_precision(),
            top,
            "eta",
        )
    }

    /// Checks `t_F ≡ u·∏_{n<n_max} φ_q^n(Q/Q(0))` modulo `π^{min(prec, n_max)}`.
    ///
    /// The ratio is compared in degrees below `q^{n_max}` (and inside the
    /// window) for as long as its coefficients are known to the target
    /// precision.
    pub fn t_factorization_check(&self, n_max: u32, prec: u32) -> Result<bool> {
        self.t_factorization_with(&self.log_series, n_max, prec)
    }

    /// As [`Self::t_factorization_check`] against a caller-supplied `t`.
    pub fn t_factorization_with(&self, t: &LaurentSeries, n_max: u32, prec: u32) -> Result<bool> {
        let product = self.t_product(n_max)?;
        let ratio = t.shift(-1)?.mul(&product.shift(-1)?.laurent_invert()?)?;
        let target = prec.min(n_max) as i64;
        let q = self.field.q();
        let span = (0..n_max).try_fold(1i64, |acc, _| acc.checked_mul(q)).unwrap_or(i64::MAX);
        let top = ratio.known_top().min(span - 1);
        for k in 0..=top {
            let c = if k == 0 { ratio.coeff(0) - self.field.one() } else { ratio.coeff(k) };
            if !c.is_zero() && c.val_bound() < target {
                return Ok(false);
            }
            if c.is_zero() && c.val_bound() < target {
                break;
            }
        }
        Ok(true)
    }

    /// `u·∏_{n<n_max} φ_q^n(Q/Q(0))` evaluated factor by factor.
    pub fn t_product(&self, n_max: u32) -> Result<LaurentSeries> {
        let q0inv = self.q_series.coeff(0).inv()?;
        let mut factor = self.q_series.scale(q0inv).truncate(self.window.hi);
        let mut prod = LaurentSeries::u(self.field, self.window);
        for n in 0..n_max {
            if n > 0 {
                factor = self.compose_phi_plus(&factor)?;
            }
            prod = prod.mul(&factor)?;
        }
        Ok(prod)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q3() -> Field {
        Field::make(3, 1, &[-1, 1], 1, &[-3, 1], 12).unwrap()
    }

    fn small(field: Field) -> LTGroup {
        LTGroup::make(field, PhiChoice::Special, 6, Window::new(-20, 30)).unwrap()
    }

    #[test]
    fn special_law_cubic_term() {
        let g = LTGroup::make(q3(), PhiChoice::Special, 3, Window::new(-20, 20)).unwrap();
        let c = g.group_law().get(2, 1);
        assert_eq!(c.to_int_mod(3), Some(17));
        assert!(c.eq_prec(&q3().from_ratio(1, 8)));
        assert!(g.group_law().get(1, 2).eq_prec(&q3().from_ratio(1, 8)));
        assert!(g.group_law().get(2, 0).is_zero());
    }

    #[test]
    fn unit_law_and_symmetry() {
        let g = small(q3());
        let f = g.group_law();
        assert!(f.get(1, 0).eq_prec(&q3().one()));
        for i in 2..=6 {
            assert!(f.get(i, 0).is_zero());
            assert!(f.get(0, i).is_zero());
        }
        for (i, j, c) in f.coefficients() {
            assert!(c.eq_prec(&f.get(j, i)), "X^{i}Y^{j}");
        }
    }

    #[test]
    fn log_coefficient() {
        let g = small(q3());
        let t = g.logarithm();
        assert!(t.coeff(1).eq_prec(&q3().one()));
        let c = t.coeff(3);
        assert!(c.eq_prec(&q3().from_ratio(-1, 24)));
        assert_eq!(c.valuation().unwrap(), Some(-1));
    }

    #[test]
    fn teichmuller_endomorphism_is_linear() {
        let f = q3();
        let g = small(f);
        let xi = f.teichmuller(&[2]).unwrap();
        let s = g.mult_by(xi).unwrap();
        assert!(s.coeff(1).eq_prec(&xi));
        for k in 2..=s.known_top() {
            assert!(s.coeff(k).is_zero(), "degree {k}");
        }
    }

    #[test]
    fn mult_by_pi_and_one() {
        let f = q3();
        let g = small(f);
        let p = g.mult_by(f.pi()).unwrap();
        assert!(p.assert_agrees(g.phi(), g.data_precision()).is_ok());
        let one = g.mult_by(f.one()).unwrap();
        assert!(one
            .assert_agrees(&LaurentSeries::u(f, g.window()), g.data_precision())
            .is_ok());
        assert_eq!(
            g.mult_by(f.from_ratio(1, 3)).unwrap_err(),
            LtError::NotIntegral
        );
    }

    #[test]
    fn rejects_non_lt_series() {
        let f = q3();
        let w = Window::new(-10, 10);
        let bad = LaurentSeries::from_ints(f, w, 1, &[3, 1]).unwrap();
        assert!(matches!(
            LTGroup::make(f, PhiChoice::Series(bad), 4, w),
            Err(LtError::NotLubinTateSeries(_))
        ));
        let bad = LaurentSeries::from_ints(f, w, 1, &[1, 0, 1]).unwrap();
        assert!(matches!(
            LTGroup::make(f, PhiChoice::Series(bad), 4, w),
            Err(LtError::NotLubinTateSeries(_))
        ));
    }

    #[test]
    fn eta_self_is_identity() {
        let f = q3();
        let g = small(f);
        let h = g.eta_iso(&g).unwrap();
        assert!(h
            .assert_agrees(&LaurentSeries::u(f, g.window()), g.data_precision())
            .is_ok());
    }

    #[test]
    fn q_series_shape() {
        let f = q3();
        let g = small(f);
        assert!(g.q_series().coeff(0).eq_prec(&f.pi()));
        assert!(g.q_series().coeff(2).eq_prec(&f.one()));
    }
}
