//! Arithmetic in a finite extension `F / Q_p` at finite `π`-adic precision.
//!
//! The ring of integers is modelled as `O_F = W[y] / (E(y))` with
//! `W = (Z / p^k)[x] / (m(x))`; `y` is the uniformizer `π`.  Elements of `F`
//! are stored as a valuation, a unit part and a relative precision.

use std::fmt;
use std::sync::Mutex;

use rand::Rng;
use thiserror::Error;

/// Largest supported value of `e * f`.
pub const MAX_DEG: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PadicError {
    #[error("m(x) is reducible modulo p")]
    NonIrreducible,
    #[error("E(y) is not Eisenstein")]
    NotEisenstein,
    #[error("{0} is not prime")]
    NonPrime(i64),
    #[error("division by an element that is zero to working precision")]
    DivisionByZero,
    #[error("precision underflow: have {got} digits, floor is {floor}")]
    PrecisionUnderflow { got: i64, floor: i64 },
    #[error("element is zero modulo pi^{0}; valuation not certified")]
    ApparentZero(i64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, PadicError>;

/// Immutable data describing a field; shared through [`Field`] handles.
#[derive(Debug)]
pub struct FieldData {
    p: i64,
    f: usize,
    e: usize,
    m: Vec<i64>,
    ecoef: Vec<i64>,
    precision: u32,
    kw: u32,
    modulus: i128,
    ppow: Vec<i128>,
    pi_raw: [i128; MAX_DEG],
    p_over_pi: [i128; MAX_DEG],
    cap: u32,
}

/// Handle to an interned [`FieldData`].  Cheap to copy; equality is identity.
#[derive(Clone, Copy)]
pub struct Field(&'static FieldData);

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.0, other.0)
    }
}
impl Eq for Field {}

impl fmt::Debug for Field {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            fm,
            "Field(p={}, f={}, e={}, N={})",
            self.0.p, self.0.f, self.0.e, self.0.precision
        )
    }
}

static REGISTRY: Mutex<Vec<&'static FieldData>> = Mutex::new(Vec::new());

fn is_prime(n: i64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn rem(a: i128, m: i128) -> i128 {
    let r = a % m;
    if r < 0 {
        r + m
    } else {
        r
    }
}

fn inv_mod(a: i128, m: i128) -> Option<i128> {
    let (mut r0, mut r1) = (rem(a, m), m);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let qt = r0 / r1;
        (r0, r1) = (r1, r0 - qt * r1);
        (s0, s1) = (s1, s0 - qt * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(rem(s0, m))
}

fn vp_int(mut n: i128, p: i128) -> u32 {
    if n == 0 {
        return u32::MAX;
    }
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// Polynomial remainder over `F_p`; inputs ascending degree, divisor monic.
fn poly_rem_mod_p(a: &[i64], b: &[i64], p: i64) -> Vec<i64> {
    let mut r: Vec<i64> = a.iter().map(|c| c.rem_euclid(p)).collect();
    let db = b.len() - 1;
    while r.len() > db {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - db;
        for (k, bc) in b.iter().enumerate() {
            r[shift + k] = (r[shift + k] - lead * bc).rem_euclid(p);
        }
        r.pop();
    }
    r
}

fn irreducible_mod_p(m: &[i64], p: i64) -> bool {
    let deg = m.len() - 1;
    for k in 1..=deg / 2 {
        let count = (p as u64).pow(k as u32);
        for idx in 0..count {
            let mut cand = vec![0i64; k + 1];
            let mut t = idx;
            for c in cand.iter_mut().take(k) {
                *c = (t % p as u64) as i64;
                t /= p as u64;
            }
            cand[k] = 1;
            if poly_rem_mod_p(m, &cand, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

impl Field {
    /// Builds (or retrieves) the field with the given defining data.
    ///
    /// `m_coeffs` and `e_coeffs` are ascending-degree integer coefficient lists
    /// of the monic polynomials `m(x)` (degree `f`) and `E(y)` (degree `e`).
    pub fn make(
        p: i64,
        f: usize,
        m_coeffs: &[i64],
        e: usize,
        e_coeffs: &[i64],
        precision: u32,
    ) -> Result<Field> {
        if !is_prime(p) {
            return Err(PadicError::NonPrime(p));
        }
        if f == 0 || e == 0 || e * f > MAX_DEG {
            return Err(PadicError::Config(format!(
                "unsupported degrees e={e}, f={f}"
            )));
        }
        if m_coeffs.len() != f + 1 || m_coeffs[f] != 1 {
            return Err(PadicError::Config(
                "m_coeffs must describe a monic polynomial of degree f".into(),
            ));
        }
        if !irreducible_mod_p(m_coeffs, p) {
            return Err(PadicError::NonIrreducible);
        }
        if e_coeffs.len() != e + 1 || e_coeffs[e] != 1 {
            return Err(PadicError::NotEisenstein);
        }
        let pp = p as i128;
        if e_coeffs[..e].iter().any(|&c| (c as i128) % pp != 0)
            || (e_coeffs[0] as i128) % (pp * pp) == 0
        {
            return Err(PadicError::NotEisenstein);
        }
        let mut kw = 0u32;
        let mut modulus: i128 = 1;
        while modulus * pp < (1i128 << 62) {
            modulus *= pp;
            kw += 1;
        }
        let cap = (e as u32) * (kw - 2);
        if precision == 0 || precision > cap / 2 {
            return Err(PadicError::Config(format!(
                "precision {precision} outside 1..={}",
                cap / 2
            )));
        }
        let mut reg = REGISTRY.lock().expect("field registry poisoned");
        for d in reg.iter() {
            if d.p == p
                && d.f == f
                && d.e == e
                && d.m == m_coeffs
                && d.ecoef == e_coeffs
                && d.precision == precision
            {
                return Ok(Field(d));
            }
        }
        let mut ppow = vec![1i128];
        for _ in 0..kw {
            ppow.push(ppow.last().unwrap() * pp);
        }
        let mut pi_raw = [0i128; MAX_DEG];
        if e == 1 {
            pi_raw[0] = rem(-(e_coeffs[0] as i128), modulus);
        } else {
            pi_raw[f] = 1;
        }
        // p / pi = -(p / E_0) * (y^{e-1} + sum_{j>=1} E_j y^{j-1})
        let e0_unit = (e_coeffs[0] as i128) / pp;
        let inv = inv_mod(e0_unit, modulus).expect("E_0 / p is a unit");
        let scale = rem(-inv, modulus);
        let mut p_over_pi = [0i128; MAX_DEG];
        p_over_pi[(e - 1) * f] = scale;
        for j in 1..e {
            p_over_pi[(j - 1) * f] = rem(
                p_over_pi[(j - 1) * f] + scale * rem(e_coeffs[j] as i128, modulus),
                modulus,
            );
        }
        let data = FieldData {
            p,
            f,
            e,
            m: m_coeffs.to_vec(),
            ecoef: e_coeffs.to_vec(),
            precision,
            kw,
            modulus,
            ppow,
            pi_raw,
            p_over_pi,
            cap,
        };
        let leaked: &'static FieldData = Box::leak(Box::new(data));
        reg.push(leaked);
        Ok(Field(leaked))
    }

    /// Parses a text config block with keys `p`, `f`, `e`, `m_coeffs`, `E_coeffs`, `precision`.
    pub fn from_config(text: &str) -> Result<Field> {
        let mut p = None;
        let mut f = 1usize;
        let mut e = 1usize;
        let mut m: Option<Vec<i64>> = None;
        let mut ec: Option<Vec<i64>> = None;
        let mut precision = 12u32;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| PadicError::Config(format!("malformed line `{line}`")))?;
            let value = value.trim();
            let int = |v: &str| {
                v.parse::<i64>()
                    .map_err(|_| PadicError::Config(format!("bad integer `{v}`")))
            };
            let list = |v: &str| -> Result<Vec<i64>> {
                v.trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(int)
                    .collect()
            };
            match key.trim() {
                "p" => p = Some(int(value)?),
                "f" => f = int(value)? as usize,
                "e" => e = int(value)? as usize,
                "m_coeffs" => m = Some(list(value)?),
                "E_coeffs" => ec = Some(list(value)?),
                "precision" => precision = int(value)? as u32,
                other => return Err(PadicError::Config(format!("unknown key `{other}`"))),
            }
        }
        let p = p.ok_or_else(|| PadicError::Config("missing key `p`".into()))?;
        let m = m.unwrap_or_else(|| {
            let mut v = vec![0; f + 1];
            v[f] = 1;
            v
        });
        let ec = ec.unwrap_or_else(|| {
            let mut v = vec![0; e + 1];
            v[0] = -p;
            v[e] = 1;
            v
        });
        Field::make(p, f, &m, e, &ec, precision)
    }

    /// Text config block accepted by [`Field::from_config`].
    pub fn to_config(&self) -> String {
        let join = |v: &[i64]| {
            v.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "p = {}\nf = {}\ne = {}\nm_coeffs = [{}]\nE_coeffs = [{}]\nprecision = {}\n",
            self.0.p,
            self.0.f,
            self.0.e,
            join(&self.0.m),
            join(&self.0.ecoef),
            self.0.precision
        )
    }

    /// Same field with a different default precision.
    pub fn with_precision(&self, precision: u32) -> Result<Field> {
        Field::make(
            self.0.p,
            self.0.f,
            &self.0.m,
            self.0.e,
            &self.0.ecoef,
            precision,
        )
    }

    pub fn p(&self) -> i64 {
        self.0.p
    }
    pub fn f(&self) -> usize {
        self.0.f
    }
    pub fn e(&self) -> usize {
        self.0.e
    }
    /// Cardinality of the residue field.
    pub fn q(&self) -> i64 {
        self.0.p.pow(self.0.f as u32)
    }
    /// Degree `[F : Q_p]`, which is also `v_π(q)`.
    pub fn d(&self) -> i64 {
        (self.0.e * self.0.f) as i64
    }
    pub fn m_coeffs(&self) -> &[i64] {
        &self.0.m
    }
    pub fn e_coeffs(&self) -> &[i64] {
        &self.0.ecoef
    }
    /// Default relative precision of computations.
    pub fn precision(&self) -> u32 {
        self.0.precision
    }
    /// Relative precision carried by exact constants.
    pub fn cap(&self) -> u32 {
        self.0.cap
    }
    fn n(&self) -> usize {
        self.0.e * self.0.f
    }
    fn modulus(&self) -> i128 {
        self.0.modulus
    }

    // ----- raw ring arithmetic modulo p^kw -----

    fn wmul(&self, a: &[i128], b: &[i128], out: &mut [i128]) {
        let f = self.0.f;
        let md = self.modulus();
        let mut tmp = [0i128; 2 * MAX_DEG];
        for i in 0..f {
            if a[i] == 0 {
                continue;
            }
            for j in 0..f {
                if b[j] != 0 {
                    tmp[i + j] = (tmp[i + j] + a[i] * b[j] % md) % md;
                }
            }
        }
        for k in (f..2 * f - 1).rev() {
            let lead = tmp[k];
            if lead != 0 {
                for i in 0..f {
                    let c = self.0.m[i] as i128;
                    if c != 0 {
                        tmp[k - f + i] = rem(tmp[k - f + i] - lead * rem(c, md) % md, md);
                    }
                }
            }
            tmp[k] = 0;
        }
        out[..f].copy_from_slice(&tmp[..f]);
    }

    fn raw_mul(&self, a: &[i128; MAX_DEG], b: &[i128; MAX_DEG]) -> [i128; MAX_DEG] {
        let (e, f) = (self.0.e, self.0.f);
        let md = self.modulus();
        if e == 1 && f == 1 {
            let mut r = [0i128; MAX_DEG];
            r[0] = a[0] * b[0] % md;
            return r;
        }
        let mut tmp = [[0i128; MAX_DEG]; 2 * MAX_DEG];
        let mut w = [0i128; MAX_DEG];
        for i in 0..e {
            if a[i * f..(i + 1) * f].iter().all(|&c| c == 0) {
                continue;
            }
            for j in 0..e {
                if b[j * f..(j + 1) * f].iter().all(|&c| c == 0) {
                    continue;
                }
                self.wmul(&a[i * f..(i + 1) * f], &b[j * f..(j + 1) * f], &mut w);
                for k in 0..f {
                    tmp[i + j][k] = (tmp[i + j][k] + w[k]) % md;
                }
            }
        }
        for k in (e..2 * e - 1).rev() {
            let lead = tmp[k];
            for j in 0..e {
                let c = rem(self.0.ecoef[j] as i128, md);
                if c != 0 {
                    for t in 0..f {
                        tmp[k - e + j][t] = rem(tmp[k - e + j][t] - lead[t] * c % md, md);
                    }
                }
            }
        }
        let mut r = [0i128; MAX_DEG];
        for j in 0..e {
            r[j * f..(j + 1) * f].copy_from_slice(&tmp[j][..f]);
        }
        r
    }

    fn raw_add(&self, a: &[i128; MAX_DEG], b: &[i128; MAX_DEG]) -> [i128; MAX_DEG] {
        let md = self.modulus();
        let mut r = [0i128; MAX_DEG];
        for k in 0..self.n() {
            r[k] = (a[k] + b[k]) % md;
        }
        r
    }

    fn raw_neg(&self, a: &[i128; MAX_DEG]) -> [i128; MAX_DEG] {
        let md = self.modulus();
        let mut r = [0i128; MAX_DEG];
        for k in 0..self.n() {
            r[k] = rem(-a[k], md);
        }
        r
    }

    fn raw_int(&self, c: i128) -> [i128; MAX_DEG] {
        let mut r = [0i128; MAX_DEG];
        r[0] = rem(c, self.modulus());
        r
    }

    fn raw_pi_pow(&self, k: u32) -> [i128; MAX_DEG] {
        let mut r = self.raw_int(1);
        let mut b = self.0.pi_raw;
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                r = self.raw_mul(&r, &b);
            }
            b = self.raw_mul(&b, &b);
            k >>= 1;
        }
        r
    }

    /// π-adic valuation of a raw element, capped at `e * kw`.
    fn raw_val(&self, a: &[i128; MAX_DEG]) -> i64 {
        let (e, f) = (self.0.e, self.0.f);
        let pp = self.0.p as i128;
        let mut best = (e as i64) * self.0.kw as i64;
        for j in 0..e {
            let mut vj = u32::MAX;
            for i in 0..f {
                vj = vj.min(vp_int(a[j * f + i], pp));
            }
            if vj != u32::MAX {
                best = best.min(e as i64 * vj as i64 + j as i64);
            }
        }
        best
    }

    /// Divides by π an element of positive valuation.
    fn raw_div_pi(&self, a: &[i128; MAX_DEG]) -> [i128; MAX_DEG] {
        let (e, f) = (self.0.e, self.0.f);
        let pp = self.0.p as i128;
        let mut c0 = [0i128; MAX_DEG];
        for i in 0..f {
            debug_assert_eq!(a[i] % pp, 0);
            c0[i] = a[i] / pp;
        }
        let mut r = self.raw_mul(&c0, &self.0.p_over_pi);
        for j in 1..e {
            for i in 0..f {
                r[(j - 1) * f + i] = (r[(j - 1) * f + i] + a[j * f + i]) % self.modulus();
            }
        }
        r
    }

    /// Canonical representative modulo π^n.
    fn raw_reduce(&self, a: &[i128; MAX_DEG], n: i64) -> [i128; MAX_DEG] {
        let (e, f) = (self.0.e, self.0.f);
        let mut r = [0i128; MAX_DEG];
        for j in 0..e {
            let need = n - j as i64;
            if need <= 0 {
                continue;
            }
            let k = ((need + e as i64 - 1) / e as i64).min(self.0.kw as i64) as usize;
            let md = self.0.ppow[k];
            for i in 0..f {
                r[j * f + i] = rem(a[j * f + i], md);
            }
        }
        r
    }

    fn raw_pow(&self, a: &[i128; MAX_DEG], mut k: u64) -> [i128; MAX_DEG] {
        let mut r = self.raw_int(1);
        let mut b = *a;
        while k > 0 {
            if k & 1 == 1 {
                r = self.raw_mul(&r, &b);
            }
            b = self.raw_mul(&b, &b);
            k >>= 1;
        }
        r
    }

    /// Inverse of a unit modulo π^n via Newton iteration.
    fn raw_unit_inv(&self, a: &[i128; MAX_DEG], n: i64) -> [i128; MAX_DEG] {
        let mut x = self.raw_reduce(&self.raw_pow(a, (self.q() - 2) as u64), 1);
        let two = self.raw_int(2);
        let mut prec = 1i64;
        while prec < n {
            let ax = self.raw_mul(a, &x);
            x = self.raw_mul(&x, &self.raw_add(&two, &self.raw_neg(&ax)));
            prec *= 2;
        }
        self.raw_reduce(&x, n)
    }

    fn make_elem(&self, raw: &[i128; MAX_DEG], abs: i64, shift: i64) -> FieldElem {
        // raw * π^shift, known modulo π^abs (absolute, after shifting)
        let width = abs - shift;
        if width <= 0 {
            return FieldElem::apparent(*self, abs);
        }
        let red = self.raw_reduce(raw, width);
        let t = self.raw_val(&red);
        if t >= width {
            return FieldElem::apparent(*self, abs);
        }
        let mut u = red;
        for _ in 0..t {
            u = self.raw_div_pi(&u);
        }
        let nrel = (width - t).min(self.0.cap as i64);
        FieldElem {
            field: *self,
            state: State::Nonzero {
                v: shift + t,
                nrel: nrel as u32,
            },
            unit: self.raw_reduce(&u, nrel),
        }
    }

    // ----- constructors -----

    pub fn zero(&self) -> FieldElem {
        FieldElem {
            field: *self,
            state: State::Zero,
            unit: [0; MAX_DEG],
        }
    }

    pub fn one(&self) -> FieldElem {
        self.from_int(1)
    }

    /// Exact integer, carried at the constant precision [`Field::cap`].
    pub fn from_int(&self, n: i64) -> FieldElem {
        if n == 0 {
            return self.zero();
        }
        let mut m = n as i128;
        let pp = self.0.p as i128;
        let mut s = 0i64;
        while m % pp == 0 {
            m /= pp;
            s += 1;
        }
        let unit = self.make_elem(&self.raw_int(m), self.0.cap as i64, 0);
        if s == 0 {
            unit
        } else {
            unit * self.p_elem().pow(s)
        }
    }

    fn p_elem(&self) -> FieldElem {
        let raw = self.raw_int(self.0.p as i128);
        let e = self.0.e as i64;
        self.make_elem(&raw, e + self.0.cap as i64, 0)
    }

    /// Exact rational `n / d`.
    pub fn from_ratio(&self, n: i64, d: i64) -> FieldElem {
        assert!(d != 0, "zero denominator");
        self.from_int(n) * self.from_int(d).inv().expect("nonzero integer")
    }

    /// The uniformizer π.
    pub fn pi(&self) -> FieldElem {
        FieldElem {
            field: *self,
            state: State::Nonzero {
                v: 1,
                nrel: self.0.cap,
            },
            unit: self.raw_int(1),
        }
    }

    /// `π^k` for any integer `k`.
    pub fn pi_pow(&self, k: i64) -> FieldElem {
        FieldElem {
            field: *self,
            state: State::Nonzero {
                v: k,
                nrel: self.0.cap,
            },
            unit: self.raw_int(1),
        }
    }

    /// The generator `x` of the unramified subring (equal to 0 when `f = 1` and `m = x`).
    pub fn gen_x(&self) -> FieldElem {
        let mut raw = [0i128; MAX_DEG];
        if self.0.f > 1 {
            raw[1] = 1;
        } else {
            raw[0] = rem(-(self.0.m[0] as i128), self.modulus());
        }
        self.make_elem(&raw, self.0.cap as i64, 0)
    }

    /// Element from a polynomial in `x` (ascending coefficients), exact.
    pub fn from_x_poly(&self, coeffs: &[i64]) -> FieldElem {
        let mut acc = self.zero();
        let mut xp = self.one();
        let x = self.gen_x();
        for &c in coeffs {
            acc = acc + self.from_int(c) * xp;
            xp = xp * x;
        }
        acc
    }

    /// Element from canonical digits `c[j*f + i]` of `x^i y^j`, with given valuation offset and absolute precision.
    pub fn from_digits(&self, digits: &[i128], v: i64, abs: i64) -> FieldElem {
        let mut raw = [0i128; MAX_DEG];
        for (k, d) in digits.iter().enumerate().take(self.n()) {
            raw[k] = rem(*d, self.modulus());
        }
        self.make_elem(&raw, abs, v)
    }

    /// Teichmüller lift of the residue class `c(x) mod π` (ascending `x`-coefficients).
    pub fn teichmuller(&self, residue: &[i64]) -> Result<FieldElem> {
        let mut raw = [0i128; MAX_DEG];
        for (i, &c) in residue.iter().enumerate().take(self.0.f) {
            raw[i] = rem(c as i128, self.0.p as i128);
        }
        let lifted = raw;
        if self.raw_val(&self.raw_reduce(&lifted, 1)) >= 1 {
            return Err(PadicError::DivisionByZero);
        }
        let cap = self.0.cap as i64;
        let mut a = self.raw_reduce(&lifted, cap);
        loop {
            let next = self.raw_reduce(&self.raw_pow(&a, self.q() as u64), cap);
            if next == a {
                break;
            }
            a = next;
        }
        Ok(self.make_elem(&a, cap, 0))
    }

    /// Nonzero residue classes, as ascending `x`-coefficient lists, in lexicographic order.
    pub fn residues(&self) -> Vec<Vec<i64>> {
        let f = self.0.f;
        let p = self.0.p;
        let mut out = Vec::new();
        for idx in 1..self.q() {
            let mut v = vec![0i64; f];
            let mut t = idx;
            for c in v.iter_mut() {
                *c = t % p;
                t /= p;
            }
            out.push(v);
        }
        out
    }

    /// A Teichmüller generator of `μ_{q-1}`.
    pub fn teichmuller_generator(&self) -> FieldElem {
        let q1 = self.q() - 1;
        let mut primes = Vec::new();
        let mut t = q1;
        let mut d = 2;
        while d * d <= t {
            if t % d == 0 {
                primes.push(d);
                while t % d == 0 {
                    t /= d;
                }
            }
            d += 1;
        }
        if t > 1 {
            primes.push(t);
        }
        for r in self.residues() {
            let xi = self.teichmuller(&r).expect("nonzero residue");
            if primes.iter().all(|&l| !xi.pow(q1 / l).eq_prec(&self.one())) {
                return xi;
            }
        }
        unreachable!("F_q^x is cyclic")
    }

    /// All `q - 1` Teichmüller representatives.
    pub fn teichmuller_all(&self) -> Vec<FieldElem> {
        self.residues()
            .iter()
            .map(|r| self.teichmuller(r).expect("nonzero"))
            .collect()
    }

    /// Random element with valuation in `[vmin, vmax]` (or zero) and relative precision `nrel`.
    pub fn random<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        vmin: i64,
        vmax: i64,
        nrel: u32,
    ) -> FieldElem {
        let mut raw = [0i128; MAX_DEG];
        for c in raw.iter_mut().take(self.n()) {
            *c = rng.gen_range(0..self.modulus());
        }
        let v = rng.gen_range(vmin..=vmax);
        let red = self.raw_reduce(&raw, nrel as i64);
        if self.raw_val(&self.raw_reduce(&red, 1)) >= 1 {
            // force a unit
            let mut r2 = red;
            r2[0] =
                (r2[0] / self.0.p as i128) * self.0.p as i128 + rng.gen_range(1..self.0.p) as i128;
            return self.make_elem(&r2, v + nrel as i64, v);
        }
        self.make_elem(&red, v + nrel as i64, v)
    }

    /// Parses the canonical serialization produced by `Display`.
    pub fn parse_elem(&self, s: &str) -> Result<FieldElem> {
        let s = s.trim();
        if s == "0" {
            return Ok(self.zero());
        }
        let bad = || PadicError::Parse(format!("malformed element `{s}`"));
        if let Some(rest) = s.strip_prefix("O(pi^") {
            let a = rest
                .strip_suffix(')')
                .ok_or_else(bad)?
                .parse::<i64>()
                .map_err(|_| bad())?;
            return Ok(FieldElem::apparent(*self, a));
        }
        let rest = s.strip_prefix("pi^").ok_or_else(bad)?;
        let (v, rest) = rest.split_once(" * (").ok_or_else(bad)?;
        let v: i64 = v.parse().map_err(|_| bad())?;
        let (body, tail) = rest.split_once(") + O(pi^").ok_or_else(bad)?;
        let abs: i64 = tail
            .strip_suffix(')')
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        let (e, f) = (self.0.e, self.0.f);
        let mut raw = [0i128; MAX_DEG];
        for term in body.split(" + ") {
            let mut parts = term.split_whitespace();
            let c: i128 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let (mut i, mut j) = (0usize, 0usize);
            for mon in parts {
                let (var, exp) = match mon.split_once('^') {
                    Some((a, b)) => (a, b.parse::<usize>().map_err(|_| bad())?),
                    None => (mon, 1),
                };
                match var {
                    "x" => i = exp,
                    "y" => j = exp,
                    _ => return Err(bad()),
                }
            }
            if i >= f || j >= e {
                return Err(bad());
            }
            raw[j * f + i] = rem(c, self.modulus());
        }
        let el = self.make_elem(&raw, abs, v);
        match el.state {
            State::Nonzero { v: v2, .. } if v2 == v => Ok(el),
            _ => Err(PadicError::Parse(format!("`{s}` is not in canonical form"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Zero,
    Apparent { abs: i64 },
    Nonzero { v: i64, nrel: u32 },
}

/// An element of `F` known modulo `π^{v + N_rel}`.
#[derive(Clone, Copy)]
pub struct FieldElem {
    field: Field,
    state: State,
    unit: [i128; MAX_DEG],
}

impl FieldElem {
    fn apparent(field: Field, abs: i64) -> FieldElem {
        FieldElem {
            field,
            state: State::Apparent { abs },
            unit: [0; MAX_DEG],
        }
    }

    /// Zero known only modulo `π^abs`.
    pub fn zero_mod(field: Field, abs: i64) -> FieldElem {
        Self::apparent(field, abs)
    }

    pub fn field(&self) -> Field {
        self.field
    }

    /// Certified valuation; `None` for exact zero.
    pub fn valuation(&self) -> Result<Option<i64>> {
        match self.state {
            State::Zero => Ok(None),
            State::Apparent { abs } => Err(PadicError::ApparentZero(abs)),
            State::Nonzero { v, .. } => Ok(Some(v)),
        }
    }

    /// A lower bound on the valuation (`i64::MAX` for exact zero).
    pub fn val_bound(&self) -> i64 {
        match self.state {
            State::Zero => i64::MAX,
            State::Apparent { abs } => abs,
            State::Nonzero { v, .. } => v,
        }
    }

    /// Absolute precision `v + N_rel`; `None` for exact zero.
    pub fn abs_precision(&self) -> Option<i64> {
        match self.state {
            State::Zero => None,
            State::Apparent { abs } => Some(abs),
            State::Nonzero { v, nrel } => Some(v + nrel as i64),
        }
    }

    /// Relative precision; `None` unless the element is certified nonzero.
    pub fn rel_precision(&self) -> Option<u32> {
        match self.state {
            State::Nonzero { nrel, .. } => Some(nrel),
            _ => None,
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        self.state == State::Zero
    }

    /// True for exact zeros and for elements that vanish to working precision.
    pub fn is_zero(&self) -> bool {
        !matches!(self.state, State::Nonzero { .. })
    }

    /// Whether `self - other` vanishes to the propagated precision.
    pub fn eq_prec(&self, other: &FieldElem) -> bool {
        (*self - *other).is_zero()
    }

    /// Digits of agreement between `self` and `other`, measured relative to the
    /// smaller of their valuations; `None` when both are exact and equal.
    pub fn agreement(&self, other: &FieldElem) -> Option<i64> {
        let diff = *self - *other;
        let base = self.val_bound().min(other.val_bound());
        match diff.state {
            State::Zero => None,
            State::Apparent { abs } => Some(abs.saturating_sub(base)),
            State::Nonzero { .. } => Some(-1),
        }
    }

    /// Drops digits beyond absolute precision `abs`.
    pub fn cap_abs(&self, abs: i64) -> FieldElem {
        match self.state {
            State::Zero => FieldElem::apparent(self.field, abs),
            State::Apparent { abs: a } => FieldElem::apparent(self.field, a.min(abs)),
            State::Nonzero { v, nrel } => {
                if v + nrel as i64 <= abs {
                    *self
                } else if abs <= v {
                    FieldElem::apparent(self.field, abs)
                } else {
                    let n = (abs - v) as u32;
                    FieldElem {
                        field: self.field,
                        state: State::Nonzero { v, nrel: n },
                        unit: self.field.raw_reduce(&self.unit, n as i64),
                    }
                }
            }
        }
    }

    /// Drops digits beyond relative precision `n`.
    pub fn cap_rel(&self, n: u32) -> FieldElem {
        match self.state {
            State::Nonzero { v, .. } => self.cap_abs(v + n as i64),
            _ => *self,
        }
    }

    /// Treats the known digits as exact, padding to the constant precision.
    pub fn lift_exact(&self) -> FieldElem {
        match self.state {
            State::Nonzero { v, .. } => FieldElem {
                field: self.field,
                state: State::Nonzero {
                    v,
                    nrel: self.field.0.cap,
                },
                unit: self.unit,
            },
            _ => self.field.zero(),
        }
    }

    pub fn inv(&self) -> Result<FieldElem> {
        match self.state {
            State::Nonzero { v, nrel } => Ok(FieldElem {
                field: self.field,
                state: State::Nonzero { v: -v, nrel },
                unit: self.field.raw_unit_inv(&self.unit, nrel as i64),
            }),
            _ => Err(PadicError::DivisionByZero),
        }
    }

    pub fn checked_div(&self, other: &FieldElem) -> Result<FieldElem> {
        Ok(*self * other.inv()?)
    }

    /// Fails with `PrecisionUnderflow` when fewer than `floor` relative digits are known.
    pub fn ensure_precision(&self, floor: u32) -> Result<FieldElem> {
        match self.state {
            State::Nonzero { nrel, .. } if nrel < floor => Err(PadicError::PrecisionUnderflow {
                got: nrel as i64,
                floor: floor as i64,
            }),
            _ => Ok(*self),
        }
    }

    pub fn pow(&self, k: i64) -> FieldElem {
        if k < 0 {
            return self
                .inv()
                .expect("power of zero with negative exponent")
                .pow(-k);
        }
        let mut r = self.field.one();
        let mut b = *self;
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                r = r * b;
            }
            b = b * b;
            k >>= 1;
        }
        r
    }

    /// Residue class modulo π as ascending `x`-coefficients (requires `v >= 0`).
    pub fn residue(&self) -> Vec<i64> {
        let f = self.field.0.f;
        match self.state {
            State::Nonzero { v: 0, .. } => (0..f)
                .map(|i| (self.unit[i] % self.field.0.p as i128) as i64)
                .collect(),
            _ => vec![0; f],
        }
    }

    /// Unit part digits `c[j*f + i]` (coefficient of `x^i y^j`), canonical modulo `π^{N_rel}`.
    pub fn unit_digits(&self) -> Vec<i128> {
        self.unit[..self.field.n()].to_vec()
    }

    /// Canonical integer representative in `[0, p^k)` when `F = Q_p`-like (`e = f = 1`) and `v >= 0`.
    pub fn to_int_mod(&self, k: u32) -> Option<i128> {
        if self.field.n() != 1 {
            return None;
        }
        let md = self.field.0.ppow[k as usize];
        match self.state {
            State::Zero | State::Apparent { .. } => Some(0),
            State::Nonzero { v, .. } if v >= 0 => {
                let raw = self
                    .field
                    .raw_mul(&self.unit, &self.field.raw_pi_pow(v as u32));
                Some(rem(raw[0], md))
            }
            _ => None,
        }
    }

    fn aligned_raw(&self, shift: i64) -> [i128; MAX_DEG] {
        match self.state {
            State::Nonzero { v, .. } => {
                let k = v - shift;
                self.field
                    .raw_mul(&self.unit, &self.field.raw_pi_pow(k as u32))
            }
            _ => [0; MAX_DEG],
        }
    }
}

impl std::ops::Add for FieldElem {
    type Output = FieldElem;
    fn add(self, rhs: FieldElem) -> FieldElem {
        assert!(self.field == rhs.field, "mixed fields");
        let field = self.field;
        match (self.state, rhs.state) {
            (State::Zero, _) => return rhs,
            (_, State::Zero) => return self,
            (State::Apparent { abs: a }, State::Apparent { abs: b }) => {
                return FieldElem::apparent(field, a.min(b))
            }
            _ => {}
        }
        let abs = self
            .abs_precision()
            .unwrap()
            .min(rhs.abs_precision().unwrap());
        let vmin = [self, rhs]
            .iter()
            .filter_map(|x| match x.state {
                State::Nonzero { v, .. } => Some(v),
                _ => None,
            })
            .min()
            .unwrap();
        if abs <= vmin {
            return FieldElem::apparent(field, abs);
        }
        let width = abs - vmin;
        let mut acc = [0i128; MAX_DEG];
        for x in [self, rhs] {
            if let State::Nonzero { v, .. } = x.state {
                if v - vmin < width {
                    acc = field.raw_add(&acc, &x.aligned_raw(vmin));
                }
            }
        }
        field.make_elem(&acc, abs, vmin)
    }
}

impl std::ops::Neg for FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        match self.state {
            State::Nonzero { nrel, .. } => {
                let n = self.field.raw_neg(&self.unit);
                FieldElem {
                    unit: self.field.raw_reduce(&n, nrel as i64),
                    ..self
                }
            }
            _ => self,
        }
    }
}

impl std::ops::Sub for FieldElem {
    type Output = FieldElem;
    fn sub(self, rhs: FieldElem) -> FieldElem {
        self + (-rhs)
    }
}

impl std::ops::Mul for FieldElem {
    type Output = FieldElem;
    fn mul(self, rhs: FieldElem) -> FieldElem {
        assert!(self.field == rhs.field, "mixed fields");
        let field = self.field;
        match (self.state, rhs.state) {
            (State::Zero, _) | (_, State::Zero) => field.zero(),
            (State::Apparent { abs: a }, State::Apparent { abs: b }) => {
                FieldElem::apparent(field, a + b)
            }
            (State::Apparent { abs }, State::Nonzero { v, .. })
            | (State::Nonzero { v, .. }, State::Apparent { abs }) => {
                FieldElem::apparent(field, abs + v)
            }
            (State::Nonzero { v: va, nrel: na }, State::Nonzero { v: vb, nrel: nb }) => {
                let n = na.min(nb);
                let prod = field.raw_mul(&self.unit, &rhs.unit);
                FieldElem {
                    field,
                    state: State::Nonzero {
                        v: va + vb,
                        nrel: n,
                    },
                    unit: field.raw_reduce(&prod, n as i64),
                }
            }
        }
    }
}

impl std::ops::Div for FieldElem {
    type Output = FieldElem;
    fn div(self, rhs: FieldElem) -> FieldElem {
        self.checked_div(&rhs).expect("division by zero")
    }
}

impl std::ops::AddAssign for FieldElem {
    fn add_assign(&mut self, rhs: FieldElem) {
        *self = *self + rhs;
    }
}

impl std::ops::SubAssign for FieldElem {
    fn sub_assign(&mut self, rhs: FieldElem) {
        *self = *self - rhs;
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.state {
            State::Zero => write!(fm, "0"),
            State::Apparent { abs } => write!(fm, "O(pi^{abs})"),
            State::Nonzero { nrel, .. } if nrel > self.field.0.precision => {
                fmt::Display::fmt(&self.cap_rel(self.field.0.precision), fm)
            }
            State::Nonzero { v, nrel } => {
                let (e, f) = (self.field.0.e, self.field.0.f);
                let mut terms = Vec::new();
                for j in 0..e {
                    for i in 0..f {
                        let c = self.unit[j * f + i];
                        if c == 0 {
                            continue;
                        }
                        let mut t = c.to_string();
                        match i {
                            0 => {}
                            1 => t.push_str(" x"),
                            _ => t.push_str(&format!(" x^{i}")),
                        }
                        match j {
                            0 => {}
                            1 => t.push_str(" y"),
                            _ => t.push_str(&format!(" y^{j}")),
                        }
                        terms.push(t);
                    }
                }
                write!(
                    fm,
                    "pi^{v} * ({}) + O(pi^{})",
                    terms.join(" + "),
                    v + nrel as i64
                )
            }
        }
    }
}

impl fmt::Debug for FieldElem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, fm)
    }
}

/// `v_p` of a nonzero integer.
pub fn vp_i64(n: i64, p: i64) -> u32 {
    vp_int(n as i128, p as i128)
}

/// Binomial coefficient `C(n, k)` as an exact integer.
pub fn binomial(n: i64, k: i64) -> i128 {
    if k < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: i128 = 1;
    for i in 0..k {
        r = r * (n - i) as i128 / (i + 1) as i128;
    }
    r
}

impl Field {
    /// Exact integer given as `i128`.
    pub fn from_i128(&self, n: i128) -> FieldElem {
        if let Ok(small) = i64::try_from(n) {
            return self.from_int(small);
        }
        let hi = n / (1i128 << 40);
        let lo = n % (1i128 << 40);
        self.from_i128(hi) * self.from_int(1i64 << 40) + self.from_int(lo as i64)
    }
}
