//! Exact arithmetic in cyclotomic fields Q(zeta_M), plus a floating mirror.
//!
//! A [`CycValue`] is a formal Q-linear combination of roots of unity
//! zeta_M^e, i.e. an element of the group ring Q[Z/M]. Addition and
//! multiplication stay in this form (multiplication is sparse convolution
//! with exponents added mod M), so accumulating a large character sum costs
//! one coefficient update per term. Zero tests reduce the element to the
//! tensor basis over the prime-power factors of M, where the representation
//! of an element of Q(zeta_M) is unique: for each prime power q = p^a || M
//! the exponents with digit e mod q in [phi(q), q) are rewritten through
//! 1 + zeta^{q/p} + zeta^{2q/p} + ... + zeta^{(p-1)q/p} = 0.
//!
//! Embeddings of compatible orders agree: values of different order are
//! merged by scaling exponents to the lcm, and orders are reduced by the
//! gcd of the support whenever possible.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Hard cap on root-of-unity orders. Desk-scale runs stay far below; the
/// guard catches accidental order blowups.
pub const MAX_ORDER: u64 = 4_000_000;

/// Exact element of a cyclotomic field, stored over the group ring basis.
#[derive(Clone, Debug)]
pub struct CycValue {
    order: u64,
    terms: BTreeMap<u64, BigRational>,
}

fn big_rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Trial-division factorization; orders here are tiny.
fn factorize(mut m: u64) -> Vec<(u64, u32, u64)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            let mut a = 0u32;
            let mut q = 1u64;
            while m % p == 0 {
                m /= p;
                a += 1;
                q *= p;
            }
            out.push((p, a, q));
        }
        p += 1;
    }
    if m > 1 {
        out.push((m, 1, m));
    }
    out
}

fn egcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = egcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// Inverse of `a` modulo `m` (requires gcd(a, m) = 1).
pub fn inv_mod_u64(a: u64, m: u64) -> u64 {
    let (g, x, _) = egcd(a as i128, m as i128);
    assert!(g == 1, "inv_mod_u64: not coprime");
    (x.rem_euclid(m as i128)) as u64
}

impl CycValue {
    pub fn zero() -> Self {
        CycValue { order: 1, terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::from_rational(BigRational::one())
    }

    pub fn from_rational(r: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(0u64, r);
        }
        CycValue { order: 1, terms }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(big_rat(n, 1))
    }

    /// zeta_order^exp as an exact value.
    pub fn root_of_unity(order: u64, exp: u64) -> Self {
        assert!(order >= 1 && order <= MAX_ORDER);
        let mut terms = BTreeMap::new();
        terms.insert(exp % order, BigRational::one());
        CycValue { order, terms }.reduced()
    }

    pub fn scaled_root(order: u64, exp: u64, coeff: BigRational) -> Self {
        Self::root_of_unity(order, exp).scale(&coeff)
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn terms(&self) -> &BTreeMap<u64, BigRational> {
        &self.terms
    }

    /// Divide the order by the gcd of the support so products of p-power
    /// roots do not inflate the ambient field.
    fn reduced(mut self) -> Self {
        if self.terms.is_empty() {
            self.order = 1;
            return self;
        }
        let mut g = self.order;
        for e in self.terms.keys() {
            g = num_integer::gcd(g, *e);
            if g == 1 {
                return self;
            }
        }
        if g > 1 {
            let order = self.order / g;
            let terms = core::mem::take(&mut self.terms)
                .into_iter()
                .map(|(e, c)| (e / g, c))
                .collect();
            self.order = order;
            self.terms = terms;
        }
        self
    }

    fn common_order(&self, rhs: &Self) -> u64 {
        let m = num_integer::lcm(self.order, rhs.order);
        assert!(m <= MAX_ORDER, "cyclotomic order overflow: {m}");
        m
    }

    fn rescaled_terms(&self, m: u64) -> BTreeMap<u64, BigRational> {
        let k = m / self.order;
        self.terms.iter().map(|(e, c)| (e * k, c.clone())).collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let m = self.common_order(rhs);
        let mut terms = self.rescaled_terms(m);
        let k = m / rhs.order;
        for (e, c) in &rhs.terms {
            let ent = terms.entry(e * k).or_insert_with(BigRational::zero);
            *ent += c;
            if ent.is_zero() {
                terms.remove(&(e * k));
            }
        }
        CycValue { order: m, terms }.reduced()
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        CycValue {
            order: self.order,
            terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect(),
        }
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        CycValue {
            order: self.order,
            terms: self.terms.iter().map(|(e, c)| (*e, c * r)).collect(),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        if self.terms.is_empty() || rhs.terms.is_empty() {
            return Self::zero();
        }
        let m = self.common_order(rhs);
        let ka = m / self.order;
        let kb = m / rhs.order;
        let mut terms: BTreeMap<u64, BigRational> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = (ea * ka + eb * kb) % m;
                let ent = terms.entry(e).or_insert_with(BigRational::zero);
                *ent += ca * cb;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        CycValue { order: m, terms }.reduced()
    }

    /// Complex conjugation: zeta^e -> zeta^{-e}.
    pub fn conj(&self) -> Self {
        CycValue {
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| ((self.order - e) % self.order, c.clone()))
                .collect(),
        }
    }

    /// |x|^2 = x * conj(x).
    pub fn norm_sq(&self) -> Self {
        self.mul(&self.conj())
    }

    /// Canonical coefficients over the tensor basis; empty map iff zero.
    fn canonical_terms(&self) -> BTreeMap<u64, BigRational> {
        let mut cur = self.terms.clone();
        if self.order == 1 {
            cur.retain(|_, c| !c.is_zero());
            return cur;
        }
        let m = self.order;
        for (p, _a, q) in factorize(m) {
            let phi = q - q / p;
            let r = m / q;
            // CRT idempotent: 1 mod q, 0 mod r.
            let idem: u64 = if r == 1 {
                1
            } else {
                ((r as u128 * inv_mod_u64(r % q, q) as u128) % m as u128) as u64
            };
            let step = (q / p) % m;
            let mut next: BTreeMap<u64, BigRational> = BTreeMap::new();
            for (e, c) in cur {
                if c.is_zero() {
                    continue;
                }
                let d = e % q;
                if d < phi {
                    let ent = next.entry(e).or_insert_with(BigRational::zero);
                    *ent += &c;
                } else {
                    // zeta^e = -sum_{t=1}^{p-1} zeta^{e - t*(q/p)} adjusted on
                    // the q-coordinate only.
                    for t in 1..p {
                        let delta = ((t as u128 * step as u128 % m as u128) * idem as u128 % m as u128) as u64;
                        let e2 = (e + m - delta) % m;
                        let ent = next.entry(e2).or_insert_with(BigRational::zero);
                        *ent -= &c;
                    }
                }
            }
            cur = next;
        }
        cur.retain(|_, c| !c.is_zero());
        cur
    }

    pub fn is_zero(&self) -> bool {
        if self.terms.is_empty() {
            return true;
        }
        self.canonical_terms().is_empty()
    }

    pub fn eq_value(&self, rhs: &Self) -> bool {
        self.sub(rhs).is_zero()
    }

    pub fn eq_rational(&self, r: &BigRational) -> bool {
        self.sub(&Self::from_rational(r.clone())).is_zero()
    }

    /// Some(r) iff the value is the rational number r.
    pub fn as_rational(&self) -> Option<BigRational> {
        let canon = self.canonical_terms();
        match canon.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (e, c) = canon.iter().next().unwrap();
                if *e == 0 {
                    Some(c.clone())
                } else {
                    None
                }
            }
            _ => {
                // Rational values can still be spread over the basis after
                // rewriting (e.g. -zeta_3 - zeta_3^2 = 1); decide by
                // subtracting the exponent-0 coefficient.
                let c0 = canon.get(&0).cloned().unwrap_or_else(BigRational::zero);
                if self.eq_rational(&c0) {
                    Some(c0)
                } else {
                    None
                }
            }
        }
    }

    /// Inverse through conjugation, valid when |x|^2 is rational (all
    /// character-sum values used here are of this shape).
    pub fn inv(&self) -> crate::error::Result<Self> {
        let n = self.norm_sq().as_rational().ok_or(crate::error::Error::NotInvertible)?;
        if n.is_zero() {
            return Err(crate::error::Error::NotInvertible);
        }
        Ok(self.conj().scale(&n.recip()))
    }

    /// Numeric embedding zeta_M -> exp(2 pi i / M), deterministic order.
    pub fn to_float(&self) -> Complex {
        let mut z = Complex::zero();
        for (e, c) in &self.terms {
            let theta = 2.0 * core::f64::consts::PI * (*e as f64) / (self.order as f64);
            let cf = c.to_f64().unwrap_or_else(|| {
                c.numer().to_f64().unwrap() / c.denom().to_f64().unwrap()
            });
            z.re += cf * libm::cos(theta);
            z.im += cf * libm::sin(theta);
        }
        z
    }
}

/// Minimal complex double type for the float mirror (no_std friendly).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn zero() -> Self {
        Complex { re: 0.0, im: 0.0 }
    }
    pub fn one() -> Self {
        Complex { re: 1.0, im: 0.0 }
    }
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }
    pub fn root_of_unity(order: u64, exp: u64) -> Self {
        let theta = 2.0 * core::f64::consts::PI * ((exp % order) as f64) / (order as f64);
        Complex { re: libm::cos(theta), im: libm::sin(theta) }
    }
    pub fn add(self, o: Complex) -> Complex {
        Complex { re: self.re + o.re, im: self.im + o.im }
    }
    pub fn sub(self, o: Complex) -> Complex {
        Complex { re: self.re - o.re, im: self.im - o.im }
    }
    pub fn mul(self, o: Complex) -> Complex {
        Complex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
    pub fn scale(self, s: f64) -> Complex {
        Complex { re: self.re * s, im: self.im * s }
    }
    pub fn conj(self) -> Complex {
        Complex { re: self.re, im: -self.im }
    }
    pub fn abs(self) -> f64 {
        libm::hypot(self.re, self.im)
    }
}

/// Value in Q(zeta_M)(sqrt q): `plain + radical * sqrt(q)`.
///
/// Half-integral powers of q produced by Whittaker functions are carried in
/// the radical component; the verified closed forms always end with the
/// radical part exactly zero.
#[derive(Clone, Debug)]
pub struct SqrtQValue {
    pub plain: CycValue,
    pub radical: CycValue,
    pub q: u64,
}

impl SqrtQValue {
    pub fn zero(q: u64) -> Self {
        SqrtQValue { plain: CycValue::zero(), radical: CycValue::zero(), q }
    }
    pub fn from_plain(q: u64, v: CycValue) -> Self {
        SqrtQValue { plain: v, radical: CycValue::zero(), q }
    }
    /// value = cyc * q^{qhalf/2}: integral exponents fold into `plain`,
    /// odd exponents land in the radical component.
    pub fn from_half_power(q: u64, cyc: CycValue, qhalf: i64) -> Self {
        let int_part = qhalf.div_euclid(2);
        let rem = qhalf.rem_euclid(2);
        let scale = rational_q_pow(q, int_part);
        let scaled = cyc.scale(&scale);
        if rem == 0 {
            Self::from_plain(q, scaled)
        } else {
            SqrtQValue { plain: CycValue::zero(), radical: scaled, q }
        }
    }
    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.q, o.q);
        SqrtQValue {
            plain: self.plain.add(&o.plain),
            radical: self.radical.add(&o.radical),
            q: self.q,
        }
    }
    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.q, o.q);
        let qv = CycValue::from_rational(big_rat(self.q as i64, 1));
        SqrtQValue {
            plain: self.plain.mul(&o.plain).add(&self.radical.mul(&o.radical).mul(&qv)),
            radical: self.plain.mul(&o.radical).add(&self.radical.mul(&o.plain)),
            q: self.q,
        }
    }
    pub fn scale(&self, r: &BigRational) -> Self {
        SqrtQValue { plain: self.plain.scale(r), radical: self.radical.scale(r), q: self.q }
    }
    pub fn is_zero(&self) -> bool {
        self.plain.is_zero() && self.radical.is_zero()
    }
    /// Some(plain part) iff the radical part vanishes exactly.
    pub fn as_plain(&self) -> Option<CycValue> {
        if self.radical.is_zero() {
            Some(self.plain.clone())
        } else {
            None
        }
    }
    pub fn to_float(&self) -> Complex {
        let s = libm::sqrt(self.q as f64);
        self.plain.to_float().add(self.radical.to_float().scale(s))
    }
}

/// q^k as an exact rational, for signed k.
pub fn rational_q_pow(q: u64, k: i64) -> BigRational {
    let b = BigInt::from(q);
    if k >= 0 {
        BigRational::from_integer(b.pow(k as u32))
    } else {
        BigRational::new(BigInt::one(), b.pow((-k) as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        big_rat(n, d)
    }

    #[test]
    fn primitive_root_sum_is_minus_one() {
        let mut s = CycValue::zero();
        for e in 1..5 {
            s = s.add(&CycValue::root_of_unity(5, e));
        }
        assert!(s.eq_rational(&rat(-1, 1)));
    }

    #[test]
    fn quadratic_gauss_sum_squares_to_five() {
        // (sum_u (u/5) zeta_5^u)^2 = 5 since 5 = 1 mod 4.
        let legendre = [0i64, 1, -1, -1, 1];
        let mut g = CycValue::zero();
        for u in 1..5u64 {
            g = g.add(&CycValue::scaled_root(5, u, rat(legendre[u as usize], 1)));
        }
        assert!(g.mul(&g).eq_rational(&rat(5, 1)));
    }

    #[test]
    fn compatible_embeddings_agree() {
        let a = CycValue::root_of_unity(8, 2);
        let b = CycValue::root_of_unity(4, 1);
        assert!(a.sub(&b).is_zero());
    }

    #[test]
    fn rational_detection_through_rewrites() {
        // -zeta_3 - zeta_3^2 = 1.
        let v = CycValue::root_of_unity(3, 1).neg().sub(&CycValue::root_of_unity(3, 2));
        assert_eq!(v.as_rational(), Some(rat(1, 1)));
        assert!(!CycValue::root_of_unity(7, 3).is_zero());
    }

    #[test]
    fn inverse_through_conjugation() {
        let v = CycValue::root_of_unity(12, 5).scale(&rat(3, 7));
        let inv = v.inv().unwrap();
        assert!(v.mul(&inv).eq_rational(&rat(1, 1)));
    }

    #[test]
    fn float_embedding_matches_known_points() {
        let i = CycValue::root_of_unity(4, 1).to_float();
        assert!((i.re).abs() < 1e-12 && (i.im - 1.0).abs() < 1e-12);
        let one = CycValue::one().to_float();
        assert!((one.re - 1.0).abs() < 1e-12 && one.im.abs() < 1e-12);
    }

    #[test]
    fn sqrtq_multiplication() {
        // (1 + sqrt(5))^2 = 6 + 2 sqrt(5)
        let v = SqrtQValue { plain: CycValue::one(), radical: CycValue::one(), q: 5 };
        let sq = v.mul(&v);
        assert!(sq.plain.eq_rational(&rat(6, 1)));
        assert!(sq.radical.eq_rational(&rat(2, 1)));
    }

    fn arb_value() -> impl Strategy<Value = CycValue> {
        let orders = prop_oneof![Just(1u64), Just(4), Just(6), Just(8), Just(12), Just(20), Just(45)];
        (orders, proptest::collection::vec((0u64..45, -5i64..6), 0..5)).prop_map(|(m, tv)| {
            let mut v = CycValue::zero();
            for (e, c) in tv {
                v = v.add(&CycValue::scaled_root(m, e % m.max(1), rat(c, 1)));
            }
            v
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_value(), b in arb_value(), c in arb_value()) {
            prop_assert!(a.add(&b).eq_value(&b.add(&a)));
            prop_assert!(a.mul(&b).eq_value(&b.mul(&a)));
            prop_assert!(a.mul(&b.add(&c)).eq_value(&a.mul(&b).add(&a.mul(&c))));
            prop_assert!(a.add(&b).add(&c).eq_value(&a.add(&b.add(&c))));
            prop_assert!(a.mul(&b).mul(&c).eq_value(&a.mul(&b.mul(&c))));
        }

        #[test]
        fn conjugation_properties(a in arb_value(), b in arb_value()) {
            prop_assert!(a.conj().conj().eq_value(&a));
            prop_assert!(a.mul(&b).conj().eq_value(&a.conj().mul(&b.conj())));
        }

        #[test]
        fn float_mirrors_exact_sum(a in arb_value(), b in arb_value()) {
            let exact = a.add(&b).to_float();
            let mirrored = a.to_float().add(b.to_float());
            prop_assert!((exact.re - mirrored.re).abs() < 1e-9);
            prop_assert!((exact.im - mirrored.im).abs() < 1e-9);
        }
    }
}
