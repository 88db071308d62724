//! Exact polynomial expansion of a tanh filter output, used to confirm which
//! amplifier basis terms the convolution layer can produce.
//!
//! The alphabet is `I(n-i)`, `Q(n-i)`, `|x(n-i)|` for `i` in `0..=2` and a
//! bias `b`. Kernel weights are all one.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_DELAY: usize = 2;
pub const N_SYMBOLS: usize = 3 * (MAX_DELAY + 1) + 1;

pub type Monomial = [u32; N_SYMBOLS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Symbol {
    I(usize),
    Q(usize),
    Abs(usize),
    Bias,
}

impl Symbol {
    pub fn index(self) -> usize {
        match self {
            Symbol::I(d) => 3 * d,
            Symbol::Q(d) => 3 * d + 1,
            Symbol::Abs(d) => 3 * d + 2,
            Symbol::Bias => N_SYMBOLS - 1,
        }
    }

    pub fn all() -> Vec<Symbol> {
        let mut v: Vec<Symbol> = (0..=MAX_DELAY)
            .flat_map(|d| [Symbol::I(d), Symbol::Q(d), Symbol::Abs(d)])
            .collect();
        v.push(Symbol::Bias);
        v
    }

    fn from_index(i: usize) -> Symbol {
        Symbol::all()[i]
    }

    fn valid(self) -> bool {
        match self {
            Symbol::I(d) | Symbol::Q(d) | Symbol::Abs(d) => d <= MAX_DELAY,
            Symbol::Bias => true,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = |d: usize| if d == 0 { "n".to_string() } else { format!("n-{d}") };
        match *self {
            Symbol::I(d) => write!(f, "I({})", t(d)),
            Symbol::Q(d) => write!(f, "Q({})", t(d)),
            Symbol::Abs(d) => write!(f, "|x({})|", t(d)),
            Symbol::Bias => write!(f, "b"),
        }
    }
}

/// Sparse multivariate polynomial with exact rational coefficients. Zero
/// coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term([0; N_SYMBOLS], c);
        p
    }

    pub fn symbol(s: Symbol) -> Self {
        assert!(s.valid(), "symbol {s} outside the alphabet");
        let mut m = [0; N_SYMBOLS];
        m[s.index()] = 1;
        let mut p = Self::zero();
        p.add_term(m, BigRational::one());
        p
    }

    /// Sum of the given symbols, each with unit weight.
    pub fn sum_of(symbols: &[Symbol]) -> Self {
        symbols.iter().fold(Self::zero(), |acc, &s| acc.add(&Self::symbol(s)))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c.clone());
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero();
        for (m, v) in &self.terms {
            out.add_term(*m, v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = *ma;
                for (e, f) in m.iter_mut().zip(mb) {
                    *e += f;
                }
                out.add_term(m, ca * cb);
            }
        }
        out
    }

    fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(BigRational::one()), |acc, _| acc.mul(self))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, point: &[BigRational; N_SYMBOLS]) -> BigRational {
        self.terms
            .iter()
            .map(|(m, c)| {
                m.iter()
                    .zip(point)
                    .fold(c.clone(), |acc, (&e, v)| acc * num_traits::pow(v.clone(), e as usize))
            })
            .fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn eval_f64(&self, point: &[f64; N_SYMBOLS]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let cf = c.to_f64().unwrap_or(f64::NAN);
                m.iter().zip(point).fold(cf, |acc, (&e, v)| acc * v.powi(e as i32))
            })
            .sum()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let sign = if c.is_negative() { " - " } else if i > 0 { " + " } else { "" };
            write!(f, "{}{}", if i == 0 && c.is_negative() { "-" } else { sign }, c.abs())?;
            for (j, &e) in m.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*{}", Symbol::from_index(j))?,
                    _ => write!(f, "*{}^{e}", Symbol::from_index(j))?,
                }
            }
        }
        Ok(())
    }
}

pub fn monomial(factors: &[(Symbol, u32)]) -> Monomial {
    let mut m = [0; N_SYMBOLS];
    for &(s, e) in factors {
        m[s.index()] += e;
    }
    m
}

/// `p^k` for `k` in `{1, 2, 3, 5}`.
pub fn expand_power(p: &Polynomial, k: u32) -> Result<Polynomial> {
    if ![1, 2, 3, 5].contains(&k) {
        return Err(Error::Unsupported(format!("power {k}")));
    }
    Ok(p.pow(k))
}

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Taylor polynomial of `tanh(p)` through `p^order`, `order` in `{1, 3, 5}`.
pub fn tanh_taylor(p: &Polynomial, order: u32) -> Result<Polynomial> {
    let coeffs: &[(u32, i64, i64)] = match order {
        1 => &[(1, 1, 1)],
        3 => &[(1, 1, 1), (3, -1, 3)],
        5 => &[(1, 1, 1), (3, -1, 3), (5, 2, 15)],
        _ => return Err(Error::Unsupported(format!("tanh expansion order {order}"))),
    };
    let mut out = Polynomial::zero();
    for &(k, n, d) in coeffs {
        out = out.add(&expand_power(p, k)?.scale(&rational(n, d)));
    }
    Ok(out)
}

/// The filter input of a single 3x3 all-ones kernel over the newest three
/// columns, plus bias: every symbol in the alphabet summed.
pub fn filter_sum() -> Polynomial {
    Polynomial::sum_of(&Symbol::all())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TermFamily {
    Linear,
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Presence {
    pub term: String,
    pub family: TermFamily,
    /// Delay `q` of the envelope factor, and its power `k` (0 for linear terms).
    pub q: usize,
    pub k: u32,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisReport {
    pub memory_depth: usize,
    pub order: u32,
    pub entries: Vec<Presence>,
}

impl BasisReport {
    pub fn all_present(&self) -> bool {
        self.entries.iter().all(|e| e.present)
    }

    pub fn cross_terms(&self) -> impl Iterator<Item = &Presence> {
        self.entries.iter().filter(|e| e.family == TermFamily::Cross)
    }
}

impl fmt::Display for BasisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.entries.iter().map(|e| e.term.len()).max().unwrap_or(4).max(4);
        writeln!(f, "{:<width$}  status", "term")?;
        for e in &self.entries {
            writeln!(f, "{:<width$}  {}", e.term, if e.present { "found" } else { "missing" })?;
        }
        Ok(())
    }
}

/// Whether any monomial matches `target` on every non-bias symbol, i.e. the
/// coefficient of `target` as a polynomial in `b` is nonzero.
fn present_modulo_bias(p: &Polynomial, target: &Monomial) -> bool {
    let bias = Symbol::Bias.index();
    p.terms
        .keys()
        .any(|m| (0..N_SYMBOLS).all(|j| j == bias || m[j] == target[j]))
}

/// Presence of `I(n)`, `Q(n)` and every `I(n)|x(n-q)|^k`, `Q(n)|x(n-q)|^k`
/// for `q <= M`, `1 <= k <= K`. Delays beyond the alphabet are reported missing.
pub fn contains_basis_terms(expansion: &Polynomial, memory_depth: usize, max_power: u32) -> BasisReport {
    let mut entries = Vec::new();
    for s in [Symbol::I(0), Symbol::Q(0)] {
        entries.push(Presence {
            term: s.to_string(),
            family: TermFamily::Linear,
            q: 0,
            k: 0,
            present: present_modulo_bias(expansion, &monomial(&[(s, 1)])),
        });
    }
    for s in [Symbol::I(0), Symbol::Q(0)] {
        for q in 0..=memory_depth {
            for k in 1..=max_power {
                let env = Symbol::Abs(q);
                let power = if k == 1 { String::new() } else { format!("^{k}") };
                let present = env.valid() && present_modulo_bias(expansion, &monomial(&[(s, 1), (env, k)]));
                entries.push(Presence {
                    term: format!("{s}*{env}{power}"),
                    family: TermFamily::Cross,
                    q,
                    k,
                    present,
                });
            }
        }
    }
    BasisReport {
        memory_depth,
        order: expansion.degree(),
        entries,
    }
}

/// Full check: expand `tanh` of the filter sum to `order` and report presence.
pub fn basis_check(order: u32, memory_depth: usize, max_power: u32) -> Result<BasisReport> {
    let expansion = tanh_taylor(&filter_sum(), order)?;
    let mut report = contains_basis_terms(&expansion, memory_depth, max_power);
    report.order = order;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn int(n: i64) -> BigRational {
        rational(n, 1)
    }

    #[test]
    fn binomial_square() {
        let a = Polynomial::symbol(Symbol::I(0));
        let b = Polynomial::symbol(Symbol::Bias);
        let sq = expand_power(&a.add(&b), 2).unwrap();
        let want = a.mul(&a).add(&a.mul(&b).scale(&int(2))).add(&b.mul(&b));
        assert_eq!(sq, want);
        assert_eq!(sq.len(), 3);
    }

    #[test]
    fn cube_monomial_count_and_bias_coefficient() {
        let cube = expand_power(&filter_sum(), 3).unwrap();
        assert_eq!(cube.len(), 220);
        let m = monomial(&[(Symbol::Bias, 1), (Symbol::I(0), 1), (Symbol::Abs(0), 1)]);
        assert_eq!(cube.coefficient(&m), int(6));
        assert_eq!(expand_power(&filter_sum(), 5).unwrap().len(), 2002);
        assert!(expand_power(&filter_sum(), 4).is_err());
    }

    #[test]
    fn tanh_of_single_symbol() {
        let x = Polynomial::symbol(Symbol::Q(1));
        let t = tanh_taylor(&x, 3).unwrap();
        let want = x.add(&x.mul(&x).mul(&x).scale(&rational(-1, 3)));
        assert_eq!(t, want);
        assert!(tanh_taylor(&Polynomial::zero(), 3).unwrap().is_empty());
        assert!(tanh_taylor(&Polynomial::zero(), 5).unwrap().is_empty());
        assert!(tanh_taylor(&x, 4).is_err());
        assert_eq!(tanh_taylor(&x, 1).unwrap(), x);
    }

    fn random_point(rng: &mut ChaCha8Rng, amp: f64) -> [f64; N_SYMBOLS] {
        let mut p = [0.0; N_SYMBOLS];
        p.iter_mut().for_each(|v| *v = rng.random_range(-amp..amp));
        p
    }

    #[test]
    fn taylor_matches_tanh_numerically() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = filter_sum();
        let t3 = tanh_taylor(&p, 3).unwrap();
        let t5 = tanh_taylor(&p, 5).unwrap();
        for _ in 0..100 {
            // Sum of ten values below 0.009 stays under 0.09.
            let pt = random_point(&mut rng, 0.009);
            let s = p.eval_f64(&pt);
            assert!((t3.eval_f64(&pt) - s.tanh()).abs() < 1e-6);
            let pt = random_point(&mut rng, 0.1);
            let s = p.eval_f64(&pt);
            let bound3 = 2.0 * s.abs().powi(5) / 15.0 + 1e-15;
            let bound5 = 17.0 * s.abs().powi(7) / 315.0 + 1e-15;
            assert!((t3.eval_f64(&pt) - s.tanh()).abs() <= bound3);
            assert!((t5.eval_f64(&pt) - s.tanh()).abs() <= bound5);
        }
    }

    #[test]
    fn named_basis_terms_present() {
        let report = basis_check(3, 2, 2).unwrap();
        assert_eq!(report.cross_terms().count(), 12);
        assert_eq!(report.entries.len(), 14);
        assert!(report.all_present(), "{report}");
        let text = report.to_string();
        assert!(text.contains("I(n)*|x(n-2)|^2") && text.contains("found"));
    }

    #[test]
    fn first_order_lacks_cross_terms() {
        let report = basis_check(1, 2, 2).unwrap();
        assert!(report.cross_terms().all(|e| !e.present));
        assert!(report.entries.iter().filter(|e| e.family == TermFamily::Linear).all(|e| e.present));
    }

    #[test]
    fn removed_envelope_removes_its_terms() {
        let symbols: Vec<Symbol> = Symbol::all().into_iter().filter(|&s| s != Symbol::Abs(1)).collect();
        let expansion = tanh_taylor(&Polynomial::sum_of(&symbols), 3).unwrap();
        let report = contains_basis_terms(&expansion, 2, 2);
        for e in report.cross_terms() {
            assert_eq!(e.present, e.q != 1, "{}", e.term);
        }
        let deep = contains_basis_terms(&expansion, 3, 1);
        assert!(deep.cross_terms().filter(|e| e.q == 3).all(|e| !e.present));
    }

    #[test]
    fn expansion_is_exact_at_rational_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = filter_sum();
        let powers: Vec<(u32, Polynomial)> = [2, 3, 5].iter().map(|&k| (k, expand_power(&p, k).unwrap())).collect();
        for _ in 0..100 {
            let pt: [BigRational; N_SYMBOLS] =
                std::array::from_fn(|_| rational(rng.random_range(-50..50), rng.random_range(1..20)));
            let v = p.eval(&pt);
            for (k, e) in &powers {
                assert_eq!(e.eval(&pt), num_traits::pow(v.clone(), *k as usize));
            }
        }
    }

    fn small_poly() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec((0usize..N_SYMBOLS, 0u32..3, -5i64..6), 0..5).prop_map(|ts| {
            ts.into_iter().fold(Polynomial::zero(), |acc, (s, e, c)| {
                let mut m = [0; N_SYMBOLS];
                m[s] = e;
                let mut t = Polynomial::zero();
                t.add_term(m, int(c));
                acc.add(&t)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ring_laws(a in small_poly(), b in small_poly(), c in small_poly()) {
            prop_assert_eq!(a.add(&b), b.add(&a));
            prop_assert_eq!(a.mul(&b), b.mul(&a));
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert!(a.terms().all(|(_, v)| !v.is_zero()));
        }
    }
}
