//! Bounded measures on Z_p as truncated power series and as distribution
//! tables, with the calculus connecting them: moments via the invariant
//! operator D = (1+T) d/dT, twisting by locally constant functions in two
//! independent ways, evaluation at p-power roots of unity, and the
//! Gauss-sum unfolding identity that ties them together.
//!
//! A series of truncation M is a polynomial of degree < M in T = t - 1.
//! Such a polynomial expands uniquely over the binomial basis (1+T)^a,
//! a < M, so it is literally the measure `sum_a w_a delta_a` with integral
//! Dirac weights w_a; the exact distribution/twisting route goes through
//! those weights, while the Fourier route recomputes the same objects with
//! cyclotomic root-of-unity sums and the division by p^n performed only
//! after summation. The two routes staying equal is the point.

use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::characters::DirichletChar;
use crate::cyclotomic::{CycloContext, CycloElt};
use crate::error::{Error, Result};
use crate::padic::{PadicContext, PadicElt};

/// Ring operations shared by every coefficient type a series can carry.
pub trait Coeff: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul_u64(&self, k: u64) -> Self;
    fn is_zero(&self) -> bool;
    fn eq_joint(&self, o: &Self) -> bool;
}

impl Coeff for PadicElt {
    fn zero_like(&self) -> Self {
        PadicElt::zero(self.ctx())
    }
    fn one_like(&self) -> Self {
        PadicElt::one(self.ctx())
    }
    fn add(&self, o: &Self) -> Self {
        PadicElt::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        PadicElt::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        PadicElt::mul(self, o)
    }
    fn neg(&self) -> Self {
        PadicElt::neg(self)
    }
    fn mul_u64(&self, k: u64) -> Self {
        PadicElt::mul_u64(self, k)
    }
    fn is_zero(&self) -> bool {
        PadicElt::is_zero(self)
    }
    fn eq_joint(&self, o: &Self) -> bool {
        PadicElt::eq_joint(self, o)
    }
}

impl Coeff for CycloElt {
    fn zero_like(&self) -> Self {
        CycloElt::zero(self.ctx())
    }
    fn one_like(&self) -> Self {
        CycloElt::one(self.ctx())
    }
    fn add(&self, o: &Self) -> Self {
        CycloElt::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        CycloElt::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        CycloElt::mul(self, o)
    }
    fn neg(&self) -> Self {
        CycloElt::neg(self)
    }
    fn mul_u64(&self, k: u64) -> Self {
        CycloElt::mul_u64(self, k)
    }
    fn is_zero(&self) -> bool {
        CycloElt::is_zero(self)
    }
    fn eq_joint(&self, o: &Self) -> bool {
        CycloElt::eq_joint(self, o)
    }
}

/// Iwasawa-algebra coefficients: a series whose entries are themselves
/// ring elements multiplies by truncated convolution.
impl<C: Coeff> Coeff for PowerSeries<C> {
    fn zero_like(&self) -> Self {
        PowerSeries::zero(self.coeff(0), self.trunc())
    }
    fn one_like(&self) -> Self {
        PowerSeries::constant(self.coeff(0).one_like(), self.trunc())
    }
    fn add(&self, o: &Self) -> Self {
        PowerSeries::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        PowerSeries::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        PowerSeries::mul(self, o)
    }
    fn neg(&self) -> Self {
        PowerSeries::neg(self)
    }
    fn mul_u64(&self, k: u64) -> Self {
        PowerSeries { coeffs: self.coeffs.iter().map(|c| c.mul_u64(k)).collect() }
    }
    fn is_zero(&self) -> bool {
        PowerSeries::is_zero(self)
    }
    fn eq_joint(&self, o: &Self) -> bool {
        PowerSeries::eq_joint(self, o)
    }
}

impl Coeff for i128 {
    fn zero_like(&self) -> Self {
        0
    }
    fn one_like(&self) -> Self {
        1
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn mul_u64(&self, k: u64) -> Self {
        self * k as i128
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn eq_joint(&self, o: &Self) -> bool {
        self == o
    }
}

/// A truncated power series over `C`: the polynomial
/// `c_0 + c_1 T + ... + c_{M-1} T^{M-1}`. With the Lambda coefficient tag
/// (`C = PowerSeries<PadicElt>`) this is also the Iwasawa-algebra element
/// model.
#[derive(Debug, Clone)]
pub struct PowerSeries<C: Coeff> {
    coeffs: Vec<C>,
}

impl<C: Coeff> PowerSeries<C> {
    pub fn from_coeffs(coeffs: Vec<C>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::BadInput("series needs at least one coefficient".into()));
        }
        Ok(PowerSeries { coeffs })
    }

    pub fn zero(sample: &C, trunc: usize) -> Self {
        PowerSeries { coeffs: vec![sample.zero_like(); trunc.max(1)] }
    }

    pub fn constant(value: C, trunc: usize) -> Self {
        let mut s = Self::zero(&value, trunc);
        s.coeffs[0] = value;
        s
    }

    /// (1 + T) to an integer power: the Dirac measure at `a`.
    pub fn dirac(sample: &C, a: u64, trunc: usize) -> Self {
        let one = sample.one_like();
        let mut base = Self::zero(sample, trunc);
        base.coeffs[0] = one.clone();
        if trunc > 1 {
            base.coeffs[1] = one.clone();
        }
        let mut acc = Self::constant(one, trunc);
        let mut e = a;
        let mut b = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&b);
            }
            b = b.mul(&b);
            e >>= 1;
        }
        acc
    }

    pub fn trunc(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, i: usize) -> &C {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn add(&self, o: &Self) -> Self {
        let m = self.coeffs.len().min(o.coeffs.len());
        PowerSeries {
            coeffs: (0..m).map(|i| self.coeffs[i].add(&o.coeffs[i])).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let m = self.coeffs.len().min(o.coeffs.len());
        PowerSeries {
            coeffs: (0..m).map(|i| self.coeffs[i].sub(&o.coeffs[i])).collect(),
        }
    }

    pub fn scale(&self, s: &C) -> Self {
        PowerSeries { coeffs: self.coeffs.iter().map(|c| c.mul(s)).collect() }
    }

    pub fn neg(&self) -> Self {
        PowerSeries { coeffs: self.coeffs.iter().map(|c| c.neg()).collect() }
    }

    /// Truncated product.
    pub fn mul(&self, o: &Self) -> Self {
        let m = self.coeffs.len().min(o.coeffs.len());
        let zero = self.coeffs[0].zero_like();
        let mut out = vec![zero; m];
        for i in 0..self.coeffs.len().min(m) {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..o.coeffs.len() {
                if i + j >= m {
                    break;
                }
                out[i + j] = out[i + j].add(&self.coeffs[i].mul(&o.coeffs[j]));
            }
        }
        PowerSeries { coeffs: out }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn eq_joint(&self, o: &Self) -> bool {
        let m = self.coeffs.len().min(o.coeffs.len());
        (0..m).all(|i| self.coeffs[i].eq_joint(&o.coeffs[i]))
    }

    /// The invariant derivative D = (1+T) d/dT, applied m times.
    /// Truncation is unchanged; the operation is exact on polynomials.
    pub fn katz_d(&self, m: u32) -> Self {
        let mut cur = self.clone();
        for _ in 0..m {
            let n = cur.coeffs.len();
            let mut out = Vec::with_capacity(n);
            for j in 0..n {
                let from_deriv = if j + 1 < n {
                    cur.coeffs[j + 1].mul_u64(j as u64 + 1)
                } else {
                    cur.coeffs[0].zero_like()
                };
                let shifted = cur.coeffs[j].mul_u64(j as u64);
                out.push(from_deriv.add(&shifted));
            }
            cur = PowerSeries { coeffs: out };
        }
        cur
    }

    /// The m-th moment: the constant coefficient of D^m Phi.
    pub fn moment(&self, m: u32) -> Result<C> {
        if m as usize >= self.coeffs.len() {
            return Err(Error::Truncation { needed: m as usize, have: self.coeffs.len() });
        }
        Ok(self.katz_d(m).coeffs[0].clone())
    }

    /// Dirac weights: the unique expansion over the binomial basis,
    /// w_a = sum_j (-1)^{j-a} C(j, a) c_j. Exact integer transform.
    pub fn dirac_weights(&self) -> Result<Vec<C>> {
        let m = self.coeffs.len();
        if m > 64 {
            return Err(Error::BoundExceeded("binomial transform limited to M <= 64".into()));
        }
        let mut out = Vec::with_capacity(m);
        for a in 0..m {
            let mut acc = self.coeffs[0].zero_like();
            // binom(j, a) built incrementally from j = a
            let mut b: u128 = 1;
            for j in a..m {
                let term = self.coeffs[j].mul_u64(b as u64);
                if (j - a) % 2 == 0 {
                    acc = acc.add(&term);
                } else {
                    acc = acc.sub(&term);
                }
                // binom(j+1, a) = binom(j, a) * (j+1) / (j+1-a)
                b = b * (j as u128 + 1) / (j as u128 + 1 - a as u128);
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Rebuild the series from Dirac weights: sum_a w_a (1+T)^a.
    pub fn from_dirac_weights(weights: &[C], trunc: usize) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::BadInput("empty weight vector".into()));
        }
        if weights.len() > 64 {
            return Err(Error::BoundExceeded("binomial transform limited to M <= 64".into()));
        }
        let zero = weights[0].zero_like();
        let mut coeffs = vec![zero; trunc.max(1)];
        for (a, w) in weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let mut b: u128 = 1;
            for j in 0..=a.min(trunc - 1) {
                coeffs[j] = coeffs[j].add(&w.mul_u64(b as u64));
                if j < a {
                    b = b * (a as u128 - j as u128) / (j as u128 + 1);
                }
            }
        }
        PowerSeries::from_coeffs(coeffs)
    }

    /// The reduction mod (1+T)^{p^n} - 1: fold Dirac weights along
    /// a -> a mod p^n.
    pub fn reduce_mod_level(&self, p: u64, n: u32) -> Result<Self> {
        let pn = (0..n).fold(1u64, |a, _| a * p) as usize;
        let w = self.dirac_weights()?;
        let mut folded = vec![self.coeffs[0].zero_like(); pn.min(w.len())];
        for (a, wa) in w.iter().enumerate() {
            let b = a % pn;
            if b < folded.len() {
                folded[b] = folded[b].add(wa);
            }
        }
        Self::from_dirac_weights(&folded, self.trunc())
    }

    /// The binomial series (1+T)^s for a p-adic exponent: coefficients
    /// C(s, j) = s(s-1)...(s-j+1)/j!.
    pub fn binomial_series(s: &PadicElt, trunc: usize) -> Result<PowerSeries<PadicElt>> {
        let ctx = s.ctx().clone();
        let one = PadicElt::one(&ctx);
        let mut coeffs = Vec::with_capacity(trunc.max(1));
        coeffs.push(one.clone());
        let mut num = one.clone();
        let mut vp_fact = 0u32;
        let mut fact_unit = one;
        for j in 1..trunc.max(1) {
            let factor = s.sub(&PadicElt::from_u64(&ctx, j as u64 - 1));
            num = num.mul(&factor);
            let mut t = j as u64;
            while t % ctx.p == 0 {
                t /= ctx.p;
                vp_fact += 1;
            }
            fact_unit = fact_unit.mul(&PadicElt::from_u64(&ctx, t));
            let c = num.try_div_p_pow(vp_fact)?.mul(&fact_unit.inv()?);
            coeffs.push(c);
        }
        Ok(PowerSeries { coeffs })
    }
}

/// A level-n distribution table: value at b represents mu(b + p^n Z_p).
#[derive(Debug, Clone)]
pub struct Distribution<C: Coeff> {
    pub p: u64,
    pub level: u32,
    pub table: Vec<C>,
}

impl<C: Coeff> Distribution<C> {
    pub fn new(p: u64, level: u32, table: Vec<C>) -> Result<Self> {
        let pn = (0..level).fold(1u64, |a, _| a * p) as usize;
        if table.len() != pn {
            return Err(Error::BadInput(format!(
                "level-{level} table must have p^n = {pn} entries"
            )));
        }
        Ok(Distribution { p, level, table })
    }

    /// Sum the fibers down to a coarser level (the distribution property).
    pub fn fold_to(&self, level: u32) -> Result<Self> {
        if level > self.level {
            return Err(Error::BadInput("can only fold to a coarser level".into()));
        }
        let pm = (0..level).fold(1u64, |a, _| a * self.p) as usize;
        let mut table = vec![self.table[0].zero_like(); pm];
        for (b, v) in self.table.iter().enumerate() {
            table[b % pm] = table[b % pm].add(v);
        }
        Ok(Distribution { p: self.p, level, table })
    }
}

/// Exact level-n distribution of a series, through Dirac weights.
pub fn distribution_exact<C: Coeff>(
    s: &PowerSeries<C>,
    p: u64,
    n: u32,
) -> Result<Distribution<C>> {
    let pn = (0..n).fold(1u64, |a, _| a * p) as usize;
    let w = s.dirac_weights()?;
    let mut table = vec![s.coeff(0).zero_like(); pn];
    for (a, wa) in w.iter().enumerate() {
        table[a % pn] = table[a % pn].add(wa);
    }
    Ok(Distribution { p, level: n, table })
}

/// Series of a distribution: Phi = sum_b d(b) (1+T)^b, truncated to M.
/// Exact (no division); lossless when M >= p^n.
pub fn series_from_distribution<C: Coeff>(
    d: &Distribution<C>,
    trunc: usize,
) -> Result<PowerSeries<C>> {
    PowerSeries::from_dirac_weights(&d.table, trunc)
}

/// The Fourier-inversion route to the level-n table:
/// d(b) = p^{-n} sum_{zeta} zeta^{-b} Phi(zeta - 1), computed in the
/// cyclotomic layer with the division performed after summation.
pub fn distribution_from_series(
    s: &PowerSeries<PadicElt>,
    ctx: &Arc<CycloContext>,
    n: u32,
) -> Result<Distribution<PadicElt>> {
    if ctx.n != n {
        return Err(Error::CtxMismatch("cyclotomic level must equal the table level".into()));
    }
    let p = ctx.base().p;
    let pn = (0..n).fold(1u64, |a, _| a * p);
    let sc = embed_series(s, ctx);
    // evaluate at every zeta^j - 1
    let evals: Vec<CycloElt> = (0..pn)
        .map(|j| {
            let pt = CycloElt::zeta_pow(ctx, j as i64).sub(&CycloElt::one(ctx));
            eval_series_at(&sc, &pt)
        })
        .collect();
    let mut table = Vec::with_capacity(pn as usize);
    for b in 0..pn {
        let mut sum = CycloElt::zero(ctx);
        for (j, v) in evals.iter().enumerate() {
            let w = CycloElt::zeta_pow(ctx, -((b * j as u64) as i64));
            sum = sum.add(&w.mul(v));
        }
        let divided = sum.try_div_p_pow(n)?;
        table.push(divided.descend_to_base()?);
    }
    Distribution::new(p, n, table)
}

/// Horner evaluation of a cyclotomic-coefficient polynomial.
pub fn eval_series_at(s: &PowerSeries<CycloElt>, point: &CycloElt) -> CycloElt {
    let mut acc = CycloElt::zero(point.ctx());
    for c in s.coeffs().iter().rev() {
        acc = acc.mul(point).add(c);
    }
    acc
}

/// Coefficientwise embedding of a base series into a cyclotomic layer.
pub fn embed_series(s: &PowerSeries<PadicElt>, ctx: &Arc<CycloContext>) -> PowerSeries<CycloElt> {
    PowerSeries::from_coeffs(
        s.coeffs().iter().map(|c| CycloElt::from_base(ctx, c)).collect(),
    )
    .expect("nonempty")
}

/// (D^m Phi)(zeta^u - 1): the value of the m-th derivative at the level-n
/// root labeled u.
pub fn eval_at_root(
    s: &PowerSeries<PadicElt>,
    ctx: &Arc<CycloContext>,
    u: u64,
    m: u32,
) -> Result<CycloElt> {
    if m as usize >= s.trunc() {
        return Err(Error::Truncation { needed: m as usize, have: s.trunc() });
    }
    let d = s.katz_d(m);
    let sc = embed_series(&d, ctx);
    let pt = CycloElt::zeta_pow(ctx, u as i64).sub(&CycloElt::one(ctx));
    Ok(eval_series_at(&sc, &pt))
}

/// Pointwise twist through the exact distribution route: multiply the
/// Dirac weights by phi(a mod p^n). Exact.
pub fn twist_pointwise<C: Coeff>(
    s: &PowerSeries<C>,
    phi: &[C],
    p: u64,
    n: u32,
) -> Result<PowerSeries<C>> {
    let pn = (0..n).fold(1u64, |a, _| a * p) as usize;
    if phi.len() != pn {
        return Err(Error::BadInput(format!("phi table must have p^n = {pn} entries")));
    }
    let w = s.dirac_weights()?;
    let tw: Vec<C> = w
        .iter()
        .enumerate()
        .map(|(a, wa)| wa.mul(&phi[a % pn]))
        .collect();
    PowerSeries::from_dirac_weights(&tw, s.trunc())
}

/// The displayed Fourier twist
/// [phi]Phi(t) = p^{-n} sum_b phi(b) sum_zeta zeta^{-b} Phi(zeta t),
/// computed with the substitution T -> (zeta^u - 1) + zeta^u T in the
/// cyclotomic layer, summed, divided by p^n after summation.
pub fn twist_fourier_cyclo(
    s: &PowerSeries<CycloElt>,
    phi: &[CycloElt],
    ctx: &Arc<CycloContext>,
) -> Result<PowerSeries<CycloElt>> {
    let p = ctx.base().p;
    let n = ctx.n;
    let pn = (0..n).fold(1u64, |a, _| a * p);
    if phi.len() != pn as usize {
        return Err(Error::BadInput(format!("phi table must have p^n = {pn} entries")));
    }
    let trunc = s.trunc();
    let mut total = PowerSeries::zero(s.coeff(0), trunc);
    for u in 0..pn {
        // W_u = sum_b phi(b) zeta^{-ub}
        let mut w = CycloElt::zero(ctx);
        for (b, ph) in phi.iter().enumerate() {
            if ph.is_zero() {
                continue;
            }
            w = w.add(&ph.mul(&CycloElt::zeta_pow(ctx, -((u * b as u64) as i64))));
        }
        if w.is_zero() {
            continue;
        }
        // Phi(zeta^u t): T -> A + B T with A = zeta^u - 1, B = zeta^u
        let b_lin = CycloElt::zeta_pow(ctx, u as i64);
        let a_lin = b_lin.sub(&CycloElt::one(ctx));
        let mut acc = PowerSeries::zero(s.coeff(0), trunc);
        for c in s.coeffs().iter().rev() {
            // acc <- acc * (A + B T) + c
            let mut next: Vec<CycloElt> = vec![CycloElt::zero(ctx); trunc];
            for (j, ac) in acc.coeffs().iter().enumerate() {
                if ac.is_zero() {
                    continue;
                }
                next[j] = next[j].add(&ac.mul(&a_lin));
                if j + 1 < trunc {
                    next[j + 1] = next[j + 1].add(&ac.mul(&b_lin));
                }
            }
            next[0] = next[0].add(c);
            acc = PowerSeries::from_coeffs(next)?;
        }
        total = total.add(&acc.scale(&w));
    }
    let coeffs = total
        .coeffs()
        .iter()
        .map(|c| c.try_div_p_pow(n))
        .collect::<Result<Vec<_>>>()?;
    PowerSeries::from_coeffs(coeffs)
}

/// Fourier twist of a base series by a base-valued table, descended back
/// to the base ring.
pub fn twist_fourier(
    s: &PowerSeries<PadicElt>,
    phi: &[PadicElt],
    ctx: &Arc<CycloContext>,
) -> Result<PowerSeries<PadicElt>> {
    let sc = embed_series(s, ctx);
    let phic: Vec<CycloElt> = phi.iter().map(|v| CycloElt::from_base(ctx, v)).collect();
    let out = twist_fourier_cyclo(&sc, &phic, ctx)?;
    let coeffs = out
        .coeffs()
        .iter()
        .map(|c| c.descend_to_base())
        .collect::<Result<Vec<_>>>()?;
    PowerSeries::from_coeffs(coeffs)
}

/// Assemble a series from its first moments: c_n = (1/n!) sum_m s(n, m) m_m
/// with signed Stirling numbers of the first kind. Declared precision drops
/// by v_p(n!) per coefficient.
pub fn from_moments(moments: &[PadicElt]) -> Result<PowerSeries<PadicElt>> {
    if moments.is_empty() {
        return Err(Error::BadInput("need at least one moment".into()));
    }
    let ctx = moments[0].ctx().clone();
    let l = moments.len();
    let modulus = ctx.p_pow(ctx.prec_n);
    // signed Stirling numbers s(n, m) mod p^N: s(n+1, m) = s(n, m-1) - n s(n, m)
    let mut stirling = vec![vec![0u64; l]; l];
    stirling[0][0] = 1;
    for n in 1..l {
        for m in 0..l {
            let prev = if m == 0 { 0 } else { stirling[n - 1][m - 1] };
            let sub = ((n as u64 - 1) as u128 * stirling[n - 1][m] as u128 % modulus as u128)
                as u64;
            stirling[n][m] = (prev + modulus - sub) % modulus;
        }
    }
    let mut coeffs = Vec::with_capacity(l);
    let mut vp_fact = 0u32;
    let mut fact_unit = PadicElt::one(&ctx);
    for n in 0..l {
        if n > 0 {
            let mut t = n as u64;
            while t % ctx.p == 0 {
                t /= ctx.p;
                vp_fact += 1;
            }
            fact_unit = fact_unit.mul(&PadicElt::from_u64(&ctx, t));
        }
        let mut acc = PadicElt::zero(&ctx);
        for (m, mom) in moments.iter().enumerate() {
            if stirling[n][m] != 0 {
                acc = acc.add(&mom.mul_u64(stirling[n][m]));
            }
        }
        let c = acc.try_div_p_pow(vp_fact)?.mul(&fact_unit.inv()?);
        if c.prec() == 0 {
            return Err(Error::PrecisionExhausted);
        }
        coeffs.push(c);
    }
    PowerSeries::from_coeffs(coeffs)
}

/// Support of a measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    All,
    Units,
}

/// A bounded measure on Z_p: the Amice series plus a support flag.
#[derive(Debug, Clone)]
pub struct Measure {
    pub series: PowerSeries<PadicElt>,
    pub support: Support,
}

impl Measure {
    pub fn from_series(series: PowerSeries<PadicElt>, p: u64) -> Result<Self> {
        let support = if is_unit_supported(&series, p, 1)? { Support::Units } else { Support::All };
        Ok(Measure { series, support })
    }

    /// Restriction to Z_p^x: twist by the unit indicator.
    pub fn restrict_to_units(&self, p: u64) -> Result<Measure> {
        let one = self.series.coeff(0).one_like();
        let zero = one.zero_like();
        let phi: Vec<PadicElt> =
            (0..p).map(|b| if b == 0 { zero.clone() } else { one.clone() }).collect();
        let series = twist_pointwise(&self.series, &phi, p, 1)?;
        Ok(Measure { series, support: Support::Units })
    }

    pub fn distribution(&self, p: u64, n: u32) -> Result<Distribution<PadicElt>> {
        distribution_exact(&self.series, p, n)
    }
}

/// Does the level-n table vanish on p | b?
pub fn is_unit_supported(s: &PowerSeries<PadicElt>, p: u64, n: u32) -> Result<bool> {
    let d = distribution_exact(s, p, n)?;
    Ok(d.table.iter().enumerate().all(|(b, v)| b as u64 % p != 0 || v.is_zero()))
}

/// Both sides of the Gauss-sum unfolding of a twisted moment.
#[derive(Debug, Clone)]
pub struct IntegrationCheck {
    pub lhs: CycloElt,
    pub rhs: CycloElt,
    pub agree: bool,
}

/// The unfolding identity for a primitive character phi of conductor p^n:
///
///   int phi(x) x^m dmu  =  p^{-n} G(phi) sum_u phi^{-1}(-u) (D^m Phi)(zeta^u - 1)
///
/// The left side goes through the exact twist-then-moment route; the right
/// side through Horner evaluations at roots of unity and the Gauss sum,
/// dividing by p^n only after the full product-sum. Both sides are returned
/// along with their equality at joint precision.
pub fn integration_identity_check(
    s: &PowerSeries<PadicElt>,
    chi: &DirichletChar,
    m: u32,
    ctx: &Arc<CycloContext>,
) -> Result<IntegrationCheck> {
    if !chi.is_primitive() || chi.n == 0 {
        return Err(Error::NotPrimitiveChar);
    }
    if ctx.n != chi.n {
        return Err(Error::CtxMismatch("cyclotomic level must equal the conductor".into()));
    }
    let p = ctx.base().p;
    let n = chi.n;
    let pn = (0..n).fold(1u64, |a, _| a * p);

    // lhs: twist by phi pointwise (weights route), rebuild, take moment m
    let phi_table: Vec<CycloElt> = (0..pn)
        .map(|b| {
            if b % p == 0 {
                Ok(CycloElt::zero(ctx))
            } else {
                chi.eval(b)?.embed_cyclo(ctx)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let sc = embed_series(s, ctx);
    let twisted = twist_pointwise(&sc, &phi_table, p, n)?;
    let lhs = twisted.moment(m)?;

    // rhs: Gauss-sum unfolding
    let chi_inv = chi.inverse();
    let gauss = crate::characters::gauss_sum(chi, ctx)?;
    let mut sum = CycloElt::zero(ctx);
    for u in 1..pn {
        if u % p == 0 {
            continue;
        }
        let neg_u = pn - u;
        let c = chi_inv.eval(neg_u)?.embed_cyclo(ctx)?;
        let ev = eval_at_root(s, ctx, u, m)?;
        sum = sum.add(&c.mul(&ev));
    }
    let rhs = gauss.mul(&sum).try_div_p_pow(n)?;
    let agree = lhs.eq_joint(&rhs);
    Ok(IntegrationCheck { lhs, rhs, agree })
}

/// Seeded random series with full-precision uniform coefficients.
pub fn random_series(ctx: &Arc<PadicContext>, trunc: usize, seed: u64) -> PowerSeries<PadicElt> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let modulus = ctx.p_pow(ctx.prec_n);
    let coeffs = (0..trunc.max(1))
        .map(|_| PadicElt::from_u64(ctx, rng.next_u64() % modulus))
        .collect();
    PowerSeries::from_coeffs(coeffs).expect("nonempty")
}
