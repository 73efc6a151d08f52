//! Arithmetic in Z_p[zeta_{p^n}], totally ramified of degree e = p^{n-1}(p-1)
//! over the unramified base, presented in the power basis of the uniformizer
//! pi = zeta_{p^n} - 1.
//!
//! The pi-power basis makes the valuation computable coefficientwise: the
//! terms c_i pi^i have pairwise distinct valuations mod e, so
//! v_pi(sum c_i pi^i) = min_i (i + e v_p(c_i)). In particular a sum is
//! divisible by p^k exactly when every coefficient is, which is how the
//! division-after-summation rule for root-of-unity averages is enforced.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::padic::{PadicContext, PadicElt};

/// Context for the level-n cyclotomic layer over an unramified base.
pub struct CycloContext {
    base: Arc<PadicContext>,
    /// Level: the ring contains a fixed primitive p^n-th root of unity.
    pub n: u32,
    /// Ramification degree p^{n-1}(p-1) = deg of the layer over the base.
    pub e: usize,
    /// Reduction rows: pi^{e+i} as a scalar-coefficient vector, i = 0..e-2.
    red: Vec<Vec<u64>>,
}

impl fmt::Debug for CycloContext {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "CycloContext(p={}, n={}, e={})", self.base.p, self.n, self.e)
    }
}

impl CycloContext {
    pub fn new(base: &Arc<PadicContext>, n: u32) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::BadInput("cyclotomic level must be >= 1".into()));
        }
        let p = base.p;
        let pn_minus = (0..n - 1).fold(1u64, |a, _| a * p);
        let e64 = pn_minus * (p - 1);
        if e64 > 4096 {
            return Err(Error::BoundExceeded(format!("ramification degree {e64}")));
        }
        let e = e64 as usize;
        let pn = pn_minus * p;
        let modulus = base.p_pow(base.prec_n);

        // Phi_{p^n}(1+pi) = sum_{i<p} (1+pi)^{i p^{n-1}}, a monic integer
        // polynomial of degree e in pi; expand with a Pascal triangle mod p^N.
        let mut binom = vec![vec![0u64; pn as usize + 1]; pn as usize + 1];
        for r in 0..=(pn as usize) {
            binom[r][0] = 1;
            for c in 1..=r {
                binom[r][c] = (binom[r - 1][c - 1] + binom[r - 1].get(c).copied().unwrap_or(0))
                    % modulus;
            }
        }
        let mut phi = vec![0u64; e + 1];
        for i in 0..p {
            let exp = (i * pn_minus) as usize;
            for j in 0..=exp.min(e) {
                phi[j] = (phi[j] + binom[exp][j]) % modulus;
            }
        }
        debug_assert_eq!(phi[e], 1);

        let mut red: Vec<Vec<u64>> = Vec::with_capacity(e.max(1) - 1);
        let row0: Vec<u64> = phi[..e].iter().map(|&c| (modulus - c % modulus) % modulus).collect();
        red.push(row0);
        for i in 1..e.saturating_sub(1) {
            let prev = red[i - 1].clone();
            let mut row = vec![0u64; e];
            let top = prev[e - 1];
            for j in 0..e - 1 {
                row[j + 1] = prev[j];
            }
            for j in 0..e {
                row[j] = (row[j] + mulmod(top, red[0][j], modulus)) % modulus;
            }
            red.push(row);
        }

        Ok(Arc::new(CycloContext { base: Arc::clone(base), n, e, red }))
    }

    pub fn base(&self) -> &Arc<PadicContext> {
        &self.base
    }

    /// Full pi-adic precision carried by fresh elements: e * N.
    pub fn pi_prec_default(&self) -> u32 {
        self.e as u32 * self.base.prec_n
    }

    pub fn p_pow_n(&self) -> u64 {
        (0..self.n).fold(1u64, |a, _| a * self.base.p)
    }
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// Element of the level-n layer in the pi-power basis.
#[derive(Clone)]
pub struct CycloElt {
    ctx: Arc<CycloContext>,
    coeffs: Vec<PadicElt>,
}

impl fmt::Debug for CycloElt {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "Cyclo[n={}]{:?}", self.ctx.n, self.coeffs)
    }
}

impl CycloElt {
    pub fn ctx(&self) -> &Arc<CycloContext> {
        &self.ctx
    }

    pub fn coeffs(&self) -> &[PadicElt] {
        &self.coeffs
    }

    pub fn zero(ctx: &Arc<CycloContext>) -> Self {
        let z = PadicElt::zero(ctx.base());
        CycloElt { ctx: Arc::clone(ctx), coeffs: vec![z; ctx.e] }
    }

    pub fn one(ctx: &Arc<CycloContext>) -> Self {
        Self::from_base(ctx, &PadicElt::one(ctx.base()))
    }

    pub fn from_base(ctx: &Arc<CycloContext>, x: &PadicElt) -> Self {
        let mut out = Self::zero(ctx);
        out.coeffs[0] = x.clone();
        out
    }

    pub fn from_u64(ctx: &Arc<CycloContext>, v: u64) -> Self {
        Self::from_base(ctx, &PadicElt::from_u64(ctx.base(), v))
    }

    pub fn from_coeffs(ctx: &Arc<CycloContext>, coeffs: Vec<PadicElt>) -> Result<Self> {
        if coeffs.len() != ctx.e {
            return Err(Error::BadInput("coefficient vector length != e".into()));
        }
        Ok(CycloElt { ctx: Arc::clone(ctx), coeffs })
    }

    /// The fixed primitive p^n-th root of unity 1 + pi.
    pub fn zeta(ctx: &Arc<CycloContext>) -> Self {
        let mut out = Self::one(ctx);
        if ctx.e > 1 {
            out.coeffs[1] = PadicElt::one(ctx.base());
        } else {
            // e = 1 cannot happen: p odd means e = p^{n-1}(p-1) >= 2
            unreachable!("ramification degree is at least 2 for odd p");
        }
        out
    }

    /// zeta^j, reducing j mod p^n first ((1+pi)^{p^n} = 1 exactly).
    pub fn zeta_pow(ctx: &Arc<CycloContext>, j: i64) -> Self {
        let pn = ctx.p_pow_n() as i64;
        let j = ((j % pn) + pn) % pn;
        Self::zeta(ctx).pow_u64(j as u64)
    }

    pub fn add(&self, other: &Self) -> Self {
        let coeffs =
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect();
        CycloElt { ctx: Arc::clone(&self.ctx), coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let coeffs =
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.sub(b)).collect();
        CycloElt { ctx: Arc::clone(&self.ctx), coeffs }
    }

    pub fn neg(&self) -> Self {
        let coeffs = self.coeffs.iter().map(|a| a.neg()).collect();
        CycloElt { ctx: Arc::clone(&self.ctx), coeffs }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let e = self.ctx.e;
        let zero = PadicElt::zero(self.ctx.base());
        let mut prod = vec![zero; 2 * e - 1];
        for i in 0..e {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..e {
                if other.coeffs[j].is_zero() {
                    continue;
                }
                let t = self.coeffs[i].mul(&other.coeffs[j]);
                prod[i + j] = prod[i + j].add(&t);
            }
        }
        for d in (e..2 * e - 1).rev() {
            if prod[d].is_zero() {
                continue;
            }
            let c = prod[d].clone();
            let row = &self.ctx.red[d - e];
            for j in 0..e {
                if row[j] != 0 {
                    prod[j] = prod[j].add(&c.mul_u64(row[j]));
                }
            }
        }
        prod.truncate(e);
        CycloElt { ctx: Arc::clone(&self.ctx), coeffs: prod }
    }

    pub fn mul_base(&self, s: &PadicElt) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.mul(s)).collect();
        CycloElt { ctx: Arc::clone(&self.ctx), coeffs }
    }

    pub fn mul_u64(&self, k: u64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.mul_u64(k)).collect();
        CycloElt { ctx: Arc::clone(&self.ctx), coeffs }
    }

    pub fn pow_u64(&self, mut e: u64) -> Self {
        let mut acc = Self::one(&self.ctx);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Inverse of a unit (pi-valuation 0), by Newton iteration from the
    /// residue-field inverse of the constant coefficient.
    pub fn inv(&self) -> Result<Self> {
        if self.pi_val() != Some(0) {
            return Err(Error::NonUnit);
        }
        let mut x = Self::from_base(&self.ctx, &self.coeffs[0].inv()?);
        let steps = 64 - (self.pi_prec() as u64).leading_zeros() + 1;
        let two = Self::from_u64(&self.ctx, 2);
        for _ in 0..steps {
            // x <- x (2 - a x)
            let t = two.sub(&self.mul(&x));
            x = x.mul(&t);
        }
        Ok(x)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn eq_joint(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }

    /// pi-adic valuation: min_i (i + e v_p(c_i)); None when zero to the
    /// declared precision.
    pub fn pi_val(&self) -> Option<u32> {
        let e = self.ctx.e as u32;
        let mut best: Option<u32> = None;
        for (i, c) in self.coeffs.iter().enumerate() {
            if let Some(v) = c.val() {
                let w = i as u32 + e * v;
                best = Some(best.map_or(w, |b| b.min(w)));
            }
        }
        best
    }

    /// Declared pi-adic precision: min_i (i + e prec(c_i)).
    pub fn pi_prec(&self) -> u32 {
        let e = self.ctx.e as u32;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| i as u32 + e * c.prec())
            .min()
            .unwrap()
    }

    /// Exact division by p^k: every coefficient must be divisible. On
    /// failure reports the pi-adic deficit k*e - v_pi.
    pub fn try_div_p_pow(&self, k: u32) -> Result<Self> {
        let need = k * self.ctx.e as u32;
        match self.pi_val() {
            Some(v) if v < need => {
                return Err(Error::PrecisionLoss { deficit: (need - v) as i64 })
            }
            None if self.pi_prec() < need => return Err(Error::PrecisionExhausted),
            _ => {}
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| c.try_div_p_pow(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(CycloElt { ctx: Arc::clone(&self.ctx), coeffs })
    }

    /// Drop down to the unramified base ring. Errors with `NotRational` if
    /// some pi^i coefficient (i >= 1) is nonzero to its declared precision.
    pub fn descend_to_base(&self) -> Result<PadicElt> {
        for c in &self.coeffs[1..] {
            if !c.is_zero() {
                return Err(Error::NotRational);
            }
        }
        let prec = (self.pi_prec() / self.ctx.e as u32).max(1);
        Ok(self.coeffs[0].reduce_prec(prec))
    }

    /// Canonical inclusion from a lower level: pi_m maps to
    /// (1+pi_n)^{p^{n-m}} - 1.
    pub fn embed_from_lower(ctx: &Arc<CycloContext>, x: &CycloElt) -> Result<Self> {
        let m = x.ctx.n;
        if m > ctx.n {
            return Err(Error::CtxMismatch(format!("cannot embed level {} into {}", m, ctx.n)));
        }
        if m == ctx.n {
            return CycloElt::from_coeffs(ctx, x.coeffs.clone());
        }
        let shift = (0..(ctx.n - m)).fold(1u64, |a, _| a * ctx.base.p);
        let b = Self::zeta_pow(ctx, shift as i64).sub(&Self::one(ctx));
        // Horner over the lower coefficients
        let mut acc = Self::zero(ctx);
        for c in x.coeffs.iter().rev() {
            acc = acc.mul(&b).add(&Self::from_base(ctx, c));
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lvl(n: u32, prec: u32) -> Arc<CycloContext> {
        let base = PadicContext::new(5, prec).unwrap();
        CycloContext::new(&base, n).unwrap()
    }

    #[test]
    fn zeta_has_exact_order() {
        for n in [1u32, 2] {
            let ctx = lvl(n, 4);
            let pn = ctx.p_pow_n();
            let z = CycloElt::zeta(&ctx);
            assert!(z.pow_u64(pn).eq_joint(&CycloElt::one(&ctx)), "n = {n}");
            assert!(!z.pow_u64(pn / 5).eq_joint(&CycloElt::one(&ctx)));
        }
    }

    #[test]
    fn zeta_pow_wraps() {
        let ctx = lvl(2, 4);
        assert!(CycloElt::zeta_pow(&ctx, 0).eq_joint(&CycloElt::one(&ctx)));
        assert!(CycloElt::zeta_pow(&ctx, 25).eq_joint(&CycloElt::one(&ctx)));
        assert!(CycloElt::zeta_pow(&ctx, -1)
            .eq_joint(&CycloElt::zeta_pow(&ctx, 24)));
    }

    #[test]
    fn full_root_sum_vanishes() {
        for n in [1u32, 2] {
            let ctx = lvl(n, 4);
            let mut s = CycloElt::zero(&ctx);
            for j in 0..ctx.p_pow_n() {
                s = s.add(&CycloElt::zeta_pow(&ctx, j as i64));
            }
            assert!(s.is_zero(), "n = {n}");
        }
    }

    #[test]
    fn pi_valuations() {
        let ctx = lvl(2, 4);
        let e = ctx.e as u32;
        assert_eq!(CycloElt::from_u64(&ctx, 5).pi_val(), Some(e));
        let one = CycloElt::one(&ctx);
        let z1 = CycloElt::zeta_pow(&ctx, 1).sub(&one);
        assert_eq!(z1.pi_val(), Some(1));
        // zeta^2 - 1 = (zeta - 1)(zeta + 1), second factor a unit for p odd
        let z2 = CycloElt::zeta_pow(&ctx, 2).sub(&one);
        assert_eq!(z2.pi_val(), Some(1));
        assert_eq!(CycloElt::zero(&ctx).pi_val(), None);
    }

    #[test]
    fn valuation_is_multiplicative() {
        let ctx = lvl(2, 4);
        let one = CycloElt::one(&ctx);
        let a = CycloElt::zeta_pow(&ctx, 3).sub(&one);
        let b = CycloElt::from_u64(&ctx, 5).mul(&CycloElt::zeta_pow(&ctx, 7));
        let va = a.pi_val().unwrap();
        let vb = b.pi_val().unwrap();
        assert_eq!(a.mul(&b).pi_val(), Some(va + vb));
        let s = a.add(&b);
        assert!(s.pi_val().unwrap() >= va.min(vb));
    }

    #[test]
    fn descend_examples() {
        let ctx = lvl(2, 4);
        let x = CycloElt::from_u64(&ctx, 3);
        assert_eq!(x.descend_to_base().unwrap().to_u64().unwrap(), 3);
        let z1 = CycloElt::zeta_pow(&ctx, 1).sub(&CycloElt::one(&ctx));
        assert!(matches!(z1.descend_to_base(), Err(Error::NotRational)));
    }

    #[test]
    fn division_after_summation() {
        let ctx = lvl(1, 4);
        // sum over all 5th roots of zeta^{ab}: 5 when 5 | a, else 0;
        // dividing by 5 is exact either way
        for a in [0i64, 2] {
            let mut s = CycloElt::zero(&ctx);
            for b in 0..5 {
                s = s.add(&CycloElt::zeta_pow(&ctx, a * b));
            }
            let d = s.try_div_p_pow(1).unwrap();
            let expect = if a == 0 { 1 } else { 0 };
            assert_eq!(d.descend_to_base().unwrap().to_u64().unwrap(), expect);
        }
        // a genuinely non-divisible element reports its deficit
        let bad = CycloElt::one(&ctx);
        match bad.try_div_p_pow(1) {
            Err(Error::PrecisionLoss { deficit }) => assert_eq!(deficit, 4),
            other => panic!("expected PrecisionLoss, got {other:?}"),
        }
    }

    #[test]
    fn tower_compatibility() {
        let base = PadicContext::new(5, 4).unwrap();
        let lo = CycloContext::new(&base, 1).unwrap();
        let hi = CycloContext::new(&base, 2).unwrap();
        let zlo = CycloElt::zeta(&lo);
        let up = CycloElt::embed_from_lower(&hi, &zlo).unwrap();
        assert!(up.eq_joint(&CycloElt::zeta_pow(&hi, 5)));
        // embedding is a ring map on a sample product
        let a = CycloElt::zeta_pow(&lo, 2).add(&CycloElt::from_u64(&lo, 3));
        let b = CycloElt::zeta_pow(&lo, 4).sub(&CycloElt::from_u64(&lo, 1));
        let lhs = CycloElt::embed_from_lower(&hi, &a.mul(&b)).unwrap();
        let rhs = CycloElt::embed_from_lower(&hi, &a)
            .unwrap()
            .mul(&CycloElt::embed_from_lower(&hi, &b).unwrap());
        assert!(lhs.eq_joint(&rhs));
    }

    #[test]
    fn base_precision_roundtrip() {
        let ctx = lvl(2, 4);
        let x = CycloElt::from_u64(&ctx, 17);
        assert_eq!(x.pi_prec(), ctx.pi_prec_default());
        assert_eq!(x.descend_to_base().unwrap().prec(), 4);
    }
}
