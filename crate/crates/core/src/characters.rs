//! Characters: Dirichlet characters of p-power modulus, Gauss sums,
//! finite-order characters of ring class groups, p-adic avatars on units,
//! the conductor-recipe validator, and the critical square-root character
//! theta with theta^2(z) = [z].
//!
//! Character values are kept abstract as [`UnityRoot`]s (a tame part of
//! order dividing p^f - 1 and a wild part of p-power order) and embedded
//! into the working rings only at the edges. The embedding is coherent:
//! zeta_d for d | p^f - 1 is a fixed power of one Teichmueller generator
//! whose (p-1)-part is the lift of the smallest primitive root mod p.

use std::sync::Arc;

use crate::cyclotomic::{CycloContext, CycloElt};
use crate::error::{Error, Result};
use crate::measure::PowerSeries;
use crate::padic::{decompose_unit, gamma_pow, PadicContext, PadicElt};
use crate::quadratic::{FormClass, RingClassGroup};

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = ((acc as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        e >>= 1;
    }
    acc
}

fn inv_mod(a: u64, m: u64) -> u64 {
    // m small; extended Euclid
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    debug_assert_eq!(r0, 1);
    t0.rem_euclid(m as i128) as u64
}

/// An abstract root of unity zeta_tame^a * zeta_{p^s}^w, normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnityRoot {
    pub tame_num: u64,
    pub tame_ord: u64,
    pub wild_num: u64,
    /// wild order as p^level; level 0 means trivial wild part
    pub wild_level: u32,
    pub p: u64,
}

impl UnityRoot {
    pub fn one(p: u64) -> Self {
        UnityRoot { tame_num: 0, tame_ord: 1, wild_num: 0, wild_level: 0, p }
    }

    fn normalize(mut self) -> Self {
        self.tame_num %= self.tame_ord;
        let g = gcd(self.tame_num, self.tame_ord).max(1);
        if self.tame_num == 0 {
            self.tame_ord = 1;
        } else {
            self.tame_num /= g;
            self.tame_ord /= g;
        }
        let mut wo = (0..self.wild_level).fold(1u64, |a, _| a * self.p);
        self.wild_num %= wo;
        while self.wild_level > 0 && self.wild_num % self.p == 0 {
            self.wild_num /= self.p;
            self.wild_level -= 1;
            wo /= self.p;
        }
        if self.wild_num == 0 {
            self.wild_level = 0;
        }
        self
    }

    /// zeta of exact order `ord` (p-part split off automatically), to the
    /// power `num`.
    pub fn root_of_order(p: u64, ord: u64, num: u64) -> Self {
        let mut tame = ord;
        let mut level = 0u32;
        let mut wo = 1u64;
        while tame % p == 0 {
            tame /= p;
            level += 1;
            wo *= p;
        }
        // zeta_ord = zeta_tame^{inv(wo) mod tame} * zeta_{p^level}^{inv(tame) mod wo}
        let tn = if tame == 1 { 0 } else { (num % tame) * inv_mod(wo % tame, tame) % tame };
        let wn = if level == 0 { 0 } else { (num % wo) * inv_mod(tame % wo, wo) % wo };
        UnityRoot { tame_num: tn, tame_ord: tame.max(1), wild_num: wn, wild_level: level, p }
            .normalize()
    }

    pub fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.p, o.p);
        let to = lcm(self.tame_ord, o.tame_ord);
        let tn = (self.tame_num * (to / self.tame_ord) + o.tame_num * (to / o.tame_ord)) % to;
        let lvl = self.wild_level.max(o.wild_level);
        let wo = (0..lvl).fold(1u64, |a, _| a * self.p);
        let up = |num: u64, l: u32| num * (0..(lvl - l)).fold(1u64, |a, _| a * self.p);
        let wn = (up(self.wild_num, self.wild_level) + up(o.wild_num, o.wild_level)) % wo.max(1);
        UnityRoot { tame_num: tn, tame_ord: to, wild_num: wn, wild_level: lvl, p: self.p }
            .normalize()
    }

    pub fn inv(&self) -> Self {
        let wo = (0..self.wild_level).fold(1u64, |a, _| a * self.p);
        UnityRoot {
            tame_num: (self.tame_ord - self.tame_num) % self.tame_ord,
            tame_ord: self.tame_ord,
            wild_num: if self.wild_level == 0 { 0 } else { (wo - self.wild_num) % wo },
            wild_level: self.wild_level,
            p: self.p,
        }
        .normalize()
    }

    pub fn pow(&self, e: u64) -> Self {
        let wo = (0..self.wild_level).fold(1u64, |a, _| a * self.p).max(1);
        UnityRoot {
            tame_num: self.tame_num * (e % self.tame_ord) % self.tame_ord,
            tame_ord: self.tame_ord,
            wild_num: self.wild_num * (e % wo) % wo,
            wild_level: self.wild_level,
            p: self.p,
        }
        .normalize()
    }

    pub fn pow_i64(&self, e: i64) -> Self {
        if e >= 0 {
            self.pow(e as u64)
        } else {
            self.inv().pow((-e) as u64)
        }
    }

    pub fn is_one(&self) -> bool {
        self.tame_num == 0 && self.wild_num == 0
    }

    pub fn order(&self) -> u64 {
        let wo = (0..self.wild_level).fold(1u64, |a, _| a * self.p).max(1);
        lcm(self.tame_ord, if self.wild_num == 0 { 1 } else { wo })
    }

    /// Embed into the unramified base; the wild part must be trivial.
    pub fn embed_base(&self, ctx: &Arc<PadicContext>) -> Result<PadicElt> {
        if self.wild_level > 0 {
            return Err(Error::Domain("wild root of unity needs the cyclotomic layer".into()));
        }
        Ok(ctx.tame_root(self.tame_ord)?.pow_u64(self.tame_num))
    }

    /// Embed into a cyclotomic layer of level >= wild_level.
    pub fn embed_cyclo(&self, ctx: &Arc<CycloContext>) -> Result<CycloElt> {
        if self.wild_level > ctx.n {
            return Err(Error::CtxMismatch(format!(
                "root of wild level {} in a level-{} ring",
                self.wild_level, ctx.n
            )));
        }
        let tame = ctx.base().tame_root(self.tame_ord)?.pow_u64(self.tame_num);
        let mut out = CycloElt::from_base(ctx, &tame);
        if self.wild_level > 0 {
            let shift = (0..(ctx.n - self.wild_level)).fold(1u64, |a, _| a * ctx.base().p);
            out = out.mul(&CycloElt::zeta_pow(ctx, (shift * self.wild_num) as i64));
        }
        Ok(out)
    }
}

/// Smallest primitive root mod p (matches the canonical choice inside
/// `PadicContext`).
pub fn smallest_primitive_root(p: u64) -> u64 {
    'outer: for g in 2..p {
        let mut e = p - 1;
        let mut facs = Vec::new();
        let mut d = 2;
        while d * d <= e {
            if e % d == 0 {
                facs.push(d);
                while e % d == 0 {
                    e /= d;
                }
            }
            d += 1;
        }
        if e > 1 {
            facs.push(e);
        }
        for q in facs {
            if pow_mod(g, (p - 1) / q, p) == 1 {
                continue 'outer;
            }
        }
        return g;
    }
    unreachable!("p prime has a primitive root")
}

/// Discrete Gamma-coordinate: s mod p^{n-1} with <z> = (1+p)^s mod p^n.
pub fn gamma_coord_discrete(p: u64, n: u32, z: u64) -> Result<u64> {
    let pn = (0..n).fold(1u64, |a, _| a * p);
    let z = z % pn;
    if z % p == 0 {
        return Err(Error::NonUnit);
    }
    if n <= 1 {
        return Ok(0);
    }
    // omega(z) mod p^n = z^e with e = 0 mod p^{n-1}, e = 1 mod p-1
    let pn1 = pn / p;
    let e = pn1 % (p - 1);
    let t = inv_mod(e.max(1), p - 1);
    let exp = pn1 * t;
    let omega = pow_mod(z, exp, pn);
    let phi = pn1 * (p - 1);
    let mut t_val = ((z as u128 * pow_mod(omega, phi - 1, pn) as u128) % pn as u128) as u64;
    // peel digits: gamma^{p^j} = 1 + p^{j+1} mod p^{j+2}
    let gamma = 1 + p;
    let mut s = 0u64;
    let mut pj = 1u64;
    for _ in 0..(n - 1) {
        let pj1 = pj * p; // p^{j+1}
        let digit = ((t_val - 1) / pj1) % p;
        s += digit * pj;
        if digit != 0 {
            let ginv = pow_mod(gamma, phi - 1, pn);
            let step = pow_mod(ginv, digit * pj, pn);
            t_val = ((t_val as u128 * step as u128) % pn as u128) as u64;
        }
        pj = pj1;
    }
    debug_assert_eq!(t_val, 1);
    Ok(s)
}

/// A Dirichlet character of modulus p^n, stored by its torsion exponent
/// (power of omega) and wild exponent (on the fixed generator 1 + p).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirichletChar {
    pub p: u64,
    /// modulus exponent; 0 is the trivial character mod 1
    pub n: u32,
    pub torsion_exp: u64,
    pub wild_exp: u64,
}

impl DirichletChar {
    pub fn new(p: u64, n: u32, torsion_exp: u64, wild_exp: u64) -> Result<Self> {
        let wild_mod = if n <= 1 { 1 } else { (0..n - 1).fold(1u64, |a, _| a * p) };
        let chi = DirichletChar {
            p,
            n,
            torsion_exp: torsion_exp % (p - 1),
            wild_exp: wild_exp % wild_mod,
        };
        Ok(chi)
    }

    pub fn trivial(p: u64) -> Self {
        DirichletChar { p, n: 0, torsion_exp: 0, wild_exp: 0 }
    }

    /// Conductor is exactly p^n: for n = 1 a nontrivial torsion part, for
    /// n >= 2 a wild exponent prime to p.
    pub fn is_primitive(&self) -> bool {
        match self.n {
            0 => true,
            1 => self.torsion_exp != 0,
            _ => self.wild_exp % self.p != 0,
        }
    }

    pub fn inverse(&self) -> Self {
        let wild_mod = if self.n <= 1 { 1 } else { (0..self.n - 1).fold(1u64, |a, _| a * self.p) };
        DirichletChar {
            p: self.p,
            n: self.n,
            torsion_exp: (self.p - 1 - self.torsion_exp) % (self.p - 1),
            wild_exp: if self.wild_exp == 0 { 0 } else { wild_mod - self.wild_exp },
        }
    }

    /// Value at an integer prime to p.
    pub fn eval(&self, z: u64) -> Result<UnityRoot> {
        if z % self.p == 0 {
            return Err(Error::NonUnit);
        }
        if self.n == 0 {
            return Ok(UnityRoot::one(self.p));
        }
        let r = smallest_primitive_root(self.p);
        // tame part: omega^a(z) = zeta_{p-1}^{a dlog(z)}
        let mut dlog = 0u64;
        let mut acc = 1u64;
        while acc != z % self.p {
            acc = acc * r % self.p;
            dlog += 1;
        }
        let tame = UnityRoot {
            tame_num: self.torsion_exp * dlog % (self.p - 1),
            tame_ord: self.p - 1,
            wild_num: 0,
            wild_level: 0,
            p: self.p,
        }
        .normalize();
        if self.n == 1 {
            return Ok(tame);
        }
        let s = gamma_coord_discrete(self.p, self.n, z)?;
        let wild_mod = (0..self.n - 1).fold(1u64, |a, _| a * self.p);
        let wild = UnityRoot {
            tame_num: 0,
            tame_ord: 1,
            wild_num: self.wild_exp * (s % wild_mod) % wild_mod,
            wild_level: self.n - 1,
            p: self.p,
        }
        .normalize();
        Ok(tame.mul(&wild))
    }

    /// chi(-1) as +-1.
    pub fn parity(&self) -> i64 {
        if self.torsion_exp % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

/// Gauss sum G(chi) = sum_b chi(b) zeta_{p^n}^b for a primitive chi mod p^n.
pub fn gauss_sum(chi: &DirichletChar, ctx: &Arc<CycloContext>) -> Result<CycloElt> {
    if chi.n == 0 {
        return Ok(CycloElt::one(ctx));
    }
    if !chi.is_primitive() {
        return Err(Error::NotPrimitiveChar);
    }
    if ctx.n < chi.n {
        return Err(Error::CtxMismatch("cyclotomic level below conductor".into()));
    }
    let pn = (0..chi.n).fold(1u64, |a, _| a * chi.p);
    let shift = (0..(ctx.n - chi.n)).fold(1u64, |a, _| a * chi.p);
    let mut sum = CycloElt::zero(ctx);
    for b in 1..pn {
        if b % chi.p == 0 {
            continue;
        }
        let v = chi.eval(b)?.embed_cyclo(ctx)?;
        sum = sum.add(&v.mul(&CycloElt::zeta_pow(ctx, (shift * b) as i64)));
    }
    Ok(sum)
}

/// A character of a ring class group, stored by exponents on the Smith
/// basis.
pub struct ClassGroupChar {
    pub group: Arc<RingClassGroup>,
    /// one exponent per invariant factor (taken mod that factor)
    pub exps: Vec<u64>,
    pub p: u64,
}

impl ClassGroupChar {
    pub fn new(group: Arc<RingClassGroup>, exps: Vec<u64>, p: u64) -> Result<Self> {
        if exps.len() != group.snf_orders.len() {
            return Err(Error::BadInput("one exponent per invariant factor".into()));
        }
        Ok(ClassGroupChar { group, exps, p })
    }

    pub fn trivial(group: Arc<RingClassGroup>, p: u64) -> Self {
        let n = group.snf_orders.len();
        ClassGroupChar { group, exps: vec![0; n], p }
    }

    pub fn eval(&self, x: &FormClass) -> Result<UnityRoot> {
        let coords = self.group.coords(x)?;
        let mut out = UnityRoot::one(self.p);
        for (i, &c) in coords.iter().enumerate() {
            let d = self.group.snf_orders[i];
            if d <= 1 {
                continue;
            }
            out = out.mul(&UnityRoot::root_of_order(self.p, d, self.exps[i] * c % d));
        }
        Ok(out)
    }

    pub fn is_trivial(&self) -> bool {
        self.exps
            .iter()
            .zip(&self.group.snf_orders)
            .all(|(&e, &d)| d <= 1 || e % d == 0)
    }
}

/// The p-adic avatar restricted to Z_p^x: z -> chi_p(z) z^m.
#[derive(Debug, Clone, Copy)]
pub struct AvatarOnUnits {
    pub chi_p: DirichletChar,
    pub weight_m: u32,
}

impl AvatarOnUnits {
    /// Evaluate at an integer unit, embedded in the cyclotomic working ring.
    pub fn eval_cyclo(&self, z: u64, ctx: &Arc<CycloContext>) -> Result<CycloElt> {
        let root = self.chi_p.eval(z)?.embed_cyclo(ctx)?;
        let zp = PadicElt::from_u64(ctx.base(), z).pow_u64(self.weight_m as u64);
        Ok(root.mul_base(&zp))
    }

    /// Evaluate at a unit of the base ring (tame characters only).
    pub fn eval_base(&self, z: &PadicElt) -> Result<PadicElt> {
        if self.chi_p.n > 1 {
            return Err(Error::Domain("wild avatar needs the cyclotomic ring".into()));
        }
        let zu = z.to_u64()?;
        let root = self.chi_p.eval(zu)?.embed_base(z.ctx())?;
        Ok(root.mul(&z.pow_u64(self.weight_m as u64)))
    }
}

/// A finite-order character of Gamma, given by its value on the generator:
/// eps(gamma) = zeta_{p^level}^{exponent}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WildChar {
    pub level: u32,
    pub exponent: u64,
    pub p: u64,
}

impl WildChar {
    pub fn trivial(p: u64) -> Self {
        WildChar { level: 0, exponent: 0, p }
    }

    pub fn new(p: u64, level: u32, exponent: u64) -> Self {
        UnityRoot::root_of_order(p, (0..level).fold(1u64, |a, _| a * p), exponent);
        WildChar { level, exponent, p }
    }

    pub fn value_on_gamma(&self) -> UnityRoot {
        if self.level == 0 {
            return UnityRoot::one(self.p);
        }
        UnityRoot {
            tame_num: 0,
            tame_ord: 1,
            wild_num: self.exponent,
            wild_level: self.level,
            p: self.p,
        }
        .normalize()
    }

    /// eps(z) = eps(gamma)^{s(z)} for a unit z with Gamma-coordinate s.
    pub fn eval_at_coord(&self, s_mod: u64) -> UnityRoot {
        self.value_on_gamma().pow(s_mod)
    }
}

/// The critical character theta: a square root of the group-like embedding
/// [z] = psi(z) (1+T)^{s(z)} of Z_p^x into the Iwasawa algebra, with
/// psi = omega^{a0}. Exists in two branches differing by omega^{(p-1)/2}.
pub struct CriticalCharacter {
    ctx: Arc<PadicContext>,
    /// even torsion exponent of psi
    pub psi_exponent: u64,
    /// torsion exponent of theta: 2 * half = psi_exponent mod p - 1
    pub half_exponent: u64,
    /// binomial series for (1+T)^{1/2}, the Gamma-part generator
    pub half_series: PowerSeries<PadicElt>,
    trunc: usize,
}

/// Construct the canonical branch (the other is `other_branch`).
pub fn build_critical_character(
    ctx: &Arc<PadicContext>,
    psi_exponent: u64,
    trunc: usize,
) -> Result<CriticalCharacter> {
    let p = ctx.p;
    let a0 = psi_exponent % (p - 1);
    if a0 % 2 != 0 {
        return Err(Error::OddExponent(a0));
    }
    let half = PadicElt::from_u64(ctx, 2).inv()?;
    let half_series = PowerSeries::<PadicElt>::binomial_series(&half, trunc)?;
    Ok(CriticalCharacter {
        ctx: Arc::clone(ctx),
        psi_exponent: a0,
        half_exponent: a0 / 2,
        half_series,
        trunc,
    })
}

impl CriticalCharacter {
    pub fn other_branch(&self) -> CriticalCharacter {
        let p = self.ctx.p;
        CriticalCharacter {
            ctx: Arc::clone(&self.ctx),
            psi_exponent: self.psi_exponent,
            half_exponent: (self.half_exponent + (p - 1) / 2) % (p - 1),
            half_series: self.half_series.clone(),
            trunc: self.trunc,
        }
    }

    /// theta(z) as an element of the Iwasawa algebra: the tame root
    /// omega^b(z) paired with the series (1+T)^{s(z)/2}.
    pub fn value_lambda(&self, z: &PadicElt) -> Result<(UnityRoot, PowerSeries<PadicElt>)> {
        let (a, s) = decompose_unit(z)?;
        let tame = UnityRoot {
            tame_num: self.half_exponent * a % (self.ctx.p - 1),
            tame_ord: self.ctx.p - 1,
            wild_num: 0,
            wild_level: 0,
            p: self.ctx.p,
        }
        .normalize();
        let s_half = s.mul(&PadicElt::from_u64(&self.ctx, 2).inv()?);
        let series = PowerSeries::<PadicElt>::binomial_series(&s_half, self.trunc)?;
        Ok((tame, series))
    }

    /// The weight-(k, eps) specialization theta_{(k,eps)}(z), evaluated by
    /// the closed form omega^b(z) eps(gamma)^{s(z)/2} gamma^{k s(z)/2}
    /// (exact: no series truncation enters).
    pub fn specialize_eval(
        &self,
        k: u64,
        eps: &WildChar,
        z: &PadicElt,
        ctx: &Arc<CycloContext>,
    ) -> Result<CycloElt> {
        let (a, s) = decompose_unit(z)?;
        let p = self.ctx.p;
        let inv2 = PadicElt::from_u64(&self.ctx, 2).inv()?;
        let s_half = s.mul(&inv2);
        let tame = UnityRoot {
            tame_num: self.half_exponent * a % (p - 1),
            tame_ord: p - 1,
            wild_num: 0,
            wild_level: 0,
            p,
        }
        .normalize();
        let mut root = tame;
        if eps.level > 0 {
            if s_half.prec() < eps.level {
                return Err(Error::PrecisionExhausted);
            }
            let sh = s_half.to_u64()? % self.ctx.p_pow(eps.level);
            root = root.mul(&eps.eval_at_coord(sh));
        }
        let g = gamma_pow(&self.ctx, &s_half.mul_u64(k))?;
        Ok(root.embed_cyclo(ctx)?.mul_base(&g))
    }

    /// The specialized group-like value [z]_{(k,eps)} =
    /// eps(z) psi(z) omega^{-k}(z) z^k, the square of the specialization.
    pub fn bracket_spec(
        &self,
        k: u64,
        eps: &WildChar,
        z: &PadicElt,
        ctx: &Arc<CycloContext>,
    ) -> Result<CycloElt> {
        let (a, s) = decompose_unit(z)?;
        let p = self.ctx.p;
        let mut root = UnityRoot {
            tame_num: (self.psi_exponent + (p - 1 - k % (p - 1)) * a) % (p - 1) * 1 % (p - 1),
            tame_ord: p - 1,
            wild_num: 0,
            wild_level: 0,
            p,
        };
        // recompute carefully: omega^{a0}(z) omega^{-k}(z) = zeta^{(a0 - k) a}
        let expo = ((self.psi_exponent as i64 - k as i64).rem_euclid((p - 1) as i64) as u64) * a
            % (p - 1);
        root.tame_num = expo;
        let mut root = root.normalize();
        if eps.level > 0 {
            if s.prec() < eps.level {
                return Err(Error::PrecisionExhausted);
            }
            let sm = s.to_u64()? % self.ctx.p_pow(eps.level);
            root = root.mul(&eps.eval_at_coord(sm));
        }
        let zk = z.pow_u64(k);
        Ok(root.embed_cyclo(ctx)?.mul_base(&zk))
    }

    /// The specialized central-character inverse on units: the Galois-side
    /// composite is x -> x^{-1}, so lambda_{(k,eps)} on units is the inverse
    /// of the bracket.
    pub fn lambda_spec_on_units(
        &self,
        k: u64,
        eps: &WildChar,
        z: &PadicElt,
        ctx: &Arc<CycloContext>,
    ) -> Result<CycloElt> {
        let b = self.bracket_spec(k, eps, z, ctx)?;
        b.inv()
    }
}

// ---- conductor recipe validation ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Split,
    Inert,
    Ramified,
}

/// Local conductor data at one rational prime.
#[derive(Debug, Clone, Copy)]
pub struct LocalConductor {
    pub ell: u64,
    pub tag: SplitTag,
    /// exponent at the distinguished prime above ell
    pub exp_l: u32,
    /// exponent at its conjugate (split primes only)
    pub exp_lbar: u32,
}

/// The data the constructions actually consume for a Hecke character:
/// local conductor exponents, infinity type, and the exponent bookkeeping
/// for the restriction condition.
#[derive(Debug, Clone)]
pub struct HeckeCharRecipeData {
    pub locals: Vec<LocalConductor>,
    pub at_p: LocalConductor,
    pub infinity_type: (i64, i64),
    /// tame exponent of the restriction to the ideles of Q
    pub restriction_exp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecipeReport {
    pub unramified_away: bool,
    pub split_one_sided: bool,
    pub p_exponent_ok: bool,
    pub infinity_restriction_ok: bool,
}

impl RecipeReport {
    pub fn all_pass(&self) -> bool {
        self.unramified_away
            && self.split_one_sided
            && self.p_exponent_ok
            && self.infinity_restriction_ok
    }
}

/// Check the conductor recipe: (i) unramified away from the nebentypus
/// conductor, (ii) split-prime support on one member of each pair,
/// (iii) at p support at the distinguished prime with exponent <= 1,
/// (iv) infinity type (k, 0) and restriction exponent inverting the
/// nebentypus.
pub fn validate_recipe(
    data: &HeckeCharRecipeData,
    p: u64,
    neben_tame_primes: &[u64],
    neben_psi_exp: u64,
) -> RecipeReport {
    let unramified_away = data
        .locals
        .iter()
        .all(|l| (l.exp_l == 0 && l.exp_lbar == 0) || neben_tame_primes.contains(&l.ell));
    let split_one_sided = data
        .locals
        .iter()
        .chain(std::iter::once(&data.at_p))
        .all(|l| l.tag != SplitTag::Split || l.exp_l == 0 || l.exp_lbar == 0);
    let p_exponent_ok =
        data.at_p.tag == SplitTag::Split && data.at_p.exp_lbar == 0 && data.at_p.exp_l <= 1;
    let infinity_restriction_ok = data.infinity_type.1 == 0
        && data.infinity_type.0 >= 0
        && (data.restriction_exp + neben_psi_exp) % (p - 1) == 0;
    RecipeReport { unramified_away, split_one_sided, p_exponent_ok, infinity_restriction_ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::{QuadField, QuadOrder};

    fn base(n: u32) -> Arc<PadicContext> {
        PadicContext::new(5, n).unwrap()
    }

    fn cyclo(n: u32, prec: u32) -> Arc<CycloContext> {
        CycloContext::new(&base(prec), n).unwrap()
    }

    #[test]
    fn quadratic_character_values() {
        let chi = DirichletChar::new(5, 1, 2, 0).unwrap();
        // 2 is a non-residue mod 5
        let v = chi.eval(2).unwrap();
        assert_eq!(v.order(), 2);
        let ctx = base(4);
        assert!(v.embed_base(&ctx).unwrap().eq_joint(&PadicElt::from_i64(&ctx, -1)));
        // residues give +1
        assert!(chi.eval(4).unwrap().is_one());
    }

    #[test]
    fn characters_are_multiplicative() {
        for (n, a, w) in [(1u32, 1u64, 0u64), (2, 2, 1), (2, 3, 2)] {
            let chi = DirichletChar::new(5, n, a, w).unwrap();
            for z1 in [1u64, 2, 3, 7, 11] {
                for z2 in [1u64, 3, 9, 13] {
                    let lhs = chi.eval(z1 * z2).unwrap();
                    let rhs = chi.eval(z1).unwrap().mul(&chi.eval(z2).unwrap());
                    assert_eq!(lhs, rhs, "n={n} a={a} w={w} z1={z1} z2={z2}");
                }
            }
        }
    }

    #[test]
    fn orthogonality_sum_vanishes() {
        let chi = DirichletChar::new(5, 2, 1, 1).unwrap();
        let ctx = cyclo(2, 4);
        let mut s = CycloElt::zero(&ctx);
        for b in (1..25).filter(|b| b % 5 != 0) {
            s = s.add(&chi.eval(b).unwrap().embed_cyclo(&ctx).unwrap());
        }
        assert!(s.is_zero());
    }

    #[test]
    fn gauss_sum_square_is_five() {
        // quadratic character mod 5: G^2 = chi(-1) * 5 = 5
        let chi = DirichletChar::new(5, 1, 2, 0).unwrap();
        let ctx = cyclo(1, 4);
        let g = gauss_sum(&chi, &ctx).unwrap();
        let g2 = g.mul(&g).descend_to_base().unwrap();
        assert_eq!(g2.to_u64().unwrap(), 5 % g2.ctx().p_pow(g2.prec()));
        assert_eq!(g2.to_u64().unwrap(), 5);
    }

    #[test]
    fn gauss_sum_product_identity() {
        // G(chi) G(chi^{-1}) = chi(-1) p^n, primitive chi mod 5 and 25
        for (n, a, w) in [(1u32, 1u64, 0u64), (1, 2, 0), (1, 3, 0), (2, 0, 1), (2, 3, 2)] {
            let chi = DirichletChar::new(5, n, a, w).unwrap();
            assert!(chi.is_primitive());
            let ctx = cyclo(n, 5);
            let g = gauss_sum(&chi, &ctx).unwrap();
            let gbar = gauss_sum(&chi.inverse(), &ctx).unwrap();
            let prod = g.mul(&gbar).descend_to_base().unwrap();
            let pn = 5u64.pow(n) as i64;
            let expect = PadicElt::from_i64(prod.ctx(), chi.parity() * pn);
            assert!(
                prod.eq_joint(&expect.reduce_prec(prod.prec())),
                "n={n} a={a} w={w}"
            );
        }
    }

    #[test]
    fn gauss_sum_identity_p7() {
        for (n, a, w) in [(1u32, 3u64, 0u64), (2, 1, 3)] {
            let base = PadicContext::new(7, 4).unwrap();
            let ctx = CycloContext::new(&base, n).unwrap();
            let chi = DirichletChar::new(7, n, a, w).unwrap();
            let g = gauss_sum(&chi, &ctx).unwrap();
            let gbar = gauss_sum(&chi.inverse(), &ctx).unwrap();
            let prod = g.mul(&gbar).descend_to_base().unwrap();
            let expect = PadicElt::from_i64(prod.ctx(), chi.parity() * 7i64.pow(n));
            assert!(prod.eq_joint(&expect.reduce_prec(prod.prec())));
        }
    }

    #[test]
    fn class_group_character_on_order_two_group() {
        let order = QuadOrder::new(QuadField::new(-4).unwrap(), 5).unwrap();
        let group = Arc::new(RingClassGroup::enumerate(order).unwrap());
        assert_eq!(group.cycle_sizes(), vec![2]);
        // the unique nontrivial character
        let exps: Vec<u64> =
            group.snf_orders.iter().map(|&d| if d == 2 { 1 } else { 0 }).collect();
        let chi = ClassGroupChar::new(Arc::clone(&group), exps, 5).unwrap();
        let nonprincipal = FormClass { a: 2, b: 2, c: 13 };
        let v = chi.eval(&nonprincipal).unwrap();
        assert_eq!(v.order(), 2);
        assert!(chi.eval(&group.identity()).unwrap().is_one());
        // orthogonality over the group
        let ctx = base(4);
        let mut s = PadicElt::zero(&ctx);
        for x in &group.elements {
            s = s.add(&chi.eval(x).unwrap().embed_base(&ctx).unwrap());
        }
        assert!(s.is_zero());
    }

    #[test]
    fn avatar_values() {
        let ctx = base(4);
        let triv = AvatarOnUnits { chi_p: DirichletChar::trivial(5), weight_m: 0 };
        assert!(triv
            .eval_base(&PadicElt::from_u64(&ctx, 7))
            .unwrap()
            .eq_joint(&PadicElt::one(&ctx)));
        let m1 = AvatarOnUnits { chi_p: DirichletChar::trivial(5), weight_m: 1 };
        assert_eq!(m1.eval_base(&PadicElt::from_u64(&ctx, 2)).unwrap().to_u64().unwrap(), 2);
        let quad = AvatarOnUnits { chi_p: DirichletChar::new(5, 1, 2, 0).unwrap(), weight_m: 2 };
        let v = quad.eval_base(&PadicElt::from_u64(&ctx, 2)).unwrap();
        assert!(v.eq_joint(&PadicElt::from_i64(&ctx, -4)));
    }

    #[test]
    fn critical_character_squares_to_bracket() {
        let ctx = base(6);
        let theta = build_critical_character(&ctx, 2, 8).unwrap();
        let cy = cyclo(1, 6);
        for k in [2u64, 3, 5, 8] {
            for eps in [WildChar::trivial(5), WildChar::new(5, 1, 1), WildChar::new(5, 1, 3)] {
                for z in [2u64, 3, 6, 7, 13] {
                    let ze = PadicElt::from_u64(&ctx, z);
                    let th = theta.specialize_eval(k, &eps, &ze, &cy).unwrap();
                    let sq = th.mul(&th);
                    let br = theta.bracket_spec(k, &eps, &ze, &cy).unwrap();
                    assert!(sq.eq_joint(&br), "k={k} z={z} eps={eps:?}");
                }
            }
        }
    }

    #[test]
    fn critical_character_branches_differ_by_quadratic_omega() {
        let ctx = base(5);
        let theta = build_critical_character(&ctx, 2, 8).unwrap();
        let other = theta.other_branch();
        let cy = cyclo(1, 5);
        let omega_sq = DirichletChar::new(5, 1, 2, 0).unwrap();
        for z in [2u64, 3, 7, 11, 13] {
            let ze = PadicElt::from_u64(&ctx, z);
            let a = theta.specialize_eval(2, &WildChar::trivial(5), &ze, &cy).unwrap();
            let b = other.specialize_eval(2, &WildChar::trivial(5), &ze, &cy).unwrap();
            let ratio = omega_sq.eval(z).unwrap().embed_cyclo(&cy).unwrap();
            assert!(b.eq_joint(&a.mul(&ratio)), "z={z}");
        }
    }

    #[test]
    fn critical_character_rejects_odd_exponent() {
        let ctx = base(4);
        assert!(matches!(build_critical_character(&ctx, 1, 8), Err(Error::OddExponent(1))));
    }

    #[test]
    fn theta_specializations_are_iwasawa_continuous() {
        // k and k + (p-1)p give congruent values mod p^2
        let ctx = base(6);
        let theta = build_critical_character(&ctx, 2, 8).unwrap();
        let cy = cyclo(1, 6);
        let eps = WildChar::trivial(5);
        for z in [2u64, 7, 13] {
            let ze = PadicElt::from_u64(&ctx, z);
            let a = theta.specialize_eval(2, &eps, &ze, &cy).unwrap();
            let b = theta.specialize_eval(22, &eps, &ze, &cy).unwrap();
            let diff = a.sub(&b);
            assert!(diff.pi_val().map_or(true, |v| v >= 2 * cy.e as u32), "z={z}");
        }
    }

    #[test]
    fn lambda_is_inverse_square_of_theta() {
        let ctx = base(6);
        let theta = build_critical_character(&ctx, 2, 8).unwrap();
        let cy = cyclo(1, 6);
        let eps = WildChar::new(5, 1, 2);
        for z in [2u64, 7] {
            let ze = PadicElt::from_u64(&ctx, z);
            let th = theta.specialize_eval(4, &eps, &ze, &cy).unwrap();
            let lam = theta.lambda_spec_on_units(4, &eps, &ze, &cy).unwrap();
            let prod = th.mul(&th).mul(&lam);
            assert!(prod.eq_joint(&CycloElt::one(&cy)));
        }
    }

    #[test]
    fn recipe_validator() {
        // all unramified, trivial nebentypus: pass
        let data = HeckeCharRecipeData {
            locals: vec![LocalConductor { ell: 3, tag: SplitTag::Inert, exp_l: 0, exp_lbar: 0 }],
            at_p: LocalConductor { ell: 5, tag: SplitTag::Split, exp_l: 0, exp_lbar: 0 },
            infinity_type: (2, 0),
            restriction_exp: 0,
        };
        assert!(validate_recipe(&data, 5, &[], 0).all_pass());

        // two-sided split support fails (ii)
        let bad = HeckeCharRecipeData {
            locals: vec![LocalConductor { ell: 11, tag: SplitTag::Split, exp_l: 1, exp_lbar: 1 }],
            at_p: LocalConductor { ell: 5, tag: SplitTag::Split, exp_l: 0, exp_lbar: 0 },
            infinity_type: (2, 0),
            restriction_exp: 0,
        };
        let rep = validate_recipe(&bad, 5, &[11], 0);
        assert!(!rep.split_one_sided);
        assert!(rep.unramified_away);

        // the omega-tilde fixture: infinity type (1,0), conductor exactly
        // the distinguished prime above p
        let omega_tilde = HeckeCharRecipeData {
            locals: vec![],
            at_p: LocalConductor { ell: 5, tag: SplitTag::Split, exp_l: 1, exp_lbar: 0 },
            infinity_type: (1, 0),
            restriction_exp: 3,
        };
        assert!(validate_recipe(&omega_tilde, 5, &[], 1).all_pass());
    }

    #[test]
    fn unity_root_algebra() {
        let a = UnityRoot::root_of_order(5, 20, 1);
        let b = a.pow(20);
        assert!(b.is_one());
        assert_eq!(a.order(), 20);
        assert!(a.mul(&a.inv()).is_one());
        // CRT split: order 20 = 4 * 5
        assert_eq!(a.tame_ord, 4);
        assert_eq!(a.wild_level, 1);
        let ctx = cyclo(1, 6);
        let e = a.embed_cyclo(&ctx).unwrap();
        assert!(e.pow_u64(20).eq_joint(&CycloElt::one(&ctx)));
        assert!(!e.pow_u64(10).eq_joint(&CycloElt::one(&ctx)));
        assert!(!e.pow_u64(4).eq_joint(&CycloElt::one(&ctx)));
    }
}
