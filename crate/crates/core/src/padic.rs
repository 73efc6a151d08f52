//! Finite-precision arithmetic in Z_p and its unramified extensions.
//!
//! A [`PadicContext`] fixes an odd prime `p`, an absolute precision exponent
//! `N` (elements are known modulo `p^N`), and an unramified degree `f`. The
//! degree-`f` extension is presented as `(Z/p^N)[x]/(h)` for a monic
//! polynomial `h` whose reduction mod `p` is irreducible; this is a
//! computable stand-in for the Witt ring of an algebraically closed residue
//! field, large enough for the root-of-unity orders a given run needs.
//!
//! Every [`PadicElt`] carries its own absolute precision `prec <= N`;
//! arithmetic never reports more precision than its inputs justify, and
//! division by `p^k` lowers `prec` by `k`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Multiplicative order of `a` modulo `m` (gcd(a, m) = 1), by factoring the
/// group order `phi`.
fn order_mod(a: u64, m: u64, phi: u64) -> u64 {
    let mut ord = phi;
    for (q, _) in factor_u64(phi) {
        while ord % q == 0 && pow_mod(a, ord / q, m) == 1 {
            ord /= q;
        }
    }
    ord
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, b, m);
        }
        b = mulmod(b, b, m);
        e >>= 1;
    }
    acc
}

// ---- dense polynomial arithmetic over F_p, used to pick the extension ----

fn fp_trim(a: &mut Vec<u64>) {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
}

fn fp_rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r: Vec<u64> = a.to_vec();
    fp_trim(&mut r);
    let db = b.len() - 1;
    let lead_inv = pow_mod(b[db], p - 2, p);
    while r.len() - 1 >= db && !(r.len() == 1 && r[0] == 0) {
        let dr = r.len() - 1;
        let c = mulmod(r[dr], lead_inv, p);
        for i in 0..=db {
            let idx = dr - db + i;
            let sub = mulmod(c, b[i], p);
            r[idx] = (r[idx] + p - sub) % p;
        }
        fp_trim(&mut r);
        if r.len() - 1 < db {
            break;
        }
    }
    r
}

fn fp_mulmod(a: &[u64], b: &[u64], h: &[u64], p: u64) -> Vec<u64> {
    let mut prod = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + mulmod(ai, bj, p)) % p;
        }
    }
    fp_rem(&prod, h, p)
}

fn fp_powmod(a: &[u64], mut e: u128, h: &[u64], p: u64) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut base = fp_rem(a, h, p);
    while e > 0 {
        if e & 1 == 1 {
            acc = fp_mulmod(&acc, &base, h, p);
        }
        base = fp_mulmod(&base, &base, h, p);
        e >>= 1;
    }
    acc
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    fp_trim(&mut x);
    fp_trim(&mut y);
    while !(y.len() == 1 && y[0] == 0) {
        let r = fp_rem(&x, &y, p);
        x = y;
        y = r;
    }
    x
}

fn fp_is_zero(a: &[u64]) -> bool {
    a.iter().all(|&c| c == 0)
}

/// `h` monic of degree f: irreducible over F_p iff x^{p^f} = x mod h and
/// gcd(x^{p^{f/l}} - x, h) = 1 for every prime l | f.
fn fp_irreducible(h: &[u64], p: u64, f: usize) -> bool {
    let x = vec![0u64, 1];
    let q = (p as u128).pow(f as u32);
    let xq = fp_powmod(&x, q, h, p);
    let mut diff = xq;
    if diff.len() < 2 {
        diff.resize(2, 0);
    }
    diff[1] = (diff[1] + p - 1) % p;
    fp_trim(&mut diff);
    if !fp_is_zero(&diff) {
        return false;
    }
    for (l, _) in factor_u64(f as u64) {
        let qq = (p as u128).pow((f as u64 / l) as u32);
        let xql = fp_powmod(&x, qq, h, p);
        let mut d = xql;
        if d.len() < 2 {
            d.resize(2, 0);
        }
        d[1] = (d[1] + p - 1) % p;
        fp_trim(&mut d);
        let g = fp_gcd(h, &d, p);
        if g.len() > 1 {
            return false;
        }
    }
    true
}

/// Smallest (lexicographic by low coefficients) monic irreducible of degree f.
fn find_irreducible(p: u64, f: usize) -> Vec<u64> {
    let mut code = 0u64;
    loop {
        let mut h = Vec::with_capacity(f + 1);
        let mut c = code;
        for _ in 0..f {
            h.push(c % p);
            c /= p;
        }
        h.push(1);
        if fp_irreducible(&h, p, f) {
            return h;
        }
        code += 1;
    }
}

/// Shared arithmetic context: the prime, absolute precision, and the
/// unramified extension data, together with a fixed generator of the
/// Teichmueller roots of unity.
pub struct PadicContext {
    /// The odd prime.
    pub p: u64,
    /// Absolute precision exponent N; elements are known mod p^N at best.
    pub prec_n: u32,
    /// Degree of the unramified extension.
    pub f: usize,
    /// Coefficients x^0..x^{f-1} of the monic defining polynomial (empty for f = 1).
    h: Vec<u64>,
    p_pows: Vec<u64>,
    teich_gen: Vec<u64>,
    zeta_tame: Vec<u64>,
    prim_root: u64,
    dlog: Vec<u32>,
}

impl fmt::Debug for PadicContext {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "PadicContext(p={}, N={}, f={})", self.p, self.prec_n, self.f)
    }
}

impl PadicContext {
    /// Context for Z_p itself (f = 1).
    pub fn new(p: u64, prec_n: u32) -> Result<Arc<Self>> {
        Self::with_roots(p, prec_n, &[])
    }

    /// Context whose residue field is large enough to contain primitive
    /// roots of unity of every order in `root_orders` (p-parts are ignored;
    /// those live in the ramified cyclotomic layer).
    pub fn with_roots(p: u64, prec_n: u32, root_orders: &[u64]) -> Result<Arc<Self>> {
        if p < 3 || !is_prime_u64(p) {
            return Err(Error::BadInput(format!("p must be an odd prime, got {p}")));
        }
        if prec_n == 0 {
            return Err(Error::BadInput("precision exponent must be >= 1".into()));
        }
        let mut f: u64 = 1;
        for &d in root_orders {
            if d == 0 {
                return Err(Error::BadInput("root order 0".into()));
            }
            let mut tame = d;
            while tame % p == 0 {
                tame /= p;
            }
            if tame > 1 {
                let ord = order_mod(p, tame, euler_phi(tame));
                f = lcm(f, ord);
            }
        }
        let f = f as usize;
        // residues are stored per coefficient mod p^N in u64, squared in u128
        let mut p_pows = vec![1u64];
        for _ in 0..prec_n {
            let last = *p_pows.last().unwrap();
            let next = last.checked_mul(p).filter(|&v| v < (1u64 << 62));
            match next {
                Some(v) => p_pows.push(v),
                None => {
                    return Err(Error::BoundExceeded(format!(
                        "p^N = {p}^{prec_n} exceeds the 62-bit residue bound"
                    )))
                }
            }
        }
        let h = if f == 1 { Vec::new() } else { find_irreducible(p, f)[..f].to_vec() };

        let mut ctx = PadicContext {
            p,
            prec_n,
            f,
            h,
            p_pows,
            teich_gen: vec![0; f],
            zeta_tame: vec![0; f],
            prim_root: 0,
            dlog: vec![0; p as usize],
        };

        // generator of the multiplicative group of the residue field,
        // deterministic (smallest integer code)
        let q_minus_1: u64 = (0..f).fold(1u64, |acc, _| acc * p) - 1;
        let h_fp: Vec<u64> = if f == 1 {
            vec![0, 1]
        } else {
            let mut v = ctx.h.iter().map(|&c| c % p).collect::<Vec<_>>();
            v.push(1);
            v
        };
        let mut gen_code = 2u64;
        let gen_fp: Vec<u64> = loop {
            let mut e = Vec::with_capacity(f);
            let mut c = gen_code;
            for _ in 0..f {
                e.push(c % p);
                c /= p;
            }
            let nonzero = e.iter().any(|&x| x != 0);
            if nonzero {
                let mut ok = true;
                for (l, _) in factor_u64(q_minus_1) {
                    let pw = fp_powmod(&e, (q_minus_1 / l) as u128, &h_fp, p);
                    let mut pw = pw;
                    fp_trim(&mut pw);
                    if pw.len() == 1 && pw[0] == 1 {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    break e;
                }
            }
            gen_code += 1;
        };

        // Teichmueller lift of the generator, then the canonical zeta_{p-1}
        let mut g = gen_fp.clone();
        g.resize(f, 0);
        let gen_elt = ctx.teich_of_coeffs(&g);
        let zeta_tame = ctx.pow_coeffs(&gen_elt, q_minus_1 / (p - 1));
        ctx.teich_gen = gen_elt;
        ctx.prim_root = zeta_tame[0] % p;
        ctx.zeta_tame = zeta_tame;

        let mut dlog = vec![0u32; p as usize];
        let mut acc = 1u64;
        for a in 0..(p - 1) {
            dlog[acc as usize] = a as u32;
            acc = mulmod(acc, ctx.prim_root, p);
        }
        ctx.dlog = dlog;

        Ok(Arc::new(ctx))
    }

    /// p^k for k <= N.
    pub fn p_pow(&self, k: u32) -> u64 {
        self.p_pows[k as usize]
    }

    /// The fixed topological generator 1 + p of Gamma.
    pub fn gamma(self: &Arc<Self>) -> PadicElt {
        PadicElt::from_u64(self, self.p + 1)
    }

    /// The fixed generator of the Teichmueller roots mu_{p^f - 1}.
    pub fn teich_generator(self: &Arc<Self>) -> PadicElt {
        PadicElt { ctx: Arc::clone(self), coeffs: self.teich_gen.clone(), prec: self.prec_n }
    }

    /// Canonical primitive (p-1)-th root of unity (equals the Teichmueller
    /// lift of [`Self::prim_root`]).
    pub fn zeta_tame(self: &Arc<Self>) -> PadicElt {
        PadicElt { ctx: Arc::clone(self), coeffs: self.zeta_tame.clone(), prec: self.prec_n }
    }

    /// The canonical primitive root mod p underlying the discrete-log table.
    pub fn prim_root(&self) -> u64 {
        self.prim_root
    }

    /// Discrete log of `z` (a unit mod p) base [`Self::prim_root`].
    pub fn dlog(&self, z: u64) -> Result<u64> {
        let r = z % self.p;
        if r == 0 {
            return Err(Error::NonUnit);
        }
        Ok(self.dlog[r as usize] as u64)
    }

    /// Canonical tame root of unity of the given order (order must divide p^f - 1).
    pub fn tame_root(self: &Arc<Self>, order: u64) -> Result<PadicElt> {
        let q_minus_1 = (0..self.f).fold(1u64, |acc, _| acc * self.p) - 1;
        if order == 0 || q_minus_1 % order != 0 {
            return Err(Error::BadInput(format!(
                "no root of unity of order {order} in the degree-{} unramified extension",
                self.f
            )));
        }
        Ok(self.teich_generator().pow_u64(q_minus_1 / order))
    }

    // ---- coefficient-vector arithmetic mod p^m ----

    fn cmod(&self, prec: u32) -> u64 {
        self.p_pows[prec as usize]
    }

    fn add_coeffs(&self, a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
        a.iter().zip(b).map(|(&x, &y)| (x + y) % m).collect()
    }

    fn sub_coeffs(&self, a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
        a.iter().zip(b).map(|(&x, &y)| (x + m - y % m) % m).collect()
    }

    fn mul_coeffs(&self, a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
        if self.f == 1 {
            return vec![mulmod(a[0] % m, b[0] % m, m)];
        }
        let f = self.f;
        let mut prod = vec![0u64; 2 * f - 1];
        for i in 0..f {
            if a[i] == 0 {
                continue;
            }
            for j in 0..f {
                prod[i + j] = (prod[i + j] + mulmod(a[i] % m, b[j] % m, m)) % m;
            }
        }
        // reduce by monic h: x^f = -(h_0 + h_1 x + ...)
        for d in (f..(2 * f - 1)).rev() {
            let c = prod[d];
            if c == 0 {
                continue;
            }
            prod[d] = 0;
            for i in 0..f {
                let sub = mulmod(c, self.h[i] % m, m);
                prod[d - f + i] = (prod[d - f + i] + m - sub) % m;
            }
        }
        prod.truncate(f);
        prod
    }

    fn pow_coeffs(&self, a: &[u64], mut e: u64) -> Vec<u64> {
        let m = self.cmod(self.prec_n);
        let mut acc = vec![0u64; self.f];
        acc[0] = 1;
        let mut base = a.to_vec();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_coeffs(&acc, &base, m);
            }
            base = self.mul_coeffs(&base, &base, m);
            e >>= 1;
        }
        acc
    }

    /// Teichmueller lift at full context precision by iterating x -> x^{p^f}.
    fn teich_of_coeffs(&self, a: &[u64]) -> Vec<u64> {
        let q: u64 = (0..self.f).fold(1u64, |acc, _| acc * self.p);
        let mut x = a.to_vec();
        for _ in 0..=(self.prec_n + 1) {
            let next = self.pow_coeffs(&x, q);
            if next == x {
                return x;
            }
            x = next;
        }
        x
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn euler_phi(n: u64) -> u64 {
    let mut out = n;
    for (q, _) in factor_u64(n) {
        out = out / q * (q - 1);
    }
    out
}

/// An element of the unramified extension, known modulo `p^prec`.
#[derive(Clone)]
pub struct PadicElt {
    ctx: Arc<PadicContext>,
    coeffs: Vec<u64>,
    prec: u32,
}

impl fmt::Debug for PadicElt {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "{:?} + O({}^{})", self.coeffs, self.ctx.p, self.prec)
    }
}

impl PadicElt {
    pub fn ctx(&self) -> &Arc<PadicContext> {
        &self.ctx
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Coefficient vector (length f), canonical mod p^prec.
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn zero(ctx: &Arc<PadicContext>) -> Self {
        PadicElt { ctx: Arc::clone(ctx), coeffs: vec![0; ctx.f], prec: ctx.prec_n }
    }

    pub fn one(ctx: &Arc<PadicContext>) -> Self {
        Self::from_u64(ctx, 1)
    }

    pub fn from_u64(ctx: &Arc<PadicContext>, v: u64) -> Self {
        let mut coeffs = vec![0; ctx.f];
        coeffs[0] = v % ctx.cmod(ctx.prec_n);
        PadicElt { ctx: Arc::clone(ctx), coeffs, prec: ctx.prec_n }
    }

    pub fn from_i64(ctx: &Arc<PadicContext>, v: i64) -> Self {
        let m = ctx.cmod(ctx.prec_n) as i128;
        let r = ((v as i128 % m) + m) % m;
        Self::from_u64(ctx, r as u64)
    }

    /// Build from a coefficient vector at a stated precision.
    pub fn from_coeffs(ctx: &Arc<PadicContext>, coeffs: Vec<u64>, prec: u32) -> Result<Self> {
        if coeffs.len() != ctx.f {
            return Err(Error::BadInput("coefficient vector length != f".into()));
        }
        if prec == 0 || prec > ctx.prec_n {
            return Err(Error::BadInput(format!("precision {prec} outside 1..=N")));
        }
        let m = ctx.cmod(prec);
        let coeffs = coeffs.into_iter().map(|c| c % m).collect();
        Ok(PadicElt { ctx: Arc::clone(ctx), coeffs, prec })
    }

    fn same_ctx(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ctx, &other.ctx)
            || (self.ctx.p == other.ctx.p
                && self.ctx.prec_n == other.ctx.prec_n
                && self.ctx.f == other.ctx.f
                && self.ctx.h == other.ctx.h)
    }

    fn binop_prec(&self, other: &Self) -> u32 {
        debug_assert!(self.same_ctx(other), "context mismatch");
        self.prec.min(other.prec)
    }

    /// Lower (never raise) the declared precision.
    pub fn reduce_prec(&self, prec: u32) -> Self {
        let prec = prec.min(self.prec).max(1);
        let m = self.ctx.cmod(prec);
        PadicElt {
            ctx: Arc::clone(&self.ctx),
            coeffs: self.coeffs.iter().map(|&c| c % m).collect(),
            prec,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.binop_prec(other);
        let m = self.ctx.cmod(prec);
        PadicElt {
            ctx: Arc::clone(&self.ctx),
            coeffs: self.ctx.add_coeffs(
                &self.reduce_prec(prec).coeffs,
                &other.reduce_prec(prec).coeffs,
                m,
            ),
            prec,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let prec = self.binop_prec(other);
        let m = self.ctx.cmod(prec);
        PadicElt {
            ctx: Arc::clone(&self.ctx),
            coeffs: self.ctx.sub_coeffs(
                &self.reduce_prec(prec).coeffs,
                &other.reduce_prec(prec).coeffs,
                m,
            ),
            prec,
        }
    }

    pub fn neg(&self) -> Self {
        let z = Self::zero(&self.ctx).reduce_prec(self.prec);
        z.sub(self)
    }

    fn val_or_prec(&self) -> u32 {
        self.val().unwrap_or(self.prec)
    }

    /// Product with the standard valuation adjustment:
    /// prec(xy) = min(prec(x) + v(y), prec(y) + v(x)), capped at N. The
    /// stored residues determine the product to that precision because the
    /// representative ambiguity is O(p^prec) times a factor of valuation v.
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert!(self.same_ctx(other), "context mismatch");
        let prec = (self.prec + other.val_or_prec())
            .min(other.prec + self.val_or_prec())
            .min(self.ctx.prec_n);
        let m = self.ctx.cmod(prec);
        PadicElt {
            ctx: Arc::clone(&self.ctx),
            coeffs: self.ctx.mul_coeffs(&self.coeffs, &other.coeffs, m),
            prec,
        }
    }

    pub fn mul_u64(&self, k: u64) -> Self {
        let mut vk = 0u32;
        let mut t = k;
        while t != 0 && t % self.ctx.p == 0 {
            t /= self.ctx.p;
            vk += 1;
        }
        let prec = (self.prec + vk).min(self.ctx.prec_n);
        let m = self.ctx.cmod(prec);
        PadicElt {
            ctx: Arc::clone(&self.ctx),
            coeffs: self.coeffs.iter().map(|&c| mulmod(c, k % m, m)).collect(),
            prec,
        }
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        let m = self.ctx.cmod(self.prec) as i128;
        let r = ((k as i128 % m) + m) % m;
        self.mul_u64(r as u64)
    }

    /// True when all digits vanish to the declared precision.
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// Equality at the joint declared precision.
    pub fn eq_joint(&self, other: &Self) -> bool {
        let prec = self.binop_prec(other);
        self.reduce_prec(prec).coeffs == other.reduce_prec(prec).coeffs
    }

    /// p-adic valuation, or None if zero to declared precision.
    pub fn val(&self) -> Option<u32> {
        if self.is_zero() {
            return None;
        }
        let mut v = self.prec;
        for &c in &self.coeffs {
            if c == 0 {
                continue;
            }
            let mut cv = 0u32;
            let mut x = c;
            while x % self.ctx.p == 0 {
                x /= self.ctx.p;
                cv += 1;
            }
            v = v.min(cv);
        }
        Some(v)
    }

    pub fn is_unit(&self) -> bool {
        self.val() == Some(0)
    }

    /// Exact division by p^k. Fails with `NotDivisible` when some digit below
    /// p^k is nonzero; the result loses k digits of declared precision.
    pub fn try_div_p_pow(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Ok(self.clone());
        }
        if self.prec <= k {
            return Err(Error::PrecisionExhausted);
        }
        let pk = self.ctx.cmod(k);
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for &c in &self.coeffs {
            if c % pk != 0 {
                return Err(Error::NotDivisible(format!("digit {c} by p^{k}")));
            }
            coeffs.push(c / pk);
        }
        Ok(PadicElt { ctx: Arc::clone(&self.ctx), coeffs, prec: self.prec - k })
    }

    /// Multiplication by p^k; gains up to k digits of declared precision
    /// (capped by the context bound N).
    pub fn mul_p_pow(&self, k: u32) -> Self {
        let prec = (self.prec + k).min(self.ctx.prec_n);
        let m = self.ctx.cmod(prec);
        let pk = self.ctx.cmod(k.min(self.ctx.prec_n));
        PadicElt {
            ctx: Arc::clone(&self.ctx),
            coeffs: self.coeffs.iter().map(|&c| mulmod(c, pk, m)).collect(),
            prec,
        }
    }

    /// Multiplicative inverse of a unit, by Newton lifting from the residue field.
    pub fn inv(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(Error::NonUnit);
        }
        let ctx = &self.ctx;
        let p = ctx.p;
        // inverse in the residue field
        let x0: Vec<u64> = if ctx.f == 1 {
            vec![pow_mod(self.coeffs[0] % p, p - 2, p)]
        } else {
            // a^(q-2) = a^{-1} in F_q
            let q: u64 = (0..ctx.f).fold(1u64, |acc, _| acc * p);
            let h_fp: Vec<u64> = {
                let mut v = ctx.h.iter().map(|&c| c % p).collect::<Vec<_>>();
                v.push(1);
                v
            };
            let a_fp: Vec<u64> = self.coeffs.iter().map(|&c| c % p).collect();
            let mut r = fp_powmod(&a_fp, (q - 2) as u128, &h_fp, p);
            r.resize(ctx.f, 0);
            r
        };
        let m = ctx.cmod(self.prec);
        let mut x = x0;
        let steps = 32 - (self.prec as u32).leading_zeros() + 1;
        for _ in 0..steps {
            // x <- x (2 - a x)
            let ax = ctx.mul_coeffs(&self.coeffs, &x, m);
            let mut two = vec![0u64; ctx.f];
            two[0] = 2 % m;
            let t = ctx.sub_coeffs(&two, &ax, m);
            x = ctx.mul_coeffs(&x, &t, m);
        }
        Ok(PadicElt { ctx: Arc::clone(ctx), coeffs: x, prec: self.prec })
    }

    pub fn pow_u64(&self, mut e: u64) -> Self {
        let mut acc = Self::one(&self.ctx).reduce_prec(self.prec);
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

    pub fn pow_i64(&self, e: i64) -> Result<Self> {
        if e >= 0 {
            Ok(self.pow_u64(e as u64))
        } else {
            Ok(self.inv()?.pow_u64((-e) as u64))
        }
    }

    /// The unique Teichmueller root of unity congruent to this unit mod p,
    /// computed by iterating x -> x^{p^f} to stabilization.
    pub fn teichmuller(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(Error::NonUnit);
        }
        let coeffs = {
            let m = self.ctx.cmod(self.prec);
            let q: u64 = (0..self.ctx.f).fold(1u64, |acc, _| acc * self.ctx.p);
            let mut x = self.coeffs.clone();
            loop {
                let next = {
                    let mut acc = vec![0u64; self.ctx.f];
                    acc[0] = 1;
                    let mut b = x.clone();
                    let mut e = q;
                    while e > 0 {
                        if e & 1 == 1 {
                            acc = self.ctx.mul_coeffs(&acc, &b, m);
                        }
                        b = self.ctx.mul_coeffs(&b, &b, m);
                        e >>= 1;
                    }
                    acc
                };
                if next == x {
                    break x;
                }
                x = next;
            }
        };
        Ok(PadicElt { ctx: Arc::clone(&self.ctx), coeffs, prec: self.prec })
    }

    /// p-adic logarithm on 1 + pZ_p (and its unramified analogue).
    pub fn log(&self) -> Result<Self> {
        let one = Self::one(&self.ctx).reduce_prec(self.prec);
        let x = self.sub(&one);
        if x.is_zero() {
            return Ok(Self::zero(&self.ctx).reduce_prec(self.prec));
        }
        let v = x.val().unwrap();
        if v == 0 {
            return Err(Error::Domain("log requires u = 1 mod p".into()));
        }
        let prec = self.prec;
        let mut sum = Self::zero(&self.ctx).reduce_prec(prec);
        let mut xn = Self::one(&self.ctx).reduce_prec(prec);
        let mut n = 0u64;
        loop {
            n += 1;
            let vp_n = {
                let mut t = n;
                let mut c = 0u32;
                while t % self.ctx.p == 0 {
                    t /= self.ctx.p;
                    c += 1;
                }
                c
            };
            if (n as u32) * v >= prec + vp_n {
                break;
            }
            xn = xn.mul(&x);
            // term = (-1)^{n+1} x^n / n
            let n_unit = {
                let mut t = n;
                while t % self.ctx.p == 0 {
                    t /= self.ctx.p;
                }
                t
            };
            let mut term = xn.try_div_p_pow(vp_n)?;
            term = term.mul(&Self::from_u64(&self.ctx, n_unit).inv()?.reduce_prec(term.prec()));
            if n % 2 == 0 {
                term = term.neg();
            }
            sum = sum.add(&term);
        }
        Ok(sum)
    }

    /// p-adic exponential on pZ_p (p odd).
    pub fn exp(&self) -> Result<Self> {
        if self.is_zero() {
            return Ok(Self::one(&self.ctx).reduce_prec(self.prec));
        }
        let v = self.val().unwrap();
        if v == 0 {
            return Err(Error::Domain("exp requires v_p(x) >= 1".into()));
        }
        let prec = self.prec;
        let mut sum = Self::one(&self.ctx).reduce_prec(prec);
        let mut xn = Self::one(&self.ctx).reduce_prec(prec);
        let mut vp_fact = 0u32;
        let mut fact_unit = Self::one(&self.ctx).reduce_prec(prec);
        let mut n = 0u64;
        loop {
            n += 1;
            let mut t = n;
            while t % self.ctx.p == 0 {
                t /= self.ctx.p;
                vp_fact += 1;
            }
            if (n as u32) * v < vp_fact {
                return Err(Error::Domain("exp diverges".into()));
            }
            if (n as u32) * v >= prec + vp_fact {
                break;
            }
            fact_unit = fact_unit.mul(&Self::from_u64(&self.ctx, t));
            xn = xn.mul(self);
            let term = xn.try_div_p_pow(vp_fact)?.mul(&fact_unit.inv()?);
            sum = sum.add(&term);
        }
        Ok(sum)
    }

    /// Canonical u64 residue (f = 1 only).
    pub fn to_u64(&self) -> Result<u64> {
        if self.coeffs[1..].iter().any(|&c| c != 0) {
            return Err(Error::NotRational);
        }
        Ok(self.coeffs[0])
    }
}

/// Splitting of a unit z in Z_p^x as omega(z) * gamma^s: returns the torsion
/// exponent a (so omega(z) = zeta_tame^a, base the canonical primitive root)
/// and the Gamma-coordinate s with gamma^s = <z> = z / omega(z).
pub fn decompose_unit(z: &PadicElt) -> Result<(u64, PadicElt)> {
    if !z.is_unit() {
        return Err(Error::NonUnit);
    }
    if z.coeffs[1..].iter().any(|&c| c != 0) {
        return Err(Error::Domain("decompose_unit expects a Z_p-valued unit".into()));
    }
    let ctx = z.ctx();
    let a = ctx.dlog(z.coeffs[0])?;
    let omega = z.teichmuller()?;
    let z1 = z.mul(&omega.inv()?);
    let lz = z1.log()?;
    let lg = ctx.gamma().log()?;
    // both have valuation exactly 1 (p odd); s = (lz/p) / (lg/p)
    let s = lz.try_div_p_pow(1)?.mul(&lg.try_div_p_pow(1)?.inv()?);
    Ok((a, s))
}

/// Gamma-coordinate of z truncated to an integer mod p^k (needs s to carry
/// at least k digits).
pub fn gamma_coordinate_mod(z: &PadicElt, k: u32) -> Result<u64> {
    let (_, s) = decompose_unit(z)?;
    if s.prec() < k {
        return Err(Error::PrecisionExhausted);
    }
    Ok(s.to_u64()? % z.ctx().p_pow(k))
}

/// gamma^s for a p-adic exponent s; exact mod p^{prec(s)+1} since
/// (1+p)^(p^k) = 1 mod p^{k+1}.
pub fn gamma_pow(ctx: &Arc<PadicContext>, s: &PadicElt) -> Result<PadicElt> {
    let k = s.prec().min(ctx.prec_n - 1);
    let e = s.reduce_prec(k).to_u64()?;
    let out_prec = (k + 1).min(ctx.prec_n);
    Ok(ctx.gamma().pow_u64(e).reduce_prec(out_prec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx5(n: u32) -> Arc<PadicContext> {
        PadicContext::new(5, n).unwrap()
    }

    #[test]
    fn teichmuller_fixed_point_of_one() {
        let ctx = ctx5(2);
        let a = PadicElt::from_u64(&ctx, 1);
        assert_eq!(a.teichmuller().unwrap().to_u64().unwrap(), 1);
    }

    #[test]
    fn teichmuller_of_two() {
        // iterate x -> x^5 from 2: stabilizes at 7 mod 25, 57 mod 125
        let ctx = ctx5(2);
        let t = PadicElt::from_u64(&ctx, 2).teichmuller().unwrap();
        assert_eq!(t.to_u64().unwrap(), 7);
        let ctx = ctx5(3);
        let t = PadicElt::from_u64(&ctx, 2).teichmuller().unwrap();
        assert_eq!(t.to_u64().unwrap(), 57);
    }

    #[test]
    fn teichmuller_is_root_of_unity_and_congruent() {
        let ctx = ctx5(6);
        for a in [2u64, 3, 4, 6, 7, 13] {
            let t = PadicElt::from_u64(&ctx, a).teichmuller().unwrap();
            assert!(t.pow_u64(4).eq_joint(&PadicElt::one(&ctx)));
            assert_eq!(t.to_u64().unwrap() % 5, a % 5);
        }
    }

    #[test]
    fn teichmuller_rejects_non_unit() {
        let ctx = ctx5(3);
        assert!(matches!(PadicElt::from_u64(&ctx, 10).teichmuller(), Err(Error::NonUnit)));
    }

    #[test]
    fn log_of_one_plus_p() {
        // log(6) = 5 - 25/2 + ... = 55 mod 125
        let ctx = ctx5(3);
        let l = ctx.gamma().log().unwrap();
        assert_eq!(l.to_u64().unwrap(), 55);
        assert_eq!(l.prec(), 3);
    }

    #[test]
    fn log_rejects_units_away_from_one() {
        let ctx = ctx5(3);
        assert!(PadicElt::from_u64(&ctx, 2).log().is_err());
    }

    #[test]
    fn exp_log_roundtrip() {
        let ctx = ctx5(6);
        for r in [1u64, 2, 3, 7, 12, 24] {
            let u = PadicElt::from_u64(&ctx, 1 + 5 * r);
            let back = u.log().unwrap().exp().unwrap();
            assert!(back.eq_joint(&u.reduce_prec(back.prec())), "r = {r}");
            assert!(back.prec() >= 5);
        }
    }

    #[test]
    fn decompose_generator() {
        let ctx = ctx5(4);
        let (a, s) = decompose_unit(&ctx.gamma()).unwrap();
        assert_eq!(a, 0);
        assert!(s.eq_joint(&PadicElt::one(&ctx).reduce_prec(s.prec())));
    }

    #[test]
    fn decompose_torsion() {
        let ctx = ctx5(4);
        let w = PadicElt::from_u64(&ctx, 2).teichmuller().unwrap();
        let (a, s) = decompose_unit(&w).unwrap();
        // prim root mod 5 is 2, so omega(2) has torsion exponent 1
        assert_eq!(ctx.prim_root(), 2);
        assert_eq!(a, 1);
        assert!(s.is_zero());
    }

    #[test]
    fn decompose_reconstructs() {
        let ctx = ctx5(4);
        for z in [2u64, 3, 7, 13, 101] {
            let ze = PadicElt::from_u64(&ctx, z);
            let (a, s) = decompose_unit(&ze).unwrap();
            let w = ctx.zeta_tame().pow_u64(a);
            let g = gamma_pow(&ctx, &s).unwrap();
            let back = w.mul(&g);
            assert!(back.eq_joint(&ze.reduce_prec(back.prec())), "z = {z}");
        }
    }

    #[test]
    fn decompose_is_multiplicative() {
        let ctx = ctx5(5);
        let (a1, s1) = decompose_unit(&PadicElt::from_u64(&ctx, 7)).unwrap();
        let (a2, s2) = decompose_unit(&PadicElt::from_u64(&ctx, 13)).unwrap();
        let (a3, s3) = decompose_unit(&PadicElt::from_u64(&ctx, 91)).unwrap();
        assert_eq!((a1 + a2) % 4, a3);
        let sum = s1.add(&s2);
        assert!(sum.eq_joint(&s3.reduce_prec(sum.prec())));
    }

    #[test]
    fn division_tracks_precision() {
        let ctx = ctx5(6);
        let x = PadicElt::from_u64(&ctx, 75);
        let y = x.try_div_p_pow(2).unwrap();
        assert_eq!(y.to_u64().unwrap(), 3);
        assert_eq!(y.prec(), 4);
        assert!(PadicElt::from_u64(&ctx, 76).try_div_p_pow(1).is_err());
    }

    #[test]
    fn precision_soundness_under_reduction() {
        // recomputing at higher N and truncating agrees with the lower-N run
        let lo = ctx5(3);
        let hi = ctx5(6);
        for z in [2u64, 3, 7, 13] {
            let a = PadicElt::from_u64(&lo, z).teichmuller().unwrap();
            let b = PadicElt::from_u64(&hi, z).teichmuller().unwrap();
            assert_eq!(a.to_u64().unwrap(), b.to_u64().unwrap() % 125);
        }
    }

    #[test]
    fn unramified_extension_arithmetic() {
        // order-3 roots need f = 2 over Q_5
        let ctx = PadicContext::with_roots(5, 4, &[3]).unwrap();
        assert_eq!(ctx.f, 2);
        let z3 = ctx.tame_root(3).unwrap();
        assert!(!z3.eq_joint(&PadicElt::one(&ctx)));
        assert!(z3.pow_u64(3).eq_joint(&PadicElt::one(&ctx)));
        // 1 + z + z^2 = 0
        let sum = PadicElt::one(&ctx).add(&z3).add(&z3.pow_u64(2));
        assert!(sum.is_zero());
        // inverses in the extension
        let x = z3.add(&PadicElt::from_u64(&ctx, 3));
        let prod = x.mul(&x.inv().unwrap());
        assert!(prod.eq_joint(&PadicElt::one(&ctx)));
    }

    #[test]
    fn wild_orders_do_not_inflate_degree() {
        let ctx = PadicContext::with_roots(5, 4, &[25, 4]).unwrap();
        assert_eq!(ctx.f, 1);
    }

    #[test]
    fn residue_bound_is_enforced() {
        assert!(matches!(PadicContext::new(5, 40), Err(Error::BoundExceeded(_))));
    }
}
