//! Imaginary quadratic fields, orders Z + cR, ring class groups via reduced
//! binary quadratic forms, the projections between conductors, and the
//! kernel parametrization of class-tower fibers.
//!
//! Classes are always held as reduced forms; ideals appear only transiently
//! as rank-2 lattices in coordinates (1, tau) with tau the standard
//! generator of the maximal order. The dictionary is
//! (a, b, c) <-> [a, (-b + sqrt(disc))/2], and `form_from_lattice` inverts
//! it for any positively oriented basis.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Kronecker symbol (d | q) for prime q.
pub fn kronecker_prime(d: i64, q: u64) -> i64 {
    if q == 2 {
        if d % 2 == 0 {
            return 0;
        }
        let r = ((d % 8) + 8) % 8;
        return if r == 1 || r == 7 { 1 } else { -1 };
    }
    let qi = q as i64;
    let r = ((d % qi) + qi) % qi;
    if r == 0 {
        return 0;
    }
    // Euler criterion
    let mut acc: i64 = 1;
    let mut base = r % qi;
    let mut e = (q - 1) / 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % qi;
        }
        base = base * base % qi;
        e >>= 1;
    }
    if acc == 1 {
        1
    } else {
        -1
    }
}

fn factor(mut n: u64) -> Vec<(u64, u32)> {
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

fn gcd_i128(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd_i128(b, a % b)
    }
}

/// Extended gcd: returns (g, u, v) with g = u a + v b, g >= 0.
fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        return if a < 0 { (-a, -1, 0) } else { (a, 1, 0) };
    }
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// An imaginary quadratic field, by fundamental discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadField {
    /// Fundamental discriminant, negative.
    pub d: i64,
    /// Number of roots of unity (6, 4, or 2).
    pub w_k: u32,
}

impl QuadField {
    pub fn new(d: i64) -> Result<Self> {
        if d >= 0 {
            return Err(Error::BadInput(format!("discriminant {d} is not negative")));
        }
        let fundamental = match d.rem_euclid(4) {
            1 => squarefree(-d),
            0 => {
                let m = d / 4;
                let r = m.rem_euclid(4);
                (r == 2 || r == 3) && squarefree(-m)
            }
            _ => false,
        };
        if !fundamental {
            return Err(Error::BadInput(format!("{d} is not a fundamental discriminant")));
        }
        let w_k = match d {
            -3 => 6,
            -4 => 4,
            _ => 2,
        };
        Ok(QuadField { d, w_k })
    }

    /// Trace and norm of the standard generator tau of the maximal order.
    pub fn tau_trace_norm(&self) -> (i64, i64) {
        if self.d % 2 != 0 {
            (1, (1 - self.d) / 4)
        } else {
            (0, -self.d / 4)
        }
    }
}

fn squarefree(n: i64) -> bool {
    let mut n = n;
    let mut d = 2i64;
    while d * d <= n {
        if n % (d * d) == 0 {
            return false;
        }
        while n % d == 0 {
            n /= d;
        }
        d += 1;
    }
    true
}

/// The order Z + cR of conductor c.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadOrder {
    pub field: QuadField,
    pub conductor: u64,
    pub disc: i64,
}

impl QuadOrder {
    pub fn new(field: QuadField, conductor: u64) -> Result<Self> {
        if conductor == 0 {
            return Err(Error::BadInput("conductor must be >= 1".into()));
        }
        let disc = (conductor as i64)
            .checked_mul(conductor as i64)
            .and_then(|c2| c2.checked_mul(field.d))
            .ok_or_else(|| Error::BoundExceeded("conductor".into()))?;
        if disc < -10_000_000 {
            return Err(Error::BoundExceeded(format!("|disc| = {} > 10^7", -disc)));
        }
        Ok(QuadOrder { field, conductor, disc })
    }

    /// Unit index [R^x : O^x] (3 for D = -3, 2 for D = -4 once c > 1, else 1).
    pub fn unit_index(&self) -> u64 {
        if self.conductor == 1 {
            1
        } else {
            (self.field.w_k / 2) as u64
        }
    }
}

/// A reduced primitive positive definite binary quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FormClass {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl FormClass {
    pub fn disc(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn is_primitive(&self) -> bool {
        gcd_i128(gcd_i128(self.a as i128, self.b as i128), self.c as i128) == 1
    }

    pub fn is_reduced(&self) -> bool {
        let (a, b, c) = (self.a, self.b, self.c);
        a > 0 && b.abs() <= a && a <= c && !((b.abs() == a || a == c) && b < 0)
    }

    pub fn apply(&self, x: i64, y: i64) -> i64 {
        self.a * x * x + self.b * x * y + self.c * y * y
    }
}

/// Principal (identity) form of a discriminant.
pub fn principal_form(disc: i64) -> FormClass {
    if disc.rem_euclid(4) == 0 {
        FormClass { a: 1, b: 0, c: -disc / 4 }
    } else {
        FormClass { a: 1, b: 1, c: (1 - disc) / 4 }
    }
}

/// Reduce a primitive positive definite form to its unique reduced
/// representative.
pub fn reduce_form(a: i64, b: i64, c: i64) -> Result<FormClass> {
    let disc = b as i128 * b as i128 - 4 * a as i128 * c as i128;
    if disc >= 0 {
        return Err(Error::NotDefinite);
    }
    let mut fa = a as i128;
    let mut fb = b as i128;
    let mut fc = c as i128;
    if fa < 0 {
        return Err(Error::NotDefinite);
    }
    if gcd_i128(gcd_i128(fa, fb), fc) != 1 {
        return Err(Error::NotPrimitive);
    }
    loop {
        if fc < fa {
            std::mem::swap(&mut fa, &mut fc);
            fb = -fb;
            continue;
        }
        if fb > fa || fb <= -fa {
            // shift b into (-a, a]
            let two_a = 2 * fa;
            let mut r = fb.rem_euclid(two_a);
            if r > fa {
                r -= two_a;
            }
            let k = (fb - r) / two_a;
            fc = fc - k * fb + k * k * fa;
            fb = r;
            continue;
        }
        if (fb.abs() == fa || fa == fc) && fb < 0 {
            fb = -fb;
            continue;
        }
        break;
    }
    debug_assert_eq!(fb * fb - 4 * fa * fc, disc);
    Ok(FormClass { a: fa as i64, b: fb as i64, c: fc as i64 })
}

fn transform(f: &FormClass, x0: i128, y0: i128, r: i128, s: i128) -> (i128, i128, i128) {
    let (a, b, c) = (f.a as i128, f.b as i128, f.c as i128);
    let aa = a * x0 * x0 + b * x0 * y0 + c * y0 * y0;
    let bb = 2 * (a * x0 * r + c * y0 * s) + b * (x0 * s + y0 * r);
    let cc = a * r * r + b * r * s + c * s * s;
    (aa, bb, cc)
}

/// A properly equivalent form whose leading coefficient is coprime to m.
pub fn represent_prime_to(f: &FormClass, m: i64) -> Result<FormClass> {
    let m = m.abs().max(1) as i128;
    for size in 1i128..=24 {
        for x in -size..=size {
            for y in -size..=size {
                if x.abs().max(y.abs()) != size && !(size == 1 && (x, y) != (0, 0)) {
                    continue;
                }
                if (x, y) == (0, 0) || gcd_i128(x, y) != 1 {
                    continue;
                }
                let v = f.a as i128 * x * x + f.b as i128 * x * y + f.c as i128 * y * y;
                if gcd_i128(v, m) == 1 {
                    // complete (x, y) to an SL2 matrix
                    let (_, s, t) = ext_gcd(x, y);
                    // x s' - y r' = 1 with r' = -t, s' = s
                    let (aa, bb, cc) = transform(f, x, y, -t, s);
                    debug_assert_eq!(x * s - y * (-t) * 1, 1 * (x * s + y * t));
                    return Ok(FormClass { a: aa as i64, b: bb as i64, c: cc as i64 });
                }
            }
        }
    }
    Err(Error::BoundExceeded("no small representation coprime to modulus".into()))
}

/// Gauss composition of two classes of the same discriminant.
pub fn compose(f1: &FormClass, f2: &FormClass) -> Result<FormClass> {
    if f1.disc() != f2.disc() {
        return Err(Error::DiscMismatch(f1.disc(), f2.disc()));
    }
    let disc = f1.disc() as i128;
    // put the second form into a shape with gcd(a1, a2') = 1
    let g2 = represent_prime_to(f2, f1.a)?;
    let a1 = f1.a as i128;
    let b1 = f1.b as i128;
    let a2 = g2.a as i128;
    let b2 = g2.b as i128;
    debug_assert_eq!(gcd_i128(a1, a2), 1);
    // Dirichlet composition: B = b1 mod 2a1, B = b2 mod 2a2
    let (_, inv_a1, _) = ext_gcd(a1, a2);
    // b1 and b2 have the same parity as disc
    let t = ((b2 - b1) / 2).rem_euclid(a2) * inv_a1.rem_euclid(a2) % a2;
    let big_b = b1 + 2 * a1 * t.rem_euclid(a2);
    let a3 = a1 * a2;
    let c3 = (big_b * big_b - disc) / (4 * a3);
    debug_assert_eq!((big_b * big_b - disc) % (4 * a3), 0);
    reduce_form(a3 as i64, big_b.rem_euclid(2 * a3) as i64, c3 as i64).or_else(|_| {
        // renormalize b into range before reducing
        let mut b = big_b.rem_euclid(2 * a3);
        if b > a3 {
            b -= 2 * a3;
        }
        let c = (b * b - disc) / (4 * a3);
        reduce_form(a3 as i64, b as i64, c as i64)
    })
}

/// Inverse class (a, -b, c).
pub fn inverse(f: &FormClass) -> Result<FormClass> {
    reduce_form(f.a, -f.b, f.c)
}

pub fn pow_class(f: &FormClass, e: u64) -> Result<FormClass> {
    let mut acc = principal_form(f.disc());
    let mut base = *f;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = compose(&acc, &base)?;
        }
        base = compose(&base, &base)?;
        e >>= 1;
    }
    Ok(acc)
}

/// Class-number formula h(O_c) = h(K) c prod_{l | c} (1 - (D|l)/l) / [R^x:O^x],
/// given h(K).
pub fn class_number_formula(order: &QuadOrder, h_fundamental: u64) -> u64 {
    let mut t: i128 = h_fundamental as i128;
    for (l, e) in factor(order.conductor) {
        let mut le = 1i128;
        for _ in 0..(e - 1) {
            le *= l as i128;
        }
        t *= le * (l as i128 - kronecker_prime(order.field.d, l) as i128);
    }
    (t / order.unit_index() as i128) as u64
}

/// The ring class group Pic(O), enumerated as reduced forms with a solved
/// abelian structure (Smith normal form over a chain of generators).
pub struct RingClassGroup {
    pub order: QuadOrder,
    pub elements: Vec<FormClass>,
    index: HashMap<FormClass, usize>,
    exps: Vec<Vec<i64>>,
    snf_u: Vec<Vec<i128>>,
    /// Invariant factors (diagonal of the Smith form, one per chain generator).
    pub snf_orders: Vec<u64>,
}

impl RingClassGroup {
    pub fn enumerate(order: QuadOrder) -> Result<Self> {
        let disc = order.disc;
        let mut elements = Vec::new();
        let bound = {
            let mut a = 1i64;
            while (a + 1) * (a + 1) * 3 <= -disc {
                a += 1;
            }
            a
        };
        for a in 1..=bound {
            for b in -a..=a {
                if (b - disc).rem_euclid(2) != 0 {
                    continue;
                }
                let num = b as i128 * b as i128 - disc as i128;
                if num % (4 * a as i128) != 0 {
                    continue;
                }
                let c = (num / (4 * a as i128)) as i64;
                if c < a {
                    continue;
                }
                if (b.abs() == a || a == c) && b < 0 {
                    continue;
                }
                let f = FormClass { a, b, c };
                if f.is_primitive() {
                    elements.push(f);
                }
            }
        }
        elements.sort();
        let index: HashMap<FormClass, usize> =
            elements.iter().enumerate().map(|(i, f)| (*f, i)).collect();
        let h = elements.len();

        // chain of generators: g_i^(o_i) lands in the previously generated
        // subgroup; remember exponent vectors as we grow
        let id = principal_form(disc);
        let mut exps_map: HashMap<FormClass, Vec<i64>> = HashMap::new();
        exps_map.insert(id, Vec::new());
        let mut gens: Vec<FormClass> = Vec::new();
        let mut rel_rows: Vec<Vec<i128>> = Vec::new();
        for f in &elements {
            if exps_map.contains_key(f) {
                continue;
            }
            let gi = gens.len();
            gens.push(*f);
            for v in exps_map.values_mut() {
                v.push(0);
            }
            // relative order of f over the current subgroup
            let mut powers = vec![id];
            let mut cur = *f;
            let _rel_ord = loop {
                if let Some(v) = exps_map.get(&cur) {
                    let mut row: Vec<i128> = v.iter().map(|&x| -(x as i128)).collect();
                    row[gi] = powers.len() as i128;
                    rel_rows.push(row);
                    break powers.len();
                }
                powers.push(cur);
                cur = compose(&cur, f)?;
            };
            // extend the subgroup by cosets s * f^j, j = 1..rel_ord
            let snapshot: Vec<(FormClass, Vec<i64>)> =
                exps_map.iter().map(|(k, v)| (*k, v.clone())).collect();
            for (s, ev) in snapshot {
                for (j, fj) in powers.iter().enumerate().skip(1) {
                    let prod = compose(&s, fj)?;
                    let mut e = ev.clone();
                    e[gi] = j as i64;
                    exps_map.insert(prod, e);
                }
            }
        }
        if exps_map.len() != h {
            return Err(Error::ConsistencyCheck(format!(
                "group closure produced {} elements, enumeration found {}",
                exps_map.len(),
                h
            )));
        }
        let r = gens.len();
        // pad relation rows to r columns
        let mut rel: Vec<Vec<i128>> = rel_rows
            .into_iter()
            .map(|mut row| {
                row.resize(r, 0);
                row
            })
            .collect();
        let (u, d) = smith_normal_form(&mut rel, r);
        let snf_orders: Vec<u64> = d.iter().map(|&x| x as u64).collect();
        let mut exps = vec![Vec::new(); h];
        for (f, v) in exps_map {
            exps[index[&f]] = v;
        }
        Ok(RingClassGroup { order, elements, index, exps, snf_u: u, snf_orders })
    }

    pub fn h(&self) -> u64 {
        self.elements.len() as u64
    }

    pub fn identity(&self) -> FormClass {
        principal_form(self.order.disc)
    }

    pub fn contains(&self, f: &FormClass) -> bool {
        self.index.contains_key(f)
    }

    /// Coordinates of a class on the Smith basis, one residue per invariant
    /// factor (modulo that factor).
    pub fn coords(&self, f: &FormClass) -> Result<Vec<u64>> {
        let i = *self.index.get(f).ok_or(Error::NotInGroup)?;
        let ev = &self.exps[i];
        let r = self.snf_orders.len();
        let mut out = vec![0u64; r];
        for (k, row) in self.snf_u.iter().enumerate() {
            let mut acc: i128 = 0;
            for (j, &uj) in row.iter().enumerate() {
                acc += uj * ev[j] as i128;
            }
            let m = self.snf_orders[k] as i128;
            out[k] = if m <= 1 { 0 } else { acc.rem_euclid(m) as u64 };
        }
        Ok(out)
    }

    /// Nontrivial cyclic factors.
    pub fn cycle_sizes(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.snf_orders.iter().copied().filter(|&d| d > 1).collect();
        v.sort();
        v
    }
}

/// Smith normal form of a square integer matrix; returns (U, diag) with
/// U A V = diag for unimodular U, V (V is not needed by callers).
fn smith_normal_form(a: &mut Vec<Vec<i128>>, r: usize) -> (Vec<Vec<i128>>, Vec<i128>) {
    let mut u: Vec<Vec<i128>> = (0..r)
        .map(|i| (0..r).map(|j| if i == j { 1 } else { 0 }).collect())
        .collect();
    if r == 0 {
        return (u, Vec::new());
    }
    let n = r;
    for t in 0..n {
        loop {
            // find pivot: smallest nonzero |entry| in the submatrix
            let mut piv: Option<(usize, usize)> = None;
            for i in t..n {
                for j in t..n {
                    if a[i][j] != 0
                        && piv.map_or(true, |(pi, pj)| a[i][j].abs() < a[pi][pj].abs())
                    {
                        piv = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = piv else { break };
            a.swap(t, pi);
            u.swap(t, pi);
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            let mut done = true;
            for i in (t + 1)..n {
                let q = a[i][t].div_euclid(a[t][t]);
                if q != 0 || a[i][t] != 0 {
                    for j in 0..n {
                        a[i][j] -= q * a[t][j];
                        let ut = u[t][j];
                        u[i][j] -= q * ut;
                    }
                    if a[i][t] != 0 {
                        done = false;
                    }
                }
            }
            for j in (t + 1)..n {
                let q = a[t][j].div_euclid(a[t][t]);
                if q != 0 {
                    for i in 0..n {
                        a[i][j] -= q * a[i][t];
                    }
                }
                if a[t][j] != 0 {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if a[t][t] < 0 {
            for j in 0..n {
                a[t][j] = -a[t][j];
                u[t][j] = -u[t][j];
            }
        }
    }
    // enforce divisibility d_t | d_{t+1}
    loop {
        let mut fixed = true;
        for t in 0..n.saturating_sub(1) {
            if a[t][t] != 0 && a[t + 1][t + 1] % a[t][t] != 0 {
                // add column t+1 to column t and re-eliminate locally
                for i in 0..n {
                    a[i][t] += a[i][t + 1];
                }
                let g = gcd_i128(a[t][t], a[t + 1][t]);
                let (_, x, y) = ext_gcd(a[t][t], a[t + 1][t]);
                // row_t <- x row_t + y row_{t+1}; row_{t+1} adjusted to clear
                let (rt, rt1) = (a[t].clone(), a[t + 1].clone());
                let (ut, ut1) = (u[t].clone(), u[t + 1].clone());
                let ct = a[t][t] / g;
                let ct1 = a[t + 1][t] / g;
                for j in 0..n {
                    a[t][j] = x * rt[j] + y * rt1[j];
                    u[t][j] = x * ut[j] + y * ut1[j];
                    a[t + 1][j] = -ct1 * rt[j] + ct * rt1[j];
                    u[t + 1][j] = -ct1 * ut[j] + ct * ut1[j];
                }
                // clear the off-diagonal in column t+1 introduced above
                let q = a[t][t + 1].div_euclid(a[t][t].max(1));
                if a[t][t] != 0 && q != 0 {
                    for i in 0..n {
                        a[i][t + 1] -= q * a[i][t];
                    }
                }
                fixed = false;
            }
        }
        if fixed {
            break;
        }
    }
    let d = (0..n).map(|t| a[t][t].abs()).collect();
    (u, d)
}

// ---- ideals as lattices in (1, tau) coordinates ----

/// Rank-2 lattice in K, columns over (1, tau), with a common denominator.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub m: [[i128; 2]; 2], // columns
    pub den: i128,
}

fn tau_mul(field: &QuadField, v: (i128, i128), w: (i128, i128)) -> (i128, i128) {
    let (t, n0) = field.tau_trace_norm();
    let (x1, y1) = v;
    let (x2, y2) = w;
    (x1 * x2 - n0 as i128 * y1 * y2, x1 * y2 + x2 * y1 + t as i128 * y1 * y2)
}

fn tau_norm(field: &QuadField, v: (i128, i128)) -> i128 {
    let (t, n0) = field.tau_trace_norm();
    v.0 * v.0 + t as i128 * v.0 * v.1 + n0 as i128 * v.1 * v.1
}

/// Tr(alpha conj(beta)).
fn tau_trace_pair(field: &QuadField, a: (i128, i128), b: (i128, i128)) -> i128 {
    let (t, n0) = field.tau_trace_norm();
    2 * a.0 * b.0 + t as i128 * (a.0 * b.1 + b.0 * a.1) + 2 * n0 as i128 * a.1 * b.1
}

/// Hermite-style basis of the lattice spanned by the given vectors.
fn hnf_of_generators(gens: &[(i128, i128)]) -> Result<[[i128; 2]; 2]> {
    let mut v: (i128, i128) = (0, 0);
    let mut rest: Vec<(i128, i128)> = Vec::new();
    for &g in gens {
        if g == (0, 0) {
            continue;
        }
        if v.1 == 0 {
            if g.1 != 0 {
                rest.push((v.0, 0));
                v = g;
            } else {
                rest.push(g);
            }
            continue;
        }
        if g.1 == 0 {
            rest.push(g);
            continue;
        }
        // combine to gcd in the tau-coordinate
        let (gg, x, y) = ext_gcd(v.1, g.1);
        let new_v = (x * v.0 + y * g.0, gg);
        let k1 = v.1 / gg;
        let k2 = g.1 / gg;
        // eliminate: k2 * v - k1 * g has tau-coordinate 0
        rest.push((k2 * v.0 - k1 * g.0, 0));
        v = new_v;
    }
    if v.1 == 0 {
        return Err(Error::BadInput("lattice is not of full rank".into()));
    }
    // reduce leftover x-parts
    let mut w = 0i128;
    for (x, y) in rest {
        debug_assert_eq!(y, 0);
        w = gcd_i128(w, x);
    }
    if w == 0 {
        return Err(Error::BadInput("lattice is not of full rank".into()));
    }
    Ok([[w, v.0], [0, v.1]])
}

impl Lattice {
    /// The ideal [a, (-b + sqrt(disc))/2] attached to a form of the order.
    pub fn from_form(order: &QuadOrder, f: &FormClass) -> Result<Self> {
        if f.disc() != order.disc {
            return Err(Error::DiscMismatch(f.disc(), order.disc));
        }
        let cond = order.conductor as i128;
        let (t, _) = order.field.tau_trace_norm();
        let x2 = if t == 1 { -(f.b as i128) - cond } else { -(f.b as i128) };
        debug_assert_eq!(x2.rem_euclid(2), 0);
        Ok(Lattice { m: [[2 * f.a as i128, x2], [0, 2 * cond]], den: 2 })
    }

    /// The order itself as a lattice (basis 1, c tau).
    pub fn from_order(order: &QuadOrder) -> Self {
        Lattice { m: [[1, 0], [0, order.conductor as i128]], den: 1 }
    }

    fn cols(&self) -> [(i128, i128); 2] {
        [(self.m[0][0], self.m[1][0]), (self.m[0][1], self.m[1][1])]
    }

    fn det(&self) -> i128 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    fn normalized(mut self) -> Self {
        let g = gcd_i128(
            gcd_i128(gcd_i128(self.m[0][0], self.m[0][1]), gcd_i128(self.m[1][0], self.m[1][1])),
            self.den,
        );
        if g > 1 {
            for r in 0..2 {
                for c in 0..2 {
                    self.m[r][c] /= g;
                }
            }
            self.den /= g;
        }
        self
    }

    /// Product lattice (ideal multiplication): span of pairwise products.
    pub fn product(&self, other: &Self, field: &QuadField) -> Result<Self> {
        let mut gens = Vec::with_capacity(4);
        for &v in &self.cols() {
            for &w in &other.cols() {
                gens.push(tau_mul(field, v, w));
            }
        }
        let m = hnf_of_generators(&gens)?;
        Ok(Lattice { m, den: self.den * other.den }.normalized())
    }

    /// Intersection of two full-rank lattices.
    pub fn intersect(&self, other: &Self) -> Result<Self> {
        let d = lcm_i128(self.den, other.den);
        let s1 = d / self.den;
        let s2 = d / other.den;
        let a = [[self.m[0][0] * s1, self.m[0][1] * s1], [self.m[1][0] * s1, self.m[1][1] * s1]];
        let b =
            [[other.m[0][0] * s2, other.m[0][1] * s2], [other.m[1][0] * s2, other.m[1][1] * s2]];
        // kernel of [A | -B] : Z^4 -> Z^2, then map t-part through A
        let rows = [
            [a[0][0], a[0][1], -b[0][0], -b[0][1]],
            [a[1][0], a[1][1], -b[1][0], -b[1][1]],
        ];
        let kern = int_kernel_2x4(&rows);
        let mut gens = Vec::new();
        for k in kern {
            let t = (k[0], k[1]);
            gens.push((a[0][0] * t.0 + a[0][1] * t.1, a[1][0] * t.0 + a[1][1] * t.1));
        }
        let m = hnf_of_generators(&gens)?;
        Ok(Lattice { m, den: d }.normalized())
    }

    /// Norm of a proper ideal of the order: |det| / den^2 / conductor.
    pub fn norm(&self, order: &QuadOrder) -> i128 {
        self.det().abs() / (self.den * self.den) / order.conductor as i128
    }

    /// Recover the reduced form class of this lattice viewed as a proper
    /// ideal of the order.
    pub fn to_form(&self, order: &QuadOrder) -> Result<FormClass> {
        let mut cols = self.cols();
        let mut det = self.det();
        if det == 0 {
            return Err(Error::BadInput("degenerate lattice".into()));
        }
        if det < 0 {
            cols.swap(0, 1);
            det = -det;
        }
        // N(L) relative to the order, times den^2 to stay integral
        let nl_num = det; // = N(L) * den^2 * conductor
        let cond = order.conductor as i128;
        let field = &order.field;
        let na = tau_norm(field, cols[0]);
        let nb = tau_norm(field, cols[1]);
        let tr = tau_trace_pair(field, cols[0], cols[1]);
        // a = N(alpha)/N(L) etc.; all live over the same denominator
        let scale = nl_num / cond;
        if scale == 0 || na % scale != 0 || nb % scale != 0 || tr % scale != 0 {
            return Err(Error::NotDivisible("lattice is not proper for the order".into()));
        }
        let a = na / scale;
        let b = -tr / scale;
        let c = nb / scale;
        if b * b - 4 * a * c != order.disc as i128 {
            return Err(Error::ConsistencyCheck("lattice form has wrong discriminant".into()));
        }
        reduce_form(a as i64, b as i64, c as i64)
    }
}

fn lcm_i128(a: i128, b: i128) -> i128 {
    a / gcd_i128(a, b) * b
}

/// Kernel of a 2x4 integer matrix (expected rank 2): basis of the rank-2
/// solution lattice, via column echelon with transformation tracking.
fn int_kernel_2x4(rows: &[[i128; 4]; 2]) -> Vec<[i128; 2]> {
    let mut m = *rows;
    let mut v: Vec<[i128; 4]> = (0..4)
        .map(|i| {
            let mut e = [0i128; 4];
            e[i] = 1;
            e
        })
        .collect();
    let mut pivot_col = 0usize;
    for r in 0..2 {
        loop {
            let mut best: Option<usize> = None;
            for j in pivot_col..4 {
                if m[r][j] != 0 && best.map_or(true, |b| m[r][j].abs() < m[r][b].abs()) {
                    best = Some(j);
                }
            }
            let Some(bj) = best else { break };
            for row in m.iter_mut() {
                row.swap(pivot_col, bj);
            }
            v.swap(pivot_col, bj);
            let piv = m[r][pivot_col];
            let mut clean = true;
            for j in (pivot_col + 1)..4 {
                let q = m[r][j].div_euclid(piv);
                if q != 0 {
                    for row in m.iter_mut() {
                        row[j] -= q * row[pivot_col];
                    }
                    for k in 0..4 {
                        let t = v[pivot_col][k];
                        v[j][k] -= q * t;
                    }
                }
                if m[r][j] != 0 {
                    clean = false;
                }
            }
            if clean {
                break;
            }
        }
        if m[r][pivot_col] != 0 {
            pivot_col += 1;
        }
    }
    // columns past the pivots are in the kernel
    (pivot_col..4).map(|j| [v[j][0], v[j][1]]).collect()
}

/// Is p split in the field? (Kronecker symbol +1; errors when p | D.)
pub fn is_split(p: u64, field: &QuadField) -> Result<bool> {
    if p == 2 || field.d.rem_euclid(p as i64) == 0 {
        if field.d.rem_euclid(p as i64) == 0 {
            return Err(Error::Ramified { p, d: field.d });
        }
    }
    Ok(kronecker_prime(field.d, p) == 1)
}

/// Hensel-lifted root data for a split prime: tau = r mod frak-p^k and
/// tau = rbar mod conj(frak-p)^k.
pub fn split_roots(field: &QuadField, p: u64, k: u32) -> Result<(u64, u64)> {
    if !is_split(p, field)? {
        return Err(Error::NotSplit { p, d: field.d });
    }
    let (t, n0) = field.tau_trace_norm();
    let pk = (0..k).fold(1u64, |a, _| a * p);
    // find the roots of x^2 - t x + n0 mod p, pick the smaller as canonical
    let mut r0 = None;
    for x in 0..p {
        let v = (x as i128 * x as i128 - t as i128 * x as i128 + n0 as i128)
            .rem_euclid(p as i128);
        if v == 0 {
            r0 = Some(x);
            break;
        }
    }
    let mut r = r0.expect("split prime has a root") as i128;
    let m = pk as i128;
    // Newton: r <- r - f(r)/f'(r)
    for _ in 0..(k + 1) {
        let fr = (r * r - t as i128 * r + n0 as i128).rem_euclid(m);
        let dfr = (2 * r - t as i128).rem_euclid(m);
        let (g, inv, _) = ext_gcd(dfr, m);
        debug_assert_eq!(g, 1);
        r = (r - fr * inv).rem_euclid(m);
    }
    let rbar = (t as i128 - r).rem_euclid(m);
    Ok((r as u64, rbar as u64))
}

/// The class in Pic(R_{c p^n}) of the kernel generator attached to
/// u in (Z/p^n)^x: the contraction of (alpha) for alpha = u mod frak-p^n,
/// 1 mod conj(frak-p)^n, 1 mod c.
pub fn kernel_class(order_top: &QuadOrder, p: u64, n: u32, u: u64) -> Result<FormClass> {
    let field = order_top.field;
    let pn = (0..n).fold(1u64, |a, _| a * p);
    if order_top.conductor % pn != 0 {
        return Err(Error::ConductorMismatch(format!(
            "order conductor {} is not divisible by p^n = {}",
            order_top.conductor, pn
        )));
    }
    let c = order_top.conductor / pn;
    if u % p == 0 {
        return Err(Error::NonUnit);
    }
    let (r, rbar) = split_roots(&field, p, n)?;
    let m = pn as i128;
    // alpha = x + y tau with x + y r = u, x + y rbar = 1 (mod p^n)
    let diff = (r as i128 - rbar as i128).rem_euclid(m);
    let (g, inv, _) = ext_gcd(diff, m);
    debug_assert_eq!(g, 1);
    let y_p = ((u as i128 - 1) * inv).rem_euclid(m);
    let x_p = (1 - y_p * rbar as i128).rem_euclid(m);
    // combine with alpha = 1 mod c
    let (x, y) = if c == 1 {
        (x_p, y_p)
    } else {
        let ci = c as i128;
        let (g2, minv, _) = ext_gcd(m, ci);
        if g2 != 1 {
            return Err(Error::ConductorMismatch("conductor must be prime to p".into()));
        }
        // CRT: z = z_p mod p^n, z = z_c mod c
        let crt = |zp: i128, zc: i128| -> i128 {
            let t = ((zc - zp).rem_euclid(ci) * minv.rem_euclid(ci)).rem_euclid(ci);
            (zp + m * t).rem_euclid(m * ci)
        };
        (crt(x_p, 1), crt(y_p, 0))
    };
    let alpha = (x, y);
    let alpha_tau = tau_mul(&field, alpha, (0, 1));
    let principal = Lattice { m: hnf_of_generators(&[alpha, alpha_tau])?, den: 1 };
    let contracted = principal.intersect(&Lattice::from_order(order_top))?;
    contracted.to_form(order_top)
}

/// Projection Pic(R_{c'}) -> Pic(R_c) for c | c': extend the ideal to the
/// larger order and re-reduce.
pub fn project_class(
    f: &FormClass,
    src: &QuadOrder,
    dst: &QuadOrder,
) -> Result<FormClass> {
    if src.field != dst.field || src.conductor % dst.conductor != 0 {
        return Err(Error::ConductorMismatch(format!(
            "cannot project conductor {} to {}",
            src.conductor, dst.conductor
        )));
    }
    let ratio = (src.conductor / dst.conductor) as i64;
    let g = represent_prime_to(f, ratio)?;
    let lat = Lattice::from_form(src, &g)?;
    let dst_lat = Lattice::from_order(dst);
    let ext = lat.product(&dst_lat, &src.field)?;
    ext.to_form(dst)
}

/// Lift a class to a larger conductor (smaller order) by contraction; the
/// canonical lift used by the fiber labeling.
pub fn lift_class(f: &FormClass, src: &QuadOrder, dst: &QuadOrder) -> Result<FormClass> {
    if src.field != dst.field || dst.conductor % src.conductor != 0 {
        return Err(Error::ConductorMismatch(format!(
            "cannot lift conductor {} to {}",
            src.conductor, dst.conductor
        )));
    }
    let ratio = (dst.conductor / src.conductor) as i64;
    let g = represent_prime_to(f, ratio)?;
    let lat = Lattice::from_form(src, &g)?;
    let contracted = lat.intersect(&Lattice::from_order(dst))?;
    contracted.to_form(dst)
}

/// The level-0 translation class: the contraction of conj(frak-p)^n to the
/// conductor-c order. Fibers in the tower are reported over the base class
/// itself; callers needing the shifted convention compose with this.
pub fn shift_class(field: &QuadField, c: u64, p: u64, n: u32) -> Result<FormClass> {
    let order = QuadOrder::new(*field, c)?;
    let (_, rbar) = split_roots(&field, p, 1)?;
    let pbar = Lattice {
        m: hnf_of_generators(&[(p as i128, 0), (-(rbar as i128), 1)])?,
        den: 1,
    };
    let mut acc = Lattice::from_order(&QuadOrder::new(*field, 1)?);
    for _ in 0..n {
        acc = acc.product(&pbar, field)?;
    }
    let contracted = acc.intersect(&Lattice::from_order(&order))?;
    contracted.to_form(&order)
}

/// The fiber of Pic(R_{c p^n}) -> Pic(R_c) over the class of `base`,
/// labeled by u in (Z/p^n)^x. The label convention pairs u with the kernel
/// class of -u composed with the canonical lift of the base, so that the
/// root-of-unity evaluation t = zeta^u downstream matches the Gauss-sum
/// unfolding exactly.
pub struct FiberClasses {
    pub level: u32,
    pub base: FormClass,
    pub labeled: Vec<(u64, FormClass)>,
}

pub fn fiber_classes(
    base: &FormClass,
    order_base: &QuadOrder,
    p: u64,
    n: u32,
) -> Result<FiberClasses> {
    if order_base.field.w_k > 2 && order_base.conductor == 1 {
        return Err(Error::UnitObstruction);
    }
    if !is_split(p, &order_base.field)? {
        return Err(Error::NotSplit { p, d: order_base.field.d });
    }
    let pn = (0..n).fold(1u64, |a, _| a * p);
    let top = QuadOrder::new(order_base.field, order_base.conductor * pn)?;
    let lift = lift_class(base, order_base, &top)?;
    let mut labeled = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for u in 1..pn {
        if u % p == 0 {
            continue;
        }
        let neg_u = pn - u;
        let k = kernel_class(&top, p, n, neg_u)?;
        let cls = compose(&k, &lift)?;
        if !seen.insert(cls) {
            return Err(Error::ConsistencyCheck(format!(
                "fiber labels collide at u = {u}"
            )));
        }
        labeled.push((u, cls));
    }
    Ok(FiberClasses { level: n, base: *base, labeled })
}

/// A proper ideal of norm `g^2 * a`, recorded as its primitive part (a form)
/// and the content g.
#[derive(Debug, Clone, Copy)]
pub struct IdealOfNorm {
    pub content: u64,
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl IdealOfNorm {
    pub fn class(&self) -> Result<FormClass> {
        reduce_form(self.a, self.b, self.c)
    }
}

/// All proper ideals of the order with norm exactly `n`.
pub fn ideals_of_norm(order: &QuadOrder, n: u64) -> Result<Vec<IdealOfNorm>> {
    if n == 0 || n > 5_000_000 {
        return Err(Error::BoundExceeded(format!("norm {n}")));
    }
    let disc = order.disc as i128;
    let mut out = Vec::new();
    let mut g = 1u64;
    while g * g <= n {
        if n % (g * g) == 0 {
            let a = (n / (g * g)) as i128;
            let parity = disc.rem_euclid(2);
            let mut b = parity;
            while b < 2 * a {
                let num = b * b - disc;
                if num % (4 * a) == 0 {
                    let c = num / (4 * a);
                    if gcd_i128(gcd_i128(a, b), c) == 1 {
                        out.push(IdealOfNorm {
                            content: g,
                            a: a as i64,
                            b: b as i64,
                            c: c as i64,
                        });
                    }
                }
                b += 2;
            }
        }
        g += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(d: i64) -> QuadField {
        QuadField::new(d).unwrap()
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(
            reduce_form(1, 0, 25).unwrap(),
            FormClass { a: 1, b: 0, c: 25 }
        );
        assert_eq!(
            reduce_form(13, -2, 2).unwrap(),
            FormClass { a: 2, b: 2, c: 13 }
        );
        assert_eq!(reduce_form(1, 1, 3).unwrap(), FormClass { a: 1, b: 1, c: 3 });
        assert!(matches!(reduce_form(2, 0, 4), Err(Error::NotPrimitive)));
        assert!(matches!(reduce_form(1, 5, 2), Err(Error::NotDefinite)));
    }

    #[test]
    fn class_numbers_along_the_tower() {
        let f = field(-11);
        for (c, h) in [(1u64, 1u64), (5, 4), (25, 20)] {
            let order = QuadOrder::new(f, c).unwrap();
            let g = RingClassGroup::enumerate(order).unwrap();
            assert_eq!(g.h(), h, "conductor {c}");
            assert_eq!(class_number_formula(&order, 1), h);
        }
    }

    #[test]
    fn class_number_minus_100() {
        let f = field(-4);
        let order = QuadOrder::new(f, 5).unwrap();
        let g = RingClassGroup::enumerate(order).unwrap();
        assert_eq!(g.h(), 2);
        assert_eq!(class_number_formula(&order, 1), 2);
        assert!(g.elements.contains(&FormClass { a: 2, b: 2, c: 13 }));
    }

    #[test]
    fn composition_group_laws() {
        // disc -100: the nonprincipal class has order 2
        let x = FormClass { a: 2, b: 2, c: 13 };
        let sq = compose(&x, &x).unwrap();
        assert_eq!(sq, principal_form(-100));
        // disc -275: inverse law on every class
        let order = QuadOrder::new(field(-11), 5).unwrap();
        let g = RingClassGroup::enumerate(order).unwrap();
        for f in &g.elements {
            let inv = inverse(f).unwrap();
            assert_eq!(compose(f, &inv).unwrap(), g.identity());
            let id = compose(f, &g.identity()).unwrap();
            assert_eq!(id, *f);
        }
        // associativity spot checks
        let e = &g.elements;
        for i in 0..e.len() {
            for j in 0..e.len() {
                for k in 0..e.len() {
                    let lhs = compose(&compose(&e[i], &e[j]).unwrap(), &e[k]).unwrap();
                    let rhs = compose(&e[i], &compose(&e[j], &e[k]).unwrap()).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn group_structure_is_cyclic_where_expected() {
        let g = RingClassGroup::enumerate(QuadOrder::new(field(-11), 5).unwrap()).unwrap();
        assert_eq!(g.cycle_sizes(), vec![4]);
        let g2 = RingClassGroup::enumerate(QuadOrder::new(field(-11), 25).unwrap()).unwrap();
        assert_eq!(g2.cycle_sizes(), vec![20]);
        // coords are consistent with composition
        for x in &g2.elements {
            for y in &g2.elements[..4] {
                let cx = g2.coords(x).unwrap();
                let cy = g2.coords(y).unwrap();
                let cz = g2.coords(&compose(x, y).unwrap()).unwrap();
                for i in 0..cx.len() {
                    let m = g2.snf_orders[i];
                    if m > 1 {
                        assert_eq!((cx[i] + cy[i]) % m, cz[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn projection_is_surjective_with_even_fibers() {
        let f = field(-11);
        let big = QuadOrder::new(f, 25).unwrap();
        let small = QuadOrder::new(f, 5).unwrap();
        let gb = RingClassGroup::enumerate(big).unwrap();
        let gs = RingClassGroup::enumerate(small).unwrap();
        let mut counts: HashMap<FormClass, u64> = HashMap::new();
        for x in &gb.elements {
            let y = project_class(x, &big, &small).unwrap();
            assert!(gs.contains(&y));
            *counts.entry(y).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), gs.elements.len(), "projection must be surjective");
        for (_, n) in counts {
            assert_eq!(n, 5);
        }
    }

    #[test]
    fn projection_is_a_homomorphism() {
        let f = field(-11);
        let big = QuadOrder::new(f, 25).unwrap();
        let small = QuadOrder::new(f, 5).unwrap();
        let gb = RingClassGroup::enumerate(big).unwrap();
        for x in &gb.elements {
            for y in gb.elements.iter().step_by(3) {
                let pxy = project_class(&compose(x, y).unwrap(), &big, &small).unwrap();
                let px = project_class(x, &big, &small).unwrap();
                let py = project_class(y, &big, &small).unwrap();
                assert_eq!(pxy, compose(&px, &py).unwrap());
            }
        }
    }

    #[test]
    fn lift_then_project_is_identity() {
        let f = field(-11);
        let small = QuadOrder::new(f, 1).unwrap();
        let big = QuadOrder::new(f, 25).unwrap();
        let up = lift_class(&principal_form(-11), &small, &big).unwrap();
        let down = project_class(&up, &big, &small).unwrap();
        assert_eq!(down, principal_form(-11));
    }

    #[test]
    fn kernel_map_is_multiplicative_and_fills_the_kernel() {
        let f = field(-11);
        for n in [1u32, 2] {
            let pn = 5u64.pow(n);
            let top = QuadOrder::new(f, pn).unwrap();
            let gtop = RingClassGroup::enumerate(top).unwrap();
            let mut seen = std::collections::HashSet::new();
            for u in (1..pn).filter(|u| u % 5 != 0) {
                let k = kernel_class(&top, 5, n, u).unwrap();
                assert!(gtop.contains(&k));
                seen.insert(k);
            }
            assert_eq!(seen.len() as u64, pn / 5 * 4, "kernel map must be injective");
            // homomorphism spot check
            let k2 = kernel_class(&top, 5, n, 2 % pn).unwrap();
            let k3 = kernel_class(&top, 5, n, 3 % pn).unwrap();
            let k6 = kernel_class(&top, 5, n, 6 % pn).unwrap();
            assert_eq!(compose(&k2, &k3).unwrap(), k6);
        }
    }

    #[test]
    fn fiber_classes_match_brute_force() {
        let f = field(-11);
        let base_order = QuadOrder::new(f, 1).unwrap();
        for n in [1u32, 2] {
            let fib = fiber_classes(&principal_form(-11), &base_order, 5, n).unwrap();
            let expect = 5u64.pow(n) / 5 * 4;
            assert_eq!(fib.labeled.len() as u64, expect);
            // brute force: all classes of the top order projecting to the base
            let top = QuadOrder::new(f, 5u64.pow(n)).unwrap();
            let gt = RingClassGroup::enumerate(top).unwrap();
            let brute: std::collections::HashSet<FormClass> = gt
                .elements
                .iter()
                .filter(|x| {
                    project_class(x, &top, &base_order).unwrap() == principal_form(-11)
                })
                .copied()
                .collect();
            let ours: std::collections::HashSet<FormClass> =
                fib.labeled.iter().map(|(_, c)| *c).collect();
            assert_eq!(brute, ours);
        }
    }

    #[test]
    fn unit_obstruction_fires() {
        let f = field(-4);
        let base = QuadOrder::new(f, 1).unwrap();
        assert!(matches!(
            fiber_classes(&principal_form(-4), &base, 5, 1),
            Err(Error::UnitObstruction)
        ));
    }

    #[test]
    fn splitting_criteria() {
        assert!(is_split(5, &field(-11)).unwrap());
        assert!(is_split(5, &field(-4)).unwrap());
        assert!(!is_split(7, &field(-11)).unwrap());
        assert!(matches!(is_split(11, &field(-11)), Err(Error::Ramified { .. })));
    }

    #[test]
    fn gaussian_ideal_counts() {
        let order = QuadOrder::new(field(-4), 1).unwrap();
        assert_eq!(ideals_of_norm(&order, 1).unwrap().len(), 1);
        assert_eq!(ideals_of_norm(&order, 5).unwrap().len(), 2);
        assert_eq!(ideals_of_norm(&order, 3).unwrap().len(), 0);
        // Dedekind zeta coefficient identity up to 500
        for n in 1..=500u64 {
            let count = ideals_of_norm(&order, n).unwrap().len() as i64;
            let divisor_sum: i64 = (1..=n)
                .filter(|d| n % d == 0)
                .map(|d| kronecker_prime_or_composite(-4, d))
                .sum();
            assert_eq!(count, divisor_sum, "n = {n}");
        }
    }

    // multiplicative extension of the Kronecker symbol to composite d
    fn kronecker_prime_or_composite(disc: i64, mut n: u64) -> i64 {
        let mut out = 1i64;
        let mut q = 2u64;
        while q * q <= n {
            while n % q == 0 {
                out *= kronecker_prime(disc, q);
                n /= q;
            }
            q += 1;
        }
        if n > 1 {
            out *= kronecker_prime(disc, n);
        }
        out
    }

    #[test]
    fn second_tower_minus_8() {
        // p = 3 splits in Q(sqrt(-2)); h(-8) = 1, h(-72) = 2
        let f = field(-8);
        assert!(is_split(3, &f).unwrap());
        let g = RingClassGroup::enumerate(QuadOrder::new(f, 3).unwrap()).unwrap();
        assert_eq!(g.h(), 2);
        let fib = fiber_classes(&principal_form(-8), &QuadOrder::new(f, 1).unwrap(), 3, 1)
            .unwrap();
        assert_eq!(fib.labeled.len(), 2);
    }

    #[test]
    fn shift_class_is_trivial_for_class_number_one() {
        let f = field(-11);
        for n in [1u32, 2] {
            let s = shift_class(&f, 1, 5, n).unwrap();
            assert_eq!(s, principal_form(-11));
        }
    }
}
