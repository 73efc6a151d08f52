//! Assembly of the anticyclotomic measures: per-ideal-class measures from
//! t-expansion data, the single-variable measure on the class tower with
//! its Mazur--Mellin transform, the Gauss-sum unfolding over tower fibers,
//! and the two-variable measure whose weight-k slices recover the
//! single-variable ones.
//!
//! The t-expansions at CM points are pluggable inputs (synthetic Dirac
//! combinations, Eisenstein-family coefficients, or file-loaded series);
//! everything downstream of them is computed and cross-checked here.

use std::collections::HashMap;
use std::sync::Arc;

use crate::characters::{gauss_sum, ClassGroupChar, DirichletChar, UnityRoot};
use crate::cyclotomic::{CycloContext, CycloElt};
use crate::error::{Error, Result};
use crate::measure::{
    distribution_exact, eval_at_root, integration_identity_check, twist_pointwise, Coeff,
    PowerSeries,
};
use crate::modforms::LambdaQExp;
use crate::padic::{decompose_unit, PadicContext, PadicElt};
use crate::quadratic::{
    compose, fiber_classes, inverse, kernel_class, lift_class, FormClass, QuadField, QuadOrder,
    RingClassGroup,
};

/// Scalar t-expansion data for one ideal class: the class representative,
/// the folded central-character scalar, and the expansion itself.
#[derive(Debug, Clone)]
pub struct SingleVarClass {
    pub class_rep: FormClass,
    /// lambda-hat evaluated at the inverse class (a unit)
    pub lam_scalar: PadicElt,
    pub texp: PowerSeries<PadicElt>,
}

/// The single-variable measure on the anticyclotomic tower: one unit-
/// supported measure per class of the base ring class group.
#[derive(Debug, Clone)]
pub struct SingleVarMeasure {
    pub field: QuadField,
    /// conductor of the base order (the prime-to-p part of the tower)
    pub conductor: u64,
    pub p: u64,
    pub classes: Vec<SingleVarClass>,
}

impl SingleVarMeasure {
    /// Validates that every per-class expansion is supported on the units
    /// (the depletion consequence) at levels 1 and 2.
    pub fn new(
        field: QuadField,
        conductor: u64,
        p: u64,
        classes: Vec<SingleVarClass>,
    ) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::BadInput("need at least one class".into()));
        }
        for (j, cls) in classes.iter().enumerate() {
            if !cls.lam_scalar.is_unit() {
                return Err(Error::BadInput(format!("class {j}: lambda scalar must be a unit")));
            }
            for level in [1u32, 2] {
                if !crate::measure::is_unit_supported(&cls.texp, p, level)? {
                    return Err(Error::ConsistencyCheck(format!(
                        "class {j}: expansion is not supported on the units at level {level}"
                    )));
                }
            }
        }
        Ok(SingleVarMeasure { field, conductor, p, classes })
    }
}

/// An anticyclotomic character in the shape the constructions consume:
/// level-0 values on the class representatives, a Dirichlet character of
/// conductor p^s on the tower fiber coordinate, and the infinity exponent.
#[derive(Debug, Clone)]
pub struct AnticycloCharSpec {
    /// tower level (conductor of the wild part is p^s)
    pub s: u32,
    pub chi_p: DirichletChar,
    /// one value per class of the measure, at the inverse representative
    pub cl0_values: Vec<UnityRoot>,
    pub m: u32,
}

impl AnticycloCharSpec {
    pub fn validate(&self, h_minus: usize) -> Result<()> {
        if self.cl0_values.len() != h_minus {
            return Err(Error::BadInput("one level-0 value per class".into()));
        }
        if self.chi_p.n != self.s {
            return Err(Error::BadInput("chi_p conductor exponent must equal s".into()));
        }
        if self.s >= 1 && !self.chi_p.is_primitive() {
            return Err(Error::NotPrimitiveChar);
        }
        Ok(())
    }

    /// The character of conductor p^0 or p^s with trivial class-group part.
    pub fn from_dirichlet(chi_p: DirichletChar, m: u32, h_minus: usize) -> Self {
        AnticycloCharSpec {
            s: chi_p.n,
            chi_p,
            cl0_values: vec![UnityRoot::one(chi_p.p); h_minus],
            m,
        }
    }
}

fn unit_indicator(ctx: &Arc<PadicContext>) -> Vec<PadicElt> {
    (0..ctx.p)
        .map(|b| if b == 0 { PadicElt::zero(ctx) } else { PadicElt::one(ctx) })
        .collect()
}

/// chi_p(b) z^m table at level max(s, 1), as cyclotomic multipliers
/// (zero off the units).
fn avatar_table(
    chi_p: &DirichletChar,
    m: u32,
    ctx: &Arc<CycloContext>,
) -> Result<Vec<CycloElt>> {
    let p = ctx.base().p;
    let n = ctx.n;
    let pn = (0..n).fold(1u64, |a, _| a * p);
    (0..pn)
        .map(|b| {
            if b % p == 0 {
                Ok(CycloElt::zero(ctx))
            } else {
                let root = chi_p.eval(b)?.embed_cyclo(ctx)?;
                let zm = PadicElt::from_u64(ctx.base(), b).pow_u64(m as u64);
                Ok(root.mul_base(&zm))
            }
        })
        .collect()
}

/// The inner unit-group integral int chi_p(z) z^m dmu for one class, by the
/// exact twist-then-moment route. For s >= 1 the Gauss-sum route is
/// computed as well and must agree.
fn unit_integral(
    texp: &PowerSeries<PadicElt>,
    chi_p: &DirichletChar,
    m: u32,
    ctx: &Arc<CycloContext>,
) -> Result<CycloElt> {
    let p = ctx.base().p;
    if chi_p.n == 0 {
        // restrict to units, then take the plain moment
        let ind = unit_indicator(ctx.base());
        let restricted = twist_pointwise(texp, &ind, p, 1)?;
        let zm_table: Vec<CycloElt> = avatar_table(&DirichletChar::trivial(p), m, ctx)?;
        // the moment of z^m over units: twist by z^m indicator then moment 0
        // (equivalently moment m of the restricted series)
        let _ = zm_table;
        let value = restricted.moment(m)?;
        return Ok(CycloElt::from_base(ctx, &value));
    }
    let check = integration_identity_check(texp, chi_p, m, ctx)?;
    if !check.agree {
        return Err(Error::ConsistencyCheck(
            "twist-moment and Gauss-sum routes disagree".into(),
        ));
    }
    Ok(check.lhs)
}

/// The Mazur--Mellin transform of the single-variable measure at the
/// character: sum over classes of the level-0 value times the folded
/// lambda scalar times the unit-group integral.
pub fn single_var_l(
    mu: &SingleVarMeasure,
    chi: &AnticycloCharSpec,
    ctx: &Arc<CycloContext>,
) -> Result<CycloElt> {
    chi.validate(mu.classes.len())?;
    if ctx.n != chi.s.max(1) {
        return Err(Error::CtxMismatch("cyclotomic level must be max(s, 1)".into()));
    }
    let mut total = CycloElt::zero(ctx);
    for (j, cls) in mu.classes.iter().enumerate() {
        let inner = unit_integral(&cls.texp, &chi.chi_p, chi.m, ctx)?;
        let outer = chi.cl0_values[j].embed_cyclo(ctx)?.mul_base(&cls.lam_scalar);
        total = total.add(&outer.mul(&inner));
    }
    Ok(total)
}

/// Build the level-s class-group character determined by an
/// [`AnticycloCharSpec`]: it pulls back to chi_p along the kernel
/// parametrization and takes the inverse level-0 values on the canonical
/// lifts of the class representatives. Errors when the data is
/// inconsistent with the group relations.
pub fn class_char_for_spec(
    mu: &SingleVarMeasure,
    chi: &AnticycloCharSpec,
    group: &Arc<RingClassGroup>,
) -> Result<ClassGroupChar> {
    let p = mu.p;
    let s = chi.s;
    let pn = (0..s).fold(1u64, |a, _| a * p);
    let base_order = QuadOrder::new(mu.field, mu.conductor)?;
    let top_order = group.order;
    if top_order.conductor != mu.conductor * pn {
        return Err(Error::ConductorMismatch("group level must be the tower level s".into()));
    }
    // generators with prescribed values
    let mut gens: Vec<(FormClass, UnityRoot)> = Vec::new();
    for u in (2..pn).filter(|u| u % p != 0) {
        gens.push((kernel_class(&top_order, p, s, u)?, chi.chi_p.eval(u)?));
    }
    for (j, cls) in mu.classes.iter().enumerate() {
        let lift = lift_class(&cls.class_rep, &base_order, &top_order)?;
        gens.push((lift, chi.cl0_values[j].inv()));
    }
    // breadth-first closure with consistency checking
    let mut values: HashMap<FormClass, UnityRoot> = HashMap::new();
    values.insert(group.identity(), UnityRoot::one(p));
    let mut frontier = vec![group.identity()];
    while let Some(x) = frontier.pop() {
        let vx = values[&x];
        for (g, vg) in &gens {
            let y = compose(&x, g)?;
            let vy = vx.mul(vg);
            match values.get(&y) {
                Some(prev) if *prev != vy => {
                    return Err(Error::ConsistencyCheck(
                        "character data conflicts with the group relations".into(),
                    ))
                }
                Some(_) => {}
                None => {
                    values.insert(y, vy);
                    frontier.push(y);
                }
            }
        }
    }
    if values.len() != group.elements.len() {
        return Err(Error::ConsistencyCheck(
            "character data does not determine every class".into(),
        ));
    }
    // read off exponents on the Smith basis
    let mut exps = vec![0u64; group.snf_orders.len()];
    for (i, &d) in group.snf_orders.iter().enumerate() {
        if d <= 1 {
            continue;
        }
        // find an element with coordinate 1 at i and 0 elsewhere
        let target: Vec<u64> = (0..group.snf_orders.len())
            .map(|k| if k == i { 1 } else { 0 })
            .collect();
        let mut found = false;
        for x in &group.elements {
            if group.coords(x)? == target {
                let v = values[x];
                // v = zeta_d^e
                let ord = v.order();
                if ord > 1 && d % ord != 0 {
                    return Err(Error::ConsistencyCheck("value order exceeds factor".into()));
                }
                let e = unity_root_discrete_log(&v, d, p)?;
                exps[i] = e;
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::ConsistencyCheck("missing Smith basis element".into()));
        }
    }
    let out = ClassGroupChar::new(Arc::clone(group), exps, p)?;
    // the generator-decomposition evaluation must reproduce the closure
    for (x, v) in &values {
        if out.eval(x)? != *v {
            return Err(Error::ConsistencyCheck(
                "Smith-basis character disagrees with the closure".into(),
            ));
        }
    }
    Ok(out)
}

/// e with v = zeta_d^e for a root of order dividing d.
fn unity_root_discrete_log(v: &UnityRoot, d: u64, p: u64) -> Result<u64> {
    let gen = UnityRoot::root_of_order(p, d, 1);
    let mut acc = UnityRoot::one(p);
    for e in 0..d {
        if acc == *v {
            return Ok(e);
        }
        acc = acc.mul(&gen);
    }
    Err(Error::ConsistencyCheck("value is not a power of the factor root".into()))
}

/// The Gauss-sum unfolded double sum over tower fibers:
///
///   p^{-s} G(chi_p) sum_j sum_u lam_j chi_s([a_{j,u}])^{-1} (D^m Phi_j)(zeta^u - 1)
///
/// with the fiber classes labeled through the kernel parametrization. This
/// must equal the Mazur--Mellin transform; the class-group route through
/// `fiber_classes` and `class_char_for_spec` is computed independently of
/// the measure-side twist.
pub fn fiber_sum_expansion(
    mu: &SingleVarMeasure,
    chi: &AnticycloCharSpec,
    ctx: &Arc<CycloContext>,
) -> Result<CycloElt> {
    chi.validate(mu.classes.len())?;
    let s = chi.s;
    if s < 1 {
        return Err(Error::BadInput("fiber expansion needs conductor exponent s >= 1".into()));
    }
    if ctx.n != s {
        return Err(Error::CtxMismatch("cyclotomic level must equal s".into()));
    }
    let p = mu.p;
    let pn = (0..s).fold(1u64, |a, _| a * p);
    let base_order = QuadOrder::new(mu.field, mu.conductor)?;
    let top_order = QuadOrder::new(mu.field, mu.conductor * pn)?;
    let group = Arc::new(RingClassGroup::enumerate(top_order)?);
    let chi_s = class_char_for_spec(mu, chi, &group)?;
    let gauss = gauss_sum(&chi.chi_p, ctx)?;
    let mut sum = CycloElt::zero(ctx);
    for cls in &mu.classes {
        let fib = fiber_classes(&cls.class_rep, &base_order, p, s)?;
        for (u, form) in &fib.labeled {
            let cval = chi_s.eval(&inverse(form)?)?.embed_cyclo(ctx)?;
            let zm = PadicElt::from_u64(ctx.base(), *u).pow_u64(chi.m as u64);
            let ev = eval_at_root(&cls.texp, ctx, *u, chi.m)?;
            let _ = zm;
            sum = sum.add(&cval.mul_base(&cls.lam_scalar).mul(&ev));
        }
    }
    gauss.mul(&sum).try_div_p_pow(s)
}

// ---- the two-variable measure ----

/// Per-class data of the two-variable measure: the branch-folded scalar,
/// the group-like Gamma factor carrying the weight dependence of the
/// central character, and the Lambda-coefficient t-expansion.
#[derive(Debug, Clone)]
pub struct TwoVarClass {
    pub class_rep: FormClass,
    /// c_j omega(d_j)^{k0}
    pub scalar: PadicElt,
    /// (1 + T)^{s(d_j)}: multiply the Gamma variable by this group-like unit
    pub gamma_factor: PowerSeries<PadicElt>,
    /// t-expansion with Lambda coefficients (outer variable: the measure
    /// variable; inner: the weight variable)
    pub texp: PowerSeries<PowerSeries<PadicElt>>,
}

/// The assembled measure on the product of the anticyclotomic tower and
/// the weight space, stored per torsion branch k0 mod p-1.
#[derive(Debug, Clone)]
pub struct TwoVarMeasure {
    pub field: QuadField,
    pub conductor: u64,
    pub p: u64,
    pub branch_k0: u64,
    pub classes: Vec<TwoVarClass>,
}

/// Raw per-class input: the class representative, the two central-character
/// scalars (values of the finite-order part and the norm-one part at the
/// inverse class), and the Lambda-coefficient expansion.
#[derive(Debug, Clone)]
pub struct TwoVarClassInput {
    pub class_rep: FormClass,
    pub c_scalar: PadicElt,
    pub d_scalar: PadicElt,
    pub texp: PowerSeries<PowerSeries<PadicElt>>,
}

/// Fold the k-dependence c_j d_j^k onto the branch k0: the torsion part
/// omega(d_j)^k is constant on the branch and folds into the scalar, the
/// free part <d_j>^k becomes the group-like (1+T)^{s(d_j)}.
pub fn build_two_var(
    ctx: &Arc<PadicContext>,
    field: QuadField,
    conductor: u64,
    classes: Vec<TwoVarClassInput>,
    branch_k0: u64,
) -> Result<TwoVarMeasure> {
    let p = ctx.p;
    let mut out = Vec::with_capacity(classes.len());
    for (j, cls) in classes.into_iter().enumerate() {
        if !cls.c_scalar.is_unit() || !cls.d_scalar.is_unit() {
            return Err(Error::BadInput(format!("class {j}: scalars must be units")));
        }
        let lambda_trunc = cls.texp.coeff(0).trunc();
        let (a, s) = decompose_unit(&cls.d_scalar)?;
        let omega_k0 = ctx.zeta_tame().pow_u64(a * (branch_k0 % (p - 1)) % (p - 1));
        let scalar = cls.c_scalar.mul(&omega_k0);
        let gamma_factor = PowerSeries::<PadicElt>::binomial_series(&s, lambda_trunc)?;
        // support invariant on the outer variable
        for level in [1u32, 2] {
            let d = distribution_exact(&cls.texp, p, level)?;
            for (b, v) in d.table.iter().enumerate() {
                if b as u64 % p == 0 && !v.is_zero() {
                    return Err(Error::ConsistencyCheck(format!(
                        "class {j}: expansion not unit-supported at level {level}"
                    )));
                }
            }
        }
        out.push(TwoVarClass { class_rep: cls.class_rep, scalar, gamma_factor, texp: cls.texp });
    }
    Ok(TwoVarMeasure { field, conductor, p, branch_k0, classes: out })
}

impl TwoVarMeasure {
    fn check_branch(&self, k: u64) -> Result<()> {
        let p = self.p;
        if k % (p - 1) != self.branch_k0 % (p - 1) {
            return Err(Error::BranchMismatch {
                k: k as i64,
                k0: self.branch_k0 % (p - 1),
                modulus: p - 1,
            });
        }
        Ok(())
    }

    /// The weight-k slice: specialize the weight variable at gamma^k. The
    /// per-class scalar becomes c_j d_j^k and the expansion the weight-k
    /// specialization.
    pub fn slice(&self, ctx: &Arc<PadicContext>, k: u64) -> Result<SingleVarMeasure> {
        self.check_branch(k)?;
        if k < 2 {
            return Err(Error::BadInput("weights start at k = 2".into()));
        }
        let x = ctx.gamma().pow_u64(k).sub(&PadicElt::one(ctx));
        let eval_lambda = |series: &PowerSeries<PadicElt>| -> PadicElt {
            let mut acc = PadicElt::zero(ctx);
            for c in series.coeffs().iter().rev() {
                acc = acc.mul(&x).add(c);
            }
            acc
        };
        let mut classes = Vec::with_capacity(self.classes.len());
        for cls in &self.classes {
            let lam_scalar = cls.scalar.mul(&eval_lambda(&cls.gamma_factor));
            let texp = PowerSeries::from_coeffs(
                cls.texp.coeffs().iter().map(&eval_lambda).collect(),
            )?;
            classes.push(SingleVarClass { class_rep: cls.class_rep, lam_scalar, texp });
        }
        SingleVarMeasure::new(self.field, self.conductor, self.p, classes)
    }
}

/// Both evaluation orders of the two-variable transform.
#[derive(Debug, Clone)]
pub struct TwoVarEval {
    /// integrate the weight variable first (slice at k, then Mellin)
    pub gamma_first: CycloElt,
    /// integrate the class variable first (Lambda-valued Mellin, then
    /// specialize at k)
    pub cl_first: CycloElt,
    pub fubini_agree: bool,
}

/// The two-variable Mazur--Mellin transform at (chi-hat, k), computed in
/// both orders; the slice order is the defining one.
pub fn two_var_l(
    f: &TwoVarMeasure,
    chi: &AnticycloCharSpec,
    k: u64,
    base_ctx: &Arc<PadicContext>,
    ctx: &Arc<CycloContext>,
) -> Result<TwoVarEval> {
    f.check_branch(k)?;
    chi.validate(f.classes.len())?;
    if ctx.n != chi.s.max(1) {
        return Err(Error::CtxMismatch("cyclotomic level must be max(s, 1)".into()));
    }
    // order one: weight first
    let sliced = f.slice(base_ctx, k)?;
    let gamma_first = single_var_l(&sliced, chi, ctx)?;

    // order two: class variable first, with Lambda (x) cyclotomic values
    let p = f.p;
    let pn = (0..chi.s.max(1)).fold(1u64, |a, _| a * p);
    let gk = CycloElt::from_base(ctx, &base_ctx.gamma().pow_u64(k));
    let x = gk.sub(&CycloElt::one(ctx));
    let mut cl_first = CycloElt::zero(ctx);
    for (j, cls) in f.classes.iter().enumerate() {
        // Dirac weights of the outer variable are Lambda elements
        let weights = cls.texp.dirac_weights()?;
        // Lambda (x) cyclo integrand of the Gamma variable
        let lambda_trunc = cls.texp.coeff(0).trunc();
        let mut integrand = PowerSeries::zero(&CycloElt::zero(ctx), lambda_trunc);
        for (a, w) in weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let au = a as u64 % pn;
            if a as u64 % p == 0 {
                continue;
            }
            let chi_val = if chi.s == 0 {
                CycloElt::one(ctx)
            } else {
                chi.chi_p.eval(au)?.embed_cyclo(ctx)?
            };
            let zm = PadicElt::from_u64(base_ctx, a as u64).pow_u64(chi.m as u64);
            let scalar = chi_val.mul_base(&zm);
            let w_cyclo = PowerSeries::from_coeffs(
                w.coeffs().iter().map(|c| CycloElt::from_base(ctx, c)).collect(),
            )?;
            integrand = integrand.add(&w_cyclo.scale(&scalar));
        }
        // multiply by the group-like Gamma factor and the branch scalar
        let gf = PowerSeries::from_coeffs(
            cls.gamma_factor
                .coeffs()
                .iter()
                .map(|c| CycloElt::from_base(ctx, c))
                .collect(),
        )?;
        let with_factor = integrand.mul(&gf);
        // specialize the Gamma variable at gamma^k
        let mut value = CycloElt::zero(ctx);
        for c in with_factor.coeffs().iter().rev() {
            value = value.mul(&x).add(c);
        }
        let outer = chi.cl0_values[j].embed_cyclo(ctx)?.mul_base(&cls.scalar);
        cl_first = cl_first.add(&outer.mul(&value));
    }
    let fubini_agree = gamma_first.eq_joint(&cl_first);
    Ok(TwoVarEval { gamma_first, cl_first, fubini_agree })
}

/// The p-depleted Lambda-coefficient t-expansion synthesized from a family
/// of q-expansions: Dirac weight a(n)(T) at each n prime to p below the
/// truncation.
pub fn lambda_texp_from_family(
    family: &LambdaQExp,
    p: u64,
    trunc: usize,
) -> Result<PowerSeries<PowerSeries<PadicElt>>> {
    if family.q_trunc() < trunc {
        return Err(Error::Truncation { needed: trunc, have: family.q_trunc() });
    }
    let zero = family.coeffs[0].zero_like();
    let weights: Vec<PowerSeries<PadicElt>> = (0..trunc)
        .map(|n| {
            if n == 0 || n as u64 % p == 0 {
                zero.clone()
            } else {
                family.coeffs[n].clone()
            }
        })
        .collect();
    PowerSeries::from_dirac_weights(&weights, trunc)
}

/// Scalar t-expansion from a weight-k q-expansion by the same synthesis.
pub fn texp_from_qexp(
    coeffs: &[PadicElt],
    p: u64,
    trunc: usize,
) -> Result<PowerSeries<PadicElt>> {
    if coeffs.len() < trunc {
        return Err(Error::Truncation { needed: trunc, have: coeffs.len() });
    }
    let weights: Vec<PadicElt> = (0..trunc)
        .map(|n| {
            if n == 0 || n as u64 % p == 0 {
                coeffs[0].zero_like()
            } else {
                coeffs[n].clone()
            }
        })
        .collect();
    PowerSeries::from_dirac_weights(&weights, trunc)
}
