//! JSON wire formats. Every p-adic payload carries an explicit precision
//! field; digits are little-endian base-p lists, one list per polynomial
//! coefficient (flattened when the extension degree is one).

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::characters::DirichletChar;
use crate::cyclotomic::{CycloContext, CycloElt};
use crate::error::{Error, Result};
use crate::measure::PowerSeries;
use crate::padic::{PadicContext, PadicElt};

fn digits_of(value: u64, p: u64, prec: u32) -> Vec<u64> {
    let mut v = value;
    (0..prec)
        .map(|_| {
            let d = v % p;
            v /= p;
            d
        })
        .collect()
}

fn value_of(digits: &[u64], p: u64) -> u64 {
    digits.iter().rev().fold(0u64, |acc, &d| acc * p + d)
}

pub fn padic_to_json(x: &PadicElt) -> Value {
    let ctx = x.ctx();
    let digits: Vec<Vec<u64>> =
        x.coeffs().iter().map(|&c| digits_of(c, ctx.p, x.prec())).collect();
    let digits_value = if ctx.f == 1 { json!(digits[0]) } else { json!(digits) };
    json!({"p": ctx.p, "f": ctx.f, "prec": x.prec(), "digits": digits_value})
}

pub fn padic_from_json(ctx: &Arc<PadicContext>, v: &Value) -> Result<PadicElt> {
    let bad = |m: &str| Error::BadInput(format!("padic element: {m}"));
    let p = v["p"].as_u64().ok_or_else(|| bad("missing p"))?;
    let f = v["f"].as_u64().ok_or_else(|| bad("missing f"))? as usize;
    let prec = v["prec"].as_u64().ok_or_else(|| bad("missing prec"))? as u32;
    if p != ctx.p || f != ctx.f {
        return Err(Error::CtxMismatch(format!(
            "payload is for (p, f) = ({p}, {f}), context has ({}, {})",
            ctx.p, ctx.f
        )));
    }
    let digit_rows: Vec<Vec<u64>> = if f == 1 {
        let row: Vec<u64> = serde_json::from_value(v["digits"].clone())
            .map_err(|e| bad(&e.to_string()))?;
        vec![row]
    } else {
        serde_json::from_value(v["digits"].clone()).map_err(|e| bad(&e.to_string()))?
    };
    if digit_rows.len() != f {
        return Err(bad("digit rows do not match f"));
    }
    if digit_rows.iter().any(|r| r.iter().any(|&d| d >= p)) {
        return Err(bad("digit out of range"));
    }
    let coeffs = digit_rows.iter().map(|r| value_of(r, p)).collect();
    PadicElt::from_coeffs(ctx, coeffs, prec.min(ctx.prec_n))
}

pub fn cyclo_to_json(x: &CycloElt) -> Value {
    json!({
        "n": x.ctx().n,
        "piPrec": x.pi_prec(),
        "coeffs": x.coeffs().iter().map(padic_to_json).collect::<Vec<_>>(),
    })
}

pub fn cyclo_from_json(ctx: &Arc<CycloContext>, v: &Value) -> Result<CycloElt> {
    let bad = |m: &str| Error::BadInput(format!("cyclotomic element: {m}"));
    let n = v["n"].as_u64().ok_or_else(|| bad("missing n"))? as u32;
    if n != ctx.n {
        return Err(Error::CtxMismatch(format!("payload level {n}, context level {}", ctx.n)));
    }
    let coeffs_v = v["coeffs"].as_array().ok_or_else(|| bad("missing coeffs"))?;
    let coeffs = coeffs_v
        .iter()
        .map(|c| padic_from_json(ctx.base(), c))
        .collect::<Result<Vec<_>>>()?;
    CycloElt::from_coeffs(ctx, coeffs)
}

pub fn series_to_json(s: &PowerSeries<PadicElt>) -> Value {
    json!({
        "ring": "padic",
        "M": s.trunc(),
        "coeffs": s.coeffs().iter().map(padic_to_json).collect::<Vec<_>>(),
    })
}

pub fn series_from_json(ctx: &Arc<PadicContext>, v: &Value) -> Result<PowerSeries<PadicElt>> {
    let bad = |m: &str| Error::BadInput(format!("series: {m}"));
    let ring = v["ring"].as_str().ok_or_else(|| bad("missing ring tag"))?;
    if ring != "padic" {
        return Err(bad(&format!("expected ring \"padic\", got \"{ring}\"")));
    }
    let coeffs_v = v["coeffs"].as_array().ok_or_else(|| bad("missing coeffs"))?;
    let coeffs = coeffs_v
        .iter()
        .map(|c| padic_from_json(ctx, c))
        .collect::<Result<Vec<_>>>()?;
    PowerSeries::from_coeffs(coeffs)
}

pub fn cyclo_series_to_json(s: &PowerSeries<CycloElt>) -> Value {
    json!({
        "ring": "cyclo",
        "M": s.trunc(),
        "coeffs": s.coeffs().iter().map(cyclo_to_json).collect::<Vec<_>>(),
    })
}

pub fn lambda_series_to_json(s: &PowerSeries<PowerSeries<PadicElt>>) -> Value {
    json!({
        "ring": "lambda",
        "M": s.trunc(),
        "coeffs": s.coeffs().iter().map(series_to_json).collect::<Vec<_>>(),
    })
}

pub fn lambda_series_from_json(
    ctx: &Arc<PadicContext>,
    v: &Value,
) -> Result<PowerSeries<PowerSeries<PadicElt>>> {
    let bad = |m: &str| Error::BadInput(format!("lambda series: {m}"));
    let ring = v["ring"].as_str().ok_or_else(|| bad("missing ring tag"))?;
    if ring != "lambda" {
        return Err(bad(&format!("expected ring \"lambda\", got \"{ring}\"")));
    }
    let coeffs_v = v["coeffs"].as_array().ok_or_else(|| bad("missing coeffs"))?;
    let coeffs = coeffs_v
        .iter()
        .map(|c| series_from_json(ctx, c))
        .collect::<Result<Vec<_>>>()?;
    PowerSeries::from_coeffs(coeffs)
}

/// Character descriptor: {"modulus": "5^2", "torsion_exp": a, "wild_exp": w}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharDescriptor {
    pub modulus: String,
    #[serde(default)]
    pub torsion_exp: u64,
    #[serde(default)]
    pub wild_exp: u64,
}

impl CharDescriptor {
    pub fn of(chi: &DirichletChar) -> Self {
        CharDescriptor {
            modulus: format!("{}^{}", chi.p, chi.n),
            torsion_exp: chi.torsion_exp,
            wild_exp: chi.wild_exp,
        }
    }

    pub fn parse(&self) -> Result<DirichletChar> {
        let bad = || Error::BadInput(format!("bad character modulus \"{}\"", self.modulus));
        let (ps, ns) = self.modulus.split_once('^').ok_or_else(bad)?;
        let p: u64 = ps.trim().parse().map_err(|_| bad())?;
        let n: u32 = ns.trim().parse().map_err(|_| bad())?;
        DirichletChar::new(p, n, self.torsion_exp, self.wild_exp)
    }
}
