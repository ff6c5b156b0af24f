//! Scalar parameters of a variance profile.
//!
//! Notation: `sigma_c`/`sigma_r` are the largest column/row Euclidean norms,
//! `sigma_star` the largest entry, and the three fourth-moment parameters are
//!
//! ```text
//! sigma_tilde_inf^2 = max_{i != l} sum_j b_ij^2 b_lj^2
//! sigma_bar_inf^2   = max_i sum_j b_ij^4
//! sigma_inf^2       = max_i sum_j b_ij^2 sum_{l != i} b_lj^2
//! ```
//!
//! with `beta_inf = sigma_tilde_inf * sigma_c / (sigma_inf * sigma_star)`.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::{csum, lq_norm};
use crate::profile::{Entry, ProfileFamily, VarianceProfile};

/// Serializes an extended real, writing `+inf` as the string `"inf"`.
pub(crate) fn extended_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileParams {
    #[serde(rename = "sigma_C")]
    pub sigma_c: f64,
    #[serde(rename = "sigma_R")]
    pub sigma_r: f64,
    pub sigma_star: f64,
    pub sigma_tilde_inf: f64,
    pub sigma_bar_inf: f64,
    pub sigma_inf: f64,
    #[serde(serialize_with = "extended_real")]
    pub beta_inf: f64,
    pub eff_rank: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchattenParams {
    pub p: u32,
    pub sigma_p: f64,
    pub sigma_p_prime: f64,
    pub sigma_bar_p: f64,
    pub b_p: f64,
    #[serde(serialize_with = "extended_real")]
    pub beta_p: f64,
}

/// `num / den` with the zero conventions: `x / 0 = +inf` for `x > 0` and
/// `0 / 0 = 0`.
pub fn ratio_with_conventions(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        num / den
    }
}

/// Per-row and per-column squared sums shared by the parameter formulas.
struct Sums {
    col_sq: Vec<f64>,
    row_sq: Vec<f64>,
    /// `excl[i * n + j] = sum_{l != i} b_lj^2`, built from prefix and suffix
    /// sums so that no cancellation occurs.
    excl: Vec<f64>,
}

fn sums(b: &VarianceProfile) -> Sums {
    let (d, n) = (b.d(), b.n());
    let col_sq: Vec<f64> = (0..n).map(|j| csum((0..d).map(|i| b.get(i, j).powi(2)))).collect();
    let row_sq: Vec<f64> = (0..d).map(|i| csum(b.row(i).iter().map(|x| x * x))).collect();
    let mut excl = vec![0.0; d * n];
    for j in 0..n {
        // suffix[i] = sum_{l >= i} b_lj^2
        let mut suffix = vec![0.0; d + 1];
        for i in (0..d).rev() {
            suffix[i] = suffix[i + 1] + b.get(i, j).powi(2);
        }
        let mut prefix = 0.0;
        for i in 0..d {
            excl[i * n + j] = prefix + suffix[i + 1];
            prefix += b.get(i, j).powi(2);
        }
    }
    Sums { col_sq, row_sq, excl }
}

fn max_of<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

/// Computes every operator-norm parameter of `b`.
pub fn compute_params(b: &VarianceProfile) -> ProfileParams {
    let (d, n) = (b.d(), b.n());
    let s = sums(b);
    let sigma_c = max_of(s.col_sq.iter().copied()).sqrt();
    let sigma_r = max_of(s.row_sq.iter().copied()).sqrt();
    let sigma_star = max_of(b.values().iter().copied());

    let sq = |i: usize, j: usize| b.get(i, j).powi(2);
    let mut tilde_sq = 0.0_f64;
    for i in 0..d {
        for l in (i + 1)..d {
            tilde_sq = tilde_sq.max(csum((0..n).map(|j| sq(i, j) * sq(l, j))));
        }
    }
    let bar_sq = max_of((0..d).map(|i| csum((0..n).map(|j| sq(i, j).powi(2)))));
    let inf_sq = max_of((0..d).map(|i| csum((0..n).map(|j| sq(i, j) * s.excl[i * n + j]))));

    let sigma_tilde_inf = tilde_sq.sqrt();
    let sigma_inf = inf_sq.sqrt();
    let beta_inf = ratio_with_conventions(sigma_tilde_inf * sigma_c, sigma_inf * sigma_star);
    let total = csum(s.row_sq.iter().copied());
    let eff_rank = if total == 0.0 { 0.0 } else { total / (sigma_r * sigma_r) };

    ProfileParams {
        sigma_c,
        sigma_r,
        sigma_star,
        sigma_tilde_inf,
        sigma_bar_inf: bar_sq.sqrt(),
        sigma_inf,
        beta_inf,
        eff_rank,
    }
}

pub(crate) fn check_even_p(p: u32) -> Result<()> {
    if p < 2 || p % 2 == 1 {
        return Err(Error::Argument(format!("p must be an even integer >= 2, got {p}")));
    }
    Ok(())
}

/// Computes the Schatten-`p` parameters of `b` for even `p >= 2`.
pub fn compute_schatten_params(b: &VarianceProfile, p: u32) -> Result<SchattenParams> {
    check_even_p(p)?;
    Ok(schatten_params_any(b, p))
}

/// The same formulas for any `p >= 1`; the per-shape checks use odd `p` too.
pub(crate) fn schatten_params_any(b: &VarianceProfile, p: u32) -> SchattenParams {
    let (d, n) = (b.d(), b.n());
    let s = sums(b);
    let sq = |i: usize, j: usize| b.get(i, j).powi(2);
    let q = p as f64 / 2.0;

    // sigma_p^2 = || (sum_j b_ij^2 col_sq_j)_i ||_{p/2}, and likewise below.
    let full: Vec<f64> = (0..d).map(|i| csum((0..n).map(|j| sq(i, j) * s.col_sq[j]))).collect();
    let excl: Vec<f64> = (0..d).map(|i| csum((0..n).map(|j| sq(i, j) * s.excl[i * n + j]))).collect();
    let fourth: Vec<f64> = (0..d).map(|i| csum((0..n).map(|j| sq(i, j).powi(2)))).collect();
    let row_max_sq: Vec<f64> = (0..d).map(|i| max_of((0..n).map(|j| sq(i, j)))).collect();

    let sigma_p = lq_norm(&full, q).sqrt();
    let sigma_p_prime = lq_norm(&excl, q).sqrt();
    let sigma_bar_p = lq_norm(&fourth, q).sqrt();
    let b_p = lq_norm(&row_max_sq, p as f64).sqrt();
    let sigma_c = max_of(s.col_sq.iter().copied()).sqrt();
    let beta_p = ratio_with_conventions(sigma_bar_p * sigma_c, sigma_p * b_p);

    SchattenParams {
        p,
        sigma_p,
        sigma_p_prime,
        sigma_bar_p,
        b_p,
        beta_p,
    }
}

/// How a closed-form value relates to the true parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    UpperBound,
    /// No closed form is known for this entry.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedValue {
    pub value: f64,
    pub relation: Relation,
}

impl ClosedValue {
    fn eq(value: f64) -> Self {
        Self { value, relation: Relation::Equal }
    }

    fn upper(value: f64) -> Self {
        Self { value, relation: Relation::UpperBound }
    }

    fn unknown() -> Self {
        Self { value: f64::NAN, relation: Relation::Unknown }
    }

    /// Whether `actual` is consistent with this closed form at relative
    /// tolerance `rtol`.
    pub fn admits(&self, actual: f64, rtol: f64) -> bool {
        let slack = rtol * self.value.abs().max(actual.abs());
        match self.relation {
            Relation::Equal => (actual - self.value).abs() <= slack,
            Relation::UpperBound => actual <= self.value + slack,
            Relation::Unknown => true,
        }
    }
}

/// Closed-form counterpart of [`ProfileParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormParams {
    #[serde(rename = "sigma_C")]
    pub sigma_c: ClosedValue,
    #[serde(rename = "sigma_R")]
    pub sigma_r: ClosedValue,
    pub sigma_star: ClosedValue,
    pub sigma_tilde_inf: ClosedValue,
    pub sigma_bar_inf: ClosedValue,
    pub sigma_inf: ClosedValue,
    pub beta_inf: ClosedValue,
    pub eff_rank: ClosedValue,
    /// `sigma_tilde_inf * sigma_c / sigma_star`, the leading coefficient of the
    /// `beta_inf > 1` branch.
    pub tilde_ratio: ClosedValue,
}

impl ClosedFormParams {
    /// Checks every entry against computed parameters; returns the names of
    /// the violated entries.
    pub fn violations(&self, actual: &ProfileParams, rtol: f64) -> Vec<&'static str> {
        let tilde_ratio = if actual.sigma_star == 0.0 {
            0.0
        } else {
            actual.sigma_tilde_inf * actual.sigma_c / actual.sigma_star
        };
        let beta = if actual.beta_inf.is_finite() { actual.beta_inf } else { f64::MAX };
        [
            ("sigma_C", self.sigma_c, actual.sigma_c),
            ("sigma_R", self.sigma_r, actual.sigma_r),
            ("sigma_star", self.sigma_star, actual.sigma_star),
            ("sigma_tilde_inf", self.sigma_tilde_inf, actual.sigma_tilde_inf),
            ("sigma_bar_inf", self.sigma_bar_inf, actual.sigma_bar_inf),
            ("sigma_inf", self.sigma_inf, actual.sigma_inf),
            ("beta_inf", self.beta_inf, beta),
            ("eff_rank", self.eff_rank, actual.eff_rank),
            ("tilde_ratio", self.tilde_ratio, tilde_ratio),
        ]
        .into_iter()
        .filter(|(_, closed, value)| !closed.admits(*value, rtol))
        .map(|(name, _, _)| name)
        .collect()
    }
}

fn norms(v: &[Entry]) -> (f64, f64, f64) {
    let x: Vec<f64> = v.iter().map(Entry::to_f64).collect();
    let l2 = csum(x.iter().map(|t| t * t)).sqrt();
    let l4sq = csum(x.iter().map(|t| t.powi(4))).sqrt();
    let linf = max_of(x.iter().copied());
    (l2, l4sq, linf)
}

/// Closed-form parameters for the structured families. Entries known only
/// through an inequality are marked [`Relation::UpperBound`].
pub fn closed_form_params(family: &ProfileFamily, d: usize, n: usize) -> Result<ClosedFormParams> {
    let (df, nf) = (d as f64, n as f64);
    let multi_row = d >= 2;
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    match family {
        ProfileFamily::Constant => {
            let tilde = if multi_row { nf.sqrt() } else { 0.0 };
            let inf = (nf * (df - 1.0)).sqrt();
            Ok(ClosedFormParams {
                sigma_c: ClosedValue::eq(df.sqrt()),
                sigma_r: ClosedValue::eq(nf.sqrt()),
                sigma_star: ClosedValue::eq(1.0),
                sigma_tilde_inf: ClosedValue::eq(tilde),
                sigma_bar_inf: ClosedValue::eq(nf.sqrt()),
                sigma_inf: ClosedValue::eq(inf),
                beta_inf: ClosedValue::eq(ratio_with_conventions(tilde * df.sqrt(), inf)),
                eff_rank: ClosedValue::eq(df),
                tilde_ratio: ClosedValue::eq(tilde * df.sqrt()),
            })
        }
        ProfileFamily::IidColumns { b } => {
            if b.len() != d {
                return Err(Error::Argument(format!("b has length {}, expected {d}", b.len())));
            }
            let (l2, _, linf) = norms(b);
            let zero = linf == 0.0;
            Ok(ClosedFormParams {
                sigma_c: ClosedValue::eq(l2),
                sigma_r: ClosedValue::eq(nf.sqrt() * linf),
                sigma_star: ClosedValue::eq(linf),
                sigma_tilde_inf: ClosedValue::upper(nf.sqrt() * linf * linf),
                sigma_bar_inf: ClosedValue::eq(nf.sqrt() * linf * linf),
                sigma_inf: ClosedValue::upper(nf.sqrt() * linf * l2),
                beta_inf: if zero { ClosedValue::eq(0.0) } else { ClosedValue::unknown() },
                eff_rank: ClosedValue::eq(div(l2 * l2, linf * linf)),
                tilde_ratio: ClosedValue::upper(nf.sqrt() * linf * l2),
            })
        }
        ProfileFamily::IidRows { b } => {
            if b.len() != n {
                return Err(Error::Argument(format!("b has length {}, expected {n}", b.len())));
            }
            let (l2, l4sq, linf) = norms(b);
            let tilde = if multi_row { l4sq } else { 0.0 };
            let inf = (df - 1.0).sqrt() * l4sq;
            let ratio = if linf == 0.0 { 0.0 } else { tilde * df.sqrt() };
            Ok(ClosedFormParams {
                sigma_c: ClosedValue::eq(df.sqrt() * linf),
                sigma_r: ClosedValue::eq(l2),
                sigma_star: ClosedValue::eq(linf),
                sigma_tilde_inf: ClosedValue::eq(tilde),
                sigma_bar_inf: ClosedValue::eq(l4sq),
                sigma_inf: ClosedValue::eq(inf),
                beta_inf: ClosedValue::eq(ratio_with_conventions(tilde * df.sqrt() * linf, inf * linf)),
                eff_rank: ClosedValue::eq(if l2 == 0.0 { 0.0 } else { df }),
                tilde_ratio: ClosedValue::eq(ratio),
            })
        }
        ProfileFamily::RankOne { a, b } => {
            if a.len() != d || b.len() != n {
                return Err(Error::Argument(format!(
                    "rank_one vectors have lengths ({}, {}), expected ({d}, {n})",
                    a.len(),
                    b.len()
                )));
            }
            let (a2, _, ainf) = norms(a);
            let (b2, b4sq, binf) = norms(b);
            let zero = ainf == 0.0 || binf == 0.0;
            Ok(ClosedFormParams {
                sigma_c: ClosedValue::eq(a2 * binf),
                sigma_r: ClosedValue::eq(ainf * b2),
                sigma_star: ClosedValue::eq(ainf * binf),
                sigma_tilde_inf: ClosedValue::upper(b4sq * ainf * ainf),
                sigma_bar_inf: ClosedValue::eq(b4sq * ainf * ainf),
                sigma_inf: ClosedValue::upper(b4sq * a2 * ainf),
                beta_inf: if zero { ClosedValue::eq(0.0) } else { ClosedValue::unknown() },
                eff_rank: ClosedValue::eq(if zero { 0.0 } else { div(a2 * a2, ainf * ainf) }),
                tilde_ratio: ClosedValue::upper(if zero { 0.0 } else { b4sq * a2 * ainf }),
            })
        }
        ProfileFamily::BoundedRatio { .. } | ProfileFamily::Explicit(_) => Err(Error::Argument(format!(
            "no closed-form parameters for the {} family",
            family.name()
        ))),
    }
}
