//! Closed-form bound evaluators.
//!
//! Every evaluator returns a [`BoundReport`] whose `total` is the sum of its
//! `leading_term` and labelled `error_terms`. Universal constants the theory
//! leaves unspecified come from [`BoundConfig`] and are echoed back in the
//! report.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{compute_params, compute_schatten_params, ProfileParams, SchattenParams};
use crate::profile::VarianceProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogMode {
    /// `log(n ∧ d)` as printed; vanishes when `d = 1` or `n = 1`.
    #[default]
    Literal,
    /// `max(log(n ∧ d), 1)`.
    Floored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConfig {
    pub epsilon: f64,
    #[serde(rename = "C_universal")]
    pub c_universal: f64,
    #[serde(rename = "C_prime")]
    pub c_prime: f64,
    pub log_floor: LogMode,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            c_universal: 1.0,
            c_prime: 1.0,
            log_floor: LogMode::Literal,
        }
    }
}

impl BoundConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.5) {
            return Err(Error::Argument(format!("epsilon must lie in (0, 1/2], got {}", self.epsilon)));
        }
        if !(self.c_universal > 0.0 && self.c_universal.is_finite()) {
            return Err(Error::Argument(format!("C must be positive, got {}", self.c_universal)));
        }
        if !(self.c_prime > 0.0 && self.c_prime.is_finite()) {
            return Err(Error::Argument(format!("C' must be positive, got {}", self.c_prime)));
        }
        Ok(())
    }

    /// `C(ε) = C (1 + ε) / sqrt(log(1 + ε))`.
    pub fn c_eps(&self) -> f64 {
        self.c_universal * (1.0 + self.epsilon) / (1.0 + self.epsilon).ln().sqrt()
    }

    /// `log(n ∧ d)` under the configured mode.
    pub fn log_min_dim(&self, d: usize, n: usize) -> f64 {
        let l = (d.min(n) as f64).ln();
        match self.log_floor {
            LogMode::Literal => l,
            LogMode::Floored => l.max(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    #[serde(rename = "beta_le_1")]
    BetaLe1,
    #[serde(rename = "beta_gt_1")]
    BetaGt1,
    NotApplicable,
}

/// What the evaluated expression is claimed to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Upper,
    /// Lower bound up to an unspecified universal constant.
    Lower,
    /// Two-sided order with unspecified constants.
    Order,
    /// Heuristic benchmark, not a proven bound for the profile at hand.
    Comparator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub label: &'static str,
    pub value: f64,
}

/// Totals of both branches of a two-case bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchTotals {
    pub beta_le_1: f64,
    pub beta_gt_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_name: &'static str,
    pub kind: BoundKind,
    pub case_taken: Case,
    /// Common factor already folded into every term (`1 + ε`, `d^{1/p}` or 1).
    pub prefactor: f64,
    pub leading_term: f64,
    pub error_terms: Vec<Term>,
    pub total: f64,
    pub branches: Option<BranchTotals>,
    pub constants_used: Option<BoundConfig>,
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn term(&self, label: &str) -> Option<f64> {
        self.error_terms.iter().find(|t| t.label == label).map(|t| t.value)
    }

    /// `leading_term / prefactor`: the bracketed leading expression.
    pub fn bare_leading(&self) -> f64 {
        if self.prefactor == 0.0 {
            0.0
        } else {
            self.leading_term / self.prefactor
        }
    }
}

/// A branch before assembly: bracketed leading expression and error terms.
struct Branch {
    leading: f64,
    errors: Vec<(&'static str, f64)>,
}

impl Branch {
    fn total(&self, prefactor: f64) -> f64 {
        prefactor * (self.leading + self.errors.iter().map(|e| e.1).sum::<f64>())
    }
}

struct Draft {
    name: &'static str,
    kind: BoundKind,
    case: Case,
    prefactor: f64,
    branch: Branch,
    branches: Option<BranchTotals>,
    constants: Option<BoundConfig>,
    warnings: Vec<String>,
}

impl Draft {
    fn finish(self) -> BoundReport {
        let pf = self.prefactor;
        let leading_term = pf * self.branch.leading;
        let error_terms: Vec<Term> = self
            .branch
            .errors
            .iter()
            .map(|&(label, v)| Term { label, value: pf * v })
            .collect();
        let total = leading_term + error_terms.iter().map(|t| t.value).sum::<f64>();
        BoundReport {
            bound_name: self.name,
            kind: self.kind,
            case_taken: self.case,
            prefactor: pf,
            leading_term,
            error_terms,
            total,
            branches: self.branches,
            constants_used: self.constants,
            warnings: self.warnings,
        }
    }
}

/// `a / b`, with `0` when `b = 0` (the numerator then vanishes as well).
fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn zero_warnings(b: &VarianceProfile) -> Vec<String> {
    let mut w = Vec::new();
    if b.is_zero() {
        w.push("all-zero profile: every parameter vanishes".to_string());
    }
    w
}

fn beta_warning(beta: f64, name: &str, w: &mut Vec<String>) {
    if beta.is_infinite() {
        w.push(format!("{name} is infinite (zero denominator convention)"));
    }
}

/// Operator-norm upper bound with the case split on `beta_inf`.
pub fn main_upper_bound(b: &VarianceProfile, cfg: &BoundConfig) -> Result<BoundReport> {
    cfg.validate()?;
    Ok(main_upper_bound_with(b, &compute_params(b), cfg))
}

pub(crate) fn main_upper_bound_with(b: &VarianceProfile, p: &ProfileParams, cfg: &BoundConfig) -> BoundReport {
    let log = cfg.log_min_dim(b.d(), b.n());
    let ce = cfg.c_eps();
    let log_term = ce * ce * p.sigma_star.powi(2) * log;
    let le1 = Branch {
        leading: 2.0 * p.sigma_inf + p.sigma_c.powi(2),
        errors: vec![
            ("sqrt_log", ce * p.sigma_star * (p.sigma_c + safe_div(p.sigma_inf, p.sigma_c)) * log.sqrt()),
            ("log", log_term),
        ],
    };
    let gt1 = Branch {
        leading: 2.0 * safe_div(p.sigma_tilde_inf * p.sigma_c, p.sigma_star) + p.sigma_c.powi(2),
        errors: vec![
            ("sqrt_log", ce * (p.sigma_c * p.sigma_star + p.sigma_bar_inf) * log.sqrt()),
            ("log", log_term),
        ],
    };
    let pf = 1.0 + cfg.epsilon;
    let branches = BranchTotals {
        beta_le_1: le1.total(pf),
        beta_gt_1: gt1.total(pf),
    };
    let mut warnings = zero_warnings(b);
    beta_warning(p.beta_inf, "beta_inf", &mut warnings);
    let (case, branch) = if p.beta_inf <= 1.0 { (Case::BetaLe1, le1) } else { (Case::BetaGt1, gt1) };
    Draft {
        name: "main_upper_bound",
        kind: BoundKind::Upper,
        case,
        prefactor: pf,
        branch,
        branches: Some(branches),
        constants: Some(*cfg),
        warnings,
    }
    .finish()
}

/// Upper bound on `(E Tr[XX^T - E XX^T]^p)^{1/p}` with the case split on `beta_p`.
pub fn schatten_upper_bound(b: &VarianceProfile, p: u32, cfg: &BoundConfig) -> Result<BoundReport> {
    cfg.validate()?;
    let s = compute_schatten_params(b, p)?;
    Ok(schatten_upper_bound_with(b, &compute_params(b), &s, cfg))
}

fn schatten_upper_bound_with(
    b: &VarianceProfile,
    pp: &ProfileParams,
    s: &SchattenParams,
    cfg: &BoundConfig,
) -> BoundReport {
    let pf = (b.d() as f64).powf(1.0 / s.p as f64);
    let sqrt_p = (s.p as f64).sqrt();
    let tail = cfg.c_prime * s.p as f64 * s.b_p.powi(2);
    let (sc, ss) = (pp.sigma_c, pp.sigma_star);
    let le1 = Branch {
        leading: 2.0 * s.sigma_p + sc * sc,
        errors: vec![
            ("sqrt_p", cfg.c_universal * sqrt_p * (sc * ss + safe_div(s.sigma_p * ss, sc))),
            ("schatten_tail", tail),
        ],
    };
    let gt1 = Branch {
        leading: 2.0 * safe_div(s.sigma_bar_p * sc, ss) + sc * sc,
        errors: vec![
            ("sqrt_p", cfg.c_universal * sqrt_p * (sc * ss + s.sigma_bar_p)),
            ("schatten_tail", tail),
        ],
    };
    let branches = BranchTotals {
        beta_le_1: le1.total(pf),
        beta_gt_1: gt1.total(pf),
    };
    let mut warnings = zero_warnings(b);
    beta_warning(s.beta_p, "beta_p", &mut warnings);
    let (case, branch) = if s.beta_p <= 1.0 { (Case::BetaLe1, le1) } else { (Case::BetaGt1, gt1) };
    Draft {
        name: "schatten_upper_bound",
        kind: BoundKind::Upper,
        case,
        prefactor: pf,
        branch,
        branches: Some(branches),
        constants: Some(*cfg),
        warnings,
    }
    .finish()
}

/// Order of the diagonal part, `C (sqrt(p) sigma_bar_p + p b_p^2)`.
pub fn diagonal_bound(b: &VarianceProfile, p: u32, cfg: &BoundConfig) -> Result<BoundReport> {
    cfg.validate()?;
    let s = compute_schatten_params(b, p)?;
    let c = cfg.c_universal;
    let mut warnings = zero_warnings(b);
    warnings.push("two-sided order: holds up to unspecified universal constants in both directions".into());
    Ok(Draft {
        name: "diagonal_bound",
        kind: BoundKind::Order,
        case: Case::NotApplicable,
        prefactor: 1.0,
        branch: Branch {
            leading: c * (p as f64).sqrt() * s.sigma_bar_p,
            errors: vec![("schatten_tail", c * p as f64 * s.b_p.powi(2))],
        },
        branches: None,
        constants: Some(*cfg),
        warnings,
    }
    .finish())
}

/// Moment bound for an i.i.d. standard Gaussian `d x n` matrix. With
/// `off_diagonal` set, the literal constants 4 and 2 are replaced by `C` and `C'`.
pub fn standard_gaussian_bound(d: usize, n: usize, p: f64, off_diagonal: bool, cfg: &BoundConfig) -> Result<BoundReport> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::Argument(format!("p must be >= 2, got {p}")));
    }
    if d == 0 || n == 0 {
        return Err(Error::Argument("dimensions must be positive".into()));
    }
    cfg.validate()?;
    let (df, nf) = (d as f64, n as f64);
    let (c, c2) = if off_diagonal { (cfg.c_universal, cfg.c_prime) } else { (4.0, 2.0) };
    Ok(Draft {
        name: if off_diagonal { "standard_gaussian_offdiag" } else { "standard_gaussian" },
        kind: BoundKind::Upper,
        case: Case::NotApplicable,
        prefactor: 1.0,
        branch: Branch {
            leading: 2.0 * (df * nf).sqrt() + df,
            errors: vec![("sqrt_p", c * p.sqrt() * (df.sqrt() + nf.sqrt())), ("p_tail", c2 * p)],
        },
        branches: None,
        constants: off_diagonal.then_some(*cfg),
        warnings: Vec::new(),
    }
    .finish())
}

/// The earlier operator-norm bound with leading term `2 sigma_R sigma_C + sigma_C^2`.
pub fn chz_bound(b: &VarianceProfile, cfg: &BoundConfig) -> Result<BoundReport> {
    cfg.validate()?;
    Ok(chz_bound_with(b, &compute_params(b), cfg))
}

pub(crate) fn chz_bound_with(b: &VarianceProfile, p: &ProfileParams, cfg: &BoundConfig) -> BoundReport {
    let log = cfg.log_min_dim(b.d(), b.n());
    let ce = cfg.c_eps();
    Draft {
        name: "chz_bound",
        kind: BoundKind::Upper,
        case: Case::NotApplicable,
        prefactor: 1.0 + cfg.epsilon,
        branch: Branch {
            leading: 2.0 * p.sigma_r * p.sigma_c + p.sigma_c.powi(2),
            errors: vec![
                ("sqrt_log", ce * (p.sigma_c * p.sigma_star + p.sigma_r * p.sigma_star) * log.sqrt()),
                ("log", ce * ce * p.sigma_star.powi(2) * log),
            ],
        },
        branches: None,
        constants: Some(*cfg),
        warnings: zero_warnings(b),
    }
    .finish()
}

/// Free-probability comparator with `log(nd)` error terms.
pub fn free_probability_bound(b: &VarianceProfile, cfg: &BoundConfig) -> Result<BoundReport> {
    cfg.validate()?;
    Ok(free_probability_bound_with(b, &compute_params(b), cfg))
}

pub(crate) fn free_probability_bound_with(b: &VarianceProfile, p: &ProfileParams, cfg: &BoundConfig) -> BoundReport {
    let log = ((b.d() * b.n()) as f64).ln();
    let c = cfg.c_universal;
    let s = p.sigma_star;
    Draft {
        name: "free_probability_bound",
        kind: BoundKind::Upper,
        case: Case::NotApplicable,
        prefactor: 1.0,
        branch: Branch {
            leading: 2.0 * p.sigma_inf + p.sigma_c.powi(2),
            errors: vec![
                ("log_3_4", c * (s.sqrt() * p.sigma_c.powf(1.5) + s.sqrt() * p.sigma_r.powf(1.5)) * log.powf(0.75)),
                ("log_3_2", c * (s * p.sigma_c + s * p.sigma_r) * log.powf(1.5)),
            ],
        },
        branches: None,
        constants: Some(*cfg),
        warnings: zero_warnings(b),
    }
    .finish()
}

/// Lower bound on the Schatten moment, up to a universal constant.
pub fn lower_bound_schatten(b: &VarianceProfile, p: u32) -> Result<BoundReport> {
    let s = compute_schatten_params(b, p)?;
    let pp = compute_params(b);
    let mut warnings = zero_warnings(b);
    warnings.push("lower bound up to an unspecified universal constant".into());
    Ok(Draft {
        name: "lower_bound_schatten",
        kind: BoundKind::Lower,
        case: Case::NotApplicable,
        prefactor: 1.0,
        branch: Branch {
            leading: s.sigma_p + pp.sigma_c.powi(2),
            errors: vec![
                ("sqrt_p", (p as f64).sqrt() * s.sigma_bar_p),
                ("schatten_tail", p as f64 * s.b_p.powi(2)),
            ],
        },
        branches: None,
        constants: None,
        warnings,
    }
    .finish())
}

/// Lower bound `sigma_inf + sigma_C^2` on the operator-norm deviation, up to
/// a universal constant.
pub fn lower_bound_opnorm(b: &VarianceProfile) -> BoundReport {
    lower_bound_opnorm_with(b, &compute_params(b))
}

pub(crate) fn lower_bound_opnorm_with(b: &VarianceProfile, p: &ProfileParams) -> BoundReport {
    let mut warnings = zero_warnings(b);
    warnings.push("lower bound up to an unspecified universal constant".into());
    Draft {
        name: "lower_bound_opnorm",
        kind: BoundKind::Lower,
        case: Case::NotApplicable,
        prefactor: 1.0,
        branch: Branch {
            leading: p.sigma_inf + p.sigma_c.powi(2),
            errors: Vec::new(),
        },
        branches: None,
        constants: None,
        warnings,
    }
    .finish()
}

/// i.i.d. benchmark `||Σ|| max(sqrt(n rk(Σ)), rk(Σ))` for the summed covariance.
pub fn kl_comparator(b: &VarianceProfile, n: usize) -> BoundReport {
    let p = compute_params(b);
    let rk = p.eff_rank;
    let mut warnings = zero_warnings(b);
    warnings.push("heuristic comparator: sharp only for i.i.d. columns".into());
    warnings.push("the two rates are combined with a maximum".into());
    Draft {
        name: "kl_comparator",
        kind: BoundKind::Comparator,
        case: Case::NotApplicable,
        prefactor: 1.0,
        branch: Branch {
            leading: p.sigma_r.powi(2) * (n as f64 * rk).sqrt().max(rk),
            errors: Vec::new(),
        },
        branches: None,
        constants: None,
        warnings,
    }
    .finish()
}

/// Every evaluator for one profile, as emitted by the `bounds` command.
pub fn all_bounds(b: &VarianceProfile, p_list: &[u32], cfg: &BoundConfig) -> Result<Vec<BoundReport>> {
    cfg.validate()?;
    let params = compute_params(b);
    let mut out = vec![
        main_upper_bound_with(b, &params, cfg),
        chz_bound_with(b, &params, cfg),
        free_probability_bound_with(b, &params, cfg),
        lower_bound_opnorm_with(b, &params),
        kl_comparator(b, b.n()),
    ];
    for &p in p_list {
        let s = compute_schatten_params(b, p)?;
        out.push(schatten_upper_bound_with(b, &params, &s, cfg));
        out.push(diagonal_bound(b, p, cfg)?);
        out.push(lower_bound_schatten(b, p)?);
    }
    Ok(out)
}
