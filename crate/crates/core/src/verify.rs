//! Cross-checks between the shape engine, the oracle and the parameter
//! formulas, run over explicit or random rational profiles.

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::{diag_trace_moment, offdiag_trace_moment, JointMomentTable};
use crate::params::compute_schatten_params;
use crate::profile::{random_rational_profile, VarianceProfile};
use crate::shapes::{check_opnorm_ceiling, check_schatten_ceiling, enumerate_shapes, trace_moment_via_shapes_with, L_value};

/// Window for the diagonal two-sided order ratio.
pub const ORDER_WINDOW: (f64, f64) = (0.1, 10.0);

/// Relative tolerance for float-mode shape/oracle agreement.
pub const FLOAT_RTOL: f64 = 1e-10;

const MAX_REPORTED_FAILURES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub d: usize,
    pub n: usize,
    /// Largest `p` for the shape-sum and oracle comparison.
    pub p_max: u32,
    pub opnorm_ceiling_p_max: u32,
    pub schatten_ceiling_p_max: u32,
    pub order_p_list: Vec<u32>,
    pub profiles: usize,
    pub seed: u64,
    /// Replace `L(s)` with `L(s) + 1` to exercise the failure path.
    pub corrupt_l: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            d: 3,
            n: 3,
            p_max: 4,
            opnorm_ceiling_p_max: 6,
            schatten_ceiling_p_max: 4,
            order_p_list: vec![2, 4, 6, 8],
            profiles: 20,
            seed: 0,
            corrupt_l: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    /// The first few failing cases.
    pub failures: Vec<String>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: true,
            cases: 0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.passed = false;
            if self.failures.len() < MAX_REPORTED_FAILURES {
                self.failures.push(describe());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub profiles: usize,
    pub checks: Vec<CheckResult>,
}

fn corrupted_l(s: &crate::shapes::Shape) -> BigInt {
    L_value(s) + 1
}

/// Random `d x n` rational profiles from a seeded stream.
pub fn random_profiles(d: usize, n: usize, count: usize, seed: u64) -> Vec<VarianceProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_rational_profile(&mut rng, d, n)).collect()
}

pub fn shape_sum_check(profiles: &[VarianceProfile], p_max: u32, corrupt_l: bool) -> Result<CheckResult> {
    let l_eval = if corrupt_l { corrupted_l } else { L_value };
    let mut check = CheckResult::new("shape_sum_vs_oracle");
    for (k, b) in profiles.iter().enumerate() {
        for p in 1..=p_max {
            let shapes = trace_moment_via_shapes_with(b, p, crate::shapes::DEFAULT_SHAPE_CAP, l_eval)?;
            let oracle = offdiag_trace_moment(b, p)?.value;
            check.record(shapes.agrees_with(&oracle, FLOAT_RTOL), || {
                format!("profile {k}, p = {p}: shapes {shapes}, oracle {oracle}")
            });
        }
    }
    Ok(check)
}

pub fn opnorm_ceiling_check(profiles: &[VarianceProfile], p_max: u32) -> Result<CheckResult> {
    let mut check = CheckResult::new("opnorm_ceiling_per_shape");
    for p in 1..=p_max {
        let shapes = enumerate_shapes(p)?;
        for (k, b) in profiles.iter().enumerate() {
            for s in &shapes {
                let w = check_opnorm_ceiling(s, b);
                check.record(w.holds, || {
                    format!("profile {k}, shape {:?}/{:?}: W = {}, ceiling = {}", s.left_seq, s.right_seq, w.w, w.ceiling)
                });
            }
        }
    }
    Ok(check)
}

pub fn schatten_ceiling_check(profiles: &[VarianceProfile], p_max: u32) -> Result<CheckResult> {
    let mut check = CheckResult::new("schatten_ceiling_per_shape");
    for p in 1..=p_max {
        let shapes = enumerate_shapes(p)?;
        for (k, b) in profiles.iter().enumerate() {
            for s in &shapes {
                let w = check_schatten_ceiling(s, b, p)?;
                check.record(w.holds, || {
                    format!("profile {k}, shape {:?}/{:?}: W = {}, ceiling = {}", s.left_seq, s.right_seq, w.w, w.ceiling)
                });
            }
        }
    }
    Ok(check)
}

pub fn joint_moment_check(max: u32) -> CheckResult {
    let mut check = CheckResult::new("joint_moment_table");
    let table = JointMomentTable::new(max, max);
    let bad = table.violations();
    for n in 0..=max {
        for m in 0..=max {
            check.record(!bad.contains(&(n, m)), || format!("a({n},{m}) = {}", table.get(n, m)));
        }
    }
    check
}

/// `diag_trace_moment^{1/p} / (sqrt(p) sigma_bar_p + p b_p^2)`; `None` for
/// the zero profile.
pub fn diag_order_ratio(b: &VarianceProfile, p: u32) -> Result<Option<f64>> {
    let s = compute_schatten_params(b, p)?;
    let scale = (p as f64).sqrt() * s.sigma_bar_p + p as f64 * s.b_p.powi(2);
    if scale == 0.0 {
        return Ok(None);
    }
    let m = diag_trace_moment(b, p)?.approx;
    Ok(Some(m.max(0.0).powf(1.0 / p as f64) / scale))
}

pub fn order_window_check(profiles: &[VarianceProfile], p_list: &[u32]) -> Result<CheckResult> {
    let mut check = CheckResult::new("diag_order_window");
    for (k, b) in profiles.iter().enumerate() {
        for &p in p_list {
            if let Some(r) = diag_order_ratio(b, p)? {
                check.record(r >= ORDER_WINDOW.0 && r <= ORDER_WINDOW.1, || {
                    format!("profile {k}, p = {p}: ratio {r}")
                });
            }
        }
    }
    Ok(check)
}

/// Runs every check, over `explicit` when given and otherwise over random
/// rational profiles drawn from `cfg`.
pub fn run_verification(cfg: &VerifyConfig, explicit: Option<&VarianceProfile>) -> Result<VerifyReport> {
    if cfg.d == 0 || cfg.n == 0 {
        return Err(Error::Argument("dimensions must be positive".into()));
    }
    let profiles = match explicit {
        Some(b) => vec![b.clone()],
        None => random_profiles(cfg.d, cfg.n, cfg.profiles, cfg.seed),
    };
    let checks = vec![
        shape_sum_check(&profiles, cfg.p_max, cfg.corrupt_l)?,
        opnorm_ceiling_check(&profiles, cfg.opnorm_ceiling_p_max)?,
        schatten_ceiling_check(&profiles, cfg.schatten_ceiling_p_max)?,
        joint_moment_check(8),
        order_window_check(&profiles, &cfg.order_p_list)?,
    ];
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        profiles: profiles.len(),
        checks,
    })
}
