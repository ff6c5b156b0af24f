use std::fs;
use std::io::Read;
use std::path::Path;

use covbound::bounds::{all_bounds, standard_gaussian_bound, BoundConfig, LogMode};
use covbound::montecarlo::{simulate, tightness_report, SimConfig, Target};
use covbound::oracle::{
    diag_trace_moment_with_cap, full_trace_moment_with_cap, offdiag_trace_moment_with_cap,
};
use covbound::params::{closed_form_params, compute_params, compute_schatten_params};
use covbound::profile::{random_float_profile, random_vector, Entry, ProfileFamily, ProfileFormat};
use covbound::shapes::{
    enumerate_shapes_with_cap, spanning_tree, trace_moment_via_shapes_with, w_with, RootSide, L_value,
};
use covbound::verify::{run_verification, VerifyConfig};
use covbound::{generate, load_profile, Error, Result, VarianceProfile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::args::{
    BoundArgs, BoundsArgs, CompareArgs, ExamplesArgs, FamilyArg, FormatArg, OracleArgs, ParamsArgs, ProfileArgs,
    ShapesArgs, SimArgs, SimulateArgs, VerifyArgs,
};

/// A flat table for `--csv` output.
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Output {
    pub payload: Value,
    pub table: Table,
    pub digest: Option<String>,
    /// Set when a verification check failed.
    pub failed: bool,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize to JSON")
}

fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        x.to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Loaded {
    pub profile: VarianceProfile,
    pub digest: String,
}

fn guess_format(path: &Path, explicit: Option<FormatArg>) -> ProfileFormat {
    match explicit {
        Some(FormatArg::Csv) => ProfileFormat::Csv,
        Some(FormatArg::Json) => ProfileFormat::Json,
        None if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => ProfileFormat::Json,
        None => ProfileFormat::Csv,
    }
}

fn read_profile_file(path: &Path, format: Option<FormatArg>) -> Result<Loaded> {
    let bytes = if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Error::Argument(format!("cannot read stdin: {e}")))?;
        buf
    } else {
        fs::read(path).map_err(|e| Error::Argument(format!("cannot read {}: {e}", path.display())))?
    };
    let profile = load_profile(bytes.as_slice(), guess_format(path, format))?;
    Ok(Loaded {
        profile,
        digest: sha256_hex(&bytes),
    })
}

fn parse_entries(raw: &[String]) -> Result<Vec<Entry>> {
    raw.iter()
        .map(|s| {
            s.trim()
                .parse::<Entry>()
                .map_err(|e| Error::Argument(format!("bad vector component {s:?}: {e}")))
        })
        .collect()
}

fn vector_or_random(raw: &Option<Vec<String>>, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Entry>> {
    match raw {
        Some(v) => parse_entries(v),
        None => Ok(random_vector(rng, len, 0.5, 2.0)),
    }
}

/// Builds a family member; vectors not given explicitly are drawn from `rng`.
fn family_profile(
    family: FamilyArg,
    d: usize,
    n: usize,
    a: &Option<Vec<String>>,
    b: &Option<Vec<String>>,
    k: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(ProfileFamily, VarianceProfile)> {
    let fam = match family {
        FamilyArg::Constant => ProfileFamily::Constant,
        FamilyArg::IidColumns => ProfileFamily::IidColumns { b: vector_or_random(b, d, rng)? },
        FamilyArg::IidRows => ProfileFamily::IidRows { b: vector_or_random(b, n, rng)? },
        FamilyArg::RankOne => ProfileFamily::RankOne {
            a: vector_or_random(a, d, rng)?,
            b: vector_or_random(b, n, rng)?,
        },
        FamilyArg::BoundedRatio => ProfileFamily::BoundedRatio {
            k,
            base: random_float_profile(rng, d, n),
        },
    };
    let profile = generate(&fam, d, n)?;
    Ok((fam, profile))
}

/// The profile selected by `--profile` or `--family`, if any.
pub fn resolve_optional(args: &ProfileArgs) -> Result<Option<Loaded>> {
    if let Some(path) = &args.profile {
        return read_profile_file(path, args.format).map(Some);
    }
    let Some(family) = args.family else {
        return Ok(None);
    };
    let (Some(d), Some(n)) = (args.d, args.n) else {
        return Err(Error::Argument("--family needs --d and --n".into()));
    };
    if d == 0 || n == 0 {
        return Err(Error::Domain("dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.family_seed);
    let (_, profile) = family_profile(family, d, n, &args.a, &args.b, args.k, &mut rng)?;
    let digest = sha256_hex(profile.to_csv().as_bytes());
    Ok(Some(Loaded { profile, digest }))
}

pub fn resolve(args: &ProfileArgs) -> Result<Loaded> {
    resolve_optional(args)?.ok_or_else(|| Error::Argument("give either --profile FILE or --family NAME".into()))
}

fn bound_config(args: &BoundArgs) -> Result<BoundConfig> {
    let cfg = BoundConfig {
        epsilon: args.epsilon,
        c_universal: args.c_universal,
        c_prime: args.c_prime,
        log_floor: if args.log_floor { LogMode::Floored } else { LogMode::Literal },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn sim_config(args: &SimArgs, p_list: Vec<u32>) -> Result<SimConfig> {
    let cfg = SimConfig {
        seed: args.seed,
        samples: args.samples,
        p_list,
        norm_method: args.norm_method.parse()?,
        tolerance: args.tolerance,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn profile_summary(b: &VarianceProfile) -> Value {
    json!({ "d": b.d(), "n": b.n(), "exactness": b.exactness() })
}

pub fn params(args: &ParamsArgs) -> Result<Output> {
    let loaded = resolve(&args.profile)?;
    let b = &loaded.profile;
    let p = compute_params(b);
    let schatten = args
        .p
        .iter()
        .map(|&q| compute_schatten_params(b, q))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<Vec<String>> = to_value(&p)
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| vec![k.clone(), String::new(), json_scalar(v)])
        .collect();
    for s in &schatten {
        for (k, v) in to_value(s).as_object().unwrap().iter().filter(|(k, _)| *k != "p") {
            rows.push(vec![k.clone(), s.p.to_string(), json_scalar(v)]);
        }
    }
    Ok(Output {
        payload: json!({ "profile": profile_summary(b), "params": p, "schatten": schatten }),
        table: Table { headers: vec!["parameter", "p", "value"], rows },
        digest: Some(loaded.digest),
        failed: false,
    })
}

fn json_scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn is_all_ones(b: &VarianceProfile) -> bool {
    b.values().iter().all(|&x| x == 1.0)
}

pub fn bounds(args: &BoundsArgs) -> Result<Output> {
    let loaded = resolve(&args.profile)?;
    let b = &loaded.profile;
    let cfg = bound_config(&args.bounds)?;
    let mut reports = all_bounds(b, &args.p, &cfg)?;
    if is_all_ones(b) {
        for &p in &args.p {
            reports.push(standard_gaussian_bound(b.d(), b.n(), p as f64, false, &cfg)?);
        }
    }
    let rows = reports
        .iter()
        .map(|r| {
            let (le, gt) = r.branches.map_or((String::new(), String::new()), |br| (num(br.beta_le_1), num(br.beta_gt_1)));
            vec![
                r.bound_name.to_string(),
                to_value(&r.case_taken).as_str().unwrap_or_default().to_string(),
                num(r.leading_term),
                num(r.total),
                le,
                gt,
            ]
        })
        .collect();
    Ok(Output {
        payload: json!({
            "profile": profile_summary(b),
            "params": compute_params(b),
            "config": cfg,
            "reports": reports,
        }),
        table: Table {
            headers: vec!["bound", "case", "leading_term", "total", "total_beta_le_1", "total_beta_gt_1"],
            rows,
        },
        digest: Some(loaded.digest),
        failed: false,
    })
}

fn target_cells(t: &Target) -> (String, String) {
    match t {
        Target::Opnorm => ("opnorm".into(), String::new()),
        Target::DiagOpnorm => ("diag_opnorm".into(), String::new()),
        Target::SchattenTrace { p } => ("schatten_trace".into(), p.to_string()),
    }
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<Output> {
    let loaded = resolve(&args.profile)?;
    let cfg = sim_config(&args.sim, args.p.clone())?;
    let estimates = simulate(&loaded.profile, &cfg)?;
    let rows = estimates
        .iter()
        .map(|e| {
            let (t, p) = target_cells(&e.target);
            vec![t, p, num(e.mean), num(e.stderr), e.samples.to_string(), e.seed.to_string()]
        })
        .collect();
    Ok(Output {
        payload: json!({ "profile": profile_summary(&loaded.profile), "config": cfg, "estimates": estimates }),
        table: Table { headers: vec!["target", "p", "mean", "stderr", "samples", "seed"], rows },
        digest: Some(loaded.digest),
        failed: false,
    })
}

pub fn oracle(args: &OracleArgs) -> Result<Output> {
    let loaded = resolve(&args.profile)?;
    let b = &loaded.profile;
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for &p in &args.p {
        let full = full_trace_moment_with_cap(b, p, args.work_cap)?;
        let off = offdiag_trace_moment_with_cap(b, p, args.work_cap)?;
        let diag = diag_trace_moment_with_cap(b, p, args.work_cap)?;
        let mut entry = json!({ "p": p, "full": full, "offdiag": off, "diag": diag });
        let mut row = vec![p.to_string(), full.value.to_string(), off.value.to_string(), diag.value.to_string()];
        if args.with_shapes {
            let s = trace_moment_via_shapes_with(b, p, covbound::shapes::DEFAULT_SHAPE_CAP, L_value)?;
            let diff = s.difference(&off.value);
            row.push(s.to_string());
            row.push(diff.to_string());
            entry["shape_sum"] = to_value(&s);
            entry["shape_sum_minus_offdiag"] = to_value(&diff);
        }
        rows.push(row);
        entries.push(entry);
    }
    let mut headers = vec!["p", "full", "offdiag", "diag"];
    if args.with_shapes {
        headers.extend(["shape_sum", "shape_sum_minus_offdiag"]);
    }
    Ok(Output {
        payload: json!({ "profile": profile_summary(b), "moments": entries }),
        table: Table { headers, rows },
        digest: Some(loaded.digest),
        failed: false,
    })
}

pub fn shapes(args: &ShapesArgs) -> Result<Output> {
    let loaded = resolve_optional(&args.profile)?;
    let mut census = Vec::new();
    let mut rows = Vec::new();
    for &p in &args.p {
        let shapes = enumerate_shapes_with_cap(p, args.cap)?;
        let mut items = Vec::new();
        for s in &shapes {
            let l = L_value(s);
            let mut item = json!({
                "left_seq": s.left_seq,
                "right_seq": s.right_seq,
                "m1": s.m1,
                "m2": s.m2,
                "multiplicities": s.multiplicities(),
                "edges": s.edge_mult,
                "L": l.to_string(),
            });
            let mut w_cell = String::new();
            if let Some(loaded) = &loaded {
                let b = &loaded.profile;
                let work = covbound::shapes::assignment_count(s, b.d(), b.n());
                if work > covbound::oracle::DEFAULT_WORK_CAP as f64 {
                    return Err(Error::Resource(format!(
                        "W(s) needs {work:.3e} assignments for a {}x{} profile",
                        b.d(),
                        b.n()
                    )));
                }
                let w = match b.exact_values() {
                    Some(v) => covbound::MomentValue::Exact(w_with(s, v, b.d(), b.n())),
                    None => covbound::MomentValue::Float(w_with(s, b.values(), b.d(), b.n())),
                };
                w_cell = w.to_string();
                item["W"] = to_value(&w);
            }
            if args.trees {
                item["tree_left"] = to_value(&spanning_tree(s, RootSide::Left).tree);
                item["tree_right"] = to_value(&spanning_tree(s, RootSide::Right).tree);
            }
            let seq = |v: &[u32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            rows.push(vec![
                p.to_string(),
                seq(&s.left_seq),
                seq(&s.right_seq),
                s.m1.to_string(),
                s.m2.to_string(),
                seq(&s.multiplicities()),
                l.to_string(),
                w_cell,
            ]);
            items.push(item);
        }
        census.push(json!({ "p": p, "count": shapes.len(), "shapes": items }));
    }
    let mut payload = json!({ "census": census });
    if let Some(loaded) = &loaded {
        payload["profile"] = profile_summary(&loaded.profile);
    }
    Ok(Output {
        payload,
        table: Table {
            headers: vec!["p", "left_seq", "right_seq", "m1", "m2", "multiplicities", "L", "W"],
            rows,
        },
        digest: loaded.map(|l| l.digest),
        failed: false,
    })
}

fn parse_grid(grid: &[String]) -> Result<Vec<(usize, usize)>> {
    grid.iter()
        .map(|g| {
            let bad = || Error::Argument(format!("grid point {g:?} is not of the form DxN"));
            let (d, n) = g.trim().split_once(['x', 'X']).ok_or_else(bad)?;
            let (d, n): (usize, usize) = (d.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
            if d == 0 || n == 0 {
                return Err(bad());
            }
            Ok((d, n))
        })
        .collect()
}

#[derive(Serialize)]
struct Claim {
    claim: &'static str,
    lhs: f64,
    rhs: f64,
    holds: bool,
}

fn claim_le(claim: &'static str, lhs: f64, rhs: f64) -> Claim {
    Claim { claim, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12) }
}

fn norms(v: &[Entry]) -> (f64, f64, f64) {
    let x: Vec<f64> = v.iter().map(Entry::to_f64).collect();
    let l2 = x.iter().map(|t| t * t).sum::<f64>().sqrt();
    let l4sq = x.iter().map(|t| t.powi(4)).sum::<f64>().sqrt();
    let linf = x.iter().copied().fold(0.0, f64::max);
    (l2, l4sq, linf)
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| a / b)
}

pub fn examples(args: &ExamplesArgs) -> Result<Output> {
    let cfg = bound_config(&args.bounds)?;
    let grid = parse_grid(&args.grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (d, n) in grid {
        let (fam, b) = family_profile(args.family, d, n, &None, &None, args.k, &mut rng)?;
        let p = compute_params(&b);
        let reports = all_bounds(&b, &[], &cfg)?;
        let get = |name: &str| reports.iter().find(|r| r.bound_name == name).unwrap();
        let (main, chz, free) = (get("main_upper_bound"), get("chz_bound"), get("free_probability_bound"));
        let (lm, lc, lf) = (main.bare_leading(), chz.bare_leading(), free.bare_leading());
        let mut claims = Vec::new();
        match &fam {
            ProfileFamily::RankOne { a, b: bv } => {
                let (a2, _, ainf) = norms(a);
                let (b2, b4sq, binf) = norms(bv);
                claims.push(claim_le("b4sq_a2_ainf_le_b2_binf_a2_ainf", b4sq * a2 * ainf, b2 * binf * a2 * ainf));
                claims.push(claim_le("main_leading_le_chz_leading", lm, lc));
            }
            ProfileFamily::IidRows { b: bv } => {
                let (_, b4sq, binf) = norms(bv);
                let closed = 2.0 * (d as f64).sqrt() * b4sq + d as f64 * binf * binf;
                let close = (lm - closed).abs() <= 1e-12 * closed.max(lm);
                claims.push(Claim { claim: "main_leading_matches_closed_form", lhs: lm, rhs: closed, holds: close });
            }
            ProfileFamily::BoundedRatio { k, .. } => {
                let norms = b.column_norms();
                let min = norms.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
                let max = norms.iter().copied().fold(0.0, f64::max);
                claims.push(claim_le("column_ratio_le_k", max, k * min));
                claims.push(claim_le("beta_inf_le_k", p.beta_inf, *k));
            }
            _ => claims.push(claim_le("main_leading_le_chz_leading", lm, lc)),
        }
        let closed_form = match closed_form_params(&fam, d, n) {
            Ok(c) => json!({ "violations": c.violations(&p, 1e-12) }),
            Err(_) => Value::Null,
        };
        rows.push(vec![
            d.to_string(),
            n.to_string(),
            num(p.beta_inf),
            to_value(&main.case_taken).as_str().unwrap_or_default().to_string(),
            num(lm),
            num(lc),
            num(lf),
        ]);
        points.push(json!({
            "d": d,
            "n": n,
            "beta_inf": to_value(&p).get("beta_inf"),
            "case": main.case_taken,
            "leading": { "main": lm, "chz": lc, "free": lf },
            "ratios": {
                "main_over_chz": ratio(lm, lc),
                "main_over_free": ratio(lm, lf),
                "chz_over_free": ratio(lc, lf),
            },
            "claims": claims,
            "closed_form": closed_form,
            "profile_digest": sha256_hex(b.to_csv().as_bytes()),
        }));
    }
    Ok(Output {
        payload: json!({ "family": fam_name(args.family), "seed": args.seed, "config": cfg, "points": points }),
        table: Table {
            headers: vec!["d", "n", "beta_inf", "case", "main_leading", "chz_leading", "free_leading"],
            rows,
        },
        digest: None,
        failed: false,
    })
}

fn fam_name(f: FamilyArg) -> &'static str {
    match f {
        FamilyArg::Constant => "constant",
        FamilyArg::IidColumns => "iid_columns",
        FamilyArg::IidRows => "iid_rows",
        FamilyArg::RankOne => "rank_one",
        FamilyArg::BoundedRatio => "bounded_ratio",
    }
}

pub fn verify(args: &VerifyArgs) -> Result<Output> {
    let explicit = match &args.profile {
        Some(path) => Some(read_profile_file(path, args.format)?),
        None => None,
    };
    let cfg = VerifyConfig {
        d: args.d,
        n: args.n,
        p_max: args.p,
        opnorm_ceiling_p_max: args.opnorm_ceiling_p,
        schatten_ceiling_p_max: args.schatten_ceiling_p,
        profiles: args.profiles,
        seed: args.seed,
        corrupt_l: args.corrupt_l,
        ..Default::default()
    };
    let report = run_verification(&cfg, explicit.as_ref().map(|l| &l.profile))?;
    let rows = report
        .checks
        .iter()
        .map(|c| vec![c.name.to_string(), c.passed.to_string(), c.cases.to_string()])
        .collect();
    Ok(Output {
        failed: !report.passed,
        payload: json!({ "config": cfg, "report": report }),
        table: Table { headers: vec!["check", "passed", "cases"], rows },
        digest: explicit.map(|l| l.digest),
    })
}

pub fn compare(args: &CompareArgs) -> Result<Output> {
    let loaded = resolve(&args.profile)?;
    let bcfg = bound_config(&args.bounds)?;
    let scfg = sim_config(&args.sim, Vec::new())?;
    let report = tightness_report(&loaded.profile, &scfg, &bcfg)?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_else(|| "n/a".into());
    let rows = vec![
        vec!["empirical_mean".into(), num(report.empirical.mean)],
        vec!["empirical_stderr".into(), num(report.empirical.stderr)],
        vec!["lower_bound_opnorm".into(), num(report.lower_bound_opnorm)],
        vec!["main_upper_bound".into(), num(report.main_upper_bound)],
        vec!["chz_bound".into(), num(report.chz_bound)],
        vec!["free_probability_bound".into(), num(report.free_probability_bound)],
        vec!["empirical_over_lower".into(), opt(report.ratios.empirical_over_lower)],
        vec!["main_over_empirical".into(), opt(report.ratios.main_over_empirical)],
        vec!["chz_over_empirical".into(), opt(report.ratios.chz_over_empirical)],
        vec!["free_over_empirical".into(), opt(report.ratios.free_over_empirical)],
    ];
    Ok(Output {
        payload: json!({
            "profile": profile_summary(&loaded.profile),
            "sim_config": scfg,
            "bound_config": bcfg,
            "report": report,
        }),
        table: Table { headers: vec!["quantity", "value"], rows },
        digest: Some(loaded.digest),
        failed: false,
    })
}
