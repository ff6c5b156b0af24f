//! Seeded simulation of `XX^T - E XX^T`.
//!
//! Sample `k` of a run with seed `s` draws its normals from the ChaCha8
//! stream `(s, k)`, so a run is reproducible whatever the thread schedule.
//! Normals use the ziggurat sampler of `rand_distr`. Per-sample statistics are
//! collected in index order and reduced sequentially.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{chz_bound, free_probability_bound, lower_bound_opnorm, main_upper_bound, BoundConfig};
use crate::error::{Error, Result};
use crate::params::check_even_p;
use crate::profile::VarianceProfile;

/// Dimension above which [`NormMethod::Auto`] switches to power iteration.
pub const DENSE_EIGEN_MAX_DIM: usize = 2000;

const POWER_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    /// Dense eigensolver up to [`DENSE_EIGEN_MAX_DIM`], power iteration above.
    #[default]
    Auto,
    DenseEigen,
    PowerIteration,
}

impl NormMethod {
    pub fn resolve(self, d: usize) -> NormMethod {
        match self {
            NormMethod::Auto if d <= DENSE_EIGEN_MAX_DIM => NormMethod::DenseEigen,
            NormMethod::Auto => NormMethod::PowerIteration,
            m => m,
        }
    }
}

impl std::str::FromStr for NormMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(NormMethod::Auto),
            "dense_eigen" | "dense" => Ok(NormMethod::DenseEigen),
            "power_iteration" | "power" => Ok(NormMethod::PowerIteration),
            _ => Err(Error::Argument(format!("unknown norm method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    pub samples: usize,
    pub p_list: Vec<u32>,
    pub norm_method: NormMethod,
    pub tolerance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 200,
            p_list: Vec::new(),
            norm_method: NormMethod::Auto,
            tolerance: 1e-10,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::Argument(format!("samples must be >= 2, got {}", self.samples)));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Argument(format!("tolerance must lie in (0, 1), got {}", self.tolerance)));
        }
        self.p_list.iter().try_for_each(|&p| check_even_p(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Opnorm,
    SchattenTrace { p: u32 },
    DiagOpnorm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub target: Target,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    /// `mean^{1/p}` for Schatten targets.
    pub root_mean: Option<f64>,
}

/// `XX^T - E XX^T` for the sample drawn from stream `(seed, index)`. Both
/// triangles are written from the same value, so the result is symmetric.
pub fn sample_deviation(b: &VarianceProfile, seed: u64, index: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, index);
    sample_with(b, &mut rng)
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn sample_with(b: &VarianceProfile, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let (d, n) = (b.d(), b.n());
    let g: Vec<f64> = (0..d * n).map(|_| rng.sample(StandardNormal)).collect();
    let x: Vec<f64> = b.values().iter().zip(&g).map(|(b, g)| b * g).collect();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        let ri = &x[i * n..(i + 1) * n];
        let diag: f64 = (0..n).map(|j| b.get(i, j).powi(2) * (g[i * n + j] * g[i * n + j] - 1.0)).sum();
        m[(i, i)] = diag;
        for l in i + 1..d {
            let rl = &x[l * n..(l + 1) * n];
            let v: f64 = ri.iter().zip(rl).map(|(a, c)| a * c).sum();
            m[(i, l)] = v;
            m[(l, i)] = v;
        }
    }
    m
}

fn eigenvalues(m: DMatrix<f64>, tol: f64, sample: u64) -> Result<DVector<f64>> {
    let d = m.nrows();
    SymmetricEigen::try_new(m, tol, 1000 * d.max(1))
        .map(|e| e.eigenvalues)
        .ok_or(Error::Numeric {
            sample,
            message: "symmetric eigensolver did not converge".into(),
        })
}

/// Largest `|lambda|` of `m` from power iteration on `m^2`.
fn power_norm(m: &DMatrix<f64>, rng: &mut ChaCha8Rng, tol: f64, sample: u64) -> Result<f64> {
    let d = m.nrows();
    let mut v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = v.norm();
    if norm == 0.0 || m.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    v /= norm;
    let mut last = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = m * (m * &v);
        let lambda_sq = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return Ok(0.0);
        }
        v = w / wn;
        if (lambda_sq - last).abs() <= tol * lambda_sq.abs() {
            return Ok(lambda_sq.max(0.0).sqrt());
        }
        last = lambda_sq;
    }
    Err(Error::Numeric {
        sample,
        message: format!("power iteration did not converge in {POWER_MAX_ITER} steps"),
    })
}

/// Per-sample statistics, in the order `opnorm, diag_opnorm, Tr M^p...`.
fn sample_stats(b: &VarianceProfile, cfg: &SimConfig, index: u64, want_opnorm: bool) -> Result<Vec<f64>> {
    let mut rng = stream(cfg.seed, index);
    let m = sample_with(b, &mut rng);
    let diag = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let method = cfg.norm_method.resolve(b.d());
    let need_eigen = !cfg.p_list.is_empty() || (want_opnorm && method == NormMethod::DenseEigen);
    let eig = if need_eigen { Some(eigenvalues(m.clone(), cfg.tolerance, index)?) } else { None };
    let opnorm = if !want_opnorm {
        f64::NAN
    } else if method == NormMethod::PowerIteration {
        power_norm(&m, &mut rng, cfg.tolerance, index)?
    } else {
        eig.as_ref().unwrap().iter().map(|x| x.abs()).fold(0.0, f64::max)
    };
    let mut out = vec![opnorm, diag];
    for &p in &cfg.p_list {
        let e = eig.as_ref().unwrap();
        out.push(e.iter().map(|x| x.powi(p as i32)).sum());
    }
    Ok(out)
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn run(b: &VarianceProfile, cfg: &SimConfig, want_opnorm: bool) -> Result<Vec<MomentEstimate>> {
    cfg.validate()?;
    let rows: Vec<Result<Vec<f64>>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| sample_stats(b, cfg, k, want_opnorm))
        .collect();
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    let column = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let estimate = |target: Target, c: usize| {
        let (mean, stderr) = mean_stderr(&column(c));
        let root_mean = match target {
            Target::SchattenTrace { p } => Some(mean.max(0.0).powf(1.0 / p as f64)),
            _ => None,
        };
        MomentEstimate {
            target,
            mean,
            stderr,
            samples: cfg.samples,
            seed: cfg.seed,
            root_mean,
        }
    };
    let mut out = Vec::new();
    if want_opnorm {
        out.push(estimate(Target::Opnorm, 0));
    }
    out.push(estimate(Target::DiagOpnorm, 1));
    for (k, &p) in cfg.p_list.iter().enumerate() {
        out.push(estimate(Target::SchattenTrace { p }, 2 + k));
    }
    Ok(out)
}

/// Operator norm, diagonal operator norm and every requested Schatten trace,
/// all from the same samples.
pub fn simulate(b: &VarianceProfile, cfg: &SimConfig) -> Result<Vec<MomentEstimate>> {
    run(b, cfg, true)
}

/// Mean of `||XX^T - E XX^T||` over the samples.
pub fn estimate_opnorm_deviation(b: &VarianceProfile, cfg: &SimConfig) -> Result<MomentEstimate> {
    let cfg = SimConfig { p_list: Vec::new(), ..cfg.clone() };
    Ok(run(b, &cfg, true)?.remove(0))
}

/// Mean of `||Diag(XX^T - E XX^T)||` over the samples.
pub fn estimate_diag_opnorm(b: &VarianceProfile, cfg: &SimConfig) -> Result<MomentEstimate> {
    let cfg = SimConfig { p_list: Vec::new(), ..cfg.clone() };
    Ok(run(b, &cfg, false)?.remove(0))
}

/// Mean of `Tr (XX^T - E XX^T)^p` over the samples.
pub fn estimate_schatten_trace(b: &VarianceProfile, p: u32, cfg: &SimConfig) -> Result<MomentEstimate> {
    check_even_p(p)?;
    let cfg = SimConfig { p_list: vec![p], ..cfg.clone() };
    Ok(run(b, &cfg, false)?.remove(1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessRatios {
    pub empirical_over_lower: Option<f64>,
    pub main_over_empirical: Option<f64>,
    pub chz_over_empirical: Option<f64>,
    pub free_over_empirical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub empirical: MomentEstimate,
    pub lower_bound_opnorm: f64,
    pub main_upper_bound: f64,
    pub chz_bound: f64,
    pub free_probability_bound: f64,
    /// `None` where the denominator vanishes.
    pub ratios: TightnessRatios,
}

pub fn tightness_report(b: &VarianceProfile, cfg: &SimConfig, bcfg: &BoundConfig) -> Result<TightnessReport> {
    let empirical = estimate_opnorm_deviation(b, cfg)?;
    let lower = lower_bound_opnorm(b).total;
    let main = main_upper_bound(b, bcfg)?.total;
    let chz = chz_bound(b, bcfg)?.total;
    let free = free_probability_bound(b, bcfg)?.total;
    let ratio = |a: f64, c: f64| (c > 0.0).then(|| a / c);
    let e = empirical.mean;
    Ok(TightnessReport {
        ratios: TightnessRatios {
            empirical_over_lower: ratio(e, lower),
            main_over_empirical: ratio(main, e),
            chz_over_empirical: ratio(chz, e),
            free_over_empirical: ratio(free, e),
        },
        empirical,
        lower_bound_opnorm: lower,
        main_upper_bound: main,
        chz_bound: chz,
        free_probability_bound: free,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(d: usize, n: usize) -> VarianceProfile {
        VarianceProfile::from_integers(d, n, &vec![1; d * n]).unwrap()
    }

    #[test]
    fn zero_profile() {
        let z = VarianceProfile::zeros(3, 4).unwrap();
        assert_eq!(sample_deviation(&z, 1, 0), DMatrix::zeros(3, 3));
        let cfg = SimConfig { samples: 10, ..Default::default() };
        let e = estimate_opnorm_deviation(&z, &cfg).unwrap();
        assert_eq!((e.mean, e.stderr), (0.0, 0.0));
        assert_eq!(estimate_schatten_trace(&z, 2, &cfg).unwrap().mean, 0.0);
        let t = tightness_report(&z, &cfg, &BoundConfig::default()).unwrap();
        assert_eq!(t.ratios.empirical_over_lower, None);
        assert_eq!(t.ratios.main_over_empirical, None);
    }

    #[test]
    fn one_by_one_is_centred_square() {
        let b = ones(1, 1);
        let mut rng = stream(42, 3);
        let g: f64 = rng.sample(StandardNormal);
        assert_eq!(sample_deviation(&b, 42, 3)[(0, 0)], g * g - 1.0);
    }

    #[test]
    fn determinism_and_symmetry() {
        let b = VarianceProfile::from_f64(4, 3, (0..12).map(|k| 0.25 + k as f64 * 0.1).collect()).unwrap();
        let a = sample_deviation(&b, 7, 11);
        assert_eq!(a, sample_deviation(&b, 7, 11));
        assert_ne!(a, sample_deviation(&b, 7, 12));
        assert_eq!(a, a.transpose());
        let cfg = SimConfig { samples: 50, seed: 9, p_list: vec![2, 4], ..Default::default() };
        assert_eq!(simulate(&b, &cfg).unwrap(), simulate(&b, &cfg).unwrap());
        let all = simulate(&b, &cfg).unwrap();
        assert_eq!(all[0], estimate_opnorm_deviation(&b, &cfg).unwrap());
        assert_eq!(all[1], estimate_diag_opnorm(&b, &cfg).unwrap());
        assert_eq!(all[3], estimate_schatten_trace(&b, 4, &cfg).unwrap());
    }

    #[test]
    fn power_iteration_matches_dense() {
        let b = VarianceProfile::from_f64(6, 9, (0..54).map(|k| 1.0 + (k % 5) as f64).collect()).unwrap();
        let dense = SimConfig { samples: 20, norm_method: NormMethod::DenseEigen, ..Default::default() };
        let power = SimConfig { norm_method: NormMethod::PowerIteration, ..dense.clone() };
        let a = estimate_opnorm_deviation(&b, &dense).unwrap().mean;
        let c = estimate_opnorm_deviation(&b, &power).unwrap().mean;
        assert!((a - c).abs() <= 1e-6 * a, "{a} vs {c}");
    }

    #[test]
    fn scaling_by_two_is_exact() {
        let b = VarianceProfile::from_f64(3, 5, (0..15).map(|k| 0.3 + k as f64 * 0.07).collect()).unwrap();
        let b2 = VarianceProfile::from_f64(3, 5, b.values().iter().map(|x| 2.0 * x).collect()).unwrap();
        assert_eq!(sample_deviation(&b2, 5, 1), sample_deviation(&b, 5, 1) * 4.0);
    }

    #[test]
    fn single_entry_schatten_two() {
        let cfg = SimConfig { samples: 20_000, seed: 3, ..Default::default() };
        let e = estimate_schatten_trace(&ones(1, 1), 2, &cfg).unwrap();
        assert!((e.mean - 2.0).abs() <= 5.0 * e.stderr, "{e:?}");
        assert!(matches!(estimate_schatten_trace(&ones(1, 1), 3, &cfg), Err(Error::Argument(_))));
        let bad = SimConfig { samples: 1, ..Default::default() };
        assert!(estimate_opnorm_deviation(&ones(1, 1), &bad).is_err());
    }
}
