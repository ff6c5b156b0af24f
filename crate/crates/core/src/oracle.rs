//! Exact Gaussian moment computations by direct expansion.
//!
//! These are deliberately naive: every index tuple is visited and each
//! expectation factorizes over matrix cells. They serve as ground truth for
//! the shape engine and the simulator, so they share no code with either.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{binomial, gaussian_moment, MomentValue, Weight};
use crate::profile::VarianceProfile;

/// Default bound on the number of expanded terms.
pub const DEFAULT_WORK_CAP: u64 = 10_000_000;

/// `a_{n,m} = E g^n (g^2 - 1)^m` for a standard Gaussian `g`.
pub fn joint_moment(n: u32, m: u32) -> BigInt {
    (0..=m).fold(BigInt::zero(), |acc, k| {
        let term = binomial(m, k) * gaussian_moment(n + 2 * k);
        if (m - k).is_multiple_of(2) {
            acc + term
        } else {
            acc - term
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointMomentTable {
    pub max_n: u32,
    pub max_m: u32,
    /// `values[n][m]`, serialized as decimal strings.
    #[serde(serialize_with = "bigint_rows")]
    pub values: Vec<Vec<BigInt>>,
}

fn bigint_rows<S: serde::Serializer>(rows: &[Vec<BigInt>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(rows.len()))?;
    for row in rows {
        let strs: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        seq.serialize_element(&strs)?;
    }
    seq.end()
}

impl JointMomentTable {
    pub fn new(max_n: u32, max_m: u32) -> Self {
        let values = (0..=max_n)
            .map(|n| (0..=max_m).map(|m| joint_moment(n, m)).collect())
            .collect();
        Self { max_n, max_m, values }
    }

    pub fn get(&self, n: u32, m: u32) -> &BigInt {
        &self.values[n as usize][m as usize]
    }

    /// Entries that are negative, or whose vanishing disagrees with
    /// "zero iff `n` odd or `(n, m) = (0, 1)`".
    pub fn violations(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for n in 0..=self.max_n {
            for m in 0..=self.max_m {
                let v = self.get(n, m);
                let expect_zero = n % 2 == 1 || (n, m) == (0, 1);
                if v.is_negative() || v.is_zero() != expect_zero {
                    out.push((n, m));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    Full,
    Offdiag,
    Diag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactMoment {
    pub kind: MomentKind,
    pub p: u32,
    pub value: MomentValue,
    /// Floating-point rendering of `value`.
    pub approx: f64,
}

impl ExactMoment {
    fn new(kind: MomentKind, p: u32, value: MomentValue) -> Self {
        let approx = value.to_f64();
        Self { kind, p, value, approx }
    }
}

fn check_p(p: u32) -> Result<()> {
    if p == 0 {
        return Err(Error::Argument("p must be >= 1".into()));
    }
    Ok(())
}

fn check_work(work: f64, cap: u64, what: &str) -> Result<()> {
    if work > cap as f64 {
        return Err(Error::Resource(format!(
            "{what} needs about {work:.3e} terms, above the work cap {cap}"
        )));
    }
    Ok(())
}

/// Advances `idx` as a base-`base` odometer; false once it wraps around.
fn advance(idx: &mut [usize], base: usize) -> bool {
    for x in idx.iter_mut() {
        *x += 1;
        if *x < base {
            return true;
        }
        *x = 0;
    }
    false
}

/// Per-cell tallies of plain `g` factors and `(g^2 - 1)` factors.
struct Cells {
    plain: Vec<u32>,
    centred: Vec<u32>,
    touched: Vec<usize>,
}

impl Cells {
    fn new(size: usize) -> Self {
        Self {
            plain: vec![0; size],
            centred: vec![0; size],
            touched: Vec::new(),
        }
    }

    fn touch(&mut self, c: usize) {
        if self.plain[c] == 0 && self.centred[c] == 0 {
            self.touched.push(c);
        }
    }

    fn add_plain(&mut self, c: usize) {
        self.touch(c);
        self.plain[c] += 1;
    }

    fn add_centred(&mut self, c: usize) {
        self.touch(c);
        self.centred[c] += 1;
    }

    fn clear(&mut self) {
        for &c in &self.touched {
            self.plain[c] = 0;
            self.centred[c] = 0;
        }
        self.touched.clear();
    }
}

/// Expands `E prod_k X_{u_k v_k} X_{u_{k+1} v_k}` over `(u, v)`, where a
/// repeated row (`u_k = u_{k+1}`) contributes `b^2 (g^2 - 1)` when
/// `centre_diagonal` is set and is skipped otherwise.
fn walk_sum<T: Weight>(vals: &[T], d: usize, n: usize, p: usize, centre_diagonal: bool) -> T {
    let mut moments = vec![vec![T::zero(); p + 1]; 2 * p + 1];
    for (a, row) in moments.iter_mut().enumerate() {
        for (m, slot) in row.iter_mut().enumerate() {
            *slot = T::from_bigint(&joint_moment(a as u32, m as u32));
        }
    }
    let mut total = T::zero();
    let mut cells = Cells::new(d * n);
    let mut u = vec![0usize; p];
    loop {
        let off = (0..p).all(|k| u[k] != u[(k + 1) % p]);
        if centre_diagonal || off {
            let mut v = vec![0usize; p];
            loop {
                let mut weight = T::one();
                for k in 0..p {
                    let (a, b) = (u[k] * n + v[k], u[(k + 1) % p] * n + v[k]);
                    weight = weight * vals[a].clone() * vals[b].clone();
                    if a == b {
                        cells.add_centred(a);
                    } else {
                        cells.add_plain(a);
                        cells.add_plain(b);
                    }
                }
                if !weight.is_zero() {
                    let mut e = T::one();
                    for &c in &cells.touched {
                        e = e * moments[cells.plain[c] as usize][cells.centred[c] as usize].clone();
                    }
                    total = total + weight * e;
                }
                cells.clear();
                if !advance(&mut v, n) {
                    break;
                }
            }
        }
        if !advance(&mut u, d) {
            break;
        }
    }
    total
}

fn dispatch(b: &VarianceProfile, float: impl Fn(&[f64]) -> f64, exact: impl Fn(&[BigRational]) -> BigRational) -> MomentValue {
    match b.exact_values() {
        Some(vals) => MomentValue::Exact(exact(vals)),
        None => MomentValue::Float(float(b.values())),
    }
}

pub fn offdiag_trace_moment(b: &VarianceProfile, p: u32) -> Result<ExactMoment> {
    offdiag_trace_moment_with_cap(b, p, DEFAULT_WORK_CAP)
}

/// `E Tr(Delta XX^T)^p`, the trace moment of the off-diagonal part.
pub fn offdiag_trace_moment_with_cap(b: &VarianceProfile, p: u32, cap: u64) -> Result<ExactMoment> {
    check_p(p)?;
    let (d, n, pu) = (b.d(), b.n(), p as usize);
    check_work(((d * n) as f64).powi(p as i32), cap, "off-diagonal expansion")?;
    let value = dispatch(b, |v| walk_sum(v, d, n, pu, false), |v| walk_sum(v, d, n, pu, false));
    Ok(ExactMoment::new(MomentKind::Offdiag, p, value))
}

pub fn full_trace_moment(b: &VarianceProfile, p: u32) -> Result<ExactMoment> {
    full_trace_moment_with_cap(b, p, DEFAULT_WORK_CAP)
}

/// `E Tr(XX^T - E XX^T)^p`.
pub fn full_trace_moment_with_cap(b: &VarianceProfile, p: u32, cap: u64) -> Result<ExactMoment> {
    check_p(p)?;
    let (d, n, pu) = (b.d(), b.n(), p as usize);
    check_work(((d * n) as f64).powi(p as i32), cap, "full expansion")?;
    let value = dispatch(b, |v| walk_sum(v, d, n, pu, true), |v| walk_sum(v, d, n, pu, true));
    Ok(ExactMoment::new(MomentKind::Full, p, value))
}

/// `sum_i E (sum_j b_ij^2 (g_ij^2 - 1))^p` by multinomial expansion.
fn diag_sum<T: Weight>(vals: &[T], d: usize, n: usize, p: u32) -> T {
    let central: Vec<T> = (0..=p).map(|r| T::from_bigint(&joint_moment(0, r))).collect();
    let fact: Vec<BigInt> = (0..=p).map(crate::numeric::factorial).collect();
    let mut total = T::zero();
    for i in 0..d {
        let sq: Vec<T> = (0..n).map(|j| vals[i * n + j].clone() * vals[i * n + j].clone()).collect();
        let mut ks = Vec::with_capacity(n);
        compositions(p, n, &mut ks, &mut |ks: &[u32]| {
            // p! / prod k_j!  *  prod b^{2k_j} c_{k_j}
            let denom = ks.iter().fold(BigInt::from(1), |acc, &k| acc * &fact[k as usize]);
            let mut term = T::from_bigint(&(&fact[p as usize] / denom));
            for (j, &k) in ks.iter().enumerate() {
                if k > 0 {
                    term = term * sq[j].powu(k) * central[k as usize].clone();
                }
            }
            total = total.clone() + term;
        });
    }
    total
}

/// Visits every `(k_1, ..., k_n)` with sum `p`, skipping parts equal to one
/// (the first central moment vanishes).
fn compositions(rest: u32, slots: usize, ks: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
    if ks.len() + 1 == slots {
        if rest != 1 {
            ks.push(rest);
            f(ks);
            ks.pop();
        }
        return;
    }
    for k in (0..=rest).filter(|&k| k != 1) {
        ks.push(k);
        compositions(rest - k, slots, ks, f);
        ks.pop();
    }
}

pub fn diag_trace_moment(b: &VarianceProfile, p: u32) -> Result<ExactMoment> {
    diag_trace_moment_with_cap(b, p, DEFAULT_WORK_CAP)
}

pub fn diag_trace_moment_with_cap(b: &VarianceProfile, p: u32, cap: u64) -> Result<ExactMoment> {
    check_p(p)?;
    let (d, n) = (b.d(), b.n());
    // C(p + n - 1, n - 1) compositions per row
    let per_row = crate::numeric::binomial(p + n as u32 - 1, n as u32 - 1);
    check_work(d as f64 * f64::from_bigint(&per_row), cap, "diagonal expansion")?;
    let value = dispatch(b, |v| diag_sum(v, d, n, p), |v| diag_sum(v, d, n, p));
    Ok(ExactMoment::new(MomentKind::Diag, p, value))
}
