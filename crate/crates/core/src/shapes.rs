//! Shapes of closed bipartite walks and the per-shape quantities `L(s)`, `W(s)`.
//!
//! A walk `u_1 -> v_1 -> u_2 -> ... -> v_p -> u_1` alternates between row
//! labels `u` and column labels `v`; its shape relabels both sides in order of
//! first appearance. Labels are 1-based in the public types.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::Case;
use crate::error::{Error, Result};
use crate::numeric::{gaussian_moment, MomentValue, Weight};
use crate::params::{compute_params, schatten_params_any};
use crate::profile::VarianceProfile;

pub const DEFAULT_SHAPE_CAP: u32 = 8;

/// Relative slack for the per-shape ceiling comparisons.
pub const CEILING_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub left: u32,
    pub right: u32,
    pub mult: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Shape {
    pub p: u32,
    pub left_seq: Vec<u32>,
    pub right_seq: Vec<u32>,
    /// Number of distinct right (column) labels.
    pub m1: u32,
    /// Number of distinct left (row) labels.
    pub m2: u32,
    /// Edge multiplicities, sorted by `(left, right)`.
    pub edge_mult: Vec<Edge>,
}

fn canonical(seq: &[usize]) -> (Vec<u32>, u32) {
    let mut map: BTreeMap<usize, u32> = BTreeMap::new();
    let out = seq
        .iter()
        .map(|x| {
            let next = map.len() as u32 + 1;
            *map.entry(*x).or_insert(next)
        })
        .collect();
    (out, map.len() as u32)
}

/// Canonical shape of the walk with left labels `u` and right labels `v`.
pub fn shape_of(u: &[usize], v: &[usize]) -> Result<Shape> {
    if u.len() != v.len() {
        return Err(Error::Argument(format!(
            "sequence lengths differ: {} left, {} right",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::Argument("sequences must be non-empty".into()));
    }
    let (left_seq, m2) = canonical(u);
    let (right_seq, m1) = canonical(v);
    Ok(Shape::from_canonical(left_seq, right_seq, m1, m2))
}

impl Shape {
    fn from_canonical(left_seq: Vec<u32>, right_seq: Vec<u32>, m1: u32, m2: u32) -> Shape {
        let p = left_seq.len();
        let mut mult: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for k in 0..p {
            *mult.entry((left_seq[k], right_seq[k])).or_default() += 1;
            *mult.entry((left_seq[(k + 1) % p], right_seq[k])).or_default() += 1;
        }
        let edge_mult = mult.into_iter().map(|((left, right), mult)| Edge { left, right, mult }).collect();
        Shape {
            p: p as u32,
            left_seq,
            right_seq,
            m1,
            m2,
            edge_mult,
        }
    }

    /// Every edge is traversed at least twice.
    pub fn is_even(&self) -> bool {
        self.edge_mult.iter().all(|e| e.mult >= 2)
    }

    /// Consecutive left labels differ, cyclically.
    pub fn is_off_diagonal(&self) -> bool {
        let p = self.left_seq.len();
        (0..p).all(|k| self.left_seq[k] != self.left_seq[(k + 1) % p])
    }

    /// Membership in the set of shapes contributing to the off-diagonal trace.
    pub fn is_admissible(&self) -> bool {
        self.is_even() && self.is_off_diagonal()
    }

    /// Every right label has at least two distinct left neighbours.
    pub fn has_two_left_neighbours(&self) -> bool {
        (1..=self.m1).all(|r| self.edge_mult.iter().filter(|e| e.right == r).count() >= 2)
    }

    pub fn is_canonical(&self) -> bool {
        let first_appearance = |seq: &[u32]| {
            let mut max = 0;
            seq.iter().all(|&x| {
                let ok = x >= 1 && x <= max + 1;
                max = max.max(x);
                ok
            })
        };
        first_appearance(&self.left_seq) && first_appearance(&self.right_seq)
    }

    /// Multiplicities in decreasing order.
    pub fn multiplicities(&self) -> Vec<u32> {
        let mut m: Vec<u32> = self.edge_mult.iter().map(|e| e.mult).collect();
        m.sort_unstable_by(|a, b| b.cmp(a));
        m
    }

    pub fn edge_count(&self) -> usize {
        self.edge_mult.len()
    }
}

struct Enumerator {
    p: usize,
    u: Vec<usize>,
    v: Vec<usize>,
    mult: Vec<u32>,
    singles: usize,
    out: Vec<Shape>,
}

impl Enumerator {
    fn add(&mut self, l: usize, r: usize) {
        let m = &mut self.mult[l * self.p + r];
        *m += 1;
        match *m {
            1 => self.singles += 1,
            2 => self.singles -= 1,
            _ => {}
        }
    }

    fn remove(&mut self, l: usize, r: usize) {
        let m = &mut self.mult[l * self.p + r];
        match *m {
            1 => self.singles -= 1,
            2 => self.singles += 1,
            _ => {}
        }
        *m -= 1;
    }

    /// Each edge still seen once needs its own later traversal.
    fn feasible(&self, used: usize) -> bool {
        self.singles <= 2 * self.p - used
    }

    // Walk positions: u_0 v_0 u_1 v_1 ... u_{p-1} v_{p-1}; u_0 is fixed.
    fn visit_v(&mut self, k: usize) {
        let fresh = self.v.iter().max().map_or(0, |m| m + 1);
        for label in 0..=fresh {
            self.v.push(label);
            self.add(self.u[k], label);
            if self.feasible(2 * k + 1) {
                if k + 1 == self.p {
                    self.add(self.u[0], label);
                    if self.singles == 0 {
                        self.emit();
                    }
                    self.remove(self.u[0], label);
                } else {
                    self.visit_u(k + 1);
                }
            }
            self.remove(self.u[k], label);
            self.v.pop();
        }
    }

    fn visit_u(&mut self, k: usize) {
        let fresh = self.u.iter().max().map_or(0, |m| m + 1);
        for label in 0..=fresh {
            if label == self.u[k - 1] || (k + 1 == self.p && label == self.u[0]) {
                continue;
            }
            self.u.push(label);
            self.add(label, self.v[k - 1]);
            if self.feasible(2 * k) {
                self.visit_v(k);
            }
            self.remove(label, self.v[k - 1]);
            self.u.pop();
        }
    }

    fn emit(&mut self) {
        let to_labels = |s: &[usize]| s.iter().map(|&x| x as u32 + 1).collect::<Vec<u32>>();
        let m2 = *self.u.iter().max().unwrap() as u32 + 1;
        let m1 = *self.v.iter().max().unwrap() as u32 + 1;
        self.out.push(Shape::from_canonical(to_labels(&self.u), to_labels(&self.v), m1, m2));
    }
}

/// All admissible canonical shapes of length `p`, with the default cap.
pub fn enumerate_shapes(p: u32) -> Result<Vec<Shape>> {
    enumerate_shapes_with_cap(p, DEFAULT_SHAPE_CAP)
}

/// Depth-first construction of canonical walks, pruned as soon as the edges
/// seen once outnumber the remaining traversals.
pub fn enumerate_shapes_with_cap(p: u32, cap: u32) -> Result<Vec<Shape>> {
    if p == 0 {
        return Err(Error::Argument("p must be >= 1".into()));
    }
    if p > cap {
        return Err(Error::Resource(format!("shape enumeration for p = {p} exceeds the cap {cap}")));
    }
    if p == 1 {
        return Ok(Vec::new());
    }
    let p = p as usize;
    let mut e = Enumerator {
        p,
        u: vec![0],
        v: Vec::with_capacity(p),
        mult: vec![0; p * p],
        singles: 0,
        out: Vec::new(),
    };
    e.visit_v(0);
    Ok(e.out)
}

/// `L(s)`: the product of `(k_e - 1)!!`, zero as soon as a multiplicity is odd.
#[allow(non_snake_case)]
pub fn L_value(s: &Shape) -> BigInt {
    s.edge_mult
        .iter()
        .fold(BigInt::one(), |acc, e| acc * gaussian_moment(e.mult))
}

/// Number of injective label assignments `W(s)` sums over for a `d x n` profile.
pub fn assignment_count(s: &Shape, d: usize, n: usize) -> f64 {
    let falling = |top: usize, k: u32| (0..k as usize).map(|i| top.saturating_sub(i) as f64).product::<f64>();
    falling(d, s.m2) * falling(n, s.m1)
}

/// `W(s)` over the weights `vals` (row-major `d x n`).
pub fn w_with<T: Weight>(s: &Shape, vals: &[T], d: usize, n: usize) -> T {
    let (m1, m2) = (s.m1 as usize, s.m2 as usize);
    if m2 > d || m1 > n {
        return T::zero();
    }
    // edges incident to each right label
    let mut by_right: Vec<Vec<(usize, u32)>> = vec![Vec::new(); m1];
    for e in &s.edge_mult {
        by_right[e.right as usize - 1].push((e.left as usize - 1, e.mult));
    }
    let mut powers: BTreeMap<u32, Vec<T>> = BTreeMap::new();
    for e in &s.edge_mult {
        powers.entry(e.mult).or_insert_with(|| vals.iter().map(|x| x.powu(e.mult)).collect());
    }

    let mut total = T::zero();
    let mut rows = Vec::with_capacity(m2);
    let mut used_rows = vec![false; d];
    assign_rows(m2, d, &mut rows, &mut used_rows, &mut |rows: &[usize]| {
        // factor[r][t]: product over the edges of right label r when it sits at column t
        let factor: Vec<Vec<T>> = by_right
            .iter()
            .map(|edges| {
                (0..n)
                    .map(|t| {
                        edges
                            .iter()
                            .fold(T::one(), |acc, &(l, k)| acc * powers[&k][rows[l] * n + t].clone())
                    })
                    .collect()
            })
            .collect();
        let mut used_cols = vec![false; n];
        total = total.clone() + assign_cols(&factor, 0, n, &mut used_cols);
    });
    total
}

fn assign_rows(m: usize, d: usize, rows: &mut Vec<usize>, used: &mut [bool], f: &mut impl FnMut(&[usize])) {
    if rows.len() == m {
        f(rows);
        return;
    }
    for i in 0..d {
        if !used[i] {
            used[i] = true;
            rows.push(i);
            assign_rows(m, d, rows, used, f);
            rows.pop();
            used[i] = false;
        }
    }
}

fn assign_cols<T: Weight>(factor: &[Vec<T>], r: usize, n: usize, used: &mut [bool]) -> T {
    if r == factor.len() {
        return T::one();
    }
    let mut acc = T::zero();
    for t in 0..n {
        if !used[t] && !factor[r][t].is_zero() {
            used[t] = true;
            acc = acc + factor[r][t].clone() * assign_cols(factor, r + 1, n, used);
            used[t] = false;
        }
    }
    acc
}

/// `W(s)` for a profile, exact when the profile is.
#[allow(non_snake_case)]
pub fn W_value(s: &Shape, b: &VarianceProfile) -> MomentValue {
    match b.exact_values() {
        Some(vals) => MomentValue::Exact(w_with(s, vals, b.d(), b.n())),
        None => MomentValue::Float(w_with(s, b.values(), b.d(), b.n())),
    }
}

/// `sum_s L(s) W(s)` over all admissible shapes of length `p`.
pub fn trace_moment_via_shapes(b: &VarianceProfile, p: u32) -> Result<MomentValue> {
    trace_moment_via_shapes_with(b, p, DEFAULT_SHAPE_CAP, L_value)
}

/// As [`trace_moment_via_shapes`] with an explicit cap and `L` evaluator; the
/// latter lets verification runs inject a faulty `L` to exercise failure paths.
pub fn trace_moment_via_shapes_with(
    b: &VarianceProfile,
    p: u32,
    cap: u32,
    l_eval: fn(&Shape) -> BigInt,
) -> Result<MomentValue> {
    let shapes = enumerate_shapes_with_cap(p, cap)?;
    let ls: Vec<BigInt> = shapes.iter().map(l_eval).collect();
    let live: Vec<usize> = (0..shapes.len()).filter(|&k| !ls[k].is_zero()).collect();
    let (d, n) = (b.d(), b.n());
    Ok(match b.exact_values() {
        Some(vals) => {
            let terms: Vec<BigRational> = live
                .par_iter()
                .map(|&k| BigRational::from_bigint(&ls[k]) * w_with(&shapes[k], vals, d, n))
                .collect();
            MomentValue::Exact(terms.into_iter().fold(BigRational::zero(), |a, t| a + t))
        }
        None => {
            let terms: Vec<f64> = live
                .par_iter()
                .map(|&k| f64::from_bigint(&ls[k]) * w_with(&shapes[k], b.values(), d, n))
                .collect();
            MomentValue::Float(terms.into_iter().fold(0.0, |a, t| a + t))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RootSide {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeGraph {
    pub left_count: u32,
    pub right_count: u32,
    pub edges: Vec<Edge>,
    /// Spanning-tree edges as `(left, right)` pairs.
    pub tree: Option<Vec<(u32, u32)>>,
}

impl ShapeGraph {
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }

    /// Union-find over `edges`; `None` when a cycle appears, otherwise the
    /// number of components.
    fn components(&self, edges: &[(u32, u32)]) -> Option<usize> {
        let (m2, m1) = (self.left_count as usize, self.right_count as usize);
        let mut parent: Vec<usize> = (0..m1 + m2).collect();
        let mut comps = m1 + m2;
        for &(l, r) in edges {
            let a = Self::find(&mut parent, l as usize - 1);
            let b = Self::find(&mut parent, m2 + r as usize - 1);
            if a == b {
                return None;
            }
            parent[a] = b;
            comps -= 1;
        }
        Some(comps)
    }

    pub fn is_connected(&self) -> bool {
        let (m2, m1) = (self.left_count as usize, self.right_count as usize);
        let mut parent: Vec<usize> = (0..m1 + m2).collect();
        let mut comps = m1 + m2;
        for e in &self.edges {
            let a = Self::find(&mut parent, e.left as usize - 1);
            let b = Self::find(&mut parent, m2 + e.right as usize - 1);
            if a != b {
                parent[a] = b;
                comps -= 1;
            }
        }
        comps == 1
    }

    /// The tree has `m1 + m2 - 1` edges of the graph, no cycle, and spans.
    pub fn tree_is_spanning(&self) -> bool {
        let Some(tree) = &self.tree else { return false };
        let in_graph = tree
            .iter()
            .all(|&(l, r)| self.edges.iter().any(|e| e.left == l && e.right == r));
        in_graph
            && tree.len() == (self.left_count + self.right_count - 1) as usize
            && self.components(tree) == Some(1)
    }
}

/// The graph of `s` with the first-arrival spanning tree. Left-rooted walks
/// start at `u_1`; right-rooted ones start at `v_1` and follow the cycle from
/// there, so the closing step back to `u_1` is an ordinary arrival.
pub fn spanning_tree(s: &Shape, root: RootSide) -> ShapeGraph {
    let p = s.p as usize;
    let (u, v) = (&s.left_seq, &s.right_seq);
    let mut seen_l = vec![false; s.m2 as usize + 1];
    let mut seen_r = vec![false; s.m1 as usize + 1];
    let mut tree = Vec::new();
    fn arrive_l(seen_l: &mut [bool], l: u32, via: u32, tree: &mut Vec<(u32, u32)>) {
        if !seen_l[l as usize] {
            seen_l[l as usize] = true;
            tree.push((l, via));
        }
    }
    match root {
        RootSide::Left => {
            seen_l[u[0] as usize] = true;
            for k in 0..p {
                if !seen_r[v[k] as usize] {
                    seen_r[v[k] as usize] = true;
                    tree.push((u[k], v[k]));
                }
                arrive_l(&mut seen_l, u[(k + 1) % p], v[k], &mut tree);
            }
        }
        RootSide::Right => {
            seen_r[v[0] as usize] = true;
            for k in 0..p {
                if k > 0 && !seen_r[v[k] as usize] {
                    seen_r[v[k] as usize] = true;
                    tree.push((u[k], v[k]));
                }
                arrive_l(&mut seen_l, u[(k + 1) % p], v[k], &mut tree);
            }
        }
    }
    let g = ShapeGraph {
        left_count: s.m2,
        right_count: s.m1,
        edges: s.edge_mult.clone(),
        tree: Some(tree),
    };
    assert!(g.is_connected(), "shape graph must be connected");
    assert!(g.tree_is_spanning(), "first arrivals must form a spanning tree: {g:?}");
    g
}

/// Outcome of comparing `W(s)` against the operator-norm shape ceiling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpnormCeilingWitness {
    pub applicable: bool,
    /// `W(s)` of the profile scaled to `sigma_* = 1`.
    pub w: f64,
    #[serde(serialize_with = "crate::params::extended_real")]
    pub beta_inf: f64,
    pub case: Case,
    pub ceiling_beta_le_1: f64,
    pub ceiling_beta_gt_1: f64,
    pub ceiling: f64,
    pub holds: bool,
}

fn dominated(w: f64, ceiling: f64) -> bool {
    w <= ceiling * (1.0 + CEILING_RTOL)
}

/// Compares `W(s)` with the ceiling selected by `beta_inf`, after scaling the
/// profile to `sigma_* = 1`.
pub fn check_opnorm_ceiling(s: &Shape, b: &VarianceProfile) -> OpnormCeilingWitness {
    let pp = compute_params(b);
    if pp.sigma_star == 0.0 {
        return OpnormCeilingWitness {
            applicable: false,
            w: 0.0,
            beta_inf: pp.beta_inf,
            case: Case::NotApplicable,
            ceiling_beta_le_1: 0.0,
            ceiling_beta_gt_1: 0.0,
            ceiling: 0.0,
            holds: true,
        };
    }
    let star = pp.sigma_star;
    let w = w_with(s, b.values(), b.d(), b.n()) / star.powi(2 * s.p as i32);
    let sc = pp.sigma_c / star;
    let si = pp.sigma_inf / (star * star);
    let st = pp.sigma_tilde_inf / (star * star);
    let (d, n) = (b.d() as f64, b.n() as f64);
    let (m1, m2) = (s.m1 as i32, s.m2 as i32);
    let two_sided = |x: f64| {
        (d * x.powi(2 * m1) * sc.powi(2 * (m2 - 1))).min(n * x.powi(2 * (m1 - 1)) * sc.powi(2 * m2))
    };
    let le1 = two_sided(si / sc);
    let gt1 = two_sided(st);
    let (case, ceiling) = if pp.beta_inf <= 1.0 { (Case::BetaLe1, le1) } else { (Case::BetaGt1, gt1) };
    OpnormCeilingWitness {
        applicable: true,
        w,
        beta_inf: pp.beta_inf,
        case,
        ceiling_beta_le_1: le1,
        ceiling_beta_gt_1: gt1,
        ceiling,
        holds: dominated(w, ceiling),
    }
}

/// Outcome of comparing `W(s)` against the Schatten shape ceiling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchattenCeilingWitness {
    pub applicable: bool,
    pub w: f64,
    #[serde(serialize_with = "crate::params::extended_real")]
    pub beta_p: f64,
    pub case: Case,
    pub ceiling: f64,
    pub holds: bool,
}

/// Compares `W(s)` with the Schatten ceiling selected by `beta_p`. The shape
/// must have `p_schatten` steps, i.e. total multiplicity `2 p_schatten`.
pub fn check_schatten_ceiling(s: &Shape, b: &VarianceProfile, p_schatten: u32) -> Result<SchattenCeilingWitness> {
    if s.p != p_schatten {
        return Err(Error::Argument(format!(
            "shape multiplicities sum to {}, expected {}",
            2 * s.p,
            2 * p_schatten
        )));
    }
    let pp = compute_params(b);
    let sp = schatten_params_any(b, p_schatten);
    let w = w_with(s, b.values(), b.d(), b.n());
    if pp.sigma_star == 0.0 {
        return Ok(SchattenCeilingWitness {
            applicable: false,
            w,
            beta_p: sp.beta_p,
            case: Case::NotApplicable,
            ceiling: 0.0,
            holds: w == 0.0,
        });
    }
    let (star, sc) = (pp.sigma_star, pp.sigma_c);
    let (m1, m2) = (s.m1 as i32, s.m2 as i32);
    let base = b.d() as f64 * star.powi(2 * p_schatten as i32) * (sc / star).powi(2 * (m2 - 1));
    let (case, ceiling) = if sp.beta_p <= 1.0 {
        (Case::BetaLe1, base * (sp.sigma_p / (star * sc)).powi(2 * m1))
    } else {
        (Case::BetaGt1, base * (sp.sigma_bar_p / (star * star)).powi(2 * m1))
    };
    Ok(SchattenCeilingWitness {
        applicable: true,
        w,
        beta_p: sp.beta_p,
        case,
        ceiling,
        holds: dominated(w, ceiling),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn brute_force(p: usize) -> BTreeSet<Shape> {
        let total = p.pow(p as u32);
        let seq = |mut code: usize| {
            (0..p)
                .map(|_| {
                    let x = code % p;
                    code /= p;
                    x
                })
                .collect::<Vec<usize>>()
        };
        let us: Vec<Vec<usize>> = (0..total)
            .map(seq)
            .filter(|u| (0..p).all(|k| u[k] != u[(k + 1) % p]))
            .collect();
        let mut out = BTreeSet::new();
        for u in &us {
            for code in 0..total {
                let s = shape_of(u, &seq(code)).unwrap();
                if s.is_even() {
                    out.insert(s);
                }
            }
        }
        out
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for p in 1..=5 {
            let fast = enumerate_shapes(p).unwrap();
            let set: BTreeSet<Shape> = fast.iter().cloned().collect();
            assert_eq!(set.len(), fast.len(), "duplicates at p = {p}");
            assert_eq!(set, brute_force(p as usize), "p = {p}");
        }
    }

    #[test]
    fn small_censuses() {
        assert!(enumerate_shapes(1).unwrap().is_empty());
        let two = enumerate_shapes(2).unwrap();
        assert_eq!(two.len(), 1);
        assert_eq!((two[0].left_seq.clone(), two[0].right_seq.clone()), (vec![1, 2], vec![1, 1]));
        assert_eq!((two[0].m1, two[0].m2), (1, 2));
        assert!(two[0].edge_mult.iter().all(|e| e.mult == 2));
        let three = enumerate_shapes(3).unwrap();
        assert_eq!(three.len(), 1);
        assert_eq!((three[0].left_seq.clone(), three[0].right_seq.clone()), (vec![1, 2, 3], vec![1, 1, 1]));
        assert!(matches!(enumerate_shapes(9), Err(Error::Resource(_))));
        assert_eq!(enumerate_shapes_with_cap(9, 9).map(|v| v.is_empty()).ok(), Some(false));
    }

    #[test]
    fn shape_of_examples() {
        let s = shape_of(&[3, 4, 3, 4], &[2, 1, 1, 5]).unwrap();
        assert_eq!(s.left_seq, vec![1, 2, 1, 2]);
        assert_eq!(s.right_seq, vec![1, 2, 2, 3]);
        let t = shape_of(&[1, 2], &[1, 1]).unwrap();
        assert_eq!(shape_of(&[1, 2], &[1, 1]).unwrap(), t);
        let c = shape_of(&[7, 7], &[4, 4]).unwrap();
        assert_eq!((c.left_seq, c.right_seq), (vec![1, 1], vec![1, 1]));
        assert!(shape_of(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn enumerated_shapes_satisfy_invariants() {
        for p in 2..=7 {
            for s in enumerate_shapes(p).unwrap() {
                assert!(s.is_canonical() && s.is_admissible() && s.has_two_left_neighbours());
                assert_eq!(s.edge_mult.iter().map(|e| e.mult).sum::<u32>(), 2 * p);
                let again = shape_of(
                    &s.left_seq.iter().map(|&x| x as usize).collect::<Vec<_>>(),
                    &s.right_seq.iter().map(|&x| x as usize).collect::<Vec<_>>(),
                )
                .unwrap();
                assert_eq!(again, s);
                if s.edge_mult.iter().all(|e| e.mult % 2 == 0) {
                    assert!(L_value(&s) > BigInt::zero());
                }
                for root in [RootSide::Left, RootSide::Right] {
                    assert!(spanning_tree(&s, root).tree_is_spanning());
                }
            }
        }
    }

    #[test]
    fn l_values() {
        let two = &enumerate_shapes(2).unwrap()[0];
        assert_eq!(L_value(two), BigInt::one());
        // u=(1,2,1,2), v=(1,1,1,1): edges (1,1) and (2,1), each traversed 4 times
        let s = shape_of(&[1, 2, 1, 2], &[1, 1, 1, 1]).unwrap();
        assert_eq!(s.multiplicities(), vec![4, 4]);
        assert_eq!(L_value(&s), BigInt::from(9));
        let odd = enumerate_shapes(3).unwrap()[0].clone();
        let s = shape_of(&[1, 2, 1, 2, 1, 2, 3], &[1, 1, 1, 1, 1, 1, 1]).unwrap();
        assert_eq!(s.multiplicities(), vec![6, 6, 2]);
        assert_eq!(L_value(&s), BigInt::from(225));
        // u=(1,2,1,3), v=(1,1,1,1) has multiplicities (4,2,2): L = 3
        let s = shape_of(&[1, 2, 1, 3], &[1, 1, 1, 1]).unwrap();
        assert_eq!(s.multiplicities(), vec![4, 2, 2]);
        assert_eq!(L_value(&s), BigInt::from(3));
        assert_eq!(L_value(&odd), BigInt::one());
        let s = shape_of(&[1, 2, 3], &[1, 1, 2]).unwrap();
        assert!(s.multiplicities().iter().any(|m| m % 2 == 1));
        assert_eq!(L_value(&s), BigInt::zero());
    }

    #[test]
    fn w_and_trace_examples() {
        let b = VarianceProfile::from_integers(2, 2, &[1, 2, 3, 4]).unwrap();
        let two = &enumerate_shapes(2).unwrap()[0];
        assert_eq!(W_value(two, &b), MomentValue::Exact(BigRational::from_integer(146.into())));
        assert_eq!(
            trace_moment_via_shapes(&b, 2).unwrap(),
            MomentValue::Exact(BigRational::from_integer(146.into()))
        );
        assert_eq!(trace_moment_via_shapes(&b, 1).unwrap(), MomentValue::Exact(BigRational::zero()));
        let ones = VarianceProfile::from_integers(2, 2, &[1; 4]).unwrap();
        assert_eq!(trace_moment_via_shapes(&ones, 2).unwrap().to_f64(), 4.0);
        let z = VarianceProfile::zeros(3, 3).unwrap();
        let three = &enumerate_shapes(3).unwrap()[0];
        assert_eq!(W_value(three, &z).to_f64(), 0.0);
        // m2 = 3 left labels cannot be placed injectively into 2 rows
        assert_eq!(W_value(three, &b).to_f64(), 0.0);
        let f = VarianceProfile::from_f64(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(W_value(two, &f), MomentValue::Float(146.0));
    }

    #[test]
    fn spanning_tree_examples() {
        let two = &enumerate_shapes(2).unwrap()[0];
        let g = spanning_tree(two, RootSide::Left);
        assert_eq!(g.tree.as_ref().unwrap(), &vec![(1, 1), (2, 1)]);
        let three = &enumerate_shapes(3).unwrap()[0];
        let g = spanning_tree(three, RootSide::Right);
        assert_eq!(g.tree.as_ref().unwrap().len(), 3);
        assert!(g.tree.as_ref().unwrap().iter().all(|&(_, r)| r == 1));
        let s = shape_of(&[1, 2, 1, 2], &[1, 2, 2, 3]).unwrap();
        for root in [RootSide::Left, RootSide::Right] {
            let g = spanning_tree(&s, root);
            assert_eq!(g.tree.as_ref().unwrap().len(), 4);
            assert_eq!((g.left_count, g.right_count), (2, 3));
        }
        assert_eq!(
            spanning_tree(&s, RootSide::Left).tree.unwrap(),
            vec![(1, 1), (2, 1), (2, 2), (2, 3)]
        );
        // reading the right-rooted walk as starting at v_p would reuse (1,1)
        let s = shape_of(&[1, 2, 1, 3], &[1, 1, 2, 2]).unwrap();
        assert!(spanning_tree(&s, RootSide::Right).tree_is_spanning());
    }

    #[test]
    fn prop_checks_on_examples() {
        let ones = VarianceProfile::from_integers(2, 2, &[1; 4]).unwrap();
        let two = &enumerate_shapes(2).unwrap()[0];
        let w = check_opnorm_ceiling(two, &ones);
        assert_eq!(w.w, 4.0);
        assert_eq!(w.case, Case::BetaGt1);
        assert!(w.holds);
        let w = check_schatten_ceiling(two, &ones, 2).unwrap();
        assert!(w.holds);
        assert!(check_schatten_ceiling(two, &ones, 4).is_err());
        let z = VarianceProfile::zeros(2, 2).unwrap();
        assert!(!check_opnorm_ceiling(two, &z).applicable);
        let w = check_schatten_ceiling(two, &z, 2).unwrap();
        assert!(w.holds && w.w == 0.0);
        let single = VarianceProfile::from_integers(2, 2, &[0, 0, 0, 5]).unwrap();
        let w = check_opnorm_ceiling(two, &single);
        assert_eq!(w.w, 0.0);
        assert!(w.holds);
    }
}
