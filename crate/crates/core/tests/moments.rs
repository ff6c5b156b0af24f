use covbound::montecarlo::{estimate_schatten_trace, SimConfig};
use covbound::numeric::{MomentValue, Weight};
use covbound::oracle::{diag_trace_moment, full_trace_moment, offdiag_trace_moment};
use covbound::profile::{random_float_profile, random_rational_profile, Entry, VarianceProfile};
use covbound::shapes::{check_opnorm_ceiling, check_schatten_ceiling, enumerate_shapes, trace_moment_via_shapes, w_with, W_value};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exact(v: &MomentValue) -> BigRational {
    v.exact().expect("exact input keeps exact moments").clone()
}

#[test]
fn shape_sum_equals_offdiag_oracle_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in 1..=3 {
        for n in 1..=3 {
            for _ in 0..4 {
                let b = random_rational_profile(&mut rng, d, n);
                for p in 1..=4 {
                    let s = trace_moment_via_shapes(&b, p).unwrap();
                    let o = offdiag_trace_moment(&b, p).unwrap().value;
                    assert_eq!(exact(&s), exact(&o), "{d}x{n}, p = {p}");
                }
            }
        }
    }
}

#[test]
fn shape_sum_equals_offdiag_oracle_in_float_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let b = random_float_profile(&mut rng, 3, 2);
        for p in 2..=4 {
            let s = trace_moment_via_shapes(&b, p).unwrap();
            let o = offdiag_trace_moment(&b, p).unwrap().value;
            assert!(s.agrees_with(&o, 1e-10), "p = {p}: {s} vs {o}");
        }
    }
}

#[test]
fn second_moments_have_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let (d, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let b = random_rational_profile(&mut rng, d, n);
        let v = b.exact_values().unwrap();
        let sq = |i: usize, j: usize| v[i * n + j].clone() * v[i * n + j].clone();
        let mut off = BigRational::from_integer(0.into());
        let mut diag = off.clone();
        for i in 0..d {
            for j in 0..n {
                diag += BigRational::from_integer(2.into()) * sq(i, j) * sq(i, j);
                for l in (0..d).filter(|&l| l != i) {
                    off += sq(i, j) * sq(l, j);
                }
            }
        }
        let o = exact(&offdiag_trace_moment(&b, 2).unwrap().value);
        let g = exact(&diag_trace_moment(&b, 2).unwrap().value);
        let f = exact(&full_trace_moment(&b, 2).unwrap().value);
        assert_eq!(o, off);
        assert_eq!(g, diag);
        assert_eq!(f, o + g);
    }
}

#[test]
fn moments_are_homogeneous_and_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let t = BigRational::new(3.into(), 2.into());
    for _ in 0..5 {
        let b = random_rational_profile(&mut rng, 2, 3);
        let bt = b.scaled(&Entry::Exact(t.clone())).unwrap();
        let perm = b.permuted(&[1, 0], &[2, 0, 1]).unwrap();
        for p in 1..=3u32 {
            let factor = t.powu(2 * p);
            for f in [full_trace_moment, offdiag_trace_moment, diag_trace_moment] {
                let base = exact(&f(&b, p).unwrap().value);
                assert_eq!(exact(&f(&bt, p).unwrap().value), base.clone() * factor.clone());
                assert_eq!(exact(&f(&perm, p).unwrap().value), base);
            }
        }
    }
}

#[test]
fn even_moments_are_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let zero = BigRational::from_integer(BigInt::from(0));
    for _ in 0..10 {
        let b = random_rational_profile(&mut rng, 2, 2);
        for p in [2, 4] {
            assert!(exact(&full_trace_moment(&b, p).unwrap().value) >= zero);
            assert!(exact(&diag_trace_moment(&b, p).unwrap().value) >= zero);
        }
    }
}

#[test]
fn w_is_monotone_and_homogeneous() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for p in 2..=5 {
        let shapes = enumerate_shapes(p).unwrap();
        for _ in 0..5 {
            let b = random_float_profile(&mut rng, 4, 4);
            let mut bigger = b.values().to_vec();
            let k = rng.random_range(0..16);
            bigger[k] += 0.5;
            let scaled: Vec<f64> = b.values().iter().map(|x| 2.0 * x).collect();
            for s in &shapes {
                let w = w_with(s, b.values(), 4, 4);
                assert!(w_with(s, &bigger, 4, 4) >= w);
                let ws = w_with(s, &scaled, 4, 4);
                assert!((ws - 4f64.powi(p as i32) * w).abs() <= 1e-12 * ws.abs());
            }
        }
    }
    let z = VarianceProfile::zeros(4, 4).unwrap();
    for s in enumerate_shapes(4).unwrap() {
        assert_eq!(W_value(&s, &z).to_f64(), 0.0);
    }
}

#[test]
fn shape_ceilings_hold_on_a_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let (d, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let b = random_rational_profile(&mut rng, d, n);
        for p in 2..=5 {
            for s in enumerate_shapes(p).unwrap() {
                let w = check_opnorm_ceiling(&s, &b);
                assert!(w.holds, "{d}x{n} {s:?}: {w:?}");
                if p <= 4 {
                    let w = check_schatten_ceiling(&s, &b, p).unwrap();
                    assert!(w.holds, "{d}x{n} {s:?}: {w:?}");
                }
            }
        }
    }
}

#[test]
fn simulation_matches_oracle_on_a_small_profile() {
    let b = VarianceProfile::from_integers(2, 3, &[1, 0, 2, 1, 1, 1]).unwrap();
    let cfg = SimConfig { samples: 20_000, seed: 5, ..Default::default() };
    for p in [2, 4] {
        let e = estimate_schatten_trace(&b, p, &cfg).unwrap();
        let m = full_trace_moment(&b, p).unwrap().approx;
        assert!((e.mean - m).abs() <= 5.0 * e.stderr, "p = {p}: {e:?} vs {m}");
    }
}
