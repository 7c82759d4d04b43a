use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchsynth::integrator::{reference_step, tube};
use switchsynth::synthesis::{certify, Cell};
use switchsynth::{
    decomposition, find_pattern, find_pattern2, parse_model, verify_decomposition, Algorithm, BoxF64, Decomposition,
    Interval, IntervalBox, Pattern, SearchContext, SplitStrategy, SwitchedSystem, SynthesisError, SynthesisProblem,
};

fn bx(s: &str) -> BoxF64 {
    s.parse().unwrap()
}

fn bundled(name: &str) -> SwitchedSystem {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Model with constant rates, `rates[mode][dim]`.
fn constant_rate_model(rates: &[Vec<f64>], tau: f64) -> SwitchedSystem {
    let n = rates[0].len();
    let mut src = format!("system rates\ndim {n}\ntau {tau}\n");
    for (m, r) in rates.iter().enumerate() {
        src += &format!("mode {}:\n", m + 1);
        for (i, v) in r.iter().enumerate() {
            src += &format!("  x{}' = {v}\n", i + 1);
        }
    }
    parse_model(&src).unwrap()
}

/// Exact verdict for a constant-rate pattern: each period sweeps
/// `W + t c` for t in [0, tau].
fn exact_holds(rates: &[Vec<f64>], tau: f64, w: &[(f64, f64)], pat: &[usize], prob: &SynthesisProblem) -> bool {
    let mut cur = w.to_vec();
    for &m in pat {
        let c = &rates[m - 1];
        let next: Vec<(f64, f64)> = cur
            .iter()
            .zip(c)
            .map(|(&(lo, hi), &v)| (lo + v * tau, hi + v * tau))
            .collect();
        for i in 0..cur.len() {
            let lo = cur[i].0.min(next[i].0);
            let hi = cur[i].1.max(next[i].1);
            if lo < prob.s[i].lo() || hi > prob.s[i].hi() {
                return false;
            }
        }
        if let Some(b) = &prob.b {
            // Times at which every coordinate overlaps B.
            let (mut t0, mut t1) = (0.0f64, tau);
            for i in 0..cur.len() {
                let (lo, hi, v) = (cur[i].0, cur[i].1, c[i]);
                if v == 0.0 {
                    if hi < b[i].lo() || lo > b[i].hi() {
                        t1 = -1.0;
                    }
                } else {
                    let a = (b[i].lo() - hi) / v;
                    let z = (b[i].hi() - lo) / v;
                    t0 = t0.max(a.min(z));
                    t1 = t1.min(a.max(z));
                }
            }
            if t0 <= t1 {
                return false;
            }
        }
        cur = next;
    }
    cur.iter()
        .enumerate()
        .all(|(i, &(lo, hi))| lo >= prob.target[i].lo() && hi <= prob.target[i].hi())
}

fn random_box(rng: &mut ChaCha8Rng, centre: &[f64], max_half: f64) -> BoxF64 {
    centre
        .iter()
        .map(|&c| {
            let a = rng.random_range(0.05..max_half);
            Interval::new(c - a, c + a)
        })
        .collect()
}

#[test]
fn fp_and_fp2_agree_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut successes, mut failures, mut tried) = (0, 0, 0);
    while tried < 200 && (successes < 15 || failures < 8) {
        let n = rng.random_range(1..=2);
        let n_modes = rng.random_range(1..=3);
        let tau = 0.5;
        let rates: Vec<Vec<f64>> = (0..n_modes)
            .map(|_| (0..n).map(|_| rng.random_range(-6..=6) as f64 / 4.0).collect())
            .collect();
        let r = random_box(&mut rng, &vec![0.0; n], 1.0);
        let s: BoxF64 = r
            .iter()
            .map(|iv| {
                Interval::new(
                    iv.lo() - rng.random_range(0.1..1.5),
                    iv.hi() + rng.random_range(0.1..1.5),
                )
            })
            .collect();
        let b = if n == 2 && rng.random_bool(0.5) {
            let lo = s[0].hi() - 0.05 - rng.random_range(0.0..0.3);
            let b = IntervalBox::new(vec![Interval::new(lo.max(r[0].hi() + 0.01), s[0].hi() - 0.01), s[1]]);
            (b[0].lo() < b[0].hi()).then_some(b)
        } else {
            None
        };
        let k = rng.random_range(1..=4);
        let Ok(prob) = SynthesisProblem::new(r.clone(), s, b, k, 0) else {
            continue;
        };
        let sys = constant_rate_model(&rates, tau);
        let w: BoxF64 = r
            .iter()
            .map(|iv| {
                let a = rng.random_range(iv.lo()..iv.mid());
                Interval::new(a, rng.random_range(iv.mid()..iv.hi()))
            })
            .collect();
        tried += 1;

        let c1 = SearchContext::new();
        let c2 = SearchContext::new();
        let p1 = find_pattern(&sys, &w, &prob, &c1).unwrap();
        let p2 = find_pattern2(&sys, &w, &prob, &c2).unwrap();
        assert_eq!(p1, p2, "rates {rates:?} W {w} prob {prob:?}");
        assert!(c2.stats().expansions <= c1.stats().expansions);
        let bound: u64 = (1..=k as u32).map(|i| (n_modes as u64).pow(i)).sum();
        assert!(c1.stats().expansions <= bound);
        match p1 {
            Some(p) => {
                successes += 1;
                assert!(!p.is_empty() && p.len() <= k);
                assert!(certify(&sys, &w, &p, &prob).unwrap().holds());
                assert!(
                    exact_holds(&rates, tau, &w.to_f64_bounds(), &p, &prob),
                    "{p} fails exactly"
                );
            }
            None => failures += 1,
        }
    }
    assert!(successes + failures >= 20, "{successes} successes, {failures} failures");
    assert!(
        successes >= 5 && failures >= 5,
        "{successes} successes, {failures} failures"
    );
}

fn updown() -> SwitchedSystem {
    constant_rate_model(&[vec![1.0], vec![-1.0]], 0.5)
}

fn updown_decomposition() -> Decomposition {
    let prob = SynthesisProblem::new(bx("[0,1]"), bx("[-1,2]"), None, 1, 2).unwrap();
    decomposition(&updown(), &prob, Algorithm::Pruned, &SearchContext::new()).unwrap()
}

#[test]
fn tampered_cells_are_flagged() {
    let sys = updown();
    let dec = updown_decomposition();
    assert!(verify_decomposition(&sys, &dec).passed());
    let mut bad = dec.clone();
    // [0,0.5] under 1-1 lands in [1,1.5].
    assert_eq!(bad.cells[0].region.to_f64_bounds(), vec![(0.0, 0.5)]);
    bad.cells[0].pattern = bad.cells[0].pattern.extended(1);
    let report = verify_decomposition(&sys, &bad);
    assert_eq!(report.failed_cells(), vec![0]);
    assert!(!report.cells[0].in_target && report.cells[0].in_safe);
    assert!(report.covers);
}

#[test]
fn missing_cell_breaks_the_cover() {
    let sys = updown();
    let mut dec = updown_decomposition();
    dec.cells.pop();
    let report = verify_decomposition(&sys, &dec);
    assert!(!report.covers && !report.passed());
    assert!(report.uncovered.is_some());
}

#[test]
fn zero_depth_failure_reports_r() {
    let sys = constant_rate_model(&[vec![1.0]], 1.0);
    let prob = SynthesisProblem::new(bx("[0,1]"), bx("[0,1.5]"), None, 2, 0).unwrap();
    let err = decomposition(&sys, &prob, Algorithm::Pruned, &SearchContext::new()).unwrap_err();
    assert_eq!(
        err,
        SynthesisError::SynthesisFailure {
            cell: bx("[0,1]"),
            id: "c".into()
        }
    );
}

#[test]
fn obstacle_covering_safety_is_rejected() {
    let r = SynthesisProblem::new(bx("[0,1]"), bx("[-1,2]"), Some(bx("[-1,2]")), 2, 1);
    assert!(matches!(r, Err(SynthesisError::InvalidProblem(_))));
}

fn dcdc_problem() -> SynthesisProblem {
    SynthesisProblem::new(bx("[1.55,2.15]x[1.0,1.4]"), bx("[1.54,2.16]x[0.99,1.41]"), None, 6, 3)
        .unwrap()
        .with_split(SplitStrategy::All)
}

#[test]
fn dcdc_cell_has_short_pattern() {
    let sys = bundled("dcdc.model");
    let w = bx("[1.55,1.85]x[1.0,1.2]");
    let p = find_pattern2(&sys, &w, &dcdc_problem(), &SearchContext::new())
        .unwrap()
        .expect("pattern");
    assert!(p.len() <= 6, "{p}");
    assert!(certify(&sys, &w, &p, &dcdc_problem()).unwrap().holds());
}

fn volume(b: &BoxF64) -> f64 {
    b.iter().map(|iv| iv.width()).product()
}

/// Two boxes that share a full face.
fn mergeable(a: &BoxF64, b: &BoxF64) -> bool {
    let mut touching = 0;
    for (x, y) in a.iter().zip(b.iter()) {
        if x == y {
            continue;
        }
        if x.hi() == y.lo() || y.hi() == x.lo() {
            touching += 1;
        } else {
            return false;
        }
    }
    touching == 1
}

#[test]
fn dcdc_decomposition_reassembles_r() {
    let sys = bundled("dcdc.model");
    let prob = dcdc_problem();
    let dec = decomposition(&sys, &prob, Algorithm::Pruned, &SearchContext::new()).unwrap();
    assert!(verify_decomposition(&sys, &dec).passed());
    assert!(dec.max_pattern_len() <= 6);

    let mut boxes: Vec<BoxF64> = dec.cells.iter().map(|c| c.region.clone()).collect();
    let total: f64 = boxes.iter().map(volume).sum();
    assert!((total - volume(&prob.r)).abs() < 1e-12);
    while boxes.len() > 1 {
        let (i, j) = (0..boxes.len())
            .flat_map(|i| (i + 1..boxes.len()).map(move |j| (i, j)))
            .find(|&(i, j)| mergeable(&boxes[i], &boxes[j]))
            .expect("cells do not reassemble");
        let h = boxes[i].hull(&boxes[j]).unwrap();
        boxes.swap_remove(j);
        boxes[i] = h;
    }
    assert_eq!(boxes[0], prob.r);
}

#[test]
fn closed_loop_recurrence() {
    let sys = bundled("dcdc.model");
    let prob = dcdc_problem();
    let dec = decomposition(&sys, &prob, Algorithm::Pruned, &SearchContext::new()).unwrap();
    let lookup = |x: &[f64]| -> &Cell { dec.cells.iter().find(|c| c.region.contains_point(x)).expect("x in R") };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let mut x: Vec<f64> = prob.r.iter().map(|iv| rng.random_range(iv.lo()..=iv.hi())).collect();
        for _ in 0..50 {
            let pat: &Pattern = &lookup(&x).pattern;
            let t = tube(&sys, &IntervalBox::point(&x), pat, &prob.integrator).unwrap();
            assert!(t.endpoint.subset_of(&prob.r).unwrap(), "{:?} under {pat}", x);
            for s in &t.segments {
                assert!(s.enclosure.subset_of(&prob.s).unwrap());
            }
            let mut y = x.clone();
            for &m in pat.iter() {
                for _ in 0..50 {
                    reference_step(&sys, m, &mut y, &[], sys.tau() / 50.0);
                }
            }
            for (iv, v) in t.endpoint.iter().zip(&y) {
                assert!(iv.lo() - 1e-8 <= *v && *v <= iv.hi() + 1e-8, "{v} vs {iv}");
            }
            x = t
                .endpoint
                .iter()
                .map(|iv| rng.random_range(iv.lo()..=iv.hi()))
                .collect();
        }
    }
}

#[test]
fn timeout_carries_counters() {
    let sys = bundled("dcdc.model");
    let ctx = SearchContext::new().with_deadline(std::time::Instant::now());
    let err = decomposition(&sys, &dcdc_problem(), Algorithm::Naive, &ctx).unwrap_err();
    assert!(matches!(err, SynthesisError::Timeout { .. }));
}
