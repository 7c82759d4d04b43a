//! One PASS/FAIL line per acceptance criterion. Criteria run in sequence;
//! the long ones (2 and the polynomial half of 3) are wall-clock bounded.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchsynth::integrator::{integrate_mode, reference_step, tube, validated_step, IntegratorConfig};
use switchsynth::synthesis::certify;
use switchsynth::{
    find_pattern, find_pattern2, parse_model, simulate_closed_loop, BoxF64, ButcherScheme, Controller, Interval,
    IntervalBox, SearchContext, SwitchedSystem, SynthesisProblem,
};

const C1_BUDGET: Duration = Duration::from_secs(30);
const C2_BUDGET_S: f64 = 1800.0;
const C3_RATIO: f64 = 10.0;
const C3_FP_TIMEOUT_S: f64 = 3600.0;
const C4_INSTANCES: usize = 20;
const C4_TRAJECTORIES: usize = 1000;
const C4_MAX_PATTERN: usize = 4;
const C5_SAMPLES: usize = 1000;
const C5_HORIZON: f64 = 5.0;
const C5_MAX_WIDTH: f64 = 1e-4;
const C6_SLACK: f64 = 1.5;
const C7_INSTANCES: usize = 20;
const C8_RUNS: u64 = 100;
const C8_PATTERNS: usize = 50;

type Verdict = Result<String, String>;

fn report(n: usize, name: &str, v: &Verdict) {
    let line = match v {
        Ok(d) => format!("criterion {n} {name}: PASS ({d})"),
        Err(d) => format!("criterion {n} {name}: FAIL ({d})"),
    };
    // Straight to the handle so the line survives output capture.
    let mut err = std::io::stderr();
    let _ = writeln!(err, "{line}");
}

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_switchsynth"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn jobs() -> String {
    std::thread::available_parallelism().map_or(1, |n| n.get()).to_string()
}

fn describe(o: &Output) -> String {
    let err = String::from_utf8_lossy(&o.stderr);
    format!("exit {:?}: {}", o.status.code(), err.trim())
}

fn bundled(name: &str) -> SwitchedSystem {
    parse_model(&std::fs::read_to_string(models().join(name)).unwrap()).unwrap()
}

fn bx(s: &str) -> BoxF64 {
    s.parse().unwrap()
}

fn synth_and_verify(problem: &str, out: &Path, timeout: Option<f64>) -> Result<Duration, String> {
    let start = Instant::now();
    let problem = models().join(problem);
    let j = jobs();
    let mut args = vec!["synth", s(&problem), "-o", s(out), "--jobs", &j];
    let t;
    if let Some(secs) = timeout {
        t = secs.to_string();
        args.extend(["--timeout", &t]);
    }
    let o = bin(&args);
    let elapsed = start.elapsed();
    if o.status.code() != Some(0) {
        return Err(format!("synth {}", describe(&o)));
    }
    let v = bin(&["verify", s(out)]);
    if v.status.code() != Some(0) {
        return Err(format!("verify {}", describe(&v)));
    }
    if !String::from_utf8_lossy(&v.stdout).contains("cover: pass") {
        return Err("cover check missing".into());
    }
    Ok(elapsed)
}

fn criterion_1(dir: &Path) -> Verdict {
    let elapsed = synth_and_verify("dcdc.problem", &dir.join("dcdc.ctl.json"), None)?;
    let ctl = Controller::load(&dir.join("dcdc.ctl.json")).map_err(|e| e.to_string())?;
    if elapsed > C1_BUDGET {
        return Err(format!(
            "{:.2} s exceeds {} s",
            elapsed.as_secs_f64(),
            C1_BUDGET.as_secs()
        ));
    }
    Ok(format!(
        "{} cells verified, {:.2} s",
        ctl.cells.len(),
        elapsed.as_secs_f64()
    ))
}

fn criterion_9(dir: &Path) -> Verdict {
    let again = dir.join("dcdc-again.ctl.json");
    synth_and_verify("dcdc.problem", &again, None)?;
    let a = std::fs::read(dir.join("dcdc.ctl.json")).map_err(|e| e.to_string())?;
    let b = std::fs::read(&again).map_err(|e| e.to_string())?;
    if a == b {
        Ok(format!("{} identical bytes", a.len()))
    } else {
        Err("controller files differ".into())
    }
}

fn criterion_2(dir: &Path) -> Verdict {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut failed = Vec::new();
    for (problem, file) in [
        ("polynomial_R1toR2.problem", "r1r2.ctl.json"),
        ("polynomial_R2toR1.problem", "r2r1.ctl.json"),
    ] {
        let left = C2_BUDGET_S - start.elapsed().as_secs_f64();
        match synth_and_verify(problem, &dir.join(file), Some(left.max(1.0))) {
            Ok(t) => notes.push(format!("{problem} {:.1} s", t.as_secs_f64())),
            Err(e) => failed.push(format!("{problem}: {e}")),
        }
    }
    if failed.is_empty() {
        Ok(format!(
            "{}; total {:.1} s",
            notes.join(", "),
            start.elapsed().as_secs_f64()
        ))
    } else {
        Err(format!("{}; passed: [{}]", failed.join("; "), notes.join(", ")))
    }
}

fn bench_seconds(problem: &str, algo: &str) -> Result<f64, String> {
    let o = bin(&["bench", s(&models().join(problem)), "--algo", algo]);
    if o.status.code() != Some(0) {
        return Err(format!("bench {algo} {}", describe(&o)));
    }
    let out = String::from_utf8_lossy(&o.stdout);
    let t = out
        .split("wall time ")
        .nth(1)
        .and_then(|r| r.split(' ').next())
        .ok_or("no wall time")?;
    t.parse().map_err(|_| format!("bad wall time '{t}'"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn criterion_3() -> Verdict {
    let fp = median(
        (0..5)
            .map(|_| bench_seconds("dcdc.problem", "fp"))
            .collect::<Result<_, _>>()?,
    );
    let fp2 = median(
        (0..5)
            .map(|_| bench_seconds("dcdc.problem", "fp2"))
            .collect::<Result<_, _>>()?,
    );
    if fp2 * C3_RATIO > fp {
        return Err(format!("dcdc fp {fp:.4} s vs fp2 {fp2:.4} s, ratio below {C3_RATIO}"));
    }
    let problem = models().join("polynomial_R1toR2.problem");
    let fp2_poly = bin(&["bench", s(&problem), "--algo", "fp2"]);
    if fp2_poly.status.code() != Some(0) {
        return Err(format!("polynomial fp2 {}", describe(&fp2_poly)));
    }
    let limit = C3_FP_TIMEOUT_S.to_string();
    let fp_poly = bin(&["bench", s(&problem), "--algo", "fp", "--timeout", &limit]);
    if fp_poly.status.code() != Some(3) {
        return Err(format!("polynomial fp did not time out: {}", describe(&fp_poly)));
    }
    Ok(format!(
        "dcdc fp {fp:.4} s / fp2 {fp2:.4} s = {:.0}x; polynomial fp timed out at {C3_FP_TIMEOUT_S} s, fp2 completed",
        fp / fp2
    ))
}

fn sample(b: &BoxF64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    b.iter().map(|iv| rng.random_range(iv.lo()..=iv.hi())).collect()
}

fn criterion_4() -> Verdict {
    let cfg = IntegratorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0usize;
    for (name, region) in [
        ("dcdc.model", bx("[1.55,2.15]x[1.0,1.4]")),
        ("polynomial.model", bx("[-1.0,0.65]x[-0.75,1.75]")),
    ] {
        let sys = bundled(name);
        let mut done = 0;
        let mut attempts = 0;
        while done < C4_INSTANCES {
            attempts += 1;
            if attempts > 50 * C4_INSTANCES {
                return Err(format!("{name}: too few integrable instances"));
            }
            let x: BoxF64 = region
                .iter()
                .map(|iv| {
                    let w = rng.random_range(0.0..0.1);
                    let lo = rng.random_range(iv.lo()..iv.hi() - w);
                    Interval::new(lo, lo + w)
                })
                .collect::<IntervalBox>();
            let len = rng.random_range(1..=C4_MAX_PATTERN);
            let pat: Vec<usize> = (0..len).map(|_| rng.random_range(1..=sys.n_modes())).collect();
            let Ok(t) = tube(&sys, &x, &pat, &cfg) else { continue };
            done += 1;
            for _ in 0..C4_TRAJECTORIES {
                let mut p = sample(&x, &mut rng);
                for seg in &t.segments {
                    let d = sample(sys.dist_box(), &mut rng);
                    let n = 20;
                    let h = (seg.t_hi - seg.t_lo) / n as f64;
                    for k in 0..=n {
                        if !seg.enclosure.contains_point(&p) {
                            return Err(format!(
                                "{name} {x} {pat:?}: {p:?} outside segment at t = {}",
                                seg.t_lo + k as f64 * h
                            ));
                        }
                        if k < n {
                            reference_step(&sys, seg.mode, &mut p, &d, h);
                        }
                    }
                }
                if !t.endpoint.contains_point(&p) {
                    return Err(format!("{name} {x} {pat:?}: endpoint {p:?} outside {}", t.endpoint));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} trajectories, 0 violations"))
}

fn decay() -> SwitchedSystem {
    parse_model("system decay\ndim 1\ntau 5\nmode 1:\n  x1' = -x1\n").unwrap()
}

fn criterion_5() -> Verdict {
    let r = integrate_mode(&decay(), 1, &bx("[1,1]"), C5_HORIZON, &IntegratorConfig::default())
        .map_err(|e| e.to_string())?;
    for k in 0..C5_SAMPLES {
        let t = C5_HORIZON * k as f64 / (C5_SAMPLES - 1) as f64;
        let exact = (-t).exp();
        let hit = r
            .segments
            .iter()
            .filter(|s| s.t_lo <= t && t <= s.t_hi)
            .any(|s| s.enclosure[0].contains(exact));
        if !hit {
            return Err(format!("e^-t not enclosed at t = {t}"));
        }
    }
    let w = r.endpoint[0].width();
    if !r.endpoint[0].contains((-C5_HORIZON).exp()) || w > C5_MAX_WIDTH {
        return Err(format!("endpoint {} width {w:e}", r.endpoint));
    }
    Ok(format!("{} segments, endpoint width {w:.2e}", r.segments.len()))
}

fn criterion_6() -> Verdict {
    let sys = decay();
    let mut notes = Vec::new();
    for scheme in ButcherScheme::ALL {
        let cfg = IntegratorConfig {
            scheme,
            lte_tol: 1.0,
            ..IntegratorConfig::default()
        };
        let width = |h: f64| -> Result<f64, String> {
            let r = validated_step(&sys, 1, &bx("[1,1]"), Interval::point(h), &cfg).map_err(|e| e.to_string())?;
            Ok(r.lte[0].width())
        };
        let ratio = width(0.1)? / width(0.05)?;
        let need = 2f64.powi(scheme.order() as i32) / C6_SLACK;
        if ratio < need {
            return Err(format!("{scheme}: ratio {ratio:.2} < {need:.2}"));
        }
        notes.push(format!("{scheme} {ratio:.2}"));
    }
    Ok(notes.join(", "))
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut ok, mut none, mut tried) = (0, 0, 0);
    while tried < 500 && (ok + none < C7_INSTANCES || ok == 0 || none == 0) {
        let n = rng.random_range(1..=2);
        let n_modes = rng.random_range(1..=3);
        let rates: Vec<Vec<f64>> = (0..n_modes)
            .map(|_| (0..n).map(|_| rng.random_range(-6..=6) as f64 / 4.0).collect())
            .collect();
        let mut src = format!("system rates\ndim {n}\ntau 0.5\n");
        for (m, r) in rates.iter().enumerate() {
            src += &format!("mode {}:\n", m + 1);
            for (i, v) in r.iter().enumerate() {
                src += &format!("  x{}' = {v}\n", i + 1);
            }
        }
        let sys = parse_model(&src).unwrap();
        let r: BoxF64 = (0..n)
            .map(|_| {
                let a = rng.random_range(0.1..1.0);
                Interval::new(-a, a)
            })
            .collect();
        let sbox: BoxF64 = r
            .iter()
            .map(|iv| {
                Interval::new(
                    iv.lo() - rng.random_range(0.1..1.5),
                    iv.hi() + rng.random_range(0.1..1.5),
                )
            })
            .collect();
        let k = rng.random_range(1..=4);
        let Ok(prob) = SynthesisProblem::new(r.clone(), sbox, None, k, 0) else {
            continue;
        };
        let w: BoxF64 = r
            .iter()
            .map(|iv| Interval::new(rng.random_range(iv.lo()..iv.mid()), rng.random_range(iv.mid()..iv.hi())))
            .collect();
        tried += 1;
        let p1 = find_pattern(&sys, &w, &prob, &SearchContext::new()).map_err(|e| e.to_string())?;
        let p2 = find_pattern2(&sys, &w, &prob, &SearchContext::new()).map_err(|e| e.to_string())?;
        if p1.is_some() != p2.is_some() {
            return Err(format!("outcomes differ on {w}: {p1:?} vs {p2:?}"));
        }
        for p in [&p1, &p2].into_iter().flatten() {
            if !certify(&sys, &w, p, &prob).map_err(|e| e.to_string())?.holds() {
                return Err(format!("pattern {p} fails its certificate on {w}"));
            }
        }
        if p1.is_some() {
            ok += 1
        } else {
            none += 1
        }
    }
    if ok + none < C7_INSTANCES {
        return Err(format!("only {} instances", ok + none));
    }
    Ok(format!(
        "{} instances, {ok} solved, {none} unsolvable by both",
        ok + none
    ))
}

fn replay(sys: &SwitchedSystem, ctls: &[&Controller]) -> Result<usize, String> {
    let first = &ctls[0].problem;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut points = 0;
    for seed in 0..C8_RUNS {
        let x0 = sample(&first.r, &mut rng);
        let trace = simulate_closed_loop(sys, ctls, &x0, C8_PATTERNS, seed).map_err(|e| format!("from {x0:?}: {e}"))?;
        for p in &trace.points {
            if !first.s.contains_point(&p.x) || first.b.as_ref().is_some_and(|b| b.contains_point(&p.x)) {
                return Err(format!("from {x0:?}: {:?} at t = {} leaves S \\ B", p.x, p.t));
            }
        }
        points += trace.points.len();
    }
    Ok(points)
}

fn criterion_8(dir: &Path) -> Verdict {
    let load = |f: &str| Controller::load(&dir.join(f)).map_err(|e| format!("{f}: {e}"));
    let dcdc = load("dcdc.ctl.json")?;
    let n = replay(&bundled("dcdc.model"), &[&dcdc]).map_err(|e| format!("dcdc {e}"))?;
    let missing = |e: String| format!("dcdc passed; polynomial needs both controllers from criterion 2: {e}");
    let r1r2 = load("r1r2.ctl.json").map_err(missing)?;
    let r2r1 = load("r2r1.ctl.json").map_err(missing)?;
    let m = replay(&bundled("polynomial.model"), &[&r1r2, &r2r1]).map_err(|e| format!("polynomial {e}"))?;
    Ok(format!(
        "{} runs x {C8_PATTERNS} patterns per example, {} trace points",
        C8_RUNS,
        n + m
    ))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut failed = Vec::new();
    let mut check = |n: usize, name: &str, v: Verdict| {
        report(n, name, &v);
        if v.is_err() {
            failed.push(n);
        }
    };
    check(1, "dcdc synthesis", criterion_1(d));
    check(9, "determinism", criterion_9(d));
    check(4, "integrator soundness", criterion_4());
    check(5, "analytic containment", criterion_5());
    check(6, "lte order", criterion_6());
    check(7, "oracle equivalence", criterion_7());
    check(2, "polynomial reach-avoid", criterion_2(d));
    check(8, "closed-loop replay", criterion_8(d));
    check(3, "fp vs fp2", criterion_3());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
