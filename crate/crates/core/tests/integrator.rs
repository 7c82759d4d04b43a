use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchsynth::integrator::{
    integrate_mode, picard_enclosure, post, reference_step, tube, validated_step, IntegrationError, IntegratorConfig,
    TubeResult,
};
use switchsynth::{BoxF64, ButcherScheme, Interval, IntervalBox, SwitchedSystem};

fn model(src: &str) -> SwitchedSystem {
    switchsynth::parse_model(src).unwrap()
}

fn bx(s: &str) -> BoxF64 {
    s.parse().unwrap()
}

fn bundled(name: &str) -> SwitchedSystem {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    model(&std::fs::read_to_string(path).unwrap())
}

const STILL: &str = "system still\ndim 1\ntau 1\nmode 1:\n  x1' = 0\n";
const DECAY: &str = "system decay\ndim 1\ntau 0.5\nmode 1:\n  x1' = -x1\n";
const SQUARE: &str = "system square\ndim 1\ntau 1\nmode 1:\n  x1' = x1^2\n";
const UPDOWN: &str = "system updown\ndim 1\ntau 1\nmode 1:\n  x1' = 1\nmode 2:\n  x1' = -1\n";

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

fn h(v: f64) -> Interval {
    Interval::point(v)
}

fn close(a: &BoxF64, b: &BoxF64, eps: f64) -> bool {
    a.iter()
        .zip(b.iter())
        .all(|(x, y)| (x.lo() - y.lo()).abs() <= eps && (x.hi() - y.hi()).abs() <= eps)
}

#[test]
fn picard_zero_dynamics() {
    let x0 = bx("[1,2]");
    let e = picard_enclosure(&model(STILL), 1, &x0, h(1.0), &cfg()).unwrap();
    assert!(x0.subset_of(&e).unwrap());
}

#[test]
fn picard_exponential_decay() {
    let e = picard_enclosure(&model(DECAY), 1, &bx("[1,1]"), h(0.1), &cfg()).unwrap();
    assert!(e[0].lo() <= (-0.1f64).exp() && e[0].hi() >= 1.0, "{e}");
}

#[test]
fn picard_fails_past_blow_up() {
    let sys = model(SQUARE);
    let r = picard_enclosure(&sys, 1, &bx("[1,1]"), h(2.0), &cfg());
    assert!(matches!(r, Err(IntegrationError::EnclosureFailure { .. })));
    let r = integrate_mode(&sys, 1, &bx("[1,1]"), 2.0, &cfg());
    assert!(matches!(r, Err(IntegrationError::IntegrationFailure { .. })), "{r:?}");
}

#[test]
fn picard_witness_holds_after_each_step() {
    // x0 + [0,h] f(X) ⊆ X, re-checked independently of the integrator.
    let sys = bundled("polynomial.model");
    let d = sys.dist_box().clone();
    let loose = IntegratorConfig { lte_tol: 1.0, ..cfg() };
    let mut x = bx("[-0.5,-0.4]x[-0.7,-0.6]");
    for mode in [1, 2, 3, 4] {
        let hh = h(0.05);
        let e = picard_enclosure(&sys, mode, &x, hh, &loose).unwrap();
        let f = sys.eval_interval(mode, e.intervals(), d.intervals()).unwrap();
        let span = Interval::new(0.0, 0.05);
        for i in 0..2 {
            assert!((x[i] + span * f[i]).subset_of(&e[i]), "mode {mode} dim {i}");
        }
        x = validated_step(&sys, mode, &x, hh, &loose).unwrap().x_next;
    }
}

#[test]
fn step_zero_dynamics_is_exact() {
    let r = validated_step(&model(STILL), 1, &bx("[1,2]"), h(0.7), &cfg()).unwrap();
    assert_eq!(r.x_next, bx("[1,2]"));
    assert!(r.lte.iter().all(|e| e.lo() == 0.0 && e.hi() == 0.0));
}

#[test]
fn step_exponential_decay() {
    let r = validated_step(&model(DECAY), 1, &bx("[1,1]"), h(0.1), &cfg()).unwrap();
    assert!(r.x_next[0].contains(0.904_837_418_035_959_6));
    assert!(r.x_next[0].width() <= 1e-6, "{}", r.x_next);
}

#[test]
fn step_dcdc_matches_affine_flow() {
    // Closed-form e^{A1 t} x0 + A1^{-1}(e^{A1 t} - I) b1 for the diagonal mode 1.
    let sys = bundled("dcdc.model");
    let (xl, xc, rl, rc, r0) = (3.0f64, 70.0f64, 0.05f64, 0.005f64, 1.0f64);
    let a11 = -rl / xl;
    let a22 = -1.0 / (xc * (r0 + rc));
    let x1 = (1.55 - 1.0 / rl) * (a11 * 0.5).exp() + 1.0 / rl;
    let x2 = 1.0 * (a22 * 0.5).exp();
    let r = integrate_mode(&sys, 1, &bx("[1.55,1.55]x[1.0,1.0]"), 0.5, &cfg()).unwrap();
    assert!(r.endpoint.contains_point(&[x1, x2]), "{} vs ({x1}, {x2})", r.endpoint);
    assert!((x1 - 1.70312).abs() < 1e-5 && (x2 - 0.99292).abs() < 1e-5);
    assert!(r.endpoint.max_width() < 1e-6);
}

#[test]
fn integrate_zero_dynamics_single_segment() {
    let r = integrate_mode(&model(STILL), 1, &bx("[1,2]"), 0.5, &cfg()).unwrap();
    assert_eq!(r.endpoint, bx("[1,2]"));
    assert_eq!(r.segments.len(), 1);
    assert_eq!((r.segments[0].t_lo, r.segments[0].t_hi), (0.0, 0.5));
    assert_eq!(r.segments[0].enclosure, bx("[1,2]"));
}

#[test]
fn integrate_constant_rate() {
    let r = integrate_mode(&model(UPDOWN), 2, &bx("[0.8,1.0]"), 1.0, &cfg()).unwrap();
    let x = bx("[0.8,1.0]");
    // x - 1 is exact for both bounds.
    assert!(r.endpoint.contains_point(&[x[0].lo() - 1.0]) && r.endpoint.contains_point(&[x[0].hi() - 1.0]));
    assert!(close(&r.endpoint, &bx("[-0.2,0.0]"), 1e-9), "{}", r.endpoint);
}

fn assert_contains_exp(t: &TubeResult, samples: usize) {
    for s in &t.segments {
        for k in 0..=samples {
            let tt = s.t_lo + (s.t_hi - s.t_lo) * k as f64 / samples as f64;
            assert!(s.enclosure[0].contains((-tt).exp()), "t = {tt}: {}", s.enclosure);
        }
    }
}

#[test]
fn decay_segments_contain_exact_solution() {
    let r = integrate_mode(&model(DECAY), 1, &bx("[1,1]"), 0.5, &cfg()).unwrap();
    assert_contains_exp(&r, 100);
    let r = tube(&model(DECAY), &bx("[1,1]"), &[1, 1], &cfg()).unwrap();
    assert_eq!(r.segments.last().unwrap().t_hi, 1.0);
    assert_contains_exp(&r, 100);
}

#[test]
fn segments_tile_the_period() {
    let sys = bundled("polynomial.model");
    let r = tube(&sys, &bx("[-0.5,-0.3]x[-0.5,-0.3]"), &[2, 1, 3], &cfg()).unwrap();
    assert_eq!(r.segments[0].t_lo, 0.0);
    for w in r.segments.windows(2) {
        assert_eq!(w[0].t_hi, w[1].t_lo);
    }
    assert!((r.segments.last().unwrap().t_hi - 0.45).abs() < 1e-12);
    assert_eq!(
        r.endpoint,
        post(&sys, &bx("[-0.5,-0.3]x[-0.5,-0.3]"), &[2, 1, 3], &cfg()).unwrap()
    );
}

#[test]
fn post_and_tube_on_constant_rates() {
    let sys = model(UPDOWN);
    let x = bx("[0.8,1.0]");
    assert_eq!(post(&sys, &x, &[], &cfg()).unwrap(), x);
    let down = post(&sys, &x, &[2], &cfg()).unwrap();
    assert!(down.contains_point(&[x[0].lo() - 1.0]) && down.contains_point(&[x[0].hi() - 1.0]));
    assert!(close(&down, &bx("[-0.2,0.0]"), 1e-9));
    let back = post(&sys, &x, &[2, 1], &cfg()).unwrap();
    assert!(x.subset_of(&back).unwrap());
    assert!(close(&back, &x, 1e-9));
    let t = tube(&sys, &x, &[], &cfg()).unwrap();
    assert_eq!(t.segments.len(), 1);
    assert_eq!((t.segments[0].t_lo, t.segments[0].t_hi), (0.0, 0.0));
    assert_eq!(t.segments[0].enclosure, x);
    let t = tube(&sys, &x, &[2], &cfg()).unwrap();
    assert!(t.hull().contains_point(&[x[0].lo() - 1.0]) && t.hull().contains_point(&[1.0]));
}

#[test]
fn lte_shrinks_with_scheme_order() {
    let sys = model(DECAY);
    for scheme in ButcherScheme::ALL {
        let c = IntegratorConfig {
            scheme,
            lte_tol: 1.0,
            ..cfg()
        };
        let w = |hv: f64| validated_step(&sys, 1, &bx("[1,1]"), h(hv), &c).unwrap().lte[0].width();
        let p = scheme.order() as i32;
        let (w1, w2) = (w(0.1), w(0.05));
        assert!(w1 / w2 >= 2f64.powi(p) / 1.5, "{scheme}: ratio {}", w1 / w2);
    }
}

#[test]
fn results_are_deterministic() {
    let sys = bundled("polynomial.model");
    let x = bx("[0.1,0.2]x[-0.7,-0.5]");
    let a = tube(&sys, &x, &[3, 2, 1], &cfg()).unwrap();
    let b = std::thread::spawn({
        let sys = sys.clone();
        let x = x.clone();
        move || tube(&sys, &x, &[3, 2, 1], &cfg()).unwrap()
    })
    .join()
    .unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn tube_csv_shape() {
    let r = tube(&model(UPDOWN), &bx("[0,1]"), &[1], &cfg()).unwrap();
    let csv = r.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t_lo,t_hi,dim0_lo,dim0_hi"));
    assert_eq!(lines.count(), r.segments.len());
}

#[test]
fn f32_tube_encloses_f64_tube_endpoint_point() {
    let sys = bundled("dcdc.model");
    let x = bx("[1.6,1.7]x[1.1,1.2]");
    let t32 = tube(&sys, &x.cast::<f32>(), &[2, 1], &cfg()).unwrap();
    let t64 = tube(&sys, &x, &[2, 1], &cfg()).unwrap();
    let mid = t64.endpoint.midpoint();
    let mid32: Vec<f32> = mid.iter().map(|&v| v as f32).collect();
    assert!(t32.endpoint.contains_point(&mid32) || t32.endpoint.cast::<f64>().contains_point(&mid));
}

/// Reference trajectories from random points, disturbance drawn per
/// validated step, checked against every segment and the endpoint.
fn soundness_violations(sys: &SwitchedSystem, x: &BoxF64, pat: &[usize], runs: usize, rng: &mut ChaCha8Rng) -> usize {
    let t = tube(sys, x, pat, &cfg()).unwrap();
    let n = sys.dim();
    let mut violations = 0;
    for _ in 0..runs {
        let mut p: Vec<f64> = x.iter().map(|iv| rng.random_range(iv.lo()..=iv.hi())).collect();
        let mut seg = t.segments.iter().peekable();
        let tau = sys.tau();
        for (j, &mode) in pat.iter().enumerate() {
            let end = (j + 1) as f64 * tau;
            while let Some(s) = seg.next_if(|s| s.t_hi <= end + 1e-12) {
                let d: Vec<f64> = sys
                    .dist_box()
                    .iter()
                    .map(|iv| rng.random_range(iv.lo()..=iv.hi()))
                    .collect();
                let hh = (s.t_hi - s.t_lo) / 100.0;
                for _ in 0..100 {
                    if !s.enclosure.contains_point(&p) {
                        violations += 1;
                    }
                    reference_step(sys, mode, &mut p, &d, hh);
                }
                if !s.enclosure.contains_point(&p) {
                    violations += 1;
                }
            }
        }
        if !t.endpoint.contains_point(&p[..n]) {
            violations += 1;
        }
    }
    violations
}

#[test]
fn sampled_trajectories_stay_in_tubes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, region) in [
        ("dcdc.model", bx("[1.55,2.15]x[1.0,1.4]")),
        ("polynomial.model", bx("[-1.0,0.65]x[-0.75,1.75]")),
    ] {
        let sys = bundled(name);
        let mut done = 0;
        while done < 5 {
            let x: BoxF64 = region
                .iter()
                .map(|iv| {
                    let w = rng.random_range(0.0..0.1);
                    let lo = rng.random_range(iv.lo()..iv.hi() - w);
                    Interval::new(lo, lo + w)
                })
                .collect::<IntervalBox>();
            let len = rng.random_range(1..=4);
            let pat: Vec<usize> = (0..len).map(|_| rng.random_range(1..=sys.n_modes())).collect();
            if tube(&sys, &x, &pat, &cfg()).is_err() {
                continue;
            }
            assert_eq!(
                soundness_violations(&sys, &x, &pat, 100, &mut rng),
                0,
                "{name} {x} {pat:?}"
            );
            done += 1;
        }
    }
}
