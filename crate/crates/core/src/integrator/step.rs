//! One validated Runge-Kutta step.

use crate::error::IntervalError;
use crate::ibox::IntervalBox;
use crate::integrator::{IntegrationError, IntegratorConfig};
use crate::interval::Interval;
use crate::model::{SwitchedSystem, Tape};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<T: Scalar = f64> {
    /// Enclosure of the state at the end of the step.
    pub x_next: IntervalBox<T>,
    /// Certified Picard enclosure of the state over the whole step.
    pub apriori: IntervalBox<T>,
    /// Tighter enclosure over the whole step: the RK map evaluated with
    /// step length `[0, h]`, intersected with `apriori`.
    pub enclosure: IntervalBox<T>,
    pub h: Interval<T>,
    /// Truncation error term that was added to the RK update.
    pub lte: IntervalBox<T>,
}

fn picard_image<T: Scalar>(
    tape: &Tape,
    x0: &[Interval<T>],
    span: Interval<T>,
    x: &[Interval<T>],
    d: &[Interval<T>],
    out: &mut [Interval<T>],
    scratch: &mut Vec<Interval<T>>,
) -> Result<(), IntervalError> {
    tape.eval_into(x, d, out, scratch)?;
    for (o, a) in out.iter_mut().zip(x0) {
        *o = *a + span * *o;
    }
    Ok(())
}

fn is_zero<T: Scalar>(a: &Interval<T>) -> bool {
    a.lo() == T::zero() && a.hi() == T::zero()
}

fn subset<T: Scalar>(a: &[Interval<T>], b: &[Interval<T>]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.subset_of(y))
}

/// A box `X` with `x0 + [0,h]·f(X, [d]) ⊆ X`. Every solution starting in
/// `x0` stays in `X` for `t ∈ [0, h]`.
pub fn picard_enclosure<T: Scalar>(
    sys: &SwitchedSystem,
    mode: usize,
    x0: &IntervalBox<T>,
    h: Interval<T>,
    cfg: &IntegratorConfig,
) -> Result<IntervalBox<T>, IntegrationError> {
    sys.check_mode(mode)?;
    if x0.dim() != sys.dim() {
        return Err(IntegrationError::DimensionMismatch {
            expected: sys.dim(),
            found: x0.dim(),
        });
    }
    let tape = sys.tape(mode);
    let d: Vec<Interval<T>> = sys.dist_box().cast::<T>().into_intervals();
    let x0 = x0.intervals();
    let span = Interval::new(T::zero(), h.hi());
    let n = x0.len();
    let mut scratch = Vec::with_capacity(tape.len());
    let mut cand = vec![Interval::zero(); n];

    let frac = T::from_f64_up(cfg.seed_fraction);
    let pad = T::from_f64_up(cfg.seed_padding);
    let mut seed: Vec<Interval<T>> = x0.iter().map(|x| x.widen(frac, pad)).collect();
    let factor = T::from_f64_up(cfg.inflation_factor);
    let abs = T::from_f64_up(cfg.inflation_padding);

    for _ in 0..=cfg.max_inflations {
        let ok = picard_image(tape, x0, span, &seed, &d, &mut cand, &mut scratch).is_ok();
        if ok && subset(&cand, &seed) {
            return Ok(IntervalBox::new(refine(
                tape,
                x0,
                span,
                seed,
                cand,
                &d,
                cfg.refinements,
                &mut scratch,
            )));
        }
        if !ok || cand.iter().any(|c| !c.lo().is_finite() || !c.hi().is_finite()) {
            break;
        }
        for (s, c) in seed.iter_mut().zip(&cand) {
            *s = s.hull(c).inflate(factor, abs);
        }
    }
    Err(IntegrationError::EnclosureFailure {
        h: h.hi().to_f64().unwrap_or(f64::NAN),
    })
}

// Shrinks a verified enclosure. `x` satisfies P(x) ⊆ x and `px = P(x)`;
// `px` replaces `x` only once P(px) ⊆ px has been checked.
#[allow(clippy::too_many_arguments)]
fn refine<T: Scalar>(
    tape: &Tape,
    x0: &[Interval<T>],
    span: Interval<T>,
    mut x: Vec<Interval<T>>,
    mut px: Vec<Interval<T>>,
    d: &[Interval<T>],
    iterations: usize,
    scratch: &mut Vec<Interval<T>>,
) -> Vec<Interval<T>> {
    let mut ppx = vec![Interval::zero(); x.len()];
    for _ in 0..iterations {
        if picard_image(tape, x0, span, &px, d, &mut ppx, scratch).is_err() || !subset(&ppx, &px) {
            break;
        }
        std::mem::swap(&mut x, &mut px);
        std::mem::swap(&mut px, &mut ppx);
    }
    x
}

/// Stage values `k_i = f(y_i, d)` with `y_i = x + h Σ_j a_ij k_j`.
fn stages<T: Scalar>(
    tape: &Tape,
    x: &[Interval<T>],
    d: &[Interval<T>],
    h: Interval<T>,
    a: &[Interval<T>],
    s: usize,
    scratch: &mut Vec<Interval<T>>,
) -> Result<(Vec<Vec<Interval<T>>>, Vec<Vec<Interval<T>>>), IntervalError> {
    let n = x.len();
    let mut ys: Vec<Vec<Interval<T>>> = Vec::with_capacity(s);
    let mut ks: Vec<Vec<Interval<T>>> = Vec::with_capacity(s);
    for i in 0..s {
        let y: Vec<Interval<T>> = (0..n)
            .map(|c| {
                let mut acc = Interval::zero();
                for (j, k) in ks.iter().enumerate() {
                    if !is_zero(&a[i * s + j]) {
                        acc = acc + a[i * s + j] * k[c];
                    }
                }
                x[c] + h * acc
            })
            .collect();
        let mut k = vec![Interval::zero(); n];
        tape.eval_into(&y, d, &mut k, scratch)?;
        ys.push(y);
        ks.push(k);
    }
    Ok((ys, ks))
}

fn combine<T: Scalar>(
    x: &[Interval<T>],
    h: Interval<T>,
    b: &[Interval<T>],
    ks: &[Vec<Interval<T>>],
) -> Vec<Interval<T>> {
    (0..x.len())
        .map(|c| {
            let mut acc = Interval::zero();
            for (bi, k) in b.iter().zip(ks) {
                acc = acc + *bi * k[c];
            }
            x[c] + h * acc
        })
        .collect()
}

/// RK map `x + h Σ b_i k_i` over the box: natural extension intersected
/// with the mean-value form. `h` may be an interval of step lengths.
fn rk_update<T: Scalar>(
    tape: &Tape,
    x: &[Interval<T>],
    d: &[Interval<T>],
    h: Interval<T>,
    a: &[Interval<T>],
    b: &[Interval<T>],
    scratch: &mut Vec<Interval<T>>,
) -> Result<Vec<Interval<T>>, IntervalError> {
    let (ys, ks) = stages(tape, x, d, h, a, b.len(), scratch)?;
    let mut rk = combine(x, h, b, &ks);
    if x.iter().any(|c| !c.is_point()) {
        if let Ok(mv) = mean_value_update(tape, x, d, h, a, b, &ys, scratch) {
            for (r, m) in rk.iter_mut().zip(&mv) {
                let both = r.intersect(m);
                if !both.is_empty() {
                    *r = both;
                }
            }
        }
    }
    Ok(rk)
}

/// Mean-value form of the RK map: `RK(m) + J(x)·(x − m)` where `J` encloses
/// the Jacobian of the update over `x`.
fn mean_value_update<T: Scalar>(
    tape: &Tape,
    x: &[Interval<T>],
    d: &[Interval<T>],
    h: Interval<T>,
    a: &[Interval<T>],
    b: &[Interval<T>],
    ys: &[Vec<Interval<T>>],
    scratch: &mut Vec<Interval<T>>,
) -> Result<Vec<Interval<T>>, IntervalError> {
    let n = x.len();
    let s = b.len();
    let m: Vec<Interval<T>> = x.iter().map(|c| Interval::point(c.mid())).collect();
    let (_, km) = stages(tape, &m, d, h, a, s, scratch)?;
    let rk_m = combine(&m, h, b, &km);

    // J_ki = Jf(y_i) (I + h Σ_j a_ij J_kj), row-major n×n
    let mut jk: Vec<Vec<Interval<T>>> = Vec::with_capacity(s);
    for i in 0..s {
        let (_, jf) = tape.jacobian(&ys[i], d)?;
        let mut inner = vec![Interval::zero(); n * n];
        for r in 0..n {
            inner[r * n + r] = Interval::one();
        }
        for (j, jkj) in jk.iter().enumerate() {
            let aij = a[i * s + j];
            if is_zero(&aij) {
                continue;
            }
            let w = h * aij;
            for (e, v) in inner.iter_mut().zip(jkj) {
                *e = *e + w * *v;
            }
        }
        let mut prod = vec![Interval::zero(); n * n];
        for r in 0..n {
            for c in 0..n {
                let mut acc = Interval::zero();
                for l in 0..n {
                    acc = acc + jf[r * n + l] * inner[l * n + c];
                }
                prod[r * n + c] = acc;
            }
        }
        jk.push(prod);
    }
    let mut jrk = vec![Interval::zero(); n * n];
    for r in 0..n {
        jrk[r * n + r] = Interval::one();
    }
    for (bi, jki) in b.iter().zip(&jk) {
        let w = h * *bi;
        for (e, v) in jrk.iter_mut().zip(jki) {
            *e = *e + w * *v;
        }
    }
    Ok((0..n)
        .map(|r| {
            let mut acc = rk_m[r];
            for c in 0..n {
                acc = acc + jrk[r * n + c] * (x[c] - m[c]);
            }
            acc
        })
        .collect())
}

/// Taylor coefficient `p+1` (in time) of the RK map `φ(t) = x + t Σ b_i k_i(t)`
/// enclosed over `t ∈ [0, h]`.
fn scheme_remainder<T: Scalar>(
    tape: &Tape,
    x: &[Interval<T>],
    d: &[Interval<T>],
    h: Interval<T>,
    a: &[Interval<T>],
    b: &[Interval<T>],
    p: usize,
) -> Result<Vec<Interval<T>>, IntervalError> {
    let n = x.len();
    let s = b.len();
    let t0 = Interval::new(T::zero(), h.hi());
    let order = p + 1;
    let mut jets: Vec<_> = (0..s).map(|_| tape.new_jet::<T>(order + 1)).collect();
    // k[i][q] is coefficient q of stage i, an n-vector
    let mut k: Vec<Vec<Vec<Interval<T>>>> = vec![Vec::with_capacity(order + 1); s];
    let mut y = vec![Interval::zero(); n];
    for q in 0..=order {
        for i in 0..s {
            for c in 0..n {
                let mut cur = Interval::zero();
                let mut prev = Interval::zero();
                for j in 0..i {
                    let aij = a[i * s + j];
                    if is_zero(&aij) {
                        continue;
                    }
                    cur = cur + aij * k[j][q][c];
                    if q > 0 {
                        prev = prev + aij * k[j][q - 1][c];
                    }
                }
                y[c] = if q == 0 { x[c] + t0 * cur } else { t0 * cur + prev };
            }
            tape.jet_push(&mut jets[i], &y, d)?;
            let kq = (0..n).map(|c| tape.jet_output(&jets[i], c, q)).collect();
            k[i].push(kq);
        }
    }
    let g = |q: usize, c: usize| {
        let mut acc = Interval::zero();
        for (bi, ki) in b.iter().zip(&k) {
            acc = acc + *bi * ki[q][c];
        }
        acc
    };
    Ok((0..n).map(|c| t0 * g(order, c) + g(order - 1, c)).collect())
}

/// One validated step of length `h` from the box `xn`.
pub fn validated_step<T: Scalar>(
    sys: &SwitchedSystem,
    mode: usize,
    xn: &IntervalBox<T>,
    h: Interval<T>,
    cfg: &IntegratorConfig,
) -> Result<StepResult<T>, IntegrationError> {
    let apriori = picard_enclosure(sys, mode, xn, h, cfg)?;
    let tape = sys.tape(mode);
    let d: Vec<Interval<T>> = sys.dist_box().cast::<T>().into_intervals();
    let scheme = cfg.scheme;
    let (a, b) = scheme.tableau::<T>();
    let p = scheme.order();
    let x = xn.intervals();
    let n = x.len();
    let mut scratch = Vec::with_capacity(tape.len());

    let rk = rk_update(tape, x, &d, h, &a, &b, &mut scratch)?;
    let span = Interval::new(T::zero(), h.hi());
    let rk_span = rk_update(tape, x, &d, span, &a, &b, &mut scratch)?;

    let sol = tape.ode_series(apriori.intervals(), &d, p + 1)?;
    let phi = scheme_remainder(tape, x, &d, h, &a, &b, p)?;
    let hp = h.powi(p as u32 + 1);
    let lte: Vec<Interval<T>> = (0..n).map(|c| hp * (sol[p + 1][c] - phi[c])).collect();

    let tol = T::from_f64_down(cfg.lte_tol);
    if let Some(w) = lte.iter().map(|e| e.width()).find(|w| *w > tol) {
        return Err(IntegrationError::StepTooWide {
            h: h.hi().to_f64().unwrap_or(f64::NAN),
            width: w.to_f64().unwrap_or(f64::INFINITY),
        });
    }

    let clip = |v: Interval<T>, c: usize| {
        let clipped = v.intersect(&apriori[c]);
        if clipped.is_empty() {
            v
        } else {
            clipped
        }
    };
    let x_next: Vec<Interval<T>> = (0..n).map(|c| clip(rk[c] + lte[c], c)).collect();
    // for t in [0, h] the remainder is t^(p+1)(...), which spans hull(0, lte)
    let enclosure: Vec<Interval<T>> = (0..n)
        .map(|c| clip(rk_span[c] + lte[c].hull(&Interval::zero()), c))
        .collect();
    Ok(StepResult {
        x_next: IntervalBox::new(x_next),
        apriori,
        enclosure: IntervalBox::new(enclosure),
        h,
        lte: IntervalBox::new(lte),
    })
}
