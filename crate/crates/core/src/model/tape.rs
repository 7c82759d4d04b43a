//! Flattened expression DAG for one mode's vector field.
//!
//! The tape is evaluated in four ways: natural interval extension, point
//! evaluation in binary64, forward-mode interval Jacobian, and Taylor-mode
//! jets where every node carries a truncated power series in time.

use std::collections::HashMap;

use crate::error::IntervalError;
use crate::interval::Interval;
use crate::model::expr::{BinaryOp, Expr, UnaryOp, Var};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    /// Enclosure bounds and point value, as raw bits.
    Const(u64, u64, u64),
    State(usize),
    Dist(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, u32),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Sqrt(usize),
}

fn konst(lo: f64, hi: f64, val: f64) -> Op {
    Op::Const(lo.to_bits(), hi.to_bits(), val.to_bits())
}

#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    // first auxiliary series slot of each node (Pow, Sin, Cos only)
    aux: Vec<usize>,
    n_aux: usize,
    outputs: Vec<usize>,
    n_states: usize,
    n_dists: usize,
}

struct Builder {
    ops: Vec<Op>,
    index: HashMap<Op, usize>,
}

impl Builder {
    fn push(&mut self, op: Op) -> usize {
        if let Some(&i) = self.index.get(&op) {
            return i;
        }
        let i = self.ops.len();
        self.ops.push(op);
        self.index.insert(op, i);
        i
    }

    fn as_const(&self, i: usize) -> Option<(Interval<f64>, f64)> {
        match self.ops[i] {
            Op::Const(lo, hi, v) => Some((Interval::new(f64::from_bits(lo), f64::from_bits(hi)), f64::from_bits(v))),
            _ => None,
        }
    }

    fn lower(&mut self, e: &Expr) -> usize {
        match e {
            Expr::Const(c) => {
                let enc: Interval<f64> = c.enclosure();
                self.push(konst(enc.lo(), enc.hi(), c.value()))
            }
            Expr::Var(Var::State(i)) => self.push(Op::State(*i)),
            Expr::Var(Var::Dist(j)) => self.push(Op::Dist(*j)),
            Expr::Unary(op, a) => {
                let a = self.lower(a);
                if let Some((c, v)) = self.as_const(a) {
                    let folded = match op {
                        UnaryOp::Neg => Ok((-c, -v)),
                        UnaryOp::Sin => Ok((c.sin(), v.sin())),
                        UnaryOp::Cos => Ok((c.cos(), v.cos())),
                        UnaryOp::Exp => Ok((c.exp(), v.exp())),
                        UnaryOp::Sqrt => c.sqrt().map(|r| (r, v.sqrt())),
                    };
                    if let Ok((r, v)) = folded {
                        return self.push(konst(r.lo(), r.hi(), v));
                    }
                }
                self.push(match op {
                    UnaryOp::Neg => Op::Neg(a),
                    UnaryOp::Sin => Op::Sin(a),
                    UnaryOp::Cos => Op::Cos(a),
                    UnaryOp::Exp => Op::Exp(a),
                    UnaryOp::Sqrt => Op::Sqrt(a),
                })
            }
            Expr::Binary(op, a, b) => {
                let a = self.lower(a);
                let b = self.lower(b);
                if let (Some((x, u)), Some((y, v))) = (self.as_const(a), self.as_const(b)) {
                    let folded = match op {
                        BinaryOp::Add => Ok((x + y, u + v)),
                        BinaryOp::Sub => Ok((x - y, u - v)),
                        BinaryOp::Mul => Ok((x * y, u * v)),
                        BinaryOp::Div => x.checked_div(&y).map(|r| (r, u / v)),
                    };
                    if let Ok((r, v)) = folded {
                        return self.push(konst(r.lo(), r.hi(), v));
                    }
                }
                self.push(match op {
                    BinaryOp::Add => Op::Add(a, b),
                    BinaryOp::Sub => Op::Sub(a, b),
                    BinaryOp::Mul => Op::Mul(a, b),
                    BinaryOp::Div => Op::Div(a, b),
                })
            }
            Expr::Pow(a, n) => {
                let a = self.lower(a);
                if *n == 1 {
                    return a;
                }
                if let Some((c, v)) = self.as_const(a) {
                    let r = c.powi(*n);
                    return self.push(konst(r.lo(), r.hi(), v.powi(*n as i32)));
                }
                self.push(Op::Pow(a, *n))
            }
        }
    }
}

// Drops nodes left behind by constant folding; keeps topological order.
fn prune(ops: &[Op], roots: &[usize]) -> (Vec<Op>, Vec<usize>) {
    let mut live = vec![false; ops.len()];
    for &r in roots {
        live[r] = true;
    }
    for i in (0..ops.len()).rev() {
        if !live[i] {
            continue;
        }
        match ops[i] {
            Op::Neg(a) | Op::Pow(a, _) | Op::Sin(a) | Op::Cos(a) | Op::Exp(a) | Op::Sqrt(a) => live[a] = true,
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                live[a] = true;
                live[b] = true;
            }
            Op::Const(..) | Op::State(_) | Op::Dist(_) => {}
        }
    }
    let mut remap = vec![usize::MAX; ops.len()];
    let mut out = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        if !live[i] {
            continue;
        }
        let r = |a: usize| remap[a];
        let op = match *op {
            Op::Neg(a) => Op::Neg(r(a)),
            Op::Pow(a, n) => Op::Pow(r(a), n),
            Op::Sin(a) => Op::Sin(r(a)),
            Op::Cos(a) => Op::Cos(r(a)),
            Op::Exp(a) => Op::Exp(r(a)),
            Op::Sqrt(a) => Op::Sqrt(r(a)),
            Op::Add(a, b) => Op::Add(r(a), r(b)),
            Op::Sub(a, b) => Op::Sub(r(a), r(b)),
            Op::Mul(a, b) => Op::Mul(r(a), r(b)),
            Op::Div(a, b) => Op::Div(r(a), r(b)),
            leaf => leaf,
        };
        remap[i] = out.len();
        out.push(op);
    }
    (out, roots.iter().map(|&r| remap[r]).collect())
}

fn small<T: Scalar>(k: usize) -> Interval<T> {
    Interval::from_usize(k)
}

impl Tape {
    pub fn compile(rhs: &[Expr], n_states: usize, n_dists: usize) -> Self {
        let mut b = Builder {
            ops: Vec::new(),
            index: HashMap::new(),
        };
        let roots: Vec<usize> = rhs.iter().map(|e| b.lower(e)).collect();
        let (ops, outputs) = prune(&b.ops, &roots);
        let mut aux = Vec::with_capacity(ops.len());
        let mut n_aux = 0;
        for op in &ops {
            aux.push(n_aux);
            n_aux += match op {
                Op::Pow(_, n) => *n as usize - 2,
                Op::Sin(_) | Op::Cos(_) => 1,
                _ => 0,
            };
        }
        Self {
            ops,
            aux,
            n_aux,
            outputs,
            n_states,
            n_dists,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_dists(&self) -> usize {
        self.n_dists
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn constant<T: Scalar>(lo: u64, hi: u64) -> Interval<T> {
        Interval::from_f64_bounds(f64::from_bits(lo), f64::from_bits(hi))
    }

    /// Natural interval extension; `scratch` is resized as needed.
    pub fn eval_into<T: Scalar>(
        &self,
        x: &[Interval<T>],
        d: &[Interval<T>],
        out: &mut [Interval<T>],
        scratch: &mut Vec<Interval<T>>,
    ) -> Result<(), IntervalError> {
        scratch.clear();
        for op in &self.ops {
            let v = match *op {
                Op::Const(lo, hi, _) => Self::constant(lo, hi),
                Op::State(i) => x[i],
                Op::Dist(j) => d[j],
                Op::Neg(a) => -scratch[a],
                Op::Add(a, b) => scratch[a] + scratch[b],
                Op::Sub(a, b) => scratch[a] - scratch[b],
                Op::Mul(a, b) => scratch[a] * scratch[b],
                Op::Div(a, b) => scratch[a].checked_div(&scratch[b])?,
                Op::Pow(a, n) => scratch[a].powi(n),
                Op::Sin(a) => scratch[a].sin(),
                Op::Cos(a) => scratch[a].cos(),
                Op::Exp(a) => scratch[a].exp(),
                Op::Sqrt(a) => scratch[a].sqrt()?,
            };
            scratch.push(v);
        }
        for (o, &i) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[i];
        }
        Ok(())
    }

    pub fn eval<T: Scalar>(&self, x: &[Interval<T>], d: &[Interval<T>]) -> Result<Vec<Interval<T>>, IntervalError> {
        let mut out = vec![Interval::zero(); self.outputs.len()];
        self.eval_into(x, d, &mut out, &mut Vec::with_capacity(self.ops.len()))?;
        Ok(out)
    }

    /// Plain binary64 evaluation.
    pub fn eval_point_into(&self, x: &[f64], d: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        scratch.clear();
        for op in &self.ops {
            let v = match *op {
                Op::Const(_, _, v) => f64::from_bits(v),
                Op::State(i) => x[i],
                Op::Dist(j) => d[j],
                Op::Neg(a) => -scratch[a],
                Op::Add(a, b) => scratch[a] + scratch[b],
                Op::Sub(a, b) => scratch[a] - scratch[b],
                Op::Mul(a, b) => scratch[a] * scratch[b],
                Op::Div(a, b) => scratch[a] / scratch[b],
                Op::Pow(a, n) => scratch[a].powi(n as i32),
                Op::Sin(a) => scratch[a].sin(),
                Op::Cos(a) => scratch[a].cos(),
                Op::Exp(a) => scratch[a].exp(),
                Op::Sqrt(a) => scratch[a].sqrt(),
            };
            scratch.push(v);
        }
        for (o, &i) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[i];
        }
    }

    /// Values and Jacobian `∂f/∂x` (row-major, `n × n_states`) over the box.
    pub fn jacobian<T: Scalar>(
        &self,
        x: &[Interval<T>],
        d: &[Interval<T>],
    ) -> Result<(Vec<Interval<T>>, Vec<Interval<T>>), IntervalError> {
        let n = self.n_states;
        let mut val: Vec<Interval<T>> = Vec::with_capacity(self.ops.len());
        let mut grad: Vec<Interval<T>> = vec![Interval::zero(); self.ops.len() * n];
        let two = small::<T>(2);
        for (k, op) in self.ops.iter().enumerate() {
            let (done, rest) = grad.split_at_mut(k * n);
            let g = &mut rest[..n];
            let ga = |a: usize| &done[a * n..(a + 1) * n];
            let v = match *op {
                Op::Const(lo, hi, _) => Self::constant(lo, hi),
                Op::State(i) => {
                    g[i] = Interval::one();
                    x[i]
                }
                Op::Dist(j) => d[j],
                Op::Neg(a) => {
                    for (gi, ai) in g.iter_mut().zip(ga(a)) {
                        *gi = -*ai;
                    }
                    -val[a]
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sub = matches!(op, Op::Sub(..));
                    for ((gi, ai), bi) in g.iter_mut().zip(ga(a)).zip(ga(b)) {
                        *gi = if sub { *ai - *bi } else { *ai + *bi };
                    }
                    if sub {
                        val[a] - val[b]
                    } else {
                        val[a] + val[b]
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (val[a], val[b]);
                    for ((gi, ai), bi) in g.iter_mut().zip(ga(a)).zip(ga(b)) {
                        *gi = *ai * vb + *bi * va;
                    }
                    va * vb
                }
                Op::Div(a, b) => {
                    let q = val[a].checked_div(&val[b])?;
                    for ((gi, ai), bi) in g.iter_mut().zip(ga(a)).zip(ga(b)) {
                        *gi = (*ai - q * *bi).checked_div(&val[b])?;
                    }
                    q
                }
                Op::Pow(a, n) => {
                    let dv = small::<T>(n as usize) * val[a].powi(n - 1);
                    for (gi, ai) in g.iter_mut().zip(ga(a)) {
                        *gi = dv * *ai;
                    }
                    val[a].powi(n)
                }
                Op::Sin(a) | Op::Cos(a) | Op::Exp(a) => {
                    let (v, dv) = match op {
                        Op::Sin(_) => (val[a].sin(), val[a].cos()),
                        Op::Cos(_) => (val[a].cos(), -val[a].sin()),
                        _ => {
                            let e = val[a].exp();
                            (e, e)
                        }
                    };
                    for (gi, ai) in g.iter_mut().zip(ga(a)) {
                        *gi = dv * *ai;
                    }
                    v
                }
                Op::Sqrt(a) => {
                    let r = val[a].sqrt()?;
                    let twice = two * r;
                    for (gi, ai) in g.iter_mut().zip(ga(a)) {
                        *gi = ai.checked_div(&twice)?;
                    }
                    r
                }
            };
            val.push(v);
        }
        let values = self.outputs.iter().map(|&i| val[i]).collect();
        let mut jac = Vec::with_capacity(self.outputs.len() * n);
        for &i in &self.outputs {
            jac.extend_from_slice(&grad[i * n..(i + 1) * n]);
        }
        Ok((values, jac))
    }

    pub fn new_jet<T: Scalar>(&self, capacity: usize) -> Jet<T> {
        Jet {
            cap: capacity,
            len: 0,
            vals: vec![Interval::zero(); self.ops.len() * capacity],
            aux: vec![Interval::zero(); self.n_aux * capacity],
        }
    }

    /// Computes Taylor coefficient `jet.len()` of every node, given that
    /// coefficient of the state inputs. Disturbances are constant in time.
    pub fn jet_push<T: Scalar>(
        &self,
        jet: &mut Jet<T>,
        x_k: &[Interval<T>],
        d: &[Interval<T>],
    ) -> Result<(), IntervalError> {
        let k = jet.len;
        assert!(k < jet.cap, "jet capacity exceeded");
        let cap = jet.cap;
        let zero = Interval::<T>::zero();
        for (node, op) in self.ops.iter().enumerate() {
            let vals = &jet.vals;
            let s = |i: usize, j: usize| vals[i * cap + j];
            let v = match *op {
                Op::Const(lo, hi, _) => {
                    if k == 0 {
                        Self::constant(lo, hi)
                    } else {
                        zero
                    }
                }
                Op::State(i) => x_k[i],
                Op::Dist(j) => {
                    if k == 0 {
                        d[j]
                    } else {
                        zero
                    }
                }
                Op::Neg(a) => -s(a, k),
                Op::Add(a, b) => s(a, k) + s(b, k),
                Op::Sub(a, b) => s(a, k) - s(b, k),
                Op::Mul(a, b) => {
                    let mut acc = zero;
                    for j in 0..=k {
                        acc = acc + s(a, j) * s(b, k - j);
                    }
                    acc
                }
                Op::Div(a, b) => {
                    let mut acc = s(a, k);
                    for j in 0..k {
                        acc = acc - s(node, j) * s(b, k - j);
                    }
                    acc.checked_div(&s(b, 0))?
                }
                Op::Pow(a, n) => {
                    // series of a^m for m = 2..n, the last one being the node
                    let base = jet.aux_base(self.aux[node]);
                    let mut prev_slot: Option<usize> = None;
                    let mut result = zero;
                    for m in 2..=n {
                        let value = if k == 0 {
                            s(a, 0).powi(m)
                        } else {
                            let mut acc = zero;
                            for j in 0..=k {
                                let p = match prev_slot {
                                    None => s(a, k - j),
                                    Some(slot) => jet.aux[slot + k - j],
                                };
                                acc = acc + s(a, j) * p;
                            }
                            acc
                        };
                        if m < n {
                            let slot = base + (m as usize - 2) * cap;
                            jet.aux[slot + k] = value;
                            prev_slot = Some(slot);
                        } else {
                            result = value;
                        }
                    }
                    result
                }
                Op::Sin(a) | Op::Cos(a) => {
                    // paired series: this node and its co-function in aux
                    let slot = jet.aux_base(self.aux[node]);
                    let is_sin = matches!(op, Op::Sin(_));
                    let (v, w) = if k == 0 {
                        let x0 = s(a, 0);
                        if is_sin {
                            (x0.sin(), x0.cos())
                        } else {
                            (x0.cos(), x0.sin())
                        }
                    } else {
                        let mut sum_v = zero;
                        let mut sum_w = zero;
                        for j in 1..=k {
                            let ja = small::<T>(j) * s(a, j);
                            sum_v = sum_v + ja * jet.aux[slot + k - j];
                            sum_w = sum_w + ja * s(node, k - j);
                        }
                        let kk = small::<T>(k);
                        let sv = sum_v.checked_div(&kk)?;
                        let sw = sum_w.checked_div(&kk)?;
                        // sin' = cos·a', cos' = -sin·a'
                        if is_sin {
                            (sv, -sw)
                        } else {
                            (-sv, sw)
                        }
                    };
                    jet.aux[slot + k] = w;
                    v
                }
                Op::Exp(a) => {
                    if k == 0 {
                        s(a, 0).exp()
                    } else {
                        let mut acc = zero;
                        for j in 1..=k {
                            acc = acc + small::<T>(j) * s(a, j) * s(node, k - j);
                        }
                        acc.checked_div(&small(k))?
                    }
                }
                Op::Sqrt(a) => {
                    if k == 0 {
                        s(a, 0).sqrt()?
                    } else {
                        let mut acc = s(a, k);
                        for j in 1..k {
                            acc = acc - s(node, j) * s(node, k - j);
                        }
                        acc.checked_div(&(small::<T>(2) * s(node, 0)))?
                    }
                }
            };
            jet.vals[node * cap + k] = v;
        }
        jet.len += 1;
        Ok(())
    }

    /// Coefficient `k` of output component `i`.
    pub fn jet_output<T: Scalar>(&self, jet: &Jet<T>, i: usize, k: usize) -> Interval<T> {
        debug_assert!(k < jet.len);
        jet.vals[self.outputs[i] * jet.cap + k]
    }

    /// Taylor coefficients `x[0..=order]` of the solution of `x' = f(x, d)`
    /// through the box `x0`, with `d` constant.
    pub fn ode_series<T: Scalar>(
        &self,
        x0: &[Interval<T>],
        d: &[Interval<T>],
        order: usize,
    ) -> Result<Vec<Vec<Interval<T>>>, IntervalError> {
        let mut jet = self.new_jet(order.max(1));
        let mut coeffs = vec![x0.to_vec()];
        for k in 0..order {
            self.jet_push(&mut jet, &coeffs[k], d)?;
            let kk = small::<T>(k + 1);
            let next = (0..self.outputs.len())
                .map(|i| self.jet_output(&jet, i, k).checked_div(&kk))
                .collect::<Result<Vec<_>, _>>()?;
            coeffs.push(next);
        }
        Ok(coeffs)
    }
}

/// Truncated Taylor series of every tape node.
#[derive(Debug, Clone)]
pub struct Jet<T: Scalar> {
    cap: usize,
    len: usize,
    vals: Vec<Interval<T>>,
    aux: Vec<Interval<T>>,
}

impl<T: Scalar> Jet<T> {
    /// Number of coefficients computed so far.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn reset(&mut self) {
        self.len = 0;
    }

    fn aux_base(&self, first: usize) -> usize {
        first * self.cap
    }
}
