//! Non-validated fixed-step RK4 in binary64, used for simulation and as a
//! test oracle.

use crate::model::{SwitchedSystem, Tape};

pub struct ReferenceIntegrator<'a> {
    tape: &'a Tape,
    scratch: Vec<f64>,
    k: [Vec<f64>; 4],
    y: Vec<f64>,
}

impl<'a> ReferenceIntegrator<'a> {
    pub fn new(sys: &'a SwitchedSystem, mode: usize) -> Self {
        let n = sys.dim();
        Self {
            tape: sys.tape(mode),
            scratch: Vec::with_capacity(sys.tape(mode).len()),
            k: std::array::from_fn(|_| vec![0.0; n]),
            y: vec![0.0; n],
        }
    }

    /// Advances `x` by one classical RK4 step of length `h` with constant `d`.
    pub fn step(&mut self, x: &mut [f64], d: &[f64], h: f64) {
        let n = x.len();
        const A: [f64; 4] = [0.0, 0.5, 0.5, 1.0];
        for s in 0..4 {
            if s == 0 {
                self.y.copy_from_slice(x);
            } else {
                for i in 0..n {
                    self.y[i] = x[i] + h * A[s] * self.k[s - 1][i];
                }
            }
            self.tape.eval_point_into(&self.y, d, &mut self.k[s], &mut self.scratch);
        }
        for i in 0..n {
            x[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
    }
}

pub fn reference_step(sys: &SwitchedSystem, mode: usize, x: &mut [f64], d: &[f64], h: f64) {
    ReferenceIntegrator::new(sys, mode).step(x, d, h);
}
