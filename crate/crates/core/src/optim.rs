//! Nelder–Mead simplex minimization.

use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::fmath::*;

#[derive(Clone, Debug)]
pub struct NelderMead {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_evals: usize,
    /// Stop when the spread of function values across the simplex falls below
    /// `f_tol · (1 + |f_best|)`.
    pub f_tol: f64,
    /// Initial simplex edge length along each axis.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_evals: 20_000,
            f_tol: 1e-10,
            initial_step: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimize `f` from `x0`. Non-finite function values are treated as
    /// `+inf`, so the simplex retreats from infeasible regions.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let f0 = eval(x0, &mut evals);
        simplex.push((x0.to_vec(), f0));
        for i in 0..n {
            let mut x = x0.to_vec();
            let step = if x[i] != 0.0 { self.initial_step * x[i].abs().max(1.0) } else { self.initial_step };
            x[i] += step;
            let fx = eval(&x, &mut evals);
            simplex.push((x, fx));
        }
        let mut converged = false;
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            if worst.is_finite() && (worst - best).abs() <= self.f_tol * (1.0 + best.abs()) {
                converged = true;
                break;
            }
            let mut centroid = alloc::vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
                centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect()
            };
            let xr = toward(self.reflection, &simplex[n].0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = toward(self.reflection * self.expansion, &simplex[n].0);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            // Contraction: outside if the reflected point beats the worst.
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = toward(self.reflection * self.contraction, &simplex[n].0);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = toward(-self.contraction, &simplex[n].0);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
                continue;
            }
            let x_best = simplex[0].0.clone();
            for (x, fx) in simplex.iter_mut().skip(1) {
                for (xi, bi) in x.iter_mut().zip(&x_best) {
                    *xi = bi + self.shrink * (*xi - bi);
                }
                *fx = eval(x, &mut evals);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, f) = simplex.swap_remove(0);
        Minimum { x, f, evals, converged }
    }

    /// Minimize, then restart the simplex at the optimum until the value
    /// stops improving (at most `rounds` passes).
    pub fn minimize_polished<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64], rounds: usize) -> Minimum {
        let mut best = self.minimize(&mut f, x0);
        let mut total = best.evals;
        for _ in 1..rounds.max(1) {
            let next = self.minimize(&mut f, &best.x);
            total += next.evals;
            let improved = next.f < best.f - self.f_tol * (1.0 + best.f.abs());
            if next.f <= best.f {
                best = next;
            }
            if !improved {
                break;
            }
        }
        best.evals = total;
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let nm = NelderMead { max_evals: 50_000, f_tol: 1e-14, ..Default::default() };
        let r = nm.minimize_polished(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), &[-1.2, 1.0], 5);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn quadratic_in_four_dimensions() {
        let target = [1.0, -2.0, 3.0, 0.5];
        let r = NelderMead::default().minimize_polished(
            |x| x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b) * 3.0).sum::<f64>(),
            &[0.0; 4],
            10,
        );
        for (a, b) in r.x.iter().zip(target) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).abs() };
        let r = NelderMead::default().minimize(f, &[0.5]);
        assert!(r.f <= 1.5);
    }
}
