//! Derivative-free Nelder–Mead simplex minimisation.

/// Stopping and restart controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: f64,
    /// Converged once every vertex lies within this distance (max-norm) of the best one...
    pub x_tol: f64,
    /// ...or once the objective spread across the simplex drops below this.
    pub f_tol: f64,
    pub max_iterations: usize,
    /// Fresh simplices built around the incumbent after convergence.
    pub restarts: usize,
    /// Stop as soon as the best value reaches this; for objectives with a known lower bound.
    pub f_target: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            x_tol: 1e-8,
            f_tol: 1e-8,
            max_iterations: 2000,
            restarts: 2,
            f_target: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Simplex {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Simplex {
    fn around<F: FnMut(&[f64]) -> f64>(x0: &[f64], step: f64, f: &mut F) -> Self {
        let mut points = vec![x0.to_vec()];
        for k in 0..x0.len() {
            let mut p = x0.to_vec();
            p[k] += step;
            points.push(p);
        }
        let values = points.iter().map(|p| sanitize(f(p))).collect();
        let mut s = Self { points, values };
        s.sort();
        s
    }

    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.points = order.iter().map(|&i| self.points[i].clone()).collect();
        self.values = order.iter().map(|&i| self.values[i]).collect();
    }

    fn x_spread(&self) -> f64 {
        let best = &self.points[0];
        self.points[1..]
            .iter()
            .flat_map(|p| p.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    fn f_spread(&self) -> f64 {
        self.values[self.values.len() - 1] - self.values[0]
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn lerp(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

/// Minimises `f` from `x0`. Deterministic for a deterministic `f`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    assert!(!x0.is_empty(), "need at least one dimension");
    let n = x0.len();
    let mut simplex = Simplex::around(x0, opts.initial_step, &mut f);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut restarts_left = opts.restarts;
    let mut converged = false;

    while iterations < opts.max_iterations {
        if simplex.values[0] <= opts.f_target {
            converged = true;
            break;
        }
        if simplex.x_spread() < opts.x_tol || simplex.f_spread() < opts.f_tol {
            converged = true;
            if restarts_left == 0 {
                break;
            }
            restarts_left -= 1;
            let before = simplex.values[0];
            let best = simplex.points[0].clone();
            let fresh = Simplex::around(&best, opts.initial_step, &mut f);
            // the incumbent is a vertex of the fresh simplex; stop if no other vertex beats it
            if fresh.values[0] >= before {
                break;
            }
            simplex = fresh;
            converged = false;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex.points[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex.points[n].clone();
        let f_worst = simplex.values[n];
        let f_second = simplex.values[n - 1];
        let f_best = simplex.values[0];

        let reflected = lerp(&centroid, &worst, -REFLECT);
        let f_r = sanitize(f(&reflected));

        if f_r < f_best {
            let expanded = lerp(&centroid, &worst, -EXPAND);
            let f_e = sanitize(f(&expanded));
            if f_e < f_r {
                simplex.points[n] = expanded;
                simplex.values[n] = f_e;
            } else {
                simplex.points[n] = reflected;
                simplex.values[n] = f_r;
            }
        } else if f_r < f_second {
            simplex.points[n] = reflected;
            simplex.values[n] = f_r;
        } else {
            let (candidate, f_c) = if f_r < f_worst {
                let c = lerp(&centroid, &reflected, CONTRACT);
                let v = sanitize(f(&c));
                (c, v)
            } else {
                let c = lerp(&centroid, &worst, CONTRACT);
                let v = sanitize(f(&c));
                (c, v)
            };
            if f_c < f_r.min(f_worst) {
                simplex.points[n] = candidate;
                simplex.values[n] = f_c;
            } else {
                let best = simplex.points[0].clone();
                for i in 1..=n {
                    simplex.points[i] = lerp(&best, &simplex.points[i], SHRINK);
                    simplex.values[i] = sanitize(f(&simplex.points[i]));
                }
            }
        }
        simplex.sort();
        trace.push(simplex.values[0]);
    }
    if !converged && (simplex.values[0] <= opts.f_target || simplex.x_spread() < opts.x_tol || simplex.f_spread() < opts.f_tol) {
        converged = true;
    }

    Minimum {
        x: simplex.points[0].clone(),
        value: simplex.values[0],
        iterations,
        converged,
        trace,
    }
}
